#pragma once

#include "imflow/elements/field.hpp"

#include <Eigen/SparseCholesky>

namespace imflow {

namespace detail {
inline constexpr int kEdgePoints = 8;

// Mean-normalized dual basis of the Lagrange basis of P_k on [0,1] (k = 1, 2),
// nodes at 0, 1 (and 1/2 for k = 2, stored last). Rows: dual function j at
// the Gauss points of the edge rule.
inline Eigen::MatrixXd edge_duals(int k)
{
    const GaussRule& g = gauss_cached(kEdgePoints);
    const int n = k + 1;
    Eigen::MatrixXd phi(n, kEdgePoints);
    for (int q = 0; q < kEdgePoints; ++q) {
        const double s = g.x[q];
        if (k == 1) {
            phi(0, q) = 1 - s;
            phi(1, q) = s;
        } else {
            phi(0, q) = (1 - s) * (1 - 2 * s);
            phi(1, q) = s * (2 * s - 1);
            phi(2, q) = 4 * s * (1 - s);
        }
    }
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
    for (int q = 0; q < kEdgePoints; ++q)
        gram += g.w[q] * phi.col(q) * phi.col(q).transpose();
    return gram.inverse() * phi;
}
} // namespace detail

// <div v, Q_i> for every pressure basis function, written cell by cell as
//   int_{dE} (v.n) q - int_E v . grad q
// so only values of v are needed. Edge integrals use an 8-point Gauss rule.
inline VectorXd divergence_moments(const SpacePair& sp, const VectorFieldFn& v, const TriangleRule& rule)
{
    const auto& t = sp.mesh();
    VectorXd m = VectorXd::Zero(sp.pressure_dim());
    const GaussRule& g = gauss_cached(detail::kEdgePoints);
    PressureBasis pb;
    for (int c = 0; c < t.num_cells(); ++c) {
        const int* pd = sp.pressure_dofs(c);
        const auto G = t.bary_gradients(c);
        for (int k = 0; k < 3; ++k) {
            const int i = (k + 1) % 3, j = (k + 2) % 3;
            const Vec2 A = t.vertex(t.cell(c)[i]), B = t.vertex(t.cell(c)[j]);
            const Vec2 n = -G.row(k).transpose().normalized();
            const double len = (B - A).norm();
            for (int q = 0; q < detail::kEdgePoints; ++q) {
                double l[3] = {0, 0, 0};
                l[i] = 1 - g.x[q];
                l[j] = g.x[q];
                Vec2 val;
                v(c, A + g.x[q] * (B - A), &val, nullptr);
                sp.eval_pressure(c, l, pb);
                const double f = g.w[q] * len * val.dot(n);
                for (int a = 0; a < pb.n; ++a)
                    m[pd[a]] += f * pb.value[a];
            }
        }
        if (sp.n_pressure_local() == 3) {
            for (std::size_t q = 0; q < rule.size(); ++q) {
                Vec2 val;
                v(c, t.map(c, rule.bary[q]), &val, nullptr);
                const double w = rule.w[q] * t.measure(c);
                for (int a = 0; a < 3; ++a)
                    m[pd[a]] -= w * val.dot(G.row(a).transpose());
            }
        }
    }
    return m;
}

inline VectorXd divergence_moments(const SpacePair& sp, const VectorFieldFn& v)
{
    return divergence_moments(sp, v, sp.quadrature(12));
}

// Divergence-preserving projection onto the discrete velocity space:
// a Scott-Zhang part (nodal values from edge integrals against the dual basis
// of the full edge trace space) followed by a pair-specific correction that
// restores the moments <div v, Q> for all discrete pressures.
class VelocityProjector {
public:
    explicit VelocityProjector(const SpacePair& sp) : sp_(sp), rule_(sp.quadrature(12))
    {
        const auto& t = sp.mesh();
        trace_degree_ = sp.kind() == PairKind::mini ? 1 : 2;
        duals_ = detail::edge_duals(trace_degree_);
        vertex_edge_.assign(t.num_vertices(), -1);
        for (int f = 0; f < t.num_facets(); ++f)
            for (int v : t.facet(f))
                if (vertex_edge_[v] < 0)
                    vertex_edge_[v] = f;
        if (sp.kind() == PairKind::taylor_hood)
            build_taylor_hood_correction();
    }

    const SpacePair& pair() const { return sp_; }

    std::string description() const
    {
        switch (sp_.kind()) {
        case PairKind::mini: return "Scott-Zhang P1 + cell-bubble mean correction";
        case PairKind::p2_p0: return "Scott-Zhang P2 + edge-bubble normal-flux correction";
        case PairKind::cr_conforming: return "Scott-Zhang P2 + edge-bubble flux + cell-bubble first-moment correction";
        case PairKind::taylor_hood: return "Scott-Zhang P2 + global minimum-norm edge-bubble correction";
        case PairKind::guzman_neilan: return "Scott-Zhang vertex values + exact edge means";
        }
        return "";
    }

    VectorXd apply(const VectorFieldFn& v) const
    {
        VectorXd U = scott_zhang(v);
        switch (sp_.kind()) {
        case PairKind::mini: correct_cell_means(v, U); break;
        case PairKind::p2_p0: correct_edge_fluxes(v, U); break;
        case PairKind::cr_conforming:
            correct_edge_fluxes(v, U);
            correct_cell_moments(v, U);
            break;
        case PairKind::taylor_hood: correct_global(v, U); break;
        case PairKind::guzman_neilan: break;
        }
        return U;
    }

    // Nodal values only; for GN this already includes the exact edge means.
    VectorXd scott_zhang(const VectorFieldFn& v) const
    {
        const auto& t = sp_.mesh();
        const GaussRule& g = gauss_cached(detail::kEdgePoints);
        VectorXd U = VectorXd::Zero(sp_.velocity_dim());
        auto set = [&](const NodeRef& n, const Vec2& val) {
            const int s = sp_.scalar_index(n);
            if (s >= 0) {
                U[2 * s] = val[0];
                U[2 * s + 1] = val[1];
            }
        };
        auto edge_samples = [&](int f, std::array<Vec2, detail::kEdgePoints>& vals) {
            const auto& e = t.facet(f);
            const Vec2 A = t.vertex(e[0]), B = t.vertex(e[1]);
            const int cell = t.facet_cells(f)[0];
            for (int q = 0; q < detail::kEdgePoints; ++q)
                v(cell, A + g.x[q] * (B - A), &vals[q], nullptr);
        };
        std::array<Vec2, detail::kEdgePoints> vals;
        for (int z = 0; z < t.num_vertices(); ++z) {
            if (sp_.scalar_index({NodeType::vertex, z}) < 0)
                continue;
            const int f = vertex_edge_[z];
            edge_samples(f, vals);
            const int row = t.facet(f)[0] == z ? 0 : 1;
            Vec2 acc = Vec2::Zero();
            for (int q = 0; q < detail::kEdgePoints; ++q)
                acc += g.w[q] * duals_(row, q) * vals[q];
            set({NodeType::vertex, z}, acc);
        }
        if (sp_.scalar_nodes_per_cell() >= 6) {
            const bool gn = sp_.kind() == PairKind::guzman_neilan;
            for (int f = 0; f < t.num_facets(); ++f) {
                if (sp_.scalar_index({NodeType::edge, f}) < 0)
                    continue;
                edge_samples(f, vals);
                Vec2 acc = Vec2::Zero();
                for (int q = 0; q < detail::kEdgePoints; ++q)
                    acc += g.w[q] * (gn ? 1.0 : duals_(2, q)) * vals[q];
                set({NodeType::edge, f}, acc);
            }
        }
        return U;
    }

private:
    Vec2 cell_integral(const VectorFieldFn& v, int c) const
    {
        const auto& t = sp_.mesh();
        Vec2 acc = Vec2::Zero();
        for (std::size_t q = 0; q < rule_.size(); ++q) {
            Vec2 val;
            v(c, t.map(c, rule_.bary[q]), &val, nullptr);
            acc += rule_.w[q] * val;
        }
        return acc * t.measure(c);
    }

    Vec2 fe_cell_integral(const VectorXd& U, int c) const
    {
        const auto& t = sp_.mesh();
        Vec2 acc = Vec2::Zero();
        for (std::size_t q = 0; q < rule_.size(); ++q) {
            Vec2 val;
            fe_velocity(sp_, U, c, rule_.bary[q].data(), &val, nullptr);
            acc += rule_.w[q] * val;
        }
        return acc * t.measure(c);
    }

    // bubble 27 l0 l1 l2 integrates to 9|E|/20
    void correct_cell_means(const VectorFieldFn& v, VectorXd& U) const
    {
        const auto& t = sp_.mesh();
        for (int c = 0; c < t.num_cells(); ++c) {
            const Vec2 d = (cell_integral(v, c) - fe_cell_integral(U, c)) / (0.45 * t.measure(c));
            const int* dofs = sp_.velocity_dofs(c);
            U[dofs[6]] += d[0];
            U[dofs[7]] += d[1];
        }
    }

    // Normal flux through each interior edge; the edge bubble 4 l_a l_b
    // integrates to 2|S|/3 along the edge.
    void correct_edge_fluxes(const VectorFieldFn& v, VectorXd& U) const
    {
        const auto& t = sp_.mesh();
        const GaussRule& g = gauss_cached(detail::kEdgePoints);
        for (int f = 0; f < t.num_facets(); ++f) {
            const int s = sp_.scalar_index({NodeType::edge, f});
            if (s < 0)
                continue;
            const int c = t.facet_cells(f)[0];
            int k = 0;
            while (t.cell_facet(c, k) != f)
                ++k;
            const int i = (k + 1) % 3, j = (k + 2) % 3;
            const Vec2 A = t.vertex(t.cell(c)[i]), B = t.vertex(t.cell(c)[j]);
            const Vec2 n = t.facet_normal(f);
            const double len = t.facet_measure(f);
            double flux = 0.0;
            for (int q = 0; q < detail::kEdgePoints; ++q) {
                double l[3] = {0, 0, 0};
                l[i] = 1 - g.x[q];
                l[j] = g.x[q];
                Vec2 a, b;
                v(c, A + g.x[q] * (B - A), &a, nullptr);
                fe_velocity(sp_, U, c, l, &b, nullptr);
                flux += g.w[q] * len * (a - b).dot(n);
            }
            const double coef = flux / (2.0 * len / 3.0);
            U[2 * s] += coef * n[0];
            U[2 * s + 1] += coef * n[1];
        }
    }

    // First moments int_E div(v - Pi v)(x - x_E) through the cell bubble:
    // int_E div(a b)(x_k - x_E,k) = -a_k int_E b.
    void correct_cell_moments(const VectorFieldFn& v, VectorXd& U) const
    {
        const auto& t = sp_.mesh();
        const GaussRule& g = gauss_cached(detail::kEdgePoints);
        for (int c = 0; c < t.num_cells(); ++c) {
            const Vec2 xc = t.centroid(c);
            const auto G = t.bary_gradients(c);
            // moment of w = v - U: int_dE (w.n)(x - xc) - int_E w
            Vec2 mom = -(cell_integral(v, c) - fe_cell_integral(U, c));
            for (int k = 0; k < 3; ++k) {
                const int i = (k + 1) % 3, j = (k + 2) % 3;
                const Vec2 A = t.vertex(t.cell(c)[i]), B = t.vertex(t.cell(c)[j]);
                const Vec2 n = -G.row(k).transpose().normalized();
                const double len = (B - A).norm();
                for (int q = 0; q < detail::kEdgePoints; ++q) {
                    double l[3] = {0, 0, 0};
                    l[i] = 1 - g.x[q];
                    l[j] = g.x[q];
                    const Vec2 x = A + g.x[q] * (B - A);
                    Vec2 a, b;
                    v(c, x, &a, nullptr);
                    fe_velocity(sp_, U, c, l, &b, nullptr);
                    mom += g.w[q] * len * (a - b).dot(n) * (x - xc);
                }
            }
            const Vec2 coef = -mom / (0.45 * t.measure(c));
            const int* dofs = sp_.velocity_dofs(c);
            U[dofs[12]] += coef[0];
            U[dofs[13]] += coef[1];
        }
    }

    void build_taylor_hood_correction()
    {
        const auto& t = sp_.mesh();
        // columns: interior edge bubbles times unit vectors
        std::vector<int> edges;
        for (int f = 0; f < t.num_facets(); ++f)
            if (sp_.scalar_index({NodeType::edge, f}) >= 0)
                edges.push_back(f);
        const int nz = t.num_vertices() - 1; // last vertex row is implied
        std::vector<Triplet> trip;
        for (std::size_t col = 0; col < edges.size(); ++col) {
            const int f = edges[col];
            for (int c : t.facet_cells(f)) {
                if (c < 0)
                    continue;
                const auto G = t.bary_gradients(c);
                // -int_E (beta e_k) . grad l_z = -(|E|/3) d_k l_z
                for (int a = 0; a < 3; ++a) {
                    const int z = t.cell(c)[a];
                    if (z >= nz)
                        continue;
                    for (int comp = 0; comp < 2; ++comp)
                        trip.emplace_back(z, int(2 * col + comp), -t.measure(c) / 3.0 * G(a, comp));
                }
            }
        }
        th_c_.resize(nz, int(2 * edges.size()));
        th_c_.setFromTriplets(trip.begin(), trip.end());
        th_edges_ = edges;
        SparseMatrix cct = th_c_ * SparseMatrix(th_c_.transpose());
        th_solver_.compute(cct);
        if (th_solver_.info() != Eigen::Success)
            throw NumericalFailure("Taylor-Hood correction system is singular");
    }

    void correct_global(const VectorFieldFn& v, VectorXd& U) const
    {
        const VectorXd mv = divergence_moments(sp_, v, rule_);
        const VectorXd mu = divergence_moments(sp_, fe_field(sp_, U), rule_);
        const VectorXd r = (mv - mu).head(th_c_.rows());
        const VectorXd y = th_solver_.solve(r);
        const VectorXd coef = th_c_.transpose() * y;
        for (std::size_t col = 0; col < th_edges_.size(); ++col) {
            const int s = sp_.scalar_index({NodeType::edge, th_edges_[col]});
            U[2 * s] += coef[2 * col];
            U[2 * s + 1] += coef[2 * col + 1];
        }
    }

    const SpacePair& sp_;
    TriangleRule rule_;
    int trace_degree_ = 1;
    Eigen::MatrixXd duals_;
    std::vector<int> vertex_edge_;
    SparseMatrix th_c_;
    std::vector<int> th_edges_;
    Eigen::SimplicialLDLT<SparseMatrix> th_solver_;
};

// L^2 projection onto the discrete pressure space: cell-local for broken
// spaces, global mass solve for continuous P1.
class PressureProjector {
public:
    explicit PressureProjector(const SpacePair& sp) : sp_(sp), rule_(sp.quadrature(10))
    {
        if (sp.continuous_pressure()) {
            mass_ = pressure_mass(sp);
            solver_.compute(mass_);
            if (solver_.info() != Eigen::Success)
                throw NumericalFailure("pressure mass matrix factorization failed");
        }
    }

    static SparseMatrix pressure_mass(const SpacePair& sp)
    {
        const auto& t = sp.mesh();
        std::vector<Triplet> trip;
        const TriangleRule r = collapsed_rule(2);
        PressureBasis pb;
        for (int c = 0; c < t.num_cells(); ++c) {
            const int* pd = sp.pressure_dofs(c);
            for (std::size_t q = 0; q < r.size(); ++q) {
                sp.eval_pressure(c, r.bary[q].data(), pb);
                for (int a = 0; a < pb.n; ++a)
                    for (int b = 0; b < pb.n; ++b)
                        trip.emplace_back(pd[a], pd[b], r.w[q] * t.measure(c) * pb.value[a] * pb.value[b]);
            }
        }
        SparseMatrix m(sp.pressure_dim(), sp.pressure_dim());
        m.setFromTriplets(trip.begin(), trip.end());
        return m;
    }

    VectorXd apply(const ScalarFieldFn& q) const
    {
        const auto& t = sp_.mesh();
        VectorXd rhs = VectorXd::Zero(sp_.pressure_dim());
        PressureBasis pb;
        for (int c = 0; c < t.num_cells(); ++c) {
            const int* pd = sp_.pressure_dofs(c);
            for (std::size_t k = 0; k < rule_.size(); ++k) {
                const double val = q(c, t.map(c, rule_.bary[k]));
                sp_.eval_pressure(c, rule_.bary[k].data(), pb);
                for (int a = 0; a < pb.n; ++a)
                    rhs[pd[a]] += rule_.w[k] * t.measure(c) * val * pb.value[a];
            }
        }
        if (sp_.continuous_pressure())
            return solver_.solve(rhs);
        VectorXd out(sp_.pressure_dim());
        if (sp_.n_pressure_local() == 1) {
            for (int c = 0; c < t.num_cells(); ++c)
                out[c] = rhs[c] / t.measure(c);
        } else {
            // P1 mass on a triangle: |E|/12 (1 + delta_ab)
            Eigen::Matrix3d m;
            m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
            const Eigen::Matrix3d minv = m.inverse();
            for (int c = 0; c < t.num_cells(); ++c) {
                const Eigen::Vector3d b = rhs.segment<3>(3 * c);
                out.segment<3>(3 * c) = minv * b * (12.0 / t.measure(c));
            }
        }
        return out;
    }

private:
    const SpacePair& sp_;
    TriangleRule rule_;
    SparseMatrix mass_;
    Eigen::SimplicialLDLT<SparseMatrix> solver_;
};

struct ProjectorPair {
    VelocityProjector velocity;
    PressureProjector pressure;
    explicit ProjectorPair(const SpacePair& sp) : velocity(sp), pressure(sp) {}
};

} // namespace imflow
