#pragma once

#include "imflow/elements/jet.hpp"
#include "imflow/mesh/triangulation.hpp"
#include "imflow/quadrature.hpp"

#include <memory>

namespace imflow {

enum class PairKind { mini, p2_p0, cr_conforming, taylor_hood, guzman_neilan };

inline std::string to_string(PairKind k)
{
    switch (k) {
    case PairKind::mini: return "mini";
    case PairKind::p2_p0: return "p2-p0";
    case PairKind::cr_conforming: return "cr-conforming";
    case PairKind::taylor_hood: return "taylor-hood";
    case PairKind::guzman_neilan: return "guzman-neilan";
    }
    return "?";
}

inline PairKind parse_pair_kind(const std::string& s)
{
    for (PairKind k : {PairKind::mini, PairKind::p2_p0, PairKind::cr_conforming, PairKind::taylor_hood,
             PairKind::guzman_neilan})
        if (to_string(k) == s)
            return k;
    throw InvalidArgument("unknown element pair '" + s + "'");
}

inline constexpr int kMaxVelocityLocal = 14;
inline constexpr int kMaxPressureLocal = 3;

// Local velocity functions at one point; grad(i,j) = d v_i / d x_j.
struct VelocityBasis {
    int n = 0;
    std::array<Vec2, kMaxVelocityLocal> value;
    std::array<Mat2, kMaxVelocityLocal> grad;
};

struct PressureBasis {
    int n = 0;
    std::array<double, kMaxPressureLocal> value{};
};

enum class NodeType { vertex, edge, cell };

struct NodeRef {
    NodeType type;
    int entity; // global vertex, facet or cell id
};

// Guzman-Neilan rational bubble on the reference triangle,
//   B_i = l_i l_{i+1}^2 l_{i+2}^2 / ((l_i + l_{i+1})(l_i + l_{i+2})),
// continuously extended by zero at the singular vertices z_{i+1}, z_{i+2}.
inline Jet rational_bubble(int i, const std::array<double, 3>& l)
{
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    if (l[i] + l[j] < 1e-14 || l[i] + l[k] < 1e-14)
        return Jet{};
    const Jet a = Jet::variable(i, l[i]), b = Jet::variable(j, l[j]), c = Jet::variable(k, l[k]);
    const Jet num = a * b * b * c * c;
    const Jet den = (a + b) * (a + c);
    return num / den;
}

// Polynomial bubble b_i = l_{i+1}^2 l_{i+2} whose curl enriches the edge traces.
inline Jet edge_bubble(int i, const std::array<double, 3>& l)
{
    const int j = (i + 1) % 3, k = (i + 2) % 3;
    const Jet b = Jet::variable(j, l[j]), c = Jet::variable(k, l[k]);
    return b * b * c;
}

// Inf-sup stable velocity/pressure pair on a 2D triangulation with homogeneous
// Dirichlet velocity conditions. Local velocity function 2a + c is the c-th
// component attached to local node a.
class SpacePair {
public:
    SpacePair(std::shared_ptr<const Triangulation<2>> mesh, PairKind kind) : mesh_(std::move(mesh)), kind_(kind)
    {
        if (!mesh_)
            throw InvalidArgument("space pair needs a mesh");
        const auto& t = *mesh_;
        const int nv = t.num_vertices(), nf = t.num_facets(), nc = t.num_cells();
        switch (kind_) {
        case PairKind::mini: scalar_local_ = 4; break;
        case PairKind::p2_p0:
        case PairKind::taylor_hood:
        case PairKind::guzman_neilan: scalar_local_ = 6; break;
        case PairKind::cr_conforming: scalar_local_ = 7; break;
        }
        // interior scalar nodes
        auto number = [](std::vector<int>& idx, int n, auto&& is_boundary, int& next) {
            idx.assign(n, -1);
            for (int i = 0; i < n; ++i)
                if (!is_boundary(i))
                    idx[i] = next++;
        };
        int next = 0;
        number(vertex_node_, nv, [&](int v) { return t.is_boundary_vertex(v); }, next);
        if (scalar_local_ >= 6)
            number(edge_node_, nf, [&](int f) { return t.is_boundary_facet(f); }, next);
        if (kind_ == PairKind::mini || kind_ == PairKind::cr_conforming)
            number(cell_node_, nc, [](int) { return false; }, next);
        n_scalar_interior_ = next;
        vdim_ = 2 * next;

        vdofs_.resize(std::size_t(nc) * n_velocity_local());
        for (int c = 0; c < nc; ++c)
            for (int a = 0; a < scalar_local_; ++a) {
                const int s = scalar_index(scalar_node(c, a));
                for (int comp = 0; comp < 2; ++comp)
                    vdofs_[std::size_t(c) * n_velocity_local() + 2 * a + comp] = s < 0 ? -1 : 2 * s + comp;
            }

        switch (kind_) {
        case PairKind::mini:
        case PairKind::taylor_hood: plocal_ = 3, pdim_ = nv; break;
        case PairKind::p2_p0:
        case PairKind::guzman_neilan: plocal_ = 1, pdim_ = nc; break;
        case PairKind::cr_conforming: plocal_ = 3, pdim_ = 3 * nc; break;
        }
        pdofs_.resize(std::size_t(nc) * plocal_);
        for (int c = 0; c < nc; ++c)
            for (int a = 0; a < plocal_; ++a) {
                int d = 0;
                if (kind_ == PairKind::mini || kind_ == PairKind::taylor_hood)
                    d = t.cell(c)[a];
                else if (plocal_ == 1)
                    d = c;
                else
                    d = 3 * c + a;
                pdofs_[std::size_t(c) * plocal_ + a] = d;
            }
        grads_.resize(nc);
        for (int c = 0; c < nc; ++c)
            grads_[c] = t.bary_gradients(c);
        if (kind_ == PairKind::guzman_neilan)
            build_gn_coefficients();
    }

    PairKind kind() const { return kind_; }
    std::string name() const { return to_string(kind_); }
    const Triangulation<2>& mesh() const { return *mesh_; }
    std::shared_ptr<const Triangulation<2>> mesh_ptr() const { return mesh_; }
    int velocity_dim() const { return vdim_; }
    int pressure_dim() const { return pdim_; }
    int n_velocity_local() const { return 2 * scalar_local_; }
    int n_pressure_local() const { return plocal_; }
    int scalar_nodes_per_cell() const { return scalar_local_; }
    const int* velocity_dofs(int c) const { return vdofs_.data() + std::size_t(c) * n_velocity_local(); }
    const int* pressure_dofs(int c) const { return pdofs_.data() + std::size_t(c) * plocal_; }
    bool divergence_free() const { return kind_ == PairKind::guzman_neilan; }
    // Taylor-Hood is provided but its stability estimate is not established here.
    bool verified() const { return kind_ != PairKind::taylor_hood; }
    bool continuous_pressure() const { return kind_ == PairKind::mini || kind_ == PairKind::taylor_hood; }
    // Polynomial degree used to size quadrature rules.
    int velocity_degree() const { return (kind_ == PairKind::mini || kind_ == PairKind::cr_conforming) ? 3 : 2; }
    // GN functions are rational; their rule degree is a resolution level.
    int default_degree() const { return kind_ == PairKind::guzman_neilan ? 12 : 2 * velocity_degree() + 2; }
    // Degree at which integration by parts holds to roundoff for products of
    // three velocity fields (exact for polynomial pairs).
    int precise_degree() const { return kind_ == PairKind::guzman_neilan ? 20 : 3 * velocity_degree() + 1; }

    TriangleRule quadrature(int degree) const
    {
        return kind_ == PairKind::guzman_neilan ? vertex_star_rule(degree) : collapsed_rule(degree);
    }
    TriangleRule default_rule() const { return quadrature(default_degree()); }

    NodeRef scalar_node(int c, int a) const
    {
        const auto& t = *mesh_;
        if (a < 3)
            return {NodeType::vertex, t.cell(c)[a]};
        if (a < 6 && scalar_local_ >= 6)
            return {NodeType::edge, t.cell_facet(c, a - 3)};
        return {NodeType::cell, c};
    }

    // Interior scalar index of a node, -1 on the boundary.
    int scalar_index(const NodeRef& n) const
    {
        switch (n.type) {
        case NodeType::vertex: return vertex_node_[n.entity];
        case NodeType::edge: return edge_node_[n.entity];
        case NodeType::cell: return cell_node_[n.entity];
        }
        return -1;
    }

    void eval_velocity(int c, const double* l, VelocityBasis& out) const
    {
        const auto& G = grads_[c];
        out.n = n_velocity_local();
        if (kind_ == PairKind::guzman_neilan) {
            eval_gn(c, l, out);
            return;
        }
        std::array<double, 7> phi{};
        std::array<Vec2, 7> dphi;
        auto gl = [&](int a) -> Vec2 { return G.row(a).transpose(); };
        if (kind_ == PairKind::mini) {
            for (int a = 0; a < 3; ++a) {
                phi[a] = l[a];
                dphi[a] = gl(a);
            }
        } else {
            for (int a = 0; a < 3; ++a) {
                phi[a] = l[a] * (2.0 * l[a] - 1.0);
                dphi[a] = (4.0 * l[a] - 1.0) * gl(a);
            }
            for (int k = 0; k < 3; ++k) {
                const int i = (k + 1) % 3, j = (k + 2) % 3;
                phi[3 + k] = 4.0 * l[i] * l[j];
                dphi[3 + k] = 4.0 * (l[j] * gl(i) + l[i] * gl(j));
            }
        }
        if (kind_ == PairKind::mini || kind_ == PairKind::cr_conforming) {
            const int b = scalar_local_ - 1;
            phi[b] = 27.0 * l[0] * l[1] * l[2];
            dphi[b] = 27.0 * (l[1] * l[2] * gl(0) + l[0] * l[2] * gl(1) + l[0] * l[1] * gl(2));
        }
        for (int a = 0; a < scalar_local_; ++a)
            for (int comp = 0; comp < 2; ++comp) {
                const int k = 2 * a + comp;
                out.value[k] = Vec2::Zero();
                out.value[k][comp] = phi[a];
                out.grad[k] = Mat2::Zero();
                out.grad[k].row(comp) = dphi[a].transpose();
            }
    }

    void eval_pressure(int, const double* l, PressureBasis& out) const
    {
        out.n = plocal_;
        if (plocal_ == 1)
            out.value[0] = 1.0;
        else
            for (int a = 0; a < 3; ++a)
                out.value[a] = l[a];
    }

    // Evaluation at a reference point (xi, eta) of the unit triangle.
    void eval_reference(int c, const Vec2& ref, VelocityBasis& v, PressureBasis& p) const
    {
        const double l[3] = {1.0 - ref[0] - ref[1], ref[0], ref[1]};
        if (std::min({l[0], l[1], l[2]}) < -1e-12)
            throw InvalidArgument("reference point outside the reference triangle");
        eval_velocity(c, l, v);
        eval_pressure(c, l, p);
    }

    // The 12 raw GN functions (P1^2, curl b_i, curl B_i) on cell c.
    void eval_gn_raw(int c, const double* lp, std::array<Vec2, 12>& val, std::array<Mat2, 12>& grad) const
    {
        const auto& G = grads_[c];
        for (int a = 0; a < 3; ++a)
            for (int comp = 0; comp < 2; ++comp) {
                val[2 * a + comp] = Vec2::Zero();
                val[2 * a + comp][comp] = lp[a];
                grad[2 * a + comp] = Mat2::Zero();
                grad[2 * a + comp].row(comp) = G.row(a);
            }
        const std::array<double, 3> l{lp[0], lp[1], lp[2]};
        for (int i = 0; i < 3; ++i) {
            curl_of(edge_bubble(i, l), G, val[6 + i], grad[6 + i]);
            curl_of(rational_bubble(i, l), G, val[9 + i], grad[9 + i]);
        }
    }

    // Coefficients of the GN nodal basis in the raw functions (raw x nodal).
    const Eigen::Matrix<double, 12, 12>& gn_coefficients(int c) const { return gn_coef_[c]; }

private:
    // curl s = (d_y s, -d_x s) and its Jacobian from barycentric derivatives.
    static void curl_of(const Jet& s, const Eigen::Matrix<double, 3, 2>& G, Vec2& val, Mat2& grad)
    {
        Vec2 gx = Vec2::Zero();
        Mat2 hx = Mat2::Zero();
        for (int i = 0; i < 3; ++i) {
            gx += s.g[i] * G.row(i).transpose();
            for (int k = 0; k < 3; ++k)
                hx += s.H[i][k] * G.row(i).transpose() * G.row(k);
        }
        const double hxy = 0.5 * (hx(0, 1) + hx(1, 0));
        val = Vec2(gx[1], -gx[0]);
        grad << hxy, hx(1, 1), -hx(0, 0), -hxy;
    }

    void build_gn_coefficients()
    {
        const auto& t = *mesh_;
        gn_coef_.resize(t.num_cells());
        const GaussRule& g = gauss_cached(6);
        std::array<Vec2, 12> val;
        std::array<Mat2, 12> grad;
        for (int c = 0; c < t.num_cells(); ++c) {
            Eigen::Matrix<double, 12, 12> M = Eigen::Matrix<double, 12, 12>::Zero();
            for (int a = 0; a < 3; ++a) {
                double l[3] = {0, 0, 0};
                l[a] = 1.0;
                eval_gn_raw(c, l, val, grad);
                for (int r = 0; r < 12; ++r)
                    for (int comp = 0; comp < 2; ++comp)
                        M(2 * a + comp, r) = val[r][comp];
            }
            for (int k = 0; k < 3; ++k) {
                const int i = (k + 1) % 3, j = (k + 2) % 3;
                for (std::size_t q = 0; q < g.x.size(); ++q) {
                    double l[3] = {0, 0, 0};
                    l[i] = 1.0 - g.x[q];
                    l[j] = g.x[q];
                    eval_gn_raw(c, l, val, grad);
                    for (int r = 0; r < 12; ++r)
                        for (int comp = 0; comp < 2; ++comp)
                            M(6 + 2 * k + comp, r) += g.w[q] * val[r][comp];
                }
            }
            Eigen::FullPivLU<Eigen::Matrix<double, 12, 12>> lu(M);
            if (!lu.isInvertible())
                throw NumericalFailure("GN degrees of freedom not unisolvent on cell " + std::to_string(c));
            gn_coef_[c] = lu.inverse();
        }
    }

    void eval_gn(int c, const double* l, VelocityBasis& out) const
    {
        std::array<Vec2, 12> val;
        std::array<Mat2, 12> grad;
        eval_gn_raw(c, l, val, grad);
        const auto& C = gn_coef_[c];
        for (int k = 0; k < 12; ++k) {
            Vec2 v = Vec2::Zero();
            Mat2 gr = Mat2::Zero();
            for (int r = 0; r < 12; ++r) {
                const double w = C(r, k);
                if (w == 0.0)
                    continue;
                v += w * val[r];
                gr += w * grad[r];
            }
            out.value[k] = v;
            out.grad[k] = gr;
        }
    }

    std::shared_ptr<const Triangulation<2>> mesh_;
    PairKind kind_;
    int scalar_local_ = 0;
    int plocal_ = 0;
    int vdim_ = 0, pdim_ = 0, n_scalar_interior_ = 0;
    std::vector<int> vertex_node_, edge_node_, cell_node_;
    std::vector<int> vdofs_, pdofs_;
    std::vector<Eigen::Matrix<double, 3, 2>> grads_;
    std::vector<Eigen::Matrix<double, 12, 12>> gn_coef_;
};

} // namespace imflow
