#pragma once

#include "imflow/elements/projectors.hpp"
#include "imflow/lipschitz/whitney.hpp"
#include "imflow/system/diagnostics.hpp"

#include <memory>

namespace imflow {

// Maximal function of |grad v| on the background lattice of the mesh:
// lattice side <= h_min / 2, radii dyadic from h_min / 2 to diam(Omega)
// plus one midpoint refinement pass.
struct LatticeMaximal {
    DyadicFrame frame;
    MaximalField M;
};

inline LatticeMaximal lattice_maximal(const MeshField& v, int threads = 1)
{
    const auto& t = *v.mesh;
    const double h = 0.5 * t.min_mesh_size();
    LatticeMaximal out;
    out.frame = DyadicFrame::around(t.bounding_box(), h);
    const BallAverager avg(gradient_density(v));
    out.M = maximal_function_refined(avg, out.frame.centers(), h, t.bounding_box().diameter(), threads);
    return out;
}

namespace detail {

// Integral of v over the convex polygon p (v zero outside the mesh).
inline Vec2 integrate_field(const MeshField& v, const Polygon& p, const TriangleRule& r)
{
    const auto& t = *v.mesh;
    Box<2> box{p[0], p[0]};
    for (const Vec2& x : p) {
        box.lo = box.lo.cwiseMin(x);
        box.hi = box.hi.cwiseMax(x);
    }
    Vec2 s = Vec2::Zero();
    for (int c : t.cells_near(box)) {
        const auto& cv = t.cell(c);
        const Polygon piece = clip_convex(ccw_triangle(t.vertex(cv[0]), t.vertex(cv[1]), t.vertex(cv[2])), p);
        for (std::size_t k = 1; k + 1 < piece.size(); ++k) {
            const double area = 0.5 * std::abs(cross2(piece[k] - piece[0], piece[k + 1] - piece[0]));
            for (std::size_t q = 0; q < r.size(); ++q) {
                const auto& l = r.bary[q];
                const Vec2 y = l[0] * piece[0] + l[1] * piece[k] + l[2] * piece[k + 1];
                const auto b = t.barycentric(c, y);
                Vec2 val;
                v.eval(c, b.data(), &val, nullptr);
                s += r.w[q] * area * val;
            }
        }
    }
    return s;
}

// Whether the open square (lo, lo + side)^2 lies in the meshed domain.
inline bool square_inside(const Triangulation<2>& t, const Vec2& lo, double side)
{
    if (t.locate(lo + 0.5 * side * Vec2(1, 1)).cell < 0)
        return false;
    for (int c : t.cells_near(Box<2>{lo, lo + Vec2(side, side)}))
        for (int i = 0; i < 3; ++i) {
            if (t.neighbor(c, i) >= 0)
                continue;
            const auto& cv = t.cell(c);
            const Vec2 a = t.vertex(cv[(i + 1) % 3]), b = t.vertex(cv[(i + 2) % 3]);
            if (segment_meets_open_square(a, b, lo, side))
                return false;
        }
    return true;
}

// Calls fn(weight, cell, bary, x) on every cell, splitting cell c into
// parts(c)^2 congruent subtriangles.
template <class Parts, class Fn>
void sweep_subdivided(const Triangulation<2>& t, const TriangleRule& r, Parts&& parts, Fn&& fn)
{
    for (int c = 0; c < t.num_cells(); ++c) {
        const int m = std::max(1, parts(c));
        const double a = t.measure(c) / (m * m);
        auto node = [m](int i, int j) { return std::array<double, 3>{1.0 - double(i + j) / m, double(i) / m, double(j) / m}; };
        auto sub = [&](const std::array<double, 3>& p0, const std::array<double, 3>& p1, const std::array<double, 3>& p2) {
            for (std::size_t q = 0; q < r.size(); ++q) {
                std::array<double, 3> b;
                for (int k = 0; k < 3; ++k)
                    b[k] = r.bary[q][0] * p0[k] + r.bary[q][1] * p1[k] + r.bary[q][2] * p2[k];
                fn(r.w[q] * a, c, b.data(), t.map(c, b.data()));
            }
        };
        for (int j = 0; j < m; ++j)
            for (int i = 0; i + j < m; ++i) {
                sub(node(i, j), node(i + 1, j), node(i, j + 1));
                if (i + j + 1 < m)
                    sub(node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
            }
    }
}

// Whether the bounding box of cell c meets a flagged lattice cube.
inline bool cell_meets(const LevelSet& U, const Triangulation<2>& t, int c)
{
    const Box<2> b = t.cell_box(c);
    const double s = U.frame.cell();
    const int i0 = int(std::floor((b.lo[0] - U.frame.origin[0]) / s)), i1 = int(std::floor((b.hi[0] - U.frame.origin[0]) / s));
    const int j0 = int(std::floor((b.lo[1] - U.frame.origin[1]) / s)), j1 = int(std::floor((b.hi[1] - U.frame.origin[1]) / s));
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i)
            if (U.in(i, j))
                return true;
    return false;
}

} // namespace detail

// v_lambda = sum_j psi_j v_j on U_lambda, v elsewhere, with
// v_j = mean of v over Q_j** = (9/8) Q_j when Q_j* = sqrt(9/8) Q_j lies in
// Omega and v_j = 0 otherwise. In the thin layer next to the boundary of U
// that the finite-depth cover leaves out the field falls back to v: the bump
// sum can be arbitrarily small there, so the normalized bumps would have
// unbounded gradients.
class LipschitzTruncation {
public:
    struct Point {
        Vec2 value = Vec2::Zero();
        Mat2 grad = Mat2::Zero();
        bool in_u = false;
        bool covered = false;
        double bump_sum = 0.0;
        double psi_grad = 0.0; // max |grad psi_j| l_j over the active cubes
        double psi_sum = 0.0;  // sum of psi_j as evaluated
        int active = 0;        // bumps positive at the point
    };

    LipschitzTruncation(MeshField v, LevelSet U, int extra_depth = 5)
        : v_(std::move(v)), U_(std::move(U)), W_(whitney_decompose(U_, extra_depth))
    {
        const auto& t = *v_.mesh;
        const TriangleRule r = collapsed_rule(std::max(4, v_.degree));
        local_.assign(W_.size(), Vec2::Zero());
        inside_.assign(W_.size(), 0);
        for (int k = 0; k < W_.size(); ++k) {
            const double l = W_.side(k);
            const Vec2 c = W_.center(k);
            const double star = std::sqrt(9.0 / 8.0) * l;
            if (!detail::square_inside(t, c - 0.5 * star * Vec2(1, 1), star))
                continue;
            inside_[k] = 1;
            const double big = 9.0 / 8.0 * l;
            const Polygon sq = square_polygon(c - 0.5 * big * Vec2(1, 1), big);
            local_[k] = detail::integrate_field(v_, sq, r) / (big * big);
        }
    }

    const MeshField& field() const { return v_; }
    const LevelSet& level() const { return U_; }
    const WhitneyCover& cover() const { return W_; }
    const std::vector<Vec2>& local_values() const { return local_; }
    bool star_inside(int k) const { return inside_[k] != 0; }

    Point eval(const Vec2& x, int cell = -1, const double* bary = nullptr) const
    {
        Point p;
        p.in_u = U_.contains(x);
        if (p.in_u && W_.containing(x) >= 0) {
            double sum = 0;
            Vec2 dsum = Vec2::Zero(), num = Vec2::Zero();
            Mat2 dnum = Mat2::Zero();
            const auto cand = W_.candidates(x);
            std::vector<std::pair<int, std::pair<double, Vec2>>> act;
            for (int k : cand) {
                Vec2 db;
                const double b = W_.bump(k, x, &db);
                if (b <= 0)
                    continue;
                act.push_back({k, {b, db}});
                sum += b;
                dsum += db;
                num += b * local_[k];
                dnum += local_[k] * db.transpose();
            }
            if (sum > 0) {
                p.covered = true;
                p.bump_sum = sum;
                p.active = static_cast<int>(act.size());
                p.value = num / sum;
                // grad (num / sum) = dnum / sum - num dsum^T / sum^2
                p.grad = dnum / sum - num * dsum.transpose() / (sum * sum);
                for (const auto& [k, bd] : act) {
                    p.psi_sum += bd.first / sum;
                    const Vec2 dpsi = bd.second / sum - bd.first * dsum / (sum * sum);
                    p.psi_grad = std::max(p.psi_grad, dpsi.norm() * W_.side(k));
                }
                return p;
            }
        }
        if (cell >= 0 && bary)
            v_.eval(cell, bary, &p.value, &p.grad);
        else
            v_.at(x, &p.value, &p.grad);
        return p;
    }

    VectorFieldFn as_field() const
    {
        return [this](int, const Vec2& x, Vec2* v, Mat2* g) {
            const Point p = eval(x);
            if (v)
                *v = p.value;
            if (g)
                *g = p.grad;
        };
    }

private:
    MeshField v_;
    LevelSet U_;
    WhitneyCover W_;
    std::vector<Vec2> local_;
    std::vector<char> inside_;
};

struct TruncationReport {
    double lambda = 0.0;
    double u_measure = 0.0;
    int cubes = 0;
    WhitneyChecks whitney;
    int h_samples = 0, u_samples = 0;
    double scale = 0.0;              // max |v| over the samples
    double equality_defect = 0.0;    // max |v_lambda - v| on samples of H_lambda
    double grad_outside_defect = 0.0; // max |grad v_lambda - grad v| there
    double outside_value = 0.0;      // max |v_lambda| on samples outside Omega
    double grad_sup_u = 0.0;         // max |grad v_lambda| / lambda on covered samples of U_lambda
    double grad_sup_layer = 0.0;     // same on samples of the uncovered layer (where v_lambda = v)
    double grad_sup = 0.0;           // same over all samples
    int max_overlap = 0;             // most bumps positive at one sample
    // ||v_lambda||_s / ||v||_s and ||grad v_lambda||_s / ||grad v||_s, s = 1, 2, inf
    std::array<double, 3> value_ratio{}, grad_ratio{};
    double grad_l1 = 0.0;            // ||grad v||_1
    double weak_type = 0.0;          // lambda |U_lambda| / ||grad v||_1
    double psi_gradient = 0.0;       // max |grad psi_j| l_j
    double partition_defect = 0.0;   // max |sum psi_j - 1| on covered samples
    double neighbor_mean = 0.0;      // max |v_j - v_k| / (l_j lambda) over touching cubes
    double uncovered_fraction = 0.0; // uncovered layer measure / |U_lambda|

    // On a covered point x of Q_k, grad v_lambda = sum_j grad psi_j (v_j - v_k)
    // over active cubes, all touching Q_k, so the measured constants bound it.
    double gradient_bound() const { return 2.0 * max_overlap * psi_gradient * neighbor_mean; }
};

struct Truncation {
    std::shared_ptr<const LipschitzTruncation> field;
    TruncationReport report;
};

// Truncates v at level lambda and measures the properties of v_lambda on
// the lattice centers and on quadrature points of the mesh (cells meeting
// U_lambda are subdivided `subdivide` times per edge).
inline Truncation lipschitz_truncate(const MeshField& v, const LatticeMaximal& lm, double lambda, int extra_depth = 5,
    int subdivide = 8)
{
    Truncation out;
    auto tr = std::make_shared<LipschitzTruncation>(v, level_set(lm.frame, lm.M, lambda), extra_depth);
    out.field = tr;
    TruncationReport& rep = out.report;
    const auto& t = *v.mesh;
    const LevelSet& U = tr->level();
    const WhitneyCover& W = tr->cover();
    rep.lambda = lambda;
    rep.u_measure = U.measure();
    rep.cubes = W.size();
    rep.whitney = W.checks;
    if (rep.u_measure > 0)
        rep.uncovered_fraction = W.checks.uncovered_measure / rep.u_measure;

    double sup_v = 0, sup_vl = 0, sup_g = 0, sup_gl = 0;
    auto sample = [&](const Vec2& x, int cell, const double* bary, LipschitzTruncation::Point& p, Vec2& vv, Mat2& gv) {
        p = tr->eval(x, cell, bary);
        if (cell >= 0)
            v.eval(cell, bary, &vv, &gv);
        else
            v.at(x, &vv, &gv);
        const bool in_omega = cell >= 0 || t.locate(x).cell >= 0;
        rep.scale = std::max(rep.scale, vv.norm());
        sup_v = std::max(sup_v, vv.norm());
        sup_vl = std::max(sup_vl, p.value.norm());
        sup_g = std::max(sup_g, gv.norm());
        sup_gl = std::max(sup_gl, p.grad.norm());
        rep.grad_sup = std::max(rep.grad_sup, p.grad.norm() / lambda);
        if (!in_omega)
            rep.outside_value = std::max(rep.outside_value, p.value.norm());
        if (p.in_u && in_omega) {
            ++rep.u_samples;
            if (p.covered)
                rep.grad_sup_u = std::max(rep.grad_sup_u, p.grad.norm() / lambda);
            else
                rep.grad_sup_layer = std::max(rep.grad_sup_layer, p.grad.norm() / lambda);
        } else {
            ++rep.h_samples;
            rep.equality_defect = std::max(rep.equality_defect, (p.value - vv).norm());
            rep.grad_outside_defect = std::max(rep.grad_outside_defect, (p.grad - gv).norm());
        }
        if (p.covered) {
            rep.psi_gradient = std::max(rep.psi_gradient, p.psi_grad);
            rep.max_overlap = std::max(rep.max_overlap, p.active);
            rep.partition_defect = std::max(rep.partition_defect, std::abs(p.psi_sum - 1.0));
        }
    };
    {
        LipschitzTruncation::Point p;
        Vec2 vv;
        Mat2 gv;
        for (const Vec2& x : lm.frame.centers())
            sample(x, -1, nullptr, p, vv, gv);
    }

    double I[2][2][2] = {}; // [v or v_lambda][value or grad][s = 1, 2]
    const TriangleRule r = collapsed_rule(std::max(4, v.degree));
    detail::sweep_subdivided(
        t, r, [&](int c) { return detail::cell_meets(U, t, c) ? subdivide : 1; },
        [&](double w, int c, const double* b, const Vec2& x) {
            LipschitzTruncation::Point p;
            Vec2 vv;
            Mat2 gv;
            sample(x, c, b, p, vv, gv);
            const double a[2][2] = {{vv.norm(), gv.norm()}, {p.value.norm(), p.grad.norm()}};
            for (int k = 0; k < 2; ++k)
                for (int m = 0; m < 2; ++m) {
                    I[k][m][0] += w * a[k][m];
                    I[k][m][1] += w * a[k][m] * a[k][m];
                }
        });
    auto ratio = [](double a, double b) { return b > 0 ? a / b : (a > 0 ? kInf : 1.0); };
    rep.value_ratio = {ratio(I[1][0][0], I[0][0][0]), ratio(std::sqrt(I[1][0][1]), std::sqrt(I[0][0][1])), ratio(sup_vl, sup_v)};
    rep.grad_ratio = {ratio(I[1][1][0], I[0][1][0]), ratio(std::sqrt(I[1][1][1]), std::sqrt(I[0][1][1])), ratio(sup_gl, sup_g)};
    rep.grad_l1 = I[0][1][0];
    rep.weak_type = rep.grad_l1 > 0 ? lambda * rep.u_measure / rep.grad_l1 : 0.0;
    if (rep.scale > 0) {
        rep.equality_defect /= rep.scale;
        rep.outside_value /= rep.scale;
    }
    if (sup_g > 0)
        rep.grad_outside_defect /= sup_g;

    for (int k = 0; k < W.size(); ++k)
        for (int o : W.neighbors[k])
            rep.neighbor_mean = std::max(rep.neighbor_mean,
                (tr->local_values()[k] - tr->local_values()[o]).norm() / (W.side(k) * lambda));
    return out;
}

struct DiscreteTruncationReport {
    double lambda = 0.0;
    bool trivial = false;             // U_lambda empty, V returned unchanged
    std::vector<char> region;         // cells of Omega^n_lambda
    int region_cells = 0;
    int inclusion_violations = 0;     // lattice samples of U_lambda cap Omega outside the region
    double kappa = kInf;              // min M / lambda over lattice samples in the region
    double max_change_outside = 0.0;  // max |V_{n,lambda} - V| on dofs of cells outside, over max |V|
    int region_samples = 0;
    double h1_ratio = 1.0;            // ||V_{n,lambda}||_{1,2} / ||V||_{1,2}
    double l2_ratio = 1.0;
    double grad_sup = 0.0;            // max |grad V_{n,lambda}| / lambda on the region
    double value_sup = 0.0;           // max |V_{n,lambda}| over quadrature points
    TruncationReport continuous;
};

struct DiscreteTruncation {
    VectorXd V;
    DiscreteTruncationReport report;
};

// V_{n,lambda} = Pi(V_lambda). Omega^n_lambda is the union of the patches
// of cells meeting U_lambda.
inline DiscreteTruncation discrete_truncate(const SpacePair& sp, const VelocityProjector& proj, const VectorXd& V,
    const LatticeMaximal& lm, double lambda, int extra_depth = 5)
{
    const auto& t = sp.mesh();
    const MeshField v = mesh_field(sp, V);
    DiscreteTruncation out;
    DiscreteTruncationReport& rep = out.report;
    rep.lambda = lambda;
    rep.region.assign(t.num_cells(), 0);
    const LevelSet U = level_set(lm.frame, lm.M, lambda);
    if (U.empty()) {
        rep.trivial = true;
        out.V = V;
        rep.kappa = kInf;
        const TriangleRule r = sp.quadrature(sp.default_degree());
        for (int c = 0; c < t.num_cells(); ++c)
            for (std::size_t q = 0; q < r.size(); ++q) {
                Vec2 x;
                fe_velocity(sp, V, c, r.bary[q].data(), &x, nullptr);
                rep.value_sup = std::max(rep.value_sup, x.norm());
            }
        return out;
    }

    Truncation tr = lipschitz_truncate(v, lm, lambda, extra_depth);
    rep.continuous = tr.report;
    out.V = proj.apply(tr.field->as_field());

    // Omega^n_lambda: cells E meeting U_lambda, then their patches
    std::vector<char> meets(t.num_cells(), 0);
    for (int c = 0; c < t.num_cells(); ++c) {
        const auto& cv = t.cell(c);
        const Polygon tri = ccw_triangle(t.vertex(cv[0]), t.vertex(cv[1]), t.vertex(cv[2]));
        const Box<2> b = t.cell_box(c);
        const double s = U.frame.cell();
        const int i0 = int(std::floor((b.lo[0] - U.frame.origin[0]) / s)), i1 = int(std::floor((b.hi[0] - U.frame.origin[0]) / s));
        const int j0 = int(std::floor((b.lo[1] - U.frame.origin[1]) / s)), j1 = int(std::floor((b.hi[1] - U.frame.origin[1]) / s));
        for (int j = j0; j <= j1 && !meets[c]; ++j)
            for (int i = i0; i <= i1 && !meets[c]; ++i)
                if (U.in(i, j) && interiors_intersect(tri, square_polygon(U.frame.origin + s * Vec2(i, j), s)))
                    meets[c] = 1;
    }
    for (int c = 0; c < t.num_cells(); ++c)
        if (meets[c])
            for (int e : t.patch(c))
                rep.region[e] = 1;
    rep.region_cells = static_cast<int>(std::count(rep.region.begin(), rep.region.end(), 1));

    const auto centers = lm.frame.centers();
    for (std::size_t k = 0; k < centers.size(); ++k) {
        const Located l = t.locate(centers[k]);
        if (l.cell < 0)
            continue;
        if (U.flag[k] && !rep.region[l.cell])
            ++rep.inclusion_violations;
        if (rep.region[l.cell]) {
            ++rep.region_samples;
            rep.kappa = std::min(rep.kappa, lm.M.value[k] / lambda);
        }
    }

    const double vmax = V.cwiseAbs().maxCoeff();
    for (int c = 0; c < t.num_cells(); ++c) {
        if (rep.region[c])
            continue;
        const int* d = sp.velocity_dofs(c);
        for (int k = 0; k < sp.n_velocity_local(); ++k)
            if (d[k] >= 0)
                rep.max_change_outside = std::max(rep.max_change_outside, std::abs(out.V[d[k]] - V[d[k]]));
    }
    if (vmax > 0)
        rep.max_change_outside /= vmax;

    const VelocityNorms a = velocity_norms(sp, out.V, 2.0), b = velocity_norms(sp, V, 2.0);
    const double na = std::hypot(a.value, a.grad), nb = std::hypot(b.value, b.grad);
    rep.h1_ratio = nb > 0 ? na / nb : 1.0;
    rep.l2_ratio = b.value > 0 ? a.value / b.value : 1.0;
    const TriangleRule r = sp.quadrature(sp.default_degree());
    for (int c = 0; c < t.num_cells(); ++c)
        for (std::size_t q = 0; q < r.size(); ++q) {
            Vec2 x;
            Mat2 g;
            fe_velocity(sp, out.V, c, r.bary[q].data(), &x, &g);
            rep.value_sup = std::max(rep.value_sup, x.norm());
            if (rep.region[c])
                rep.grad_sup = std::max(rep.grad_sup, g.norm() / lambda);
        }
    return out;
}

// Level choice: for each j, lambda = 2^m with m = 2^j .. 2^(j+1) - 1
// minimizing lambda^s |{M > kappa lambda}| (ties to the smallest lambda).
struct LevelInput {
    std::vector<double> M; // maximal function on the lattice
    double cell_area = 0.0;
    double grad_norm = 0.0; // ||grad E^n||_s
};

struct LevelChoice {
    int n = 0, j = 0, m = 0;
    double lambda = 0.0;
    double measure = 0.0; // |{M > kappa lambda}|
    double ratio = 0.0;   // lambda |.|^(1/s) 2^(j/s) / ||grad E^n||_s
};

struct LevelTable {
    double s = 2.0, kappa = 1.0;
    int j_max = 0;
    std::vector<LevelChoice> rows;
    bool bracket_ok = true;
    double max_ratio = 0.0;
};

inline LevelTable select_levels(const std::vector<LevelInput>& seq, double s, int j_max, double kappa = 1.0)
{
    if (!(s > 1.0))
        throw InvalidArgument("level selection needs s > 1");
    if (j_max < 1 || j_max > 4)
        throw InvalidArgument("j_max must lie in [1, 4]");
    if (!(kappa > 0))
        throw InvalidArgument("kappa must be positive");
    LevelTable tab{s, kappa, j_max, {}, true, 0.0};
    for (std::size_t n = 0; n < seq.size(); ++n) {
        const LevelInput& in = seq[n];
        for (int j = 1; j <= j_max; ++j) {
            LevelChoice best;
            double best_cost = kInf;
            for (int m = 1 << j; m <= (1 << (j + 1)) - 1; ++m) {
                const double lambda = std::ldexp(1.0, m);
                const auto cnt = std::count_if(in.M.begin(), in.M.end(), [&](double x) { return x > kappa * lambda; });
                const double meas = double(cnt) * in.cell_area;
                const double cost = std::pow(lambda, s) * meas;
                if (cost < best_cost) {
                    best_cost = cost;
                    best = {int(n), j, m, lambda, meas, 0.0};
                }
            }
            best.ratio = in.grad_norm > 0
                ? best.lambda * std::pow(best.measure, 1.0 / s) * std::pow(2.0, j / s) / in.grad_norm
                : 0.0;
            if (best.lambda < std::ldexp(1.0, 1 << j) || best.lambda > std::ldexp(1.0, (1 << (j + 1)) - 1))
                tab.bracket_ok = false;
            tab.max_ratio = std::max(tab.max_ratio, best.ratio);
            tab.rows.push_back(best);
        }
    }
    return tab;
}

} // namespace imflow
