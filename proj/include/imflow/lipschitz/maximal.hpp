#pragma once

#include "imflow/elements/field.hpp"
#include "imflow/lipschitz/geometry.hpp"
#include "imflow/system/assembly.hpp"

namespace imflow {

// Vector field living on a triangulation, zero outside the meshed domain.
struct MeshField {
    const Triangulation<2>* mesh = nullptr;
    std::function<void(int cell, const double* bary, Vec2* value, Mat2* grad)> eval;
    int degree = 6; // quadrature degree for integrals of the field

    // Value and gradient at x; zero outside the mesh.
    void at(const Vec2& x, Vec2* v, Mat2* g) const
    {
        const Located l = mesh->locate(x);
        if (l.cell < 0) {
            if (v)
                *v = Vec2::Zero();
            if (g)
                *g = Mat2::Zero();
            return;
        }
        eval(l.cell, l.bary.data(), v, g);
    }
};

inline MeshField mesh_field(const SpacePair& sp, const VectorXd& U)
{
    if (U.size() != sp.velocity_dim())
        throw InvalidArgument("coefficient vector does not match the velocity space");
    MeshField f;
    f.mesh = &sp.mesh();
    f.degree = sp.default_degree();
    f.eval = [&sp, U](int c, const double* l, Vec2* v, Mat2* g) { fe_velocity(sp, U, c, l, v, g); };
    return f;
}

inline MeshField mesh_field(const Triangulation<2>& t, std::function<Vec2(const Vec2&)> u,
    std::function<Mat2(const Vec2&)> grad, int degree = 8)
{
    MeshField f;
    f.mesh = &t;
    f.degree = degree;
    f.eval = [&t, u = std::move(u), grad = std::move(grad)](int c, const double* l, Vec2* v, Mat2* g) {
        const Vec2 x = t.map(c, l);
        if (v)
            *v = u(x);
        if (g)
            *g = grad(x);
    };
    return f;
}

// Nonnegative density on a triangulation, zero outside.
struct CellDensity {
    const Triangulation<2>* mesh = nullptr;
    std::function<double(int cell, const double* bary)> value;
    int degree = 6;
};

inline CellDensity gradient_density(const MeshField& f)
{
    return {f.mesh,
        [f](int c, const double* l) {
            Mat2 g;
            f.eval(c, l, nullptr, &g);
            return g.norm();
        },
        f.degree};
}

// r_k = rmin 2^(k / per_octave), up to the first radius >= rmax.
inline std::vector<double> dyadic_radii(double rmin, double rmax, int per_octave = 1)
{
    if (!(rmin > 0) || !(rmax >= rmin) || per_octave < 1)
        throw InvalidArgument("radius grid needs 0 < rmin <= rmax");
    std::vector<double> r;
    for (int k = 0;; ++k) {
        r.push_back(rmin * std::exp2(double(k) / per_octave));
        if (r.back() >= rmax)
            break;
    }
    return r;
}

struct MaximalField {
    std::vector<Vec2> samples;
    std::vector<double> value; // max of local value and ball averages
    std::vector<double> local; // density at the sample (0 outside)
    std::vector<double> radii;
    // Relative increase of the maximum when the radius grid is refined by
    // its midpoints (0 when no refinement pass was run).
    double refinement_sensitivity = 0.0;
    int refined_samples = 0; // samples whose value grew under refinement
};

// Ball averages of a cell density over inscribed 64-gons, with whole cells
// taken from a precomputed table and boundary cells clipped.
class BallAverager {
public:
    explicit BallAverager(CellDensity g, int sides = 64) : g_(std::move(g)), sides_(sides)
    {
        if (!g_.mesh || !g_.value)
            throw InvalidArgument("density has no mesh");
        const auto& t = *g_.mesh;
        rule_ = collapsed_rule(g_.degree);
        cell_integral_.resize(t.num_cells());
        for (int c = 0; c < t.num_cells(); ++c) {
            double s = 0;
            for (std::size_t q = 0; q < rule_.size(); ++q)
                s += rule_.w[q] * g_.value(c, rule_.bary[q].data());
            cell_integral_[c] = s * t.measure(c);
        }
    }

    const CellDensity& density() const { return g_; }

    double local(const Vec2& x) const
    {
        const Located l = g_.mesh->locate(x);
        return l.cell < 0 ? 0.0 : g_.value(l.cell, l.bary.data());
    }

    // Integral of the density over the convex ccw polygon p.
    double integrate(const Polygon& p, const Box<2>& box) const
    {
        const auto& t = *g_.mesh;
        double s = 0;
        for (int c : t.cells_near(box)) {
            const auto& cv = t.cell(c);
            const Polygon tri = ccw_triangle(t.vertex(cv[0]), t.vertex(cv[1]), t.vertex(cv[2]));
            s += piece(c, clip_convex(tri, p));
        }
        return s;
    }

    double average(const Vec2& x, double R) const
    {
        const auto& t = *g_.mesh;
        const Polygon ball = regular_polygon(x, R, sides_);
        const double inner = R * std::cos(kPi / sides_);
        double s = 0;
        for (int c : t.cells_near(Box<2>{x - Vec2(R, R), x + Vec2(R, R)})) {
            const auto& cv = t.cell(c);
            const Vec2 a = t.vertex(cv[0]), b = t.vertex(cv[1]), d = t.vertex(cv[2]);
            const double far = std::max({(a - x).norm(), (b - x).norm(), (d - x).norm()});
            if (far <= inner) {
                s += cell_integral_[c];
                continue;
            }
            if (point_triangle_distance(x, a, b, d) >= R)
                continue;
            s += piece(c, clip_convex(ccw_triangle(a, b, d), ball));
        }
        return s / polygon_area(ball);
    }

private:
    static double point_segment_distance(const Vec2& x, const Vec2& a, const Vec2& b)
    {
        const Vec2 d = b - a;
        const double t = std::clamp((x - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
        return (a + t * d - x).norm();
    }

    static double point_triangle_distance(const Vec2& x, const Vec2& a, const Vec2& b, const Vec2& c)
    {
        const double s1 = cross2(b - a, x - a), s2 = cross2(c - b, x - b), s3 = cross2(a - c, x - c);
        if ((s1 >= 0 && s2 >= 0 && s3 >= 0) || (s1 <= 0 && s2 <= 0 && s3 <= 0))
            return 0.0;
        return std::min({point_segment_distance(x, a, b), point_segment_distance(x, b, c),
            point_segment_distance(x, c, a)});
    }

    // Integral over a convex piece of cell c (fan triangulation).
    double piece(int c, const Polygon& p) const
    {
        if (p.size() < 3)
            return 0.0;
        const auto& t = *g_.mesh;
        double s = 0;
        for (std::size_t k = 1; k + 1 < p.size(); ++k) {
            const double area = 0.5 * std::abs(cross2(p[k] - p[0], p[k + 1] - p[0]));
            if (area == 0)
                continue;
            double acc = 0;
            for (std::size_t q = 0; q < rule_.size(); ++q) {
                const auto& l = rule_.bary[q];
                const Vec2 y = l[0] * p[0] + l[1] * p[k] + l[2] * p[k + 1];
                const auto b = t.barycentric(c, y);
                acc += rule_.w[q] * g_.value(c, b.data());
            }
            s += acc * area;
        }
        return s;
    }

    CellDensity g_;
    int sides_;
    TriangleRule rule_;
    std::vector<double> cell_integral_;
};

// M(g)(x) = max(g(x), max_R avg_{B_R(x)} g) over the given radius grid.
inline MaximalField maximal_function(const BallAverager& avg, std::vector<Vec2> samples, std::vector<double> radii,
    int threads = 1)
{
    if (radii.empty())
        throw InvalidArgument("empty radius grid");
    MaximalField m;
    m.samples = std::move(samples);
    m.radii = std::move(radii);
    const int n = static_cast<int>(m.samples.size());
    m.value.assign(n, 0.0);
    m.local.assign(n, 0.0);
    parallel_cells(n, threads, [&](int i) {
        const double g = avg.local(m.samples[i]);
        double best = g;
        for (double R : m.radii)
            best = std::max(best, avg.average(m.samples[i], R));
        m.local[i] = g;
        m.value[i] = best;
    });
    return m;
}

// Dyadic grid from rmin to rmax plus one midpoint refinement pass; the
// returned values use the refined grid, and the sensitivity compares it with
// the plain dyadic grid (which is a subset, so values never decrease).
inline MaximalField maximal_function_refined(const BallAverager& avg, std::vector<Vec2> samples, double rmin,
    double rmax, int threads = 1)
{
    const std::vector<double> radii = dyadic_radii(rmin, rmax, 2);
    MaximalField m;
    m.samples = std::move(samples);
    m.radii = radii;
    const int n = static_cast<int>(m.samples.size());
    m.value.assign(n, 0.0);
    m.local.assign(n, 0.0);
    std::vector<double> coarse(n, 0.0);
    parallel_cells(n, threads, [&](int i) {
        const double g = avg.local(m.samples[i]);
        double fine = g, plain = g;
        for (std::size_t k = 0; k < radii.size(); ++k) {
            const double a = avg.average(m.samples[i], radii[k]);
            fine = std::max(fine, a);
            if (k % 2 == 0)
                plain = std::max(plain, a);
        }
        m.local[i] = g;
        m.value[i] = fine;
        coarse[i] = plain;
    });
    for (int i = 0; i < n; ++i) {
        if (m.value[i] > coarse[i]) {
            ++m.refined_samples;
            m.refinement_sensitivity = std::max(m.refinement_sensitivity, (m.value[i] - coarse[i]) / m.value[i]);
        }
    }
    return m;
}

} // namespace imflow
