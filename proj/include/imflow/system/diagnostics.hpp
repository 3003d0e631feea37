#pragma once

#include "imflow/system/forms.hpp"

namespace imflow {

// Reference solution with its velocity gradient.
struct ExactSolution {
    std::function<Vec2(const Vec2&)> u;
    std::function<Mat2(const Vec2&)> grad;
    std::function<double(const Vec2&)> p;
};

namespace detail {

// fn(weight, x, U(x), grad U(x), P(x)) over a rule of the given degree.
template <class Fn> void sweep(const SpacePair& sp, const VectorXd& U, const VectorXd* P, int degree, Fn&& fn)
{
    require_size(sp, U, "velocity coefficients");
    const auto& t = sp.mesh();
    const TriangleRule r = sp.quadrature(degree);
    for (int c = 0; c < t.num_cells(); ++c)
        for (std::size_t q = 0; q < r.size(); ++q) {
            Vec2 v;
            Mat2 g;
            fe_velocity(sp, U, c, r.bary[q].data(), &v, &g);
            const double p = P ? fe_pressure(sp, *P, c, r.bary[q].data()) : 0.0;
            fn(r.w[q] * t.measure(c), t.map(c, r.bary[q]), v, g, p);
        }
}

inline double lp_root(double sum, double p) { return std::pow(sum, 1.0 / p); }

} // namespace detail

struct VelocityNorms {
    double value = 0.0; // |U|_r
    double grad = 0.0;  // |grad U|_r
    double sym = 0.0;   // |D U|_r
    double full() const { return grad + value; }
};

inline VelocityNorms velocity_norms(const SpacePair& sp, const VectorXd& U, double r)
{
    double a = 0, b = 0, c = 0;
    detail::sweep(sp, U, nullptr, sp.default_degree(), [&](double w, const Vec2&, const Vec2& v, const Mat2& g, double) {
        a += w * std::pow(v.norm(), r);
        b += w * std::pow(frobenius<2>(g), r);
        c += w * std::pow(frobenius<2>(sym<2>(g)), r);
    });
    return {detail::lp_root(a, r), detail::lp_root(b, r), detail::lp_root(c, r)};
}

// |S(D U)|_q
inline double stress_norm(const SpacePair& sp, const StressModel& law, const VectorXd& U, double q)
{
    double s = 0;
    detail::sweep(sp, U, nullptr, sp.default_degree(), [&](double w, const Vec2&, const Vec2&, const Mat2& g, double) {
        s += w * std::pow(frobenius<2>(law.stress(sym<2>(g))), q);
    });
    return detail::lp_root(s, q);
}

// Energy int S(DU):DU.
inline double stress_power(const SpacePair& sp, const StressModel& law, const VectorXd& U)
{
    double s = 0;
    detail::sweep(sp, U, nullptr, sp.default_degree(), [&](double w, const Vec2&, const Vec2&, const Mat2& g, double) {
        const Mat2 d = sym<2>(g);
        s += w * contract<2>(law.stress(d), d);
    });
    return s;
}

struct ErrorNorms {
    double u_value = 0.0; // |u - U|_r
    double u_grad = 0.0;  // |grad(u - U)|_r
    double p = 0.0;       // |p - P - mean|_{rt}
    double u_full() const { return u_value + u_grad; }
};

inline ErrorNorms error_norms(const SpacePair& sp, const VectorXd& U, const VectorXd& P, const ExactSolution& ex,
    double r, double rt)
{
    const int deg = sp.default_degree() + 2;
    double mean = 0, area = 0;
    detail::sweep(sp, U, &P, deg, [&](double w, const Vec2& x, const Vec2&, const Mat2&, double p) {
        mean += w * (ex.p(x) - p);
        area += w;
    });
    mean /= area;
    double a = 0, b = 0, c = 0;
    detail::sweep(sp, U, &P, deg, [&](double w, const Vec2& x, const Vec2& v, const Mat2& g, double p) {
        a += w * std::pow((ex.u(x) - v).norm(), r);
        b += w * std::pow(frobenius<2>(Mat2(ex.grad(x) - g)), r);
        c += w * std::pow(std::abs(ex.p(x) - p - mean), rt);
    });
    return {detail::lp_root(a, r), detail::lp_root(b, r), detail::lp_root(c, rt)};
}

// a_n = (S^n(DU) - S*(Du)):(DU - Du) at quadrature points, with the measure
// of {|a_n| > eps} and int |a_n|^theta.
struct AnReport {
    std::vector<double> eps;
    std::vector<double> measure;
    std::vector<double> theta;
    std::vector<double> integral;
    double min_value = 0.0;
    double max_value = 0.0;
    std::vector<double> values; // per quadrature point, cell-major
};

inline AnReport an_diagnostic(const SpacePair& sp, const StressModel& law, const VectorXd& U,
    const std::function<Mat2(const Vec2&)>& grad_u, std::vector<double> eps = {1e-2, 1e-3},
    std::vector<double> theta = {0.5, 0.9})
{
    AnReport rep;
    rep.eps = std::move(eps);
    rep.theta = std::move(theta);
    rep.measure.assign(rep.eps.size(), 0.0);
    rep.integral.assign(rep.theta.size(), 0.0);
    rep.min_value = kInf;
    rep.max_value = -kInf;
    detail::sweep(sp, U, nullptr, sp.default_degree(), [&](double w, const Vec2& x, const Vec2&, const Mat2& g, double) {
        const Mat2 dU = sym<2>(g), du = sym<2>(grad_u(x));
        const double a = contract<2>(Mat2(law.stress(dU) - law.law().selection<2>(du)), Mat2(dU - du));
        rep.values.push_back(a);
        rep.min_value = std::min(rep.min_value, a);
        rep.max_value = std::max(rep.max_value, a);
        for (std::size_t k = 0; k < rep.eps.size(); ++k)
            if (std::abs(a) > rep.eps[k])
                rep.measure[k] += w;
        for (std::size_t k = 0; k < rep.theta.size(); ++k)
            rep.integral[k] += w * std::pow(std::abs(a), rep.theta[k]);
    });
    return rep;
}

// Discrete mollifier measure mu^n_0 on symmetric 2x2 matrices (Frobenius
// metric, coordinates z = [a, c/sqrt2; c/sqrt2, b]): Gauss rules in radius
// and in cos(polar angle), uniform azimuth, weights normalized to one.
struct MollifierMeasure {
    std::vector<Mat2> z;
    std::vector<double> w;

    MollifierMeasure(int n, int n_radius = 32, int n_polar = 8, int n_azimuth = 16)
    {
        if (n < 1)
            throw InvalidArgument("mollifier measure needs n >= 1");
        const GaussRule& gr = gauss_cached(n_radius);
        const GaussRule& gp = gauss_cached(n_polar);
        const double eps = 1.0 / n, r2 = 1.0 / std::sqrt(2.0);
        double total = 0;
        for (int i = 0; i < n_radius; ++i) {
            const double t = gr.x[i], rho = eps * t;
            const double k = std::exp(-1.0 / (1.0 - t * t)) * t * t * gr.w[i];
            for (int j = 0; j < n_polar; ++j) {
                const double ct = 2 * gp.x[j] - 1, st = std::sqrt(1 - ct * ct);
                for (int l = 0; l < n_azimuth; ++l) {
                    const double ph = 2 * kPi * (l + 0.5) / n_azimuth;
                    const double a = rho * st * std::cos(ph), b = rho * st * std::sin(ph), c = rho * ct;
                    Mat2 m;
                    m << a, c * r2, c * r2, b;
                    z.push_back(m);
                    w.push_back(k * gp.w[j]);
                    total += k * gp.w[j];
                }
            }
        }
        for (double& x : w)
            x /= total;
    }
};

// b_n = int (S*(zeta) - S*(Du)):(zeta - Du) d mu^n_{DU}(zeta) at quadrature
// points, with |{|b_n| > eps}|, int |b_n|^theta and int |a_n - b_n|.
struct BnReport {
    std::vector<double> eps;
    std::vector<double> measure;
    std::vector<double> theta;
    std::vector<double> integral;
    double min_value = 0.0;
    double max_value = 0.0;
    double an_gap = 0.0; // int |a_n - b_n|
};

inline BnReport bn_diagnostic(const SpacePair& sp, const StressModel& law, const VectorXd& U,
    const std::function<Mat2(const Vec2&)>& grad_u, std::vector<double> eps = {1e-2, 1e-3},
    std::vector<double> theta = {0.5, 0.9})
{
    if (law.index() < 1)
        throw InvalidArgument("b_n needs a mollified law (n >= 1)");
    const MollifierMeasure mu(law.index());
    const GraphLaw& g = law.law();
    BnReport rep;
    rep.eps = std::move(eps);
    rep.theta = std::move(theta);
    rep.measure.assign(rep.eps.size(), 0.0);
    rep.integral.assign(rep.theta.size(), 0.0);
    rep.min_value = kInf;
    rep.max_value = -kInf;
    detail::sweep(sp, U, nullptr, sp.default_degree(), [&](double w, const Vec2& x, const Vec2&, const Mat2& gr, double) {
        const Mat2 dU = sym<2>(gr), du = sym<2>(grad_u(x));
        const Mat2 su = g.selection<2>(du);
        double b = 0;
        for (std::size_t q = 0; q < mu.w.size(); ++q) {
            const Mat2 zeta = dU - mu.z[q];
            b += mu.w[q] * contract<2>(Mat2(g.selection<2>(zeta) - su), Mat2(zeta - du));
        }
        const double a = contract<2>(Mat2(law.stress(dU) - su), Mat2(dU - du));
        rep.an_gap += w * std::abs(a - b);
        rep.min_value = std::min(rep.min_value, b);
        rep.max_value = std::max(rep.max_value, b);
        for (std::size_t k = 0; k < rep.eps.size(); ++k)
            if (std::abs(b) > rep.eps[k])
                rep.measure[k] += w;
        for (std::size_t k = 0; k < rep.theta.size(); ++k)
            rep.integral[k] += w * std::pow(std::abs(b), rep.theta[k]);
    });
    return rep;
}

} // namespace imflow
