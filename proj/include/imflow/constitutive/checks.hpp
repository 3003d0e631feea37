#pragma once

#include "imflow/constitutive/mollified.hpp"
#include "imflow/constitutive/representation.hpp"

#include <random>

namespace imflow {

// Random symmetric matrix with Frobenius norm `mag` and uniform direction.
template <int D> Mat<D> random_symmetric(std::mt19937_64& rng, double mag)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat<D> a;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j)
            a(i, j) = nd(rng);
    Mat<D> s = sym<D>(a);
    const double f = frobenius<D>(s);
    return f > 0 ? Mat<D>(s * (mag / f)) : Mat<D>::Zero();
}

// Fitted constants of the growth and coercivity bounds
//   |sigma| <= c1 |delta|^{r-1} + k,   sigma:delta >= c2 |delta|^r - m.
// c1 and c2 are read off the regime |delta| >= 1; the offsets absorb the rest.
struct BoundFit {
    double c1 = 0.0, k = 0.0, c2 = kInf, m = 0.0;
    double fitted_r = 0.0; // log-log growth exponent for large |delta|
};

struct AxiomReport {
    std::size_t samples = 0;
    double min_monotonicity = kInf; // min (s1-s2):(d1-d2) / (|s1-s2||d1-d2|)
    double worst_raw_monotonicity = 0.0;
    BoundFit bounds;
    bool passed = false;
    std::vector<std::string> violations;
};

namespace detail {
struct BoundSample {
    double t, smag, power;
};

inline BoundFit fit_bounds(const std::vector<BoundSample>& s, double r)
{
    BoundFit f;
    for (const auto& x : s)
        if (x.t >= 1.0) {
            f.c1 = std::max(f.c1, x.smag / std::pow(x.t, r - 1.0));
            f.c2 = std::min(f.c2, x.power / std::pow(x.t, r));
        }
    if (!std::isfinite(f.c2))
        f.c2 = 0.0;
    for (const auto& x : s) {
        f.k = std::max(f.k, x.smag - f.c1 * std::pow(x.t, r - 1.0));
        f.m = std::max(f.m, f.c2 * std::pow(x.t, r) - x.power);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& x : s)
        if (x.t >= 10.0 && x.smag > 0) {
            const double lx = std::log(x.t), ly = std::log(x.smag);
            sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
            ++n;
        }
    if (n >= 2)
        f.fitted_r = 1.0 + (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return f;
}

// Magnitudes log-uniform on [1e-3, 1e3].
inline double sample_magnitude(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    return std::pow(10.0, u(rng));
}
} // namespace detail

// Sampled monotonicity and bound fits for the selection of a law. Laws with
// a yield plateau also contribute points (0, sigma) with |sigma| <= tau_y.
template <int D> AxiomReport check_axioms(const GraphLaw& law, std::size_t samples, std::uint64_t seed)
{
    if (samples < 2)
        throw InvalidArgument("axiom check needs at least two samples");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    AxiomReport rep;
    rep.samples = samples;
    std::vector<GraphPoint<D>> pts(samples);
    std::vector<detail::BoundSample> bs;
    for (std::size_t i = 0; i < samples; ++i) {
        if (!law.single_valued() && i % 10 == 0) {
            pts[i].sigma = random_symmetric<D>(rng, law.yield() * u01(rng));
        } else {
            pts[i].delta = random_symmetric<D>(rng, detail::sample_magnitude(rng));
            pts[i].sigma = law.selection<D>(pts[i].delta);
            bs.push_back({frobenius<D>(pts[i].delta), frobenius<D>(pts[i].sigma),
                contract<D>(pts[i].sigma, pts[i].delta)});
        }
    }
    for (std::size_t i = 0; i < samples; ++i) {
        const std::size_t j = (i + 1 + (i * 7919) % (samples - 1)) % samples;
        const Mat<D> ds = pts[i].sigma - pts[j].sigma;
        const Mat<D> dd = pts[i].delta - pts[j].delta;
        const double scale = frobenius<D>(ds) * frobenius<D>(dd);
        if (scale == 0.0)
            continue;
        const double v = contract<D>(ds, dd);
        rep.min_monotonicity = std::min(rep.min_monotonicity, v / scale);
        rep.worst_raw_monotonicity = std::min(rep.worst_raw_monotonicity, v);
    }
    rep.bounds = detail::fit_bounds(bs, law.r());
    if (rep.min_monotonicity < -1e-12)
        rep.violations.push_back("monotonicity violated: normalized minimum " + std::to_string(rep.min_monotonicity));
    if (!(rep.bounds.c2 > 0.0))
        rep.violations.push_back("no positive coercivity constant on |delta| >= 1");
    rep.passed = rep.violations.empty();
    return rep;
}

struct MollifiedBounds {
    int n = 0;
    BoundFit bounds;
    double min_monotonicity = kInf;
};

// Same fits for S^n; uniformity in n shows up as stable constants.
template <int D> MollifiedBounds mollified_bounds(const MollifiedLaw<D>& law, std::size_t samples, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    MollifiedBounds out;
    out.n = law.index();
    std::vector<detail::BoundSample> bs;
    std::vector<GraphPoint<D>> pts(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        pts[i].delta = random_symmetric<D>(rng, detail::sample_magnitude(rng));
        pts[i].sigma = law.stress(pts[i].delta);
        bs.push_back({frobenius<D>(pts[i].delta), frobenius<D>(pts[i].sigma), contract<D>(pts[i].sigma, pts[i].delta)});
    }
    for (std::size_t i = 0; i + 1 < samples; ++i) {
        const Mat<D> ds = pts[i].sigma - pts[i + 1].sigma;
        const Mat<D> dd = pts[i].delta - pts[i + 1].delta;
        const double scale = frobenius<D>(ds) * frobenius<D>(dd);
        if (scale > 0)
            out.min_monotonicity = std::min(out.min_monotonicity, contract<D>(ds, dd) / scale);
    }
    out.bounds = detail::fit_bounds(bs, law.law().r());
    return out;
}

// Relative agreement of two fits: 5% on the constants, offsets compared on
// the scale max(1, |offset|).
inline bool bounds_stable(const BoundFit& a, const BoundFit& b, double rel = 0.05)
{
    auto close = [rel](double x, double y) { return std::abs(x - y) <= rel * std::max(std::abs(x), std::abs(y)); };
    auto close_off = [rel](double x, double y) {
        return std::abs(x - y) <= rel * std::max({1.0, std::abs(x), std::abs(y)});
    };
    return close(a.c1, b.c1) && close(a.c2, b.c2) && close_off(a.k, b.k) && close_off(a.m, b.m);
}

} // namespace imflow
