#pragma once

#include "imflow/core.hpp"

#include <functional>
#include <optional>

namespace imflow {

enum class LawKind { newtonian, power_law, stress_power_law, shear_stress, bingham, herschel_bulkley };

inline std::string to_string(LawKind k)
{
    switch (k) {
    case LawKind::newtonian: return "newtonian";
    case LawKind::power_law: return "power-law";
    case LawKind::stress_power_law: return "stress-power-law";
    case LawKind::shear_stress: return "shear-stress";
    case LawKind::bingham: return "bingham";
    case LawKind::herschel_bulkley: return "herschel-bulkley";
    }
    return "?";
}

inline LawKind parse_law_kind(const std::string& s)
{
    for (LawKind k : {LawKind::newtonian, LawKind::power_law, LawKind::stress_power_law, LawKind::shear_stress,
             LawKind::bingham, LawKind::herschel_bulkley})
        if (to_string(k) == s)
            return k;
    throw InvalidArgument("unknown law '" + s + "'");
}

struct LawParams {
    double mu = 1.0;    // viscosity scale
    double r = 2.0;     // growth exponent
    double tau_y = 0.0; // yield stress
    double alpha = 1.0; // compliance scale of the stress-driven law
};

// Linearization of an isotropic stress map at delta:
//   dS[h] = a h + b (e:h) e,  e = delta/|delta|.
template <int D> struct Tangent {
    double a = 0.0;
    double b = 0.0;
    Mat<D> e = Mat<D>::Zero();
    Mat<D> apply(const Mat<D>& h) const { return a * h + b * contract<D>(e, h) * e; }
};

// Isotropic maximal monotone graph given by a radial profile: for delta != 0
// the stress is g(|delta|) delta/|delta|; at delta = 0 the graph contains the
// closed ball of radius g(0+). The selection S* picks 0 there.
class GraphLaw {
public:
    GraphLaw(LawKind kind, LawParams p) : kind_(kind), p_(p)
    {
        if (!(p_.r > 1.0))
            throw InvalidArgument("growth exponent r must exceed 1");
        if (!(p_.mu > 0.0))
            throw InvalidArgument("viscosity must be positive");
        if (p_.tau_y < 0.0)
            throw InvalidArgument("yield stress must be non-negative");
        if (!(p_.alpha > 0.0))
            throw InvalidArgument("compliance scale must be positive");
        if (kind_ == LawKind::newtonian || kind_ == LawKind::bingham)
            p_.r = 2.0;
        if (kind_ != LawKind::bingham && kind_ != LawKind::herschel_bulkley)
            p_.tau_y = 0.0;
    }

    LawKind kind() const { return kind_; }
    const LawParams& params() const { return p_; }
    double r() const { return p_.r; }
    double r_conjugate() const { return conjugate_exponent(p_.r); }
    bool single_valued() const { return yield() == 0.0; }
    bool x_dependent() const { return false; }
    double yield() const { return p_.tau_y; }

    // Exactly linear part 2 mu delta carried outside the mollification.
    double linear_coefficient() const
    {
        switch (kind_) {
        case LawKind::newtonian:
        case LawKind::bingham: return 2.0 * p_.mu;
        case LawKind::herschel_bulkley: return p_.r == 2.0 ? 2.0 * p_.mu : 0.0;
        default: return 0.0;
        }
    }
    bool is_linear() const { return kind_ == LawKind::newtonian; }

    // Radial profile g(t) for t > 0 and its derivative.
    double profile(double t) const
    {
        switch (kind_) {
        case LawKind::newtonian: return 2.0 * p_.mu * t;
        case LawKind::power_law: return 2.0 * p_.mu * std::pow(t, p_.r - 1.0);
        case LawKind::bingham: return 2.0 * p_.mu * t + p_.tau_y;
        case LawKind::herschel_bulkley: return 2.0 * p_.mu * std::pow(t, p_.r - 1.0) + p_.tau_y;
        case LawKind::stress_power_law: return invert_stress_power(t);
        case LawKind::shear_stress: return invert_shear_stress(t);
        }
        return 0.0;
    }

    double profile_slope(double t) const
    {
        switch (kind_) {
        case LawKind::newtonian:
        case LawKind::bingham: return 2.0 * p_.mu;
        case LawKind::power_law:
        case LawKind::herschel_bulkley: return 2.0 * p_.mu * (p_.r - 1.0) * std::pow(t, p_.r - 2.0);
        case LawKind::stress_power_law: {
            const double s = invert_stress_power(t);
            const double rc = r_conjugate();
            const double dt = p_.alpha * std::pow(1.0 + s * s, 0.5 * (rc - 4.0)) * (1.0 + (rc - 1.0) * s * s);
            return 1.0 / dt;
        }
        case LawKind::shear_stress: {
            const double s = invert_shear_stress(t);
            const double q = 1.0 + s * s;
            const double dl = 1.0 + s * s / q + 2.0 * s * s / (q * q);
            const double dr = 2.0 * p_.mu * std::pow(1.0 + t * t, 0.5 * (p_.r - 4.0)) * (1.0 + (p_.r - 1.0) * t * t);
            return dr / dl;
        }
        }
        return 0.0;
    }

    // Profile without the exactly linear part.
    double nonlinear_profile(double t) const { return profile(t) - linear_coefficient() * t; }

    template <int D> static void require_symmetric(const Mat<D>& m)
    {
        const double scale = std::max(1.0, frobenius<D>(m));
        if (frobenius<D>(Mat<D>(m - m.transpose())) > 1e-12 * scale)
            throw InvalidArgument("strain rate must be a symmetric matrix");
    }

    // The selection S*(delta).
    template <int D> Mat<D> selection(const Mat<D>& delta) const
    {
        require_symmetric<D>(delta);
        const double t = frobenius<D>(delta);
        if (t == 0.0)
            return Mat<D>::Zero();
        return (profile(t) / t) * delta;
    }

    // Linearization of S* at delta. At delta = 0 the slope just above zero
    // is reported; it is infinite in the limit for r < 2 and yield laws.
    template <int D> Tangent<D> selection_tangent(const Mat<D>& delta) const
    {
        Tangent<D> tg;
        const double t = frobenius<D>(delta);
        if (t == 0.0) {
            tg.a = profile_slope(1e-8);
            return tg;
        }
        const double g = profile(t);
        tg.e = delta / t;
        tg.a = g / t;
        tg.b = profile_slope(t) - g / t;
        return tg;
    }

    // Graph membership: sigma in A(delta) up to tol.
    template <int D> bool contains(const Mat<D>& delta, const Mat<D>& sigma, double tol = 1e-10) const
    {
        const double t = frobenius<D>(delta);
        if (t == 0.0)
            return frobenius<D>(sigma) <= yield() + tol;
        return frobenius<D>(Mat<D>(sigma - selection<D>(delta))) <= tol * std::max(1.0, frobenius<D>(sigma));
    }

private:
    // s with alpha (1+s^2)^{(r'-2)/2} s = t
    double invert_stress_power(double t) const
    {
        const double rc = r_conjugate();
        return solve_monotone(t, [&](double s) { return p_.alpha * std::pow(1.0 + s * s, 0.5 * (rc - 2.0)) * s; },
            [&](double s) { return p_.alpha * std::pow(1.0 + s * s, 0.5 * (rc - 4.0)) * (1.0 + (rc - 1.0) * s * s); });
    }

    // s with s (1 + s^2/(1+s^2)) = 2 mu t (1+t^2)^{(r-2)/2}
    double invert_shear_stress(double t) const
    {
        const double rhs = 2.0 * p_.mu * t * std::pow(1.0 + t * t, 0.5 * (p_.r - 2.0));
        return solve_monotone(rhs, [](double s) { return s * (1.0 + s * s / (1.0 + s * s)); },
            [](double s) {
                const double q = 1.0 + s * s;
                return 1.0 + s * s / q + 2.0 * s * s / (q * q);
            });
    }

    // Safeguarded Newton for an increasing f with f(0) = 0.
    static double solve_monotone(double target, const std::function<double(double)>& f,
        const std::function<double(double)>& df)
    {
        if (target <= 0.0)
            return 0.0;
        double lo = 0.0, hi = 1.0;
        while (f(hi) < target) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e300)
                throw NumericalFailure("profile inversion did not bracket");
        }
        double s = 0.5 * (lo + hi);
        for (int it = 0; it < 200; ++it) {
            const double fs = f(s) - target;
            if (fs > 0)
                hi = s;
            else
                lo = s;
            double next = s - fs / df(s);
            if (!(next > lo && next < hi))
                next = 0.5 * (lo + hi);
            if (std::abs(next - s) <= 4e-16 * std::max(s, 1e-300) || hi - lo <= 4e-16 * hi)
                return next;
            s = next;
        }
        return s;
    }

    LawKind kind_;
    LawParams p_;
};

} // namespace imflow
