#pragma once

#include "imflow/constitutive/checks.hpp"
#include "imflow/constitutive/representation.hpp"

#include <chrono>

namespace imflow {

// One instance of every law kind (the power law in both regimes).
inline std::vector<GraphLaw> builtin_laws()
{
    return {GraphLaw(LawKind::newtonian, {1.0, 2.0, 0.0, 1.0}), GraphLaw(LawKind::power_law, {0.5, 1.5, 0.0, 1.0}),
        GraphLaw(LawKind::power_law, {1.0, 3.0, 0.0, 1.0}), GraphLaw(LawKind::stress_power_law, {1.0, 1.8, 0.0, 0.7}),
        GraphLaw(LawKind::shear_stress, {1.0, 2.5, 0.0, 1.0}), GraphLaw(LawKind::bingham, {1.0, 2.0, 0.8, 1.0}),
        GraphLaw(LawKind::herschel_bulkley, {0.7, 1.5, 0.5, 1.0})};
}

struct GraphCheckOptions {
    std::size_t samples = 10000;          // axiom and bound samples
    std::size_t identity_samples = 1000;  // representation round trips
    std::size_t mollified_samples = 10000;
    std::uint64_t seed = 0;
};

struct GraphCheckReport {
    LawKind kind = LawKind::newtonian;
    LawParams params;
    AxiomReport axioms;
    MollifiedBounds m32, m64;
    bool stable = false;           // bound fits within 5% between n = 32 and 64
    double split_defect = 0.0;     // max |sigma + delta - chi| / max(1, |chi|)
    double phi_defect = 0.0;       // max |sigma - delta - phi(chi)| / max(1, |chi|)
    double lift_defect = 0.0;      // max |d(G(zeta)) - zeta| / max(1, |zeta|)
    int membership_failures = 0;   // split points not on the graph
    double phi_lipschitz = 0.0;    // max |phi(a) - phi(b)| / |a - b| over nearby pairs
    double growth_exponent = 0.0;  // fitted slope of log|sigma| against log|delta|
    double seconds = 0.0;

    bool identities_ok() const
    {
        return split_defect <= 1e-10 && phi_defect <= 1e-10 && lift_defect <= 1e-10 && membership_failures == 0;
    }
    bool lipschitz_ok() const { return phi_lipschitz <= 1.0 + 1e-6; }
    bool passed() const
    {
        return axioms.passed && stable && m32.min_monotonicity >= -1e-12 && m64.min_monotonicity >= -1e-12 &&
            identities_ok() && lipschitz_ok();
    }
};

inline GraphCheckReport run_graph_check(const GraphLaw& law, const GraphCheckOptions& o = {})
{
    const auto t0 = std::chrono::steady_clock::now();
    GraphCheckReport rep;
    rep.kind = law.kind();
    rep.params = law.params();
    rep.axioms = check_axioms<2>(law, o.samples, o.seed);
    rep.growth_exponent = rep.axioms.bounds.fitted_r - 1.0;
    rep.m32 = mollified_bounds<2>(MollifiedLaw<2>(law, 32), o.mollified_samples, o.seed + 1);
    rep.m64 = mollified_bounds<2>(MollifiedLaw<2>(law, 64), o.mollified_samples, o.seed + 1);
    rep.stable = bounds_stable(rep.m32.bounds, rep.m64.bounds);

    std::mt19937_64 rng(o.seed + 2);
    std::uniform_real_distribution<double> expo(-3.0, 3.0);
    for (std::size_t i = 0; i < o.identity_samples; ++i) {
        const double mag = std::pow(10.0, expo(rng));
        const Mat2 chi = random_symmetric<2>(rng, mag);
        const GraphPoint<2> p = split_point<2>(law, chi);
        const double sc = std::max(1.0, mag);
        rep.split_defect = std::max(rep.split_defect, frobenius<2>(Mat2(p.sigma + p.delta - chi)) / sc);
        rep.phi_defect = std::max(rep.phi_defect, frobenius<2>(Mat2(p.sigma - p.delta - phi_map<2>(law, chi))) / sc);
        if (!law.contains<2>(p.delta, p.sigma, 1e-9))
            ++rep.membership_failures;
        const Mat2 z = random_symmetric<2>(rng, mag);
        rep.lift_defect = std::max(rep.lift_defect, frobenius<2>(Mat2(d_part<2>(law, lift<2>(law, z)) - z)) / sc);

        const Mat2 a = random_symmetric<2>(rng, mag);
        const Mat2 b = a + random_symmetric<2>(rng, 1e-3 * (1 + mag));
        const double den = frobenius<2>(Mat2(a - b));
        if (den > 0)
            rep.phi_lipschitz =
                std::max(rep.phi_lipschitz, frobenius<2>(Mat2(phi_map<2>(law, a) - phi_map<2>(law, b))) / den);
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// Long format `law,check,value,threshold,pass`.
inline std::string graph_check_csv(const std::vector<GraphCheckReport>& reports)
{
    std::string s = "law,check,value,threshold,pass\n";
    for (const auto& r : reports) {
        auto put = [&](const char* check, double v, double thr, bool ok) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%s,%s,%.10e,%.10e,%d\n", to_string(r.kind).c_str(), check, v, thr, ok ? 1 : 0);
            s += buf;
        };
        put("min_monotonicity", r.axioms.min_monotonicity, -1e-12, r.axioms.min_monotonicity >= -1e-12);
        put("growth_c1", r.axioms.bounds.c1, 0, true);
        put("growth_k", r.axioms.bounds.k, 0, true);
        put("coercivity_c2", r.axioms.bounds.c2, 0, r.axioms.bounds.c2 > 0);
        put("coercivity_m", r.axioms.bounds.m, 0, true);
        put("growth_exponent", r.growth_exponent, r.params.r - 1.0, true);
        put("mollified32_c2", r.m32.bounds.c2, 0, r.m32.bounds.c2 > 0);
        put("mollified64_c2", r.m64.bounds.c2, 0, r.m64.bounds.c2 > 0);
        put("mollified_min_monotonicity", std::min(r.m32.min_monotonicity, r.m64.min_monotonicity), -1e-12,
            std::min(r.m32.min_monotonicity, r.m64.min_monotonicity) >= -1e-12);
        put("mollified_bounds_stable", r.stable ? 1 : 0, 0.05, r.stable);
        put("split_defect", r.split_defect, 1e-10, r.split_defect <= 1e-10);
        put("phi_defect", r.phi_defect, 1e-10, r.phi_defect <= 1e-10);
        put("lift_defect", r.lift_defect, 1e-10, r.lift_defect <= 1e-10);
        put("membership_failures", r.membership_failures, 0, r.membership_failures == 0);
        put("phi_lipschitz", r.phi_lipschitz, 1.0 + 1e-6, r.lipschitz_ok());
    }
    return s;
}

} // namespace imflow
