#pragma once

#include "imflow/constitutive/graph_law.hpp"

namespace imflow {

template <int D> struct GraphPoint {
    Mat<D> delta = Mat<D>::Zero();
    Mat<D> sigma = Mat<D>::Zero();
};

// Rotated-graph representation: (delta, sigma) lies on the graph iff
// sigma - delta = phi(sigma + delta), with phi 1-Lipschitz. For chi = sigma +
// delta the radial problem is t + g(t) = |chi| (t = |delta|); below the
// yield plateau t = 0 and the whole of chi is stress.
template <int D> GraphPoint<D> split_point(const GraphLaw& law, const Mat<D>& chi)
{
    GraphLaw::require_symmetric<D>(chi);
    GraphPoint<D> p;
    const double c = frobenius<D>(chi);
    if (c == 0.0)
        return p;
    const Mat<D> e = chi / c;
    double t = 0.0;
    if (c > law.yield()) {
        double lo = 0.0, hi = c;
        const double tol = 1e-13 * std::max(1.0, c);
        int it = 0;
        for (; it < 200 && hi - lo > tol; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double f = mid + law.profile(mid) - c;
            if (!std::isfinite(f))
                throw NumericalFailure("non-finite residual while inverting the rotated graph at |chi| = " +
                                       std::to_string(c));
            if (f > 0)
                hi = mid;
            else
                lo = mid;
            if (mid == lo && mid == hi)
                break;
        }
        if (hi - lo > tol && it >= 200)
            throw NumericalFailure("rotated-graph inversion did not converge; bracket width " +
                                   std::to_string(hi - lo));
        t = 0.5 * (lo + hi);
    }
    p.delta = t * e;
    p.sigma = (c - t) * e;
    return p;
}

template <int D> Mat<D> phi_map(const GraphLaw& law, const Mat<D>& chi)
{
    const GraphPoint<D> p = split_point<D>(law, chi);
    return p.sigma - p.delta;
}

// s(chi) = (chi + phi(chi))/2 is the stress part, d(chi) = (chi - phi(chi))/2
// the strain-rate part; both are 1-Lipschitz.
template <int D> Mat<D> s_part(const GraphLaw& law, const Mat<D>& chi) { return split_point<D>(law, chi).sigma; }
template <int D> Mat<D> d_part(const GraphLaw& law, const Mat<D>& chi) { return split_point<D>(law, chi).delta; }

// G(zeta) = S*(zeta) + zeta; d inverts G.
template <int D> Mat<D> lift(const GraphLaw& law, const Mat<D>& zeta) { return law.selection<D>(zeta) + zeta; }

} // namespace imflow
