#pragma once

#include "imflow/constitutive/graph_law.hpp"
#include "imflow/quadrature.hpp"

namespace imflow {

// Smooth approximation S^n = S* * eta^n of the selection, where eta^n is the
// standard bump exp(-1/(1-|z|^2)) scaled to the ball of radius 1/n in the
// space of symmetric matrices (dimension m = d(d+1)/2, Frobenius metric).
//
// Both the selection and the bump are isotropic, so S^n(delta) = phi(|delta|)
// delta/|delta| and phi reduces to a two-dimensional integral in polar
// coordinates about delta: radius w = |zeta| and angle alpha between zeta and
// delta. The exactly linear part of the law commutes with the convolution
// and is added back unmollified.
//
// phi is tabulated once per instance (cubic Hermite with quadrature slopes on
// a grid uniform near zero and geometric beyond) and evaluated directly by
// quadrature past the end of the table.
template <int D> class MollifiedLaw {
public:
    static constexpr int kSymDim = D * (D + 1) / 2;

    explicit MollifiedLaw(GraphLaw law, int n, int quadrature_points = 48)
        : law_(std::move(law)), n_(n), gw_(gauss_legendre(quadrature_points)), ga_(gauss_legendre(quadrature_points))
    {
        if (n < 1)
            throw InvalidArgument("mollification index must be positive");
        lin_ = law_.linear_coefficient();
        pure_linear_ = law_.is_linear();
        if (!pure_linear_)
            build_table();
    }

    const GraphLaw& law() const { return law_; }
    int index() const { return n_; }
    double radius() const { return 1.0 / n_; }

    Mat<D> stress(const Mat<D>& delta) const
    {
        GraphLaw::require_symmetric<D>(delta);
        if (pure_linear_)
            return lin_ * delta;
        const double t = frobenius<D>(delta);
        if (t == 0.0)
            return Mat<D>::Zero();
        const Radial s = radial(t);
        return (lin_ + s.phi / t) * delta;
    }

    // Stress and its linearization at delta.
    Mat<D> stress(const Mat<D>& delta, Tangent<D>& tg) const
    {
        GraphLaw::require_symmetric<D>(delta);
        tg = Tangent<D>{};
        if (pure_linear_) {
            tg.a = lin_;
            return lin_ * delta;
        }
        const double t = frobenius<D>(delta);
        if (t == 0.0) {
            tg.a = lin_ + dphi_.front();
            return Mat<D>::Zero();
        }
        const Radial s = radial(t);
        tg.e = delta / t;
        tg.a = lin_ + s.phi / t;
        tg.b = s.dphi - s.phi / t;
        return (lin_ + s.phi / t) * delta;
    }

    // Magnitude phi(t) of the mollified nonlinear part and its derivative.
    struct Radial {
        double phi = 0.0;
        double dphi = 0.0;
    };

    // Tabulated phi(t) for t > 0.
    Radial radial(double t) const
    {
        if (pure_linear_)
            return {};
        if (t >= t_.back())
            return radial_quadrature(t, true);
        std::size_t i;
        if (t < t_geo_) {
            i = std::min<std::size_t>(std::size_t(t / dt_uniform_), n_uniform_ - 1);
        } else {
            i = n_uniform_ + std::size_t(std::log(t / t_geo_) / log_ratio_);
            i = std::min(i, t_.size() - 2);
            while (i > n_uniform_ && t < t_[i])
                --i;
            while (i + 2 < t_.size() && t >= t_[i + 1])
                ++i;
        }
        const double h = t_[i + 1] - t_[i];
        const double s = (t - t_[i]) / h;
        const double s2 = s * s, s3 = s2 * s;
        Radial r;
        r.phi = (2 * s3 - 3 * s2 + 1) * phi_[i] + (s3 - 2 * s2 + s) * h * dphi_[i] + (-2 * s3 + 3 * s2) * phi_[i + 1] +
                (s3 - s2) * h * dphi_[i + 1];
        r.dphi = ((6 * s2 - 6 * s) * (phi_[i] - phi_[i + 1])) / h + (3 * s2 - 4 * s + 1) * dphi_[i] +
                 (3 * s2 - 2 * s) * dphi_[i + 1];
        return r;
    }

    // phi(t) by direct quadrature (t > 0).
    Radial radial_quadrature(double t, bool with_derivative) const
    {
        const double eps = 1.0 / n_;
        const double n2 = double(n_) * n_;
        const int m = kSymDim;
        double G = 0, W = 0, dG = 0, dW = 0;
        auto interval = [&](double w0, double w1) {
            if (!(w1 > w0))
                return;
            for (std::size_t i = 0; i < gw_.x.size(); ++i) {
                const double w = w0 + (w1 - w0) * gw_.x[i];
                const double ww = gw_.w[i] * (w1 - w0) * std::pow(w, m - 1);
                if (w <= 0.0)
                    continue;
                // 1 - cos(alpha_max) = (eps^2 - (t-w)^2) / (2tw), capped at 2
                double one_minus_c = (eps * eps - (t - w) * (t - w)) / (2.0 * t * w);
                if (one_minus_c <= 0.0)
                    continue;
                one_minus_c = std::min(one_minus_c, 2.0);
                const double amax = 2.0 * std::asin(std::sqrt(0.5 * one_minus_c));
                const double q = law_.nonlinear_profile(w);
                // On the full sphere the t = 0 kernel integrates to zero against
                // cos(alpha) (also for the symmetric Gauss rule), so subtracting
                // it removes the cancellation for small t.
                const bool full = one_minus_c >= 2.0;
                const double u0 = 1.0 - n2 * w * w;
                const double K0 = full && u0 > 0.0 ? std::exp(-1.0 / u0) : 0.0;
                double g = 0, k = 0, dg = 0, dk = 0;
                for (std::size_t j = 0; j < ga_.x.size(); ++j) {
                    const double a = amax * ga_.x[j];
                    const double sh = std::sin(0.5 * a);
                    const double rho2 = (t - w) * (t - w) + 4.0 * t * w * sh * sh;
                    const double u = 1.0 - n2 * rho2;
                    const double K = u > 0.0 ? std::exp(-1.0 / u) : 0.0;
                    const double sa = std::sin(a);
                    const double jac = ga_.w[j] * amax * std::pow(sa, m - 2);
                    const double ca = std::cos(a);
                    g += jac * ca * (K - K0);
                    if (u <= 0.0)
                        continue;
                    k += jac * K;
                    if (with_derivative) {
                        const double dK = -K * 2.0 * n2 * ((t - w) + 2.0 * w * sh * sh) / (u * u);
                        dg += jac * ca * dK;
                        dk += jac * dK;
                    }
                }
                G += ww * q * g;
                W += ww * k;
                dG += ww * q * dg;
                dW += ww * dk;
            }
        };
        if (t < eps) {
            interval(0.0, eps - t);
            interval(eps - t, eps + t);
        } else {
            interval(t - eps, t + eps);
        }
        if (!(W > 0.0))
            throw NumericalFailure("mollifier normalization vanished at |delta| = " + std::to_string(t));
        Radial r;
        r.phi = G / W;
        if (with_derivative)
            r.dphi = (dG * W - G * dW) / (W * W);
        return r;
    }

    double table_end() const { return t_.empty() ? 0.0 : t_.back(); }

private:
    void build_table()
    {
        const double eps = 1.0 / n_;
        n_uniform_ = 128;
        dt_uniform_ = 2.0 * eps / n_uniform_;
        t_geo_ = 2.0 * eps;
        const double ratio = 1.02;
        log_ratio_ = std::log(ratio);
        for (std::size_t i = 0; i < n_uniform_; ++i)
            t_.push_back(i * dt_uniform_);
        for (double t = t_geo_; t < 1.0e4 * ratio; t *= ratio)
            t_.push_back(t);
        phi_.resize(t_.size());
        dphi_.resize(t_.size());
        // phi(0) = 0; the slope at zero comes from a tiny positive t where
        // phi is linear to within t^2.
        const double ts = 1e-6 * eps;
        phi_[0] = 0.0;
        dphi_[0] = radial_quadrature(ts, false).phi / ts;
        for (std::size_t i = 1; i < t_.size(); ++i) {
            const Radial q = radial_quadrature(t_[i], true);
            phi_[i] = q.phi;
            dphi_[i] = q.dphi;
        }
    }

    GraphLaw law_;
    int n_;
    GaussRule gw_, ga_;
    double lin_ = 0.0;
    bool pure_linear_ = false;
    std::vector<double> t_, phi_, dphi_;
    std::size_t n_uniform_ = 0;
    double dt_uniform_ = 0.0, t_geo_ = 0.0, log_ratio_ = 0.0;
};

} // namespace imflow
