#pragma once

#include "imflow/constitutive/mollified.hpp"
#include "imflow/elements/field.hpp"

#include <iostream>
#include <memory>

namespace imflow {

// Constitutive law as seen by the discrete problem: the selection S* itself
// (n = 0, single-valued laws only) or the mollified law S^n.
class StressModel {
public:
    StressModel(GraphLaw law, int n) : law_(std::move(law)), n_(n)
    {
        if (n < 0)
            throw InvalidArgument("mollification index must be nonnegative");
        if (n == 0 && !law_.single_valued())
            throw InvalidArgument("law '" + to_string(law_.kind()) + "' is multivalued and needs a mollification index");
        if (n > 0)
            moll_ = std::make_shared<MollifiedLaw<2>>(law_, n);
    }

    const GraphLaw& law() const { return law_; }
    int index() const { return n_; }

    Mat2 stress(const Mat2& d) const { return moll_ ? moll_->stress(d) : law_.selection<2>(d); }

    Mat2 stress(const Mat2& d, Tangent<2>& tg) const
    {
        if (moll_)
            return moll_->stress(d, tg);
        tg = law_.selection_tangent<2>(d);
        return law_.selection<2>(d);
    }

private:
    GraphLaw law_;
    int n_;
    std::shared_ptr<const MollifiedLaw<2>> moll_;
};

// Right-hand side f = f0 - div G, tested as <f, V> = int f0.V + G:grad V.
struct Load {
    std::function<Vec2(const Vec2&)> f0;
    std::function<Mat2(const Vec2&)> G;
    bool zero() const { return !f0 && !G; }
};

namespace detail {

inline void require_size(const SpacePair& sp, const VectorXd& v, const char* what)
{
    if (v.size() != sp.velocity_dim())
        throw InvalidArgument(std::string(what) + " does not match the velocity space of " + sp.name());
}

// Calls fn(weight, value[3], grad[3]) at every quadrature point for the three
// discrete fields a, b, c.
template <class Fn>
void integrate_triple(const SpacePair& sp, const VectorXd& a, const VectorXd& b, const VectorXd& c, Fn&& fn)
{
    require_size(sp, a, "first argument");
    require_size(sp, b, "second argument");
    require_size(sp, c, "third argument");
    const auto& t = sp.mesh();
    const TriangleRule r = sp.quadrature(sp.precise_degree());
    const VectorXd* f[3] = {&a, &b, &c};
    for (int cell = 0; cell < t.num_cells(); ++cell)
        for (std::size_t q = 0; q < r.size(); ++q) {
            Vec2 v[3];
            Mat2 g[3];
            for (int k = 0; k < 3; ++k)
                fe_velocity(sp, *f[k], cell, r.bary[q].data(), &v[k], &g[k]);
            fn(r.w[q] * t.measure(cell), v, g);
        }
}

} // namespace detail

// Skew convection form B[v,w,h] = 1/2 int h.(grad w) v - w.(grad h) v.
inline double trilinear_skew(const SpacePair& sp, const VectorXd& v, const VectorXd& w, const VectorXd& h)
{
    double s = 0.0;
    detail::integrate_triple(sp, v, w, h, [&](double wt, const Vec2* x, const Mat2* g) {
        s += 0.5 * wt * (x[2].dot(g[1] * x[0]) - x[1].dot(g[2] * x[0]));
    });
    return s;
}

// Unmodified form -int w.(grad h) v; skew only when div v = 0 pointwise.
inline double trilinear_divfree(const SpacePair& sp, const VectorXd& v, const VectorXd& w, const VectorXd& h)
{
    if (!sp.divergence_free())
        std::cerr << "warning: divergence-free convection form used with " << sp.name() << "\n";
    double s = 0.0;
    detail::integrate_triple(sp, v, w, h, [&](double wt, const Vec2* x, const Mat2* g) {
        s -= wt * x[1].dot(g[2] * x[0]);
    });
    return s;
}

// 1/2 int (div v)(w.h), the gap between the two forms.
inline double convection_gap(const SpacePair& sp, const VectorXd& v, const VectorXd& w, const VectorXd& h)
{
    double s = 0.0;
    detail::integrate_triple(sp, v, w, h, [&](double wt, const Vec2* x, const Mat2* g) {
        s += 0.5 * wt * g[0].trace() * x[1].dot(x[2]);
    });
    return s;
}

enum class ConvectionForm { none, skew, divfree };

inline ConvectionForm parse_convection(const std::string& s)
{
    if (s == "none" || s == "off" || s == "false")
        return ConvectionForm::none;
    if (s == "skew")
        return ConvectionForm::skew;
    if (s == "divfree")
        return ConvectionForm::divfree;
    throw InvalidArgument("unknown convection form '" + s + "'");
}

inline std::string to_string(ConvectionForm c)
{
    switch (c) {
    case ConvectionForm::none: return "none";
    case ConvectionForm::skew: return "skew";
    case ConvectionForm::divfree: return "divfree";
    }
    return "";
}

// Lower bound on r for which the convection term is controlled:
// 2d/(d+1) for the skew form, 2d/(d+2) for exactly divergence-free pairs.
inline double convection_threshold(int d, bool divergence_free)
{
    return divergence_free ? 2.0 * d / (d + 2) : 2.0 * d / (d + 1);
}

} // namespace imflow
