#pragma once

#include "imflow/system/diagnostics.hpp"

namespace imflow {

// u = A curl(psi), psi = x^2(1-x)^2 y^2(1-y)^2, p = x - 1/2 on the unit
// square. u and grad u vanish on the boundary and div u = 0.
struct Manufactured {
    double amplitude = 1.0;

    static double g(double t) { return t * t * (1 - t) * (1 - t); }
    static double g1(double t) { return 2 * t * (1 - t) * (1 - 2 * t); }
    static double g2(double t) { return 2 - 12 * t + 12 * t * t; }

    Vec2 u(const Vec2& x) const { return amplitude * Vec2(g(x[0]) * g1(x[1]), -g1(x[0]) * g(x[1])); }

    Mat2 grad(const Vec2& x) const
    {
        Mat2 m;
        m << g1(x[0]) * g1(x[1]), g(x[0]) * g2(x[1]), -g2(x[0]) * g(x[1]), -g1(x[0]) * g1(x[1]);
        return amplitude * m;
    }

    static double p(const Vec2& x) { return x[0] - 0.5; }

    ExactSolution exact() const
    {
        return {[*this](const Vec2& x) { return u(x); }, [*this](const Vec2& x) { return grad(x); },
            [](const Vec2& x) { return p(x); }};
    }

    // f = -div S*(Du) + (grad u) u + grad p, the stress part kept in
    // divergence form so no second derivatives of the law are needed.
    Load load(const GraphLaw& law, bool convection) const
    {
        Load f;
        const Manufactured m = *this;
        f.G = [m, law](const Vec2& x) { return law.selection<2>(sym<2>(m.grad(x))); };
        f.f0 = [m, convection](const Vec2& x) {
            Vec2 v(1.0, 0.0);
            if (convection)
                v += m.grad(x) * m.u(x);
            return v;
        };
        return f;
    }
};

} // namespace imflow
