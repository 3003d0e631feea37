#pragma once

#include "imflow/elements/space_pair.hpp"

#include <functional>

namespace imflow {

// Evaluable vector field. `cell` is the mesh cell the caller is integrating
// over (or -1); fields living on that mesh may use it, analytic ones ignore it.
using VectorFieldFn = std::function<void(int cell, const Vec2& x, Vec2* value, Mat2* grad)>;
using ScalarFieldFn = std::function<double(int cell, const Vec2& x)>;

inline VectorFieldFn analytic_field(std::function<Vec2(const Vec2&)> u, std::function<Mat2(const Vec2&)> grad = {})
{
    return [u = std::move(u), grad = std::move(grad)](int, const Vec2& x, Vec2* v, Mat2* g) {
        if (v)
            *v = u(x);
        if (g) {
            if (!grad)
                throw InvalidArgument("field has no gradient");
            *g = grad(x);
        }
    };
}

inline ScalarFieldFn analytic_scalar(std::function<double(const Vec2&)> p)
{
    return [p = std::move(p)](int, const Vec2& x) { return p(x); };
}

// Discrete velocity at barycentric point l of cell c.
inline void fe_velocity(const SpacePair& sp, const VectorXd& U, int c, const double* l, Vec2* value, Mat2* grad)
{
    VelocityBasis b;
    sp.eval_velocity(c, l, b);
    const int* dofs = sp.velocity_dofs(c);
    Vec2 v = Vec2::Zero();
    Mat2 g = Mat2::Zero();
    for (int k = 0; k < b.n; ++k) {
        if (dofs[k] < 0)
            continue;
        v += U[dofs[k]] * b.value[k];
        g += U[dofs[k]] * b.grad[k];
    }
    if (value)
        *value = v;
    if (grad)
        *grad = g;
}

inline double fe_pressure(const SpacePair& sp, const VectorXd& P, int c, const double* l)
{
    PressureBasis b;
    sp.eval_pressure(c, l, b);
    const int* dofs = sp.pressure_dofs(c);
    double p = 0.0;
    for (int k = 0; k < b.n; ++k)
        p += P[dofs[k]] * b.value[k];
    return p;
}

// Barycentrics of x in the hinted cell when x lies in it, else by search.
inline Located locate_with_hint(const Triangulation<2>& t, int hint, const Vec2& x)
{
    if (hint >= 0) {
        auto b = t.barycentric(hint, x);
        if (std::min({b[0], b[1], b[2]}) >= -1e-10)
            return {hint, b};
    }
    return t.locate_or_throw(x);
}

inline VectorFieldFn fe_field(const SpacePair& sp, const VectorXd& U)
{
    if (U.size() != sp.velocity_dim())
        throw InvalidArgument("coefficient vector does not match the velocity space");
    return [&sp, U](int cell, const Vec2& x, Vec2* v, Mat2* g) {
        const Located l = locate_with_hint(sp.mesh(), cell, x);
        fe_velocity(sp, U, l.cell, l.bary.data(), v, g);
    };
}

inline ScalarFieldFn fe_pressure_field(const SpacePair& sp, const VectorXd& P)
{
    return [&sp, P](int cell, const Vec2& x) {
        const Located l = locate_with_hint(sp.mesh(), cell, x);
        return fe_pressure(sp, P, l.cell, l.bary.data());
    };
}

// Nodal interpolation: point values at vertices and edge midpoints; GN edge
// degrees of freedom are edge means; bubble coefficients match the value at
// the centroid. Boundary degrees of freedom are dropped.
inline VectorXd interpolate(const SpacePair& sp, const VectorFieldFn& u)
{
    const auto& t = sp.mesh();
    VectorXd U = VectorXd::Zero(sp.velocity_dim());
    const GaussRule& g = gauss_cached(6);
    const bool gn = sp.kind() == PairKind::guzman_neilan;
    for (int c = 0; c < t.num_cells(); ++c) {
        const int* dofs = sp.velocity_dofs(c);
        Vec2 node_vals[7];
        const int ns = sp.scalar_nodes_per_cell();
        for (int a = 0; a < ns; ++a) {
            const NodeRef n = sp.scalar_node(c, a);
            Vec2 val = Vec2::Zero();
            if (n.type == NodeType::vertex) {
                u(c, t.vertex(n.entity), &val, nullptr);
            } else if (n.type == NodeType::edge) {
                const int k = a - 3;
                const Vec2 A = t.vertex(t.cell(c)[(k + 1) % 3]), B = t.vertex(t.cell(c)[(k + 2) % 3]);
                if (gn) {
                    for (std::size_t q = 0; q < g.x.size(); ++q) {
                        Vec2 w;
                        u(c, A + g.x[q] * (B - A), &w, nullptr);
                        val += g.w[q] * w;
                    }
                } else {
                    u(c, 0.5 * (A + B), &val, nullptr);
                }
            } else {
                // bubble: value at centroid minus the rest of the interpolant there
                Vec2 uc;
                u(c, t.centroid(c), &uc, nullptr);
                VelocityBasis b;
                const double l[3] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
                sp.eval_velocity(c, l, b);
                Vec2 rest = Vec2::Zero();
                for (int k = 0; k < 2 * a; ++k)
                    rest += node_vals[k / 2][k % 2] * b.value[k];
                val = uc - rest;
            }
            node_vals[a] = val;
            for (int comp = 0; comp < 2; ++comp)
                if (dofs[2 * a + comp] >= 0)
                    U[dofs[2 * a + comp]] = val[comp];
        }
    }
    return U;
}

} // namespace imflow
