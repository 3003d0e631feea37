#pragma once

#include "imflow/core.hpp"

#include <map>
#include <mutex>

namespace imflow {

struct GaussRule {
    std::vector<double> x; // nodes on [0,1]
    std::vector<double> w; // weights summing to 1
};

// Legendre P_n and its derivative at z.
inline void legendre(int n, double z, double& p, double& dp)
{
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    p = n == 0 ? 1.0 : p1;
    dp = n == 0 ? 0.0 : n * (z * p1 - p0) / (z * z - 1.0);
}

// Gauss-Legendre on [0,1] with n nodes via Newton on P_n.
inline GaussRule gauss_legendre(int n)
{
    if (n < 1)
        throw InvalidArgument("gauss_legendre needs n >= 1");
    GaussRule g;
    g.x.assign(n, 0.5);
    g.w.assign(n, 1.0);
    if (n == 1)
        return g;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double p = 0.0, dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            legendre(n, z, p, dp);
            const double dz = p / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16)
                break;
        }
        legendre(n, z, p, dp);
        const double w = 1.0 / ((1.0 - z * z) * dp * dp);
        g.x[i] = 0.5 * (1.0 - z);
        g.x[n - 1 - i] = 0.5 * (1.0 + z);
        g.w[i] = g.w[n - 1 - i] = w;
    }
    return g;
}

inline const GaussRule& gauss_cached(int n)
{
    static std::mutex m;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(m);
    auto it = cache.find(n);
    if (it == cache.end())
        it = cache.emplace(n, gauss_legendre(n)).first;
    return it->second;
}

// Triangle rule in barycentric coordinates; weights are fractions of the
// cell area, so the integral over E is |E| * sum w_q f(x_q).
struct TriangleRule {
    std::vector<std::array<double, 3>> bary;
    std::vector<double> w;
    std::size_t size() const { return w.size(); }
};

// Collapsed (conical) product rule exact for degree p. The collapsed edge
// of the square maps onto local vertex `apex`, which is never sampled.
inline TriangleRule collapsed_rule(int degree, int apex = 0)
{
    const int n = std::max(1, (degree + 3) / 2);
    const GaussRule& g = gauss_cached(n);
    TriangleRule r;
    for (int i = 0; i < n; ++i) {
        const double u = g.x[i];
        for (int j = 0; j < n; ++j) {
            const double v = g.x[j];
            std::array<double, 3> b{};
            b[apex] = u;
            b[(apex + 1) % 3] = (1.0 - u) * v;
            b[(apex + 2) % 3] = (1.0 - u) * (1.0 - v);
            r.bary.push_back(b);
            r.w.push_back(2.0 * g.w[i] * g.w[j] * (1.0 - u));
        }
    }
    return r;
}

// Six triangles (vertex, edge midpoint, centroid), each collapsed onto its
// vertex. A factor 1/(1 - l_v) becomes polynomial on the pieces at z_v and
// stays analytic with l_v <= 1/2 on the others.
inline TriangleRule vertex_star_rule(int degree)
{
    TriangleRule out;
    const TriangleRule r = collapsed_rule(degree, 0);
    const std::array<double, 3> centroid{1.0 / 3, 1.0 / 3, 1.0 / 3};
    for (int v = 0; v < 3; ++v)
        for (int s = 1; s <= 2; ++s) {
            std::array<std::array<double, 3>, 3> verts{};
            verts[0][v] = 1.0;
            verts[1][v] = 0.5;
            verts[1][(v + s) % 3] = 0.5;
            verts[2] = centroid;
            // each piece has a sixth of the area
            for (std::size_t q = 0; q < r.size(); ++q) {
                std::array<double, 3> b{};
                for (int k = 0; k < 3; ++k)
                    for (int c = 0; c < 3; ++c)
                        b[c] += r.bary[q][k] * verts[k][c];
                out.bary.push_back(b);
                out.w.push_back(r.w[q] / 6.0);
            }
        }
    return out;
}

// Tetrahedron rule by repeated collapse (used for 3D geometric integrals).
struct TetRule {
    std::vector<std::array<double, 4>> bary;
    std::vector<double> w;
};

inline TetRule collapsed_tet_rule(int degree)
{
    const int n = std::max(1, (degree + 4) / 2);
    const GaussRule& g = gauss_cached(n);
    TetRule r;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double a = g.x[i], b = g.x[j], c = g.x[k];
                const double l1 = a;
                const double l2 = (1 - a) * b;
                const double l3 = (1 - a) * (1 - b) * c;
                r.bary.push_back({1 - l1 - l2 - l3, l1, l2, l3});
                r.w.push_back(6.0 * g.w[i] * g.w[j] * g.w[k] * (1 - a) * (1 - a) * (1 - b));
            }
    return r;
}

} // namespace imflow
