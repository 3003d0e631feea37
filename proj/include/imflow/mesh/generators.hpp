#pragma once

#include "imflow/mesh/triangulation.hpp"

#include <map>
#include <memory>

namespace imflow {

// Boundary tags of an axis-aligned rectangle: 1 bottom, 2 right, 3 top, 4 left.
inline Triangulation<2>::Tagger rectangle_tagger(const Box<2>& r)
{
    return [r](const Vec2& x) {
        const double tol = 1e-10 * r.diameter();
        if (std::abs(x[1] - r.lo[1]) < tol)
            return 1;
        if (std::abs(x[0] - r.hi[0]) < tol)
            return 2;
        if (std::abs(x[1] - r.hi[1]) < tol)
            return 3;
        if (std::abs(x[0] - r.lo[0]) < tol)
            return 4;
        return 5;
    };
}

// Rectangle split into n x n squares, each cut along the same diagonal.
inline Triangulation<2> build_uniform(const Box<2>& rect, int n)
{
    if (n < 1)
        throw InvalidArgument("subdivision count must be positive");
    if (!(rect.hi[0] > rect.lo[0] && rect.hi[1] > rect.lo[1]))
        throw InvalidArgument("empty rectangle");
    std::vector<Vec2> v;
    v.reserve((n + 1) * (n + 1));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            v.emplace_back(rect.lo[0] + (rect.hi[0] - rect.lo[0]) * i / n, rect.lo[1] + (rect.hi[1] - rect.lo[1]) * j / n);
    std::vector<std::array<int, 3>> c;
    c.reserve(2 * n * n);
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            c.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            c.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return Triangulation<2>(std::move(v), std::move(c), rectangle_tagger(rect));
}

inline Triangulation<2> build_unit_square(int n) { return build_uniform(Box<2>{Vec2(0, 0), Vec2(1, 1)}, n); }

// Union of axis-aligned rectangles whose corners lie on a grid of spacing h.
// Grid squares whose centers fall inside some rectangle are triangulated.
inline Triangulation<2> build_rectangle_union(const std::vector<Box<2>>& rects, double h)
{
    if (rects.empty() || !(h > 0))
        throw InvalidArgument("rectangle union needs rectangles and a positive spacing");
    Box<2> bb = rects[0];
    for (const auto& r : rects) {
        bb.lo = bb.lo.cwiseMin(r.lo);
        bb.hi = bb.hi.cwiseMax(r.hi);
        for (int k = 0; k < 2; ++k)
            for (double x : {r.lo[k], r.hi[k]}) {
                const double q = (x - bb.lo[k]) / h;
                if (std::abs(q - std::round(q)) > 1e-9)
                    throw InvalidArgument("rectangle corners must lie on the grid");
            }
    }
    const int nx = int(std::round((bb.hi[0] - bb.lo[0]) / h));
    const int ny = int(std::round((bb.hi[1] - bb.lo[1]) / h));
    std::map<std::pair<int, int>, int> vid;
    std::vector<Vec2> v;
    auto id = [&](int i, int j) {
        auto [it, fresh] = vid.emplace(std::make_pair(j, i), int(v.size()));
        if (fresh)
            v.emplace_back(bb.lo[0] + i * h, bb.lo[1] + j * h);
        return it->second;
    };
    std::vector<std::array<int, 3>> c;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const Vec2 ctr(bb.lo[0] + (i + 0.5) * h, bb.lo[1] + (j + 0.5) * h);
            bool in = false;
            for (const auto& r : rects)
                in = in || r.contains(ctr);
            if (!in)
                continue;
            const int a = id(i, j), b = id(i + 1, j), cc = id(i + 1, j + 1), d = id(i, j + 1);
            c.push_back({a, b, cc});
            c.push_back({a, cc, d});
        }
    return Triangulation<2>(std::move(v), std::move(c));
}

// Box split into n^3 cubes, each cut into the six Kuhn tetrahedra.
inline Triangulation<3> build_box(const Box<3>& box, int n)
{
    if (n < 1)
        throw InvalidArgument("subdivision count must be positive");
    std::vector<Vec<3>> v;
    for (int k = 0; k <= n; ++k)
        for (int j = 0; j <= n; ++j)
            for (int i = 0; i <= n; ++i) {
                Vec<3> x;
                x << box.lo[0] + (box.hi[0] - box.lo[0]) * i / n, box.lo[1] + (box.hi[1] - box.lo[1]) * j / n,
                    box.lo[2] + (box.hi[2] - box.lo[2]) * k / n;
                v.push_back(x);
            }
    auto id = [n](int i, int j, int k) { return (k * (n + 1) + j) * (n + 1) + i; };
    static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    std::vector<std::array<int, 4>> c;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                for (const auto& p : perms) {
                    std::array<int, 3> s{i, j, k};
                    std::array<int, 4> t{};
                    t[0] = id(s[0], s[1], s[2]);
                    for (int m = 0; m < 3; ++m) {
                        ++s[p[m]];
                        t[m + 1] = id(s[0], s[1], s[2]);
                    }
                    c.push_back(t);
                }
    return Triangulation<3>(std::move(v), std::move(c));
}

namespace detail {
template <int D> struct EdgeMidpoints {
    std::map<std::pair<int, int>, int> ids;
    std::vector<Vec<D>>& verts;
    int operator()(int a, int b)
    {
        auto key = std::minmax(a, b);
        auto [it, fresh] = ids.emplace(std::make_pair(key.first, key.second), int(verts.size()));
        if (fresh)
            verts.push_back(0.5 * (verts[a] + verts[b]));
        return it->second;
    }
};
} // namespace detail

// One level of uniform refinement: red split in 2D, Bey's rule in 3D.
// Both keep the shape-regularity constant bounded over repeated refinement.
template <int D> Triangulation<D> refine_uniform(const Triangulation<D>& t)
{
    std::vector<Vec<D>> v = t.vertices();
    detail::EdgeMidpoints<D> mid{{}, v};
    std::vector<std::array<int, D + 1>> out;
    out.reserve(t.num_cells() * (D == 2 ? 4 : 8));
    for (int c = 0; c < t.num_cells(); ++c) {
        const auto& x = t.cell(c);
        if constexpr (D == 2) {
            const int m01 = mid(x[0], x[1]), m12 = mid(x[1], x[2]), m02 = mid(x[0], x[2]);
            out.push_back({x[0], m01, m02});
            out.push_back({m01, x[1], m12});
            out.push_back({m02, m12, x[2]});
            out.push_back({m01, m12, m02});
        } else {
            const int x01 = mid(x[0], x[1]), x02 = mid(x[0], x[2]), x03 = mid(x[0], x[3]);
            const int x12 = mid(x[1], x[2]), x13 = mid(x[1], x[3]), x23 = mid(x[2], x[3]);
            out.push_back({x[0], x01, x02, x03});
            out.push_back({x01, x[1], x12, x13});
            out.push_back({x02, x12, x[2], x23});
            out.push_back({x03, x13, x23, x[3]});
            out.push_back({x01, x02, x03, x13});
            out.push_back({x01, x02, x12, x13});
            out.push_back({x02, x03, x13, x23});
            out.push_back({x02, x12, x13, x23});
        }
    }
    return Triangulation<D>(std::move(v), std::move(out), t.tagger());
}

} // namespace imflow
