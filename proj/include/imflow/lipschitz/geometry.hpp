#pragma once

#include "imflow/core.hpp"

namespace imflow {

using Polygon = std::vector<Vec2>;

// Counter-clockwise regular k-gon inscribed in the circle of radius r.
inline Polygon regular_polygon(const Vec2& c, double r, int k = 64)
{
    Polygon p(k);
    for (int i = 0; i < k; ++i) {
        const double a = 2 * kPi * i / k;
        p[i] = c + r * Vec2(std::cos(a), std::sin(a));
    }
    return p;
}

inline Polygon square_polygon(const Vec2& lo, double side)
{
    return {lo, lo + Vec2(side, 0), lo + Vec2(side, side), lo + Vec2(0, side)};
}

inline double cross2(const Vec2& a, const Vec2& b) { return a[0] * b[1] - a[1] * b[0]; }

inline double polygon_area(const Polygon& p)
{
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        s += cross2(p[i], p[(i + 1) % p.size()]);
    return 0.5 * std::abs(s);
}

// Sutherland-Hodgman: subject clipped by a convex counter-clockwise polygon.
inline Polygon clip_convex(Polygon subject, const Polygon& clip)
{
    Polygon out;
    for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
        const Vec2 a = clip[e], d = clip[(e + 1) % clip.size()] - a;
        auto side = [&](const Vec2& x) { return cross2(d, x - a); };
        bool all_in = true;
        for (const Vec2& x : subject)
            if (side(x) < 0) {
                all_in = false;
                break;
            }
        if (all_in)
            continue;
        out.clear();
        for (std::size_t i = 0; i < subject.size(); ++i) {
            const Vec2 p = subject[i], q = subject[(i + 1) % subject.size()];
            const double sp = side(p), sq = side(q);
            if (sp >= 0)
                out.push_back(p);
            if ((sp >= 0) != (sq >= 0))
                out.push_back(p + (sp / (sp - sq)) * (q - p));
        }
        subject.swap(out);
    }
    if (subject.size() < 3)
        subject.clear();
    return subject;
}

inline Polygon ccw_triangle(const Vec2& a, const Vec2& b, const Vec2& c)
{
    if (cross2(b - a, c - a) >= 0)
        return {a, b, c};
    return {a, c, b};
}

// Whether the open interiors of two convex polygons intersect
// (separating-axis test; touching along an edge or a point does not count).
inline bool interiors_intersect(const Polygon& p, const Polygon& q)
{
    auto separated = [](const Polygon& a, const Polygon& b) {
        for (std::size_t i = 0; i < a.size(); ++i) {
            const Vec2 e = a[(i + 1) % a.size()] - a[i];
            const Vec2 n(-e[1], e[0]);
            double amin = kInf, amax = -kInf, bmin = kInf, bmax = -kInf;
            for (const Vec2& x : a) {
                amin = std::min(amin, n.dot(x));
                amax = std::max(amax, n.dot(x));
            }
            for (const Vec2& x : b) {
                bmin = std::min(bmin, n.dot(x));
                bmax = std::max(bmax, n.dot(x));
            }
            if (amax <= bmin || bmax <= amin)
                return true;
        }
        return false;
    };
    return !separated(p, q) && !separated(q, p);
}

// Whether segment [a, b] meets the open square (lo, lo + side)^2.
inline bool segment_meets_open_square(const Vec2& a, const Vec2& b, const Vec2& lo, double side)
{
    // Liang-Barsky on the open box
    double t0 = 0, t1 = 1;
    const Vec2 d = b - a;
    for (int k = 0; k < 2; ++k) {
        const double lo_k = lo[k], hi_k = lo[k] + side;
        if (d[k] == 0) {
            if (a[k] <= lo_k || a[k] >= hi_k)
                return false;
            continue;
        }
        double ta = (lo_k - a[k]) / d[k], tb = (hi_k - a[k]) / d[k];
        if (ta > tb)
            std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 >= t1)
            return false;
    }
    return true;
}

} // namespace imflow
