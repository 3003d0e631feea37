#pragma once

#include "imflow/lipschitz/maximal.hpp"

#include <cstdint>

namespace imflow {

// Root square [origin, origin + side]^2 split into 2^level x 2^level lattice
// cubes; cube (i, j) has flat index j * n + i.
struct DyadicFrame {
    Vec2 origin = Vec2::Zero();
    double side = 1.0;
    int level = 0;

    // Root square concentric with the box, twice its larger extent, with the
    // lattice fine enough that cubes have side <= resolution.
    static DyadicFrame around(const Box<2>& box, double resolution, int max_level = 12)
    {
        if (!(resolution > 0))
            throw InvalidArgument("lattice resolution must be positive");
        DyadicFrame f;
        const double ext = (box.hi - box.lo).maxCoeff();
        f.side = 2.0 * ext;
        f.origin = 0.5 * (box.lo + box.hi) - Vec2(ext, ext);
        while (f.side / (1 << f.level) > resolution) {
            if (++f.level > max_level)
                throw InvalidArgument("lattice resolution too fine for the bounding box");
        }
        return f;
    }

    int n() const { return 1 << level; }
    double cell() const { return side / n(); }
    double cell_area() const { return cell() * cell(); }
    Vec2 center(int i, int j) const { return origin + cell() * Vec2(i + 0.5, j + 0.5); }

    std::vector<Vec2> centers() const
    {
        std::vector<Vec2> c;
        c.reserve(std::size_t(n()) * n());
        for (int j = 0; j < n(); ++j)
            for (int i = 0; i < n(); ++i)
                c.push_back(center(i, j));
        return c;
    }
};

// Open set U = interior of the union of flagged closed lattice cubes.
struct LevelSet {
    DyadicFrame frame;
    double lambda = 0.0;
    std::vector<char> flag;

    bool in(int i, int j) const
    {
        const int n = frame.n();
        return i >= 0 && j >= 0 && i < n && j < n && flag[std::size_t(j) * n + i];
    }
    int count() const { return static_cast<int>(std::count(flag.begin(), flag.end(), 1)); }
    bool empty() const { return count() == 0; }
    double measure() const { return count() * frame.cell_area(); }

    // x is in U iff every closed lattice cube containing x is flagged.
    bool contains(const Vec2& x) const
    {
        const Vec2 u = (x - frame.origin) / frame.cell();
        int lo[2], hi[2];
        for (int k = 0; k < 2; ++k) {
            const double f = std::floor(u[k]);
            hi[k] = static_cast<int>(f);
            lo[k] = f == u[k] ? hi[k] - 1 : hi[k];
        }
        for (int j = lo[1]; j <= hi[1]; ++j)
            for (int i = lo[0]; i <= hi[0]; ++i)
                if (!in(i, j))
                    return false;
        return true;
    }
};

// U_lambda = {M > lambda}: M given at the lattice centers (flat order).
inline LevelSet level_set(const DyadicFrame& frame, const std::vector<double>& M, double lambda)
{
    if (!(lambda > 0))
        throw InvalidArgument("level must be positive");
    const std::size_t n = std::size_t(frame.n()) * frame.n();
    if (M.size() < n)
        throw InvalidArgument("maximal function not sampled on the lattice");
    LevelSet U{frame, lambda, std::vector<char>(n, 0)};
    for (std::size_t k = 0; k < n; ++k)
        U.flag[k] = M[k] > lambda ? 1 : 0;
    return U;
}

inline LevelSet level_set(const DyadicFrame& frame, const MaximalField& m, double lambda)
{
    return level_set(frame, m.value, lambda);
}

inline constexpr double kThetaD = 2.0 + 64.0 * 1.41421356237309504880;

// Dyadic cube at absolute level `level` (side = root side / 2^level).
struct WhitneyCube {
    int level = 0;
    std::int64_t i = 0, j = 0;
};

struct WhitneyChecks {
    bool disjoint = true;
    bool contained = true;
    bool covering = true; // every point farther than 8 sqrt(2) unit sides from U^c is covered
    bool w2 = true;
    bool w3 = true;
    bool w4 = true;
    bool theta = true;
    int max_neighbors = 0;
    double min_ratio = 1.0, max_ratio = 1.0;           // side ratios of touching cubes
    double min_distance = kInf, max_distance = 0.0;     // dist(Q, U^c) / (sqrt(2) l)
    double uncovered_measure = 0.0;
    bool all() const { return disjoint && contained && covering && w2 && w3 && w4 && theta; }
};

struct WhitneyCover {
    DyadicFrame frame;
    int extra_depth = 0; // levels below the lattice
    std::vector<WhitneyCube> cubes;
    std::vector<std::vector<int>> neighbors;
    WhitneyChecks checks;

    int depth() const { return frame.level + extra_depth; }
    double unit() const { return frame.side / std::ldexp(1.0, depth()); }
    std::int64_t units(int k) const { return std::int64_t(1) << (depth() - cubes[k].level); }
    double side(int k) const { return frame.side / std::ldexp(1.0, cubes[k].level); }
    Vec2 lo(int k) const { return frame.origin + side(k) * Vec2(double(cubes[k].i), double(cubes[k].j)); }
    Vec2 center(int k) const { return lo(k) + 0.5 * side(k) * Vec2(1, 1); }
    int size() const { return static_cast<int>(cubes.size()); }
    bool empty() const { return cubes.empty(); }

    // Cube containing the finest-level unit cell (ux, uy), or -1.
    int owner(std::int64_t ux, std::int64_t uy) const
    {
        const std::int64_t S = std::int64_t(1) << extra_depth, n = frame.n();
        if (ux < 0 || uy < 0 || ux >= n * S || uy >= n * S)
            return -1;
        const int blk = block_[std::size_t(uy / S) * n + ux / S];
        if (blk < 0)
            return -1;
        return paint_[std::size_t(blk) * S * S + std::size_t(uy % S) * S + ux % S];
    }

    // Cube containing x, or -1 (outside U or in the uncovered layer).
    int containing(const Vec2& x) const
    {
        const Vec2 u = (x - frame.origin) / unit();
        return owner(static_cast<std::int64_t>(std::floor(u[0])), static_cast<std::int64_t>(std::floor(u[1])));
    }

    // Candidate cubes whose enlargement may contain x.
    std::vector<int> candidates(const Vec2& x) const
    {
        const Vec2 u = (x - frame.origin) / unit();
        const auto ux = static_cast<std::int64_t>(std::floor(u[0])), uy = static_cast<std::int64_t>(std::floor(u[1]));
        std::vector<int> out;
        for (std::int64_t dy = -1; dy <= 1; ++dy)
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                const int k = owner(ux + dx, uy + dy);
                if (k >= 0) {
                    out.push_back(k);
                    out.insert(out.end(), neighbors[k].begin(), neighbors[k].end());
                }
            }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    // Unnormalized bump on Q* = sqrt(9/8) Q: prod rho(2 (x_i - c_i) / side*),
    // rho(t) = exp(-1 / (1 - t^2)).
    double bump(int k, const Vec2& x, Vec2* grad = nullptr) const
    {
        const double half = 0.5 * std::sqrt(9.0 / 8.0) * side(k);
        const Vec2 c = center(k);
        double f[2], df[2];
        for (int a = 0; a < 2; ++a) {
            const double t = (x[a] - c[a]) / half;
            if (std::abs(t) >= 1) {
                if (grad)
                    grad->setZero();
                return 0.0;
            }
            const double q = 1 - t * t;
            f[a] = std::exp(-1.0 / q);
            df[a] = f[a] * (-2.0 * t / (q * q)) / half;
        }
        if (grad)
            *grad = Vec2(df[0] * f[1], f[0] * df[1]);
        return f[0] * f[1];
    }

    // Index set into paint_ per lattice cell (-1 if the cell is not in U).
    std::vector<int> block_;
    std::vector<int> paint_;
};

namespace detail {

struct ComplementDistance {
    std::int64_t euclid2 = 0; // squared Euclidean distance in units^2
    std::int64_t cheb = 0;    // Chebyshev distance in units
    bool found = false;       // false: nothing within the search radius
};

// Distance from the closed cube [a, a+w] x [b, b+w] (finest units) to the
// complement of U (unflagged lattice cubes and everything outside the root),
// searching a window of Chebyshev radius R.
inline ComplementDistance complement_distance(const LevelSet& U, int extra, std::int64_t a, std::int64_t b,
    std::int64_t w, std::int64_t R)
{
    const std::int64_t S = std::int64_t(1) << extra, n = U.frame.n(), N = n * S;
    ComplementDistance d;
    const std::int64_t out = std::min({a, b, N - a - w, N - b - w});
    if (out <= R) {
        d = {out * out, out, true};
    }
    auto cell_lo = [&](std::int64_t v) { return std::max<std::int64_t>(0, (v - R) >= 0 ? (v - R) / S : 0); };
    const std::int64_t i0 = cell_lo(a), j0 = cell_lo(b);
    const std::int64_t i1 = std::min(n - 1, (a + w + R) / S), j1 = std::min(n - 1, (b + w + R) / S);
    for (std::int64_t cj = j0; cj <= j1; ++cj)
        for (std::int64_t ci = i0; ci <= i1; ++ci) {
            if (U.flag[std::size_t(cj * n + ci)])
                continue;
            const std::int64_t dx = std::max<std::int64_t>({0, ci * S - (a + w), a - (ci + 1) * S});
            const std::int64_t dy = std::max<std::int64_t>({0, cj * S - (b + w), b - (cj + 1) * S});
            const std::int64_t e2 = dx * dx + dy * dy, ch = std::max(dx, dy);
            if (!d.found) {
                d = {e2, ch, true};
            } else {
                d.euclid2 = std::min(d.euclid2, e2);
                d.cheb = std::min(d.cheb, ch);
            }
        }
    return d;
}

} // namespace detail

// Maximal dyadic cubes Q with dist(Q, U^c) >= 8 sqrt(2) l(Q), down to
// `extra_depth` levels below the lattice. Cubes in the boundary layer that
// would need deeper levels are left out and reported as uncovered measure.
inline WhitneyCover whitney_decompose(const LevelSet& U, int extra_depth = 5)
{
    if (extra_depth < 0 || extra_depth > 10)
        throw InvalidArgument("extra Whitney depth must lie in [0, 10]");
    WhitneyCover W;
    W.frame = U.frame;
    W.extra_depth = extra_depth;
    const int n = U.frame.n(), F = W.depth();
    const std::int64_t S = std::int64_t(1) << extra_depth;
    W.block_.assign(std::size_t(n) * n, -1);
    if (U.empty())
        return W;

    int blocks = 0;
    for (std::size_t k = 0; k < W.block_.size(); ++k)
        if (U.flag[k])
            W.block_[k] = blocks++;
    W.paint_.assign(std::size_t(blocks) * S * S, -1);

    auto meets_u = [&](std::int64_t a, std::int64_t b, std::int64_t w) {
        const std::int64_t i0 = a / S, j0 = b / S, i1 = (a + w - 1) / S, j1 = (b + w - 1) / S;
        for (std::int64_t j = j0; j <= j1; ++j)
            for (std::int64_t i = i0; i <= i1; ++i)
                if (U.flag[std::size_t(j * n + i)])
                    return true;
        return false;
    };

    // Depth-first, children in lexicographic (j, i) order.
    std::vector<WhitneyCube> stack{{0, 0, 0}};
    while (!stack.empty()) {
        const WhitneyCube q = stack.back();
        stack.pop_back();
        const std::int64_t w = std::int64_t(1) << (F - q.level), a = q.i * w, b = q.j * w;
        const auto d = detail::complement_distance(U, extra_depth, a, b, w, 12 * w);
        if (!d.found || d.euclid2 >= 128 * w * w) {
            W.cubes.push_back(q);
            continue;
        }
        if (q.level == F)
            continue;
        for (int c = 3; c >= 0; --c) {
            const WhitneyCube ch{q.level + 1, 2 * q.i + (c & 1), 2 * q.j + (c >> 1)};
            const std::int64_t wc = w / 2;
            if (meets_u(ch.i * wc, ch.j * wc, wc))
                stack.push_back(ch);
        }
    }

    WhitneyChecks& chk = W.checks;
    // paint
    for (int k = 0; k < W.size(); ++k) {
        const std::int64_t w = W.units(k), a = W.cubes[k].i * w, b = W.cubes[k].j * w;
        for (std::int64_t uy = b; uy < b + w; ++uy)
            for (std::int64_t ux = a; ux < a + w; ++ux) {
                const int blk = W.block_[std::size_t(uy / S) * n + ux / S];
                if (blk < 0) {
                    chk.contained = false;
                    continue;
                }
                int& p = W.paint_[std::size_t(blk) * S * S + std::size_t(uy % S) * S + ux % S];
                if (p >= 0)
                    chk.disjoint = false;
                p = k;
            }
    }
    // covering up to the finest level
    std::int64_t uncovered = 0;
    for (std::int64_t cj = 0; cj < n; ++cj)
        for (std::int64_t ci = 0; ci < n; ++ci) {
            if (!U.flag[std::size_t(cj * n + ci)])
                continue;
            for (std::int64_t uy = cj * S; uy < (cj + 1) * S; ++uy)
                for (std::int64_t ux = ci * S; ux < (ci + 1) * S; ++ux) {
                    if (W.owner(ux, uy) >= 0)
                        continue;
                    ++uncovered;
                    const auto d = detail::complement_distance(U, extra_depth, ux, uy, 1, 12);
                    if (!d.found || d.euclid2 >= 128)
                        chk.covering = false;
                }
        }
    chk.uncovered_measure = double(uncovered) * W.unit() * W.unit();

    // neighbors: cubes owning a unit cell on the ring around the cube
    W.neighbors.assign(W.size(), {});
    for (int k = 0; k < W.size(); ++k) {
        const std::int64_t w = W.units(k), a = W.cubes[k].i * w, b = W.cubes[k].j * w;
        std::vector<int>& nb = W.neighbors[k];
        auto visit = [&](std::int64_t ux, std::int64_t uy) {
            const int o = W.owner(ux, uy);
            if (o >= 0 && o != k)
                nb.push_back(o);
        };
        for (std::int64_t ux = a - 1; ux <= a + w; ++ux) {
            visit(ux, b - 1);
            visit(ux, b + w);
        }
        for (std::int64_t uy = b; uy < b + w; ++uy) {
            visit(a - 1, uy);
            visit(a + w, uy);
        }
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        chk.max_neighbors = std::max(chk.max_neighbors, int(nb.size()));
        if (nb.size() > 32)
            chk.w4 = false;
        for (int o : nb) {
            const double r = double(w) / double(W.units(o));
            chk.min_ratio = std::min(chk.min_ratio, r);
            chk.max_ratio = std::max(chk.max_ratio, r);
            if (r < 0.5 || r > 2.0)
                chk.w3 = false;
        }
        // W2 on both sides, and theta_d Q meets the complement
        const auto d = detail::complement_distance(U, extra_depth, a, b, w, 46 * w);
        if (!d.found || d.euclid2 < 128 * w * w || d.euclid2 > 2048 * w * w)
            chk.w2 = false;
        if (!d.found || double(d.cheb) > 0.5 * (kThetaD - 1.0) * double(w) * (1 + 1e-12))
            chk.theta = false;
        if (d.found) {
            const double rel = std::sqrt(double(d.euclid2) / (2.0 * double(w) * double(w)));
            chk.min_distance = std::min(chk.min_distance, rel);
            chk.max_distance = std::max(chk.max_distance, rel);
        }
    }
    return W;
}

} // namespace imflow
