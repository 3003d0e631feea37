#include "imflow/lipschitz/truncation.hpp"
#include "imflow/mesh/generators.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace imflow;

namespace {

// Fan triangulation of the regular k-gon inscribed in the unit circle.
Triangulation<2> disc_mesh(int k)
{
    std::vector<Vec2> v{Vec2::Zero()};
    std::vector<std::array<int, 3>> c;
    for (int i = 0; i < k; ++i) {
        const double a = 2 * kPi * i / k;
        v.emplace_back(std::cos(a), std::sin(a));
        c.push_back({0, 1 + i, 1 + (i + 1) % k});
    }
    return Triangulation<2>(v, c);
}

CellDensity constant_density(const Triangulation<2>& t, double g) { return {&t, [g](int, const double*) { return g; }, 2}; }

// Open square of lattice cubes [i0, i1) x [j0, j1).
LevelSet box_set(const DyadicFrame& f, int i0, int i1, int j0, int j1)
{
    LevelSet U{f, 1.0, std::vector<char>(std::size_t(f.n()) * f.n(), 0)};
    for (int j = j0; j < j1; ++j)
        for (int i = i0; i < i1; ++i)
            U.flag[std::size_t(j) * f.n() + i] = 1;
    return U;
}

DyadicFrame unit_frame(int level) { return DyadicFrame{Vec2::Zero(), 1.0, level}; }

// Rough zero-trace field: oscillating bubble.
struct Rough {
    double A = 3.0, k = 3.0;
    double phi(double x, double y) const { return A * x * (1 - x) * y * (1 - y) * std::sin(k * kPi * x) * std::sin(k * kPi * y) * 16; }
};

} // namespace

TEST(Geometry, ClipAndArea)
{
    const Polygon tri = ccw_triangle(Vec2(0, 0), Vec2(2, 0), Vec2(0, 2));
    const Polygon sq = square_polygon(Vec2(0, 0), 1.0);
    EXPECT_NEAR(polygon_area(clip_convex(tri, sq)), 1.0, 1e-15);
    const Polygon sq2 = square_polygon(Vec2(0.5, 0.5), 1.0);
    // x + y <= 2 is the diagonal of [0.5,1.5]^2
    EXPECT_NEAR(polygon_area(clip_convex(tri, sq2)), 0.5, 1e-15);
    EXPECT_TRUE(clip_convex(tri, square_polygon(Vec2(3, 3), 1.0)).empty());
    const double k = 64;
    EXPECT_NEAR(polygon_area(regular_polygon(Vec2(1, 2), 1.0)), 0.5 * k * std::sin(2 * kPi / k), 1e-14);
    EXPECT_TRUE(interiors_intersect(sq, sq2));
    EXPECT_FALSE(interiors_intersect(sq, square_polygon(Vec2(1, 0), 1.0))); // shared edge only
    EXPECT_TRUE(segment_meets_open_square(Vec2(-1, 0.5), Vec2(2, 0.5), Vec2(0, 0), 1.0));
    EXPECT_FALSE(segment_meets_open_square(Vec2(-1, 0), Vec2(2, 0), Vec2(0, 0), 1.0));
}

TEST(Maximal, ConstantFieldInterior)
{
    const auto t = build_unit_square(8);
    const BallAverager avg(constant_density(t, 2.5));
    const auto m = maximal_function(avg, {Vec2(0.5, 0.5), Vec2(0.3, 0.6)}, dyadic_radii(0.01, 0.2));
    for (int i = 0; i < 2; ++i)
        EXPECT_NEAR(m.value[i], 2.5, 2.5e-12);
    // ball averages of a constant over balls inside the support
    EXPECT_NEAR(avg.average(Vec2(0.5, 0.5), 0.3), 2.5, 2.5e-12);
    // ball half outside: half the polygon area lies in the square
    EXPECT_NEAR(avg.average(Vec2(0.5, 0.0), 0.2), 1.25, 2.5e-12);
}

TEST(Maximal, DominatesLocalValue)
{
    const auto t = build_unit_square(4);
    const MeshField v = mesh_field(
        t, [](const Vec2& x) { return Vec2(x[0] * x[0] * x[1], std::sin(3 * x[0])); },
        [](const Vec2& x) {
            Mat2 g;
            g << 2 * x[0] * x[1], x[0] * x[0], 3 * std::cos(3 * x[0]), 0;
            return g;
        });
    const BallAverager avg(gradient_density(v));
    std::vector<Vec2> s;
    for (int i = 0; i < 30; ++i)
        s.emplace_back(-0.2 + 0.05 * i, 0.1 + 0.027 * i);
    const auto m = maximal_function(avg, s, dyadic_radii(0.05, 1.5));
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_GE(m.value[i], m.local[i]);
        EXPECT_GE(m.local[i], 0.0);
    }
}

TEST(Maximal, RefinementNeverDecreases)
{
    const auto t = build_unit_square(4);
    const BallAverager avg(constant_density(t, 1.0));
    std::vector<Vec2> s{Vec2(1.3, 0.5), Vec2(-0.4, -0.4), Vec2(0.9, 0.9)};
    const auto plain = maximal_function(avg, s, dyadic_radii(0.1, 1.5, 1));
    const auto fine = maximal_function_refined(avg, s, 0.1, 1.5);
    for (std::size_t i = 0; i < s.size(); ++i)
        EXPECT_GE(fine.value[i], plain.value[i]);
    EXPECT_GE(fine.refinement_sensitivity, 0.0);
    EXPECT_THROW(maximal_function(avg, s, {}), InvalidArgument);
}

TEST(Maximal, DiscIndicatorAtOrigin)
{
    const auto t = disc_mesh(256);
    const BallAverager avg(constant_density(t, 1.0));
    const auto m = maximal_function(avg, {Vec2::Zero()}, dyadic_radii(0.05, 2.0));
    EXPECT_NEAR(m.value[0], 1.0, 1e-12);
}

// M(chi_B1)(x) at |x| = 2 against a Monte-Carlo estimate of
// max_R |B_R(x) cap B_1| / |B_R(x)|.
TEST(Maximal, DiscIndicatorAtDistanceTwo)
{
    const auto t = disc_mesh(256);
    const BallAverager avg(constant_density(t, 1.0));
    const Vec2 x(2.0, 0.0);
    const auto m = maximal_function(avg, {x}, dyadic_radii(0.5, 4.0, 32));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec2> pts;
    while (pts.size() < 400000) {
        const Vec2 p(u(rng), u(rng));
        if (p.squaredNorm() < 1)
            pts.push_back(p);
    }
    double oracle = 0;
    for (double R = 1.0; R <= 4.0; R += 0.01) {
        // uniform points of the unit disc scaled into B_R(x)
        long hit = 0;
        for (std::size_t i = 0; i < pts.size(); i += 4)
            hit += (x + R * pts[i]).squaredNorm() < 1.0;
        oracle = std::max(oracle, double(hit) / double(pts.size() / 4));
    }
    EXPECT_GT(oracle, 0.1);
    EXPECT_NEAR(m.value[0], oracle, 0.02 * oracle);
}

TEST(LevelSet, EmptyNestedAndMembership)
{
    const DyadicFrame f = unit_frame(3);
    std::vector<double> M(64);
    for (int k = 0; k < 64; ++k)
        M[k] = k % 7 + 0.5 * (k / 8);
    const double mx = *std::max_element(M.begin(), M.end());
    EXPECT_TRUE(level_set(f, M, mx + 1).empty());
    EXPECT_THROW(level_set(f, M, 0.0), InvalidArgument);
    const auto a = level_set(f, M, 2.0), b = level_set(f, M, 4.0);
    for (int k = 0; k < 64; ++k)
        if (b.flag[k]) {
            EXPECT_TRUE(a.flag[k]);
        }
    EXPECT_EQ(level_set(f, M, 1e-9).count(), std::count_if(M.begin(), M.end(), [](double v) { return v > 0; }));

    const LevelSet U = box_set(f, 2, 4, 2, 3); // [0.25, 0.5] x [0.25, 0.375]
    EXPECT_TRUE(U.contains(Vec2(0.375, 0.3)));  // shared edge of two flagged cubes
    EXPECT_FALSE(U.contains(Vec2(0.25, 0.3)));  // boundary
    EXPECT_FALSE(U.contains(Vec2(0.3, 0.375))); // boundary
    EXPECT_NEAR(U.measure(), 2.0 / 64.0, 1e-15);
}

TEST(Whitney, OpenSquareBruteForce)
{
    const DyadicFrame f = unit_frame(4);
    const LevelSet U = box_set(f, 2, 14, 2, 14); // open square (1/8, 7/8)^2
    const WhitneyCover W = whitney_decompose(U, 4);
    ASSERT_FALSE(W.empty());
    EXPECT_TRUE(W.checks.all());

    // distances to the boundary of the square from the geometry alone
    const double a = 0.125, b = 0.875;
    double area = 0;
    for (int k = 0; k < W.size(); ++k) {
        const Vec2 lo = W.lo(k);
        const double l = W.side(k);
        const double d = std::min({lo[0] - a, lo[1] - a, b - lo[0] - l, b - lo[1] - l});
        EXPECT_GE(d, 8 * std::sqrt(2.0) * l - 1e-12);
        EXPECT_LE(d, 32 * std::sqrt(2.0) * l + 1e-12);
        area += l * l;
    }
    EXPECT_NEAR(area + W.checks.uncovered_measure, U.measure(), 1e-12);

    // neighbor lists against all touching pairs
    for (int k = 0; k < W.size(); ++k) {
        std::vector<int> nb;
        for (int o = 0; o < W.size(); ++o) {
            if (o == k)
                continue;
            const Vec2 p = W.lo(k), q = W.lo(o);
            const double lk = W.side(k), lo_ = W.side(o);
            const bool touch = p[0] <= q[0] + lo_ + 1e-14 && q[0] <= p[0] + lk + 1e-14 && p[1] <= q[1] + lo_ + 1e-14
                && q[1] <= p[1] + lk + 1e-14;
            if (touch)
                nb.push_back(o);
        }
        EXPECT_EQ(nb, W.neighbors[k]) << "cube " << k;
    }
}

TEST(Whitney, IrregularSetProperties)
{
    const DyadicFrame f = unit_frame(5);
    LevelSet U{f, 1.0, std::vector<char>(32 * 32, 0)};
    for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i) {
            const double x = (i + 0.5) / 32 - 0.5, y = (j + 0.5) / 32 - 0.5;
            const double r = std::hypot(x, y), th = std::atan2(y, x);
            U.flag[std::size_t(j) * 32 + i] = r < 0.3 + 0.1 * std::sin(3 * th) || (std::abs(x - 0.3) < 0.1 && std::abs(y + 0.3) < 0.12);
        }
    const WhitneyCover W = whitney_decompose(U, 5);
    EXPECT_TRUE(W.checks.disjoint);
    EXPECT_TRUE(W.checks.contained);
    EXPECT_TRUE(W.checks.covering);
    EXPECT_TRUE(W.checks.w2);
    EXPECT_TRUE(W.checks.w3);
    EXPECT_TRUE(W.checks.w4);
    EXPECT_TRUE(W.checks.theta);
    EXPECT_LE(W.checks.max_neighbors, 32);
    EXPECT_GE(W.checks.min_ratio, 0.5);
    EXPECT_LE(W.checks.max_ratio, 2.0);
    EXPECT_GE(W.checks.min_distance, 8.0);
    EXPECT_LE(W.checks.max_distance, 32.0);
    // the layer the finite depth leaves out is thinner than half a lattice cube
    EXPECT_LT(W.checks.uncovered_measure, 0.25 * U.measure());
}

TEST(Whitney, EmptySet)
{
    const DyadicFrame f = unit_frame(3);
    const WhitneyCover W = whitney_decompose(LevelSet{f, 1.0, std::vector<char>(64, 0)});
    EXPECT_TRUE(W.empty());
    EXPECT_TRUE(W.candidates(Vec2(0.5, 0.5)).empty());
}

TEST(Whitney, PartitionOfUnity)
{
    const DyadicFrame f = unit_frame(4);
    const LevelSet U = box_set(f, 1, 15, 3, 12);
    const WhitneyCover W = whitney_decompose(U, 4);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0, grad_const = 0;
    int covered = 0;
    for (int s = 0; s < 4000; ++s) {
        const Vec2 x(u(rng), u(rng));
        if (!U.contains(x))
            continue;
        double sum = 0;
        Vec2 dsum = Vec2::Zero();
        std::vector<std::pair<int, std::pair<double, Vec2>>> act;
        for (int k : W.candidates(x)) {
            Vec2 g;
            const double b = W.bump(k, x, &g);
            if (b > 0) {
                // support inside Q* = sqrt(9/8) Q
                const Vec2 c = W.center(k);
                EXPECT_LT((x - c).cwiseAbs().maxCoeff(), 0.5 * std::sqrt(9.0 / 8.0) * W.side(k));
                act.push_back({k, {b, g}});
                sum += b;
                dsum += g;
            }
        }
        // full scan agrees with the candidate list
        double full = 0;
        for (int k = 0; k < W.size(); ++k)
            full += W.bump(k, x);
        EXPECT_NEAR(full, sum, 1e-14 * std::max(1.0, full));
        if (sum == 0)
            continue;
        ++covered;
        double total = 0;
        for (const auto& [k, bg] : act) {
            total += bg.first / sum;
            grad_const = std::max(grad_const, (bg.second / sum - bg.first * dsum / (sum * sum)).norm() * W.side(k));
        }
        worst = std::max(worst, std::abs(total - 1.0));
    }
    EXPECT_GT(covered, 100);
    EXPECT_LT(worst, 1e-14);
    EXPECT_GT(grad_const, 0.0);
    EXPECT_LT(grad_const, 1e3);
}

namespace {

struct RoughSetup {
    Triangulation<2> mesh = build_unit_square(8);
    SpacePair sp{std::make_shared<const Triangulation<2>>(mesh), PairKind::p2_p0};
    VectorXd V;
    RoughSetup()
    {
        const Rough r;
        V = interpolate(sp, analytic_field([r](const Vec2& x) {
            const double p = r.phi(x[0], x[1]);
            return Vec2(p, -0.5 * p);
        }));
    }
};

} // namespace

TEST(Truncation, SweepOverLevels)
{
    RoughSetup s;
    const MeshField v = mesh_field(s.sp, s.V);
    const LatticeMaximal lm = lattice_maximal(v);
    const double mmax = *std::max_element(lm.M.value.begin(), lm.M.value.end());
    ASSERT_GT(mmax, 16.0);
    double c_grad = 0, c_weak = 0;
    for (double lambda : {2.0, 4.0, 8.0, 16.0}) {
        const Truncation tr = lipschitz_truncate(v, lm, lambda);
        const TruncationReport& r = tr.report;
        EXPECT_GT(r.u_measure, 0.0) << lambda;
        EXPECT_TRUE(r.whitney.all()) << lambda;
        EXPECT_LE(r.equality_defect, 1e-12) << lambda;
        EXPECT_LE(r.grad_outside_defect, 1e-12) << lambda;
        EXPECT_LE(r.outside_value, 1e-12) << lambda;
        EXPECT_LT(r.partition_defect, 1e-13) << lambda;
        EXPECT_GT(r.grad_sup_u, 0.0) << lambda;
        EXPECT_LE(r.grad_sup_u, r.gradient_bound() * (1 + 1e-12)) << lambda;
        EXPECT_LE(r.max_overlap, 33) << lambda;
        c_grad = std::max(c_grad, r.grad_sup_u);
        c_weak = std::max(c_weak, r.weak_type);
        for (int k = 0; k < 3; ++k) {
            EXPECT_TRUE(std::isfinite(r.value_ratio[k]));
            EXPECT_TRUE(std::isfinite(r.grad_ratio[k]));
        }
    }
    EXPECT_TRUE(std::isfinite(c_grad));
    EXPECT_LT(c_weak, 9.0); // Vitali covering constant 3^d
}

TEST(Truncation, AboveMaximumIsIdentity)
{
    RoughSetup s;
    const MeshField v = mesh_field(s.sp, s.V);
    const LatticeMaximal lm = lattice_maximal(v);
    const double mmax = *std::max_element(lm.M.value.begin(), lm.M.value.end());
    const Truncation tr = lipschitz_truncate(v, lm, 2 * mmax);
    EXPECT_EQ(tr.report.u_measure, 0.0);
    EXPECT_EQ(tr.report.equality_defect, 0.0);
    EXPECT_EQ(tr.report.value_ratio[1], 1.0);

    const VelocityProjector proj(s.sp);
    const DiscreteTruncation d = discrete_truncate(s.sp, proj, s.V, lm, 2 * mmax);
    EXPECT_TRUE(d.report.trivial);
    EXPECT_EQ((d.V - s.V).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Truncation, DiscreteLocality)
{
    RoughSetup s;
    const MeshField v = mesh_field(s.sp, s.V);
    const LatticeMaximal lm = lattice_maximal(v);
    const VelocityProjector proj(s.sp);
    const double mmax = *std::max_element(lm.M.value.begin(), lm.M.value.end());
    const DiscreteTruncation d = discrete_truncate(s.sp, proj, s.V, lm, 0.5 * mmax);
    const auto& r = d.report;
    EXPECT_FALSE(r.trivial);
    EXPECT_GT(r.region_cells, 0);
    EXPECT_LT(r.region_cells, s.mesh.num_cells());
    EXPECT_EQ(r.inclusion_violations, 0);
    EXPECT_LE(r.max_change_outside, 1e-12);
    EXPECT_GT(r.kappa, 0.0);
    EXPECT_TRUE(std::isfinite(r.h1_ratio));
    // divergence moments of the truncated field stay those of v_lambda
    EXPECT_GT((d.V - s.V).cwiseAbs().maxCoeff(), 0.0);
}

TEST(LevelSelection, CandidateBrackets)
{
    LevelInput in{std::vector<double>(100, 0.0), 0.01, 1.0};
    for (int k = 0; k < 100; ++k)
        in.M[k] = std::ldexp(1.0, k % 40);
    const LevelTable tab = select_levels({in}, 2.0, 4, 1.0);
    ASSERT_EQ(tab.rows.size(), 4u);
    EXPECT_TRUE(tab.bracket_ok);
    const int lo[] = {4, 16, 256, 65536};
    for (int j = 1; j <= 4; ++j) {
        EXPECT_GE(tab.rows[j - 1].lambda, lo[j - 1]);
        EXPECT_LE(tab.rows[j - 1].lambda, std::ldexp(1.0, (1 << (j + 1)) - 1));
    }
    EXPECT_THROW(select_levels({in}, 1.0, 2), InvalidArgument);
}

TEST(LevelSelection, SmallFieldGivesZeroRatio)
{
    LevelInput in{std::vector<double>(50, 4.0), 0.02, 3.0};
    const LevelTable tab = select_levels({in}, 2.0, 1, 1.0);
    ASSERT_EQ(tab.rows.size(), 1u);
    EXPECT_EQ(tab.rows[0].measure, 0.0);
    EXPECT_EQ(tab.rows[0].lambda, 4.0); // tie between 4 and 8 goes to the smaller
    EXPECT_EQ(tab.rows[0].ratio, 0.0);
}

TEST(LevelSelection, PicksMinimizer)
{
    // M = 20 on 10 of 80 unit cells, 5 elsewhere
    LevelInput in{std::vector<double>(80, 5.0), 1.0, 1.0};
    for (int k = 0; k < 10; ++k)
        in.M[k] = 20.0;
    const LevelTable tab = select_levels({in}, 2.0, 1, 1.0);
    // lambda = 4: 16 * 80; lambda = 8: 64 * 10
    EXPECT_EQ(tab.rows[0].lambda, 8.0);
    EXPECT_DOUBLE_EQ(tab.rows[0].ratio, 8.0 * std::sqrt(10.0) * std::sqrt(2.0));
}
