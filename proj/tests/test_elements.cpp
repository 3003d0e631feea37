#include "imflow/elements/projectors.hpp"
#include "imflow/mesh/generators.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace imflow;

namespace {

const std::vector<PairKind> kPairs = {PairKind::mini, PairKind::p2_p0, PairKind::cr_conforming,
    PairKind::taylor_hood, PairKind::guzman_neilan};

std::shared_ptr<const Triangulation<2>> square(int n)
{
    return std::make_shared<const Triangulation<2>>(build_unit_square(n));
}

// Smooth field vanishing on the boundary of the unit square, with a
// non-trivial divergence. Parameters vary the shape.
VectorFieldFn trial_field(int k)
{
    const double a = 1 + 0.3 * k, b = 0.5 + 0.2 * (k % 5), ph = 0.7 * k;
    auto u = [=](const Vec2& x) {
        const double s = std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
        return Vec2(s * std::cos(a * x[0] + ph) * (1 + x[1]), s * std::sin(b * x[1] - ph) * (2 - x[0]));
    };
    return [u](int, const Vec2& x, Vec2* v, Mat2* g) {
        if (v)
            *v = u(x);
        if (g) {
            const double h = 1e-6;
            for (int j = 0; j < 2; ++j) {
                Vec2 e = Vec2::Zero();
                e[j] = h;
                g->col(j) = (u(x + e) - u(x - e)) / (2 * h);
            }
        }
    };
}

VectorXd random_coefficients(int n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    VectorXd v(n);
    for (int i = 0; i < n; ++i)
        v[i] = u(rng);
    return v;
}

} // namespace

TEST(SpacePair, DimensionsOnSquare)
{
    for (int n : {2, 3, 6}) {
        auto m = square(n);
        const int nn = (n - 1) * (n - 1);
        const int ne = 3 * n * n - 2 * n; // interior edges
        EXPECT_EQ(SpacePair(m, PairKind::mini).velocity_dim(), 2 * (nn + 2 * n * n));
        EXPECT_EQ(SpacePair(m, PairKind::mini).pressure_dim(), (n + 1) * (n + 1));
        EXPECT_EQ(SpacePair(m, PairKind::p2_p0).velocity_dim(), 2 * (nn + ne));
        EXPECT_EQ(SpacePair(m, PairKind::p2_p0).pressure_dim(), 2 * n * n);
        EXPECT_EQ(SpacePair(m, PairKind::cr_conforming).velocity_dim(), 2 * (nn + ne + 2 * n * n));
        EXPECT_EQ(SpacePair(m, PairKind::cr_conforming).pressure_dim(), 6 * n * n);
        EXPECT_EQ(SpacePair(m, PairKind::taylor_hood).velocity_dim(), 2 * (nn + ne));
        EXPECT_EQ(SpacePair(m, PairKind::taylor_hood).pressure_dim(), (n + 1) * (n + 1));
        EXPECT_EQ(SpacePair(m, PairKind::guzman_neilan).velocity_dim(), 2 * (nn + ne));
        EXPECT_EQ(SpacePair(m, PairKind::guzman_neilan).pressure_dim(), 2 * n * n);
    }
}

TEST(SpacePair, RationalBubbleValues)
{
    const std::array<double, 3> c{1.0 / 3, 1.0 / 3, 1.0 / 3};
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(rational_bubble(i, c).v, 1.0 / 108, 1e-16);
        std::array<double, 3> z{};
        z[(i + 1) % 3] = 1;
        EXPECT_EQ(rational_bubble(i, z).v, 0.0);
        // vanishes to second order on the edges not opposite z_i
        std::array<double, 3> e{};
        e[i] = 0.4;
        e[(i + 1) % 3] = 0.6;
        EXPECT_EQ(rational_bubble(i, e).v, 0.0);
    }
}

TEST(SpacePair, JetMatchesFiniteDifferences)
{
    std::array<double, 3> l{0.2, 0.5, 0.3};
    const Jet j = rational_bubble(1, l);
    const double h = 1e-5;
    for (int a = 0; a < 3; ++a) {
        auto lp = l, lm = l;
        lp[a] += h;
        lm[a] -= h;
        const Jet p = rational_bubble(1, lp), m = rational_bubble(1, lm);
        EXPECT_NEAR(j.g[a], (p.v - m.v) / (2 * h), 1e-9);
        for (int b = 0; b < 3; ++b)
            EXPECT_NEAR(j.H[a][b], (p.g[b] - m.g[b]) / (2 * h), 1e-8);
    }
}

TEST(SpacePair, ReferenceEvaluationRejectsOutsidePoints)
{
    SpacePair sp(square(2), PairKind::mini);
    VelocityBasis v;
    PressureBasis p;
    EXPECT_THROW(sp.eval_reference(0, Vec2(0.8, 0.5), v, p), InvalidArgument);
    EXPECT_NO_THROW(sp.eval_reference(0, Vec2(0.5, 0.5), v, p));
}

TEST(SpacePair, LagrangeBasisIsNodal)
{
    auto m = square(2);
    for (PairKind k : {PairKind::p2_p0, PairKind::taylor_hood}) {
        SpacePair sp(m, k);
        VelocityBasis b;
        const double nodes[6][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, .5, .5}, {.5, 0, .5}, {.5, .5, 0}};
        for (int a = 0; a < 6; ++a) {
            sp.eval_velocity(3, nodes[a], b);
            for (int f = 0; f < 12; ++f)
                EXPECT_NEAR(b.value[f][f % 2], (f / 2 == a) ? 1.0 : 0.0, 1e-15);
        }
    }
}

TEST(GuzmanNeilan, DegreesOfFreedomAreDual)
{
    SpacePair sp(square(3), PairKind::guzman_neilan);
    const auto& t = sp.mesh();
    const GaussRule& g = gauss_cached(7);
    VelocityBasis b;
    for (int c : {0, 5, 11}) {
        for (int a = 0; a < 3; ++a) {
            double l[3] = {0, 0, 0};
            l[a] = 1;
            sp.eval_velocity(c, l, b);
            for (int f = 0; f < 12; ++f)
                for (int comp = 0; comp < 2; ++comp)
                    EXPECT_NEAR(b.value[f][comp], f == 2 * a + comp ? 1.0 : 0.0, 1e-12);
        }
        for (int k = 0; k < 3; ++k) {
            std::array<Vec2, 12> mean{};
            for (auto& m : mean)
                m.setZero();
            for (std::size_t q = 0; q < g.x.size(); ++q) {
                double l[3] = {0, 0, 0};
                l[(k + 1) % 3] = 1 - g.x[q];
                l[(k + 2) % 3] = g.x[q];
                sp.eval_velocity(c, l, b);
                for (int f = 0; f < 12; ++f)
                    mean[f] += g.w[q] * b.value[f];
            }
            for (int f = 0; f < 12; ++f)
                for (int comp = 0; comp < 2; ++comp)
                    EXPECT_NEAR(mean[f][comp], f == 6 + 2 * k + comp ? 1.0 : 0.0, 1e-12);
        }
        (void)t;
    }
}

TEST(GuzmanNeilan, CurlFunctionsAreDivergenceFree)
{
    SpacePair sp(square(3), PairKind::guzman_neilan);
    const auto r = sp.default_rule();
    std::array<Vec2, 12> val;
    std::array<Mat2, 12> grad;
    for (int c = 0; c < sp.mesh().num_cells(); ++c)
        for (std::size_t q = 0; q < r.size(); ++q) {
            sp.eval_gn_raw(c, r.bary[q].data(), val, grad);
            for (int k = 6; k < 12; ++k)
                EXPECT_EQ(grad[k].trace(), 0.0);
        }
}

TEST(GuzmanNeilan, TracesContinuousAcrossEdges)
{
    auto m = square(3);
    SpacePair sp(m, PairKind::guzman_neilan);
    const VectorXd U = random_coefficients(sp.velocity_dim(), 9);
    const auto& t = *m;
    for (int f = 0; f < t.num_facets(); ++f) {
        const auto fc = t.facet_cells(f);
        if (fc[1] < 0)
            continue;
        const Vec2 A = t.vertex(t.facet(f)[0]), B = t.vertex(t.facet(f)[1]);
        for (double s : {0.1, 0.37, 0.8}) {
            const Vec2 x = A + s * (B - A);
            Vec2 v0, v1;
            fe_velocity(sp, U, fc[0], t.barycentric(fc[0], x).data(), &v0, nullptr);
            fe_velocity(sp, U, fc[1], t.barycentric(fc[1], x).data(), &v1, nullptr);
            EXPECT_NEAR((v0 - v1).norm(), 0.0, 1e-11);
        }
    }
}

TEST(Projector, ReproducesDiscreteFunctions)
{
    auto m = square(4);
    for (PairKind k : kPairs) {
        SpacePair sp(m, k);
        VelocityProjector P(sp);
        const VectorXd U = random_coefficients(sp.velocity_dim(), 3);
        const VectorXd V = P.apply(fe_field(sp, U));
        EXPECT_LT((V - U).lpNorm<Eigen::Infinity>(), 1e-12) << sp.name();
    }
}

TEST(Projector, PreservesDivergenceMoments)
{
    auto m = square(5);
    for (PairKind k : kPairs) {
        SpacePair sp(m, k);
        VelocityProjector P(sp);
        for (int f = 0; f < 4; ++f) {
            const auto v = trial_field(f);
            const VectorXd U = P.apply(v);
            const VectorXd a = divergence_moments(sp, v);
            const VectorXd b = divergence_moments(sp, fe_field(sp, U));
            EXPECT_LT((a - b).lpNorm<Eigen::Infinity>(), 1e-12 * std::max(1.0, a.lpNorm<Eigen::Infinity>()))
                << sp.name() << " field " << f;
        }
    }
}

TEST(Projector, ApproximatesSmoothFields)
{
    for (PairKind k : kPairs) {
        double prev = kInf;
        for (int n : {4, 8, 16}) {
            SpacePair sp(square(n), k);
            VelocityProjector P(sp);
            const auto v = trial_field(2);
            const VectorXd U = P.apply(v);
            double err = 0;
            const auto r = sp.default_rule();
            for (int c = 0; c < sp.mesh().num_cells(); ++c)
                for (std::size_t q = 0; q < r.size(); ++q) {
                    Vec2 a, b;
                    v(c, sp.mesh().map(c, r.bary[q]), &a, nullptr);
                    fe_velocity(sp, U, c, r.bary[q].data(), &b, nullptr);
                    err += r.w[q] * sp.mesh().measure(c) * (a - b).squaredNorm();
                }
            err = std::sqrt(err);
            EXPECT_LT(err, 0.3 * prev) << sp.name() << " n=" << n;
            prev = err;
        }
    }
}

TEST(PressureProjector, ReproducesDiscretePressures)
{
    auto m = square(4);
    for (PairKind k : kPairs) {
        SpacePair sp(m, k);
        PressureProjector P(sp);
        const VectorXd Q = random_coefficients(sp.pressure_dim(), 5);
        const VectorXd R = P.apply(fe_pressure_field(sp, Q));
        EXPECT_LT((R - Q).lpNorm<Eigen::Infinity>(), 1e-12) << sp.name();
    }
}

TEST(Interpolation, ExactForDiscreteFunctions)
{
    auto m = square(3);
    for (PairKind k : kPairs) {
        SpacePair sp(m, k);
        const VectorXd U = random_coefficients(sp.velocity_dim(), 8);
        const VectorXd V = interpolate(sp, fe_field(sp, U));
        EXPECT_LT((V - U).lpNorm<Eigen::Infinity>(), 1e-12) << sp.name();
    }
}
