#include "imflow/harness/manufactured.hpp"
#include "imflow/mesh/generators.hpp"
#include "imflow/system/infsup.hpp"
#include "imflow/system/solver.hpp"

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

VectorXd random_vector(int n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1, 1);
    VectorXd v(n);
    for (int i = 0; i < n; ++i)
        v[i] = u(rng);
    return v;
}

// Integrates fn over the mesh by splitting every cell into 16 congruent
// pieces with a degree-14 rule on each, evaluating fields by point location.
template <class Fn> double fine_integral(const Triangulation<2>& t, Fn&& fn)
{
    const TriangleRule r = collapsed_rule(14);
    double s = 0;
    const int k = 4;
    for (int c = 0; c < t.num_cells(); ++c) {
        const Vec2 a = t.vertex(t.cell(c)[0]), b = t.vertex(t.cell(c)[1]), d = t.vertex(t.cell(c)[2]);
        auto at = [&](double i, double j) { return a + (i / k) * (b - a) + (j / k) * (d - a); };
        for (int i = 0; i < k; ++i)
            for (int j = 0; i + j < k; ++j)
                for (int up = 0; up < 2; ++up) {
                    if (up && i + j + 1 >= k)
                        continue;
                    const Vec2 p0 = up ? at(i + 1, j + 1) : at(i, j), p1 = up ? at(i, j + 1) : at(i + 1, j),
                               p2 = up ? at(i + 1, j) : at(i, j + 1);
                    const double area = 0.5 * std::abs((p1 - p0)[0] * (p2 - p0)[1] - (p1 - p0)[1] * (p2 - p0)[0]);
                    for (std::size_t q = 0; q < r.size(); ++q) {
                        const auto& l = r.bary[q];
                        s += r.w[q] * area * fn(c, Vec2(l[0] * p0 + l[1] * p1 + l[2] * p2));
                    }
                }
    }
    return s;
}

// A discretely divergence-free field: W minus its minimum-norm correction.
VectorXd kernel_field(const Assembler& as, std::mt19937_64& rng)
{
    const VectorXd W = random_vector(as.pair().velocity_dim(), rng);
    const BogovskiiResult b = discrete_bogovskii(as, as.divergence() * W);
    return W - b.W;
}

double h1_norm(const SpacePair& sp, const VectorXd& U)
{
    const VelocityNorms n = velocity_norms(sp, U, 2.0);
    return std::sqrt(n.value * n.value + n.grad * n.grad);
}

} // namespace

TEST(Trilinear, SkewFormVanishesOnTheDiagonal)
{
    std::mt19937_64 rng(1);
    auto m = square(3);
    for (PairKind k : kPairs) {
        SpacePair sp(m, k);
        for (int i = 0; i < 10; ++i) {
            const VectorXd v = random_vector(sp.velocity_dim(), rng);
            const double n = h1_norm(sp, v);
            EXPECT_LE(std::abs(trilinear_skew(sp, v, v, v)), 1e-12 * n * n * n) << sp.name();
        }
    }
}

TEST(Trilinear, SkewFormIsAntisymmetric)
{
    std::mt19937_64 rng(2);
    auto m = square(2);
    for (PairKind k : kPairs) {
        SpacePair sp(m, k);
        const VectorXd v = random_vector(sp.velocity_dim(), rng), w = random_vector(sp.velocity_dim(), rng),
                       h = random_vector(sp.velocity_dim(), rng);
        const double a = trilinear_skew(sp, v, w, h), b = trilinear_skew(sp, v, h, w);
        EXPECT_NEAR(a, -b, 1e-13 * (1 + std::abs(a))) << sp.name();
    }
}

TEST(Trilinear, MatchesSubdividedQuadratureOracle)
{
    std::mt19937_64 rng(3);
    auto m = square(1);
    for (PairKind k : {PairKind::mini, PairKind::p2_p0, PairKind::cr_conforming}) {
        SpacePair sp(m, k);
        const VectorXd v = random_vector(sp.velocity_dim(), rng), w = random_vector(sp.velocity_dim(), rng),
                       h = random_vector(sp.velocity_dim(), rng);
        auto ev = [&](const VectorXd& U, int c, const Vec2& x, Vec2& val, Mat2& g) {
            fe_velocity(sp, U, c, sp.mesh().barycentric(c, x).data(), &val, &g);
        };
        const double skew = fine_integral(sp.mesh(), [&](int c, const Vec2& x) {
            Vec2 a, b, d;
            Mat2 ga, gb, gd;
            ev(v, c, x, a, ga);
            ev(w, c, x, b, gb);
            ev(h, c, x, d, gd);
            return 0.5 * (d.dot(gb * a) - b.dot(gd * a));
        });
        const double gap = fine_integral(sp.mesh(), [&](int c, const Vec2& x) {
            Vec2 a, b, d;
            Mat2 ga, gb, gd;
            ev(v, c, x, a, ga);
            ev(w, c, x, b, gb);
            ev(h, c, x, d, gd);
            return 0.5 * ga.trace() * b.dot(d);
        });
        EXPECT_NEAR(trilinear_skew(sp, v, w, h), skew, 1e-12 * (1 + std::abs(skew))) << sp.name();
        testing::internal::CaptureStderr();
        const double divfree = trilinear_divfree(sp, v, w, h);
        EXPECT_NE(testing::internal::GetCapturedStderr().find("warning"), std::string::npos);
        EXPECT_NEAR(divfree - trilinear_skew(sp, v, w, h), gap, 1e-12 * (1 + std::abs(gap))) << sp.name();
    }
}

TEST(Trilinear, FormGapIsHalfDivergenceTerm)
{
    std::mt19937_64 rng(4);
    auto m = square(3);
    for (PairKind k : kPairs) {
        SpacePair sp(m, k);
        const VectorXd v = random_vector(sp.velocity_dim(), rng), w = random_vector(sp.velocity_dim(), rng),
                       h = random_vector(sp.velocity_dim(), rng);
        testing::internal::CaptureStderr();
        const double d = trilinear_divfree(sp, v, w, h) - trilinear_skew(sp, v, w, h);
        testing::internal::GetCapturedStderr();
        const double g = convection_gap(sp, v, w, h);
        EXPECT_NEAR(d, g, 1e-12 * (1 + std::abs(g))) << sp.name();
    }
}

TEST(GuzmanNeilan, DiscretelyDivergenceFreeIsExactlyDivergenceFree)
{
    std::mt19937_64 rng(5);
    SpacePair sp(square(4), PairKind::guzman_neilan);
    Assembler as(sp);
    for (int i = 0; i < 3; ++i) {
        const VectorXd V = kernel_field(as, rng);
        double maxdiv = 0, grad2 = 0;
        const auto r = sp.default_rule();
        for (int c = 0; c < sp.mesh().num_cells(); ++c)
            for (std::size_t q = 0; q < r.size(); ++q) {
                Mat2 g;
                fe_velocity(sp, V, c, r.bary[q].data(), nullptr, &g);
                maxdiv = std::max(maxdiv, std::abs(g.trace()));
                grad2 += r.w[q] * sp.mesh().measure(c) * g.squaredNorm();
            }
        EXPECT_LE(maxdiv, 1e-11 * std::sqrt(grad2));
        const double n = h1_norm(sp, V);
        EXPECT_LE(std::abs(trilinear_divfree(sp, V, V, V)), 1e-11 * n * n * n);
        EXPECT_NEAR(trilinear_divfree(sp, V, V, V), trilinear_skew(sp, V, V, V), 1e-11 * n * n * n);
    }
}

TEST(Assembly, DivergenceAgainstConstantsVanishes)
{
    for (PairKind k : kPairs) {
        SpacePair sp(square(3), k);
        Assembler as(sp);
        const VectorXd ones = VectorXd::Ones(sp.pressure_dim());
        const VectorXd r = as.divergence().transpose() * ones;
        EXPECT_LT(r.lpNorm<Eigen::Infinity>(), 1e-13) << sp.name();
        EXPECT_NEAR(as.pressure_means().sum(), 1.0, 1e-13);
    }
}

TEST(Assembly, DivergenceMatrixMatchesMoments)
{
    std::mt19937_64 rng(6);
    for (PairKind k : kPairs) {
        SpacePair sp(square(3), k);
        Assembler as(sp);
        const VectorXd U = random_vector(sp.velocity_dim(), rng);
        const VectorXd a = as.divergence() * U, b = divergence_moments(sp, fe_field(sp, U));
        EXPECT_LT((a - b).lpNorm<Eigen::Infinity>(), 1e-12) << sp.name();
    }
}

TEST(Assembly, ZeroStateGivesZeroResidual)
{
    SpacePair sp(square(3), PairKind::mini);
    Assembler as(sp);
    NonlinearSolver s(as, SolverOptions{});
    const StressModel law(GraphLaw(LawKind::power_law, {1.0, 3.0, 0.0, 1.0}), 0);
    const VectorXd r = s.residual(law, VectorXd::Zero(sp.velocity_dim()), VectorXd::Zero(sp.velocity_dim()),
        VectorXd::Zero(sp.pressure_dim()), 0.0);
    EXPECT_EQ(r.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Assembly, KernelTestFunctionsSeeNoPressure)
{
    std::mt19937_64 rng(7);
    for (PairKind k : {PairKind::mini, PairKind::p2_p0, PairKind::guzman_neilan}) {
        SpacePair sp(square(3), k);
        Assembler as(sp);
        const VectorXd V = kernel_field(as, rng);
        const VectorXd P = random_vector(sp.pressure_dim(), rng);
        const double p = V.dot(as.divergence().transpose() * P);
        EXPECT_LT(std::abs(p), 1e-10 * V.norm() * P.norm()) << sp.name();
    }
}

TEST(Assembly, JacobianMatchesFiniteDifferences)
{
    std::mt19937_64 rng(8);
    SpacePair sp(square(2), PairKind::p2_p0);
    Assembler as(sp);
    const StressModel law(GraphLaw(LawKind::power_law, {1.0, 3.0, 0.0, 1.0}), 0);
    const VectorXd U = random_vector(sp.velocity_dim(), rng), d = random_vector(sp.velocity_dim(), rng);
    SparseMatrix J;
    as.nonlinear(law, ConvectionForm::none, U, &J);
    const double h = 1e-6;
    const VectorXd fd = (as.nonlinear(law, ConvectionForm::none, U + h * d, nullptr) -
                            as.nonlinear(law, ConvectionForm::none, U - h * d, nullptr)) /
        (2 * h);
    EXPECT_LT((J * d - fd).norm(), 1e-6 * fd.norm());
    // Picard matrix reproduces the operator, convection included.
    SparseMatrix A;
    const VectorXd N = as.nonlinear(law, ConvectionForm::skew, U, &A, Linearization::picard);
    EXPECT_LT((A * U - N).norm(), 1e-12 * N.norm());
}

TEST(Assembly, ThreadCountDoesNotChangeTheResult)
{
    std::mt19937_64 rng(9);
    SpacePair sp(square(4), PairKind::cr_conforming);
    const StressModel law(GraphLaw(LawKind::power_law, {1.0, 1.5, 0.0, 1.0}), 0);
    const VectorXd U = random_vector(sp.velocity_dim(), rng);
    SparseMatrix J1, J3;
    const VectorXd a = Assembler(sp, 0, 1).nonlinear(law, ConvectionForm::skew, U, &J1);
    const VectorXd b = Assembler(sp, 0, 3).nonlinear(law, ConvectionForm::skew, U, &J3);
    EXPECT_EQ((a - b).lpNorm<Eigen::Infinity>(), 0.0);
    EXPECT_EQ(SparseMatrix(J1 - J3).norm(), 0.0);
}

TEST(Solve, ZeroForceGivesZeroSolution)
{
    SpacePair sp(square(3), PairKind::mini);
    Assembler as(sp);
    const GraphLaw law(LawKind::power_law, {1.0, 3.0, 0.0, 1.0});
    const DiscreteSolution s = NonlinearSolver(as, SolverOptions{}).solve(law, Load{});
    EXPECT_TRUE(s.converged);
    EXPECT_EQ(s.U.lpNorm<Eigen::Infinity>(), 0.0);
    EXPECT_EQ(s.P.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Solve, NewtonianManufacturedErrorsDecrease)
{
    const Manufactured mf{1.0};
    const GraphLaw law(LawKind::newtonian, {0.5, 2.0, 0.0, 1.0});
    for (PairKind k : {PairKind::mini, PairKind::guzman_neilan}) {
        double prev = kInf;
        for (int n : {4, 8, 16}) {
            SpacePair sp(square(n), k);
            Assembler as(sp);
            SolverOptions o;
            o.convection = sp.divergence_free() ? ConvectionForm::divfree : ConvectionForm::skew;
            const DiscreteSolution s = NonlinearSolver(as, o).solve(law, mf.load(law, true));
            ASSERT_TRUE(s.converged) << s.message;
            EXPECT_NEAR(as.pressure_means().dot(s.P), 0.0, 1e-12 * std::max(1.0, s.P.norm()));
            EXPECT_LT(s.constraint_max, 1e-10);
            const ErrorNorms e = error_norms(sp, s.U, s.P, mf.exact(), 2.0, 2.0);
            EXPECT_LT(e.u_full(), prev) << sp.name() << " n=" << n;
            if (n > 4) {
                EXPECT_GT(std::log2(prev / e.u_full()), 0.8) << sp.name() << " n=" << n;
            }
            prev = e.u_full();
        }
    }
}

TEST(Solve, EnergyIdentityAtTheSolution)
{
    const Manufactured mf{2.0};
    for (const GraphLaw& law : {GraphLaw(LawKind::power_law, {1.0, 3.0, 0.0, 1.0}),
             GraphLaw(LawKind::power_law, {1.0, 1.5, 0.0, 1.0})}) {
        SpacePair sp(square(6), PairKind::mini);
        Assembler as(sp);
        const Load f = mf.load(law, true);
        const DiscreteSolution s = NonlinearSolver(as, SolverOptions{}).solve(law, f);
        ASSERT_TRUE(s.converged) << s.message;
        const double lhs = stress_power(sp, StressModel(law, 0), s.U);
        const double rhs = as.load(f).dot(s.U);
        EXPECT_NEAR(lhs, rhs, 1e-8 * std::abs(rhs));
    }
}

TEST(Solve, BinghamContinuationConverges)
{
    const Manufactured mf{1.0};
    const GraphLaw law(LawKind::bingham, {0.5, 2.0, 0.2, 1.0});
    SpacePair sp(square(4), PairKind::p2_p0);
    Assembler as(sp);
    const DiscreteSolution s = NonlinearSolver(as, SolverOptions{}).solve(law, mf.load(law, false));
    ASSERT_TRUE(s.converged) << s.message;
    EXPECT_EQ(s.stages, (std::vector<int>{4, 8, 16, 32, 64}));
    EXPECT_EQ(s.n, 64);
}

TEST(Solve, MultivaluedLawNeedsMollification)
{
    const GraphLaw law(LawKind::bingham, {1.0, 2.0, 0.5, 1.0});
    EXPECT_THROW(StressModel(law, 0), InvalidArgument);
}

TEST(InfSup, MatchesDenseEigenvalues)
{
    for (PairKind k : {PairKind::mini, PairKind::p2_p0, PairKind::cr_conforming, PairKind::guzman_neilan}) {
        SpacePair sp(square(3), k);
        Assembler as(sp);
        const InfSupResult r = inf_sup_constant(as);
        const Eigen::MatrixXd H = Eigen::MatrixXd(as.velocity_h1());
        const Eigen::MatrixXd B = Eigen::MatrixXd(as.divergence());
        const Eigen::MatrixXd S = B * H.ldlt().solve(B.transpose());
        const Eigen::MatrixXd M = Eigen::MatrixXd(PressureProjector::pressure_mass(sp));
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(S, M);
        // the constant pressure is the only zero mode
        EXPECT_LT(std::abs(es.eigenvalues()[0]), 1e-10) << sp.name();
        EXPECT_NEAR(r.beta, std::sqrt(es.eigenvalues()[1]), 1e-7) << sp.name();
        EXPECT_GT(r.beta, 0.0);
    }
}

TEST(Bogovskii, ZeroDatumGivesZero)
{
    SpacePair sp(square(3), PairKind::mini);
    Assembler as(sp);
    EXPECT_EQ(discrete_bogovskii(as, VectorXd::Zero(sp.pressure_dim())).W.norm(), 0.0);
}

TEST(Bogovskii, ReproducesDivergenceMoments)
{
    std::mt19937_64 rng(10);
    for (PairKind k : kPairs) {
        SpacePair sp(square(4), k);
        Assembler as(sp);
        const VectorXd V = random_vector(sp.velocity_dim(), rng);
        const VectorXd h = as.divergence() * V;
        const BogovskiiResult b = discrete_bogovskii(as, h);
        EXPECT_LT((as.divergence() * b.W - h).lpNorm<Eigen::Infinity>(), 1e-10 * h.lpNorm<Eigen::Infinity>());
        EXPECT_GT(b.stability, 0.0);
        // minimum norm: no larger than the field that produced the datum
        const SparseMatrix H = as.velocity_h1();
        EXPECT_LE(b.W.dot(H * b.W), V.dot(H * V) * (1 + 1e-12));
    }
}

TEST(Bogovskii, RejectsDataOutsideTheRange)
{
    SpacePair sp(square(3), PairKind::p2_p0);
    Assembler as(sp);
    const VectorXd h = as.pressure_means(); // <1, Q>, not a divergence
    EXPECT_THROW(discrete_bogovskii(as, h), Infeasible);
}

TEST(Bogovskii, StabilityBoundedUnderRefinement)
{
    const ScalarFieldFn H = [](int, const Vec2& x) { return std::cos(kPi * x[0]) * std::cos(2 * kPi * x[1]); };
    for (PairKind k : {PairKind::mini, PairKind::guzman_neilan}) {
        std::vector<double> s;
        for (int n : {4, 8, 16}) {
            SpacePair sp(square(n), k);
            Assembler as(sp);
            VectorXd h = pressure_moments(sp, H);
            s.push_back(discrete_bogovskii(as, h).stability);
        }
        for (std::size_t i = 1; i < s.size(); ++i)
            EXPECT_LT(std::abs(s[i] - s[i - 1]) / s[i - 1], 0.2) << to_string(k);
    }
}

TEST(Diagnostics, AnNonnegativeForInterpolant)
{
    const Manufactured mf{1.0};
    SpacePair sp(square(8), PairKind::p2_p0);
    const VectorXd U = interpolate(sp, analytic_field([&](const Vec2& x) { return mf.u(x); }));
    const StressModel law(GraphLaw(LawKind::newtonian, {1.0, 2.0, 0.0, 1.0}), 0);
    const AnReport r = an_diagnostic(sp, law, U, [&](const Vec2& x) { return mf.grad(x); });
    EXPECT_GE(r.min_value, -1e-10);
    EXPECT_LT(r.integral[0], 0.1);
}

TEST(Diagnostics, AnVanishesOnExactCoincidence)
{
    std::mt19937_64 rng(11);
    SpacePair sp(square(3), PairKind::mini);
    const VectorXd U = random_vector(sp.velocity_dim(), rng);
    const StressModel law(GraphLaw(LawKind::power_law, {1.0, 3.0, 0.0, 1.0}), 0);
    const AnReport r = an_diagnostic(sp, law, U, [&](const Vec2& x) {
        const Located l = sp.mesh().locate_or_throw(x);
        Mat2 gu;
        fe_velocity(sp, U, l.cell, l.bary.data(), nullptr, &gu);
        return gu;
    });
    // equal up to the roundoff of point location
    EXPECT_LE(r.max_value, 1e-20);
    EXPECT_GE(r.min_value, -1e-20);
}

namespace {

// E|z|^2 of the mollifier of radius 1/n on a three-dimensional space:
// int rho^4 k(rho) / int rho^2 k(rho), k = exp(-1 / (1 - (n rho)^2)).
double mollifier_second_moment(int n)
{
    const int N = 200000;
    double num = 0, den = 0;
    for (int i = 0; i < N; ++i) {
        const double t = (i + 0.5) / N, k = std::exp(-1.0 / (1.0 - t * t));
        num += std::pow(t / n, 4) * k;
        den += std::pow(t / n, 2) * k;
    }
    return num / den;
}

} // namespace

TEST(Diagnostics, MollifierMeasureMoments)
{
    for (int n : {2, 8}) {
        const MollifierMeasure mu(n);
        double mass = 0, m2 = 0;
        Mat2 mean = Mat2::Zero();
        for (std::size_t q = 0; q < mu.w.size(); ++q) {
            mass += mu.w[q];
            mean += mu.w[q] * mu.z[q];
            m2 += mu.w[q] * frobenius<2>(mu.z[q]) * frobenius<2>(mu.z[q]);
            EXPECT_LT(frobenius<2>(mu.z[q]), 1.0 / n);
        }
        EXPECT_NEAR(mass, 1.0, 1e-12); // summation roundoff over ~4k weights
        EXPECT_LT(frobenius<2>(mean), 1e-15);
        EXPECT_NEAR(m2, mollifier_second_moment(n), 1e-6 * m2);
    }
}

TEST(Diagnostics, BnNewtonianClosedForm)
{
    // S* linear: b_n = 2 mu (|DU - Du|^2 + E|z|^2), a_n = 2 mu |DU - Du|^2
    const double mu = 0.7;
    const int n = 4;
    const Manufactured mf{1.0};
    SpacePair sp(square(4), PairKind::p2_p0);
    const VectorXd U = interpolate(sp, analytic_field([&](const Vec2& x) { return mf.u(x); }));
    const StressModel law(GraphLaw(LawKind::newtonian, {mu, 2.0, 0.0, 1.0}), n);
    const auto grad = [&](const Vec2& x) { return mf.grad(x); };
    const BnReport b = bn_diagnostic(sp, law, U, grad);
    const AnReport a = an_diagnostic(sp, law, U, grad);
    const double shift = 2 * mu * mollifier_second_moment(n);
    EXPECT_NEAR(b.min_value, a.min_value + shift, 1e-6 * shift);
    EXPECT_NEAR(b.max_value, a.max_value + shift, 1e-6 * shift);
    EXPECT_NEAR(b.an_gap, shift, 1e-6 * shift);
    EXPECT_THROW(bn_diagnostic(sp, StressModel(law.law(), 0), U, grad), InvalidArgument);
}

TEST(Diagnostics, BnNonnegativeForMonotoneLaws)
{
    const Manufactured mf{1.0};
    SpacePair sp(square(4), PairKind::mini);
    std::mt19937_64 rng(5);
    const VectorXd U = random_vector(sp.velocity_dim(), rng);
    for (const GraphLaw& g : {GraphLaw(LawKind::power_law, {1.0, 3.0, 0.0, 1.0}),
             GraphLaw(LawKind::bingham, {1.0, 2.0, 0.5, 1.0}), GraphLaw(LawKind::power_law, {1.0, 1.5, 0.0, 1.0})}) {
        const BnReport b = bn_diagnostic(sp, StressModel(g, 8), U, [&](const Vec2& x) { return mf.grad(x); });
        EXPECT_GE(b.min_value, -1e-12) << to_string(g.kind());
    }
}
