#pragma once

#include "imflow/elements/projectors.hpp"
#include "imflow/system/assembly.hpp"

#include <Eigen/SparseLU>

#include <chrono>

namespace imflow {

struct SolverOptions {
    double newton_tol = 1e-10; // on the algebraic residual 2-norm, scaled by max(1, |F|)
    int max_iter = 60;         // Newton iterations per stage
    int n_mollify = 0;         // 0: use S* directly (single-valued laws)
    bool continuation = true;  // multivalued laws: n0, 2 n0, ..., n_max
    int n0 = 4;
    int n_max = 64;
    int picard_steps = 4; // relaxed Picard steps after Newton stagnates
    double picard_relaxation = 0.5;
    ConvectionForm convection = ConvectionForm::skew;
    int quadrature_degree = 0; // 0: pair default
    int threads = 1;
};

struct DiscreteSolution {
    VectorXd U;
    VectorXd P; // mean-zero representative
    int n = 0;  // mollification index of the last stage
    std::vector<double> residual_history;
    std::vector<int> stages;
    double constraint_residual = 0.0; // |<div U, Q_i>|_2
    double constraint_max = 0.0;
    int iterations = 0;
    int picard_iterations = 0;
    double seconds = 0.0;
    bool converged = false;
    std::string message;
};

// Mollification indices of the continuation sequence.
inline std::vector<int> continuation_schedule(const GraphLaw& law, const SolverOptions& o)
{
    if (law.single_valued() && o.n_mollify == 0)
        return {0};
    if (!o.continuation || (law.single_valued() && o.n_mollify > 0))
        return {o.n_mollify > 0 ? o.n_mollify : o.n_max};
    if (o.n0 < 1 || o.n_max < o.n0)
        throw InvalidArgument("continuation needs 1 <= n0 <= n_max");
    std::vector<int> out;
    for (int n = o.n0; n < o.n_max; n *= 2)
        out.push_back(n);
    out.push_back(o.n_max);
    return out;
}

// Subtracts the constant that makes int P = 0. The constant function has
// all-ones coefficients in every pressure space here.
inline void remove_pressure_mean(const Assembler& as, VectorXd& P)
{
    const VectorXd& m = as.pressure_means();
    P.array() -= m.dot(P) / m.sum();
}

class NonlinearSolver {
public:
    NonlinearSolver(const Assembler& as, const SolverOptions& opt) : as_(as), opt_(opt) {}

    // Solves from the initial guess carried in sol (zero vectors if empty).
    DiscreteSolution solve(const GraphLaw& law, const Load& f, DiscreteSolution init = {}) const
    {
        const auto t0 = std::chrono::steady_clock::now();
        const SpacePair& sp = as_.pair();
        DiscreteSolution s = std::move(init);
        if (s.U.size() != sp.velocity_dim())
            s.U = VectorXd::Zero(sp.velocity_dim());
        if (s.P.size() != sp.pressure_dim())
            s.P = VectorXd::Zero(sp.pressure_dim());
        s.residual_history.clear();
        s.stages.clear();
        s.iterations = s.picard_iterations = 0;
        const VectorXd F = as_.load(f);
        const double tol = opt_.newton_tol * std::max(1.0, F.norm());
        double mu = 0.0;

        if (s.U.isZero(0.0) && !law.is_linear() && !F.isZero(0.0)) {
            // Start from the Stokes problem with the secant viscosity at |D| = 1.
            LawParams lp;
            lp.mu = 0.5 * law.profile(1.0);
            const StressModel lin(GraphLaw(LawKind::newtonian, lp), 0);
            linear_step(lin, ConvectionForm::none, F, s.U, s.P, mu, 1.0);
        }

        s.converged = true;
        for (int n : continuation_schedule(law, opt_)) {
            const StressModel model(law, n);
            s.n = n;
            s.stages.push_back(n);
            if (!stage(model, F, tol, s, mu)) {
                s.converged = false;
                s.message = "no convergence at mollification index " + std::to_string(n) + " after " +
                    std::to_string(opt_.max_iter) + " iterations";
                break;
            }
        }
        remove_pressure_mean(as_, s.P);
        const VectorXd bu = as_.divergence() * s.U;
        s.constraint_residual = bu.norm();
        s.constraint_max = bu.lpNorm<Eigen::Infinity>();
        s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return s;
    }

    // Full residual [N(U) - B^T P - F; -B U + mu m; m.P].
    VectorXd residual(const StressModel& model, const VectorXd& F, const VectorXd& U, const VectorXd& P, double mu,
        SparseMatrix* jac = nullptr, Linearization mode = Linearization::newton) const
    {
        const SparseMatrix& B = as_.divergence();
        const VectorXd& m = as_.pressure_means();
        const int nv = int(U.size()), np = int(P.size());
        VectorXd r(nv + np + 1);
        r.head(nv) = as_.nonlinear(model, opt_.convection, U, jac, mode) - B.transpose() * P - F;
        r.segment(nv, np) = -(B * U) + mu * m;
        r[nv + np] = m.dot(P);
        return r;
    }

private:
    bool stage(const StressModel& model, const VectorXd& F, double tol, DiscreteSolution& s, double& mu) const
    {
        const int nv = int(s.U.size()), np = int(s.P.size());
        for (int it = 0; it < opt_.max_iter; ++it) {
            SparseMatrix J;
            const VectorXd r = residual(model, F, s.U, s.P, mu, &J);
            const double rn = r.norm();
            s.residual_history.push_back(rn);
            if (rn <= tol)
                return true;
            ++s.iterations;
            const VectorXd dx = -factor(saddle_matrix(J, as_.divergence(), as_.pressure_means(), -1.0)).solve(r);
            bool accepted = false;
            for (double alpha = 1.0; alpha >= 1.0 / 1024; alpha *= 0.5) {
                const VectorXd U = s.U + alpha * dx.head(nv), P = s.P + alpha * dx.segment(nv, np);
                const double m = mu + alpha * dx[nv + np];
                if (residual(model, F, U, P, m).norm() <= (1.0 - 1e-4 * alpha) * rn) {
                    s.U = U;
                    s.P = P;
                    mu = m;
                    accepted = true;
                    break;
                }
            }
            if (!accepted)
                for (int k = 0; k < opt_.picard_steps; ++k, ++s.picard_iterations)
                    linear_step(model, opt_.convection, F, s.U, s.P, mu, opt_.picard_relaxation);
        }
        const double rn = residual(model, F, s.U, s.P, mu).norm();
        s.residual_history.push_back(rn);
        return rn <= tol;
    }

    // One relaxed Picard step: solve with the secant stress and the
    // convection lagged at the current U, then move a fraction omega.
    void linear_step(const StressModel& model, ConvectionForm conv, const VectorXd& F, VectorXd& U, VectorXd& P,
        double& mu, double omega) const
    {
        SparseMatrix A;
        as_.nonlinear(model, conv, U, &A, Linearization::picard);
        const int nv = int(U.size()), np = int(P.size());
        VectorXd rhs = VectorXd::Zero(nv + np + 1);
        rhs.head(nv) = F;
        const VectorXd x = factor(saddle_matrix(A, as_.divergence(), as_.pressure_means(), -1.0)).solve(rhs);
        U += omega * (x.head(nv) - U);
        P += omega * (x.segment(nv, np) - P);
        mu += omega * (x[nv + np] - mu);
    }

    static std::unique_ptr<Eigen::SparseLU<SparseMatrix>> factor_ptr(const SparseMatrix& K)
    {
        auto lu = std::make_unique<Eigen::SparseLU<SparseMatrix>>();
        lu->analyzePattern(K);
        lu->factorize(K);
        if (lu->info() != Eigen::Success)
            throw NumericalFailure("singular saddle-point system: " + lu->lastErrorMessage());
        return lu;
    }

    struct Factor {
        std::unique_ptr<Eigen::SparseLU<SparseMatrix>> lu;
        VectorXd solve(const VectorXd& b) const { return lu->solve(b); }
    };
    static Factor factor(const SparseMatrix& K) { return {factor_ptr(K)}; }

    const Assembler& as_;
    SolverOptions opt_;
};

// Transfers a solution to a finer pair by nodal interpolation and L^2
// projection; used to warm-start the next level.
inline DiscreteSolution prolong(const SpacePair& coarse, const DiscreteSolution& s, const SpacePair& fine)
{
    DiscreteSolution out;
    // cell ids of the fine mesh mean nothing on the coarse one
    const VectorFieldFn u = fe_field(coarse, s.U);
    const ScalarFieldFn p = fe_pressure_field(coarse, s.P);
    out.U = interpolate(fine, [&](int, const Vec2& x, Vec2* v, Mat2* g) { u(-1, x, v, g); });
    out.P = PressureProjector(fine).apply([&](int, const Vec2& x) { return p(-1, x); });
    return out;
}

} // namespace imflow
