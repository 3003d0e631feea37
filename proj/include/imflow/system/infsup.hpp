#pragma once

#include "imflow/elements/projectors.hpp"
#include "imflow/system/assembly.hpp"

#include <Eigen/SparseLU>

#include <random>

namespace imflow {

struct InfSupResult {
    double beta = 0.0;
    int iterations = 0;
    double change = 0.0; // relative change of beta^2 in the last sweep
};

// Shared factorizations for the Schur complement S = B H^{-1} B^T, H the
// W^{1,2} Gram matrix, restricted to pressures with int Q = 0.
class SchurOperator {
public:
    explicit SchurOperator(const Assembler& as) : as_(as), H_(as.velocity_h1())
    {
        h_.compute(H_);
        if (h_.info() != Eigen::Success)
            throw NumericalFailure("velocity Gram matrix is not positive definite");
        kkt_.compute(saddle_matrix(H_, as.divergence(), as.pressure_means(), 1.0));
        if (kkt_.info() != Eigen::Success)
            throw NumericalFailure("saddle-point system is singular: pressure modes beyond constants");
    }

    const SparseMatrix& gram() const { return H_; }

    VectorXd apply(const VectorXd& q) const
    {
        const SparseMatrix& B = as_.divergence();
        return B * h_.solve(VectorXd(B.transpose() * q));
    }

    // Minimizer of |W|_{1,2} subject to B W = g (up to the constant mode),
    // returned with the Schur preimage z: S z = g - mu m, m.z = 0.
    void solve(const VectorXd& g, VectorXd* W, VectorXd* z) const
    {
        const int nv = int(H_.rows()), np = int(g.size());
        VectorXd rhs = VectorXd::Zero(nv + np + 1);
        rhs.segment(nv, np) = g;
        const VectorXd x = kkt_.solve(rhs);
        if (W)
            *W = x.head(nv);
        if (z)
            *z = -x.segment(nv, np);
    }

private:
    const Assembler& as_;
    SparseMatrix H_;
    Eigen::SimplicialLDLT<SparseMatrix> h_;
    Eigen::SparseLU<SparseMatrix> kkt_;
};

// Smallest eigenvalue of S q = beta^2 M_Q q on mean-zero pressures by block
// inverse iteration with Rayleigh-Ritz, beta reported.
inline InfSupResult inf_sup_constant(const Assembler& as, double tol = 1e-10, int max_iter = 500, int block = 6)
{
    const SpacePair& sp = as.pair();
    const int np = sp.pressure_dim();
    if (np < 2)
        throw InvalidArgument("pressure space too small for an inf-sup estimate");
    const SchurOperator S(as);
    const SparseMatrix M = PressureProjector::pressure_mass(sp);
    const VectorXd& m = as.pressure_means();
    const int k = std::min(block, np - 1);

    auto deflate = [&](Eigen::MatrixXd& X) {
        // M-orthogonal to constants (M 1 = m)
        for (int j = 0; j < X.cols(); ++j)
            X.col(j).array() -= m.dot(X.col(j)) / m.sum();
    };

    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> u(-1, 1);
    Eigen::MatrixXd X(np, k);
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < k; ++j)
            X(i, j) = u(rng);
    deflate(X);

    InfSupResult res;
    double prev = kInf;
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::MatrixXd Z(np, k), SZ(np, k);
        for (int j = 0; j < k; ++j) {
            VectorXd z;
            S.solve(M * X.col(j), nullptr, &z);
            Z.col(j) = z;
        }
        deflate(Z);
        for (int j = 0; j < k; ++j)
            SZ.col(j) = S.apply(Z.col(j));
        const Eigen::MatrixXd a = Z.transpose() * SZ;
        const Eigen::MatrixXd b = Z.transpose() * (M * Z);
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()), 0.5 * (b + b.transpose()));
        if (es.info() != Eigen::Success)
            throw NumericalFailure("inf-sup eigen-solver breakdown");
        X = Z * es.eigenvectors();
        const double lam = es.eigenvalues()[0];
        res.iterations = it;
        res.change = std::abs(lam - prev) / std::max(std::abs(lam), 1e-300);
        res.beta = std::sqrt(std::max(lam, 0.0));
        if (res.change <= tol)
            break;
        prev = lam;
    }
    return res;
}

struct BogovskiiResult {
    VectorXd W;
    double constraint_residual = 0.0; // max_i |<div W, Q_i> - h_i| / |h|
    double stability = 0.0;           // |W|_{1,2} / sup_Q <H,Q>/|Q|_2
};

// Discrete right inverse of the divergence: given moments h_i = <H, Q_i>,
// the W in V^n of least W^{1,2} norm with <div W, Q_i> = h_i.
inline BogovskiiResult discrete_bogovskii(const Assembler& as, const VectorXd& h, const SchurOperator* schur = nullptr)
{
    const SpacePair& sp = as.pair();
    if (h.size() != sp.pressure_dim())
        throw InvalidArgument("divergence datum does not match the pressure space");
    BogovskiiResult r;
    const double hn = h.lpNorm<Eigen::Infinity>();
    if (hn == 0.0) {
        r.W = VectorXd::Zero(sp.velocity_dim());
        return r;
    }
    std::unique_ptr<SchurOperator> own;
    if (!schur) {
        own = std::make_unique<SchurOperator>(as);
        schur = own.get();
    }
    schur->solve(h, &r.W, nullptr);
    r.constraint_residual = (as.divergence() * r.W - h).lpNorm<Eigen::Infinity>() / hn;
    if (!(r.constraint_residual <= 1e-10))
        throw Infeasible("divergence datum is not in the range of the discrete divergence (defect " +
            std::to_string(r.constraint_residual) + ")");
    const SparseMatrix M = PressureProjector::pressure_mass(sp);
    Eigen::SimplicialLDLT<SparseMatrix> mq(M);
    const double dual = std::sqrt(h.dot(mq.solve(h)));
    r.stability = std::sqrt(r.W.dot(schur->gram() * r.W)) / dual;
    return r;
}

// Moments <H, Q_i> of a scalar field.
inline VectorXd pressure_moments(const SpacePair& sp, const ScalarFieldFn& H)
{
    const auto& t = sp.mesh();
    const TriangleRule r = sp.quadrature(sp.default_degree());
    VectorXd out = VectorXd::Zero(sp.pressure_dim());
    PressureBasis pb;
    for (int c = 0; c < t.num_cells(); ++c) {
        const int* pd = sp.pressure_dofs(c);
        for (std::size_t q = 0; q < r.size(); ++q) {
            const double v = H(c, t.map(c, r.bary[q])) * r.w[q] * t.measure(c);
            sp.eval_pressure(c, r.bary[q].data(), pb);
            for (int a = 0; a < pb.n; ++a)
                out[pd[a]] += v * pb.value[a];
        }
    }
    return out;
}

} // namespace imflow
