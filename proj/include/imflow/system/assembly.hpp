#pragma once

#include "imflow/system/forms.hpp"

#include <algorithm>
#include <thread>

namespace imflow {

// Runs body(c) for every cell. Each cell writes only its own slot, so the
// result does not depend on the thread count.
template <class Body> void parallel_cells(int n_cells, int threads, Body&& body)
{
    threads = std::max(1, std::min(threads, n_cells));
    if (threads == 1) {
        for (int c = 0; c < n_cells; ++c)
            body(c);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(threads);
    for (int k = 0; k < threads; ++k)
        pool.emplace_back([&, k] {
            try {
                const int lo = int(std::int64_t(n_cells) * k / threads), hi = int(std::int64_t(n_cells) * (k + 1) / threads);
                for (int c = lo; c < hi; ++c)
                    body(c);
            } catch (...) {
                errs[k] = std::current_exception();
            }
        });
    for (auto& th : pool)
        th.join();
    for (auto& e : errs)
        if (e)
            std::rethrow_exception(e);
}

enum class Linearization { newton, picard };

class Assembler {
public:
    explicit Assembler(const SpacePair& sp, int degree = 0, int threads = 1)
        : sp_(sp), rule_(degree > 0 ? sp.quadrature(degree) : sp.default_rule()), threads_(threads)
    {
        build_divergence();
    }

    const SpacePair& pair() const { return sp_; }
    const TriangleRule& rule() const { return rule_; }
    int threads() const { return threads_; }

    // B(i, k) = <div V_k, Q_i>.
    const SparseMatrix& divergence() const { return B_; }
    // m_i = int Q_i.
    const VectorXd& pressure_means() const { return m_; }

    // Gram matrix of the full W^{1,2} inner product on V^n.
    SparseMatrix velocity_h1() const
    {
        const auto& t = sp_.mesh();
        std::vector<Triplet> trip;
        VelocityBasis b;
        for (int c = 0; c < t.num_cells(); ++c) {
            const int* dofs = sp_.velocity_dofs(c);
            const int n = sp_.n_velocity_local();
            Eigen::MatrixXd loc = Eigen::MatrixXd::Zero(n, n);
            for (std::size_t q = 0; q < rule_.size(); ++q) {
                sp_.eval_velocity(c, rule_.bary[q].data(), b);
                const double w = rule_.w[q] * t.measure(c);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        loc(i, j) += w * (contract<2>(b.grad[i], b.grad[j]) + b.value[i].dot(b.value[j]));
            }
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (dofs[i] >= 0 && dofs[j] >= 0)
                        trip.emplace_back(dofs[i], dofs[j], loc(i, j));
        }
        SparseMatrix k(sp_.velocity_dim(), sp_.velocity_dim());
        k.setFromTriplets(trip.begin(), trip.end());
        return k;
    }

    VectorXd load(const Load& f) const
    {
        VectorXd F = VectorXd::Zero(sp_.velocity_dim());
        if (f.zero())
            return F;
        const auto& t = sp_.mesh();
        const TriangleRule r = sp_.quadrature(sp_.default_degree() + 2);
        VelocityBasis b;
        for (int c = 0; c < t.num_cells(); ++c) {
            const int* dofs = sp_.velocity_dofs(c);
            for (std::size_t q = 0; q < r.size(); ++q) {
                const Vec2 x = t.map(c, r.bary[q]);
                const double w = r.w[q] * t.measure(c);
                const Vec2 f0 = f.f0 ? f.f0(x) : Vec2::Zero();
                const Mat2 G = f.G ? f.G(x) : Mat2::Zero();
                sp_.eval_velocity(c, r.bary[q].data(), b);
                for (int k = 0; k < b.n; ++k)
                    if (dofs[k] >= 0)
                        F[dofs[k]] += w * (f0.dot(b.value[k]) + contract<2>(G, b.grad[k]));
            }
        }
        return F;
    }

    // N(U)_k = int S(DU):DV_k + B[U, U, V_k]. With jac, also the matrix of
    //   newton: the stress tangent plus the convection lagged in its first slot;
    //   picard: the secant stress coefficient (so that matrix * U = N(U)) plus
    //           the same lagged convection.
    VectorXd nonlinear(const StressModel& law, ConvectionForm conv, const VectorXd& U, SparseMatrix* jac,
        Linearization mode = Linearization::newton) const
    {
        detail::require_size(sp_, U, "velocity coefficients");
        const auto& t = sp_.mesh();
        const int n = sp_.n_velocity_local();
        const int nc = t.num_cells();
        std::vector<double> vec(std::size_t(nc) * n, 0.0);
        std::vector<double> mat(jac ? std::size_t(nc) * n * n : 0, 0.0);
        const double floor = 1e-10 * std::max(law.law().profile(1.0), 1e-300);

        parallel_cells(nc, threads_, [&](int c) {
            const int* dofs = sp_.velocity_dofs(c);
            VelocityBasis b;
            double* lv = vec.data() + std::size_t(c) * n;
            double* lm = jac ? mat.data() + std::size_t(c) * n * n : nullptr;
            for (std::size_t q = 0; q < rule_.size(); ++q) {
                sp_.eval_velocity(c, rule_.bary[q].data(), b);
                const double w = rule_.w[q] * t.measure(c);
                Vec2 u = Vec2::Zero();
                Mat2 g = Mat2::Zero();
                for (int k = 0; k < n; ++k)
                    if (dofs[k] >= 0) {
                        u += U[dofs[k]] * b.value[k];
                        g += U[dofs[k]] * b.grad[k];
                    }
                Tangent<2> tg;
                const Mat2 S = law.stress(sym<2>(g), tg);
                const Vec2 gu = g * u;
                for (int k = 0; k < n; ++k) {
                    double conv_k = 0.0;
                    if (conv == ConvectionForm::skew)
                        conv_k = 0.5 * (b.value[k].dot(gu) - u.dot(b.grad[k] * u));
                    else if (conv == ConvectionForm::divfree)
                        conv_k = -u.dot(b.grad[k] * u);
                    lv[k] += w * (contract<2>(S, b.grad[k]) + conv_k);
                }
                if (!lm)
                    continue;
                // Tangent eigenvalues a (across e) and a + b (along e), both
                // kept above a tiny floor so degenerate laws stay invertible.
                double a = std::max(tg.a, floor);
                double bb = mode == Linearization::picard ? 0.0 : std::max(tg.a + tg.b, floor) - a;
                std::array<Mat2, kMaxVelocityLocal> dv;
                std::array<Mat2, kMaxVelocityLocal> sdv;
                for (int k = 0; k < n; ++k) {
                    dv[k] = sym<2>(b.grad[k]);
                    sdv[k] = a * dv[k] + bb * contract<2>(tg.e, dv[k]) * tg.e;
                }
                for (int k = 0; k < n; ++k)
                    for (int l = 0; l < n; ++l) {
                        double v = contract<2>(sdv[l], dv[k]);
                        if (conv == ConvectionForm::skew)
                            v += 0.5 * (b.value[k].dot(b.grad[l] * u) - b.value[l].dot(b.grad[k] * u));
                        else if (conv == ConvectionForm::divfree)
                            v -= b.value[l].dot(b.grad[k] * u);
                        lm[k * n + l] += w * v;
                    }
            }
            (void)dofs;
        });

        VectorXd N = VectorXd::Zero(sp_.velocity_dim());
        std::vector<Triplet> trip;
        if (jac)
            trip.reserve(std::size_t(nc) * n * n);
        for (int c = 0; c < nc; ++c) {
            const int* dofs = sp_.velocity_dofs(c);
            for (int k = 0; k < n; ++k) {
                if (dofs[k] < 0)
                    continue;
                N[dofs[k]] += vec[std::size_t(c) * n + k];
                if (jac)
                    for (int l = 0; l < n; ++l)
                        if (dofs[l] >= 0)
                            trip.emplace_back(dofs[k], dofs[l], mat[(std::size_t(c) * n + k) * n + l]);
            }
        }
        if (jac) {
            jac->resize(sp_.velocity_dim(), sp_.velocity_dim());
            jac->setFromTriplets(trip.begin(), trip.end());
        }
        return N;
    }

private:
    void build_divergence()
    {
        const auto& t = sp_.mesh();
        std::vector<Triplet> trip;
        m_ = VectorXd::Zero(sp_.pressure_dim());
        VelocityBasis b;
        PressureBasis p;
        for (int c = 0; c < t.num_cells(); ++c) {
            const int* vd = sp_.velocity_dofs(c);
            const int* pd = sp_.pressure_dofs(c);
            const int n = sp_.n_velocity_local();
            Eigen::MatrixXd loc = Eigen::MatrixXd::Zero(sp_.n_pressure_local(), n);
            for (std::size_t q = 0; q < rule_.size(); ++q) {
                sp_.eval_velocity(c, rule_.bary[q].data(), b);
                sp_.eval_pressure(c, rule_.bary[q].data(), p);
                const double w = rule_.w[q] * t.measure(c);
                for (int i = 0; i < p.n; ++i) {
                    m_[pd[i]] += w * p.value[i];
                    for (int k = 0; k < n; ++k)
                        loc(i, k) += w * p.value[i] * b.grad[k].trace();
                }
            }
            for (int i = 0; i < sp_.n_pressure_local(); ++i)
                for (int k = 0; k < n; ++k)
                    if (vd[k] >= 0)
                        trip.emplace_back(pd[i], vd[k], loc(i, k));
        }
        B_.resize(sp_.pressure_dim(), sp_.velocity_dim());
        B_.setFromTriplets(trip.begin(), trip.end());
    }

    const SpacePair& sp_;
    TriangleRule rule_;
    int threads_;
    SparseMatrix B_;
    VectorXd m_;
};

// Saddle-point matrix with a mean-zero multiplier for the pressure:
//   [ A      s B^T  0 ]
//   [ s B    0      m ]
//   [ 0      m^T    0 ]
inline SparseMatrix saddle_matrix(const SparseMatrix& A, const SparseMatrix& B, const VectorXd& m, double s)
{
    const int nv = int(A.rows()), np = int(B.rows());
    std::vector<Triplet> trip;
    trip.reserve(std::size_t(A.nonZeros() + 2 * B.nonZeros() + 2 * np));
    for (int k = 0; k < A.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(A, k); it; ++it)
            trip.emplace_back(int(it.row()), int(it.col()), it.value());
    for (int k = 0; k < B.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(B, k); it; ++it) {
            trip.emplace_back(nv + int(it.row()), int(it.col()), s * it.value());
            trip.emplace_back(int(it.col()), nv + int(it.row()), s * it.value());
        }
    for (int i = 0; i < np; ++i) {
        trip.emplace_back(nv + i, nv + np, m[i]);
        trip.emplace_back(nv + np, nv + i, m[i]);
    }
    SparseMatrix K(nv + np + 1, nv + np + 1);
    K.setFromTriplets(trip.begin(), trip.end());
    K.makeCompressed();
    return K;
}

} // namespace imflow
