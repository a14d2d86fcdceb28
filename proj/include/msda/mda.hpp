#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include "msda/data_matrix.hpp"
#include "msda/error.hpp"
#include "msda/rng.hpp"

namespace msda {

/// Per-feature zeroing probability p, with the survival vector
/// q = [1-p, ..., 1-p, 1]: the implicit constant feature never corrupts.
class CorruptionSpec {
public:
    explicit CorruptionSpec(double p) : p_(p) {
        if (!(p >= 0.0 && p <= 1.0))
            throw InvalidArgument("corruption probability must lie in [0,1]");
    }

    double p() const { return p_; }

    /// Survival probability of coordinate alpha in the bias-augmented
    /// index range 0..d (coordinate d is the constant feature).
    double survival(std::size_t alpha, std::size_t d) const {
        return alpha == d ? 1.0 : 1.0 - p_;
    }

    Eigen::VectorXd survival_vector(std::size_t d) const {
        Eigen::VectorXd q = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d) + 1, 1.0 - p_);
        q(static_cast<Eigen::Index>(d)) = 1.0;
        return q;
    }

private:
    double p_;
};

/// Learned weight matrix of one denoising layer, bias column included:
/// W is d_out x (d_in + 1) and maps [x; 1] to a reconstruction target.
struct DenoisingMap {
    Eigen::MatrixXd W;
    double p = 0.0;
    double ridge = 0.0;

    std::size_t d_in() const { return static_cast<std::size_t>(W.cols()) - 1; }
    std::size_t d_out() const { return static_cast<std::size_t>(W.rows()); }
};

/// Expected corrupted moments: EQ = E[X~ X~^T] over the bias-augmented
/// range, EP = E[X X~^T] restricted to the d real output rows.
struct ScatterPair {
    Eigen::MatrixXd eq; // (d+1) x (d+1), symmetric PSD
    Eigen::MatrixXd ep; // d x (d+1)
};

namespace detail {

/// Bias-augmented scatter S = [X;1][X;1]^T in one pass over the data.
/// Sparse columns contribute only their nonzero pattern.
inline Eigen::MatrixXd augmented_scatter(const DataMatrix& X) {
    const std::size_t d = X.dim();
    const std::size_t n = X.cols();
    const auto di = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(di + 1, di + 1);
    if (X.is_dense()) {
        const Eigen::MatrixXd& D = X.dense_data();
        S.topLeftCorner(di, di).noalias() = D * D.transpose();
        S.block(di, 0, 1, di) = D.rowwise().sum().transpose();
        S.block(0, di, di, 1) = S.block(di, 0, 1, di).transpose();
    } else {
        for (std::size_t j = 0; j < n; ++j) {
            X.for_each_nz(j, [&](std::uint32_t a, double va) {
                X.for_each_nz(j, [&](std::uint32_t b, double vb) { S(a, b) += va * vb; });
                S(di, a) += va;
            });
        }
        S.block(0, di, di, 1) = S.block(di, 0, 1, di).transpose();
    }
    S(di, di) = static_cast<double>(n);
    if (!S.allFinite()) throw NumericError("non-finite values while accumulating scatter");
    return S;
}

/// Solves W (M + ridge I) = B for W, where M is symmetric PSD, via LDLT.
/// Verifies the relative residual; a breach at ridge = 0 means the
/// system is numerically singular.
inline Eigen::MatrixXd solve_right_spd(Eigen::MatrixXd M, const Eigen::MatrixXd& B,
                                       double ridge) {
    if (ridge < 0.0) throw InvalidArgument("ridge must be non-negative");
    M.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> fact(M);
    Eigen::MatrixXd W = fact.solve(B.transpose()).transpose();

    const double b_norm = B.norm();
    if (b_norm == 0.0) return Eigen::MatrixXd::Zero(B.rows(), B.cols());
    const double residual = (W * M - B).norm() / b_norm;
    if (!(residual <= 1e-8) || !W.allFinite()) {
        if (ridge == 0.0)
            throw SingularSystemError(
                "scatter system is numerically singular at ridge = 0; use a positive ridge");
        throw NumericError("linear solve residual " + std::to_string(residual) +
                           " exceeds tolerance");
    }
    return W;
}

} // namespace detail

/// Expected corrupted scatter of the marginalized denoiser. With
/// S = [X;1][X;1]^T and survival vector q:
///   EQ[a,b] = S[a,b] q_a q_b  (a != b),   EQ[a,a] = S[a,a] q_a,
///   EP[a,b] = S[a,b] q_b      (a over the d real rows only).
inline ScatterPair expected_scatter(const DataMatrix& X, const CorruptionSpec& spec) {
    if (X.cols() == 0) throw DataError("expected_scatter: no columns");
    const auto d = static_cast<Eigen::Index>(X.dim());
    const Eigen::MatrixXd S = detail::augmented_scatter(X);
    const Eigen::VectorXd q = spec.survival_vector(X.dim());

    ScatterPair out;
    out.ep = S.topRows(d).array().rowwise() * q.transpose().array();
    out.eq = S.array() * (q * q.transpose()).array();
    out.eq.diagonal() = q.array() * S.diagonal().array();
    return out;
}

/// Closed-form denoising map: the W with W (EQ + ridge I) = EP, solved
/// as a linear system against the symmetric factorization (never by
/// explicit inversion).
inline DenoisingMap solve_mda(const ScatterPair& scatter, double ridge,
                              double p_metadata = std::numeric_limits<double>::quiet_NaN()) {
    DenoisingMap map;
    map.W = detail::solve_right_spd(scatter.eq, scatter.ep, ridge);
    map.ridge = ridge;
    map.p = p_metadata;
    return map;
}

/// Applies a layer: W [X; 1], with elementwise tanh when squash is set.
inline DataMatrix transform(const DenoisingMap& map, const DataMatrix& X, bool squash) {
    if (X.dim() != map.d_in())
        throw ShapeError("transform: input dimension " + std::to_string(X.dim()) +
                         " does not match map d_in " + std::to_string(map.d_in()));
    const auto n = static_cast<Eigen::Index>(X.cols());
    const auto d_in = static_cast<Eigen::Index>(map.d_in());
    Eigen::MatrixXd H;
    if (X.is_dense()) {
        H = map.W.leftCols(d_in) * X.dense_data();
        H.colwise() += map.W.col(d_in);
    } else {
        H = map.W.col(d_in).replicate(1, n);
        for (std::size_t j = 0; j < X.cols(); ++j)
            X.for_each_nz(j, [&](std::uint32_t a, double v) {
                H.col(static_cast<Eigen::Index>(j)) += v * map.W.col(a);
            });
    }
    if (squash) H = H.array().tanh();
    return DataMatrix::make_dense(std::move(H), DataMatrix::Kind::Hidden);
}

/// Exact-limit denoising map by enumeration over all 2^d corruption
/// masks, each weighted p^(#zeroed) (1-p)^(#kept). Ground truth for the
/// marginalized solve; only feasible for d <= 20.
inline DenoisingMap mda_enumerate(const DataMatrix& X, const CorruptionSpec& spec,
                                  double ridge) {
    const std::size_t d = X.dim();
    if (d > 20)
        throw InvalidArgument("mda_enumerate supports d <= 20 (2^d masks); "
                              "use mda_monte_carlo for larger inputs");
    if (X.cols() == 0) throw DataError("mda_enumerate: no columns");
    const auto di = static_cast<Eigen::Index>(d);
    const auto n = static_cast<Eigen::Index>(X.cols());
    const double p = spec.p();

    Eigen::MatrixXd Xa(di + 1, n);
    Xa.topRows(di) = X.to_dense();
    Xa.row(di).setOnes();

    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(di + 1, di + 1);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(di, di + 1);
    Eigen::MatrixXd corrupted(di + 1, n);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
        const int kept = static_cast<int>(std::popcount(mask));
        const int zeroed = static_cast<int>(d) - kept;
        const double weight = std::pow(1.0 - p, kept) * std::pow(p, zeroed);
        if (weight == 0.0) continue;
        corrupted = Xa;
        for (std::size_t a = 0; a < d; ++a)
            if (!(mask >> a & 1)) corrupted.row(static_cast<Eigen::Index>(a)).setZero();
        Q.noalias() += weight * (corrupted * corrupted.transpose());
        P.noalias() += weight * (Xa.topRows(di) * corrupted.transpose());
    }

    DenoisingMap map;
    map.W = detail::solve_right_spd(std::move(Q), P, ridge);
    map.ridge = ridge;
    map.p = p;
    return map;
}

/// Denoising map from m explicitly corrupted passes over the data. Each
/// feature of each column is independently zeroed with probability p;
/// the accumulated moments are averaged over passes so that the ridge
/// acts on the same scale as the closed-form solve. Deterministic given
/// the seed.
inline DenoisingMap mda_monte_carlo(const DataMatrix& X, const CorruptionSpec& spec,
                                    std::size_t passes, std::uint64_t seed, double ridge) {
    if (passes == 0) throw InvalidArgument("mda_monte_carlo: passes must be >= 1");
    if (X.cols() == 0) throw DataError("mda_monte_carlo: no columns");
    const std::size_t d = X.dim();
    const std::size_t n = X.cols();
    const auto di = static_cast<Eigen::Index>(d);
    const double p = spec.p();

    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(di + 1, di + 1);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(di, di + 1);
    std::mt19937_64 gen(seed);
    SparseColumn surviving;
    for (std::size_t pass = 0; pass < passes; ++pass) {
        for (std::size_t j = 0; j < n; ++j) {
            surviving.clear();
            X.for_each_nz(j, [&](std::uint32_t a, double v) {
                if (uniform01(gen) >= p) surviving.push_back({a, v});
            });
            for (const auto& [a, va] : surviving) {
                for (const auto& [b, vb] : surviving) Q(a, b) += va * vb;
                Q(di, a) += va;
                Q(a, di) += va;
            }
            Q(di, di) += 1.0;
            X.for_each_nz(j, [&](std::uint32_t a, double va) {
                for (const auto& [b, vb] : surviving) P(a, b) += va * vb;
                P(a, di) += va;
            });
        }
    }
    Q /= static_cast<double>(passes);
    P /= static_cast<double>(passes);

    DenoisingMap map;
    map.W = detail::solve_right_spd(std::move(Q), P, ridge);
    map.ridge = ridge;
    map.p = p;
    return map;
}

/// Algorithm-shaped convenience: marginalized scatter + closed-form solve.
inline DenoisingMap mda_fit(const DataMatrix& X, double p, double ridge) {
    const CorruptionSpec spec(p);
    DenoisingMap map = solve_mda(expected_scatter(X, spec), ridge, p);
    return map;
}

} // namespace msda
