#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "msda/data_matrix.hpp"
#include "msda/error.hpp"
#include "msda/mda.hpp"
#include "msda/rng.hpp"

namespace msda {

/// Random partition of the d input features into contiguous blocks of a
/// seeded permutation. Blocks are non-overlapping and cover every
/// feature exactly once.
struct BlockPlan {
    std::size_t r = 0;      // reconstruction target dimension
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> permutation; // size d
    std::vector<std::size_t> boundaries;    // block s = permutation[boundaries[s], boundaries[s+1])

    std::size_t dim() const { return permutation.size(); }
    std::size_t block_count() const { return boundaries.size() - 1; }
    std::span<const std::uint32_t> block(std::size_t s) const {
        return {permutation.data() + boundaries[s], boundaries[s + 1] - boundaries[s]};
    }
};

/// ceil(d / block_size) blocks over a uniformly random permutation; the
/// last block may be smaller. Deterministic given the seed.
inline BlockPlan make_plan(std::size_t d, std::size_t r, std::size_t block_size,
                           std::uint64_t seed) {
    if (d == 0) throw InvalidArgument("make_plan: dimension must be positive");
    if (r > d) throw InvalidArgument("make_plan: r exceeds input dimension");
    if (block_size == 0 || block_size > d)
        throw InvalidArgument("make_plan: block size must lie in [1, d]");
    BlockPlan plan;
    plan.r = r;
    plan.seed = seed;
    plan.permutation = random_permutation(d, seed);
    for (std::size_t start = 0; start < d; start += block_size)
        plan.boundaries.push_back(start);
    plan.boundaries.push_back(d);
    return plan;
}

/// One trained block map per plan block; map s has shape r x (|block s| + 1).
struct BlockLayer {
    BlockPlan plan;
    std::vector<DenoisingMap> maps;

    std::size_t r() const { return plan.r; }
    std::size_t d_in() const { return plan.dim(); }
};

namespace detail {

/// feature -> (block, offset within block) lookup for a plan.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> block_lookup(const BlockPlan& plan) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> where(plan.dim());
    for (std::size_t s = 0; s < plan.block_count(); ++s) {
        const auto feats = plan.block(s);
        for (std::size_t k = 0; k < feats.size(); ++k)
            where[feats[k]] = {static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(k)};
    }
    return where;
}

} // namespace detail

/// Trains one block map per subset: each W^s reconstructs the top-r
/// target vector z from the corrupted block features, in closed form.
/// EQ comes from the block's bias-augmented scatter with the usual
/// survival scaling; EP is the cross-scatter Z [X^s; 1]^T with survival
/// probabilities applied to the corrupted (input) side only -- the
/// target z is never corrupted.
///
/// top_r lists the feature indices of the reconstruction target in rank
/// order; blocks are trained one at a time, each in a single pass over
/// the data.
inline BlockLayer train_block_layer(const DataMatrix& X, std::span<const std::uint32_t> top_r,
                                    const BlockPlan& plan, double p, double ridge) {
    if (plan.dim() != X.dim())
        throw ShapeError("train_block_layer: plan dimension does not match data");
    if (top_r.size() != plan.r)
        throw InvalidArgument("train_block_layer: top-r selector size does not match plan.r");
    if (X.cols() == 0) throw DataError("train_block_layer: no columns");
    const CorruptionSpec spec(p);
    const std::size_t n = X.cols();
    const auto ri = static_cast<Eigen::Index>(plan.r);

    // Target rows: z[k] = x[top_r[k]].
    std::vector<std::int64_t> target_row(X.dim(), -1);
    for (std::size_t k = 0; k < top_r.size(); ++k) {
        if (top_r[k] >= X.dim())
            throw ShapeError("train_block_layer: top-r index out of range");
        target_row[top_r[k]] = static_cast<std::int64_t>(k);
    }

    BlockLayer layer;
    layer.plan = plan;
    layer.maps.reserve(plan.block_count());

    std::vector<std::int64_t> offset_of(X.dim());
    SparseColumn block_vals;
    SparseColumn target_vals;
    for (std::size_t s = 0; s < plan.block_count(); ++s) {
        const auto feats = plan.block(s);
        const auto k = static_cast<Eigen::Index>(feats.size());
        std::fill(offset_of.begin(), offset_of.end(), -1);
        for (std::size_t i = 0; i < feats.size(); ++i)
            offset_of[feats[i]] = static_cast<std::int64_t>(i);

        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(k + 1, k + 1); // [X^s;1][X^s;1]^T
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(ri, k + 1);    // Z [X^s;1]^T
        for (std::size_t j = 0; j < n; ++j) {
            block_vals.clear();
            target_vals.clear();
            X.for_each_nz(j, [&](std::uint32_t a, double v) {
                if (offset_of[a] >= 0)
                    block_vals.push_back({static_cast<std::uint32_t>(offset_of[a]), v});
                if (target_row[a] >= 0)
                    target_vals.push_back({static_cast<std::uint32_t>(target_row[a]), v});
            });
            for (const auto& [a, va] : block_vals) {
                for (const auto& [b, vb] : block_vals) S(a, b) += va * vb;
                S(k, a) += va;
                S(a, k) += va;
            }
            S(k, k) += 1.0;
            for (const auto& [z, vz] : target_vals) {
                for (const auto& [b, vb] : block_vals) C(z, b) += vz * vb;
                C(z, k) += vz;
            }
        }

        const Eigen::VectorXd q = spec.survival_vector(feats.size());
        ScatterPair scatter;
        scatter.ep = C.array().rowwise() * q.transpose().array();
        scatter.eq = S.array() * (q * q.transpose()).array();
        scatter.eq.diagonal() = q.array() * S.diagonal().array();
        layer.maps.push_back(solve_mda(scatter, ridge, p));
    }
    return layer;
}

/// First-layer output of the blockwise construction: the mean over
/// blocks of W^s [x^s; 1], squashed. Output is always r-dimensional.
inline DataMatrix block_forward(const BlockLayer& layer, const DataMatrix& X,
                                bool squash = true) {
    if (X.dim() != layer.d_in())
        throw ShapeError("block_forward: input dimension does not match plan");
    const auto where = detail::block_lookup(layer.plan);
    const auto ri = static_cast<Eigen::Index>(layer.r());
    const auto n = static_cast<Eigen::Index>(X.cols());

    Eigen::VectorXd bias_sum = Eigen::VectorXd::Zero(ri);
    for (const auto& map : layer.maps)
        bias_sum += map.W.col(static_cast<Eigen::Index>(map.d_in()));

    Eigen::MatrixXd H = bias_sum.replicate(1, n);
    for (std::size_t j = 0; j < X.cols(); ++j)
        X.for_each_nz(j, [&](std::uint32_t a, double v) {
            const auto [s, offset] = where[a];
            H.col(static_cast<Eigen::Index>(j)) += v * layer.maps[s].W.col(offset);
        });
    H /= static_cast<double>(layer.plan.block_count());
    if (squash) H = H.array().tanh();
    return DataMatrix::make_dense(std::move(H), DataMatrix::Kind::Hidden);
}

} // namespace msda
