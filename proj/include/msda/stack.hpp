#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "msda/data_matrix.hpp"
#include "msda/error.hpp"
#include "msda/highdim.hpp"
#include "msda/mda.hpp"

namespace msda {

enum class Squash { Tanh, Identity };

/// Greedy layer-wise stack of denoising maps. An optional blockwise
/// first layer handles very high-dimensional inputs; standard layers
/// follow. All layers share one corruption probability.
struct StackModel {
    double p = 0.0;
    double ridge = 1e-5;
    Squash squash = Squash::Tanh;
    std::optional<BlockLayer> block_first;
    std::vector<DenoisingMap> layers;

    std::size_t layer_count() const { return layers.size() + (block_first ? 1 : 0); }

    std::size_t input_dim() const {
        if (block_first) return block_first->d_in();
        if (!layers.empty()) return layers.front().d_in();
        return 0;
    }

    /// Dimension of the concatenated representation: d plus the sum of
    /// every layer's output dimension ((l+1) d for standard stacks).
    std::size_t represent_dim() const {
        std::size_t total = input_dim();
        if (block_first) total += block_first->r();
        for (const auto& layer : layers) total += layer.d_out();
        return total;
    }
};

namespace detail {

inline bool apply_tanh(Squash squash) { return squash == Squash::Tanh; }

/// h^0 = X, h^t = squash(W^t [h^{t-1}; 1]) for every stored layer.
/// Returns h^1 .. h^l (h^0 is the caller's input).
inline std::vector<DataMatrix> hidden_outputs(const StackModel& model, const DataMatrix& X) {
    if (X.dim() != model.input_dim())
        throw ShapeError("stack input dimension " + std::to_string(X.dim()) +
                         " does not match model dimension " +
                         std::to_string(model.input_dim()));
    std::vector<DataMatrix> hidden;
    hidden.reserve(model.layer_count());
    const DataMatrix* current = &X;
    if (model.block_first) {
        hidden.push_back(block_forward(*model.block_first, *current, apply_tanh(model.squash)));
        current = &hidden.back();
    }
    for (const auto& layer : model.layers) {
        hidden.push_back(transform(layer, *current, apply_tanh(model.squash)));
        current = &hidden.back();
    }
    return hidden;
}

} // namespace detail

/// Trains an l-layer stack greedily: layer t is solved in closed form,
/// exactly once, to reconstruct h^{t-1} from its corruptions; the raw
/// input feeds the first layer unsquashed.
inline StackModel train_stack(const DataMatrix& X, double p, std::size_t l, double ridge,
                              Squash squash = Squash::Tanh) {
    if (l == 0) throw InvalidArgument("train_stack: at least one layer required");
    if (X.cols() == 0) throw DataError("train_stack: no columns");
    StackModel model;
    model.p = p;
    model.ridge = ridge;
    model.squash = squash;
    model.layers.reserve(l);

    DataMatrix hidden;
    const DataMatrix* current = &X;
    for (std::size_t t = 0; t < l; ++t) {
        model.layers.push_back(mda_fit(*current, p, ridge));
        if (t + 1 < l) {
            hidden = transform(model.layers.back(), *current, detail::apply_tanh(squash));
            current = &hidden;
        }
    }
    return model;
}

/// Blockwise variant: the first layer reconstructs only the top-r
/// features from the plan's feature subsets; l - 1 standard layers of
/// width r stack on top.
inline StackModel train_stack_blockwise(const DataMatrix& X,
                                        std::span<const std::uint32_t> top_r,
                                        const BlockPlan& plan, double p, std::size_t l,
                                        double ridge, Squash squash = Squash::Tanh) {
    if (l == 0) throw InvalidArgument("train_stack: at least one layer required");
    if (X.cols() == 0) throw DataError("train_stack: no columns");
    StackModel model;
    model.p = p;
    model.ridge = ridge;
    model.squash = squash;
    model.block_first = train_block_layer(X, top_r, plan, p, ridge);

    DataMatrix hidden = block_forward(*model.block_first, X, detail::apply_tanh(squash));
    for (std::size_t t = 1; t < l; ++t) {
        model.layers.push_back(mda_fit(hidden, p, ridge));
        if (t + 1 < l)
            hidden = transform(model.layers.back(), hidden, detail::apply_tanh(squash));
    }
    return model;
}

/// Concatenated representation [h^0; h^1; ...; h^l]: the raw input
/// (unsquashed) stacked over every layer's squashed output.
inline DataMatrix represent(const StackModel& model, const DataMatrix& X) {
    const std::vector<DataMatrix> hidden = detail::hidden_outputs(model, X);
    const auto n = static_cast<Eigen::Index>(X.cols());
    Eigen::MatrixXd out(static_cast<Eigen::Index>(model.represent_dim()), n);
    Eigen::Index row = 0;
    out.topRows(static_cast<Eigen::Index>(X.dim())) = X.to_dense();
    row += static_cast<Eigen::Index>(X.dim());
    for (const auto& h : hidden) {
        out.middleRows(row, static_cast<Eigen::Index>(h.dim())) = h.dense_data();
        row += static_cast<Eigen::Index>(h.dim());
    }
    return DataMatrix::make_dense(std::move(out), DataMatrix::Kind::Hidden);
}

} // namespace msda
