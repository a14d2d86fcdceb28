#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "msda/classifier.hpp"
#include "msda/corpus.hpp"
#include "msda/data_matrix.hpp"
#include "msda/error.hpp"
#include "msda/parallel.hpp"
#include "msda/rng.hpp"
#include "msda/stack.hpp"

namespace msda {

/// Domain-adaptation metrics for one source -> target task.
struct EvalReport {
    std::string task;
    double e_st = 0.0;           // transfer error
    double e_tt_baseline = 0.0;  // raw-bow in-domain error on the target
    double transfer_loss = 0.0;  // e_st - e_tt_baseline
    double transfer_ratio = 0.0; // e_st / e_tt_baseline
    double pad_before = 0.0;
    double pad_after = 0.0;
    double train_seconds = std::numeric_limits<double>::quiet_NaN();
    double p = std::numeric_limits<double>::quiet_NaN(); // representation params, echoed
    std::size_t l = 0;
};

struct CvCell {
    double p = 0.0;
    std::size_t l = 0;
    double mean_error = 0.0;
    double best_c = 0.0;
};

struct CvResult {
    std::vector<CvCell> grid;
    std::size_t selected = 0; // index into grid
    double p_star = 0.0;
    std::size_t l_star = 0;
};

/// Seeded k-fold partition stratified by class: each class's indices
/// are shuffled and dealt round-robin, so folds are balanced and
/// deterministic. Requires at least k examples per class.
inline std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<int>& y,
                                                              std::size_t k,
                                                              std::uint64_t seed) {
    if (k < 2) throw InvalidArgument("stratified_folds: need k >= 2");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 1) pos.push_back(i);
        else if (y[i] == -1) neg.push_back(i);
        else throw InvalidArgument("stratified_folds: labels must be +1 or -1");
    }
    if (pos.size() < k || neg.size() < k)
        throw DataError("stratified_folds: need at least " + std::to_string(k) +
                        " examples per class, have " + std::to_string(pos.size()) + "/" +
                        std::to_string(neg.size()));
    std::vector<std::vector<std::size_t>> folds(k);
    std::mt19937_64 gen(seed);
    for (auto* cls : {&pos, &neg}) {
        shuffle(*cls, gen);
        for (std::size_t i = 0; i < cls->size(); ++i) folds[i % k].push_back((*cls)[i]);
    }
    for (auto& fold : folds) std::sort(fold.begin(), fold.end());
    return folds;
}

namespace detail {

inline std::vector<std::size_t> train_indices(const std::vector<std::vector<std::size_t>>& folds,
                                              std::size_t held_out) {
    std::vector<std::size_t> idx;
    for (std::size_t f = 0; f < folds.size(); ++f)
        if (f != held_out) idx.insert(idx.end(), folds[f].begin(), folds[f].end());
    return idx;
}

template <class T>
std::vector<T> subset(const std::vector<T>& values, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(values[i]);
    return out;
}

/// Mean held-out error of per-fold fits at one C.
inline double cv_error(const DataMatrix& X, const std::vector<int>& y,
                       const std::vector<std::vector<std::size_t>>& folds, double c,
                       Loss loss) {
    double total = 0.0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto train_idx = train_indices(folds, f);
        const LinearModel model =
            fit(X.select_columns(train_idx), subset(y, train_idx), c, loss);
        total += error_rate(model, X.select_columns(folds[f]), subset(y, folds[f]));
    }
    return total / static_cast<double>(folds.size());
}

/// Grid search over C: (best C, its mean fold error); ties prefer the
/// smaller C.
inline std::pair<double, double> select_c(const DataMatrix& X, const std::vector<int>& y,
                                          const std::vector<std::vector<std::size_t>>& folds,
                                          std::span<const double> c_grid, Loss loss) {
    if (c_grid.empty()) throw InvalidArgument("select_c: empty C grid");
    std::vector<double> grid(c_grid.begin(), c_grid.end());
    std::sort(grid.begin(), grid.end());
    double best_c = 0.0;
    double best_err = std::numeric_limits<double>::infinity();
    for (double c : grid) {
        const double err = cv_error(X, y, folds, c, loss);
        if (err < best_err) {
            best_err = err;
            best_c = c;
        }
    }
    return {best_c, best_err};
}

/// Cheap content fingerprint used to order PAD's two sides canonically.
struct Fingerprint {
    std::size_t cols, dim;
    double sum, weighted, squares;
    auto operator<=>(const Fingerprint&) const = default;
};

inline Fingerprint fingerprint(const DataMatrix& X) {
    Fingerprint fp{X.cols(), X.dim(), 0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < X.cols(); ++j)
        X.for_each_nz(j, [&](std::uint32_t a, double v) {
            fp.sum += v;
            fp.weighted += (a + 1.0) * v;
            fp.squares += v * v;
        });
    return fp;
}

} // namespace detail

struct PadOptions {
    std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
    std::uint64_t seed = 0;
    Loss loss = Loss::SquaredHinge;
};

/// Proxy-A-distance 2(1 - 2e) where e is the held-out error of a linear
/// classifier trained to tell domain A (+1) from domain B (-1).
///
/// Each side is split 50/50 by a seeded permutation of its own indices
/// (the same seed for both sides), C is chosen by cross-validation
/// inside the training half, and e is measured on the test half. The
/// two sides are ordered by a content fingerprint before computing, so
/// swapping the arguments returns the identical value. The raw value in
/// [-2, 2] is reported without clamping.
inline double proxy_a_distance(const DataMatrix& A, const DataMatrix& B,
                               const PadOptions& opt = {}) {
    if (detail::fingerprint(B) < detail::fingerprint(A)) return proxy_a_distance(B, A, opt);
    if (A.cols() < 2 || B.cols() < 2)
        throw DataError("proxy_a_distance: need at least 2 examples per domain");
    if (A.dim() != B.dim()) throw ShapeError("proxy_a_distance: dimension mismatch");

    // Per-side 50/50 split; train = first half of the permuted order.
    std::vector<std::size_t> train_cols, test_cols;
    std::vector<int> train_y, test_y;
    const DataMatrix* sides[2] = {&A, &B};
    std::vector<std::size_t> offsets{0, A.cols()};
    for (int s = 0; s < 2; ++s) {
        const std::size_t n = sides[s]->cols();
        const auto perm = random_permutation(n, opt.seed);
        const std::size_t half = (n + 1) / 2;
        const int label = s == 0 ? 1 : -1;
        for (std::size_t i = 0; i < n; ++i) {
            (i < half ? train_cols : test_cols).push_back(offsets[s] + perm[i]);
            (i < half ? train_y : test_y).push_back(label);
        }
    }
    DataMatrix merged = A;
    merged.append_columns(B);
    const DataMatrix train_X = merged.select_columns(train_cols);
    const DataMatrix test_X = merged.select_columns(test_cols);

    // C by cross-validation inside the training half when it is large
    // enough; otherwise the smallest C in the grid.
    std::size_t min_class = std::min((A.cols() + 1) / 2, (B.cols() + 1) / 2);
    double c = *std::min_element(opt.c_grid.begin(), opt.c_grid.end());
    if (min_class >= 2) {
        const std::size_t k = std::min<std::size_t>(5, min_class);
        const auto folds = stratified_folds(train_y, k, opt.seed ^ 0x9e3779b97f4a7c15ull);
        c = detail::select_c(train_X, train_y, folds, opt.c_grid, opt.loss).first;
    }
    const LinearModel model = fit(train_X, train_y, c, opt.loss);
    const double eps = error_rate(model, test_X, test_y);
    return 2.0 * (1.0 - 2.0 * eps);
}

struct CvOptions {
    std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
    std::uint64_t fold_seed = 0;
    double ridge = 1e-5;
    Squash squash = Squash::Tanh;
    std::size_t folds = 5;
    Loss loss = Loss::SquaredHinge;
    unsigned threads = 1;
};

/// Grid search over (p, l): for each cell, a stack is trained on the
/// pooled unlabeled data, the labeled source is transformed, and the
/// mean stratified k-fold error of the classifier (minimized over the
/// C grid) is recorded. Stacks are trained once per p at the largest l
/// and reused for smaller l, which greedy training makes exact. The
/// selected cell attains the minimum error; ties break to smaller l,
/// then smaller p.
inline CvResult cross_validate(const DataMatrix& pooled, const DataMatrix& source_X,
                               const std::vector<int>& source_y,
                               std::span<const double> p_grid,
                               std::span<const std::size_t> l_grid, const CvOptions& opt = {}) {
    if (p_grid.empty() || l_grid.empty())
        throw InvalidArgument("cross_validate: empty parameter grid");
    std::vector<double> ps(p_grid.begin(), p_grid.end());
    std::vector<std::size_t> ls(l_grid.begin(), l_grid.end());
    std::sort(ps.begin(), ps.end());
    std::sort(ls.begin(), ls.end());
    const std::size_t l_max = ls.back();
    if (ls.front() == 0) throw InvalidArgument("cross_validate: layer counts must be >= 1");

    const auto folds = stratified_folds(source_y, opt.folds, opt.fold_seed);

    CvResult result;
    result.grid.resize(ps.size() * ls.size());
    parallel_for(ps.size(), opt.threads, [&](std::size_t pi) {
        const double p = ps[pi];
        const StackModel model = train_stack(pooled, p, l_max, opt.ridge, opt.squash);
        const std::vector<DataMatrix> hidden = detail::hidden_outputs(model, source_X);

        const auto n = static_cast<Eigen::Index>(source_X.cols());
        const auto d0 = static_cast<Eigen::Index>(source_X.dim());
        for (std::size_t li = 0; li < ls.size(); ++li) {
            const std::size_t l = ls[li];
            Eigen::Index rows = d0;
            for (std::size_t t = 0; t < l; ++t)
                rows += static_cast<Eigen::Index>(hidden[t].dim());
            Eigen::MatrixXd rep(rows, n);
            rep.topRows(d0) = source_X.to_dense();
            Eigen::Index at = d0;
            for (std::size_t t = 0; t < l; ++t) {
                const auto& h = hidden[t];
                rep.middleRows(at, static_cast<Eigen::Index>(h.dim())) = h.dense_data();
                at += static_cast<Eigen::Index>(h.dim());
            }
            const DataMatrix rep_m = DataMatrix::make_dense(std::move(rep));
            const auto [best_c, err] = detail::select_c(rep_m, source_y, folds,
                                                        opt.c_grid, opt.loss);
            result.grid[pi * ls.size() + li] = CvCell{p, l, err, best_c};
        }
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < result.grid.size(); ++i) {
        const CvCell& cand = result.grid[i];
        const CvCell& cur = result.grid[best];
        const bool better = cand.mean_error < cur.mean_error ||
                            (cand.mean_error == cur.mean_error &&
                             (cand.l < cur.l || (cand.l == cur.l && cand.p < cur.p)));
        if (better) best = i;
    }
    result.selected = best;
    result.p_star = result.grid[best].p;
    result.l_star = result.grid[best].l;
    return result;
}

struct TransferOptions {
    std::string task;
    std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
    std::uint64_t fold_seed = 0;
    std::uint64_t pad_seed = 0;
    std::size_t folds = 5;
    Loss loss = Loss::SquaredHinge;
    double train_seconds = std::numeric_limits<double>::quiet_NaN();
};

/// Transfer evaluation against the raw-bow in-domain baseline.
///
/// The classifier is fit on the transformed source with C selected by
/// stratified k-fold cross-validation on the source; the transfer error
/// e(S,T) is its error on the transformed target. The baseline
/// e_b(T,T) fits on raw target bow and scores held-out folds (mean over
/// folds, minimized over the C grid). Target labels are used for
/// scoring only. PAD is computed on the raw pair and on the transformed
/// pair.
inline EvalReport transfer_eval(const StackModel& model, const DataMatrix& source_X,
                                const std::vector<int>& source_y, const DataMatrix& target_X,
                                const std::vector<int>& target_y,
                                const TransferOptions& opt = {}) {
    const DataMatrix source_rep = represent(model, source_X);
    const DataMatrix target_rep = represent(model, target_X);

    const auto source_folds = stratified_folds(source_y, opt.folds, opt.fold_seed);
    const double c_star =
        detail::select_c(source_rep, source_y, source_folds, opt.c_grid, opt.loss).first;
    const LinearModel classifier = fit(source_rep, source_y, c_star, opt.loss);

    EvalReport report;
    report.task = opt.task;
    report.e_st = error_rate(classifier, target_rep, target_y);

    const auto target_folds = stratified_folds(target_y, opt.folds, opt.fold_seed);
    report.e_tt_baseline =
        detail::select_c(target_X, target_y, target_folds, opt.c_grid, opt.loss).second;

    report.transfer_loss = report.e_st - report.e_tt_baseline;
    report.transfer_ratio = report.e_st / report.e_tt_baseline;

    PadOptions pad{opt.c_grid, opt.pad_seed, opt.loss};
    report.pad_before = proxy_a_distance(source_X, target_X, pad);
    report.pad_after = proxy_a_distance(source_rep, target_rep, pad);

    report.train_seconds = opt.train_seconds;
    report.p = model.p;
    report.l = model.layer_count();
    return report;
}

/// Dataset-level convenience: the labeled examples of each domain are
/// matrixified under the vocabulary; the target's labels score only.
inline EvalReport transfer_eval(const StackModel& model, const Vocabulary& vocab,
                                const DomainDataset& source, const DomainDataset& target,
                                const TransferOptions& opt = {}) {
    const auto labeled_only = [](const DomainDataset& ds) {
        DomainDataset out;
        out.domain_id = ds.domain_id;
        for (const auto& ex : ds.examples)
            if (ex.label != 0) out.examples.push_back(ex);
        return out;
    };
    const DomainDataset src = labeled_only(source);
    const DomainDataset tgt = labeled_only(target);
    if (src.examples.empty())
        throw DataError("transfer_eval: source domain has no labeled examples");
    TransferOptions options = opt;
    if (options.task.empty()) options.task = source.domain_id + "->" + target.domain_id;
    return transfer_eval(model, to_matrix({src}, vocab), labels_of({src}),
                         to_matrix({tgt}, vocab), labels_of({tgt}), options);
}

} // namespace msda
