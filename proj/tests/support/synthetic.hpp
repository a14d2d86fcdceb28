#pragma once

// Seeded synthetic corpora for pipeline tests.

#include <cstdint>
#include <map>
#include <random>

#include "msda/corpus.hpp"
#include "msda/rng.hpp"

namespace msda::testsupport {

// Vocabulary layout of the domain-shift corpus (200 terms):
//   0..9    shared positive sentiment      10..19  shared negative sentiment
//   20..44  source-only positive           45..69  source-only negative
//   70..94  target-only positive           95..119 target-only negative
//   120..199 neutral background, shared by both domains
//
// Every document carries strong domain-exclusive sentiment tokens that
// co-occur with a weak shared sentiment token, so a raw-bow classifier
// trained on the source transfers poorly while a denoising
// representation can bridge the exclusive terms through the shared
// ones.
inline constexpr std::size_t kShiftVocabSize = 200;

inline Example make_shift_doc(std::mt19937_64& gen, int label, bool is_source) {
    std::map<std::uint32_t, double> counts;
    const auto draw = [&](std::uint32_t lo, std::uint32_t size) {
        counts[lo + static_cast<std::uint32_t>(uniform_below(gen, size))] += 1.0;
    };
    for (int t = 0; t < 4; ++t) draw(120, 80);
    const bool positive = label > 0;
    const std::uint32_t excl_pos = is_source ? 20 : 70;
    const std::uint32_t excl_neg = is_source ? 45 : 95;
    for (int t = 0; t < 5; ++t) {
        const bool flipped = uniform01(gen) < 0.15;
        const bool token_positive = flipped ? !positive : positive;
        draw(token_positive ? excl_pos : excl_neg, 25);
    }
    if (uniform01(gen) < 0.6) draw(positive ? 0 : 10, 10);
    Example ex;
    ex.label = label;
    ex.features.assign(counts.begin(), counts.end());
    return ex;
}

struct ShiftCorpus {
    DomainDataset source;      // labeled
    DomainDataset target_pool; // unlabeled
    DomainDataset target_eval; // labeled, held out of representation training
};

inline ShiftCorpus make_shift_corpus(std::uint64_t seed, std::size_t n_source = 1000,
                                     std::size_t n_target_pool = 1000,
                                     std::size_t n_target_eval = 500) {
    std::mt19937_64 gen(seed);
    ShiftCorpus corpus;
    corpus.source.domain_id = "src";
    corpus.target_pool.domain_id = "tgt";
    corpus.target_eval.domain_id = "tgt";
    for (std::size_t i = 0; i < n_source; ++i)
        corpus.source.examples.push_back(make_shift_doc(gen, i % 2 ? 1 : -1, true));
    for (std::size_t i = 0; i < n_target_pool; ++i) {
        Example ex = make_shift_doc(gen, i % 2 ? 1 : -1, false);
        ex.label = 0;
        corpus.target_pool.examples.push_back(std::move(ex));
    }
    for (std::size_t i = 0; i < n_target_eval; ++i)
        corpus.target_eval.examples.push_back(make_shift_doc(gen, i % 2 ? 1 : -1, false));
    return corpus;
}

/// Documents drawn from one fixed skewed distribution over `dim` terms;
/// two datasets built this way are identically distributed.
inline DomainDataset make_generic_domain(std::string id, std::size_t n, std::size_t dim,
                                         std::uint32_t term_offset, std::mt19937_64& gen) {
    DomainDataset ds;
    ds.domain_id = std::move(id);
    for (std::size_t i = 0; i < n; ++i) {
        std::map<std::uint32_t, double> counts;
        for (int t = 0; t < 8; ++t) {
            const double u = uniform01(gen);
            counts[term_offset + static_cast<std::uint32_t>(u * u * dim)] += 1.0;
        }
        Example ex;
        ex.label = i % 2 ? 1 : -1;
        ex.features.assign(counts.begin(), counts.end());
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

/// Two domains over the same 100-term support, same distribution.
inline std::pair<DomainDataset, DomainDataset> make_identical_domains(std::size_t n,
                                                                      std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    auto a = make_generic_domain("a", n, 100, 0, gen);
    auto b = make_generic_domain("b", n, 100, 0, gen);
    return {std::move(a), std::move(b)};
}

/// Two domains supported on disjoint feature ranges.
inline std::pair<DomainDataset, DomainDataset> make_disjoint_domains(std::size_t n,
                                                                     std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    auto a = make_generic_domain("a", n, 100, 0, gen);
    auto b = make_generic_domain("b", n, 100, 100, gen);
    return {std::move(a), std::move(b)};
}

} // namespace msda::testsupport
