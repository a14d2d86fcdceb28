#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "msda/data_matrix.hpp"
#include "msda/error.hpp"

namespace msda {

/// Sentiment label: +1, -1, or 0 for unlabeled.
struct Example {
    SparseColumn features; // (source feature id, count), sorted by id
    int label = 0;
};

struct DomainDataset {
    std::string domain_id;
    std::vector<Example> examples;

    std::size_t labeled_count() const {
        std::size_t c = 0;
        for (const auto& e : examples) c += e.label != 0;
        return c;
    }
};

namespace detail {

inline std::string_view strip_comment(std::string_view line) {
    const auto pos = line.find('#');
    return pos == std::string_view::npos ? line : line.substr(0, pos);
}

inline bool parse_double(std::string_view text, double& out) {
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

inline bool parse_label(std::string_view text, int& out) {
    if (text == "+1" || text == "1") { out = 1; return true; }
    if (text == "-1") { out = -1; return true; }
    if (text == "0") { out = 0; return true; }
    return false;
}

} // namespace detail

/// Parses the sparse example format:
///   <label> <idx>:<value> <idx>:<value> ...
/// one example per line, label in {+1, -1, 0} (0 = unlabeled), '#' starts
/// a comment, blank lines are skipped. Duplicate indices accumulate.
inline DomainDataset parse_sparse_stream(std::istream& in, std::string domain_id,
                                         const std::string& source_name) {
    DomainDataset ds;
    ds.domain_id = std::move(domain_id);
    std::string line;
    std::size_t line_no = 0;
    const auto fail = [&](const std::string& what) -> ParseError {
        return ParseError(source_name + ":" + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = detail::strip_comment(line);
        std::istringstream tokens{std::string(body)};
        std::string tok;
        if (!(tokens >> tok)) continue; // blank or comment-only line

        Example ex;
        if (!detail::parse_label(tok, ex.label))
            throw fail("expected label +1, -1 or 0, got '" + tok + "'");

        std::map<std::uint32_t, double> acc;
        while (tokens >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
                throw fail("expected <idx>:<value>, got '" + tok + "'");
            const std::string_view idx_part{tok.data(), colon};
            const std::string_view val_part{tok.data() + colon + 1, tok.size() - colon - 1};
            if (idx_part.front() == '-')
                throw fail("negative feature index in '" + tok + "'");
            std::uint32_t idx = 0;
            {
                const char* end = idx_part.data() + idx_part.size();
                auto [ptr, ec] = std::from_chars(idx_part.data(), end, idx);
                if (ec != std::errc{} || ptr != end)
                    throw fail("bad feature index in '" + tok + "'");
            }
            double val = 0.0;
            if (!detail::parse_double(val_part, val) || !std::isfinite(val))
                throw fail("bad feature value in '" + tok + "'");
            acc[idx] += val;
        }
        ex.features.assign(acc.begin(), acc.end());
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

inline DomainDataset parse_sparse_file(const std::string& path, std::string domain_id) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    return parse_sparse_stream(in, std::move(domain_id), path);
}

/// One dataset per file, in order; labels preserved, unlabeled rows allowed.
inline std::vector<DomainDataset> ingest(const std::vector<std::string>& paths,
                                         const std::vector<std::string>& domain_ids) {
    if (paths.size() != domain_ids.size())
        throw InvalidArgument("ingest: one domain id per file required");
    std::vector<DomainDataset> out;
    out.reserve(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i)
        out.push_back(parse_sparse_file(paths[i], domain_ids[i]));
    return out;
}

/// Shared vocabulary over the pooled corpus.
///
/// Terms are the decimal renderings of the source feature ids. Compact
/// indices 0..d-1 are assigned in frequency rank order (descending total
/// count, ties broken by lexicographic term order), so index 0 is the
/// most frequent term.
class Vocabulary {
public:
    Vocabulary() = default;

    Vocabulary(std::vector<std::uint32_t> source_ids, std::vector<double> counts)
        : source_ids_(std::move(source_ids)), counts_(std::move(counts)) {
        if (source_ids_.size() != counts_.size())
            throw InvalidArgument("vocabulary: ids/counts size mismatch");
        for (std::size_t i = 0; i < source_ids_.size(); ++i) {
            if (!to_compact_.emplace(source_ids_[i], static_cast<std::uint32_t>(i)).second)
                throw InvalidArgument("vocabulary: duplicate term");
        }
        rebuild_rank();
    }

    std::size_t size() const { return source_ids_.size(); }

    std::string term(std::size_t compact) const { return std::to_string(source_ids_[compact]); }
    std::uint32_t source_id(std::size_t compact) const { return source_ids_[compact]; }
    double count(std::size_t compact) const { return counts_[compact]; }

    /// Compact index for a source feature id, if in vocabulary.
    std::optional<std::uint32_t> lookup(std::uint32_t source_id) const {
        const auto it = to_compact_.find(source_id);
        if (it == to_compact_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::uint32_t> find(const std::string& term) const {
        std::uint32_t id = 0;
        const char* end = term.data() + term.size();
        auto [ptr, ec] = std::from_chars(term.data(), end, id);
        if (ec != std::errc{} || ptr != end) return std::nullopt;
        return lookup(id);
    }

    /// Compact indices in descending frequency order.
    const std::vector<std::uint32_t>& rank_order() const { return rank_; }

    /// Compact indices of the r most frequent terms.
    std::vector<std::uint32_t> top(std::size_t r) const {
        if (r > size()) throw InvalidArgument("top: r exceeds vocabulary size");
        return {rank_.begin(), rank_.begin() + static_cast<std::ptrdiff_t>(r)};
    }

    /// Sidecar format: term<TAB>index<TAB>count, one per line.
    void save(std::ostream& out) const {
        for (std::size_t i = 0; i < size(); ++i) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", counts_[i]);
            out << term(i) << '\t' << i << '\t' << buf << '\n';
        }
    }

    static Vocabulary load(std::istream& in, const std::string& source_name) {
        std::string line;
        std::size_t line_no = 0;
        std::vector<std::pair<std::uint32_t, std::pair<std::uint32_t, double>>> rows;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string term, index_s, count_s;
            if (!std::getline(ss, term, '\t') || !std::getline(ss, index_s, '\t') ||
                !std::getline(ss, count_s))
                throw ParseError(source_name + ":" + std::to_string(line_no) +
                                 ": expected term<TAB>index<TAB>count");
            std::uint32_t source_id = 0, index = 0;
            double count = 0.0;
            const auto parse_u32 = [&](const std::string& s, std::uint32_t& v) {
                const char* end = s.data() + s.size();
                auto [ptr, ec] = std::from_chars(s.data(), end, v);
                return ec == std::errc{} && ptr == end;
            };
            if (!parse_u32(term, source_id) || !parse_u32(index_s, index) ||
                !detail::parse_double(count_s, count))
                throw ParseError(source_name + ":" + std::to_string(line_no) +
                                 ": malformed vocabulary row");
            rows.push_back({index, {source_id, count}});
        }
        std::sort(rows.begin(), rows.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<std::uint32_t> ids(rows.size());
        std::vector<double> counts(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].first != i)
                throw ParseError(source_name + ": vocabulary indices are not 0.." +
                                 std::to_string(rows.size() - 1));
            ids[i] = rows[i].second.first;
            counts[i] = rows[i].second.second;
        }
        return Vocabulary(std::move(ids), std::move(counts));
    }

    static Vocabulary load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open " + path);
        return load(in, path);
    }

private:
    void rebuild_rank() {
        rank_.resize(size());
        for (std::size_t i = 0; i < size(); ++i) rank_[i] = static_cast<std::uint32_t>(i);
        std::sort(rank_.begin(), rank_.end(), [this](std::uint32_t a, std::uint32_t b) {
            if (counts_[a] != counts_[b]) return counts_[a] > counts_[b];
            return term(a) < term(b);
        });
    }

    std::vector<std::uint32_t> source_ids_;
    std::vector<double> counts_;
    std::unordered_map<std::uint32_t, std::uint32_t> to_compact_;
    std::vector<std::uint32_t> rank_;
};

/// Builds the vocabulary of the min(max_features, distinct terms) most
/// frequent terms over the pooled corpus. Frequency is the total count
/// across all examples; ties break lexicographically on the term.
/// max_features = 0 means unlimited.
inline Vocabulary build_vocabulary(const std::vector<DomainDataset>& datasets,
                                   std::size_t max_features = 0) {
    std::size_t n = 0;
    for (const auto& ds : datasets) n += ds.examples.size();
    if (n == 0) throw DataError("empty corpus: no examples in any dataset");

    std::unordered_map<std::uint32_t, double> totals;
    for (const auto& ds : datasets)
        for (const auto& ex : ds.examples)
            for (const auto& [idx, val] : ex.features) totals[idx] += val;

    std::vector<std::pair<std::uint32_t, double>> entries(totals.begin(), totals.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return std::to_string(a.first) < std::to_string(b.first);
    });
    if (max_features != 0 && entries.size() > max_features)
        entries.resize(max_features);

    std::vector<std::uint32_t> ids(entries.size());
    std::vector<double> counts(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        ids[i] = entries[i].first;
        counts[i] = entries[i].second;
    }
    return Vocabulary(std::move(ids), std::move(counts));
}

/// Zero-padded design matrix: d = vocabulary size, columns ordered by
/// (dataset order, example order), out-of-vocabulary terms dropped.
inline DataMatrix to_matrix(const std::vector<DomainDataset>& datasets, const Vocabulary& vocab) {
    std::vector<SparseColumn> cols;
    for (const auto& ds : datasets) {
        for (const auto& ex : ds.examples) {
            SparseColumn col;
            col.reserve(ex.features.size());
            for (const auto& [idx, val] : ex.features)
                if (const auto compact = vocab.lookup(idx))
                    col.push_back({*compact, val});
            std::sort(col.begin(), col.end());
            cols.push_back(std::move(col));
        }
    }
    return DataMatrix::make_sparse(vocab.size(), std::move(cols), DataMatrix::Kind::Raw);
}

/// Labels in the same column order as to_matrix.
inline std::vector<int> labels_of(const std::vector<DomainDataset>& datasets) {
    std::vector<int> out;
    for (const auto& ds : datasets)
        for (const auto& ex : ds.examples) out.push_back(ex.label);
    return out;
}

} // namespace msda
