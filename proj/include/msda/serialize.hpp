#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "msda/classifier.hpp"
#include "msda/corpus.hpp"
#include "msda/error.hpp"
#include "msda/mda.hpp"
#include "msda/stack.hpp"

namespace msda {

// Model files carry a one-line text header (decimal fields, 17
// significant digits so doubles round-trip exactly) followed by raw
// 64-bit little-endian floating point payloads in row-major order.
static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; this platform is not");

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_header_double(const std::string& token, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad " + what + " field '" + token + "' in model header");
    }
}

inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = m;
    out.write(reinterpret_cast<const char*>(row_major.data()),
              static_cast<std::streamsize>(sizeof(double) * row_major.size()));
}

inline Eigen::MatrixXd read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols,
                                   const std::string& what) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw ParseError("truncated payload while reading " + what);
    return m;
}

inline std::vector<std::string> header_tokens(std::istream& in, const std::string& magic) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing " + magic + " header");
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    if (tokens.empty() || tokens.front() != magic)
        throw ParseError("expected " + magic + " header, got '" + line + "'");
    return tokens;
}

} // namespace detail

/// Writes through a temporary file in the same directory and renames
/// into place, so partial outputs are never left behind.
template <class Fn>
void atomic_write(const std::string& path, Fn&& writer) {
    const std::string tmp = path + ".tmp";
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw ParseError("cannot open " + tmp + " for writing");
            writer(out);
            out.flush();
            if (!out) throw ParseError("write failed for " + tmp);
        }
        std::filesystem::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
}

// --- DenoisingMap: "MSDA1 <d_in> <d_out> <p> <ridge>" + W row-major ---

inline void save_map(std::ostream& out, const DenoisingMap& map) {
    out << "MSDA1 " << map.d_in() << ' ' << map.d_out() << ' '
        << detail::format_double(map.p) << ' ' << detail::format_double(map.ridge) << '\n';
    detail::write_matrix(out, map.W);
}

inline DenoisingMap load_map(std::istream& in) {
    const auto tokens = detail::header_tokens(in, "MSDA1");
    if (tokens.size() != 5) throw ParseError("MSDA1 header needs d_in d_out p ridge");
    const auto d_in = static_cast<Eigen::Index>(std::stoull(tokens[1]));
    const auto d_out = static_cast<Eigen::Index>(std::stoull(tokens[2]));
    DenoisingMap map;
    map.p = detail::parse_header_double(tokens[3], "p");
    map.ridge = detail::parse_header_double(tokens[4], "ridge");
    map.W = detail::read_matrix(in, d_out, d_in + 1, "denoising map");
    return map;
}

inline void save_map_file(const std::string& path, const DenoisingMap& map) {
    atomic_write(path, [&](std::ostream& out) { save_map(out, map); });
}

inline DenoisingMap load_map_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    return load_map(in);
}

// --- BlockLayer: "MSDA1B <r> <seed> <d> <blocks>" + plan + block maps ---

inline void save_block_layer(std::ostream& out, const BlockLayer& layer) {
    out << "MSDA1B " << layer.plan.r << ' ' << layer.plan.seed << ' ' << layer.plan.dim()
        << ' ' << layer.plan.block_count() << '\n';
    out << "perm";
    for (std::uint32_t f : layer.plan.permutation) out << ' ' << f;
    out << "\nbounds";
    for (std::size_t b : layer.plan.boundaries) out << ' ' << b;
    out << '\n';
    for (const auto& map : layer.maps) save_map(out, map);
}

inline BlockLayer load_block_layer(std::istream& in) {
    const auto tokens = detail::header_tokens(in, "MSDA1B");
    if (tokens.size() != 5) throw ParseError("MSDA1B header needs r seed d blocks");
    BlockLayer layer;
    layer.plan.r = std::stoull(tokens[1]);
    layer.plan.seed = std::stoull(tokens[2]);
    const std::size_t d = std::stoull(tokens[3]);
    const std::size_t blocks = std::stoull(tokens[4]);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing block permutation");
    std::istringstream perm_ss(line);
    std::string tag;
    perm_ss >> tag;
    if (tag != "perm") throw ParseError("expected perm line in block layer");
    layer.plan.permutation.reserve(d);
    std::uint32_t f;
    while (perm_ss >> f) layer.plan.permutation.push_back(f);
    if (layer.plan.permutation.size() != d)
        throw ParseError("block permutation length does not match d");

    if (!std::getline(in, line)) throw ParseError("missing block boundaries");
    std::istringstream bounds_ss(line);
    bounds_ss >> tag;
    if (tag != "bounds") throw ParseError("expected bounds line in block layer");
    std::size_t b;
    while (bounds_ss >> b) layer.plan.boundaries.push_back(b);
    if (layer.plan.boundaries.size() != blocks + 1)
        throw ParseError("block boundary count does not match block count");

    layer.maps.reserve(blocks);
    for (std::size_t s = 0; s < blocks; ++s) layer.maps.push_back(load_map(in));
    return layer;
}

// --- StackModel: "MSDA1S <l> <p> <ridge> <squash> <has_block>" +
//     "dims <d_in d_out per layer>" + layer payloads in order ---

inline void save_stack(std::ostream& out, const StackModel& model) {
    out << "MSDA1S " << model.layer_count() << ' ' << detail::format_double(model.p) << ' '
        << detail::format_double(model.ridge) << ' '
        << (model.squash == Squash::Tanh ? "tanh" : "identity") << ' '
        << (model.block_first ? 1 : 0) << '\n';
    out << "dims";
    if (model.block_first)
        out << ' ' << model.block_first->d_in() << ' ' << model.block_first->r();
    for (const auto& layer : model.layers) out << ' ' << layer.d_in() << ' ' << layer.d_out();
    out << '\n';
    if (model.block_first) save_block_layer(out, *model.block_first);
    for (const auto& layer : model.layers) save_map(out, layer);
}

inline StackModel load_stack(std::istream& in) {
    const auto tokens = detail::header_tokens(in, "MSDA1S");
    if (tokens.size() != 6) throw ParseError("MSDA1S header needs l p ridge squash has_block");
    StackModel model;
    const std::size_t l = std::stoull(tokens[1]);
    model.p = detail::parse_header_double(tokens[2], "p");
    model.ridge = detail::parse_header_double(tokens[3], "ridge");
    if (tokens[4] == "tanh") model.squash = Squash::Tanh;
    else if (tokens[4] == "identity") model.squash = Squash::Identity;
    else throw ParseError("unknown squash tag '" + tokens[4] + "'");
    const bool has_block = tokens[5] == "1";

    std::string dims_line;
    if (!std::getline(in, dims_line)) throw ParseError("missing dims line");
    std::istringstream dims_ss(dims_line);
    std::string tag;
    dims_ss >> tag;
    if (tag != "dims") throw ParseError("expected dims line in stack header");
    std::vector<std::size_t> dims;
    std::size_t v;
    while (dims_ss >> v) dims.push_back(v);
    if (dims.size() != 2 * l) throw ParseError("dims line does not match layer count");

    if (has_block) {
        if (l == 0) throw ParseError("blockwise stack with zero layers");
        model.block_first = load_block_layer(in);
    }
    const std::size_t standard = l - (has_block ? 1 : 0);
    model.layers.reserve(standard);
    for (std::size_t t = 0; t < standard; ++t) model.layers.push_back(load_map(in));

    for (std::size_t t = 0; t < l; ++t) {
        const std::size_t d_in = dims[2 * t], d_out = dims[2 * t + 1];
        const bool is_block = has_block && t == 0;
        const std::size_t got_in = is_block ? model.block_first->d_in()
                                            : model.layers[t - (has_block ? 1 : 0)].d_in();
        const std::size_t got_out = is_block ? model.block_first->r()
                                             : model.layers[t - (has_block ? 1 : 0)].d_out();
        if (got_in != d_in || got_out != d_out)
            throw ParseError("layer payload dims disagree with header manifest");
    }
    return model;
}

inline void save_stack_file(const std::string& path, const StackModel& model) {
    atomic_write(path, [&](std::ostream& out) { save_stack(out, model); });
}

inline StackModel load_stack_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    return load_stack(in);
}

// --- LinearModel: "LINM1 <loss> <C> <d_rep>" + weights + bias ---

inline void save_linear(std::ostream& out, const LinearModel& model) {
    out << "LINM1 " << (model.loss == Loss::SquaredHinge ? "squared_hinge" : "logistic")
        << ' ' << detail::format_double(model.c) << ' ' << model.w.size() << '\n';
    out.write(reinterpret_cast<const char*>(model.w.data()),
              static_cast<std::streamsize>(sizeof(double) * model.w.size()));
    out.write(reinterpret_cast<const char*>(&model.bias), sizeof(double));
}

inline LinearModel load_linear(std::istream& in) {
    const auto tokens = detail::header_tokens(in, "LINM1");
    if (tokens.size() != 4) throw ParseError("LINM1 header needs loss C d_rep");
    LinearModel model;
    if (tokens[1] == "squared_hinge") model.loss = Loss::SquaredHinge;
    else if (tokens[1] == "logistic") model.loss = Loss::Logistic;
    else throw ParseError("unknown loss tag '" + tokens[1] + "'");
    model.c = detail::parse_header_double(tokens[2], "C");
    const auto d = static_cast<Eigen::Index>(std::stoull(tokens[3]));
    model.w.resize(d);
    in.read(reinterpret_cast<char*>(model.w.data()),
            static_cast<std::streamsize>(sizeof(double) * d));
    in.read(reinterpret_cast<char*>(&model.bias), sizeof(double));
    if (!in) throw ParseError("truncated payload while reading linear model");
    return model;
}

inline void save_linear_file(const std::string& path, const LinearModel& model) {
    atomic_write(path, [&](std::ostream& out) { save_linear(out, model); });
}

inline LinearModel load_linear_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    return load_linear(in);
}

/// Vocabulary sidecar files share the atomic-write discipline.
inline void save_vocabulary_file(const std::string& path, const Vocabulary& vocab) {
    atomic_write(path, [&](std::ostream& out) { vocab.save(out); });
}

} // namespace msda
