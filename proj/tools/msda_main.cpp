// msda: marginalized stacked denoising autoencoders for domain
// adaptation. Subcommands: vocab, train, transform, adapt, pad, cv.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "msda/msda.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct InputSpec {
    std::string path;
    std::string domain_id;
};

// --input accepts <path>=<domain_id>; without '=', the id is the file stem.
std::vector<InputSpec> parse_inputs(const std::vector<std::string>& raw) {
    std::vector<InputSpec> specs;
    for (const auto& entry : raw) {
        const auto eq = entry.rfind('=');
        InputSpec spec;
        if (eq == std::string::npos) {
            spec.path = entry;
            spec.domain_id = std::filesystem::path(entry).stem().string();
        } else {
            spec.path = entry.substr(0, eq);
            spec.domain_id = entry.substr(eq + 1);
        }
        if (spec.path.empty() || spec.domain_id.empty())
            throw msda::InvalidArgument("bad --input '" + entry + "', expected <path>=<id>");
        specs.push_back(std::move(spec));
    }
    if (specs.empty()) throw msda::InvalidArgument("at least one --input is required");
    return specs;
}

std::vector<msda::DomainDataset> load_inputs(const std::vector<InputSpec>& specs) {
    std::vector<std::string> paths, ids;
    for (const auto& s : specs) {
        paths.push_back(s.path);
        ids.push_back(s.domain_id);
    }
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = i + 1; j < ids.size(); ++j)
            if (ids[i] == ids[j])
                throw msda::InvalidArgument("duplicate domain id '" + ids[i] + "'");
    return msda::ingest(paths, ids);
}

const msda::DomainDataset& find_domain(const std::vector<msda::DomainDataset>& datasets,
                                       const std::string& id) {
    for (const auto& ds : datasets)
        if (ds.domain_id == id) return ds;
    throw msda::DataError("unknown domain id '" + id + "'");
}

// Shared hyperparameter / seed options.
struct CommonConfig {
    std::vector<std::string> inputs;
    std::size_t max_features = 0; // 0 = unlimited
    double p = 0.5;
    std::size_t layers = 1;
    double ridge = 1e-5;
    std::string squash = "tanh";
    bool blockwise = false;
    std::size_t r = 5000;
    std::size_t block_size = 0;      // 0 = r
    std::size_t dense_budget = 8000; // beyond this d the blockwise layer is required
    std::uint64_t seed_plan = 1;
    std::uint64_t seed_folds = 2;
    std::uint64_t seed_pad = 3;
    std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0};
    std::vector<double> p_grid{0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<std::size_t> l_grid{1, 3, 5};
    unsigned threads = 1;
};

void add_input_option(CLI::App& cmd, CommonConfig& cfg) {
    cmd.add_option("--input", cfg.inputs, "input file as <path>=<domain_id>; repeatable")
        ->required();
}

void add_vocab_options(CLI::App& cmd, CommonConfig& cfg) {
    cmd.add_option("--max-features", cfg.max_features,
                   "keep only the k most frequent terms (0 = unlimited)");
}

void add_representation_options(CLI::App& cmd, CommonConfig& cfg) {
    cmd.add_option("--ridge", cfg.ridge, "ridge added to the scatter diagonal")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--squash", cfg.squash, "squashing function: tanh or identity")
        ->check(CLI::IsMember({"tanh", "identity"}));
    cmd.add_flag("--blockwise", cfg.blockwise, "force the blockwise first layer");
    cmd.add_option("--r", cfg.r, "blockwise target dimension (most frequent features)");
    cmd.add_option("--block-size", cfg.block_size, "features per block (0 = r)");
    cmd.add_option("--seed-plan", cfg.seed_plan, "seed for the block permutation");
    cmd.add_option("--threads", cfg.threads, "worker thread cap");
}

void add_eval_options(CLI::App& cmd, CommonConfig& cfg) {
    cmd.add_option("--c-grid", cfg.c_grid, "classifier C grid");
    cmd.add_option("--seed-folds", cfg.seed_folds, "seed for cross-validation folds");
    cmd.add_option("--seed-pad", cfg.seed_pad, "seed for the PAD train/test split");
}

msda::Squash squash_of(const CommonConfig& cfg) {
    return cfg.squash == "identity" ? msda::Squash::Identity : msda::Squash::Tanh;
}

// Standard mode handles the dense (d+1)^2 scatter up to this dimension;
// beyond it the blockwise first layer is required.
constexpr std::size_t kDenseBudget = 8000;

bool use_blockwise(const CommonConfig& cfg, std::size_t d) {
    return cfg.blockwise || d > kDenseBudget;
}

msda::StackModel train_model(const CommonConfig& cfg, const msda::Vocabulary& vocab,
                             const msda::DataMatrix& pooled, double p, std::size_t layers) {
    if (!use_blockwise(cfg, vocab.size()))
        return msda::train_stack(pooled, p, layers, cfg.ridge, squash_of(cfg));
    const std::size_t r = std::min(cfg.r, vocab.size());
    if (cfg.max_features != 0 && r > cfg.max_features)
        throw msda::InvalidArgument("blockwise r exceeds --max-features");
    const std::size_t block_size = cfg.block_size == 0 ? r : cfg.block_size;
    const auto plan = msda::make_plan(vocab.size(), r, block_size, cfg.seed_plan);
    const auto top = vocab.top(r);
    return msda::train_stack_blockwise(pooled, top, plan, p, layers, cfg.ridge,
                                       squash_of(cfg));
}

void write_report_row(const std::string& path, const msda::EvalReport& report) {
    static const char* kHeader =
        "task\te_st\te_tt_b\tloss\tratio\tpad_before\tpad_after\ttrain_seconds";
    std::vector<std::string> lines;
    if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) lines.emplace_back(kHeader);
    std::ostringstream row;
    row << report.task << '\t' << format_short(report.e_st) << '\t'
        << format_short(report.e_tt_baseline) << '\t' << format_short(report.transfer_loss)
        << '\t' << format_short(report.transfer_ratio) << '\t'
        << format_short(report.pad_before) << '\t' << format_short(report.pad_after) << '\t'
        << format_short(report.train_seconds);
    lines.push_back(row.str());
    msda::atomic_write(path, [&](std::ostream& out) {
        for (const auto& l : lines) out << l << '\n';
    });
}

void print_report(const msda::EvalReport& report) {
    std::cout << "task: " << report.task << "\n"
              << "e_st: " << format_short(report.e_st) << "\n"
              << "e_tt_baseline: " << format_short(report.e_tt_baseline) << "\n"
              << "transfer_loss: " << format_short(report.transfer_loss) << "\n"
              << "transfer_ratio: " << format_short(report.transfer_ratio) << "\n"
              << "pad_before: " << format_short(report.pad_before) << "\n"
              << "pad_after: " << format_short(report.pad_after) << "\n"
              << "train_seconds: " << format_short(report.train_seconds) << "\n"
              << "p: " << format_short(report.p) << "\n"
              << "l: " << report.l << "\n";
}

int cmd_vocab(const CommonConfig& cfg, const std::string& out_path) {
    const auto datasets = load_inputs(parse_inputs(cfg.inputs));
    const auto vocab = msda::build_vocabulary(datasets, cfg.max_features);
    msda::save_vocabulary_file(out_path, vocab);
    std::cout << "vocabulary_size: " << vocab.size() << "\n";
    return 0;
}

int cmd_train(const CommonConfig& cfg, const std::string& out_path,
              std::string vocab_out) {
    const auto datasets = load_inputs(parse_inputs(cfg.inputs));
    const auto vocab = msda::build_vocabulary(datasets, cfg.max_features);
    const auto pooled = msda::to_matrix(datasets, vocab);

    const auto start = Clock::now();
    const auto model = train_model(cfg, vocab, pooled, cfg.p, cfg.layers);
    const double train_seconds = seconds_since(start);

    if (vocab_out.empty()) vocab_out = out_path + ".vocab.tsv";
    msda::save_stack_file(out_path, model);
    msda::save_vocabulary_file(vocab_out, vocab);
    std::cout << "vocabulary_size: " << vocab.size() << "\n"
              << "blockwise: " << (model.block_first ? 1 : 0) << "\n"
              << "training_seconds: " << format_short(train_seconds) << "\n";
    return 0;
}

int cmd_transform(const CommonConfig& cfg, const std::string& model_path,
                  const std::string& vocab_path, const std::string& out_path) {
    const auto model = msda::load_stack_file(model_path);
    const auto vocab = msda::Vocabulary::load_file(vocab_path);
    if (vocab.size() != model.input_dim())
        throw msda::ShapeError("vocabulary size does not match model input dimension");
    const auto datasets = load_inputs(parse_inputs(cfg.inputs));
    const auto X = msda::to_matrix(datasets, vocab);
    const auto labels = msda::labels_of(datasets);
    const auto rep = msda::represent(model, X);
    const auto& dense = rep.dense_data();

    msda::atomic_write(out_path, [&](std::ostream& out) {
        for (Eigen::Index j = 0; j < dense.cols(); ++j) {
            out << (labels[static_cast<std::size_t>(j)] > 0
                        ? "+1"
                        : labels[static_cast<std::size_t>(j)] < 0 ? "-1" : "0");
            for (Eigen::Index i = 0; i < dense.rows(); ++i)
                out << ' ' << i << ':' << format_g(dense(i, j));
            out << '\n';
        }
    });
    std::cout << "transformed: " << dense.cols() << " examples, dimension " << dense.rows()
              << "\n";
    return 0;
}

int cmd_adapt(const CommonConfig& cfg, const std::string& source_id,
              const std::string& target_id, const std::string& model_path,
              const std::string& report_path, bool p_given, bool l_given) {
    const auto datasets = load_inputs(parse_inputs(cfg.inputs));
    const auto& source = find_domain(datasets, source_id);
    const auto& target = find_domain(datasets, target_id);
    if (source.labeled_count() == 0)
        throw msda::DataError("source domain '" + source_id + "' has no labeled examples");

    const auto vocab = msda::build_vocabulary(datasets, cfg.max_features);

    // Pool for representation learning: everything except the labeled
    // target examples, which are held out for evaluation.
    std::vector<msda::DomainDataset> pool_sets;
    for (const auto& ds : datasets) {
        if (ds.domain_id == target_id) {
            msda::DomainDataset unlabeled;
            unlabeled.domain_id = ds.domain_id;
            for (const auto& ex : ds.examples)
                if (ex.label == 0) unlabeled.examples.push_back(ex);
            if (!unlabeled.examples.empty()) pool_sets.push_back(std::move(unlabeled));
        } else {
            pool_sets.push_back(ds);
        }
    }
    if (pool_sets.empty()) throw msda::DataError("no examples available for pooling");
    const auto pooled = msda::to_matrix(pool_sets, vocab);

    msda::DomainDataset source_labeled;
    source_labeled.domain_id = source.domain_id;
    for (const auto& ex : source.examples)
        if (ex.label != 0) source_labeled.examples.push_back(ex);
    const auto source_X = msda::to_matrix({source_labeled}, vocab);
    const auto source_y = msda::labels_of({source_labeled});

    double p = cfg.p;
    std::size_t layers = cfg.layers;
    msda::StackModel model;
    double train_seconds = 0.0;
    if (!model_path.empty()) {
        model = msda::load_stack_file(model_path);
        p = model.p;
        layers = model.layer_count();
        train_seconds = std::numeric_limits<double>::quiet_NaN();
    } else {
        if (!p_given || !l_given) {
            if (use_blockwise(cfg, vocab.size()))
                throw msda::InvalidArgument(
                    "cross-validated p/l is not supported in blockwise mode; pass --p and "
                    "--layers");
            msda::CvOptions cv_opt;
            cv_opt.c_grid = cfg.c_grid;
            cv_opt.fold_seed = cfg.seed_folds;
            cv_opt.ridge = cfg.ridge;
            cv_opt.squash = squash_of(cfg);
            cv_opt.threads = cfg.threads;
            const auto cv = msda::cross_validate(pooled, source_X, source_y, cfg.p_grid,
                                                 cfg.l_grid, cv_opt);
            p = cv.p_star;
            layers = cv.l_star;
            std::cout << "selected_by_cv: p=" << format_short(p) << " l=" << layers << "\n";
        }
        const auto start = Clock::now();
        model = train_model(cfg, vocab, pooled, p, layers);
        train_seconds = seconds_since(start);
    }

    msda::TransferOptions opt;
    opt.task = source_id + "->" + target_id;
    opt.c_grid = cfg.c_grid;
    opt.fold_seed = cfg.seed_folds;
    opt.pad_seed = cfg.seed_pad;
    opt.train_seconds = train_seconds;
    const auto report = msda::transfer_eval(model, vocab, source_labeled, target, opt);

    print_report(report);
    if (!report_path.empty()) write_report_row(report_path, report);
    return 0;
}

int cmd_pad(const CommonConfig& cfg, const std::string& id_a, const std::string& id_b,
            const std::string& representation, const std::string& model_path,
            const std::string& vocab_path) {
    const auto datasets = load_inputs(parse_inputs(cfg.inputs));
    const auto& domain_a = find_domain(datasets, id_a);
    const auto& domain_b = find_domain(datasets, id_b);
    const auto vocab = vocab_path.empty() ? msda::build_vocabulary(datasets, cfg.max_features)
                                          : msda::Vocabulary::load_file(vocab_path);
    const auto A = msda::to_matrix({domain_a}, vocab);
    const auto B = msda::to_matrix({domain_b}, vocab);

    msda::PadOptions opt;
    opt.c_grid = cfg.c_grid;
    opt.seed = cfg.seed_pad;

    const bool want_raw = representation == "raw" || representation == "both";
    const bool want_msda = representation == "msda" || representation == "both";
    if (want_raw)
        std::cout << "pad_raw: " << format_short(msda::proxy_a_distance(A, B, opt)) << "\n";
    if (want_msda) {
        if (model_path.empty())
            throw msda::InvalidArgument("--model is required for the msda representation");
        const auto model = msda::load_stack_file(model_path);
        if (model.input_dim() != vocab.size())
            throw msda::ShapeError("model input dimension does not match vocabulary");
        const auto pad = msda::proxy_a_distance(msda::represent(model, A),
                                                msda::represent(model, B), opt);
        std::cout << "pad_msda: " << format_short(pad) << "\n";
    }
    return 0;
}

int cmd_cv(const CommonConfig& cfg, const std::string& source_id) {
    const auto datasets = load_inputs(parse_inputs(cfg.inputs));
    const auto& source = find_domain(datasets, source_id);
    if (source.labeled_count() == 0)
        throw msda::DataError("source domain '" + source_id + "' has no labeled examples");

    const auto vocab = msda::build_vocabulary(datasets, cfg.max_features);
    const auto pooled = msda::to_matrix(datasets, vocab);
    msda::DomainDataset source_labeled;
    source_labeled.domain_id = source.domain_id;
    for (const auto& ex : source.examples)
        if (ex.label != 0) source_labeled.examples.push_back(ex);
    const auto source_X = msda::to_matrix({source_labeled}, vocab);
    const auto source_y = msda::labels_of({source_labeled});

    msda::CvOptions opt;
    opt.c_grid = cfg.c_grid;
    opt.fold_seed = cfg.seed_folds;
    opt.ridge = cfg.ridge;
    opt.squash = squash_of(cfg);
    opt.threads = cfg.threads;
    const auto cv = msda::cross_validate(pooled, source_X, source_y, cfg.p_grid, cfg.l_grid,
                                         opt);
    std::cout << "p\tl\tmean_error\tbest_c\n";
    for (const auto& cell : cv.grid)
        std::cout << format_short(cell.p) << '\t' << cell.l << '\t'
                  << format_short(cell.mean_error) << '\t' << format_short(cell.best_c)
                  << '\n';
    std::cout << "selected: p=" << format_short(cv.p_star) << " l=" << cv.l_star << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"marginalized stacked denoising autoencoders for domain adaptation"};
    app.require_subcommand(1);
    app.set_config("--config", "", "structured config file; command-line flags win");

    CommonConfig cfg;
    std::string out_path, vocab_out, vocab_path, model_path, report_path;
    std::string source_id, target_id, id_a, id_b;
    std::string representation = "raw";

    auto* vocab_cmd = app.add_subcommand("vocab", "build a vocabulary sidecar");
    add_input_option(*vocab_cmd, cfg);
    add_vocab_options(*vocab_cmd, cfg);
    vocab_cmd->add_option("--out", out_path, "output vocabulary path")->required();

    auto* train_cmd = app.add_subcommand("train", "train a stacked representation");
    add_input_option(*train_cmd, cfg);
    add_vocab_options(*train_cmd, cfg);
    add_representation_options(*train_cmd, cfg);
    train_cmd->add_option("--p", cfg.p, "corruption probability")
        ->required()
        ->check(CLI::Range(0.0, 1.0));
    train_cmd->add_option("--layers", cfg.layers, "number of layers")
        ->required()
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--out", out_path, "output model path")->required();
    train_cmd->add_option("--vocab-out", vocab_out, "output vocabulary path");

    auto* transform_cmd = app.add_subcommand("transform", "write learned representations");
    add_input_option(*transform_cmd, cfg);
    transform_cmd->add_option("--model", model_path, "trained model file")->required();
    transform_cmd->add_option("--vocab", vocab_path, "vocabulary sidecar")->required();
    transform_cmd->add_option("--out", out_path, "output path")->required();

    auto* adapt_cmd = app.add_subcommand("adapt", "evaluate source -> target transfer");
    add_input_option(*adapt_cmd, cfg);
    add_vocab_options(*adapt_cmd, cfg);
    add_representation_options(*adapt_cmd, cfg);
    add_eval_options(*adapt_cmd, cfg);
    adapt_cmd->add_option("--source", source_id, "source domain id")->required();
    adapt_cmd->add_option("--target", target_id, "target domain id")->required();
    auto* adapt_p = adapt_cmd->add_option("--p", cfg.p, "corruption probability")
                        ->check(CLI::Range(0.0, 1.0));
    auto* adapt_l = adapt_cmd->add_option("--layers", cfg.layers, "number of layers")
                        ->check(CLI::PositiveNumber);
    adapt_cmd->add_option("--p-grid", cfg.p_grid, "cross-validation grid for p");
    adapt_cmd->add_option("--l-grid", cfg.l_grid, "cross-validation grid for l");
    adapt_cmd->add_option("--model", model_path, "use an already-trained model");
    adapt_cmd->add_option("--report", report_path, "append a row to this report table");

    auto* pad_cmd = app.add_subcommand("pad", "proxy-A-distance between two domains");
    add_input_option(*pad_cmd, cfg);
    add_vocab_options(*pad_cmd, cfg);
    add_eval_options(*pad_cmd, cfg);
    pad_cmd->add_option("--a", id_a, "first domain id")->required();
    pad_cmd->add_option("--b", id_b, "second domain id")->required();
    pad_cmd->add_option("--representation", representation, "raw, msda, or both")
        ->check(CLI::IsMember({"raw", "msda", "both"}));
    pad_cmd->add_option("--model", model_path, "trained model (for msda representation)");
    pad_cmd->add_option("--vocab", vocab_path, "vocabulary sidecar (default: rebuild)");

    auto* cv_cmd = app.add_subcommand("cv", "grid-search p and l by cross-validation");
    add_input_option(*cv_cmd, cfg);
    add_vocab_options(*cv_cmd, cfg);
    add_representation_options(*cv_cmd, cfg);
    add_eval_options(*cv_cmd, cfg);
    cv_cmd->add_option("--source", source_id, "source domain id")->required();
    cv_cmd->add_option("--p-grid", cfg.p_grid, "grid for p");
    cv_cmd->add_option("--l-grid", cfg.l_grid, "grid for l");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(vocab_cmd)) return cmd_vocab(cfg, out_path);
        if (app.got_subcommand(train_cmd)) return cmd_train(cfg, out_path, vocab_out);
        if (app.got_subcommand(transform_cmd))
            return cmd_transform(cfg, model_path, vocab_path, out_path);
        if (app.got_subcommand(adapt_cmd))
            return cmd_adapt(cfg, source_id, target_id, model_path, report_path,
                             adapt_p->count() > 0, adapt_l->count() > 0);
        if (app.got_subcommand(pad_cmd))
            return cmd_pad(cfg, id_a, id_b, representation, model_path, vocab_path);
        if (app.got_subcommand(cv_cmd)) return cmd_cv(cfg, source_id);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
