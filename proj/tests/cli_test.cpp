#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "msda/corpus.hpp"
#include "msda/serialize.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("msda_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    // exit code of `msda <args>`, stdout/stderr captured to files
    int run(const std::string& args) {
        const std::string cmd = std::string(MSDA_CLI_PATH) + " " + args + " > " +
                                path("stdout.txt") + " 2> " + path("stderr.txt");
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string stdout_text() const { return slurp(path("stdout.txt")); }
    std::string stderr_text() const { return slurp(path("stderr.txt")); }

    static std::string slurp(const std::string& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    static void write_dataset(const std::string& p, const msda::DomainDataset& ds) {
        std::ofstream out(p);
        for (const auto& ex : ds.examples) {
            out << (ex.label > 0 ? "+1" : ex.label < 0 ? "-1" : "0");
            for (const auto& [idx, val] : ex.features) out << ' ' << idx << ':' << val;
            out << '\n';
        }
    }

    void write_shift_files(std::size_t n_src, std::size_t n_pool, std::size_t n_eval) {
        const auto corpus = msda::testsupport::make_shift_corpus(7, n_src, n_pool, n_eval);
        write_dataset(path("src.txt"), corpus.source);
        msda::DomainDataset target = corpus.target_pool;
        target.examples.insert(target.examples.end(), corpus.target_eval.examples.begin(),
                               corpus.target_eval.examples.end());
        write_dataset(path("tgt.txt"), target);
    }

    fs::path dir_;
};

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
    return lines;
}

} // namespace

TEST_F(CliTest, VocabBuildsSidecar) {
    write_dataset(path("a.txt"), msda::parse_sparse_stream(
                                     *std::make_unique<std::istringstream>(
                                         "+1 3:2 7:1\n-1 3:1\n"),
                                     "a", "inline"));
    ASSERT_EQ(run("vocab --input " + path("a.txt") + "=a --out " + path("v.tsv")), 0);
    const auto vocab = msda::Vocabulary::load_file(path("v.tsv"));
    ASSERT_EQ(vocab.size(), 2u);
    EXPECT_EQ(vocab.term(0), "3"); // count 3 beats count 1
    EXPECT_NE(stdout_text().find("vocabulary_size: 2"), std::string::npos);
}

TEST_F(CliTest, TrainProducesByteIdenticalModelsAcrossRuns) {
    write_shift_files(60, 60, 0);
    const std::string common = "train --input " + path("src.txt") + "=src --input " +
                               path("tgt.txt") + "=tgt --p 0.5 --layers 2";
    ASSERT_EQ(run(common + " --out " + path("m1.bin") + " --vocab-out " + path("v1.tsv")), 0);
    ASSERT_EQ(run(common + " --out " + path("m2.bin") + " --vocab-out " + path("v2.tsv")), 0);
    EXPECT_EQ(slurp(path("m1.bin")), slurp(path("m2.bin")));
    EXPECT_EQ(slurp(path("v1.tsv")), slurp(path("v2.tsv")));
    EXPECT_NE(stdout_text().find("training_seconds:"), std::string::npos);
}

TEST_F(CliTest, TrainThenTransformWritesDenseSparseFormat) {
    write_shift_files(40, 40, 0);
    ASSERT_EQ(run("train --input " + path("src.txt") + "=src --p 0.5 --layers 1 --out " +
                  path("m.bin") + " --vocab-out " + path("v.tsv")),
              0);
    ASSERT_EQ(run("transform --input " + path("src.txt") + "=src --model " + path("m.bin") +
                  " --vocab " + path("v.tsv") + " --out " + path("rep.txt")),
              0);
    const auto model = msda::load_stack_file(path("m.bin"));
    const auto lines = split_lines(slurp(path("rep.txt")));
    ASSERT_EQ(lines.size(), 40u);
    std::istringstream first(lines[0]);
    std::vector<std::string> tokens{std::istream_iterator<std::string>(first), {}};
    EXPECT_EQ(tokens.size(), 1u + model.represent_dim());
    EXPECT_TRUE(tokens[0] == "+1" || tokens[0] == "-1" || tokens[0] == "0");
    // the transformed file re-parses under the same sparse format
    const auto reparsed = msda::parse_sparse_file(path("rep.txt"), "rep");
    EXPECT_EQ(reparsed.examples.size(), 40u);
    EXPECT_EQ(reparsed.examples[0].features.size(), model.represent_dim());
}

TEST_F(CliTest, AdaptWritesRecordAndReportRow) {
    write_shift_files(120, 120, 80);
    const std::string cmd = "adapt --input " + path("src.txt") + "=src --input " +
                            path("tgt.txt") + "=tgt --source src --target tgt "
                            "--p 0.6 --layers 1 --c-grid 0.1 --c-grid 1 --report " +
                            path("report.tsv");
    ASSERT_EQ(run(cmd), 0) << stderr_text();
    const std::string record = stdout_text();
    for (const char* key : {"task: src->tgt", "e_st:", "e_tt_baseline:", "transfer_loss:",
                            "transfer_ratio:", "pad_before:", "pad_after:",
                            "train_seconds:", "p: 0.6", "l: 1"})
        EXPECT_NE(record.find(key), std::string::npos) << key;

    const auto lines = split_lines(slurp(path("report.tsv")));
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0],
              "task\te_st\te_tt_b\tloss\tratio\tpad_before\tpad_after\ttrain_seconds");
    std::istringstream row(lines[1]);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(row, cell, '\t')) cells.push_back(cell);
    ASSERT_EQ(cells.size(), 8u);
    EXPECT_EQ(cells[0], "src->tgt");

    // appending a second row keeps one header
    ASSERT_EQ(run(cmd), 0);
    EXPECT_EQ(split_lines(slurp(path("report.tsv"))).size(), 3u);
}

TEST_F(CliTest, AdaptWithoutPAndLayersRunsCrossValidation) {
    write_shift_files(80, 80, 60);
    const std::string cmd = "adapt --input " + path("src.txt") + "=src --input " +
                            path("tgt.txt") + "=tgt --source src --target tgt "
                            "--p-grid 0.5 --p-grid 0.9 --l-grid 1 --c-grid 1";
    ASSERT_EQ(run(cmd), 0) << stderr_text();
    EXPECT_NE(stdout_text().find("selected_by_cv: p="), std::string::npos);
}

TEST_F(CliTest, PadOnIdenticalFileIsNearZeroAndBothMode) {
    write_shift_files(100, 100, 0);
    fs::copy_file(path("src.txt"), path("copy.txt"));
    ASSERT_EQ(run("pad --input " + path("src.txt") + "=a --input " + path("copy.txt") +
                  "=b --a a --b b --c-grid 0.1 --c-grid 1"),
              0);
    double pad = 99;
    ASSERT_EQ(std::sscanf(stdout_text().c_str(), "pad_raw: %lf", &pad), 1);
    EXPECT_LE(std::abs(pad), 0.2);

    ASSERT_EQ(run("train --input " + path("src.txt") + "=a --input " + path("copy.txt") +
                  "=b --p 0.5 --layers 1 --out " + path("m.bin") + " --vocab-out " +
                  path("v.tsv")),
              0);
    ASSERT_EQ(run("pad --input " + path("src.txt") + "=a --input " + path("copy.txt") +
                  "=b --a a --b b --representation both --model " + path("m.bin") +
                  " --vocab " + path("v.tsv") + " --c-grid 1"),
              0);
    const auto lines = split_lines(stdout_text());
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0].rfind("pad_raw: ", 0), 0u);
    EXPECT_EQ(lines[1].rfind("pad_msda: ", 0), 0u);
}

TEST_F(CliTest, ParseErrorExitsNonzeroWithoutPartialOutput) {
    {
        std::ofstream out(path("bad.txt"));
        out << "+1 3:2\nbroken line\n";
    }
    EXPECT_NE(run("vocab --input " + path("bad.txt") + "=x --out " + path("v.tsv")), 0);
    EXPECT_NE(stderr_text().find("bad.txt:2"), std::string::npos);
    EXPECT_FALSE(fs::exists(path("v.tsv")));
    EXPECT_FALSE(fs::exists(path("v.tsv.tmp")));
}

TEST_F(CliTest, UnknownDomainIdExitsNonzero) {
    write_shift_files(30, 30, 20);
    EXPECT_NE(run("adapt --input " + path("src.txt") + "=src --input " + path("tgt.txt") +
                  "=tgt --source nope --target tgt --p 0.5 --layers 1"),
              0);
    EXPECT_NE(stderr_text().find("nope"), std::string::npos);
}

TEST_F(CliTest, CvPrintsGridAndSelection) {
    write_shift_files(80, 0, 0);
    ASSERT_EQ(run("cv --input " + path("src.txt") + "=src --source src --p-grid 0.5 "
                  "--p-grid 0.9 --l-grid 1 --c-grid 1"),
              0)
        << stderr_text();
    const auto text = stdout_text();
    EXPECT_NE(text.find("p\tl\tmean_error\tbest_c"), std::string::npos);
    EXPECT_NE(text.find("selected: p="), std::string::npos);
    EXPECT_EQ(split_lines(text).size(), 4u); // header + 2 cells + selection
}

TEST_F(CliTest, ConfigFileProvidesDefaultsAndFlagsWin) {
    write_shift_files(40, 0, 0);
    {
        std::ofstream out(path("msda.cfg"));
        out << "[train]\n"
            << "p=0.9\n"
            << "layers=2\n";
    }
    ASSERT_EQ(run("--config " + path("msda.cfg") + " train --input " + path("src.txt") +
                  "=src --p 0.6 --out " + path("m.bin") + " --vocab-out " + path("v.tsv")),
              0)
        << stderr_text();
    const auto model = msda::load_stack_file(path("m.bin"));
    EXPECT_EQ(model.layer_count(), 2u); // from the config file
    EXPECT_EQ(model.p, 0.6);            // command line wins
}
