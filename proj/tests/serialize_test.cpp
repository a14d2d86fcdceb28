#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "msda/rng.hpp"
#include "msda/serialize.hpp"

using namespace msda;

namespace {

DenoisingMap random_map(std::mt19937_64& gen, std::size_t d_out, std::size_t d_in) {
    DenoisingMap map;
    map.W = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(d_out),
                                         static_cast<Eigen::Index>(d_in) + 1,
                                         [&] { return 10.0 * uniform01(gen) - 5.0; });
    map.p = uniform01(gen);
    map.ridge = uniform01(gen) * 1e-3;
    return map;
}

bool bit_identical(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("msda_serialize_" + name);
}

} // namespace

TEST(Serialize, MapRoundTripsBitExactly) {
    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 5; ++trial) {
        const auto map = random_map(gen, 1 + uniform_below(gen, 6), 1 + uniform_below(gen, 6));
        std::stringstream buffer;
        save_map(buffer, map);
        const auto loaded = load_map(buffer);
        EXPECT_TRUE(bit_identical(map.W, loaded.W));
        EXPECT_EQ(map.p, loaded.p);
        EXPECT_EQ(map.ridge, loaded.ridge);
    }
}

TEST(Serialize, StackRoundTripsWithSquashTag) {
    std::mt19937_64 gen(2);
    StackModel model;
    model.p = 0.375;
    model.ridge = 1e-5;
    model.squash = Squash::Identity;
    model.layers.push_back(random_map(gen, 4, 4));
    model.layers.push_back(random_map(gen, 4, 4));

    std::stringstream buffer;
    save_stack(buffer, model);
    const auto loaded = load_stack(buffer);
    EXPECT_EQ(loaded.p, model.p);
    EXPECT_EQ(loaded.ridge, model.ridge);
    EXPECT_EQ(loaded.squash, Squash::Identity);
    EXPECT_FALSE(loaded.block_first.has_value());
    ASSERT_EQ(loaded.layers.size(), 2u);
    for (std::size_t t = 0; t < 2; ++t)
        EXPECT_TRUE(bit_identical(model.layers[t].W, loaded.layers[t].W));
}

TEST(Serialize, BlockwiseStackRoundTrips) {
    std::mt19937_64 gen(3);
    StackModel model;
    model.p = 0.5;
    model.ridge = 2e-4;
    BlockLayer block;
    block.plan = make_plan(7, 3, 3, 99);
    for (std::size_t s = 0; s < block.plan.block_count(); ++s)
        block.maps.push_back(random_map(gen, 3, block.plan.block(s).size()));
    model.block_first = std::move(block);
    model.layers.push_back(random_map(gen, 3, 3));

    std::stringstream buffer;
    save_stack(buffer, model);
    const auto loaded = load_stack(buffer);
    ASSERT_TRUE(loaded.block_first.has_value());
    EXPECT_EQ(loaded.block_first->plan.permutation, model.block_first->plan.permutation);
    EXPECT_EQ(loaded.block_first->plan.boundaries, model.block_first->plan.boundaries);
    EXPECT_EQ(loaded.block_first->plan.seed, 99u);
    EXPECT_EQ(loaded.block_first->plan.r, 3u);
    ASSERT_EQ(loaded.block_first->maps.size(), model.block_first->maps.size());
    for (std::size_t s = 0; s < loaded.block_first->maps.size(); ++s)
        EXPECT_TRUE(
            bit_identical(model.block_first->maps[s].W, loaded.block_first->maps[s].W));
    EXPECT_EQ(loaded.layer_count(), 2u);
}

TEST(Serialize, LinearModelRoundTrips) {
    std::mt19937_64 gen(4);
    LinearModel model;
    model.w = Eigen::VectorXd::NullaryExpr(9, [&] { return uniform01(gen) - 0.5; });
    model.bias = -0.75;
    model.c = 10.0;
    model.loss = Loss::Logistic;
    std::stringstream buffer;
    save_linear(buffer, model);
    const auto loaded = load_linear(buffer);
    EXPECT_TRUE(bit_identical(model.w, loaded.w));
    EXPECT_EQ(loaded.bias, model.bias);
    EXPECT_EQ(loaded.c, model.c);
    EXPECT_EQ(loaded.loss, Loss::Logistic);
}

TEST(Serialize, FileRoundTripAndAtomicReplace) {
    std::mt19937_64 gen(5);
    const auto path = temp_path("map.bin");
    const auto map = random_map(gen, 3, 4);
    save_map_file(path.string(), map);
    EXPECT_TRUE(bit_identical(load_map_file(path.string()).W, map.W));

    const auto other = random_map(gen, 2, 2);
    save_map_file(path.string(), other); // replaces in place
    EXPECT_TRUE(bit_identical(load_map_file(path.string()).W, other.W));
    EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    std::filesystem::remove(path);
}

TEST(Serialize, FailedWriteLeavesNothingBehind) {
    const auto missing_dir = temp_path("no_such_dir") / "model.bin";
    std::mt19937_64 gen(6);
    const auto map = random_map(gen, 2, 2);
    EXPECT_THROW(save_map_file(missing_dir.string(), map), ParseError);
    EXPECT_FALSE(std::filesystem::exists(missing_dir));

    const auto path = temp_path("aborted.bin");
    EXPECT_THROW(atomic_write(path.string(),
                              [](std::ostream&) { throw NumericError("boom"); }),
                 NumericError);
    EXPECT_FALSE(std::filesystem::exists(path));
    EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
}

TEST(Serialize, RejectsGarbageAndTruncation) {
    std::stringstream garbage("BOGUS 1 2 3\n");
    EXPECT_THROW(load_map(garbage), ParseError);

    std::mt19937_64 gen(7);
    const auto map = random_map(gen, 3, 3);
    std::stringstream buffer;
    save_map(buffer, map);
    std::string bytes = buffer.str();
    bytes.resize(bytes.size() - 8); // drop the final weight
    std::stringstream truncated(bytes);
    EXPECT_THROW(load_map(truncated), ParseError);

    std::stringstream bad_header("MSDA1 3 3 notanumber 0\n");
    EXPECT_THROW(load_map(bad_header), ParseError);
}

TEST(Serialize, StackHeaderManifestIsValidated) {
    std::mt19937_64 gen(8);
    StackModel model;
    model.p = 0.5;
    model.layers.push_back(random_map(gen, 3, 3));
    std::stringstream buffer;
    save_stack(buffer, model);
    std::string text = buffer.str();
    // corrupt the dims manifest
    const auto pos = text.find("dims 3 3");
    ASSERT_NE(pos, std::string::npos);
    text[pos + 5] = '4';
    std::stringstream corrupted(text);
    EXPECT_THROW(load_stack(corrupted), ParseError);
}
