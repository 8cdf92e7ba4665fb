#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kgtrust/kgtrust.hpp"
#include "oracles.hpp"

using namespace kgt;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

} // namespace

TEST(Config, ParsesKeysAndComments) {
    std::istringstream in("# comment\nseed = 7\n\ntranse.dim = 32  # trailing\nfusion.hidden = 8,4\n"
                          "data.triples = a.tsv, b.tsv\npath.pairing = swapped\n");
    auto c = PipelineConfig::parse(in);
    EXPECT_EQ(c.seed, 7u);
    EXPECT_EQ(c.transe_dim, 32u);
    EXPECT_EQ(c.fusion_hidden, (std::vector<std::size_t>{8, 4}));
    EXPECT_EQ(c.triples, (std::vector<std::string>{"a.tsv", "b.tsv"}));
    EXPECT_EQ(c.path_pairing, "swapped");
    EXPECT_EQ(c.rr_theta, 0.15);
}

TEST(Config, UnknownKeyReportsLine) {
    std::istringstream in("seed = 1\nrr.thetta = 0.2\n");
    try {
        PipelineConfig::parse(in, "x.cfg");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Config, BadValuesRejected) {
    PipelineConfig c;
    EXPECT_THROW(c.set("transe.dim", "abc"), InputError);
    EXPECT_THROW(c.set("seed", "-3"), InputError);
    std::istringstream in("rr.theta = 1.5\n");
    EXPECT_THROW(PipelineConfig::parse(in), InputError);
    std::istringstream in2("eval.mode = fast\n");
    EXPECT_THROW(PipelineConfig::parse(in2), InputError);
    std::istringstream in3("no equals sign\n");
    EXPECT_THROW(PipelineConfig::parse(in3), ParseError);
}

TEST(Config, TextRoundTripAndHash) {
    PipelineConfig c;
    c.set("seed", "99");
    c.set("train.lr", "0.0025");
    c.set("fusion.hidden", "64,32,8");
    std::istringstream in(c.to_text());
    auto back = PipelineConfig::parse(in);
    EXPECT_EQ(back.to_text(), c.to_text());
    EXPECT_EQ(back.hash(), c.hash());
    back.set("seed", "100");
    EXPECT_NE(back.hash(), c.hash());
}

TEST(ResourceCacheFiles, FiveHeadsGiveFiveRecords) {
    auto dir = fresh_dir("kgtrust_rcache");
    auto kg = oracle::random_kg(12, 2, 30, 1);
    ResourceOptions opt;
    auto st = precompute_resources(kg, {0, 1, 2, 3, 4}, opt, dir, 2);
    EXPECT_EQ(st.shards, 3u);
    EXPECT_EQ(st.reused, 0u);
    EXPECT_EQ(st.computed_items, 5u);
    auto cache = load_resource_cache(kg, opt, dir);
    ASSERT_EQ(cache.size(), 5u);
    for (EntityId h = 0; h < 5; ++h) {
        auto sub = build_head_subgraph(kg, h);
        auto rv = resource_iterate(sub, opt);
        EXPECT_EQ(cache.at(h).nodes, sub.nodes);
        EXPECT_EQ(cache.at(h).mass, rv.mass);
    }
    fs::remove_all(dir);
}

TEST(ResourceCacheFiles, RerunReusesAndDamageIsRecomputed) {
    auto dir = fresh_dir("kgtrust_rcache2");
    auto kg = oracle::random_kg(12, 2, 30, 2);
    ResourceOptions opt;
    precompute_resources(kg, {0, 1, 2, 3, 4}, opt, dir, 2);
    auto again = precompute_resources(kg, {0, 1, 2, 3, 4}, opt, dir, 2);
    EXPECT_EQ(again.reused, 3u);
    EXPECT_EQ(again.computed_items, 0u);

    // truncate one shard
    auto victim = detail::shard_path(dir, "resource", resource_cache_key(kg, opt), 1);
    fs::resize_file(victim, fs::file_size(victim) / 2);
    auto repaired = precompute_resources(kg, {0, 1, 2, 3, 4}, opt, dir, 2);
    EXPECT_EQ(repaired.reused, 2u);
    EXPECT_EQ(repaired.computed_items, 2u);
    EXPECT_EQ(load_resource_cache(kg, opt, dir).size(), 5u);

    // different options use a different key and ignore the old shards
    ResourceOptions other = opt;
    other.theta = 0.3;
    EXPECT_TRUE(load_resource_cache(kg, other, dir).empty());
    fs::remove_all(dir);
}

TEST(PathCacheFiles, MatchesDirectSelectionAndReuses) {
    auto dir = fresh_dir("kgtrust_pcache");
    auto kg = oracle::random_kg(15, 3, 60, 3);
    EmbeddingTable emb(15, 3, 4);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0, 1);
    for (auto& x : emb.entity_data()) x = g(rng);
    for (auto& x : emb.relation_data()) x = g(rng);
    PathSelectionOptions opt;
    std::vector<Triple> targets(kg.triples().begin(), kg.triples().begin() + 20);
    auto st = precompute_paths(kg, emb, targets, opt, dir, 8, 2);
    EXPECT_EQ(st.shards, 3u);
    auto cache = load_path_cache(kg, emb, opt, dir);
    ASSERT_EQ(cache.size(), 20u);
    PathFinder finder(kg);
    for (const auto& t : targets) EXPECT_EQ(cache.at(t), select_paths(finder, t, emb, opt));
    EXPECT_EQ(precompute_paths(kg, emb, targets, opt, dir, 8, 1).reused, 3u);

    // moved embeddings invalidate the cache
    emb.entity(0)[0] += 1.0;
    EXPECT_TRUE(load_path_cache(kg, emb, opt, dir).empty());
    fs::remove_all(dir);
}

TEST(PathCacheFiles, ParallelAndSerialAgree) {
    auto d1 = fresh_dir("kgtrust_pcache_a"), d2 = fresh_dir("kgtrust_pcache_b");
    auto kg = oracle::random_kg(20, 3, 80, 4);
    EmbeddingTable emb(20, 3, 4);
    for (std::size_t i = 0; i < emb.entity_data().size(); ++i) emb.entity_data()[i] = std::sin(1.0 + i);
    for (std::size_t i = 0; i < emb.relation_data().size(); ++i) emb.relation_data()[i] = std::cos(1.0 + i);
    PathSelectionOptions opt;
    precompute_paths(kg, emb, kg.triples(), opt, d1, 16, 1);
    precompute_paths(kg, emb, kg.triples(), opt, d2, 16, 3);
    EXPECT_EQ(load_path_cache(kg, emb, opt, d1), load_path_cache(kg, emb, opt, d2));
    fs::remove_all(d1);
    fs::remove_all(d2);
}
