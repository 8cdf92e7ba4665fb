#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "kgtrust/kgtrust.hpp"

using namespace kgt;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config() {
    PipelineConfig c;
    c.transe_dim = 16;
    c.transe_epochs = 60;
    c.path_hidden = 8;
    c.rp_hidden = 8;
    c.train_max_epochs = 20;
    c.train_lr = 0.005;
    return c;
}

} // namespace

TEST(Synthetic, CommunityShape) {
    auto g = build_graph(community_kg());
    EXPECT_EQ(g.entities.size(), 300u);
    EXPECT_EQ(g.relations.size(), 12u);
    EXPECT_EQ(g.graph.size(), 699u);
}

TEST(Synthetic, ClusteredShape) {
    auto g = build_graph(clustered_kg(500, 40, 10, 1));
    EXPECT_EQ(g.entities.size(), 500u);
    EXPECT_EQ(g.relations.size(), 40u);
}

TEST(Workspace, SplitsArePairedAndDisjoint) {
    auto ws = build_workspace(community_kg(), small_config());
    const auto n = ws.corpus.train.size() + ws.corpus.valid.size() + ws.corpus.test.size();
    EXPECT_EQ(n, 2 * ws.graph.size());
    for (const auto* part : {&ws.corpus.train, &ws.corpus.valid, &ws.corpus.test}) {
        std::size_t pos = 0;
        for (const auto& l : *part) {
            pos += l.label;
            EXPECT_EQ(ws.graph.contains(l.triple), l.label == 1);
        }
        EXPECT_EQ(2 * pos, part->size());
    }
}

TEST(Workspace, ExplicitSizesTooLargeRejected) {
    auto c = small_config();
    c.split_train = 600;
    c.split_valid = 100;
    c.split_test = 100;
    EXPECT_THROW(build_workspace(community_kg(), c), InputError);
}

TEST(Workspace, SaveLoadRoundTrip) {
    auto dir = fs::temp_directory_path() / "kgtrust_ws";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto ws = build_workspace(community_kg(), small_config());
    save_workspace(ws, dir);
    auto back = load_workspace(dir);
    EXPECT_EQ(back.graph.triples(), ws.graph.triples());
    EXPECT_EQ(back.corpus.train, ws.corpus.train);
    EXPECT_EQ(back.corpus.valid, ws.corpus.valid);
    EXPECT_EQ(back.corpus.test, ws.corpus.test);
    fs::remove(dir / "valid.tsv");
    EXPECT_THROW(load_workspace(dir), InputError);
    fs::remove_all(dir);
}

TEST(Pipeline, TrainingLossFiniteAndFalling) {
    auto cfg = small_config();
    auto ws = build_workspace(community_kg(), cfg);
    auto emb = train_embeddings(ws, cfg);
    auto data = prepare_splits(ws, emb, cfg);
    cfg.train_max_epochs = 5;
    cfg.train_patience = 10;
    TrainHistory h;
    fit_model(ws, emb, data, cfg, model_config(cfg), &h);
    ASSERT_EQ(h.train_loss.size(), 5u);
    for (double l : h.train_loss) EXPECT_TRUE(std::isfinite(l));
    EXPECT_LT(h.train_loss.back(), h.train_loss.front());
}

TEST(Pipeline, EndToEndIsDeterministic) {
    auto run = [] {
        auto cfg = small_config();
        cfg.transe_epochs = 20;
        cfg.train_max_epochs = 3;
        auto ws = build_workspace(community_kg(), cfg);
        auto emb = train_embeddings(ws, cfg);
        auto data = prepare_splits(ws, emb, cfg);
        auto b = fit_model(ws, emb, data, cfg, model_config(cfg));
        std::ostringstream o;
        write_bundle(o, b);
        return o.str();
    };
    EXPECT_EQ(run(), run());
}

TEST(Pipeline, ParallelPreparationMatchesSerial) {
    auto cfg = small_config();
    cfg.transe_epochs = 10;
    auto ws = build_workspace(community_kg(), cfg);
    auto emb = train_embeddings(ws, cfg);
    auto serial = prepare_splits(ws, emb, cfg);
    cfg.jobs = 3;
    auto parallel = prepare_splits(ws, emb, cfg);
    ASSERT_EQ(serial.test.size(), parallel.test.size());
    for (std::size_t i = 0; i < serial.test.size(); ++i) {
        EXPECT_EQ(serial.test[i].rr_raw, parallel.test[i].rr_raw);
        EXPECT_EQ(serial.test[i].energy, parallel.test[i].energy);
        EXPECT_EQ(serial.test[i].paths, parallel.test[i].paths);
    }
}

TEST(Pipeline, CachedFeaturesMatchDirect) {
    auto dir = fs::temp_directory_path() / "kgtrust_pipe_cache";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto cfg = small_config();
    cfg.transe_epochs = 10;
    auto ws = build_workspace(community_kg(), cfg);
    auto emb = train_embeddings(ws, cfg);
    const auto opt = extraction_options(cfg);
    std::vector<EntityId> heads;
    std::vector<Triple> targets;
    for (const auto* part : {&ws.corpus.train, &ws.corpus.valid, &ws.corpus.test})
        for (const auto& l : *part) {
            heads.push_back(l.triple.head);
            targets.push_back(l.triple);
        }
    precompute_resources(ws.graph, heads, opt.resource, dir);
    precompute_paths(ws.graph, emb, targets, opt.paths, dir);
    auto rc = load_resource_cache(ws.graph, opt.resource, dir);
    auto pc = load_path_cache(ws.graph, emb, opt.paths, dir);
    auto direct = prepare_splits(ws, emb, cfg);
    auto cached = prepare_splits(ws, emb, cfg, {&rc, &pc});
    for (std::size_t i = 0; i < direct.valid.size(); ++i) {
        EXPECT_EQ(direct.valid[i].rr_raw, cached.valid[i].rr_raw);
        EXPECT_EQ(direct.valid[i].paths, cached.valid[i].paths);
    }
    fs::remove_all(dir);
}
