#include <gtest/gtest.h>

#include <random>
#include <set>

#include "kgtrust/kgtrust.hpp"
#include "oracles.hpp"

using namespace kgt;

namespace {

EmbeddingTable random_table(std::size_t n, std::size_t m, std::size_t d, std::uint64_t seed) {
    EmbeddingTable emb(n, m, d);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0, 1);
    for (auto& x : emb.entity_data()) x = g(rng);
    for (auto& x : emb.relation_data()) x = g(rng);
    return emb;
}

ReachablePath make_path(std::vector<Triple> steps) { return ReachablePath{std::move(steps)}; }

} // namespace

TEST(PathSearch, TriangleAtLengthTwo) {
    // A=0, B=1, C=2: A->B, B->C, A->C; target (A, r, C)
    KnowledgeGraph kg(3, 1, {{0, 0, 1}, {1, 0, 2}, {0, 0, 2}});
    auto paths = enumerate_paths(kg, {0, 0, 2}, {2, 10000});
    ASSERT_EQ(paths.size(), 1u);
    EXPECT_EQ(paths[0].steps, (std::vector<Triple>{{0, 0, 1}, {1, 0, 2}}));
}

TEST(PathSearch, DirectEdgeUnderAnotherRelationCounts) {
    KnowledgeGraph kg(2, 2, {{0, 0, 1}, {0, 1, 1}});
    auto paths = enumerate_paths(kg, {0, 0, 1}, {});
    ASSERT_EQ(paths.size(), 1u);
    EXPECT_EQ(paths[0].steps, (std::vector<Triple>{{0, 1, 1}}));
}

TEST(PathSearch, UnreachablePairHasNoPaths) {
    KnowledgeGraph kg(4, 1, {{0, 0, 1}, {2, 0, 3}});
    EXPECT_TRUE(enumerate_paths(kg, {0, 0, 3}, {}).empty());
    EXPECT_TRUE(enumerate_paths(kg, {1, 0, 0}, {}).empty());
}

TEST(PathSearch, MatchesExhaustiveOracleOnSmallGraphs) {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        const std::size_t n = 4 + seed % 12;  // at most 15 nodes
        auto kg = oracle::random_kg(n, 3, 3 * n, seed);
        PathFinder finder(kg);
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::uint32_t> e(0, static_cast<std::uint32_t>(n - 1));
        for (int q = 0; q < 10; ++q) {
            Triple target{e(rng), static_cast<RelationId>(q % 3), e(rng)};
            auto got = finder.find(target, {4, 1000000});
            std::set<std::vector<Triple>> mine;
            for (const auto& p : got) mine.insert(p.steps);
            EXPECT_EQ(mine.size(), got.size()) << "duplicate path emitted";
            EXPECT_EQ(mine, oracle::all_simple_paths(kg, target, 4)) << "seed " << seed;
            EXPECT_TRUE(std::is_sorted(got.begin(), got.end(), [](const auto& a, const auto& b) {
                for (std::size_t i = 0; i < std::min(a.length(), b.length()); ++i) {
                    if (a.steps[i].tail != b.steps[i].tail) return a.steps[i].tail < b.steps[i].tail;
                    if (a.steps[i].relation != b.steps[i].relation) return a.steps[i].relation < b.steps[i].relation;
                }
                return a.length() < b.length();
            }));
        }
    }
}

TEST(PathSearch, EveryPathIsValidAndSimple) {
    auto kg = oracle::random_kg(30, 4, 150, 77);
    PathFinder finder(kg);
    for (EntityId h = 0; h < 30; h += 4)
        for (EntityId t = 1; t < 30; t += 5) {
            for (const auto& p : finder.find({h, 0, t}, {4, 10000})) {
                ASSERT_GE(p.length(), 1u);
                ASSERT_LE(p.length(), 4u);
                EXPECT_EQ(p.steps.front().head, h);
                EXPECT_EQ(p.steps.back().tail, t);
                std::set<EntityId> nodes{h};
                for (std::size_t i = 0; i < p.length(); ++i) {
                    EXPECT_TRUE(kg.contains(p.steps[i]));
                    if (i > 0) {
                        EXPECT_EQ(p.steps[i].head, p.steps[i - 1].tail);
                    }
                    EXPECT_TRUE(nodes.insert(p.steps[i].tail).second) << "repeated node";
                }
            }
        }
}

TEST(PathSearch, BudgetTruncates) {
    // complete digraph on 8 nodes has many paths of length <= 4
    std::vector<Triple> ts;
    for (std::uint32_t a = 0; a < 8; ++a)
        for (std::uint32_t b = 0; b < 8; ++b)
            if (a != b) ts.push_back({a, 0, b});
    KnowledgeGraph kg(8, 1, ts);
    auto all = enumerate_paths(kg, {0, 0, 7}, {4, 1000000});
    auto cut = enumerate_paths(kg, {0, 0, 7}, {4, 10});
    ASSERT_GT(all.size(), 10u);
    ASSERT_EQ(cut.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(cut[i], all[i]);
}

TEST(PathSearch, RejectsNonPositiveBound) {
    KnowledgeGraph kg(2, 1, {{0, 0, 1}});
    EXPECT_THROW(enumerate_paths(kg, {0, 0, 1}, {0, 10}), InputError);
}

TEST(PathScore, IdenticalRelationScoresOne) {
    auto emb = random_table(4, 2, 8, 1);
    Triple target{0, 1, 3};
    auto s = score_path(make_path({{0, 1, 2}, {2, 1, 3}}), target, emb);
    EXPECT_NEAR(s.relation, 1.0, 1e-12);
}

TEST(PathScore, OrthogonalRelationScoresZero) {
    EmbeddingTable emb(3, 2, 2);
    emb.relation(0)[0] = 1;
    emb.relation(1)[1] = 1;
    emb.entity(0)[0] = emb.entity(1)[0] = emb.entity(2)[0] = 1;
    auto s = score_path(make_path({{0, 1, 2}}), {0, 0, 2}, emb);
    EXPECT_EQ(s.relation, 0.0);
}

TEST(PathScore, ZeroNormVectorsScoreZero) {
    EmbeddingTable emb(3, 1, 4);
    auto s = score_path(make_path({{0, 0, 1}, {1, 0, 2}}), {0, 0, 2}, emb);
    EXPECT_EQ(s.relation, 0.0);
    EXPECT_EQ(s.head, 0.0);
    EXPECT_EQ(s.tail, 0.0);
    EXPECT_TRUE(std::isfinite(s.mean));
}

TEST(PathScore, MatchesNaiveLoop) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto emb = random_table(10, 4, 16, seed);
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::uint32_t> e(0, 9), r(0, 3), len(1, 4);
        Triple target{e(rng), r(rng), e(rng)};
        std::vector<Triple> steps;
        const auto L = len(rng);
        for (std::uint32_t i = 0; i < L; ++i) steps.push_back({e(rng), r(rng), e(rng)});
        auto vec = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
        double sr = 0, st = 0, sh = 0, st_sw = 0, sh_sw = 0;
        for (const auto& s : steps) {
            sr += oracle::naive_cosine(vec(emb.relation(target.relation)), vec(emb.relation(s.relation)));
            st += oracle::naive_cosine(vec(emb.entity(target.tail)), vec(emb.entity(s.head)));
            sh += oracle::naive_cosine(vec(emb.entity(target.head)), vec(emb.entity(s.tail)));
            st_sw += oracle::naive_cosine(vec(emb.entity(target.tail)), vec(emb.entity(s.tail)));
            sh_sw += oracle::naive_cosine(vec(emb.entity(target.head)), vec(emb.entity(s.head)));
        }
        const double n = L;
        auto a = score_path(make_path(steps), target, emb);
        EXPECT_NEAR(a.relation, sr / n, 1e-12);
        EXPECT_NEAR(a.tail, st / n, 1e-12);
        EXPECT_NEAR(a.head, sh / n, 1e-12);
        EXPECT_NEAR(a.mean, (sr + st + sh) / (3 * n), 1e-12);
        auto b = score_path(make_path(steps), target, emb, EntityPairing::swapped);
        EXPECT_NEAR(b.relation, sr / n, 1e-12);
        EXPECT_NEAR(b.tail, st_sw / n, 1e-12);
        EXPECT_NEAR(b.head, sh_sw / n, 1e-12);
    }
}

TEST(TopK, KeepsBestThreeOfFive) {
    std::vector<ReachablePath> paths;
    std::vector<PathScore> scores;
    const double means[] = {0.1, 0.9, 0.5, 0.7, 0.3};
    for (std::uint32_t i = 0; i < 5; ++i) {
        paths.push_back(make_path({{0, i, 1}}));
        scores.push_back({0, 0, 0, means[i]});
    }
    auto top = select_topk(paths, scores, 3);
    ASSERT_EQ(top.size(), 3u);
    EXPECT_EQ(top[0], paths[1]);
    EXPECT_EQ(top[1], paths[3]);
    EXPECT_EQ(top[2], paths[2]);
}

TEST(TopK, FewerPathsThanSlots) {
    std::vector<ReachablePath> paths{make_path({{0, 0, 1}})};
    std::vector<PathScore> scores{{0, 0, 0, 0.2}};
    EXPECT_EQ(select_topk(paths, scores, 3).size(), 1u);
    EXPECT_TRUE(select_topk({}, {}, 3).empty());
}

TEST(TopK, TiesPreferShorterThenLexicographic) {
    std::vector<ReachablePath> paths{make_path({{0, 0, 2}, {2, 0, 1}}), make_path({{0, 1, 1}}),
                                     make_path({{0, 0, 1}})};
    std::vector<PathScore> scores(3, {0, 0, 0, 0.5});
    auto top = select_topk(paths, scores, 2);
    ASSERT_EQ(top.size(), 2u);
    EXPECT_EQ(top[0], paths[2]);
    EXPECT_EQ(top[1], paths[1]);
}

TEST(TopK, SelectedDominateExcluded) {
    auto kg = oracle::random_kg(25, 4, 120, 5);
    auto emb = random_table(25, 4, 8, 5);
    PathFinder finder(kg);
    for (EntityId h = 0; h < 25; h += 3)
        for (EntityId t = 2; t < 25; t += 4) {
            Triple target{h, 1, t};
            auto all = finder.find(target, {});
            std::vector<PathScore> scores;
            for (const auto& p : all) scores.push_back(score_path(p, target, emb));
            auto top = select_topk(all, scores, 3);
            ASSERT_EQ(top.size(), std::min<std::size_t>(3, all.size()));
            double min_sel = 1e300, max_out = -1e300;
            for (std::size_t i = 0; i < all.size(); ++i) {
                const bool in = std::find(top.begin(), top.end(), all[i]) != top.end();
                if (in) min_sel = std::min(min_sel, scores[i].mean);
                else max_out = std::max(max_out, scores[i].mean);
            }
            if (!top.empty() && top.size() < all.size()) {
                EXPECT_GE(min_sel, max_out);
            }
        }
}

TEST(PathModel, EncodeSingleStepIsOneCellStep) {
    auto emb = random_table(3, 2, 4, 2);
    PathModel m(4, 5, 3, 8);
    std::mt19937_64 rng(2);
    m.init(rng);
    Triple s{0, 1, 2};
    auto got = m.encode(make_path({s}), emb);
    std::vector<double> x;
    for (double v : emb.entity(0)) x.push_back(v);
    for (double v : emb.relation(1)) x.push_back(v);
    for (double v : emb.entity(2)) x.push_back(v);
    nn::Lstm::Tape tape;
    auto want = m.encoder().forward(std::vector<std::span<const double>>{x}, tape);
    EXPECT_EQ(got, want);
}

TEST(PathModel, EncodingDependsOnStepOrder) {
    auto emb = random_table(4, 2, 4, 3);
    PathModel m(4, 5, 3, 8);
    std::mt19937_64 rng(3);
    m.init(rng);
    EXPECT_NE(m.encode(make_path({{0, 0, 1}, {1, 1, 2}}), emb), m.encode(make_path({{1, 1, 2}, {0, 0, 1}}), emb));
}

TEST(PathModel, NoPathsGivesHeadPrior) {
    PathModel m(4, 5, 3, 8);
    std::mt19937_64 rng(4);
    m.init(rng);
    EmbeddingTable emb(2, 1, 4);
    std::vector<double> zeros(15, 0.0);
    EXPECT_DOUBLE_EQ(m.score({}, emb), nn::sigmoid(m.head().forward(zeros)));
}

TEST(PathModel, ZeroWeightsGiveOneHalf) {
    PathModel m(4, 5, 3, 8);
    auto emb = random_table(3, 1, 4, 1);
    std::vector<ReachablePath> paths{make_path({{0, 0, 1}, {1, 0, 2}})};
    EXPECT_EQ(m.score(paths, emb), 0.5);
}

TEST(PathModel, OutputStrictlyInsideUnitInterval) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0, 2);
    auto kg = oracle::random_kg(12, 3, 60, 11);
    PathFinder finder(kg);
    PathModel m(4, 4, 3, 4);
    for (int i = 0; i < 10000; ++i) {
        if (i % 100 == 0) {
            for (auto* p : m.params())
                for (auto& v : p->value) v = g(rng);
        }
        auto emb = random_table(12, 3, 4, static_cast<std::uint64_t>(i));
        Triple target{static_cast<EntityId>(i % 12), 0, static_cast<EntityId>((i * 7 + 3) % 12)};
        auto paths = select_paths(finder, target, emb, {});
        const double s = m.score(paths, emb);
        EXPECT_GT(s, 0.0);
        EXPECT_LT(s, 1.0);
    }
}

TEST(PathModel, GradientMatchesFiniteDifferences) {
    auto emb = random_table(6, 3, 4, 9);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0, 0.5);
    for (std::size_t npaths : {0u, 1u, 2u, 3u}) {
        PathModel m(4, 6, 3, 5);
        m.init(rng);
        for (auto* p : m.params())
            for (auto& v : p->value) v += g(rng);
        std::vector<ReachablePath> paths{make_path({{0, 1, 2}, {2, 0, 5}}), make_path({{0, 2, 5}}),
                                         make_path({{0, 0, 1}, {1, 1, 3}, {3, 2, 5}})};
        paths.resize(npaths);
        const int label = static_cast<int>(npaths % 2);
        auto ps = m.params();
        nn::zero_grads(ps);
        PathModel::Tape tape;
        const double z = m.logit(paths, emb, tape);
        m.backward(tape, nn::sigmoid(z) - label);
        auto loss = [&] {
            PathModel::Tape t;
            return nn::bce_with_logit(m.logit(paths, emb, t), label);
        };
        EXPECT_LT(oracle::max_gradient_error(ps, loss), 1e-4) << npaths << " paths";
    }
}
