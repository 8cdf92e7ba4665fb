#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

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

} // namespace

TEST(Energy, TranslationIdentity) {
    EmbeddingTable emb(2, 1, 3);
    auto h = emb.entity(0), r = emb.relation(0), t = emb.entity(1);
    h[0] = 0.3, h[1] = -1, h[2] = 2;
    r[0] = 1, r[1] = 0.5, r[2] = -0.25;
    for (int k = 0; k < 3; ++k) t[k] = h[k] + r[k];
    EXPECT_EQ(energy(emb, {0, 0, 1}, Norm::l2), 0.0);
    EXPECT_EQ(energy(emb, {0, 0, 1}, Norm::l1), 0.0);
}

TEST(Energy, HandArithmetic) {
    std::vector<double> h{1, 0}, r{0, 1}, t{0, 0};
    EXPECT_DOUBLE_EQ(energy(h, r, t, Norm::l2), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(energy(h, r, t, Norm::l1), 2.0);
}

TEST(Energy, NonNegativeAndSwapSymmetric) {
    auto emb = random_table(10, 3, 7, 1);
    for (EntityId h = 0; h < 10; ++h) {
        for (EntityId t = 0; t < 10; ++t) {
            for (RelationId r = 0; r < 3; ++r) {
                const double e = energy(emb, {h, r, t}, Norm::l2);
                EXPECT_GE(e, 0.0);
                std::vector<double> neg_r(emb.relation(r).begin(), emb.relation(r).end());
                for (auto& x : neg_r) x = -x;
                EXPECT_NEAR(energy(emb.entity(t), neg_r, emb.entity(h), Norm::l2), e, 1e-12);
            }
        }
    }
}

namespace {

double table_loss(const EmbeddingTable& emb, const Triple& pos, const Triple& neg, double margin, Norm norm) {
    return std::max(0.0, margin + energy(emb, pos, norm) - energy(emb, neg, norm));
}

double margin_gradient_error(EmbeddingTable emb, const Triple& pos, const Triple& neg, double margin, Norm norm,
                             double floor = 1e-7) {
    const std::size_t d = emb.dim();
    nn::Param ent("ent", emb.num_entities(), d), rel("rel", emb.num_relations(), d);
    ent.value = emb.entity_data();
    rel.value = emb.relation_data();
    auto g = margin_gradient(emb, pos, neg, margin, norm);
    auto add = [&](nn::Param& p, std::uint32_t id, const std::vector<double>& v) {
        for (std::size_t k = 0; k < d; ++k) p.grad[id * d + k] += v[k];
    };
    add(ent, pos.head, g.pos_head);
    add(ent, pos.tail, g.pos_tail);
    add(ent, neg.head, g.neg_head);
    add(ent, neg.tail, g.neg_tail);
    add(rel, pos.relation, g.pos_relation);
    add(rel, neg.relation, g.neg_relation);
    return oracle::max_gradient_error({&ent, &rel}, [&] {
        emb.entity_data() = ent.value;
        emb.relation_data() = rel.value;
        return table_loss(emb, pos, neg, margin, norm);
    }, 1e-5, floor);
}

} // namespace

TEST(TransEGradient, ZeroInitialisedTable) {
    EmbeddingTable emb(4, 2, 8);
    auto g = margin_gradient(emb, {0, 0, 1}, {0, 0, 2}, 1.0, Norm::l2);
    EXPECT_DOUBLE_EQ(g.loss, 1.0);
    EXPECT_LT(margin_gradient_error(emb, {0, 0, 1}, {0, 0, 2}, 1.0, Norm::l2), 1e-4);
}

TEST(TransEGradient, RandomTablesMatchFiniteDifferences) {
    for (std::size_t d : {4u, 8u, 16u}) {
        for (auto norm : {Norm::l2, Norm::l1}) {
            for (std::uint64_t seed = 1; seed <= 5; ++seed) {
                auto emb = random_table(6, 3, d, seed);
                // a large margin keeps the hinge active; with a loss near 50 the
                // central difference carries ~1e-10 of rounding noise
                const Triple pos{0, 1, 2};
                for (Triple neg : {Triple{0, 1, 3}, Triple{4, 1, 2}, Triple{2, 1, 2}}) {
                    EXPECT_LT(margin_gradient_error(emb, pos, neg, 50.0, norm, 1e-5), 1e-4)
                        << "d=" << d << " seed=" << seed;
                }
            }
        }
    }
}

TEST(TransEGradient, InactiveHingeHasNoGradient) {
    auto emb = random_table(4, 1, 4, 3);
    auto g = margin_gradient(emb, {0, 0, 1}, {0, 0, 2}, -100.0, Norm::l2);
    EXPECT_EQ(g.loss, 0.0);
    for (double x : g.pos_head) EXPECT_EQ(x, 0.0);
}

namespace {

// two relation clusters over 20 entities: r0 maps 0..9 forward by one, r1
// maps 10..19 forward by three
std::vector<Triple> two_clusters() {
    std::vector<Triple> ts;
    for (std::uint32_t i = 0; i < 10; ++i) {
        ts.push_back({i, 0, (i + 1) % 10});
        ts.push_back({10 + i, 1, 10 + (i + 3) % 10});
    }
    return ts;
}

} // namespace

TEST(TrainTransE, SeparatesTrueFromCorrupted) {
    auto ts = two_clusters();
    TransEConfig cfg;
    cfg.dim = 16;
    cfg.epochs = 300;
    cfg.batch_size = 5;
    cfg.seed = 3;
    auto emb = train_transe(ts, 20, 2, cfg);
    KnowledgeGraph kg(20, 2, ts);
    double pos = 0, neg = 0;
    std::size_t np = 0, nn_ = 0;
    for (const auto& t : ts) {
        pos += energy(emb, t, Norm::l2);
        ++np;
        for (EntityId e = 0; e < 20; ++e) {
            Triple c{t.head, t.relation, e};
            if (kg.contains(c)) continue;
            neg += energy(emb, c, Norm::l2);
            ++nn_;
        }
    }
    EXPECT_LT(pos / static_cast<double>(np), neg / static_cast<double>(nn_));
}

TEST(TrainTransE, EntityNormsAreOneAfterEveryEpoch) {
    auto ts = two_clusters();
    for (int epochs = 1; epochs <= 5; ++epochs) {
        TransEConfig cfg;
        cfg.dim = 8;
        cfg.epochs = epochs;
        cfg.seed = 1;
        auto emb = train_transe(ts, 20, 2, cfg);
        for (EntityId e = 0; e < 20; ++e) EXPECT_NEAR(vector_norm(emb.entity(e), Norm::l2), 1.0, 1e-9);
    }
}

TEST(TrainTransE, DeterministicUnderSeed) {
    auto ts = two_clusters();
    TransEConfig cfg;
    cfg.dim = 8;
    cfg.epochs = 20;
    cfg.seed = 9;
    EXPECT_TRUE(train_transe(ts, 20, 2, cfg) == train_transe(ts, 20, 2, cfg));
    cfg.seed = 10;
    auto a = train_transe(ts, 20, 2, cfg);
    cfg.seed = 9;
    EXPECT_FALSE(a == train_transe(ts, 20, 2, cfg));
}

TEST(TrainTransE, EarlyStopKeepsBestValidationTable) {
    auto ts = two_clusters();
    std::vector<LabeledTriple> valid;
    for (const auto& t : ts) {
        valid.push_back({t, 1, NoiseKind::none});
        valid.push_back({{t.head, t.relation, (t.tail + 5) % 20}, 0, NoiseKind::replaced_tail});
    }
    TransEConfig cfg;
    cfg.dim = 8;
    cfg.epochs = 400;
    cfg.eval_every = 5;
    cfg.patience = 2;
    TransEHistory h;
    auto emb = train_transe(ts, 20, 2, cfg, valid, &h);
    ASSERT_FALSE(h.validation_gap.empty());
    const double best = *std::max_element(h.validation_gap.begin(), h.validation_gap.end());
    EXPECT_DOUBLE_EQ(energy_gap(emb, valid, Norm::l2), best);
    EXPECT_EQ(h.best_epoch % cfg.eval_every, 0);
}

TEST(TrainTransE, RejectsEmptyGraph) {
    EXPECT_THROW(train_transe(std::vector<Triple>{}, 2, 1, {}), InputError);
}

TEST(Tef, OneHalfAtThreshold) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 20), l(0.01, 10);
    for (int i = 0; i < 1000; ++i) {
        const double d = u(rng);
        EXPECT_EQ(tef_probability(d, d, l(rng)), 0.5);
    }
}

TEST(Tef, HandValueAndOrientation) {
    EXPECT_NEAR(tef_probability(0.0, 1.0, 1.0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
    EXPECT_NEAR(tef_probability(0.0, 1.0, 1.0), 0.7311, 5e-5);
    EXPECT_GT(tef_probability(0.5, 1.0, 2.0), 0.5);
    EXPECT_LT(tef_probability(1.5, 1.0, 2.0), 0.5);
}

TEST(Tef, StrictlyDecreasingInEnergy) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 10);
    for (int i = 0; i < 10000; ++i) {
        double a = u(rng), b = u(rng);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        EXPECT_GT(tef_probability(a, 5.0, 1.0), tef_probability(b, 5.0, 1.0));
    }
}

TEST(DeltaSearch, MidpointBetweenClasses) {
    std::vector<ScoredEnergy> s{{1, 1}, {2, 1}, {4, 0}, {5, 0}};
    EXPECT_DOUBLE_EQ(best_cutoff(s), 3.0);
    EXPECT_DOUBLE_EQ(cutoff_accuracy(s, 3.0), 1.0);
}

TEST(DeltaSearch, AllPositiveGoesAboveMax) {
    std::vector<ScoredEnergy> s{{1, 1}, {2, 1}};
    const double c = best_cutoff(s);
    EXPECT_GT(c, 2.0);
    EXPECT_DOUBLE_EQ(cutoff_accuracy(s, c), 1.0);
}

TEST(DeltaSearch, MatchesExhaustiveScan) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 1000;
        std::vector<ScoredEnergy> s;
        std::normal_distribution<double> pos(2, 1), neg(3, 1);
        for (std::size_t i = 0; i < n; ++i) {
            const int label = static_cast<int>(rng() % 2);
            // some duplicated energies
            double e = std::abs(label ? pos(rng) : neg(rng));
            if (i % 7 == 0) e = std::round(e);
            s.push_back({e, label});
        }
        const double c = best_cutoff(s);
        EXPECT_GE(c, 0.0);
        EXPECT_DOUBLE_EQ(cutoff_accuracy(s, c), oracle::best_scan_accuracy(s)) << "trial " << trial;
        for (double other : candidate_cutoffs(s)) EXPECT_GE(cutoff_accuracy(s, c), cutoff_accuracy(s, other));
    }
}

TEST(DeltaSearch, PerRelationWithGlobalFallback) {
    EmbeddingTable emb(4, 3, 1);
    // energy of (h, r, t) with d = 1 is |h + r - t|
    emb.entity(0)[0] = 0;
    emb.entity(1)[0] = 1;
    emb.entity(2)[0] = 5;
    emb.entity(3)[0] = 9;
    emb.relation(0)[0] = 1;
    emb.relation(1)[0] = 0;
    std::vector<LabeledTriple> valid{
        {{0, 0, 1}, 1, NoiseKind::none},          // E = 0
        {{0, 0, 2}, 0, NoiseKind::replaced_tail},  // E = 4
        {{0, 1, 1}, 1, NoiseKind::none},          // E = 1
        {{0, 1, 3}, 0, NoiseKind::replaced_tail},  // E = 9
    };
    auto th = search_delta_r(emb, valid, Norm::l2);
    EXPECT_DOUBLE_EQ(th.delta[0], 2.0);
    EXPECT_DOUBLE_EQ(th.delta[1], 5.0);
    EXPECT_FALSE(th.from_validation[2]);
    EXPECT_DOUBLE_EQ(th.delta[2], th.global);
    std::vector<ScoredEnergy> all{{0, 1}, {4, 0}, {1, 1}, {9, 0}};
    EXPECT_DOUBLE_EQ(th.global, best_cutoff(all));
    EXPECT_THROW(search_delta_r(emb, {}, Norm::l2), InputError);
}

TEST(EmbeddingFile, RoundTripIsExact) {
    auto emb = random_table(7, 3, 5, 8);
    std::stringstream buf;
    write_embeddings(buf, emb);
    auto back = read_embeddings(buf);
    EXPECT_TRUE(back == emb);
}

TEST(EmbeddingFile, RejectsDamagedInput) {
    std::stringstream bad("NOTEMB........");
    EXPECT_THROW(read_embeddings(bad), InputError);
    auto emb = random_table(3, 1, 2, 1);
    std::stringstream buf;
    write_embeddings(buf, emb);
    auto s = buf.str();
    std::stringstream cut(s.substr(0, s.size() - 4));
    EXPECT_THROW(read_embeddings(cut), InputError);
}
