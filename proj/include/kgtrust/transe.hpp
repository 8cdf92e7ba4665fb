#ifndef KGTRUST_TRANSE_HPP
#define KGTRUST_TRANSE_HPP

// Translation embeddings and the energy-to-probability transform.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "binary_io.hpp"
#include "kg_store.hpp"
#include "nn.hpp"

namespace kgt {

enum class Norm { l1, l2 };

class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(std::size_t num_entities, std::size_t num_relations, std::size_t dim)
        : dim_(dim), entities_(num_entities * dim, 0.0), relations_(num_relations * dim, 0.0) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t num_entities() const noexcept { return dim_ ? entities_.size() / dim_ : 0; }
    std::size_t num_relations() const noexcept { return dim_ ? relations_.size() / dim_ : 0; }

    std::span<double> entity(EntityId e) { return {entities_.data() + e * dim_, dim_}; }
    std::span<const double> entity(EntityId e) const { return {entities_.data() + e * dim_, dim_}; }
    std::span<double> relation(RelationId r) { return {relations_.data() + r * dim_, dim_}; }
    std::span<const double> relation(RelationId r) const { return {relations_.data() + r * dim_, dim_}; }

    std::vector<double>& entity_data() noexcept { return entities_; }
    const std::vector<double>& entity_data() const noexcept { return entities_; }
    std::vector<double>& relation_data() noexcept { return relations_; }
    const std::vector<double>& relation_data() const noexcept { return relations_; }

    friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> entities_, relations_;
};

inline double vector_norm(std::span<const double> v, Norm norm) {
    double s = 0.0;
    if (norm == Norm::l1) {
        for (double x : v) s += std::abs(x);
        return s;
    }
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline void normalize(std::span<double> v) {
    double n = vector_norm(v, Norm::l2);
    if (n > 0)
        for (auto& x : v) x /= n;
}

/// E(h,r,t) = ||h + r - t||.
inline double energy(std::span<const double> h, std::span<const double> r, std::span<const double> t, Norm norm) {
    double s = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        const double d = h[k] + r[k] - t[k];
        s += norm == Norm::l1 ? std::abs(d) : d * d;
    }
    return norm == Norm::l1 ? s : std::sqrt(s);
}

inline double energy(const EmbeddingTable& emb, const Triple& t, Norm norm) {
    return energy(emb.entity(t.head), emb.relation(t.relation), emb.entity(t.tail), norm);
}

/// dE/dx for x = h + r - t. The subgradient at x = 0 is taken as 0.
inline void energy_gradient(std::span<const double> h, std::span<const double> r, std::span<const double> t,
                            Norm norm, std::span<double> out) {
    if (norm == Norm::l1) {
        for (std::size_t k = 0; k < h.size(); ++k) {
            const double d = h[k] + r[k] - t[k];
            out[k] = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
        }
        return;
    }
    const double e = energy(h, r, t, norm);
    for (std::size_t k = 0; k < h.size(); ++k) out[k] = e > 0 ? (h[k] + r[k] - t[k]) / e : 0.0;
}

/// Gradient of max(0, margin + E(pos) - E(neg)) by slot. Entity slots may
/// alias (a tail-corrupted negative shares the head); callers sum them.
struct MarginGradient {
    double loss = 0.0;
    std::vector<double> pos_head, pos_tail, neg_head, neg_tail, pos_relation, neg_relation;
};

inline MarginGradient margin_gradient(const EmbeddingTable& emb, const Triple& pos, const Triple& neg, double margin,
                                      Norm norm) {
    const std::size_t d = emb.dim();
    MarginGradient g;
    g.pos_head.assign(d, 0.0);
    g.pos_tail.assign(d, 0.0);
    g.neg_head.assign(d, 0.0);
    g.neg_tail.assign(d, 0.0);
    g.pos_relation.assign(d, 0.0);
    g.neg_relation.assign(d, 0.0);
    const double l = margin + energy(emb, pos, norm) - energy(emb, neg, norm);
    if (l <= 0) return g;
    g.loss = l;
    std::vector<double> gp(d), gn(d);
    energy_gradient(emb.entity(pos.head), emb.relation(pos.relation), emb.entity(pos.tail), norm, gp);
    energy_gradient(emb.entity(neg.head), emb.relation(neg.relation), emb.entity(neg.tail), norm, gn);
    for (std::size_t k = 0; k < d; ++k) {
        g.pos_head[k] = gp[k];
        g.pos_relation[k] = gp[k];
        g.pos_tail[k] = -gp[k];
        g.neg_head[k] = -gn[k];
        g.neg_relation[k] = -gn[k];
        g.neg_tail[k] = gn[k];
    }
    return g;
}

struct TransEConfig {
    std::size_t dim = 100;
    double margin = 1.0;
    Norm norm = Norm::l2;
    double learning_rate = 0.01;
    int epochs = 500;
    std::size_t batch_size = 100;
    int eval_every = 10;    // epochs between validation-gap checks
    int patience = 5;       // checks without improvement before stopping
    std::uint64_t seed = 1;
};

struct TransEHistory {
    std::vector<double> epoch_loss;
    std::vector<double> validation_gap;
    int best_epoch = -1;
    int epochs_run = 0;
};

/// Mean energy of negatives minus mean energy of positives.
inline double energy_gap(const EmbeddingTable& emb, std::span<const LabeledTriple> labeled, Norm norm) {
    double pos = 0, neg = 0;
    std::size_t np = 0, nn_ = 0;
    for (const auto& l : labeled) {
        const double e = energy(emb, l.triple, norm);
        if (l.label) {
            pos += e;
            ++np;
        } else {
            neg += e;
            ++nn_;
        }
    }
    if (!np || !nn_) return 0.0;
    return neg / static_cast<double>(nn_) - pos / static_cast<double>(np);
}

/// Mini-batch SGD on the margin ranking loss with uniform head-or-tail
/// corruption. Entity vectors are renormalised after every epoch. With a
/// validation set, training keeps the table with the best energy gap and
/// stops after `patience` checks without improvement.
inline EmbeddingTable train_transe(std::span<const Triple> triples, std::size_t num_entities,
                                   std::size_t num_relations, const TransEConfig& cfg,
                                   std::span<const LabeledTriple> validation = {}, TransEHistory* history = nullptr,
                                   std::ostream* log = nullptr) {
    if (triples.empty()) throw InputError("cannot train embeddings on an empty graph");
    if (cfg.dim < 1 || !(cfg.margin > 0)) throw InputError("invalid embedding configuration");
    const std::size_t d = cfg.dim;
    EmbeddingTable emb(num_entities, num_relations, d);
    std::mt19937_64 rng(cfg.seed);
    const double bound = 6.0 / std::sqrt(static_cast<double>(d));
    std::uniform_real_distribution<double> init(-bound, bound);
    for (auto& x : emb.entity_data()) x = init(rng);
    for (auto& x : emb.relation_data()) x = init(rng);
    for (std::size_t r = 0; r < num_relations; ++r) normalize(emb.relation(static_cast<RelationId>(r)));
    for (std::size_t e = 0; e < num_entities; ++e) normalize(emb.entity(static_cast<EntityId>(e)));

    TransEHistory local_history;
    TransEHistory& hist = history ? *history : local_history;
    hist = {};
    std::vector<std::size_t> order(triples.size());
    std::iota(order.begin(), order.end(), 0);
    std::uniform_int_distribution<EntityId> any_entity(0, static_cast<EntityId>(num_entities - 1));
    std::bernoulli_distribution coin(0.5);

    EmbeddingTable best = emb;
    double best_gap = -std::numeric_limits<double>::infinity();
    int stale = 0;

    std::unordered_map<EntityId, std::vector<double>> ent_grad;
    std::unordered_map<RelationId, std::vector<double>> rel_grad;
    auto acc = [d](auto& map, std::uint32_t id, std::span<const double> g) {
        auto& v = map[id];
        if (v.empty()) v.assign(d, 0.0);
        for (std::size_t k = 0; k < d; ++k) v[k] += g[k];
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            ent_grad.clear();
            rel_grad.clear();
            for (std::size_t i = start; i < end; ++i) {
                const Triple pos = triples[order[i]];
                Triple neg = pos;
                if (coin(rng))
                    neg.head = any_entity(rng);
                else
                    neg.tail = any_entity(rng);
                auto g = margin_gradient(emb, pos, neg, cfg.margin, cfg.norm);
                if (g.loss <= 0) continue;
                epoch_loss += g.loss;
                acc(ent_grad, pos.head, g.pos_head);
                acc(ent_grad, pos.tail, g.pos_tail);
                acc(ent_grad, neg.head, g.neg_head);
                acc(ent_grad, neg.tail, g.neg_tail);
                acc(rel_grad, pos.relation, g.pos_relation);
                acc(rel_grad, neg.relation, g.neg_relation);
            }
            if (!std::isfinite(epoch_loss))
                throw Error("embedding training diverged at epoch " + std::to_string(epoch) +
                            " (non-finite margin loss); lower the learning rate");
            for (auto& [id, g] : ent_grad) {
                auto v = emb.entity(id);
                for (std::size_t k = 0; k < d; ++k) v[k] -= cfg.learning_rate * g[k];
            }
            for (auto& [id, g] : rel_grad) {
                auto v = emb.relation(id);
                for (std::size_t k = 0; k < d; ++k) v[k] -= cfg.learning_rate * g[k];
            }
        }
        for (std::size_t e = 0; e < num_entities; ++e) normalize(emb.entity(static_cast<EntityId>(e)));
        hist.epoch_loss.push_back(epoch_loss);
        hist.epochs_run = epoch + 1;

        const bool check = !validation.empty() && ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs);
        if (check) {
            const double gap = energy_gap(emb, validation, cfg.norm);
            hist.validation_gap.push_back(gap);
            if (log) *log << "transe epoch " << epoch + 1 << " loss " << epoch_loss << " valid gap " << gap << '\n';
            if (gap > best_gap) {
                best_gap = gap;
                best = emb;
                hist.best_epoch = epoch + 1;
                stale = 0;
            } else if (++stale >= cfg.patience) {
                break;
            }
        }
    }
    if (validation.empty()) {
        hist.best_epoch = hist.epochs_run;
        return emb;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Thresholds and the energy-to-probability transform

/// P(E) = 1 / (1 + exp(-lambda (delta - E))).
inline double tef_probability(double energy_value, double delta, double lambda) {
    return nn::probability(lambda * (delta - energy_value));
}

struct RelationThresholds {
    std::vector<double> delta;       // per relation
    std::vector<char> from_validation;
    double global = 0.0;

    double operator[](RelationId r) const { return delta.at(r); }
};

struct ScoredEnergy {
    double energy;
    int label;
};

/// Accuracy of the rule "energy < cutoff => positive".
inline double cutoff_accuracy(std::span<const ScoredEnergy> sample, double cutoff) {
    std::size_t correct = 0;
    for (const auto& s : sample) correct += ((s.energy < cutoff) == (s.label == 1));
    return static_cast<double>(correct) / static_cast<double>(sample.size());
}

/// Candidate cutoffs: midpoints between consecutive distinct sorted energies,
/// plus one point below the minimum and one above the maximum (clamped at 0).
inline std::vector<double> candidate_cutoffs(std::span<const ScoredEnergy> sample) {
    std::vector<double> e;
    e.reserve(sample.size());
    for (const auto& s : sample) e.push_back(s.energy);
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    std::vector<double> c;
    if (e.empty()) return c;
    c.push_back(std::max(0.0, e.front() - 1.0));
    for (std::size_t i = 0; i + 1 < e.size(); ++i) c.push_back(0.5 * (e[i] + e[i + 1]));
    c.push_back(e.back() + 1.0);
    return c;
}

/// Cutoff maximising accuracy; the smallest such candidate wins ties.
inline double best_cutoff(std::span<const ScoredEnergy> sample) {
    if (sample.empty()) throw InputError("cannot search a threshold on an empty sample");
    std::vector<ScoredEnergy> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.energy < b.energy; });
    auto cands = candidate_cutoffs(sorted);
    // sweep: accuracy(c) = (#pos with E < c) + (#neg with E >= c)
    std::size_t total_neg = 0;
    for (const auto& s : sorted) total_neg += (s.label == 0);
    std::size_t below_pos = 0, below_neg = 0, idx = 0, best_correct = 0;
    double best = cands.front();
    bool first = true;
    for (double c : cands) {
        while (idx < sorted.size() && sorted[idx].energy < c) {
            if (sorted[idx].label) ++below_pos; else ++below_neg;
            ++idx;
        }
        const std::size_t correct = below_pos + (total_neg - below_neg);
        if (first || correct > best_correct) {
            best_correct = correct;
            best = c;
            first = false;
        }
    }
    return best;
}

/// Per-relation cutoff maximising validation accuracy of "E < delta_r";
/// relations without validation triples fall back to the global cutoff.
inline RelationThresholds search_delta_r(const EmbeddingTable& emb, std::span<const LabeledTriple> valid, Norm norm) {
    if (valid.empty()) throw InputError("threshold search needs a non-empty validation split");
    const std::size_t m = emb.num_relations();
    std::vector<std::vector<ScoredEnergy>> per(m);
    std::vector<ScoredEnergy> all;
    all.reserve(valid.size());
    for (const auto& l : valid) {
        ScoredEnergy s{energy(emb, l.triple, norm), l.label};
        per.at(l.triple.relation).push_back(s);
        all.push_back(s);
    }
    RelationThresholds th;
    th.global = best_cutoff(all);
    th.delta.assign(m, th.global);
    th.from_validation.assign(m, 0);
    for (std::size_t r = 0; r < m; ++r) {
        if (per[r].empty()) continue;
        th.delta[r] = best_cutoff(per[r]);
        th.from_validation[r] = 1;
    }
    return th;
}

// ---------------------------------------------------------------------------
// Embedding file: "KGTEMB" magic, u32 version, u64 N, u64 M, u64 d, then
// N*d entity values and M*d relation values, row-major little-endian f64.

inline constexpr std::uint32_t kEmbeddingFormatVersion = 1;

inline void write_embeddings(std::ostream& out, const EmbeddingTable& emb) {
    io::Writer w(out);
    w.bytes("KGTEMB");
    w.u32(kEmbeddingFormatVersion);
    w.u64(emb.num_entities());
    w.u64(emb.num_relations());
    w.u64(emb.dim());
    w.f64s(emb.entity_data());
    w.f64s(emb.relation_data());
}

inline EmbeddingTable read_embeddings(std::istream& in, const std::string& source = "<embeddings>") {
    io::Reader r(in, source);
    r.expect_magic("KGTEMB");
    if (auto v = r.u32(); v != kEmbeddingFormatVersion) r.fail("unsupported embedding format version " + std::to_string(v));
    const auto n = r.u64(), m = r.u64(), d = r.u64();
    if (d == 0 || d > 100000 || n > (1ULL << 31) || m > (1ULL << 31)) r.fail("implausible embedding header");
    EmbeddingTable emb(n, m, d);
    r.f64s(emb.entity_data());
    r.f64s(emb.relation_data());
    for (double x : emb.entity_data())
        if (!std::isfinite(x)) r.fail("non-finite entity embedding value");
    for (double x : emb.relation_data())
        if (!std::isfinite(x)) r.fail("non-finite relation embedding value");
    return emb;
}

inline void save_embeddings(const std::string& path, const EmbeddingTable& emb) {
    io::atomic_write(path, [&](std::ostream& o) { write_embeddings(o, emb); });
}

inline EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open embedding file: " + path);
    return read_embeddings(in, path);
}

} // namespace kgt

#endif // KGTRUST_TRANSE_HPP
