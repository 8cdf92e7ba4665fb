#ifndef KGTRUST_PATH_INFERENCE_HPP
#define KGTRUST_PATH_INFERENCE_HPP

// Reachable-path evidence: enumerate simple directed paths from head to tail,
// keep the TopK most semantically similar to the target triple, encode each
// with an LSTM over concatenated (head, relation, tail) embeddings and map the
// stitched encodings to a probability.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "kg_store.hpp"
#include "nn.hpp"
#include "transe.hpp"

namespace kgt {

struct ReachablePath {
    std::vector<Triple> steps;

    std::size_t length() const noexcept { return steps.size(); }
    friend auto operator<=>(const ReachablePath&, const ReachablePath&) = default;
};

struct PathSearchOptions {
    int max_length = 4;          // K
    std::size_t budget = 10000;  // paths per pair
};

/// Depth-first enumeration with reusable scratch space sized to the graph.
/// Not thread-safe; use one finder per thread.
class PathFinder {
public:
    explicit PathFinder(const KnowledgeGraph& kg)
        : kg_(kg), dist_(kg.num_entities(), kUnset), on_path_(kg.num_entities(), 0) {}

    /// All simple paths head -> tail with at most K edges, one path per
    /// relation on each edge, in lexicographic (node, relation) order,
    /// truncated at the budget. The single-edge path equal to `target` is
    /// never emitted.
    std::vector<ReachablePath> find(const Triple& target, const PathSearchOptions& opt) {
        if (opt.max_length < 1) throw InputError("path length bound K must be >= 1");
        std::vector<ReachablePath> out;
        const EntityId h = target.head, t = target.tail;
        if (h == t) return out;
        // backward BFS: dist_[v] = shortest distance v -> t, limited to K
        touched_.clear();
        dist_[t] = 0;
        touched_.push_back(t);
        for (std::size_t q = 0; q < touched_.size(); ++q) {
            const EntityId v = touched_[q];
            if (dist_[v] >= opt.max_length) continue;
            for (const auto& e : kg_.in_edges(v)) {
                if (dist_[e.node] == kUnset) {
                    dist_[e.node] = dist_[v] + 1;
                    touched_.push_back(e.node);
                }
            }
        }
        if (dist_[h] != kUnset) {
            stack_.clear();
            on_path_[h] = 1;
            dfs(h, target, opt, out);
            on_path_[h] = 0;
        }
        for (EntityId v : touched_) dist_[v] = kUnset;
        return out;
    }

private:
    static constexpr int kUnset = std::numeric_limits<int>::max();

    void dfs(EntityId v, const Triple& target, const PathSearchOptions& opt, std::vector<ReachablePath>& out) {
        const int used = static_cast<int>(stack_.size());
        for (const auto& e : kg_.out_edges(v)) {
            if (out.size() >= opt.budget) return;
            const EntityId w = e.node;
            if (on_path_[w] || dist_[w] == kUnset || used + 1 + dist_[w] > opt.max_length) continue;
            const Triple step{v, e.relation, w};
            if (w == target.tail) {
                if (used == 0 && step == target) continue;
                stack_.push_back(step);
                out.push_back({stack_});
                stack_.pop_back();
                continue;
            }
            stack_.push_back(step);
            on_path_[w] = 1;
            dfs(w, target, opt, out);
            on_path_[w] = 0;
            stack_.pop_back();
        }
    }

    const KnowledgeGraph& kg_;
    std::vector<int> dist_;
    std::vector<char> on_path_;
    std::vector<EntityId> touched_;
    std::vector<Triple> stack_;
};

inline std::vector<ReachablePath> enumerate_paths(const KnowledgeGraph& kg, const Triple& target,
                                                  const PathSearchOptions& opt = {}) {
    PathFinder f(kg);
    return f.find(target, opt);
}

/// Mean cosine similarities between a path and the target triple. `tail`
/// compares the target tail with the path's head entities and `head` the
/// target head with the path's tail entities (swapped pairing reverses this).
struct PathScore {
    double relation = 0, tail = 0, head = 0, mean = 0;
};

enum class EntityPairing { as_printed, swapped };

inline double cosine(std::span<const double> a, std::span<const double> b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline PathScore score_path(const ReachablePath& path, const Triple& target, const EmbeddingTable& emb,
                            EntityPairing pairing = EntityPairing::as_printed) {
    PathScore s;
    if (path.steps.empty()) return s;
    const auto r = emb.relation(target.relation);
    const auto h = emb.entity(target.head);
    const auto t = emb.entity(target.tail);
    for (const auto& step : path.steps) {
        s.relation += cosine(r, emb.relation(step.relation));
        if (pairing == EntityPairing::as_printed) {
            s.tail += cosine(t, emb.entity(step.head));
            s.head += cosine(h, emb.entity(step.tail));
        } else {
            s.tail += cosine(t, emb.entity(step.tail));
            s.head += cosine(h, emb.entity(step.head));
        }
    }
    const double n = static_cast<double>(path.steps.size());
    s.relation /= n;
    s.tail /= n;
    s.head /= n;
    s.mean = (s.relation + s.tail + s.head) / 3.0;
    return s;
}

/// The `k` paths with the highest mean similarity, best first. Ties go to
/// shorter paths, then to the lexicographically smaller path.
inline std::vector<ReachablePath> select_topk(std::span<const ReachablePath> paths, std::span<const PathScore> scores,
                                              std::size_t k) {
    if (paths.size() != scores.size()) throw InputError("one score per path required");
    std::vector<std::size_t> idx(paths.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a].mean != scores[b].mean) return scores[a].mean > scores[b].mean;
        if (paths[a].length() != paths[b].length()) return paths[a].length() < paths[b].length();
        return paths[a] < paths[b];
    };
    const std::size_t take = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(), better);
    std::vector<ReachablePath> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(paths[idx[i]]);
    return out;
}

struct PathSelectionOptions {
    PathSearchOptions search;
    std::size_t topk = 3;
    EntityPairing pairing = EntityPairing::as_printed;
};

/// Search, score and select in one call.
inline std::vector<ReachablePath> select_paths(PathFinder& finder, const Triple& target, const EmbeddingTable& emb,
                                               const PathSelectionOptions& opt) {
    auto paths = finder.find(target, opt.search);
    std::vector<PathScore> scores;
    scores.reserve(paths.size());
    for (const auto& p : paths) scores.push_back(score_path(p, target, emb, opt.pairing));
    return select_topk(paths, scores, opt.topk);
}

/// LSTM path encoder plus the stitched-encoding head.
///   RP = sigmoid(W2 relu(W1 [h_1; ...; h_TopK] + b1) + b2)
/// Missing path slots contribute zero vectors.
class PathModel {
public:
    struct Tape {
        std::vector<std::vector<double>> units;  // storage for step inputs
        std::vector<nn::Lstm::Tape> encoders;
        std::vector<double> stitched;
        nn::Mlp::Tape head;
    };

    PathModel() = default;
    PathModel(std::size_t dim, std::size_t hidden, std::size_t topk, std::size_t head_hidden)
        : encoder_("rp.lstm", 3 * dim, hidden), head_("rp.head", topk * hidden, {head_hidden}), topk_(topk) {}

    void init(std::mt19937_64& rng) {
        encoder_.init(rng);
        head_.init(rng);
    }

    std::size_t topk() const noexcept { return topk_; }
    std::size_t hidden() const noexcept { return encoder_.hidden_size(); }

    /// Final hidden state of the LSTM over s_j = [head; relation; tail].
    std::vector<double> encode(const ReachablePath& path, const EmbeddingTable& emb) const {
        std::vector<std::vector<double>> units;
        nn::Lstm::Tape tape;
        return encode(path, emb, units, tape);
    }

    double logit(std::span<const ReachablePath> paths, const EmbeddingTable& emb, Tape& tape) const {
        const std::size_t H = hidden();
        tape.stitched.assign(topk_ * H, 0.0);
        tape.encoders.assign(std::min(paths.size(), topk_), {});
        tape.units.clear();
        std::size_t total = 0;
        for (std::size_t p = 0; p < tape.encoders.size(); ++p) total += paths[p].length();
        tape.units.reserve(total);  // spans into units must stay valid
        for (std::size_t p = 0; p < tape.encoders.size(); ++p) {
            auto h = encode(paths[p], emb, tape.units, tape.encoders[p]);
            std::copy(h.begin(), h.end(), tape.stitched.begin() + static_cast<std::ptrdiff_t>(p * H));
        }
        return head_.forward(tape.stitched, tape.head);
    }

    double score(std::span<const ReachablePath> paths, const EmbeddingTable& emb) const {
        Tape t;
        return nn::probability(logit(paths, emb, t));
    }

    void backward(Tape& tape, double dlogit) {
        const std::size_t H = hidden();
        std::vector<double> dstitched(tape.stitched.size());
        head_.backward(tape.head, dlogit, dstitched);
        for (std::size_t p = 0; p < tape.encoders.size(); ++p)
            encoder_.backward(tape.encoders[p], std::span<const double>(dstitched).subspan(p * H, H));
    }

    nn::ParamList params() {
        auto ps = encoder_.params();
        for (auto* p : head_.params()) ps.push_back(p);
        return ps;
    }

    nn::Lstm& encoder() noexcept { return encoder_; }
    nn::Mlp& head() noexcept { return head_; }

private:
    std::vector<double> encode(const ReachablePath& path, const EmbeddingTable& emb,
                               std::vector<std::vector<double>>& units, nn::Lstm::Tape& tape) const {
        const std::size_t d = emb.dim();
        const std::size_t first = units.size();
        for (const auto& s : path.steps) {
            auto& u = units.emplace_back(3 * d);
            auto h = emb.entity(s.head), r = emb.relation(s.relation), t = emb.entity(s.tail);
            std::copy(h.begin(), h.end(), u.begin());
            std::copy(r.begin(), r.end(), u.begin() + static_cast<std::ptrdiff_t>(d));
            std::copy(t.begin(), t.end(), u.begin() + static_cast<std::ptrdiff_t>(2 * d));
        }
        std::vector<std::span<const double>> xs(units.begin() + static_cast<std::ptrdiff_t>(first), units.end());
        return encoder_.forward(xs, tape);
    }

    nn::Lstm encoder_;
    nn::Mlp head_;
    std::size_t topk_ = 3;
};

} // namespace kgt

#endif // KGTRUST_PATH_INFERENCE_HPP
