#ifndef KGTRUST_FEATURES_HPP
#define KGTRUST_FEATURES_HPP

// Per-triple inputs of the three estimators: raw ResourceRank features, the
// translation energy, and the selected reachable paths. Everything here is a
// pure function of the graph and the frozen embeddings, so it can be computed
// once (or loaded from cache) and reused across training epochs.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <memory>
#include <numeric>
#include <span>
#include <thread>
#include <unordered_map>
#include <vector>

#include "kg_store.hpp"
#include "path_inference.hpp"
#include "resource_rank.hpp"
#include "transe.hpp"

namespace kgt {

struct PreparedExample {
    Triple triple;
    int label = 1;
    NoiseKind noise = NoiseKind::none;
    RRFeatureVector rr_raw{};
    double energy = 0.0;
    std::vector<ReachablePath> paths;  // at most TopK, best first
};

struct ExtractionOptions {
    ResourceOptions resource;
    std::uint32_t max_depth = 10;
    PathSelectionOptions paths;
    Norm norm = Norm::l2;
};

/// Resource vectors keyed by head entity, aligned with the node order of
/// build_head_subgraph.
struct ResourceRecord {
    std::vector<EntityId> nodes;
    std::vector<double> mass;
};
using ResourceCache = std::unordered_map<EntityId, ResourceRecord>;

/// Selected paths keyed by target triple.
using PathCache = std::unordered_map<Triple, std::vector<ReachablePath>, TripleHash>;

class FeatureExtractor {
public:
    FeatureExtractor(const KnowledgeGraph& kg, const EmbeddingTable& emb, ExtractionOptions opt,
                     const ResourceCache* resource_cache = nullptr, const PathCache* path_cache = nullptr,
                     std::size_t memo_capacity = 1024)
        : kg_(kg), emb_(emb), opt_(opt), resources_(resource_cache), path_cache_(path_cache), finder_(kg),
          memo_capacity_(memo_capacity) {}

    const ExtractionOptions& options() const noexcept { return opt_; }

    struct HeadState {
        HeadSubgraph sub;
        ResourceVector rv;
    };

    /// Subgraph and steady-state resources for a head, memoised.
    const HeadState& head_state(EntityId h) {
        if (auto it = memo_.find(h); it != memo_.end()) return *it->second;
        if (memo_.size() >= memo_capacity_) memo_.clear();
        auto st = std::make_unique<HeadState>();
        st->sub = build_head_subgraph(kg_, h);
        bool cached = false;
        if (resources_) {
            if (auto it = resources_->find(h); it != resources_->end() && it->second.nodes == st->sub.nodes) {
                st->rv.mass = it->second.mass;
                st->rv.converged = true;
                cached = true;
            }
        }
        if (!cached) st->rv = resource_iterate(st->sub, opt_.resource);
        return *memo_.emplace(h, std::move(st)).first->second;
    }

    RRFeatureVector rr_raw(EntityId h, EntityId t) {
        const auto& st = head_state(h);
        return rr_features(kg_, st.sub, st.rv, h, t, opt_.max_depth);
    }

    std::vector<ReachablePath> paths(const Triple& target) {
        if (path_cache_) {
            if (auto it = path_cache_->find(target); it != path_cache_->end()) return it->second;
        }
        return select_paths(finder_, target, emb_, opt_.paths);
    }

    PreparedExample prepare(const LabeledTriple& l) {
        check_ids(l.triple);
        PreparedExample ex;
        ex.triple = l.triple;
        ex.label = l.label;
        ex.noise = l.noise;
        ex.rr_raw = rr_raw(l.triple.head, l.triple.tail);
        ex.energy = energy(emb_, l.triple, opt_.norm);
        ex.paths = paths(l.triple);
        return ex;
    }

    void check_ids(const Triple& t) const {
        if (t.head >= kg_.num_entities()) throw InputError("unknown entity id " + std::to_string(t.head));
        if (t.tail >= kg_.num_entities()) throw InputError("unknown entity id " + std::to_string(t.tail));
        if (t.relation >= kg_.num_relations()) throw InputError("unknown relation id " + std::to_string(t.relation));
        if (t.head >= emb_.num_entities() || t.tail >= emb_.num_entities() || t.relation >= emb_.num_relations())
            throw InputError("triple ids exceed the embedding table");
    }

private:
    const KnowledgeGraph& kg_;
    const EmbeddingTable& emb_;
    ExtractionOptions opt_;
    const ResourceCache* resources_;
    const PathCache* path_cache_;
    PathFinder finder_;
    std::unordered_map<EntityId, std::unique_ptr<HeadState>> memo_;
    std::size_t memo_capacity_;
};

/// Prepares a labeled list, grouping work by head so each resource vector is
/// computed once. Output order matches input order; `jobs` worker threads
/// each own an extractor, so results do not depend on the thread count.
inline std::vector<PreparedExample> prepare_examples(const KnowledgeGraph& kg, const EmbeddingTable& emb,
                                                     const ExtractionOptions& opt,
                                                     std::span<const LabeledTriple> labeled, unsigned jobs = 1,
                                                     const ResourceCache* resource_cache = nullptr,
                                                     const PathCache* path_cache = nullptr) {
    std::vector<PreparedExample> out(labeled.size());
    std::vector<std::size_t> order(labeled.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return labeled[a].triple.head < labeled[b].triple.head; });
    jobs = std::max(1u, jobs);
    auto work = [&](std::size_t begin, std::size_t end) {
        FeatureExtractor fx(kg, emb, opt, resource_cache, path_cache, 4);
        for (std::size_t i = begin; i < end; ++i) out[order[i]] = fx.prepare(labeled[order[i]]);
    };
    if (jobs == 1 || labeled.size() < 2 * jobs) {
        work(0, labeled.size());
        return out;
    }
    std::vector<std::thread> threads;
    const std::size_t chunk = (labeled.size() + jobs - 1) / jobs;
    std::vector<std::exception_ptr> errors(jobs);
    for (unsigned j = 0; j < jobs; ++j) {
        const std::size_t b = j * chunk, e = std::min(labeled.size(), b + chunk);
        if (b >= e) break;
        threads.emplace_back([&, b, e, j] {
            try {
                work(b, e);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

} // namespace kgt

#endif // KGTRUST_FEATURES_HPP
