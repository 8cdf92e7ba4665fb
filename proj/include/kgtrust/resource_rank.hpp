#ifndef KGTRUST_RESOURCE_RANK_HPP
#define KGTRUST_RESOURCE_RANK_HPP

// Entity-pair association strength. Resource starts on the head entity and
// flows along directed edges of the head-centred subgraph, split in proportion
// to edge bandwidth (number of distinct relations on the edge), with a uniform
// teleport share theta. The steady-state amount held by the tail, together
// with degree and depth features, is mapped to a probability by a small
// perceptron.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "kg_store.hpp"
#include "nn.hpp"

namespace kgt {

struct HeadSubgraph {
    struct Link {
        std::uint32_t to;  // local index
        double bandwidth;
    };

    EntityId root = 0;
    std::vector<EntityId> nodes;        // nodes[0] == root, breadth-first order
    std::vector<std::uint32_t> depth;   // shortest directed distance from root
    std::vector<std::size_t> offsets;   // CSR over local indices
    std::vector<Link> links;
    std::vector<double> out_bandwidth;  // sum of bandwidth over out-links
    std::unordered_map<EntityId, std::uint32_t> local;

    std::size_t size() const noexcept { return nodes.size(); }

    std::optional<std::uint32_t> local_index(EntityId e) const {
        auto it = local.find(e);
        if (it == local.end()) return std::nullopt;
        return it->second;
    }

    double bandwidth(EntityId from, EntityId to) const {
        auto a = local_index(from);
        auto b = local_index(to);
        if (!a || !b) return 0.0;
        for (std::size_t k = offsets[*a]; k < offsets[*a + 1]; ++k)
            if (links[k].to == *b) return links[k].bandwidth;
        return 0.0;
    }
};

/// Breadth-first closure over out-edges from `root`. Bandwidth of (e1,e2) is
/// the number of distinct relations from e1 to e2.
inline HeadSubgraph build_head_subgraph(const KnowledgeGraph& kg, EntityId root) {
    HeadSubgraph sub;
    sub.root = root;
    sub.nodes.push_back(root);
    sub.depth.push_back(0);
    sub.local.emplace(root, 0);
    for (std::size_t q = 0; q < sub.nodes.size(); ++q) {
        const EntityId e = sub.nodes[q];
        for (const auto& ed : kg.out_edges(e)) {
            if (sub.local.try_emplace(ed.node, static_cast<std::uint32_t>(sub.nodes.size())).second) {
                sub.nodes.push_back(ed.node);
                sub.depth.push_back(sub.depth[q] + 1);
            }
        }
    }
    sub.offsets.assign(sub.nodes.size() + 1, 0);
    sub.out_bandwidth.assign(sub.nodes.size(), 0.0);
    for (std::size_t i = 0; i < sub.nodes.size(); ++i) {
        auto edges = kg.out_edges(sub.nodes[i]);
        // edges are sorted by neighbour, so equal neighbours are adjacent
        for (std::size_t k = 0; k < edges.size();) {
            std::size_t j = k;
            while (j < edges.size() && edges[j].node == edges[k].node) ++j;
            const double bw = static_cast<double>(j - k);
            sub.links.push_back({sub.local.at(edges[k].node), bw});
            sub.out_bandwidth[i] += bw;
            k = j;
        }
        sub.offsets[i + 1] = sub.links.size();
    }
    return sub;
}

struct ResourceOptions {
    double theta = 0.15;
    double tol = 1e-10;
    int max_iter = 200;
};

/// Resource amounts aligned with HeadSubgraph::nodes.
struct ResourceVector {
    std::vector<double> mass;
    bool converged = false;
    int iterations = 0;
    double last_change = 0.0;
};

/// Synchronous fixed-point iteration
///   R'(t) = (1-theta) * [ sum_{i->t} R(i) BW(i,t) / OD_w(i) + sum_{dangling d} R(d) / N ] + theta / N
/// starting from R(root) = 1. Stops when the L1 change drops below tol or
/// after max_iter sweeps (converged = false). The observer, when set, sees
/// every iterate.
inline ResourceVector resource_iterate(const HeadSubgraph& sub, const ResourceOptions& opt,
                                       const std::function<void(std::span<const double>)>& observer = {}) {
    if (!(opt.theta >= 0.0 && opt.theta < 1.0)) throw InputError("theta must lie in [0, 1)");
    const std::size_t n = sub.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    ResourceVector rv;
    rv.mass.assign(n, 0.0);
    rv.mass[0] = 1.0;
    std::vector<double> next(n);
    for (int it = 0; it < opt.max_iter; ++it) {
        double dangling = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (sub.out_bandwidth[i] == 0.0) dangling += rv.mass[i];
        const double base = opt.theta * inv_n + (1.0 - opt.theta) * dangling * inv_n;
        std::fill(next.begin(), next.end(), base);
        for (std::size_t i = 0; i < n; ++i) {
            if (sub.out_bandwidth[i] == 0.0 || rv.mass[i] == 0.0) continue;
            const double share = (1.0 - opt.theta) * rv.mass[i] / sub.out_bandwidth[i];
            for (std::size_t k = sub.offsets[i]; k < sub.offsets[i + 1]; ++k)
                next[sub.links[k].to] += share * sub.links[k].bandwidth;
        }
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change += std::abs(next[i] - rv.mass[i]);
        rv.mass.swap(next);
        rv.iterations = it + 1;
        rv.last_change = change;
        if (observer) observer(rv.mass);
        if (change < opt.tol) {
            rv.converged = true;
            break;
        }
    }
    return rv;
}

inline double resource_at(const HeadSubgraph& sub, const ResourceVector& rv, EntityId e) {
    auto i = sub.local_index(e);
    return i ? rv.mass[*i] : 0.0;
}

/// Feature order: resource at tail, in/out degree of head, in/out degree of
/// tail (whole-graph triple counts), depth from head to tail.
using RRFeatureVector = std::array<double, 6>;

/// Depth of reachable tails is capped at max_depth; unreachable tails get
/// max_depth + 1 and zero resource.
inline RRFeatureVector rr_features(const KnowledgeGraph& kg, const HeadSubgraph& sub, const ResourceVector& rv,
                                   EntityId head, EntityId tail, std::uint32_t max_depth) {
    RRFeatureVector v{};
    auto ti = sub.local_index(tail);
    v[0] = ti ? rv.mass[*ti] : 0.0;
    v[1] = static_cast<double>(kg.in_degree(head));
    v[2] = static_cast<double>(kg.out_degree(head));
    v[3] = static_cast<double>(kg.in_degree(tail));
    v[4] = static_cast<double>(kg.out_degree(tail));
    v[5] = ti ? static_cast<double>(std::min(sub.depth[*ti], max_depth)) : static_cast<double>(max_depth) + 1.0;
    return v;
}

/// log1p on the count-valued features, then z-scoring with statistics of a
/// training sample.
class FeatureStandardizer {
public:
    static constexpr std::array<bool, 6> kLogScaled{false, true, true, true, true, true};

    void fit(std::span<const RRFeatureVector> sample) {
        mean_.fill(0.0);
        scale_.fill(1.0);
        if (sample.empty()) return;
        std::array<double, 6> sq{};
        for (const auto& v : sample) {
            auto t = transform(v);
            for (std::size_t k = 0; k < 6; ++k) {
                mean_[k] += t[k];
                sq[k] += t[k] * t[k];
            }
        }
        const double n = static_cast<double>(sample.size());
        for (std::size_t k = 0; k < 6; ++k) {
            mean_[k] /= n;
            const double var = sq[k] / n - mean_[k] * mean_[k];
            scale_[k] = var > 1e-12 ? std::sqrt(var) : 1.0;
        }
    }

    RRFeatureVector apply(const RRFeatureVector& v) const {
        auto t = transform(v);
        for (std::size_t k = 0; k < 6; ++k) t[k] = (t[k] - mean_[k]) / scale_[k];
        return t;
    }

    const std::array<double, 6>& mean() const noexcept { return mean_; }
    const std::array<double, 6>& scale() const noexcept { return scale_; }
    void set(const std::array<double, 6>& mean, const std::array<double, 6>& scale) {
        mean_ = mean;
        scale_ = scale;
    }

private:
    static RRFeatureVector transform(const RRFeatureVector& v) {
        RRFeatureVector t = v;
        for (std::size_t k = 0; k < 6; ++k)
            if (kLogScaled[k]) t[k] = std::log1p(t[k]);
        return t;
    }

    std::array<double, 6> mean_{0, 0, 0, 0, 0, 0};
    std::array<double, 6> scale_{1, 1, 1, 1, 1, 1};
};

/// RR(h,t) = sigmoid(W2 relu(W1 V + b1) + b2).
class RRHead {
public:
    RRHead() = default;
    explicit RRHead(std::size_t hidden) : mlp_("rr", 6, {hidden}) {}

    void init(std::mt19937_64& rng) { mlp_.init(rng); }

    double logit(const RRFeatureVector& v, nn::Mlp::Tape& tape) const { return mlp_.forward(v, tape); }
    double score(const RRFeatureVector& v) const { return nn::probability(mlp_.forward(v)); }
    void backward(nn::Mlp::Tape& tape, double dlogit) { mlp_.backward(tape, dlogit, {}); }

    nn::ParamList params() { return mlp_.params(); }
    nn::Mlp& mlp() noexcept { return mlp_; }

private:
    nn::Mlp mlp_;
};

inline double rr_score(const RRFeatureVector& v, const RRHead& head) { return head.score(v); }

} // namespace kgt

#endif // KGTRUST_RESOURCE_RANK_HPP
