#ifndef KGTRUST_KG_STORE_HPP
#define KGTRUST_KG_STORE_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "types.hpp"

namespace kgt {

/// Bidirectional map between external identifiers and dense ids, assigned in
/// first-seen order.
class Dictionary {
public:
    std::uint32_t add(const std::string& name) {
        auto [it, inserted] = index_.try_emplace(name, static_cast<std::uint32_t>(names_.size()));
        if (inserted) names_.push_back(name);
        return it->second;
    }

    std::optional<std::uint32_t> find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& name(std::uint32_t id) const { return names_.at(id); }
    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

struct Edge {
    RelationId relation;
    EntityId node;
};

/// Immutable triple store. Triples are deduplicated and kept sorted by
/// (head, relation, tail); adjacency is stored in CSR form sorted by
/// (neighbour, relation).
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    KnowledgeGraph(std::size_t num_entities, std::size_t num_relations, std::vector<Triple> triples)
        : num_entities_(num_entities), num_relations_(num_relations), triples_(std::move(triples)) {
        for (const auto& t : triples_) {
            if (t.head >= num_entities_ || t.tail >= num_entities_ || t.relation >= num_relations_)
                throw InputError("triple references an id outside the graph");
        }
        std::sort(triples_.begin(), triples_.end());
        triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());
        build_indexes();
    }

    std::size_t num_entities() const noexcept { return num_entities_; }
    std::size_t num_relations() const noexcept { return num_relations_; }
    std::size_t size() const noexcept { return triples_.size(); }
    const std::vector<Triple>& triples() const noexcept { return triples_; }

    bool contains(const Triple& t) const { return index_of(t).has_value(); }

    std::optional<std::size_t> index_of(const Triple& t) const {
        auto it = std::lower_bound(triples_.begin(), triples_.end(), t);
        if (it == triples_.end() || *it != t) return std::nullopt;
        return static_cast<std::size_t>(it - triples_.begin());
    }

    std::span<const Edge> out_edges(EntityId e) const {
        return {out_edges_.data() + out_offsets_[e], out_offsets_[e + 1] - out_offsets_[e]};
    }
    std::span<const Edge> in_edges(EntityId e) const {
        return {in_edges_.data() + in_offsets_[e], in_offsets_[e + 1] - in_offsets_[e]};
    }
    std::size_t out_degree(EntityId e) const { return out_offsets_[e + 1] - out_offsets_[e]; }
    std::size_t in_degree(EntityId e) const { return in_offsets_[e + 1] - in_offsets_[e]; }

    /// Number of distinct relations linking head to tail.
    std::size_t pair_count(EntityId head, EntityId tail) const {
        auto edges = out_edges(head);
        auto lo = std::lower_bound(edges.begin(), edges.end(), tail,
                                   [](const Edge& e, EntityId n) { return e.node < n; });
        auto hi = std::upper_bound(lo, edges.end(), tail,
                                   [](EntityId n, const Edge& e) { return n < e.node; });
        return static_cast<std::size_t>(hi - lo);
    }

    /// Entities seen as head (resp. tail) of some triple with relation r.
    std::span<const EntityId> heads_of(RelationId r) const { return heads_of_[r]; }
    std::span<const EntityId> tails_of(RelationId r) const { return tails_of_[r]; }
    /// Relations under which e appears as head (resp. tail).
    std::span<const RelationId> relations_as_head(EntityId e) const { return rels_as_head_[e]; }
    std::span<const RelationId> relations_as_tail(EntityId e) const { return rels_as_tail_[e]; }

private:
    void build_indexes() {
        out_offsets_.assign(num_entities_ + 1, 0);
        in_offsets_.assign(num_entities_ + 1, 0);
        for (const auto& t : triples_) {
            ++out_offsets_[t.head + 1];
            ++in_offsets_[t.tail + 1];
        }
        std::partial_sum(out_offsets_.begin(), out_offsets_.end(), out_offsets_.begin());
        std::partial_sum(in_offsets_.begin(), in_offsets_.end(), in_offsets_.begin());
        out_edges_.resize(triples_.size());
        in_edges_.resize(triples_.size());
        std::vector<std::size_t> out_fill(out_offsets_.begin(), out_offsets_.end() - 1);
        std::vector<std::size_t> in_fill(in_offsets_.begin(), in_offsets_.end() - 1);
        heads_of_.assign(num_relations_, {});
        tails_of_.assign(num_relations_, {});
        rels_as_head_.assign(num_entities_, {});
        rels_as_tail_.assign(num_entities_, {});
        for (const auto& t : triples_) {
            out_edges_[out_fill[t.head]++] = {t.relation, t.tail};
            in_edges_[in_fill[t.tail]++] = {t.relation, t.head};
            heads_of_[t.relation].push_back(t.head);
            tails_of_[t.relation].push_back(t.tail);
            rels_as_head_[t.head].push_back(t.relation);
            rels_as_tail_[t.tail].push_back(t.relation);
        }
        auto by_node = [](const Edge& a, const Edge& b) {
            return a.node != b.node ? a.node < b.node : a.relation < b.relation;
        };
        for (std::size_t e = 0; e < num_entities_; ++e) {
            std::sort(out_edges_.begin() + static_cast<std::ptrdiff_t>(out_offsets_[e]),
                      out_edges_.begin() + static_cast<std::ptrdiff_t>(out_offsets_[e + 1]), by_node);
            std::sort(in_edges_.begin() + static_cast<std::ptrdiff_t>(in_offsets_[e]),
                      in_edges_.begin() + static_cast<std::ptrdiff_t>(in_offsets_[e + 1]), by_node);
        }
        auto uniq = [](auto& v) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        };
        for (auto& v : heads_of_) uniq(v);
        for (auto& v : tails_of_) uniq(v);
        for (auto& v : rels_as_head_) uniq(v);
        for (auto& v : rels_as_tail_) uniq(v);
    }

    std::size_t num_entities_ = 0;
    std::size_t num_relations_ = 0;
    std::vector<Triple> triples_;
    std::vector<std::size_t> out_offsets_{0}, in_offsets_{0};
    std::vector<Edge> out_edges_, in_edges_;
    std::vector<std::vector<EntityId>> heads_of_, tails_of_;
    std::vector<std::vector<RelationId>> rels_as_head_, rels_as_tail_;
};

// ---------------------------------------------------------------------------
// Ingestion

struct RawTriple {
    std::string head, relation, tail;
    friend bool operator==(const RawTriple&, const RawTriple&) = default;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

} // namespace detail

/// Reads `head<TAB>relation<TAB>tail` lines. Blank lines are skipped.
inline std::vector<RawTriple> read_tsv_triples(std::istream& in, const std::string& source = "<stream>") {
    std::vector<RawTriple> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        detail::strip_cr(line);
        if (line.empty()) continue;
        auto fields = detail::split_tabs(line);
        if (fields.size() != 3)
            throw ParseError(source, lineno, "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
        for (const auto& f : fields)
            if (f.empty()) throw ParseError(source, lineno, "empty field");
        out.push_back({std::move(fields[0]), std::move(fields[1]), std::move(fields[2])});
    }
    return out;
}

inline std::vector<RawTriple> read_tsv_triples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open triple file: " + path);
    return read_tsv_triples(in, path);
}

struct LoadedGraph {
    Dictionary entities;
    Dictionary relations;
    KnowledgeGraph graph;
    std::size_t duplicates = 0;
};

inline LoadedGraph build_graph(std::span<const RawTriple> raw) {
    if (raw.empty()) throw InputError("no triples to load");
    LoadedGraph out;
    std::vector<Triple> triples;
    triples.reserve(raw.size());
    for (const auto& r : raw) {
        EntityId h = out.entities.add(r.head);
        RelationId rel = out.relations.add(r.relation);
        EntityId t = out.entities.add(r.tail);
        triples.push_back({h, rel, t});
    }
    std::size_t before = triples.size();
    out.graph = KnowledgeGraph(out.entities.size(), out.relations.size(), std::move(triples));
    out.duplicates = before - out.graph.size();
    return out;
}

/// Loads and indexes one or more TSV files into a single graph.
inline LoadedGraph load_triples(std::span<const std::string> paths, std::ostream* log = nullptr) {
    std::vector<RawTriple> raw;
    for (const auto& p : paths) {
        auto part = read_tsv_triples(p);
        raw.insert(raw.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    if (raw.empty()) throw InputError("triple input is empty");
    auto g = build_graph(raw);
    if (log) {
        *log << "loaded " << g.graph.size() << " triples, " << g.entities.size() << " entities, "
             << g.relations.size() << " relations";
        if (g.duplicates) *log << " (" << g.duplicates << " duplicate lines dropped)";
        *log << '\n';
    }
    return g;
}

inline LoadedGraph load_triples(const std::string& path, std::ostream* log = nullptr) {
    std::array<std::string, 1> one{path};
    return load_triples(std::span<const std::string>(one), log);
}

/// Seed-deterministic induced subgraph: grows an entity set breadth-first over
/// undirected adjacency from random starting entities until `target` entities
/// are collected, then keeps every triple whose endpoints are both inside.
inline std::vector<RawTriple> induce_subgraph(std::span<const RawTriple> raw, std::size_t target,
                                              std::uint64_t seed) {
    auto g = build_graph(raw);
    const auto& kg = g.graph;
    const std::size_t n = kg.num_entities();
    if (target >= n) return {raw.begin(), raw.end()};
    std::mt19937_64 rng(seed);
    std::vector<EntityId> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<char> chosen(n, 0);
    std::size_t count = 0;
    std::size_t next_start = 0;
    std::vector<EntityId> frontier;
    while (count < target) {
        if (frontier.empty()) {
            while (chosen[order[next_start]]) ++next_start;
            EntityId s = order[next_start];
            chosen[s] = 1;
            ++count;
            frontier.push_back(s);
            continue;
        }
        std::vector<EntityId> next;
        for (EntityId e : frontier) {
            std::vector<EntityId> nbrs;
            for (const auto& ed : kg.out_edges(e)) nbrs.push_back(ed.node);
            for (const auto& ed : kg.in_edges(e)) nbrs.push_back(ed.node);
            std::sort(nbrs.begin(), nbrs.end());
            nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
            std::shuffle(nbrs.begin(), nbrs.end(), rng);
            for (EntityId v : nbrs) {
                if (count >= target) break;
                if (!chosen[v]) {
                    chosen[v] = 1;
                    ++count;
                    next.push_back(v);
                }
            }
            if (count >= target) break;
        }
        frontier = std::move(next);
    }
    std::vector<RawTriple> out;
    for (const auto& r : raw) {
        if (chosen[*g.entities.find(r.head)] && chosen[*g.entities.find(r.tail)]) out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Labeled corpus

inline NoiseKind parse_noise_kind(std::string_view s) {
    for (auto k : {NoiseKind::none, NoiseKind::replaced_head, NoiseKind::replaced_relation,
                   NoiseKind::replaced_tail})
        if (to_string(k) == s) return k;
    throw InputError("unknown noise kind: " + std::string(s));
}

namespace detail {

template <class Pool, class Make>
std::optional<Triple> draw_excluding(const KnowledgeGraph& kg, const Pool& pool, std::size_t tries,
                                     std::mt19937_64& rng, Make make) {
    if (pool.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t i = 0; i < tries; ++i) {
        Triple c = make(pool[pick(rng)]);
        if (!kg.contains(c)) return c;
    }
    return std::nullopt;
}

// Exhaustive scan over 0..n-1 starting at a random offset.
template <class Make>
std::optional<Triple> scan_excluding(const KnowledgeGraph& kg, std::size_t n, std::mt19937_64& rng, Make make) {
    if (n == 0) return std::nullopt;
    std::size_t start = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    for (std::size_t i = 0; i < n; ++i) {
        Triple c = make(static_cast<std::uint32_t>((start + i) % n));
        if (!kg.contains(c)) return c;
    }
    return std::nullopt;
}

} // namespace detail

/// Produces one negative per positive. Noise kinds are balanced exactly
/// (counts differ by at most one) and assigned in a seeded random order.
/// Replacement heads/tails come from entities seen at the same position under
/// the same relation; replacement relations from relations that have the head
/// at head position and the tail at tail position. Every negative is absent
/// from `kg`.
inline std::vector<LabeledTriple> generate_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                                     std::uint64_t seed) {
    constexpr std::size_t kPoolTries = 32;
    constexpr std::size_t kUniformTries = 64;
    std::mt19937_64 rng(seed);
    std::vector<NoiseKind> kinds(positives.size());
    for (std::size_t i = 0; i < kinds.size(); ++i)
        kinds[i] = static_cast<NoiseKind>(1 + i % 3);
    std::shuffle(kinds.begin(), kinds.end(), rng);

    std::vector<LabeledTriple> out;
    out.reserve(positives.size());
    std::vector<RelationId> rel_pool;
    for (std::size_t i = 0; i < positives.size(); ++i) {
        const Triple p = positives[i];
        const NoiseKind kind = kinds[i];
        std::optional<Triple> neg;
        switch (kind) {
            case NoiseKind::replaced_head: {
                auto make = [&](EntityId e) { return Triple{e, p.relation, p.tail}; };
                neg = detail::draw_excluding(kg, kg.heads_of(p.relation), kPoolTries, rng, make);
                if (!neg) {
                    std::vector<EntityId> all(kg.num_entities());
                    std::iota(all.begin(), all.end(), 0);
                    neg = detail::draw_excluding(kg, all, kUniformTries, rng, make);
                }
                if (!neg) neg = detail::scan_excluding(kg, kg.num_entities(), rng, make);
                break;
            }
            case NoiseKind::replaced_tail: {
                auto make = [&](EntityId e) { return Triple{p.head, p.relation, e}; };
                neg = detail::draw_excluding(kg, kg.tails_of(p.relation), kPoolTries, rng, make);
                if (!neg) {
                    std::vector<EntityId> all(kg.num_entities());
                    std::iota(all.begin(), all.end(), 0);
                    neg = detail::draw_excluding(kg, all, kUniformTries, rng, make);
                }
                if (!neg) neg = detail::scan_excluding(kg, kg.num_entities(), rng, make);
                break;
            }
            case NoiseKind::replaced_relation: {
                auto make = [&](RelationId r) { return Triple{p.head, r, p.tail}; };
                rel_pool.clear();
                auto as_head = kg.relations_as_head(p.head);
                auto as_tail = kg.relations_as_tail(p.tail);
                std::set_intersection(as_head.begin(), as_head.end(), as_tail.begin(), as_tail.end(),
                                      std::back_inserter(rel_pool));
                neg = detail::draw_excluding(kg, rel_pool, kPoolTries, rng, make);
                if (!neg) {
                    std::vector<RelationId> all(kg.num_relations());
                    std::iota(all.begin(), all.end(), 0);
                    neg = detail::draw_excluding(kg, all, kUniformTries, rng, make);
                }
                if (!neg) neg = detail::scan_excluding(kg, kg.num_relations(), rng, make);
                break;
            }
            case NoiseKind::none: break;
        }
        if (!neg)
            throw Error("no corruption of triple #" + std::to_string(i) + " lies outside the graph");
        out.push_back({*neg, 0, kind});
    }
    return out;
}

/// Interleaves positives with their paired negatives: pos0, neg0, pos1, neg1, ...
inline std::vector<LabeledTriple> pair_corpus(std::span<const Triple> positives,
                                              std::span<const LabeledTriple> negatives) {
    if (positives.size() != negatives.size()) throw InputError("positive/negative count mismatch");
    std::vector<LabeledTriple> out;
    out.reserve(positives.size() * 2);
    for (std::size_t i = 0; i < positives.size(); ++i) {
        out.push_back({positives[i], 1, NoiseKind::none});
        out.push_back(negatives[i]);
    }
    return out;
}

struct CorpusSplit {
    std::vector<LabeledTriple> train, valid, test;
};

struct SplitSizes {
    std::size_t train = 0, valid = 0, test = 0;
};

/// Partitions an interleaved pair corpus (see pair_corpus) by positives; each
/// split receives its positives together with their paired negatives.
inline CorpusSplit split_corpus(std::span<const LabeledTriple> labeled, SplitSizes sizes, std::uint64_t seed) {
    if (labeled.size() % 2 != 0) throw InputError("labeled corpus must hold positive/negative pairs");
    const std::size_t pairs = labeled.size() / 2;
    for (std::size_t i = 0; i < pairs; ++i) {
        if (labeled[2 * i].label != 1 || labeled[2 * i + 1].label != 0)
            throw InputError("labeled corpus is not interleaved as (positive, negative) pairs");
    }
    if (sizes.train + sizes.valid + sizes.test != pairs)
        throw InputError("split sizes " + std::to_string(sizes.train) + "+" + std::to_string(sizes.valid) + "+" +
                         std::to_string(sizes.test) + " do not sum to " + std::to_string(pairs) + " positives");
    std::vector<std::size_t> order(pairs);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    CorpusSplit out;
    std::size_t k = 0;
    auto take = [&](std::vector<LabeledTriple>& dst, std::size_t n) {
        dst.reserve(2 * n);
        for (std::size_t i = 0; i < n; ++i, ++k) {
            dst.push_back(labeled[2 * order[k]]);
            dst.push_back(labeled[2 * order[k] + 1]);
        }
    };
    take(out.train, sizes.train);
    take(out.valid, sizes.valid);
    take(out.test, sizes.test);
    return out;
}

/// Sizes from fractions; the test split takes the remainder.
inline SplitSizes split_sizes_from_fractions(std::size_t pairs, double train_fraction, double valid_fraction) {
    if (train_fraction < 0 || valid_fraction < 0 || train_fraction + valid_fraction > 1.0)
        throw InputError("invalid split fractions");
    SplitSizes s;
    s.train = static_cast<std::size_t>(static_cast<double>(pairs) * train_fraction);
    s.valid = static_cast<std::size_t>(static_cast<double>(pairs) * valid_fraction);
    s.test = pairs - s.train - s.valid;
    return s;
}

inline void write_corpus(std::ostream& out, std::span<const LabeledTriple> corpus, const Dictionary& entities,
                         const Dictionary& relations) {
    for (const auto& l : corpus) {
        out << entities.name(l.triple.head) << '\t' << relations.name(l.triple.relation) << '\t'
            << entities.name(l.triple.tail) << '\t' << l.label << '\t' << to_string(l.noise) << '\n';
    }
}

inline std::vector<LabeledTriple> read_corpus(std::istream& in, const Dictionary& entities,
                                              const Dictionary& relations, const std::string& source = "<corpus>") {
    std::vector<LabeledTriple> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        detail::strip_cr(line);
        if (line.empty()) continue;
        auto f = detail::split_tabs(line);
        if (f.size() != 5) throw ParseError(source, lineno, "expected 5 fields");
        auto h = entities.find(f[0]);
        auto r = relations.find(f[1]);
        auto t = entities.find(f[2]);
        if (!h || !t) throw ParseError(source, lineno, "unknown entity");
        if (!r) throw ParseError(source, lineno, "unknown relation");
        if (f[3] != "0" && f[3] != "1") throw ParseError(source, lineno, "label must be 0 or 1");
        LabeledTriple l{{*h, *r, *t}, f[3] == "1" ? 1 : 0, NoiseKind::none};
        try {
            l.noise = parse_noise_kind(f[4]);
        } catch (const InputError& e) {
            throw ParseError(source, lineno, e.what());
        }
        if ((l.label == 1) != (l.noise == NoiseKind::none))
            throw ParseError(source, lineno, "label and noise kind disagree");
        out.push_back(l);
    }
    return out;
}

inline void write_dictionary(std::ostream& out, const Dictionary& d) {
    for (std::size_t i = 0; i < d.size(); ++i) out << i << '\t' << d.name(static_cast<std::uint32_t>(i)) << '\n';
}

inline Dictionary read_dictionary(std::istream& in, const std::string& source = "<dictionary>") {
    Dictionary d;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        detail::strip_cr(line);
        if (line.empty()) continue;
        auto f = detail::split_tabs(line);
        if (f.size() != 2) throw ParseError(source, lineno, "expected id<TAB>name");
        if (f[0] != std::to_string(d.size())) throw ParseError(source, lineno, "ids must be contiguous from 0");
        d.add(f[1]);
    }
    return d;
}

} // namespace kgt

#endif // KGTRUST_KG_STORE_HPP
