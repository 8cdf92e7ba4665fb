#ifndef KGTRUST_SYNTHETIC_HPP
#define KGTRUST_SYNTHETIC_HPP

// Generated graphs for tests, demos and protocol checks.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "kg_store.hpp"

namespace kgt {

struct CommunityOptions {
    std::size_t community_size = 50;  // six communities
    std::size_t random_edges = 150;   // edges of the unstructured relation
    std::uint64_t seed = 7;
};

/// Six communities C0..C5 linked by bijections. Five base maps
///   r0: C0->C1, r1: C1->C2, r2: C1->C3, r3: C0->C4, r4: C4->C5
/// plus six relations that are compositions or inverses of them, so every
/// structured fact has the same partner under every corruption of one slot
/// and is backed by alternative paths. A twelfth relation links random pairs.
/// Entity names are "c<k>_<i>", relation names "r<j>".
inline std::vector<RawTriple> community_kg(const CommunityOptions& opt = {}) {
    const std::size_t n = opt.community_size;
    if (n < 2) throw InputError("community size must be at least 2");
    std::mt19937_64 rng(opt.seed);
    auto name = [](std::size_t c, std::size_t i) { return "c" + std::to_string(c) + "_" + std::to_string(i); };
    auto perm = [&] {
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), 0);
        std::shuffle(p.begin(), p.end(), rng);
        return p;
    };
    auto inverse = [&](const std::vector<std::size_t>& p) {
        std::vector<std::size_t> q(n);
        for (std::size_t i = 0; i < n; ++i) q[p[i]] = i;
        return q;
    };
    auto compose = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
        std::vector<std::size_t> c(n);
        for (std::size_t i = 0; i < n; ++i) c[i] = b[a[i]];
        return c;
    };
    const auto p0 = perm(), p1 = perm(), p2 = perm(), p3 = perm(), p4 = perm();
    struct Map {
        std::size_t from, to;
        std::vector<std::size_t> f;
    };
    const std::vector<Map> maps{
        {0, 1, p0},
        {1, 2, p1},
        {1, 3, p2},
        {0, 4, p3},
        {4, 5, p4},
        {0, 2, compose(p0, p1)},
        {0, 3, compose(p0, p2)},
        {0, 5, compose(p3, p4)},
        {2, 1, inverse(p1)},
        {5, 4, inverse(p4)},
        {1, 4, compose(inverse(p0), p3)},
    };
    std::vector<RawTriple> out;
    for (std::size_t r = 0; r < maps.size(); ++r)
        for (std::size_t i = 0; i < n; ++i)
            out.push_back({name(maps[r].from, i), "r" + std::to_string(r), name(maps[r].to, maps[r].f[i])});
    const std::string linked = "r" + std::to_string(maps.size());
    std::uniform_int_distribution<std::size_t> pick(0, 6 * n - 1);
    for (std::size_t k = 0; k < opt.random_edges; ++k) {
        const auto a = pick(rng), b = pick(rng);
        if (a == b) continue;
        out.push_back({name(a / n, a % n), linked, name(b / n, b % n)});
    }
    return out;
}

/// A sparse graph with an exact entity and relation count: entities form
/// small clusters wired as rings, and every relation appears at least once.
inline std::vector<RawTriple> clustered_kg(std::size_t num_entities, std::size_t num_relations,
                                           std::size_t cluster_size, std::uint64_t seed) {
    if (num_entities < 2 || num_relations < 1 || cluster_size < 2)
        throw InputError("clustered graph needs >= 2 entities, >= 1 relation, clusters of >= 2");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> rel(0, num_relations - 1);
    auto e = [](std::size_t i) { return "e" + std::to_string(i); };
    auto r = [](std::size_t j) { return "r" + std::to_string(j); };
    std::vector<RawTriple> out;
    std::size_t next_relation = 0;
    for (std::size_t start = 0; start < num_entities; start += cluster_size) {
        const std::size_t end = std::min(num_entities, start + cluster_size);
        const std::size_t size = end - start;
        if (size < 2) {  // leftover singleton joins the previous cluster
            out.push_back({e(start), r(rel(rng)), e(start - 1)});
            continue;
        }
        for (std::size_t i = start; i < end; ++i) {
            const std::size_t j = start + (i - start + 1) % size;
            const std::size_t rr = next_relation < num_relations ? next_relation++ : rel(rng);
            out.push_back({e(i), r(rr), e(j)});
        }
    }
    while (next_relation < num_relations) out.push_back({e(0), r(next_relation++), e(1)});
    return out;
}

} // namespace kgt

#endif // KGTRUST_SYNTHETIC_HPP
