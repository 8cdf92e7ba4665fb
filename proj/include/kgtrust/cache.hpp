#ifndef KGTRUST_CACHE_HPP
#define KGTRUST_CACHE_HPP

// On-disk caches for steady-state resource vectors and selected paths. Work
// is split into fixed-size shards named after a key that fingerprints every
// input; a shard is reused only when its file exists, its header carries the
// same key, and it parses completely. Shards are written atomically, so an
// interrupted precompute resumes where it stopped.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "binary_io.hpp"
#include "features.hpp"

namespace kgt {

inline std::uint64_t graph_fingerprint(const KnowledgeGraph& kg) {
    io::Fnv1a h;
    h.add(static_cast<std::uint64_t>(kg.num_entities())).add(static_cast<std::uint64_t>(kg.num_relations()));
    for (const auto& t : kg.triples())
        h.add((static_cast<std::uint64_t>(t.head) << 32) | t.tail).add(static_cast<std::uint64_t>(t.relation));
    return h.value();
}

inline std::uint64_t resource_cache_key(const KnowledgeGraph& kg, const ResourceOptions& opt) {
    return io::Fnv1a()
        .add("resource/1")
        .add(graph_fingerprint(kg))
        .add(opt.theta)
        .add(opt.tol)
        .add(static_cast<std::uint64_t>(opt.max_iter))
        .value();
}

inline std::uint64_t path_cache_key(const KnowledgeGraph& kg, const EmbeddingTable& emb,
                                    const PathSelectionOptions& opt) {
    io::Fnv1a h;
    h.add("paths/1").add(graph_fingerprint(kg));
    h.add(static_cast<std::uint64_t>(opt.search.max_length)).add(static_cast<std::uint64_t>(opt.search.budget));
    h.add(static_cast<std::uint64_t>(opt.topk)).add(static_cast<std::uint64_t>(opt.pairing));
    for (double v : emb.entity_data()) h.add(v);
    for (double v : emb.relation_data()) h.add(v);
    return h.value();
}

struct PrecomputeStats {
    std::size_t shards = 0;
    std::size_t reused = 0;
    std::size_t computed_items = 0;
};

namespace detail {

inline std::filesystem::path shard_path(const std::filesystem::path& dir, std::string_view kind, std::uint64_t key,
                                        std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05zu", index);
    return dir / (std::string(kind) + "-" + io::hex64(key) + "-" + buf + ".bin");
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception wins.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(1, n))));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, 0u);
        return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(jobs);
    for (unsigned j = 0; j < jobs; ++j) {
        threads.emplace_back([&, j] {
            try {
                for (std::size_t i = j; i < n; i += jobs) fn(i, j);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace detail

// ---------------------------------------------------------------------------
// resource shards: "KGTRES" u32 version u64 key u64 count, then per head:
// u32 head, u64 n, n x u32 node, n x f64 mass

inline void write_resource_shard(const std::filesystem::path& path, std::uint64_t key,
                                 std::span<const std::pair<EntityId, ResourceRecord>> items) {
    io::atomic_write(path, [&](std::ostream& o) {
        io::Writer w(o);
        w.bytes("KGTRES");
        w.u32(1);
        w.u64(key);
        w.u64(items.size());
        for (const auto& [h, rec] : items) {
            w.u32(h);
            w.u64(rec.nodes.size());
            w.u32s(rec.nodes);
            w.f64s(rec.mass);
        }
    });
}

/// Appends the shard's records to `into`; false when the shard is missing,
/// stale or damaged.
inline bool read_resource_shard(const std::filesystem::path& path, std::uint64_t key, ResourceCache& into) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    try {
        io::Reader r(in, path.string());
        r.expect_magic("KGTRES");
        if (r.u32() != 1 || r.u64() != key) return false;
        const auto count = r.u64();
        ResourceCache part;
        for (std::uint64_t i = 0; i < count; ++i) {
            const EntityId h = r.u32();
            const auto n = r.u64();
            if (n > (1ULL << 32)) return false;
            ResourceRecord rec;
            rec.nodes.resize(n);
            rec.mass.resize(n);
            r.u32s(rec.nodes);
            r.f64s(rec.mass);
            part.emplace(h, std::move(rec));
        }
        into.merge(part);
        return true;
    } catch (const InputError&) {
        return false;
    }
}

inline PrecomputeStats precompute_resources(const KnowledgeGraph& kg, std::vector<EntityId> heads,
                                            const ResourceOptions& opt, const std::filesystem::path& dir,
                                            std::size_t shard_size = 256, unsigned jobs = 1,
                                            std::ostream* log = nullptr) {
    std::sort(heads.begin(), heads.end());
    heads.erase(std::unique(heads.begin(), heads.end()), heads.end());
    const auto key = resource_cache_key(kg, opt);
    shard_size = std::max<std::size_t>(1, shard_size);
    PrecomputeStats st;
    st.shards = (heads.size() + shard_size - 1) / shard_size;
    std::vector<char> reused(st.shards, 0);
    detail::parallel_for(st.shards, jobs, [&](std::size_t s, unsigned) {
        const auto path = detail::shard_path(dir, "resource", key, s);
        ResourceCache probe;
        if (read_resource_shard(path, key, probe)) {
            reused[s] = 1;
            return;
        }
        const std::size_t b = s * shard_size, e = std::min(heads.size(), b + shard_size);
        std::vector<std::pair<EntityId, ResourceRecord>> items;
        for (std::size_t i = b; i < e; ++i) {
            auto sub = build_head_subgraph(kg, heads[i]);
            auto rv = resource_iterate(sub, opt);
            items.push_back({heads[i], {sub.nodes, std::move(rv.mass)}});
        }
        write_resource_shard(path, key, items);
    });
    for (std::size_t s = 0; s < st.shards; ++s) {
        if (reused[s]) ++st.reused;
        else st.computed_items += std::min(heads.size(), (s + 1) * shard_size) - s * shard_size;
    }
    if (log)
        *log << "resource cache: " << st.shards << " shards, " << st.reused << " reused, " << st.computed_items
             << " heads computed\n";
    return st;
}

inline ResourceCache load_resource_cache(const KnowledgeGraph& kg, const ResourceOptions& opt,
                                         const std::filesystem::path& dir) {
    ResourceCache cache;
    const auto key = resource_cache_key(kg, opt);
    for (std::size_t s = 0; read_resource_shard(detail::shard_path(dir, "resource", key, s), key, cache); ++s) {
    }
    return cache;
}

// ---------------------------------------------------------------------------
// path shards: "KGTPTH" u32 version u64 key u64 count, then per target:
// 3 x u32 triple, u32 paths, per path u32 length and 3 x u32 per step

inline void write_path_shard(const std::filesystem::path& path, std::uint64_t key,
                             std::span<const std::pair<Triple, std::vector<ReachablePath>>> items) {
    io::atomic_write(path, [&](std::ostream& o) {
        io::Writer w(o);
        w.bytes("KGTPTH");
        w.u32(1);
        w.u64(key);
        w.u64(items.size());
        auto triple = [&](const Triple& t) {
            w.u32(t.head);
            w.u32(t.relation);
            w.u32(t.tail);
        };
        for (const auto& [t, paths] : items) {
            triple(t);
            w.u32(static_cast<std::uint32_t>(paths.size()));
            for (const auto& p : paths) {
                w.u32(static_cast<std::uint32_t>(p.steps.size()));
                for (const auto& s : p.steps) triple(s);
            }
        }
    });
}

inline bool read_path_shard(const std::filesystem::path& path, std::uint64_t key, PathCache& into) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    try {
        io::Reader r(in, path.string());
        r.expect_magic("KGTPTH");
        if (r.u32() != 1 || r.u64() != key) return false;
        auto triple = [&] {
            Triple t;
            t.head = r.u32();
            t.relation = r.u32();
            t.tail = r.u32();
            return t;
        };
        const auto count = r.u64();
        PathCache part;
        for (std::uint64_t i = 0; i < count; ++i) {
            const Triple t = triple();
            std::vector<ReachablePath> paths(r.u32());
            for (auto& p : paths) {
                p.steps.resize(r.u32());
                for (auto& s : p.steps) s = triple();
            }
            part.emplace(t, std::move(paths));
        }
        into.merge(part);
        return true;
    } catch (const InputError&) {
        return false;
    }
}

inline PrecomputeStats precompute_paths(const KnowledgeGraph& kg, const EmbeddingTable& emb,
                                        std::vector<Triple> targets, const PathSelectionOptions& opt,
                                        const std::filesystem::path& dir, std::size_t shard_size = 1024,
                                        unsigned jobs = 1, std::ostream* log = nullptr) {
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    const auto key = path_cache_key(kg, emb, opt);
    shard_size = std::max<std::size_t>(1, shard_size);
    PrecomputeStats st;
    st.shards = (targets.size() + shard_size - 1) / shard_size;
    std::vector<char> reused(st.shards, 0);
    jobs = std::max(1u, jobs);
    std::vector<std::unique_ptr<PathFinder>> finders;
    for (unsigned j = 0; j < jobs; ++j) finders.push_back(std::make_unique<PathFinder>(kg));
    detail::parallel_for(st.shards, jobs, [&](std::size_t s, unsigned worker) {
        const auto path = detail::shard_path(dir, "paths", key, s);
        PathCache probe;
        if (read_path_shard(path, key, probe)) {
            reused[s] = 1;
            return;
        }
        const std::size_t b = s * shard_size, e = std::min(targets.size(), b + shard_size);
        std::vector<std::pair<Triple, std::vector<ReachablePath>>> items;
        for (std::size_t i = b; i < e; ++i)
            items.push_back({targets[i], select_paths(*finders[worker], targets[i], emb, opt)});
        write_path_shard(path, key, items);
    });
    for (std::size_t s = 0; s < st.shards; ++s) {
        if (reused[s]) ++st.reused;
        else st.computed_items += std::min(targets.size(), (s + 1) * shard_size) - s * shard_size;
    }
    if (log)
        *log << "path cache: " << st.shards << " shards, " << st.reused << " reused, " << st.computed_items
             << " triples computed\n";
    return st;
}

inline PathCache load_path_cache(const KnowledgeGraph& kg, const EmbeddingTable& emb,
                                 const PathSelectionOptions& opt, const std::filesystem::path& dir) {
    PathCache cache;
    const auto key = path_cache_key(kg, emb, opt);
    for (std::size_t s = 0; read_path_shard(detail::shard_path(dir, "paths", key, s), key, cache); ++s) {
    }
    return cache;
}

} // namespace kgt

#endif // KGTRUST_CACHE_HPP
