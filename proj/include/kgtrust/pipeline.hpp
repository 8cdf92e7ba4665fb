#ifndef KGTRUST_PIPELINE_HPP
#define KGTRUST_PIPELINE_HPP

// End-to-end stages shared by the command-line tool and the tests:
// corpus construction, embedding training, feature preparation, model
// fitting and ablation.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cache.hpp"
#include "config.hpp"
#include "eval.hpp"
#include "features.hpp"
#include "fusion.hpp"
#include "kg_store.hpp"
#include "transe.hpp"

namespace kgt {

struct Workspace {
    Dictionary entities, relations;
    KnowledgeGraph graph;
    CorpusSplit corpus;

    std::vector<Triple> test_positives() const {
        std::vector<Triple> out;
        for (const auto& l : corpus.test)
            if (l.label) out.push_back(l.triple);
        return out;
    }
};

inline SplitSizes split_sizes(const PipelineConfig& cfg, std::size_t pairs) {
    if (cfg.split_train || cfg.split_valid || cfg.split_test) {
        SplitSizes s{cfg.split_train, cfg.split_valid, cfg.split_test};
        if (s.train + s.valid + s.test > pairs)
            throw InputError("requested split sizes exceed the " + std::to_string(pairs) + " available triples");
        // anything left over is not used
        return s;
    }
    return split_sizes_from_fractions(pairs, cfg.split_train_fraction, cfg.split_valid_fraction);
}

/// Graph, negatives and splits from raw triples. Every positive of the graph
/// enters the corpus with one paired negative.
inline Workspace build_workspace(std::vector<RawTriple> raw, const PipelineConfig& cfg, std::ostream* log = nullptr) {
    if (cfg.subgraph_entities) raw = induce_subgraph(raw, cfg.subgraph_entities, cfg.seed);
    auto g = build_graph(raw);
    Workspace ws;
    ws.entities = std::move(g.entities);
    ws.relations = std::move(g.relations);
    ws.graph = std::move(g.graph);
    const auto& positives = ws.graph.triples();
    auto negatives = generate_negatives(ws.graph, positives, cfg.seed + 1);
    auto labeled = pair_corpus(positives, negatives);
    const auto pairs = positives.size();
    auto sizes = split_sizes(cfg, pairs);
    if (sizes.train + sizes.valid + sizes.test < pairs) {
        // drop unused pairs deterministically before splitting
        std::vector<std::size_t> order(pairs);
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(cfg.seed + 3);
        std::shuffle(order.begin(), order.end(), rng);
        order.resize(sizes.train + sizes.valid + sizes.test);
        std::sort(order.begin(), order.end());
        std::vector<LabeledTriple> kept;
        for (auto i : order) {
            kept.push_back(labeled[2 * i]);
            kept.push_back(labeled[2 * i + 1]);
        }
        labeled = std::move(kept);
    }
    if (sizes.train == 0 || sizes.valid == 0 || sizes.test == 0)
        throw InputError("every split needs at least one triple; got " + std::to_string(sizes.train) + "/" +
                         std::to_string(sizes.valid) + "/" + std::to_string(sizes.test));
    ws.corpus = split_corpus(labeled, sizes, cfg.seed + 2);
    if (log)
        *log << "graph: " << ws.entities.size() << " entities, " << ws.relations.size() << " relations, "
             << ws.graph.size() << " triples; corpus " << ws.corpus.train.size() << "/" << ws.corpus.valid.size()
             << "/" << ws.corpus.test.size() << " labeled triples\n";
    return ws;
}

// Workspace files: entities.tsv, relations.tsv, kg.tsv, {train,valid,test}.tsv

inline void save_workspace(const Workspace& ws, const std::filesystem::path& dir) {
    auto text = [&](const char* name, auto body) { io::atomic_write(dir / name, body, false); };
    text("entities.tsv", [&](std::ostream& o) { write_dictionary(o, ws.entities); });
    text("relations.tsv", [&](std::ostream& o) { write_dictionary(o, ws.relations); });
    text("kg.tsv", [&](std::ostream& o) {
        for (const auto& t : ws.graph.triples())
            o << ws.entities.name(t.head) << '\t' << ws.relations.name(t.relation) << '\t'
              << ws.entities.name(t.tail) << '\n';
    });
    text("train.tsv", [&](std::ostream& o) { write_corpus(o, ws.corpus.train, ws.entities, ws.relations); });
    text("valid.tsv", [&](std::ostream& o) { write_corpus(o, ws.corpus.valid, ws.entities, ws.relations); });
    text("test.tsv", [&](std::ostream& o) { write_corpus(o, ws.corpus.test, ws.entities, ws.relations); });
}

inline Workspace load_workspace(const std::filesystem::path& dir) {
    auto open = [&](const char* name) {
        auto p = dir / name;
        std::ifstream in(p);
        if (!in) throw InputError("missing workspace file " + p.string() + " (run ingest first)");
        return in;
    };
    Workspace ws;
    {
        auto in = open("entities.tsv");
        ws.entities = read_dictionary(in, (dir / "entities.tsv").string());
    }
    {
        auto in = open("relations.tsv");
        ws.relations = read_dictionary(in, (dir / "relations.tsv").string());
    }
    {
        auto in = open("kg.tsv");
        const auto src = (dir / "kg.tsv").string();
        std::vector<Triple> triples;
        std::size_t lineno = 0;
        for (const auto& r : read_tsv_triples(in, src)) {
            ++lineno;
            auto h = ws.entities.find(r.head), t = ws.entities.find(r.tail);
            auto rel = ws.relations.find(r.relation);
            if (!h || !t || !rel) throw ParseError(src, lineno, "name missing from the dictionaries");
            triples.push_back({*h, *rel, *t});
        }
        ws.graph = KnowledgeGraph(ws.entities.size(), ws.relations.size(), std::move(triples));
    }
    auto split = [&](const char* name) {
        auto in = open(name);
        return read_corpus(in, ws.entities, ws.relations, (dir / name).string());
    };
    ws.corpus.train = split("train.tsv");
    ws.corpus.valid = split("valid.tsv");
    ws.corpus.test = split("test.tsv");
    return ws;
}

// ---------------------------------------------------------------------------
// configuration mapping

inline Norm parse_norm(const std::string& s) { return s == "l1" ? Norm::l1 : Norm::l2; }

inline TransEConfig transe_config(const PipelineConfig& c) {
    TransEConfig t;
    t.dim = c.transe_dim;
    t.margin = c.transe_margin;
    t.norm = parse_norm(c.transe_norm);
    t.learning_rate = c.transe_lr;
    t.epochs = c.transe_epochs;
    t.batch_size = c.transe_batch;
    t.eval_every = c.transe_eval_every;
    t.patience = c.transe_patience;
    t.seed = c.seed + 11;
    return t;
}

inline ExtractionOptions extraction_options(const PipelineConfig& c) {
    ExtractionOptions x;
    x.resource = {c.rr_theta, c.rr_tol, c.rr_max_iter};
    x.max_depth = c.rr_max_depth;
    x.paths.search = {c.path_max_length, c.path_budget};
    x.paths.topk = c.path_topk;
    x.paths.pairing = c.path_pairing == "swapped" ? EntityPairing::swapped : EntityPairing::as_printed;
    x.norm = parse_norm(c.transe_norm);
    return x;
}

inline ModelConfig model_config(const PipelineConfig& c, std::vector<Estimator> estimators = {
                                                             Estimator::resource_rank, Estimator::translation_energy,
                                                             Estimator::reachable_paths}) {
    ModelConfig m;
    m.dim = c.transe_dim;
    m.rr_hidden = c.rr_hidden;
    m.path_hidden = c.path_hidden;
    m.topk = c.path_topk;
    m.rp_hidden = c.rp_hidden;
    m.fusion_hidden = c.fusion_hidden;
    m.dropout = c.fusion_dropout;
    m.initial_lambda = c.fusion_lambda;
    m.estimators = std::move(estimators);
    return m;
}

inline TrainConfig train_config(const PipelineConfig& c) {
    TrainConfig t;
    t.batch_size = c.train_batch;
    t.learning_rate = c.train_lr;
    t.patience = c.train_patience;
    t.max_epochs = c.train_max_epochs;
    t.seed = c.seed + 23;
    return t;
}

// ---------------------------------------------------------------------------
// stages

inline EmbeddingTable train_embeddings(const Workspace& ws, const PipelineConfig& cfg,
                                       TransEHistory* history = nullptr, std::ostream* log = nullptr) {
    std::vector<Triple> triples;
    if (cfg.transe_train_on == "train") {
        for (const auto& l : ws.corpus.train)
            if (l.label) triples.push_back(l.triple);
    } else {
        triples = ws.graph.triples();
    }
    return train_transe(triples, ws.graph.num_entities(), ws.graph.num_relations(), transe_config(cfg),
                        ws.corpus.valid, history, log);
}

/// Reads vectors written by another tool, one per line: a name, a tab, then
/// whitespace-separated components. Every dictionary name must be present;
/// names outside the dictionary are ignored.
inline void import_vectors(std::istream& in, const Dictionary& dict, std::vector<double>& out, std::size_t& dim,
                           const std::string& source) {
    std::vector<char> seen(dict.size(), 0);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        detail::strip_cr(line);
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError(source, lineno, "expected name<TAB>values");
        auto id = dict.find(line.substr(0, tab));
        if (!id) continue;
        std::istringstream values(line.substr(tab + 1));
        std::vector<double> v;
        for (double x; values >> x;) v.push_back(x);
        if (!values.eof()) throw ParseError(source, lineno, "non-numeric vector component");
        if (v.empty()) throw ParseError(source, lineno, "empty vector");
        if (dim == 0) dim = v.size();
        if (v.size() != dim)
            throw ParseError(source, lineno, "vector has " + std::to_string(v.size()) + " components, expected " +
                                                 std::to_string(dim));
        if (out.size() != dict.size() * dim) out.assign(dict.size() * dim, 0.0);
        std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(*id * dim));
        seen[*id] = 1;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw InputError(source + ": no vector for '" + dict.name(static_cast<std::uint32_t>(i)) + "'");
}

inline EmbeddingTable import_embeddings(const Workspace& ws, const std::string& entity_path,
                                        const std::string& relation_path) {
    std::size_t dim = 0;
    std::vector<double> ent, rel;
    auto read = [&](const std::string& path, const Dictionary& dict, std::vector<double>& out) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open " + path);
        import_vectors(in, dict, out, dim, path);
    };
    read(entity_path, ws.entities, ent);
    read(relation_path, ws.relations, rel);
    EmbeddingTable emb(ws.entities.size(), ws.relations.size(), dim);
    emb.entity_data() = std::move(ent);
    emb.relation_data() = std::move(rel);
    return emb;
}

struct PreparedSplits {
    std::vector<PreparedExample> train, valid, test;
};

struct FeatureCaches {
    const ResourceCache* resources = nullptr;
    const PathCache* paths = nullptr;
};

inline PreparedSplits prepare_splits(const Workspace& ws, const EmbeddingTable& emb, const PipelineConfig& cfg,
                                     FeatureCaches caches = {}) {
    const auto opt = extraction_options(cfg);
    PreparedSplits p;
    p.train = prepare_examples(ws.graph, emb, opt, ws.corpus.train, cfg.jobs, caches.resources, caches.paths);
    p.valid = prepare_examples(ws.graph, emb, opt, ws.corpus.valid, cfg.jobs, caches.resources, caches.paths);
    p.test = prepare_examples(ws.graph, emb, opt, ws.corpus.test, cfg.jobs, caches.resources, caches.paths);
    return p;
}

/// Fixes the per-relation thresholds and the feature standardiser, then
/// trains. `resume` continues from an existing model's parameters.
inline ModelBundle fit_model(const Workspace& ws, const EmbeddingTable& emb, const PreparedSplits& data,
                             const PipelineConfig& cfg, ModelConfig mcfg, TrainHistory* history = nullptr,
                             std::ostream* log = nullptr, const TrustModel* resume = nullptr) {
    ModelBundle b;
    b.config_text = cfg.to_text();
    b.extraction = extraction_options(cfg);
    b.embeddings = emb;
    if (resume) {
        b.model = *resume;
    } else {
        b.model = TrustModel(std::move(mcfg), cfg.seed + 29);
        b.model.thresholds = search_delta_r(emb, ws.corpus.valid, b.extraction.norm);
        std::vector<RRFeatureVector> raw;
        raw.reserve(data.train.size());
        for (const auto& ex : data.train) raw.push_back(ex.rr_raw);
        b.model.standardizer.fit(raw);
    }
    auto tc = train_config(cfg);
    tc.initial_as_best = resume != nullptr;
    auto h = train(b.model, b.embeddings, data.train, data.valid, tc, log);
    b.best_epoch = h.best_epoch;
    if (history) *history = std::move(h);
    return b;
}

inline std::vector<ScoredTriple> score_prepared(const TrustModel& model, const EmbeddingTable& emb,
                                                std::span<const PreparedExample> data) {
    std::vector<ScoredTriple> out;
    out.reserve(data.size());
    for (const auto& ex : data) out.push_back({ex.triple, ex.label, ex.noise, model.forward(ex, emb)});
    return out;
}

struct AblationRow {
    std::string name;
    double accuracy = 0.0;
    double f1_max = 0.0;
    int best_epoch = 0;
};

/// Each estimator alone behind a one-input logistic head, then the full
/// fusion model, all trained on the same prepared splits.
inline std::vector<AblationRow> run_ablation(const Workspace& ws, const EmbeddingTable& emb,
                                             const PreparedSplits& data, const PipelineConfig& cfg,
                                             std::ostream* log = nullptr, ModelBundle* full_out = nullptr) {
    std::vector<AblationRow> rows;
    auto evaluate = [&](std::string name, ModelConfig mc) {
        if (log) *log << "ablation: training " << name << '\n';
        auto b = fit_model(ws, emb, data, cfg, std::move(mc));
        auto scored = score_prepared(b.model, b.embeddings, data.test);
        rows.push_back({std::move(name), classify_accuracy(scored), f1_sweep(scored, cfg.eval_grid_step).f1_max,
                        b.best_epoch});
        return b;
    };
    for (auto e : {Estimator::resource_rank, Estimator::translation_energy, Estimator::reachable_paths}) {
        auto mc = model_config(cfg, {e});
        mc.fusion_hidden.clear();
        evaluate(std::string(to_string(e)), std::move(mc));
    }
    auto full = evaluate("Fusion", model_config(cfg));
    if (full_out) *full_out = std::move(full);
    return rows;
}

} // namespace kgt

#endif // KGTRUST_PIPELINE_HPP
