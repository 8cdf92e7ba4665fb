// kgtrust: ingest -> train-embeddings -> precompute -> train -> score / evaluate / ablate

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "kgtrust/kgtrust.hpp"

namespace fs = std::filesystem;
using namespace kgt;

namespace {

enum Exit { kOk = 0, kInternal = 1, kInput = 2 };

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    int jobs = 0;

    PipelineConfig load() const {
        PipelineConfig cfg;
        if (!config_path.empty()) cfg = PipelineConfig::load(config_path);
        if (const char* env = std::getenv("KGTRUST_CACHE_DIR"); env && *env) cfg.cache_dir = env;
        for (const auto& kv : overrides) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (jobs > 0) cfg.jobs = static_cast<unsigned>(jobs);
        cfg.validate();
        return cfg;
    }
};

fs::path corpus_dir(const PipelineConfig& c) { return fs::path(c.work_dir) / "corpus"; }
fs::path embeddings_path(const PipelineConfig& c) { return fs::path(c.work_dir) / "embeddings.bin"; }
fs::path model_path(const PipelineConfig& c) { return fs::path(c.work_dir) / "model.bin"; }

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_text(const fs::path& p, const std::function<void(std::ostream&)>& body) { io::atomic_write(p, body, false); }

struct LoadedCaches {
    ResourceCache resources;
    PathCache paths;

    FeatureCaches view() const {
        return {resources.empty() ? nullptr : &resources, paths.empty() ? nullptr : &paths};
    }
};

LoadedCaches load_caches(const Workspace& ws, const EmbeddingTable& emb, const PipelineConfig& cfg) {
    LoadedCaches c;
    const fs::path dir = cfg.resolved_cache_dir();
    if (!fs::exists(dir)) return c;
    const auto opt = extraction_options(cfg);
    c.resources = load_resource_cache(ws.graph, opt.resource, dir);
    c.paths = load_path_cache(ws.graph, emb, opt.paths, dir);
    if (!c.resources.empty() || !c.paths.empty())
        std::cerr << "using cache: " << c.resources.size() << " resource vectors, " << c.paths.size()
                  << " path sets\n";
    return c;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const PipelineConfig& cfg) {
    if (cfg.triples.empty()) throw InputError("data.triples is not set");
    std::vector<RawTriple> raw;
    for (const auto& p : cfg.triples) {
        auto part = read_tsv_triples(p);
        raw.insert(raw.end(), part.begin(), part.end());
    }
    if (raw.empty()) throw InputError("triple input is empty");
    auto source = build_graph(raw);
    auto ws = build_workspace(std::move(raw), cfg, &std::cerr);
    const auto dir = corpus_dir(cfg);
    save_workspace(ws, dir);
    std::ostringstream summary;
    summary << "source_entities\t" << source.entities.size() << '\n'
            << "source_relations\t" << source.relations.size() << '\n'
            << "source_triples\t" << source.graph.size() << '\n'
            << "duplicates_dropped\t" << source.duplicates << '\n'
            << "entities\t" << ws.entities.size() << '\n'
            << "relations\t" << ws.relations.size() << '\n'
            << "triples\t" << ws.graph.size() << '\n'
            << "train\t" << ws.corpus.train.size() << '\n'
            << "valid\t" << ws.corpus.valid.size() << '\n'
            << "test\t" << ws.corpus.test.size() << '\n';
    write_text(dir / "summary.tsv", [&](std::ostream& o) { o << summary.str(); });
    std::cout << summary.str();
    return kOk;
}

int cmd_train_embeddings(const PipelineConfig& cfg, const std::string& import_entities,
                         const std::string& import_relations) {
    auto ws = load_workspace(corpus_dir(cfg));
    EmbeddingTable emb;
    if (!import_entities.empty() || !import_relations.empty()) {
        if (import_entities.empty() || import_relations.empty())
            throw InputError("--import-entities and --import-relations go together");
        emb = import_embeddings(ws, import_entities, import_relations);
        if (emb.dim() != cfg.transe_dim)
            throw InputError("imported vectors have " + std::to_string(emb.dim()) + " components but transe.dim is " +
                             std::to_string(cfg.transe_dim));
        std::cerr << "imported " << emb.num_entities() << " entity and " << emb.num_relations()
                  << " relation vectors\n";
    } else {
        Stopwatch sw;
        TransEHistory hist;
        emb = train_embeddings(ws, cfg, &hist, &std::cerr);
        std::cerr << "TransE: " << hist.epochs_run << " epochs in " << std::fixed << std::setprecision(1)
                  << sw.seconds() << " s\n";
    }
    save_embeddings(embeddings_path(cfg).string(), emb);
    std::cout << "wrote " << embeddings_path(cfg).string() << '\n';
    return kOk;
}

int cmd_precompute(const PipelineConfig& cfg) {
    auto ws = load_workspace(corpus_dir(cfg));
    auto emb = load_embeddings(embeddings_path(cfg).string());
    const auto opt = extraction_options(cfg);
    std::vector<EntityId> heads;
    std::vector<Triple> targets;
    for (const auto* part : {&ws.corpus.train, &ws.corpus.valid, &ws.corpus.test})
        for (const auto& l : *part) {
            heads.push_back(l.triple.head);
            targets.push_back(l.triple);
        }
    const fs::path dir = cfg.resolved_cache_dir();
    fs::create_directories(dir);
    Stopwatch sw;
    auto r = precompute_resources(ws.graph, heads, opt.resource, dir, 256, cfg.jobs, &std::cerr);
    auto p = precompute_paths(ws.graph, emb, targets, opt.paths, dir, 1024, cfg.jobs, &std::cerr);
    std::cout << "resource shards " << r.shards << " (" << r.reused << " reused), path shards " << p.shards << " ("
              << p.reused << " reused) in " << std::fixed << std::setprecision(1) << sw.seconds() << " s\n";
    return kOk;
}

int cmd_train(const PipelineConfig& cfg, bool resume) {
    auto ws = load_workspace(corpus_dir(cfg));
    auto emb = load_embeddings(embeddings_path(cfg).string());
    auto caches = load_caches(ws, emb, cfg);
    auto data = prepare_splits(ws, emb, cfg, caches.view());
    std::optional<ModelBundle> previous;
    if (resume) {
        previous = load_bundle(model_path(cfg).string());
        if (!(previous->embeddings == emb)) throw InputError("checkpoint was trained on different embeddings");
        std::cerr << "resuming from " << model_path(cfg).string() << '\n';
    }
    TrainHistory hist;
    auto bundle = fit_model(ws, emb, data, cfg, model_config(cfg), &hist, &std::cerr,
                            previous ? &previous->model : nullptr);
    save_bundle(model_path(cfg).string(), bundle);
    write_text(fs::path(cfg.resolved_report_dir()) / "train_history.csv", [&](std::ostream& o) {
        o << "epoch,train_loss,valid_loss\n";
        for (std::size_t i = 0; i < hist.train_loss.size(); ++i)
            o << i + 1 << ',' << format_double(hist.train_loss[i]) << ',' << format_double(hist.valid_loss[i])
              << '\n';
    });
    std::cout << "best validation epoch " << hist.best_epoch << " (loss " << hist.best_valid_loss << ") of "
              << hist.train_loss.size() << "; wrote " << model_path(cfg).string() << '\n';
    return kOk;
}

int cmd_score(const PipelineConfig& cfg, const std::string& input, const std::string& output, bool sort) {
    auto ws = load_workspace(corpus_dir(cfg));
    auto bundle = load_bundle(model_path(cfg).string());
    std::ifstream in(input);
    if (!in) throw InputError("cannot open " + input);
    Scorer scorer(ws.graph, bundle);

    struct Row {
        std::string text;
        double score;
        bool ok;
    };
    std::vector<Row> rows;
    std::size_t failures = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        detail::strip_cr(line);
        if (line.empty()) continue;
        auto f = detail::split_tabs(line);
        auto fail = [&](const std::string& why) {
            ++failures;
            rows.push_back({line + "\terror: " + why, 0.0, false});
            std::cerr << input << ':' << lineno << ": " << why << '\n';
        };
        if (f.size() != 3) {
            fail("expected 3 tab-separated fields");
            continue;
        }
        auto h = ws.entities.find(f[0]), t = ws.entities.find(f[2]);
        auto r = ws.relations.find(f[1]);
        if (!h) fail("unknown entity '" + f[0] + "'");
        else if (!r) fail("unknown relation '" + f[1] + "'");
        else if (!t) fail("unknown entity '" + f[2] + "'");
        else {
            const double s = scorer.score({*h, *r, *t});
            rows.push_back({f[0] + '\t' + f[1] + '\t' + f[2] + '\t' + format_double(s), s, true});
        }
    }
    if (sort)
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
            if (a.ok != b.ok) return a.ok;
            return a.ok && a.score < b.score;
        });
    auto emit = [&](std::ostream& o) {
        for (const auto& r : rows) o << r.text << '\n';
    };
    if (output.empty()) emit(std::cout);
    else write_text(output, emit);
    if (failures) std::cerr << failures << " of " << rows.size() << " lines could not be scored\n";
    return failures ? kInput : kOk;
}

int cmd_evaluate(PipelineConfig cfg, const std::string& mode) {
    if (!mode.empty()) cfg.set("eval.mode", mode);
    cfg.validate();
    auto ws = load_workspace(corpus_dir(cfg));
    auto bundle = load_bundle(model_path(cfg).string());
    auto caches = load_caches(ws, bundle.embeddings, cfg);
    auto cv = caches.view();
    auto test = prepare_examples(ws.graph, bundle.embeddings, bundle.extraction, ws.corpus.test, cfg.jobs,
                                 cv.resources, cv.paths);
    auto scored = score_prepared(bundle.model, bundle.embeddings, test);
    const auto sweep = f1_sweep(scored, cfg.eval_grid_step);
    double pos = 0, neg = 0;
    std::size_t npos = 0;
    for (const auto& s : scored) {
        (s.label ? pos : neg) += s.score;
        npos += s.label;
    }
    const fs::path dir = cfg.resolved_report_dir();
    const std::string hash = io::hex64(cfg.hash());

    Scorer scorer(ws.graph, bundle);
    auto positives = ws.test_positives();
    if (cfg.eval_max_positives && positives.size() > cfg.eval_max_positives)
        positives.resize(cfg.eval_max_positives);
    const bool full = cfg.eval_mode == "full";
    std::optional<std::size_t> budget;
    if (!full) budget = cfg.eval_candidates;
    std::vector<NoiseTypeResult> noise;
    for (auto m : {BlankMode::tail, BlankMode::relation, BlankMode::head}) {
        Stopwatch sw;
        noise.push_back(noise_type_eval([&](const Triple& t) { return scorer.score(t); }, ws.graph, positives, m,
                                        budget, cfg.seed + 31));
        std::cerr << "noise type " << to_string(m) << ": " << noise.back().candidates << " candidates in "
                  << std::fixed << std::setprecision(1) << sw.seconds() << " s\n";
    }

    write_text(dir / "metrics.csv", [&](std::ostream& o) {
        o << "metric,value\n"
          << "config_hash," << hash << '\n'
          << "test_triples," << scored.size() << '\n'
          << "accuracy," << format_double(classify_accuracy(scored)) << '\n'
          << "f1_max," << format_double(sweep.f1_max) << '\n'
          << "best_threshold," << format_double(sweep.best_threshold) << '\n'
          << "mean_score_positive," << format_double(npos ? pos / npos : 0.0) << '\n'
          << "mean_score_negative," << format_double(scored.size() > npos ? neg / (scored.size() - npos) : 0.0)
          << '\n';
    });
    export_pr_curve(sweep, dir / "pr_curve.csv");
    export_distribution(scored, dir / "distribution.csv");
    write_text(dir / "noise_types.csv", [&](std::ostream& o) {
        o << "blank,mode,positives,candidates,recall,quality,rank_recall,false_accept_rate\n";
        for (const auto& r : noise)
            o << '"' << to_string(r.mode) << "\"," << (r.full ? "full" : "desk") << ',' << r.positives << ','
              << r.candidates << ',' << format_double(r.recall) << ',' << format_double(r.quality) << ','
              << format_double(r.rank_recall) << ',' << format_double(r.false_accept_rate) << '\n';
    });
    write_text(dir / "config.cfg", [&](std::ostream& o) {
        o << "# config hash " << hash << '\n' << cfg.to_text();
    });

    std::cout << std::setprecision(4) << std::fixed << "accuracy " << classify_accuracy(scored) << "  f1_max "
              << sweep.f1_max << " at " << sweep.best_threshold << "  (" << scored.size() << " test triples)\n";
    for (const auto& r : noise)
        std::cout << std::setw(8) << to_string(r.mode) << "  recall " << r.recall << "  quality " << r.quality
                  << "  rank_recall " << r.rank_recall << '\n';
    std::cout << "reports in " << dir.string() << " (config " << hash << ")\n";
    return kOk;
}

int cmd_ablate(const PipelineConfig& cfg) {
    auto ws = load_workspace(corpus_dir(cfg));
    auto emb = load_embeddings(embeddings_path(cfg).string());
    auto caches = load_caches(ws, emb, cfg);
    auto data = prepare_splits(ws, emb, cfg, caches.view());
    auto rows = run_ablation(ws, emb, data, cfg, &std::cerr);
    const fs::path dir = cfg.resolved_report_dir();
    write_text(dir / "ablation.csv", [&](std::ostream& o) {
        o << "model,accuracy,f1_max,best_epoch,config_hash\n";
        for (const auto& r : rows)
            o << r.name << ',' << format_double(r.accuracy) << ',' << format_double(r.f1_max) << ','
              << r.best_epoch << ',' << io::hex64(cfg.hash()) << '\n';
    });
    std::cout << std::fixed << std::setprecision(4);
    for (const auto& r : rows)
        std::cout << std::left << std::setw(14) << r.name << " accuracy " << r.accuracy << "  f1_max " << r.f1_max
                  << '\n';
    return kOk;
}

int cmd_synth(const std::string& kind, const std::string& out, std::size_t entities, std::size_t relations,
              std::size_t cluster, std::uint64_t seed) {
    std::vector<RawTriple> raw;
    if (kind == "community") {
        CommunityOptions o;
        o.seed = seed;
        raw = community_kg(o);
    } else if (kind == "clustered") {
        raw = clustered_kg(entities, relations, cluster, seed);
    } else {
        throw InputError("unknown synthetic kind '" + kind + "' (community or clustered)");
    }
    write_text(out, [&](std::ostream& o) {
        for (const auto& t : raw) o << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
    });
    std::cout << "wrote " << raw.size() << " triples to " << out << '\n';
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Triple trustworthiness scoring for knowledge graphs"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", common.config_path, "configuration file (key = value lines)");
        sub->add_option("-s,--set", common.overrides, "override a configuration key, key=value")->take_all();
        sub->add_option("-j,--jobs", common.jobs, "worker threads");
    };

    auto* ingest = app.add_subcommand("ingest", "load triples, draw negatives, split the corpus");
    add_common(ingest);

    std::string import_entities, import_relations;
    auto* embed = app.add_subcommand("train-embeddings", "train TransE or import vectors");
    add_common(embed);
    embed->add_option("--import-entities", import_entities, "entity vectors: name<TAB>v1 v2 ...");
    embed->add_option("--import-relations", import_relations, "relation vectors: name<TAB>v1 v2 ...");

    auto* pre = app.add_subcommand("precompute", "fill the resource and path caches");
    add_common(pre);

    bool resume = false;
    auto* train_cmd = app.add_subcommand("train", "fit the estimators and the fusion head");
    add_common(train_cmd);
    train_cmd->add_flag("--resume", resume, "continue from the existing checkpoint");

    std::string input, output;
    bool sort = false;
    auto* score = app.add_subcommand("score", "score triples from a TSV file");
    add_common(score);
    score->add_option("-i,--input", input, "TSV of head, relation, tail names")->required();
    score->add_option("-o,--output", output, "output file (default stdout)");
    score->add_flag("--sort", sort, "sort by ascending score, least trustworthy first");

    std::string mode;
    auto* evaluate = app.add_subcommand("evaluate", "classification metrics and noise-type tables");
    add_common(evaluate);
    evaluate->add_option("--mode", mode, "candidate construction: desk (sampled) or full")
        ->check(CLI::IsMember({"desk", "full"}));

    auto* ablate = app.add_subcommand("ablate", "each estimator alone against the fusion model");
    add_common(ablate);

    std::string kind = "community", out;
    std::size_t entities = 14951, relations = 1345, cluster = 10;
    std::uint64_t seed = 7;
    auto* synth = app.add_subcommand("synth", "write a synthetic triple file");
    synth->add_option("--kind", kind, "community or clustered");
    synth->add_option("-o,--out", out, "output TSV")->required();
    synth->add_option("--entities", entities, "clustered: entity count");
    synth->add_option("--relations", relations, "clustered: relation count");
    synth->add_option("--cluster-size", cluster, "clustered: entities per cluster");
    synth->add_option("--seed", seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInput;
    }

    try {
        if (*synth) return cmd_synth(kind, out, entities, relations, cluster, seed);
        const auto cfg = common.load();
        if (*ingest) return cmd_ingest(cfg);
        if (*embed) return cmd_train_embeddings(cfg, import_entities, import_relations);
        if (*pre) return cmd_precompute(cfg);
        if (*train_cmd) return cmd_train(cfg, resume);
        if (*score) return cmd_score(cfg, input, output, sort);
        if (*evaluate) return cmd_evaluate(cfg, mode);
        if (*ablate) return cmd_ablate(cfg);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
    return kInternal;
}
