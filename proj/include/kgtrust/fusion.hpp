#ifndef KGTRUST_FUSION_HPP
#define KGTRUST_FUSION_HPP

// The fusion classifier and the joint model it trains. The feature vector is
// f(s) = [RR(h,t), P(E(h,r,t)), RP(h,r,t)]; a ReLU perceptron with a sigmoid
// output maps it to the trustworthiness p(y = 1 | f(s)). Gradients flow back
// into the ResourceRank head, the TEF smoothing factor lambda and the path
// model; embeddings stay frozen.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "features.hpp"
#include "nn.hpp"
#include "path_inference.hpp"
#include "resource_rank.hpp"
#include "transe.hpp"

namespace kgt {

enum class Estimator : std::uint8_t { resource_rank = 0, translation_energy = 1, reachable_paths = 2 };

inline std::string_view to_string(Estimator e) {
    switch (e) {
        case Estimator::resource_rank: return "ResourceRank";
        case Estimator::translation_energy: return "TEF";
        case Estimator::reachable_paths: return "RPI";
    }
    return "?";
}

struct ModelConfig {
    std::size_t dim = 100;
    std::size_t rr_hidden = 16;
    std::size_t path_hidden = 100;
    std::size_t topk = 3;
    std::size_t rp_hidden = 32;
    std::vector<std::size_t> fusion_hidden{32, 16};
    double dropout = 0.2;
    double initial_lambda = 1.0;
    std::vector<Estimator> estimators{Estimator::resource_rank, Estimator::translation_energy,
                                      Estimator::reachable_paths};

    bool uses(Estimator e) const { return std::find(estimators.begin(), estimators.end(), e) != estimators.end(); }
};

struct EstimatorFeatures {
    double rr = 0.5;
    double tef = 0.5;
    double rp = 0.5;

    double get(Estimator e) const {
        switch (e) {
            case Estimator::resource_rank: return rr;
            case Estimator::translation_energy: return tef;
            case Estimator::reachable_paths: return rp;
        }
        return 0.0;
    }
};

class TrustModel {
public:
    TrustModel() = default;

    TrustModel(ModelConfig cfg, std::uint64_t seed)
        : cfg_(std::move(cfg)), rr_(cfg_.rr_hidden), log_lambda_("tef.log_lambda", 1, 1),
          paths_(cfg_.dim, cfg_.path_hidden, cfg_.topk, cfg_.rp_hidden),
          fusion_("fusion", cfg_.estimators.size(), cfg_.fusion_hidden, cfg_.dropout) {
        if (cfg_.estimators.empty()) throw InputError("model needs at least one estimator");
        std::mt19937_64 rng(seed);
        rr_.init(rng);
        paths_.init(rng);
        fusion_.init(rng);
        log_lambda_.value[0] = std::log(cfg_.initial_lambda);
    }

    const ModelConfig& config() const noexcept { return cfg_; }
    double lambda() const { return std::exp(log_lambda_.value[0]); }

    FeatureStandardizer standardizer;
    RelationThresholds thresholds;

    double delta_for(RelationId r) const {
        return r < thresholds.delta.size() ? thresholds.delta[r] : thresholds.global;
    }

    /// The three estimator outputs; estimators outside the active set are
    /// still evaluated (they are cheap and useful for reports).
    EstimatorFeatures features(const PreparedExample& ex, const EmbeddingTable& emb) const {
        EstimatorFeatures f;
        f.rr = rr_.score(standardizer.apply(ex.rr_raw));
        f.tef = tef_probability(ex.energy, delta_for(ex.triple.relation), lambda());
        f.rp = paths_.score(ex.paths, emb);
        return f;
    }

    double logit(const PreparedExample& ex, const EmbeddingTable& emb) const {
        EstimatorFeatures f;
        if (cfg_.uses(Estimator::resource_rank)) f.rr = rr_.score(standardizer.apply(ex.rr_raw));
        if (cfg_.uses(Estimator::translation_energy))
            f.tef = tef_probability(ex.energy, delta_for(ex.triple.relation), lambda());
        if (cfg_.uses(Estimator::reachable_paths)) f.rp = paths_.score(ex.paths, emb);
        return fusion_.forward(assemble(f));
    }

    /// Trustworthiness in (0,1); dropout off.
    double forward(const PreparedExample& ex, const EmbeddingTable& emb) const {
        return nn::probability(logit(ex, emb));
    }

    /// Probability computed from already assembled estimator outputs.
    double fuse(const EstimatorFeatures& f) const { return nn::probability(fusion_.forward(assemble(f))); }

    /// Binary cross-entropy of one example; accumulates `scale` times its
    /// gradient into the active parameters.
    double accumulate_gradient(const PreparedExample& ex, const EmbeddingTable& emb, double scale,
                               std::mt19937_64* dropout_rng = nullptr) {
        Scratch& s = scratch_;
        EstimatorFeatures f;
        const auto v = standardizer.apply(ex.rr_raw);
        if (cfg_.uses(Estimator::resource_rank)) f.rr = nn::sigmoid(rr_.logit(v, s.rr));
        const double delta = delta_for(ex.triple.relation);
        if (cfg_.uses(Estimator::translation_energy)) f.tef = tef_probability(ex.energy, delta, lambda());
        if (cfg_.uses(Estimator::reachable_paths)) f.rp = nn::sigmoid(paths_.logit(ex.paths, emb, s.rp));
        const auto in = assemble(f);
        const double logit = fusion_.forward(in, s.fusion, dropout_rng);
        const double loss = nn::bce_with_logit(logit, ex.label);
        const double dlogit = scale * (nn::sigmoid(logit) - ex.label);
        std::vector<double> din(in.size());
        fusion_.backward(s.fusion, dlogit, din);
        for (std::size_t k = 0; k < cfg_.estimators.size(); ++k) {
            const double d = din[k];
            switch (cfg_.estimators[k]) {
                case Estimator::resource_rank: rr_.backward(s.rr, d * f.rr * (1.0 - f.rr)); break;
                case Estimator::translation_energy:
                    log_lambda_.grad[0] += d * f.tef * (1.0 - f.tef) * (delta - ex.energy) * lambda();
                    break;
                case Estimator::reachable_paths: paths_.backward(s.rp, d * f.rp * (1.0 - f.rp)); break;
            }
        }
        return loss;
    }

    /// Trainable parameters of the active estimators and the fusion head.
    nn::ParamList params() {
        nn::ParamList ps;
        if (cfg_.uses(Estimator::resource_rank))
            for (auto* p : rr_.params()) ps.push_back(p);
        if (cfg_.uses(Estimator::translation_energy)) ps.push_back(&log_lambda_);
        if (cfg_.uses(Estimator::reachable_paths))
            for (auto* p : paths_.params()) ps.push_back(p);
        for (auto* p : fusion_.params()) ps.push_back(p);
        return ps;
    }

    /// Every parameter block, including inactive estimators (for checkpoints).
    nn::ParamList all_params() {
        nn::ParamList ps = rr_.params();
        ps.push_back(&log_lambda_);
        for (auto* p : paths_.params()) ps.push_back(p);
        for (auto* p : fusion_.params()) ps.push_back(p);
        return ps;
    }

    RRHead& rr_head() noexcept { return rr_; }
    PathModel& path_model() noexcept { return paths_; }
    nn::Mlp& fusion_head() noexcept { return fusion_; }
    const RRHead& rr_head() const noexcept { return rr_; }
    const PathModel& path_model() const noexcept { return paths_; }

private:
    struct Scratch {
        nn::Mlp::Tape rr;
        PathModel::Tape rp;
        nn::Mlp::Tape fusion;
    };

    std::vector<double> assemble(const EstimatorFeatures& f) const {
        std::vector<double> in;
        in.reserve(cfg_.estimators.size());
        for (auto e : cfg_.estimators) in.push_back(f.get(e));
        return in;
    }

    ModelConfig cfg_;
    RRHead rr_;
    nn::Param log_lambda_;
    PathModel paths_;
    nn::Mlp fusion_;
    Scratch scratch_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    std::size_t batch_size = 50;
    double learning_rate = 0.001;
    int patience = 10;
    int max_epochs = 300;
    std::uint64_t seed = 1;
    // count the starting parameters as epoch 0, so continuing a run can only
    // keep or improve its validation loss
    bool initial_as_best = false;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> valid_loss;
    int best_epoch = 0;  // 1-based
    double best_valid_loss = std::numeric_limits<double>::infinity();
};

inline double mean_loss(const TrustModel& model, const EmbeddingTable& emb, std::span<const PreparedExample> data) {
    double s = 0.0;
    for (const auto& ex : data) s += nn::bce_with_logit(model.logit(ex, emb), ex.label);
    return data.empty() ? 0.0 : s / static_cast<double>(data.size());
}

/// Mini-batch Adam on binary cross-entropy with early stopping on validation
/// loss. The model is left holding the best-validation parameters.
inline TrainHistory train(TrustModel& model, const EmbeddingTable& emb, std::span<const PreparedExample> train_set,
                          std::span<const PreparedExample> valid_set, const TrainConfig& cfg,
                          std::ostream* log = nullptr) {
    if (train_set.empty()) throw InputError("training split is empty");
    if (valid_set.empty()) throw InputError("validation split is empty");
    auto params = model.params();
    nn::Adam adam(cfg.learning_rate);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    auto snapshot = [&] {
        std::vector<std::vector<double>> s;
        for (auto* p : params) s.push_back(p->value);
        return s;
    };
    TrainHistory hist;
    auto best = snapshot();
    int stale = 0;
    if (cfg.initial_as_best) hist.best_valid_loss = mean_loss(model, emb, valid_set);
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            nn::zero_grads(params);
            const double scale = 1.0 / static_cast<double>(end - start);
            for (std::size_t i = start; i < end; ++i)
                total += model.accumulate_gradient(train_set[order[i]], emb, scale, &rng);
            if (!std::isfinite(total))
                throw Error("fusion training diverged at epoch " + std::to_string(epoch) + " (non-finite loss)");
            adam.step(params);
        }
        const double train_loss = total / static_cast<double>(order.size());
        const double valid_loss = mean_loss(model, emb, valid_set);
        if (!std::isfinite(valid_loss)) throw Error("non-finite validation loss at epoch " + std::to_string(epoch));
        hist.train_loss.push_back(train_loss);
        hist.valid_loss.push_back(valid_loss);
        if (log) *log << "epoch " << epoch << " train " << train_loss << " valid " << valid_loss << '\n';
        if (valid_loss < hist.best_valid_loss) {
            hist.best_valid_loss = valid_loss;
            hist.best_epoch = epoch;
            best = snapshot();
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
    return hist;
}

// ---------------------------------------------------------------------------
// Checkpoint

struct ModelBundle {
    std::string config_text;  // pipeline configuration used, for provenance
    ExtractionOptions extraction;
    EmbeddingTable embeddings;
    TrustModel model;
    int best_epoch = 0;
};

inline constexpr std::uint32_t kBundleFormatVersion = 1;

inline void write_bundle(std::ostream& out, ModelBundle& b) {
    io::Writer w(out);
    w.bytes("KGTMODEL");
    w.u32(kBundleFormatVersion);
    w.str(b.config_text);
    // extraction options
    const auto& x = b.extraction;
    w.f64(x.resource.theta);
    w.f64(x.resource.tol);
    w.u32(static_cast<std::uint32_t>(x.resource.max_iter));
    w.u32(x.max_depth);
    w.u32(static_cast<std::uint32_t>(x.paths.search.max_length));
    w.u64(x.paths.search.budget);
    w.u64(x.paths.topk);
    w.u32(x.paths.pairing == EntityPairing::swapped);
    w.u32(x.norm == Norm::l1);
    // model configuration
    const auto& c = b.model.config();
    w.u64(c.dim);
    w.u64(c.rr_hidden);
    w.u64(c.path_hidden);
    w.u64(c.topk);
    w.u64(c.rp_hidden);
    w.u64(c.fusion_hidden.size());
    for (auto h : c.fusion_hidden) w.u64(h);
    w.f64(c.dropout);
    w.f64(c.initial_lambda);
    w.u64(c.estimators.size());
    for (auto e : c.estimators) w.u32(static_cast<std::uint32_t>(e));
    w.u32(static_cast<std::uint32_t>(b.best_epoch));
    // fixed model state
    const auto& th = b.model.thresholds;
    w.f64(th.global);
    w.u64(th.delta.size());
    w.f64s(th.delta);
    for (char f : th.from_validation) w.u32(static_cast<std::uint32_t>(f));
    w.f64s(b.model.standardizer.mean());
    w.f64s(b.model.standardizer.scale());
    // parameters
    auto ps = b.model.all_params();
    w.u64(ps.size());
    for (auto* p : ps) {
        w.str(p->name);
        w.u64(p->rows);
        w.u64(p->cols);
        w.f64s(p->value);
    }
    write_embeddings(out, b.embeddings);
}

inline ModelBundle read_bundle(std::istream& in, const std::string& source = "<model>") {
    io::Reader r(in, source);
    r.expect_magic("KGTMODEL");
    if (auto v = r.u32(); v != kBundleFormatVersion) r.fail("unsupported model format version " + std::to_string(v));
    ModelBundle b;
    b.config_text = r.str();
    auto& x = b.extraction;
    x.resource.theta = r.f64();
    x.resource.tol = r.f64();
    x.resource.max_iter = static_cast<int>(r.u32());
    x.max_depth = r.u32();
    x.paths.search.max_length = static_cast<int>(r.u32());
    x.paths.search.budget = r.u64();
    x.paths.topk = r.u64();
    x.paths.pairing = r.u32() ? EntityPairing::swapped : EntityPairing::as_printed;
    x.norm = r.u32() ? Norm::l1 : Norm::l2;
    ModelConfig c;
    c.dim = r.u64();
    c.rr_hidden = r.u64();
    c.path_hidden = r.u64();
    c.topk = r.u64();
    c.rp_hidden = r.u64();
    c.fusion_hidden.resize(r.u64());
    for (auto& h : c.fusion_hidden) h = r.u64();
    c.dropout = r.f64();
    c.initial_lambda = r.f64();
    c.estimators.resize(r.u64());
    for (auto& e : c.estimators) {
        auto v = r.u32();
        if (v > 2) r.fail("unknown estimator tag");
        e = static_cast<Estimator>(v);
    }
    b.best_epoch = static_cast<int>(r.u32());
    b.model = TrustModel(c, 0);
    auto& th = b.model.thresholds;
    th.global = r.f64();
    th.delta.resize(r.u64());
    r.f64s(th.delta);
    th.from_validation.resize(th.delta.size());
    for (auto& f : th.from_validation) f = static_cast<char>(r.u32());
    std::array<double, 6> mean{}, scale{};
    r.f64s(mean);
    r.f64s(scale);
    b.model.standardizer.set(mean, scale);
    auto ps = b.model.all_params();
    if (r.u64() != ps.size()) r.fail("parameter block count mismatch");
    for (auto* p : ps) {
        auto name = r.str();
        auto rows = r.u64(), cols = r.u64();
        if (name != p->name || rows != p->rows || cols != p->cols) r.fail("parameter block mismatch at " + name);
        r.f64s(p->value);
    }
    b.embeddings = read_embeddings(in, source);
    if (b.embeddings.dim() != c.dim) r.fail("embedding dimension disagrees with model configuration");
    return b;
}

inline void save_bundle(const std::string& path, ModelBundle& b) {
    io::atomic_write(path, [&](std::ostream& o) { write_bundle(o, b); });
}

inline ModelBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open model checkpoint: " + path);
    return read_bundle(in, path);
}

/// Scores triples against a trained bundle over a given graph.
class Scorer {
public:
    Scorer(const KnowledgeGraph& kg, const ModelBundle& bundle, std::size_t memo_capacity = 1024)
        : bundle_(bundle), fx_(kg, bundle.embeddings, bundle.extraction, nullptr, nullptr, memo_capacity) {}

    EstimatorFeatures assemble_features(const Triple& t) {
        auto ex = fx_.prepare({t, 1, NoiseKind::none});
        return bundle_.model.features(ex, bundle_.embeddings);
    }

    double score(const Triple& t) {
        auto ex = fx_.prepare({t, 1, NoiseKind::none});
        return bundle_.model.forward(ex, bundle_.embeddings);
    }

    FeatureExtractor& extractor() noexcept { return fx_; }

private:
    const ModelBundle& bundle_;
    FeatureExtractor fx_;
};

} // namespace kgt

#endif // KGTRUST_FUSION_HPP
