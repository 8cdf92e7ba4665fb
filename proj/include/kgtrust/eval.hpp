#ifndef KGTRUST_EVAL_HPP
#define KGTRUST_EVAL_HPP

// Error-detection metrics over scored triples. A triple is predicted
// trustworthy when its score is at or above the threshold.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "binary_io.hpp"
#include "kg_store.hpp"

namespace kgt {

struct ScoredTriple {
    Triple triple;
    int label = 1;
    NoiseKind noise = NoiseKind::none;
    double score = 0.0;
};

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    double precision() const { return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0; }
    double recall() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
    double f1() const {
        const double p = precision(), r = recall();
        return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    }
    double accuracy() const {
        const auto n = tp + fp + tn + fn;
        return n ? static_cast<double>(tp + tn) / static_cast<double>(n) : 0.0;
    }
};

inline Confusion confusion_at(std::span<const ScoredTriple> scored, double threshold) {
    Confusion c;
    for (const auto& s : scored) {
        const bool pred = s.score >= threshold;
        if (pred && s.label) ++c.tp;
        else if (pred) ++c.fp;
        else if (s.label) ++c.fn;
        else ++c.tn;
    }
    return c;
}

inline double classify_accuracy(std::span<const ScoredTriple> scored, double threshold = 0.5) {
    if (scored.empty()) throw InputError("cannot compute accuracy of an empty set");
    return confusion_at(scored, threshold).accuracy();
}

struct PrPoint {
    double threshold, precision, recall, f1;
};

struct F1Sweep {
    double f1_max = 0.0;
    double best_threshold = 0.0;
    std::vector<PrPoint> curve;
};

/// Precision, recall and F1 on the grid {0, step, 2 step, ..., 1}. With no
/// predicted positives precision is reported as 1.
inline F1Sweep f1_sweep(std::span<const ScoredTriple> scored, double step = 0.001) {
    if (!(step > 0.0 && step < 1.0)) throw InputError("grid step must lie in (0, 1)");
    // sort once, then walk thresholds upward
    std::vector<ScoredTriple> sorted(scored.begin(), scored.end());
    std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.score < b.score; });
    std::size_t total_pos = 0;
    for (const auto& s : sorted) total_pos += (s.label == 1);
    const std::size_t total_neg = sorted.size() - total_pos;
    const auto n_steps = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9));
    // when 1/step is integral, k/n keeps points such as 0.5 exact
    const bool integral = std::abs(1.0 / step - std::round(1.0 / step)) < 1e-9;
    std::vector<double> grid;
    for (std::size_t k = 0; k <= n_steps; ++k)
        grid.push_back(integral ? static_cast<double>(k) / static_cast<double>(n_steps)
                                : std::min(1.0, static_cast<double>(k) * step));
    if (grid.back() < 1.0) grid.push_back(1.0);

    F1Sweep out;
    std::size_t idx = 0, below_pos = 0, below_neg = 0;
    for (double th : grid) {
        while (idx < sorted.size() && sorted[idx].score < th) {
            if (sorted[idx].label) ++below_pos; else ++below_neg;
            ++idx;
        }
        Confusion c{total_pos - below_pos, total_neg - below_neg, below_neg, below_pos};
        PrPoint p{th, c.precision(), c.recall(), c.f1()};
        if (out.curve.empty() || p.f1 > out.f1_max) {
            out.f1_max = p.f1;
            out.best_threshold = th;
        }
        out.curve.push_back(p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Per-noise-type recall and quality

enum class BlankMode { tail, relation, head };  // (h,r,?), (h,?,t), (?,r,t)

inline std::string_view to_string(BlankMode m) {
    switch (m) {
        case BlankMode::tail: return "(h,r,?)";
        case BlankMode::relation: return "(h,?,t)";
        case BlankMode::head: return "(?,r,t)";
    }
    return "?";
}

inline BlankMode parse_blank_mode(std::string_view s) {
    if (s == "(h,r,?)" || s == "tail") return BlankMode::tail;
    if (s == "(h,?,t)" || s == "relation") return BlankMode::relation;
    if (s == "(?,r,t)" || s == "head") return BlankMode::head;
    throw InputError("unknown blank mode: " + std::string(s));
}

/// Candidate completions of a positive with one position blanked. Without a
/// budget every entity (or relation) fills the blank; with a budget, that many
/// distinct random fillers other than the true one, plus the true completion.
inline std::vector<Triple> build_candidates(std::size_t num_entities, std::size_t num_relations, const Triple& positive,
                                            BlankMode mode, std::optional<std::size_t> budget, std::mt19937_64& rng) {
    const std::size_t pool = mode == BlankMode::relation ? num_relations : num_entities;
    auto fill = [&](std::uint32_t v) {
        Triple t = positive;
        if (mode == BlankMode::tail) t.tail = v;
        else if (mode == BlankMode::head) t.head = v;
        else t.relation = v;
        return t;
    };
    const std::uint32_t truth = mode == BlankMode::tail   ? positive.tail
                                : mode == BlankMode::head ? positive.head
                                                          : positive.relation;
    std::vector<Triple> out;
    if (!budget || *budget + 1 >= pool) {
        out.reserve(pool);
        for (std::size_t v = 0; v < pool; ++v) out.push_back(fill(static_cast<std::uint32_t>(v)));
        return out;
    }
    // partial Fisher-Yates over the pool without the true filler
    std::vector<std::uint32_t> ids;
    ids.reserve(pool - 1);
    for (std::size_t v = 0; v < pool; ++v)
        if (v != truth) ids.push_back(static_cast<std::uint32_t>(v));
    out.push_back(positive);
    for (std::size_t i = 0; i < *budget; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, ids.size() - 1);
        std::swap(ids[i], ids[pick(rng)]);
        out.push_back(fill(ids[i]));
    }
    return out;
}

struct NoiseTypeResult {
    BlankMode mode = BlankMode::tail;
    bool full = true;
    std::size_t positives = 0;
    std::size_t candidates = 0;          // total scored
    std::vector<std::size_t> per_positive;  // candidate count per positive
    double recall = 0.0;                 // true triples judged correct (> 0.5)
    double quality = 0.0;                // mean score of the true triples
    double false_accept_rate = 0.0;      // candidates outside the graph judged correct
    double rank_recall = 0.0;            // true triple scored highest among its candidates
    std::vector<double> true_scores;
};

using ScoreFn = std::function<double(const Triple&)>;

inline NoiseTypeResult noise_type_eval(const ScoreFn& score, const KnowledgeGraph& kg,
                                       std::span<const Triple> positives, BlankMode mode,
                                       std::optional<std::size_t> budget, std::uint64_t seed) {
    if (positives.empty()) throw InputError("noise-type evaluation needs test positives");
    std::mt19937_64 rng(seed);
    NoiseTypeResult r;
    r.mode = mode;
    r.full = !budget.has_value();
    r.positives = positives.size();
    std::size_t recalled = 0, ranked_first = 0, outside = 0, outside_accepted = 0;
    double quality = 0.0;
    for (const auto& p : positives) {
        auto cands = build_candidates(kg.num_entities(), kg.num_relations(), p, mode, budget, rng);
        r.per_positive.push_back(cands.size());
        r.candidates += cands.size();
        double truth_score = 0.0, best_other = -1.0;
        for (const auto& c : cands) {
            const double s = score(c);
            if (c == p) {
                truth_score = s;
            } else {
                best_other = std::max(best_other, s);
                if (!kg.contains(c)) {
                    ++outside;
                    outside_accepted += (s > 0.5);
                }
            }
        }
        r.true_scores.push_back(truth_score);
        quality += truth_score;
        recalled += (truth_score > 0.5);
        ranked_first += (truth_score >= best_other);
    }
    const double n = static_cast<double>(positives.size());
    r.recall = static_cast<double>(recalled) / n;
    r.quality = quality / n;
    r.rank_recall = static_cast<double>(ranked_first) / n;
    r.false_accept_rate = outside ? static_cast<double>(outside_accepted) / static_cast<double>(outside) : 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// CSV exports

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// `triple_id,label,score`; triple_id is the row's position in `scored`.
inline void export_distribution(std::span<const ScoredTriple> scored, const std::filesystem::path& path) {
    if (scored.empty()) throw InputError("nothing to export");
    io::atomic_write(
        path,
        [&](std::ostream& o) {
            o << "triple_id,label,score\n";
            for (std::size_t i = 0; i < scored.size(); ++i)
                o << i << ',' << scored[i].label << ',' << format_double(scored[i].score) << '\n';
        },
        false);
}

/// `threshold,precision,recall,f1` plus a gnuplot script next to it.
inline void export_pr_curve(const F1Sweep& sweep, const std::filesystem::path& csv_path) {
    io::atomic_write(
        csv_path,
        [&](std::ostream& o) {
            o << "threshold,precision,recall,f1\n";
            for (const auto& p : sweep.curve)
                o << format_double(p.threshold) << ',' << format_double(p.precision) << ','
                  << format_double(p.recall) << ',' << format_double(p.f1) << '\n';
        },
        false);
    auto gp = csv_path;
    gp.replace_extension(".gp");
    io::atomic_write(
        gp,
        [&](std::ostream& o) {
            o << "set datafile separator ','\n"
              << "set key autotitle columnhead\n"
              << "set xlabel 'threshold'\nset yrange [0:1.05]\n"
              << "set terminal pngcairo size 800,600\n"
              << "set output '" << csv_path.stem().string() << ".png'\n"
              << "plot '" << csv_path.filename().string() << "' using 1:2 with lines title 'precision', \\\n"
              << "     '' using 1:3 with lines title 'recall'\n";
        },
        false);
}

struct DistributionRow {
    std::size_t id;
    int label;
    double score;
};

inline std::vector<DistributionRow> read_distribution(std::istream& in) {
    std::vector<DistributionRow> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        DistributionRow r{};
        auto a = line.find(','), b = line.find(',', a + 1);
        if (a == std::string::npos || b == std::string::npos) throw InputError("malformed distribution row");
        r.id = std::stoull(line.substr(0, a));
        r.label = std::stoi(line.substr(a + 1, b - a - 1));
        r.score = std::stod(line.substr(b + 1));
        rows.push_back(r);
    }
    return rows;
}

} // namespace kgt

#endif // KGTRUST_EVAL_HPP
