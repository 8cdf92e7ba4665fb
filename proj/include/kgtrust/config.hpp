#ifndef KGTRUST_CONFIG_HPP
#define KGTRUST_CONFIG_HPP

// Pipeline configuration: a flat `key = value` text file ('#' starts a
// comment). Unknown keys are rejected. to_text() emits every key in a fixed
// order so a configuration echoed into a report can be fed back verbatim.

#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "types.hpp"

namespace kgt {

struct PipelineConfig {
    // paths
    std::vector<std::string> triples;  // TSV inputs, merged
    std::string work_dir = "kgtrust-work";
    std::string cache_dir;   // default: <work_dir>/cache
    std::string report_dir;  // default: <work_dir>/reports
    std::uint64_t seed = 2019;
    unsigned jobs = 1;

    std::size_t subgraph_entities = 0;  // 0 = whole graph
    std::size_t split_train = 0, split_valid = 0, split_test = 0;  // positives; all 0 = use fractions
    double split_train_fraction = 0.8;
    double split_valid_fraction = 0.1;

    double rr_theta = 0.15;
    double rr_tol = 1e-10;
    int rr_max_iter = 200;
    std::size_t rr_hidden = 16;
    std::uint32_t rr_max_depth = 10;

    std::size_t transe_dim = 100;
    double transe_margin = 1.0;
    std::string transe_norm = "l2";
    double transe_lr = 0.01;
    int transe_epochs = 500;
    std::size_t transe_batch = 100;
    int transe_eval_every = 10;
    int transe_patience = 5;
    std::string transe_train_on = "all";  // all | train

    int path_max_length = 4;
    std::size_t path_topk = 3;
    std::size_t path_budget = 10000;
    std::string path_pairing = "as_printed";  // as_printed | swapped
    std::size_t path_hidden = 100;
    std::size_t rp_hidden = 32;

    std::vector<std::size_t> fusion_hidden{32, 16};
    double fusion_dropout = 0.2;
    double fusion_lambda = 1.0;

    std::size_t train_batch = 50;
    double train_lr = 0.001;
    int train_patience = 10;
    int train_max_epochs = 300;

    double eval_grid_step = 0.001;
    std::size_t eval_candidates = 500;
    std::string eval_mode = "desk";  // desk | full
    std::size_t eval_max_positives = 0;  // 0 = every test positive

    std::string resolved_cache_dir() const { return cache_dir.empty() ? work_dir + "/cache" : cache_dir; }
    std::string resolved_report_dir() const { return report_dir.empty() ? work_dir + "/reports" : report_dir; }

    void set(const std::string& key, const std::string& value) {
        for (auto& f : fields()) {
            if (f.key == key) {
                try {
                    f.set(value);
                } catch (const InputError&) {
                    throw;
                } catch (const std::exception&) {
                    throw InputError("config: bad value for " + key + ": '" + value + "'");
                }
                return;
            }
        }
        throw InputError("config: unknown key '" + key + "'");
    }

    std::string to_text() const {
        std::ostringstream o;
        for (auto& f : const_cast<PipelineConfig*>(this)->fields()) o << f.key << " = " << f.get() << '\n';
        return o.str();
    }

    std::uint64_t hash() const { return io::Fnv1a().add(to_text()).value(); }

    void validate() const {
        auto fail = [](const std::string& m) { throw InputError("config: " + m); };
        if (!(rr_theta >= 0 && rr_theta < 1)) fail("rr.theta must lie in [0,1)");
        if (!(rr_tol > 0) || rr_max_iter < 1) fail("rr.tol and rr.max_iter must be positive");
        if (transe_dim < 1 || !(transe_margin > 0) || !(transe_lr > 0) || transe_epochs < 1 || transe_batch < 1)
            fail("transe.* values must be positive");
        if (transe_norm != "l1" && transe_norm != "l2") fail("transe.norm must be l1 or l2");
        if (transe_train_on != "all" && transe_train_on != "train") fail("transe.train_on must be all or train");
        if (path_max_length < 1 || path_topk < 1 || path_budget < 1 || path_hidden < 1 || rp_hidden < 1)
            fail("path.* values must be positive");
        if (path_pairing != "as_printed" && path_pairing != "swapped") fail("path.pairing must be as_printed or swapped");
        if (!(fusion_dropout >= 0 && fusion_dropout < 1)) fail("fusion.dropout must lie in [0,1)");
        if (!(fusion_lambda > 0)) fail("fusion.lambda must be positive");
        if (train_batch < 1 || !(train_lr > 0) || train_patience < 1 || train_max_epochs < 1)
            fail("train.* values must be positive");
        if (!(eval_grid_step > 0 && eval_grid_step < 1)) fail("eval.grid_step must lie in (0,1)");
        if (eval_mode != "desk" && eval_mode != "full") fail("eval.mode must be desk or full");
        if (split_train_fraction < 0 || split_valid_fraction < 0 || split_train_fraction + split_valid_fraction >= 1)
            fail("split fractions must be non-negative and leave room for a test split");
    }

    static PipelineConfig parse(std::istream& in, const std::string& source = "<config>") {
        PipelineConfig c;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
            auto trim = [](std::string s) {
                const char* ws = " \t\r";
                s.erase(0, s.find_first_not_of(ws));
                s.erase(s.find_last_not_of(ws) + 1);
                return s;
            };
            line = trim(line);
            if (line.empty()) continue;
            auto eq = line.find('=');
            if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
            try {
                c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
            } catch (const InputError& e) {
                throw ParseError(source, lineno, e.what());
            }
        }
        c.validate();
        return c;
    }

    static PipelineConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open config file: " + path);
        return parse(in, path);
    }

private:
    struct Field {
        std::string key;
        std::function<std::string()> get;
        std::function<void(const std::string&)> set;
    };

    template <class T>
    static Field num(std::string key, T& v) {
        return {std::move(key),
                [&v] {
                    if constexpr (std::is_floating_point_v<T>) {
                        char buf[32];
                        std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(v));
                        return std::string(buf);
                    } else {
                        return std::to_string(v);
                    }
                },
                [&v](const std::string& s) {
                    std::size_t used = 0;
                    if constexpr (std::is_floating_point_v<T>) {
                        v = static_cast<T>(std::stod(s, &used));
                    } else if constexpr (std::is_signed_v<T>) {
                        v = static_cast<T>(std::stoll(s, &used));
                    } else {
                        if (!s.empty() && s[0] == '-') throw InputError("negative value for unsigned key");
                        v = static_cast<T>(std::stoull(s, &used));
                    }
                    if (used != s.size()) throw InputError("trailing characters in '" + s + "'");
                }};
    }

    static Field text(std::string key, std::string& v) {
        return {std::move(key), [&v] { return v; }, [&v](const std::string& s) { v = s; }};
    }

    static std::vector<std::string> split_list(const std::string& s) {
        std::vector<std::string> out;
        std::string item;
        std::istringstream in(s);
        while (std::getline(in, item, ',')) {
            const char* ws = " \t";
            item.erase(0, item.find_first_not_of(ws));
            item.erase(item.find_last_not_of(ws) + 1);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    std::vector<Field> fields() {
        std::vector<Field> f;
        f.push_back({"data.triples",
                     [this] {
                         std::string s;
                         for (std::size_t i = 0; i < triples.size(); ++i) s += (i ? "," : "") + triples[i];
                         return s;
                     },
                     [this](const std::string& s) { triples = split_list(s); }});
        f.push_back(text("work_dir", work_dir));
        f.push_back(text("cache_dir", cache_dir));
        f.push_back(text("report_dir", report_dir));
        f.push_back(num("seed", seed));
        f.push_back(num("jobs", jobs));
        f.push_back(num("subgraph.entities", subgraph_entities));
        f.push_back(num("split.train", split_train));
        f.push_back(num("split.valid", split_valid));
        f.push_back(num("split.test", split_test));
        f.push_back(num("split.train_fraction", split_train_fraction));
        f.push_back(num("split.valid_fraction", split_valid_fraction));
        f.push_back(num("rr.theta", rr_theta));
        f.push_back(num("rr.tol", rr_tol));
        f.push_back(num("rr.max_iter", rr_max_iter));
        f.push_back(num("rr.hidden", rr_hidden));
        f.push_back(num("rr.max_depth", rr_max_depth));
        f.push_back(num("transe.dim", transe_dim));
        f.push_back(num("transe.margin", transe_margin));
        f.push_back(text("transe.norm", transe_norm));
        f.push_back(num("transe.lr", transe_lr));
        f.push_back(num("transe.epochs", transe_epochs));
        f.push_back(num("transe.batch", transe_batch));
        f.push_back(num("transe.eval_every", transe_eval_every));
        f.push_back(num("transe.patience", transe_patience));
        f.push_back(text("transe.train_on", transe_train_on));
        f.push_back(num("path.max_length", path_max_length));
        f.push_back(num("path.topk", path_topk));
        f.push_back(num("path.budget", path_budget));
        f.push_back(text("path.pairing", path_pairing));
        f.push_back(num("path.hidden", path_hidden));
        f.push_back(num("rp.hidden", rp_hidden));
        f.push_back({"fusion.hidden",
                     [this] {
                         std::string s;
                         for (std::size_t i = 0; i < fusion_hidden.size(); ++i)
                             s += (i ? "," : "") + std::to_string(fusion_hidden[i]);
                         return s;
                     },
                     [this](const std::string& s) {
                         fusion_hidden.clear();
                         for (const auto& item : split_list(s)) {
                             std::size_t used = 0;
                             auto v = std::stoull(item, &used);
                             if (used != item.size() || v == 0) throw InputError("bad layer width '" + item + "'");
                             fusion_hidden.push_back(v);
                         }
                     }});
        f.push_back(num("fusion.dropout", fusion_dropout));
        f.push_back(num("fusion.lambda", fusion_lambda));
        f.push_back(num("train.batch", train_batch));
        f.push_back(num("train.lr", train_lr));
        f.push_back(num("train.patience", train_patience));
        f.push_back(num("train.max_epochs", train_max_epochs));
        f.push_back(num("eval.grid_step", eval_grid_step));
        f.push_back(num("eval.candidates", eval_candidates));
        f.push_back(text("eval.mode", eval_mode));
        f.push_back(num("eval.max_positives", eval_max_positives));
        return f;
    }
};

} // namespace kgt

#endif // KGTRUST_CONFIG_HPP
