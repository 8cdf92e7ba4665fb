#ifndef KGTRUST_NN_HPP
#define KGTRUST_NN_HPP

// Small dense building blocks with hand-written backward passes: affine
// layers, a ReLU perceptron, an LSTM cell and the Adam optimizer. Gradients
// are accumulated into Param::grad; callers zero them between batches.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace kgt::nn {

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

/// sigmoid kept inside the open unit interval; far from zero the double
/// result would otherwise round to exactly 0 or 1.
inline double probability(double logit) {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
    return std::clamp(sigmoid(logit), lo, hi);
}

/// Binary cross-entropy of a logit against a {0,1} label, computed without
/// forming the probability. d/dlogit = sigmoid(logit) - label.
inline double bce_with_logit(double logit, int label) {
    double z = label ? -logit : logit;
    return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

struct Param {
    std::string name;
    std::size_t rows = 0, cols = 0;
    std::vector<double> value, grad;

    Param() = default;
    Param(std::string n, std::size_t r, std::size_t c)
        : name(std::move(n)), rows(r), cols(c), value(r * c, 0.0), grad(r * c, 0.0) {}

    std::size_t size() const noexcept { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
    double& operator()(std::size_t r, std::size_t c) { return value[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return value[r * cols + c]; }

    void init_uniform(std::mt19937_64& rng, double limit) {
        std::uniform_real_distribution<double> u(-limit, limit);
        for (auto& v : value) v = u(rng);
    }
};

using ParamList = std::vector<Param*>;

inline void zero_grads(const ParamList& ps) {
    for (auto* p : ps) p->zero_grad();
}

/// y = W x + b, W is out x in.
class Dense {
public:
    Dense() = default;
    Dense(const std::string& name, std::size_t in, std::size_t out)
        : weight(name + ".W", out, in), bias(name + ".b", out, 1) {}

    std::size_t in_size() const noexcept { return weight.cols; }
    std::size_t out_size() const noexcept { return weight.rows; }

    void init(std::mt19937_64& rng) {
        weight.init_uniform(rng, std::sqrt(6.0 / static_cast<double>(in_size() + out_size())));
        std::fill(bias.value.begin(), bias.value.end(), 0.0);
    }

    void forward(std::span<const double> x, std::span<double> y) const {
        assert(x.size() == in_size() && y.size() == out_size());
        for (std::size_t o = 0; o < out_size(); ++o) {
            const double* w = weight.value.data() + o * in_size();
            double s = bias.value[o];
            for (std::size_t i = 0; i < in_size(); ++i) s += w[i] * x[i];
            y[o] = s;
        }
    }

    /// Accumulates dW, db; writes dx when non-empty.
    void backward(std::span<const double> x, std::span<const double> dy, std::span<double> dx) {
        if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);
        for (std::size_t o = 0; o < out_size(); ++o) {
            const double g = dy[o];
            if (g == 0.0) continue;
            bias.grad[o] += g;
            double* gw = weight.grad.data() + o * in_size();
            const double* w = weight.value.data() + o * in_size();
            for (std::size_t i = 0; i < in_size(); ++i) gw[i] += g * x[i];
            if (!dx.empty())
                for (std::size_t i = 0; i < in_size(); ++i) dx[i] += g * w[i];
        }
    }

    ParamList params() { return {&weight, &bias}; }

    Param weight, bias;
};

/// ReLU perceptron ending in a single linear unit (a logit). With no hidden
/// layers it reduces to logistic regression. Inverted dropout is applied to
/// hidden activations when a generator is supplied.
class Mlp {
public:
    struct Tape {
        std::vector<std::vector<double>> inputs;  // input to each layer
        std::vector<std::vector<double>> pre;     // pre-activation of hidden layers
        std::vector<std::vector<double>> masks;   // dropout scale per hidden unit (empty = off)
    };

    Mlp() = default;
    Mlp(const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden, double dropout = 0.0)
        : dropout_(dropout) {
        std::size_t prev = in;
        for (std::size_t i = 0; i < hidden.size(); ++i) {
            layers_.emplace_back(name + ".h" + std::to_string(i), prev, hidden[i]);
            prev = hidden[i];
        }
        layers_.emplace_back(name + ".out", prev, 1);
    }

    std::size_t in_size() const { return layers_.front().in_size(); }
    double dropout() const noexcept { return dropout_; }

    void init(std::mt19937_64& rng) {
        for (auto& l : layers_) l.init(rng);
    }

    double forward(std::span<const double> x, Tape& tape, std::mt19937_64* dropout_rng = nullptr) const {
        const std::size_t n = layers_.size();
        tape.inputs.resize(n);
        tape.pre.resize(n - 1);
        tape.masks.assign(n - 1, {});
        tape.inputs[0].assign(x.begin(), x.end());
        for (std::size_t l = 0; l + 1 < n; ++l) {
            auto& pre = tape.pre[l];
            pre.resize(layers_[l].out_size());
            layers_[l].forward(tape.inputs[l], pre);
            auto& next = tape.inputs[l + 1];
            next.resize(pre.size());
            for (std::size_t i = 0; i < pre.size(); ++i) next[i] = pre[i] > 0 ? pre[i] : 0.0;
            if (dropout_rng && dropout_ > 0.0) {
                std::bernoulli_distribution keep(1.0 - dropout_);
                auto& m = tape.masks[l];
                m.resize(next.size());
                for (std::size_t i = 0; i < next.size(); ++i) {
                    m[i] = keep(*dropout_rng) ? 1.0 / (1.0 - dropout_) : 0.0;
                    next[i] *= m[i];
                }
            }
        }
        double logit = 0.0;
        layers_.back().forward(tape.inputs[n - 1], std::span<double>(&logit, 1));
        return logit;
    }

    double forward(std::span<const double> x) const {
        Tape t;
        return forward(x, t, nullptr);
    }

    void backward(Tape& tape, double dlogit, std::span<double> dx) {
        const std::size_t n = layers_.size();
        std::vector<double> dy{dlogit}, dprev;
        for (std::size_t l = n; l-- > 0;) {
            const bool first = (l == 0);
            dprev.assign(layers_[l].in_size(), 0.0);
            layers_[l].backward(tape.inputs[l], dy, first ? dx : std::span<double>(dprev));
            if (first) break;
            // through dropout and ReLU of hidden layer l-1
            const auto& pre = tape.pre[l - 1];
            const auto& mask = tape.masks[l - 1];
            for (std::size_t i = 0; i < dprev.size(); ++i) {
                double g = pre[i] > 0 ? dprev[i] : 0.0;
                if (!mask.empty()) g *= mask[i];
                dprev[i] = g;
            }
            dy.swap(dprev);
        }
    }

    ParamList params() {
        ParamList out;
        for (auto& l : layers_)
            for (auto* p : l.params()) out.push_back(p);
        return out;
    }

    std::vector<Dense>& layers() noexcept { return layers_; }
    const std::vector<Dense>& layers() const noexcept { return layers_; }

private:
    std::vector<Dense> layers_;
    double dropout_ = 0.0;
};

/// Long short-term memory cell unrolled over a sequence. Gate rows are packed
/// in the order input, forget, candidate, output.
class Lstm {
public:
    struct Step {
        std::vector<double> i, f, g, o, c, tanh_c, h;
    };
    struct Tape {
        std::vector<std::span<const double>> xs;
        std::vector<Step> steps;
    };

    Lstm() = default;
    Lstm(const std::string& name, std::size_t input, std::size_t hidden)
        : wx(name + ".Wx", 4 * hidden, input), wh(name + ".Wh", 4 * hidden, hidden), b(name + ".b", 4 * hidden, 1),
          input_(input), hidden_(hidden) {}

    std::size_t input_size() const noexcept { return input_; }
    std::size_t hidden_size() const noexcept { return hidden_; }

    void init(std::mt19937_64& rng) {
        const double lim = 1.0 / std::sqrt(static_cast<double>(hidden_));
        wx.init_uniform(rng, lim);
        wh.init_uniform(rng, lim);
        std::fill(b.value.begin(), b.value.end(), 0.0);
        for (std::size_t k = 0; k < hidden_; ++k) b.value[hidden_ + k] = 1.0;  // forget gate bias
    }

    /// Runs the sequence from a zero state; returns the last hidden state.
    std::vector<double> forward(std::span<const std::span<const double>> xs, Tape& tape) const {
        const std::size_t H = hidden_;
        tape.xs.assign(xs.begin(), xs.end());
        tape.steps.assign(xs.size(), {});
        std::vector<double> h(H, 0.0), c(H, 0.0), z(4 * H);
        for (std::size_t s = 0; s < xs.size(); ++s) {
            const auto x = xs[s];
            assert(x.size() == input_);
            for (std::size_t r = 0; r < 4 * H; ++r) {
                double acc = b.value[r];
                const double* wxr = wx.value.data() + r * input_;
                for (std::size_t k = 0; k < input_; ++k) acc += wxr[k] * x[k];
                const double* whr = wh.value.data() + r * H;
                for (std::size_t k = 0; k < H; ++k) acc += whr[k] * h[k];
                z[r] = acc;
            }
            Step& st = tape.steps[s];
            st.i.resize(H); st.f.resize(H); st.g.resize(H); st.o.resize(H);
            st.c.resize(H); st.tanh_c.resize(H); st.h.resize(H);
            for (std::size_t k = 0; k < H; ++k) {
                st.i[k] = sigmoid(z[k]);
                st.f[k] = sigmoid(z[H + k]);
                st.g[k] = std::tanh(z[2 * H + k]);
                st.o[k] = sigmoid(z[3 * H + k]);
                st.c[k] = st.f[k] * c[k] + st.i[k] * st.g[k];
                st.tanh_c[k] = std::tanh(st.c[k]);
                st.h[k] = st.o[k] * st.tanh_c[k];
            }
            h = st.h;
            c = st.c;
        }
        return h;
    }

    /// Backpropagation through time from a gradient on the final hidden state.
    void backward(const Tape& tape, std::span<const double> dh_last) {
        const std::size_t H = hidden_;
        const std::size_t T = tape.steps.size();
        std::vector<double> dh(dh_last.begin(), dh_last.end()), dc(H, 0.0), dz(4 * H), dh_prev(H);
        const std::vector<double> zeros(H, 0.0);
        for (std::size_t s = T; s-- > 0;) {
            const Step& st = tape.steps[s];
            const std::vector<double>& c_prev = s > 0 ? tape.steps[s - 1].c : zeros;
            const std::vector<double>& h_prev = s > 0 ? tape.steps[s - 1].h : zeros;
            for (std::size_t k = 0; k < H; ++k) {
                const double dct = dc[k] + dh[k] * st.o[k] * (1.0 - st.tanh_c[k] * st.tanh_c[k]);
                dz[k] = dct * st.g[k] * st.i[k] * (1.0 - st.i[k]);
                dz[H + k] = dct * c_prev[k] * st.f[k] * (1.0 - st.f[k]);
                dz[2 * H + k] = dct * st.i[k] * (1.0 - st.g[k] * st.g[k]);
                dz[3 * H + k] = dh[k] * st.tanh_c[k] * st.o[k] * (1.0 - st.o[k]);
                dc[k] = dct * st.f[k];
            }
            std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
            const auto x = tape.xs[s];
            for (std::size_t r = 0; r < 4 * H; ++r) {
                const double g = dz[r];
                if (g == 0.0) continue;
                b.grad[r] += g;
                double* gx = wx.grad.data() + r * input_;
                for (std::size_t k = 0; k < input_; ++k) gx[k] += g * x[k];
                double* gh = wh.grad.data() + r * H;
                const double* whr = wh.value.data() + r * H;
                for (std::size_t k = 0; k < H; ++k) {
                    gh[k] += g * h_prev[k];
                    dh_prev[k] += g * whr[k];
                }
            }
            dh.swap(dh_prev);
        }
    }

    ParamList params() { return {&wx, &wh, &b}; }

    Param wx, wh, b;

private:
    std::size_t input_ = 0, hidden_ = 0;
};

/// Adaptive-moment optimizer; moment buffers are keyed by position in the
/// parameter list passed to step().
class Adam {
public:
    explicit Adam(double lr = 0.001, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const ParamList& params) {
        if (m_.size() != params.size()) {
            m_.assign(params.size(), {});
            v_.assign(params.size(), {});
            for (std::size_t i = 0; i < params.size(); ++i) {
                m_[i].assign(params[i]->size(), 0.0);
                v_[i].assign(params[i]->size(), 0.0);
            }
        }
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Param& p = *params[i];
            auto& m = m_[i];
            auto& v = v_[i];
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double g = p.grad[k];
                m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
                v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
                p.value[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
            }
        }
    }

    long steps() const noexcept { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

} // namespace kgt::nn

#endif // KGTRUST_NN_HPP
