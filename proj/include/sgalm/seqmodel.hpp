#pragma once

// The unified autoregressive model p_theta: a fixed-window embedding-concat
// MLP with one tanh hidden layer and exact hand-written backpropagation.
// The same parameters serve generation (few-shot prompt) and discrimination
// (Real/Fake readout) through the prompt layouts in core.hpp.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sgalm/core.hpp"

namespace sgalm {

struct ModelHyper {
    int V = 2;
    int window = 8;
    int embed_dim = 8;
    int hidden_dim = 32;

    int vocab_total() const { return V + 7; }
    int input_dim() const { return window * embed_dim; }
    std::size_t param_count() const {
        std::size_t T = vocab_total();
        return T * embed_dim + static_cast<std::size_t>(input_dim()) * hidden_dim + hidden_dim +
               static_cast<std::size_t>(hidden_dim) * T + T;
    }
    // The window must cover the longest generation prompt plus the generated
    // sequence and its EOS: 2 + n_shot*(L_max+1) + L_max + 1.
    static int required_window(int n_shot, int L_max) {
        return 2 + n_shot * (L_max + 1) + L_max + 1;
    }
};

struct ModelParams {
    ModelHyper hyper;
    std::vector<double> theta;

    ModelParams() = default;
    explicit ModelParams(ModelHyper h) : hyper(h), theta(h.param_count(), 0.0) {}

    // flat layout: embed | W1 | b1 | W2 | b2
    std::size_t off_embed() const { return 0; }
    std::size_t off_w1() const { return off_embed() + static_cast<std::size_t>(hyper.vocab_total()) * hyper.embed_dim; }
    std::size_t off_b1() const { return off_w1() + static_cast<std::size_t>(hyper.input_dim()) * hyper.hidden_dim; }
    std::size_t off_w2() const { return off_b1() + hyper.hidden_dim; }
    std::size_t off_b2() const { return off_w2() + static_cast<std::size_t>(hyper.hidden_dim) * hyper.vocab_total(); }

    void init_random(Rng& rng, double scale = 0.08) {
        std::uniform_real_distribution<double> unif(-scale, scale);
        for (std::size_t i = 0; i < off_b1(); ++i) theta[i] = unif(rng);
        for (std::size_t i = off_b1(); i < off_w2(); ++i) theta[i] = 0.0;
        for (std::size_t i = off_w2(); i < off_b2(); ++i) theta[i] = unif(rng);
        for (std::size_t i = off_b2(); i < theta.size(); ++i) theta[i] = 0.0;
    }
};

// Frozen copy of theta (theta-dagger). Value semantics make the copy; the
// wrapper only guards against accidental mutation.
class ParamSnapshot {
public:
    ParamSnapshot() = default;
    explicit ParamSnapshot(const ModelParams& p) : value_(p) {}
    const ModelParams& get() const { return value_; }

private:
    ModelParams value_;
};

// Activations of one window-forward pass, kept for the backward pass.
struct ForwardTrace {
    std::vector<int> window_tokens;  // BOS-padded, length = hyper.window
    std::vector<double> input;       // concatenated embeddings
    std::vector<double> hidden;      // tanh activations
    std::vector<double> probs;       // softmax over vocab_total
};

using Gradient = std::vector<double>;  // same flat layout as ModelParams::theta

namespace detail {

inline std::vector<int> window_of(const ModelParams& p, const std::vector<int>& context) {
    const int W = p.hyper.window;
    Vocab vocab(p.hyper.V);
    std::vector<int> w(W, vocab.bos());
    int n = static_cast<int>(context.size());
    int take = std::min(n, W);
    for (int i = 0; i < take; ++i) w[W - take + i] = context[n - take + i];
    return w;
}

inline ForwardTrace forward(const ModelParams& p, const std::vector<int>& context) {
    const auto& h = p.hyper;
    const int T = h.vocab_total();
    ForwardTrace tr;
    tr.window_tokens = window_of(p, context);
    tr.input.resize(h.input_dim());
    for (int s = 0; s < h.window; ++s) {
        const double* e = &p.theta[p.off_embed() + static_cast<std::size_t>(tr.window_tokens[s]) * h.embed_dim];
        std::copy(e, e + h.embed_dim, tr.input.begin() + static_cast<std::size_t>(s) * h.embed_dim);
    }
    tr.hidden.resize(h.hidden_dim);
    const double* w1 = &p.theta[p.off_w1()];
    const double* b1 = &p.theta[p.off_b1()];
    for (int j = 0; j < h.hidden_dim; ++j) tr.hidden[j] = b1[j];
    for (int i = 0; i < h.input_dim(); ++i) {
        double x = tr.input[i];
        if (x == 0.0) continue;
        const double* row = w1 + static_cast<std::size_t>(i) * h.hidden_dim;
        for (int j = 0; j < h.hidden_dim; ++j) tr.hidden[j] += x * row[j];
    }
    for (int j = 0; j < h.hidden_dim; ++j) tr.hidden[j] = std::tanh(tr.hidden[j]);
    std::vector<double> logits(T);
    const double* w2 = &p.theta[p.off_w2()];
    const double* b2 = &p.theta[p.off_b2()];
    for (int k = 0; k < T; ++k) logits[k] = b2[k];
    for (int j = 0; j < h.hidden_dim; ++j) {
        double hv = tr.hidden[j];
        const double* row = w2 + static_cast<std::size_t>(j) * T;
        for (int k = 0; k < T; ++k) logits[k] += hv * row[k];
    }
    double m = *std::max_element(logits.begin(), logits.end());
    double Z = 0.0;
    tr.probs.resize(T);
    for (int k = 0; k < T; ++k) Z += (tr.probs[k] = std::exp(logits[k] - m));
    for (int k = 0; k < T; ++k) tr.probs[k] /= Z;
    return tr;
}

// Accumulates d(scalar)/d(theta) into grad given d(scalar)/d(logits).
inline void backward(const ModelParams& p, const ForwardTrace& tr,
                     const std::vector<double>& dlogits, Gradient& grad) {
    const auto& h = p.hyper;
    const int T = h.vocab_total();
    double* gw2 = &grad[p.off_w2()];
    double* gb2 = &grad[p.off_b2()];
    std::vector<double> dh(h.hidden_dim, 0.0);
    const double* w2 = &p.theta[p.off_w2()];
    for (int k = 0; k < T; ++k) gb2[k] += dlogits[k];
    for (int j = 0; j < h.hidden_dim; ++j) {
        double hv = tr.hidden[j];
        double* grow = gw2 + static_cast<std::size_t>(j) * T;
        const double* row = w2 + static_cast<std::size_t>(j) * T;
        double acc = 0.0;
        for (int k = 0; k < T; ++k) {
            grow[k] += hv * dlogits[k];
            acc += row[k] * dlogits[k];
        }
        dh[j] = acc * (1.0 - hv * hv);  // through tanh
    }
    double* gw1 = &grad[p.off_w1()];
    double* gb1 = &grad[p.off_b1()];
    const double* w1 = &p.theta[p.off_w1()];
    for (int j = 0; j < h.hidden_dim; ++j) gb1[j] += dh[j];
    std::vector<double> dx(h.input_dim(), 0.0);
    for (int i = 0; i < h.input_dim(); ++i) {
        double x = tr.input[i];
        double* grow = gw1 + static_cast<std::size_t>(i) * h.hidden_dim;
        const double* row = w1 + static_cast<std::size_t>(i) * h.hidden_dim;
        double acc = 0.0;
        for (int j = 0; j < h.hidden_dim; ++j) {
            grow[j] += x * dh[j];
            acc += row[j] * dh[j];
        }
        dx[i] = acc;
    }
    for (int s = 0; s < h.window; ++s) {
        double* ge = &grad[p.off_embed() + static_cast<std::size_t>(tr.window_tokens[s]) * h.embed_dim];
        for (int d = 0; d < h.embed_dim; ++d) ge[d] += dx[static_cast<std::size_t>(s) * h.embed_dim + d];
    }
}

inline void check_fits(const ModelParams& p, const PromptLayout& prompt, std::size_t extra) {
    if (prompt.rendered.size() + extra > static_cast<std::size_t>(p.hyper.window))
        throw Error("prompt_too_long", "prompt plus sequence exceeds model window");
}

}  // namespace detail

inline std::vector<double> next_token_dist(const ModelParams& p, const std::vector<int>& context) {
    return detail::forward(p, context).probs;
}

// sum_t log p(z_t | prompt + z_{<t}) + log p(EOS | prompt + z), unmasked.
inline double sequence_logprob(const ModelParams& p, const PromptLayout& prompt, const Sequence& z) {
    if (prompt.mode != PromptMode::generation)
        throw Error("bad_prompt", "sequence_logprob needs a generation prompt");
    detail::check_fits(p, prompt, z.size() + 1);
    Vocab vocab(p.hyper.V);
    std::vector<int> ctx = prompt.rendered;
    double lp = 0.0;
    for (int t : z) {
        lp += safe_log(next_token_dist(p, ctx)[t]);
        ctx.push_back(t);
    }
    lp += safe_log(next_token_dist(p, ctx)[vocab.eos()]);
    return lp;
}

// Gradient of sequence_logprob with respect to theta.
inline Gradient logprob_gradient(const ModelParams& p, const PromptLayout& prompt, const Sequence& z) {
    if (prompt.mode != PromptMode::generation)
        throw Error("bad_prompt", "logprob_gradient needs a generation prompt");
    detail::check_fits(p, prompt, z.size() + 1);
    Vocab vocab(p.hyper.V);
    Gradient grad(p.theta.size(), 0.0);
    std::vector<int> ctx = prompt.rendered;
    std::vector<int> targets(z.begin(), z.end());
    targets.push_back(vocab.eos());
    for (int target : targets) {
        ForwardTrace tr = detail::forward(p, ctx);
        std::vector<double> dlogits = tr.probs;
        for (double& d : dlogits) d = -d;
        dlogits[target] += 1.0;  // d log p(target) / d logits
        detail::backward(p, tr, dlogits, grad);
        ctx.push_back(target);
    }
    return grad;
}

// Autoregressive sampling with reserved tokens masked out: positions draw
// from data tokens plus EOS, except the first position which is data-only so
// the sample is never empty. Stops at EOS or L_max.
inline Sequence sample_sequence(const ModelParams& p, const PromptLayout& prompt, Rng& rng, int L_max) {
    if (prompt.mode != PromptMode::generation)
        throw Error("bad_prompt", "sample_sequence needs a generation prompt");
    detail::check_fits(p, prompt, static_cast<std::size_t>(L_max) + 1);
    Vocab vocab(p.hyper.V);
    std::vector<int> ctx = prompt.rendered;
    Sequence z;
    for (int t = 0; t < L_max; ++t) {
        auto probs = next_token_dist(p, ctx);
        std::vector<double> masked(vocab.V + 1, 0.0);
        for (int k = 0; k < vocab.V; ++k) masked[k] = std::max(probs[k], kProbFloor);
        if (t > 0) masked[vocab.V] = std::max(probs[vocab.eos()], kProbFloor);
        int pick = draw_categorical(masked, rng);
        if (pick == vocab.V) break;  // EOS
        z.push_back(pick);
        ctx.push_back(pick);
    }
    return z;
}

inline ParamSnapshot snapshot(const ModelParams& p) { return ParamSnapshot(p); }

// ---------------------------------------------------------------------------
// persistence: one-line JSON header, then the flat parameter vector as
// little-endian 8-byte reals

inline void save_params(const ModelParams& p, const std::string& path) {
    nlohmann::json header = {
        {"format", "sgalm-params"},
        {"version", 1},
        {"V", p.hyper.V},
        {"window", p.hyper.window},
        {"embed_dim", p.hyper.embed_dim},
        {"hidden_dim", p.hyper.hidden_dim},
        {"param_count", p.theta.size()},
    };
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io_error", "cannot write " + path);
    out << header.dump() << '\n';
    static_assert(std::endian::native == std::endian::little, "params file is little-endian");
    out.write(reinterpret_cast<const char*>(p.theta.data()),
              static_cast<std::streamsize>(p.theta.size() * sizeof(double)));
}

inline ModelParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io_error", "cannot open " + path);
    std::string line;
    std::getline(in, line);
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("format", std::string()) != "sgalm-params" || header.value("version", 0) != 1)
        throw Error("io_error", "unrecognized parameter file header");
    ModelHyper h;
    h.V = header.at("V").get<int>();
    h.window = header.at("window").get<int>();
    h.embed_dim = header.at("embed_dim").get<int>();
    h.hidden_dim = header.at("hidden_dim").get<int>();
    ModelParams p(h);
    if (p.theta.size() != header.at("param_count").get<std::size_t>())
        throw Error("io_error", "parameter count mismatch");
    in.read(reinterpret_cast<char*>(p.theta.data()),
            static_cast<std::streamsize>(p.theta.size() * sizeof(double)));
    if (!in) throw Error("io_error", "truncated parameter file");
    return p;
}

}  // namespace sgalm
