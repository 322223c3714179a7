#pragma once

// Brute-force ground truth on enumerable sequence spaces: exact model
// distributions, the optimal discriminator, divergences, the GAN value
// identity, and the sample-based KL estimator.

#include <thread>

#include "sgalm/seqmodel.hpp"

namespace sgalm {

enum class DistProvenance { few_shot, zero_shot };

// A model distribution evaluated exactly over the enumerated space. Raw
// masses are renormalized; the mass lost to reserved tokens and truncation
// is recorded as `deficit`.
struct EvaluatedDist {
    TabularDist dist;
    DistProvenance provenance = DistProvenance::zero_shot;
    double deficit = 0.0;
    std::vector<std::vector<Sequence>> panel;  // contexts used (few_shot)

    void require_deficit_below(double bound) const {
        if (deficit >= bound)
            throw Error("mass_deficit", "renormalization deficit " + std::to_string(deficit) +
                                            " exceeds " + std::to_string(bound));
    }
};

// Mean over the context panel of exp(sequence_logprob) per sequence, then
// renormalized. Zero-shot uses the bare [G_ROLE, SEP] prompt.
inline EvaluatedDist exact_model_dist(const ModelParams& p, int V, int L_max,
                                      DistProvenance provenance,
                                      const std::vector<std::vector<Sequence>>& panel = {},
                                      int workers = 1) {
    Vocab vocab(p.hyper.V);
    std::vector<PromptLayout> prompts;
    if (provenance == DistProvenance::few_shot) {
        if (panel.empty()) throw Error("bad_panel", "few-shot evaluation needs a context panel");
        for (const auto& ctx : panel)
            prompts.push_back(build_prompt(vocab, PromptMode::generation, ctx, p.hyper.window));
    } else {
        PromptLayout zero;
        zero.mode = PromptMode::generation;
        zero.rendered = {vocab.g_role(), vocab.sep()};
        prompts.push_back(zero);
    }

    auto space = enumerate_space(V, L_max);
    std::vector<double> raw(space.size(), 0.0);
    auto eval_range = [&](std::size_t lo, std::size_t hi) {
        std::vector<double> lps(prompts.size());
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t c = 0; c < prompts.size(); ++c)
                lps[c] = sequence_logprob(p, prompts[c], space[i]);
            raw[i] = std::exp(log_sum_exp(lps) - std::log(static_cast<double>(prompts.size())));
        }
    };
    workers = std::max(1, workers);
    if (workers == 1 || space.size() < 64) {
        eval_range(0, space.size());
    } else {
        // each index writes its own slot, so the result is independent of
        // the partition
        std::vector<std::thread> pool;
        std::size_t chunk = (space.size() + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            std::size_t lo = std::min(space.size(), static_cast<std::size_t>(w) * chunk);
            std::size_t hi = std::min(space.size(), lo + chunk);
            if (lo < hi) pool.emplace_back(eval_range, lo, hi);
        }
        for (auto& t : pool) t.join();
    }

    double mass = std::accumulate(raw.begin(), raw.end(), 0.0);
    EvaluatedDist out;
    out.provenance = provenance;
    out.panel = panel;
    out.deficit = 1.0 - mass;
    out.dist = TabularDist(V, L_max, std::move(raw));
    return out;
}

// ---------------------------------------------------------------------------
// divergences and the optimal discriminator

inline void require_shared_space(const TabularDist& p, const TabularDist& q) {
    if (p.V != q.V || p.L_max != q.L_max)
        throw Error("bad_dist", "distributions do not share a sequence space");
}

// D*(z) = p_T(z) / (p_T(z) + p_G(z)), with 0/0 -> 0.5 off both supports.
inline std::vector<double> d_star(const TabularDist& p_T, const TabularDist& p_G) {
    require_shared_space(p_T, p_G);
    std::vector<double> out(p_T.probs.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double a = p_T.probs[i], b = p_G.probs[i];
        out[i] = (a + b) > 0.0 ? a / (a + b) : 0.5;
    }
    return out;
}

inline double kl(const TabularDist& p, const TabularDist& q) {
    require_shared_space(p, q);
    double d = 0.0;
    for (std::size_t i = 0; i < p.probs.size(); ++i)
        if (p.probs[i] > 0.0) d += p.probs[i] * (std::log(p.probs[i]) - safe_log(q.probs[i]));
    return d;
}

inline double jsd(const TabularDist& p, const TabularDist& q) {
    require_shared_space(p, q);
    double d = 0.0;
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
        double m = 0.5 * (p.probs[i] + q.probs[i]);
        if (p.probs[i] > 0.0) d += 0.5 * p.probs[i] * std::log(p.probs[i] / m);
        if (q.probs[i] > 0.0) d += 0.5 * q.probs[i] * std::log(q.probs[i] / m);
    }
    return d;
}

inline double tv(const TabularDist& p, const TabularDist& q) {
    require_shared_space(p, q);
    double d = 0.0;
    for (std::size_t i = 0; i < p.probs.size(); ++i) d += std::abs(p.probs[i] - q.probs[i]);
    return 0.5 * d;
}

// The GAN value at the optimal discriminator, computed two independent
// ways: by direct substitution of D* and via -log 4 + 2*JSD.
struct GanValue {
    double by_substitution = 0.0;
    double by_jsd_identity = 0.0;
};

inline GanValue gan_value_at_dstar(const TabularDist& p_T, const TabularDist& p_G) {
    auto D = d_star(p_T, p_G);
    GanValue v;
    for (std::size_t i = 0; i < D.size(); ++i) {
        if (p_T.probs[i] > 0.0) v.by_substitution += p_T.probs[i] * std::log(D[i]);
        if (p_G.probs[i] > 0.0) v.by_substitution += p_G.probs[i] * std::log(1.0 - D[i]);
    }
    v.by_jsd_identity = -std::log(4.0) + 2.0 * jsd(p_T, p_G);
    return v;
}

// Central finite difference of a scalar function of a parameter vector along
// one coordinate; the independent check for all analytic gradients.
template <class F>
double central_diff(std::vector<double>& theta, std::size_t i, F&& scalar, double eps = 1e-5) {
    double saved = theta[i];
    theta[i] = saved + eps;
    double hi = scalar();
    theta[i] = saved - eps;
    double lo = scalar();
    theta[i] = saved;
    return (hi - lo) / (2.0 * eps);
}

// Denominator floored at 1e-2 so that roundoff noise on (near-)zero
// coordinates does not register; genuine per-coordinate errors sit well
// above that scale.
inline double rel_err(double got, double want) {
    double denom = std::max({std::abs(got), std::abs(want), 1e-2});
    return std::abs(got - want) / denom;
}

// Sample-based estimator of KL(p_new || p_old) from samples z ~ p_old with
// ratios r(z) = p_new(z)/p_old(z): mean of r log r - r + 1.
inline double kl_estimator(const std::vector<double>& ratios) {
    if (ratios.empty()) throw Error("bad_count", "kl_estimator needs at least one sample");
    double acc = 0.0;
    for (double r : ratios) {
        double rc = std::max(r, kProbFloor);
        acc += rc * std::log(rc) - rc + 1.0;
    }
    return acc / static_cast<double>(ratios.size());
}

}  // namespace sgalm
