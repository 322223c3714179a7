#pragma once

// Adversarial objectives: the Real/Fake discrimination score, discriminator
// cross-entropy loss and gradient, generator reward and its REINFORCE
// gradient, and per-batch reward standardization.

#include "sgalm/seqmodel.hpp"

namespace sgalm {

struct DiscScore {
    double p_real = 0.5;
    double raw_real = 0.0;
    double raw_fake = 0.0;
    double p_fake() const { return 1.0 - p_real; }
};

struct FakeItem {
    std::vector<Sequence> context;   // few-shot examples used for generation
    Sequence z;                      // generated sample
    double gen_logprob = 0.0;        // under the generator snapshot
    DiscScore score;                 // under the scoring parameters
};

struct FakeBatch {
    std::vector<FakeItem> items;
};

// Reads the next-token distribution after [D_ROLE, SEP, z, SEP] and
// normalizes over {REAL, FAKE}. The discriminator output D(z) is p_real
// itself.
inline DiscScore disc_score(const ModelParams& p, const Sequence& z) {
    Vocab vocab(p.hyper.V);
    PromptLayout prompt = build_prompt(vocab, PromptMode::discrimination, {z}, p.hyper.window);
    auto probs = next_token_dist(p, prompt.rendered);
    DiscScore s;
    s.raw_real = probs[vocab.real_tok()];
    s.raw_fake = probs[vocab.fake_tok()];
    double a = std::max(s.raw_real, kProbFloor);
    double b = std::max(s.raw_fake, kProbFloor);
    s.p_real = a / (a + b);
    return s;
}

// -mean log D(real) - mean log(1 - D(fake)), both batch means.
inline double disc_loss(const ModelParams& p, const std::vector<Sequence>& real,
                        const std::vector<Sequence>& fake) {
    if (real.empty() || fake.empty()) throw Error("batch_too_small", "disc_loss needs non-empty batches");
    double loss = 0.0;
    for (const auto& z : real) loss -= safe_log(disc_score(p, z).p_real);
    loss /= static_cast<double>(real.size());
    double lf = 0.0;
    for (const auto& z : fake) lf -= safe_log(disc_score(p, z).p_fake());
    return loss + lf / static_cast<double>(fake.size());
}

namespace detail {

// d log D / d logits = (1-D)(e_REAL - e_FAKE); d log(1-D) / d logits is the
// mirror image. Only the two answer-token logits receive signal because the
// score normalizes over {REAL, FAKE}.
inline void accumulate_disc_term(const ModelParams& p, const Sequence& z, bool is_real,
                                 double weight, Gradient& grad) {
    Vocab vocab(p.hyper.V);
    PromptLayout prompt = build_prompt(vocab, PromptMode::discrimination, {z}, p.hyper.window);
    ForwardTrace tr = forward(p, prompt.rendered);
    double a = std::max(tr.probs[vocab.real_tok()], kProbFloor);
    double b = std::max(tr.probs[vocab.fake_tok()], kProbFloor);
    double D = a / (a + b);
    std::vector<double> dlogits(tr.probs.size(), 0.0);
    double c = is_real ? weight * (1.0 - D) : weight * D * -1.0;
    dlogits[vocab.real_tok()] = c;
    dlogits[vocab.fake_tok()] = -c;
    backward(p, tr, dlogits, grad);
}

}  // namespace detail

// Gradient of disc_loss; fake samples enter as fixed inputs.
inline Gradient disc_gradient(const ModelParams& p, const std::vector<Sequence>& real,
                              const std::vector<Sequence>& fake) {
    if (real.empty() || fake.empty()) throw Error("batch_too_small", "disc_gradient needs non-empty batches");
    Gradient grad(p.theta.size(), 0.0);
    double wr = -1.0 / static_cast<double>(real.size());   // loss has -mean log D
    double wf = -1.0 / static_cast<double>(fake.size());   // and -mean log(1-D)
    for (const auto& z : real) detail::accumulate_disc_term(p, z, true, wr, grad);
    for (const auto& z : fake) detail::accumulate_disc_term(p, z, false, wf, grad);
    return grad;
}

// r = log(1 - D(z')); the generation update descends E[r].
inline double gen_reward(const DiscScore& score) { return safe_log(score.p_fake()); }

// Non-saturating alternative -log D, off by default (config flag).
inline double gen_reward_nonsaturating(const DiscScore& score) { return -safe_log(score.p_real); }

// (r_i - mean) / population std; all zeros on a (near-)constant batch.
inline std::vector<double> standardize_rewards(const std::vector<double>& rewards) {
    if (rewards.size() < 2) throw Error("batch_too_small", "standardization needs >= 2 rewards");
    MeanStd ms = mean_std(rewards);
    std::vector<double> out(rewards.size(), 0.0);
    if (ms.std < 1e-8) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - ms.mean) / ms.std;
    return out;
}

// REINFORCE estimator: (1/N) sum_i a_i * grad log p_theta(z'_i | prompt_i),
// where a_i is the (optionally standardized) reward held fixed. The result
// is descended.
inline Gradient gen_gradient(const ModelParams& p, const FakeBatch& batch, bool standardized,
                             bool nonsaturating = false) {
    if (batch.items.empty()) throw Error("batch_too_small", "gen_gradient needs a non-empty batch");
    if (standardized && batch.items.size() < 2)
        throw Error("batch_too_small", "standardized rewards need >= 2 items");
    Vocab vocab(p.hyper.V);
    std::vector<double> rewards;
    rewards.reserve(batch.items.size());
    for (const auto& it : batch.items)
        rewards.push_back(nonsaturating ? gen_reward_nonsaturating(it.score) : gen_reward(it.score));
    if (standardized) rewards = standardize_rewards(rewards);
    Gradient grad(p.theta.size(), 0.0);
    double invN = 1.0 / static_cast<double>(batch.items.size());
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
        if (rewards[i] == 0.0) continue;
        PromptLayout prompt = build_prompt(vocab, PromptMode::generation, batch.items[i].context, p.hyper.window);
        Gradient g = logprob_gradient(p, prompt, batch.items[i].z);
        double a = rewards[i] * invN;
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += a * g[k];
    }
    return grad;
}

}  // namespace sgalm
