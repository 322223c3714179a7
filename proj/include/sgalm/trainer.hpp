#pragma once

// The alternating adversarial loop with ablation modes, the optimizer, the
// optional maximum-likelihood warm-up, and run-directory persistence.

#include <filesystem>
#include <optional>
#include <set>

#include "sgalm/adversary.hpp"
#include "sgalm/bayes_icl.hpp"
#include "sgalm/oracles.hpp"

namespace sgalm {

enum class TrainMode { full, d_only, g_only, separate, oracle_d };
enum class OptimizerKind { plain, adaptive };

inline TrainMode train_mode_from_string(const std::string& s) {
    if (s == "full") return TrainMode::full;
    if (s == "d_only") return TrainMode::d_only;
    if (s == "g_only") return TrainMode::g_only;
    if (s == "separate") return TrainMode::separate;
    if (s == "oracle_d") return TrainMode::oracle_d;
    throw Error("bad_config", "unknown mode: " + s);
}

inline std::string to_string(TrainMode m) {
    switch (m) {
        case TrainMode::full: return "full";
        case TrainMode::d_only: return "d_only";
        case TrainMode::g_only: return "g_only";
        case TrainMode::separate: return "separate";
        case TrainMode::oracle_d: return "oracle_d";
    }
    return "full";
}

struct TrainConfig {
    TrainMode mode = TrainMode::full;
    int iterations = 40;
    int fake_batch_size = 0;  // 0 -> |D|
    int n_shot = 4;
    double lr_start = 0.02;
    double lr_end = 0.01;  // default decaying; the increasing orientation is
                           // selected by passing lr_start < lr_end
    OptimizerKind optimizer = OptimizerKind::adaptive;
    bool standardized = true;
    int warmup_epochs = 0;
    double warmup_lr = 0.02;
    int warmup_minibatch = 0;  // 0 -> minibatch
    int d_steps = 1;
    int g_steps = 1;
    int minibatch = 64;
    int panel_size = 64;
    int checkpoint_every = 10;
    bool regenerate_fakes = false;
    bool nonsaturating = false;
    int workers = 1;
    std::uint64_t seed = 1;

    void validate() const {
        if (iterations < 1) throw Error("bad_config", "iterations must be >= 1");
        if (!(lr_start > 0.0) || !(lr_end > 0.0)) throw Error("bad_config", "learning rates must be > 0");
        if (standardized && fake_batch_size != 0 && fake_batch_size < 2)
            throw Error("bad_config", "standardized rewards need fake_batch_size >= 2");
        if (n_shot < 1) throw Error("bad_config", "n_shot must be >= 1");
    }
};

struct IterationMetrics {
    int iter = 0;
    double disc_loss = 0.0;
    double mean_p_real_real = 0.0;
    double mean_p_real_fake = 0.0;
    double tv_to_target = 0.0;
    double jsd_to_target = 0.0;
    double kl_successive = 0.0;  // KL(p^G_i || p^G_{i-1})
    double zero_shot_tv = 0.0;
    double distinct_fake_ratio = 0.0;
    double deficit = 0.0;
    int d_updates = 0;
    int g_updates = 0;

    nlohmann::json to_json() const {
        return {{"iter", iter},
                {"disc_loss", disc_loss},
                {"mean_p_real_real", mean_p_real_real},
                {"mean_p_real_fake", mean_p_real_fake},
                {"tv_to_target", tv_to_target},
                {"jsd_to_target", jsd_to_target},
                {"kl_successive", kl_successive},
                {"zero_shot_tv", zero_shot_tv},
                {"distinct_fake_ratio", distinct_fake_ratio},
                {"deficit", deficit},
                {"d_updates", d_updates},
                {"g_updates", g_updates}};
    }
};

// ---------------------------------------------------------------------------
// optimizer

// "adaptive" scales the gradient by the root of an exponentially weighted
// mean of squared gradients (decay 0.99, eps 1e-8); "plain" is raw descent.
struct OptimizerState {
    OptimizerKind kind = OptimizerKind::plain;
    std::vector<double> sq_avg;
    static constexpr double kDecay = 0.99;
    static constexpr double kEps = 1e-8;
};

inline void optimizer_step(std::vector<double>& theta, const std::vector<double>& grad, double lr,
                           OptimizerState& state) {
    if (theta.size() != grad.size()) throw Error("bad_gradient", "gradient shape mismatch");
    if (state.kind == OptimizerKind::plain) {
        for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
        return;
    }
    if (state.sq_avg.size() != theta.size()) state.sq_avg.assign(theta.size(), 0.0);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        state.sq_avg[i] = OptimizerState::kDecay * state.sq_avg[i] +
                          (1.0 - OptimizerState::kDecay) * grad[i] * grad[i];
        theta[i] -= lr * grad[i] / (std::sqrt(state.sq_avg[i]) + OptimizerState::kEps);
    }
}

// ---------------------------------------------------------------------------
// warm-up: maximum-likelihood epochs on generation prompts built from the
// dataset, predicting each held-out example from an n-shot context of other
// examples

inline void warmup(ModelParams& params, const RealDataset& data, int L_max, int n_shot, int epochs,
                   double lr, int minibatch, OptimizerKind opt_kind, Rng& rng,
                   OptimizerState* carry = nullptr) {
    if (epochs <= 0) return;
    Vocab vocab(params.hyper.V);
    OptimizerState local;
    OptimizerState& state = carry ? *carry : local;
    state.kind = opt_kind;
    const int m = static_cast<int>(data.size());
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (int start = 0; start < m; start += minibatch) {
            int end = std::min(m, start + minibatch);
            Gradient grad(params.theta.size(), 0.0);
            double inv = 1.0 / static_cast<double>(end - start);
            for (int i = start; i < end; ++i) {
                int j = order[i];
                // context drawn from the dataset with the target held out
                int want_ctx = std::min(n_shot, m - 1);
                std::vector<Sequence> ctx;
                std::set<int> used = {j};
                std::uniform_int_distribution<int> pick(0, m - 1);
                while (static_cast<int>(ctx.size()) < want_ctx) {
                    int k = pick(rng);
                    if (used.insert(k).second) ctx.push_back(data.samples[k]);
                }
                auto prompt = build_prompt(vocab, PromptMode::generation, ctx, params.hyper.window);
                Gradient g = logprob_gradient(params, prompt, data.samples[j]);
                for (std::size_t k = 0; k < grad.size(); ++k) grad[k] -= inv * g[k];  // NLL
            }
            optimizer_step(params.theta, grad, lr, state);
        }
        (void)L_max;
    }
}

// Mean negative log-likelihood over a fixed set of (context, target) pairs.
inline double mean_nll(const ModelParams& params,
                       const std::vector<std::pair<std::vector<Sequence>, Sequence>>& eval_set) {
    Vocab vocab(params.hyper.V);
    double acc = 0.0;
    for (const auto& [ctx, z] : eval_set) {
        auto prompt = build_prompt(vocab, PromptMode::generation, ctx, params.hyper.window);
        acc -= sequence_logprob(params, prompt, z);
    }
    return acc / static_cast<double>(eval_set.size());
}

// ---------------------------------------------------------------------------
// the adversarial loop

struct TrainResult {
    ModelParams params;                        // generator (and discriminator unless separate)
    std::optional<ModelParams> disc_params;    // separate mode only
    std::vector<IterationMetrics> metrics;
};

namespace detail {

inline FakeBatch generate_fakes(const ModelParams& gen, const RealDataset& data, int L_max,
                                int n_shot, int count, Rng& rng) {
    Vocab vocab(gen.hyper.V);
    FakeBatch batch;
    batch.items.reserve(count);
    for (int i = 0; i < count; ++i) {
        FakeItem item;
        item.context = sample_context(data, n_shot, rng);
        auto prompt = build_prompt(vocab, PromptMode::generation, item.context, gen.hyper.window);
        item.z = sample_sequence(gen, prompt, rng, L_max);
        item.gen_logprob = sequence_logprob(gen, prompt, item.z);
        batch.items.push_back(std::move(item));
    }
    return batch;
}

inline double oracle_d_value(const TabularDist& p_T, const TabularDist& p_G, const Sequence& z) {
    double a = p_T.prob_of(z), b = p_G.prob_of(z);
    return (a + b) > 0.0 ? a / (a + b) : 0.5;
}

}  // namespace detail

inline TrainResult run(const TrainConfig& config, const RealDataset& data, const TabularDist& target,
                       ModelParams params, const std::string& out_dir = "") {
    config.validate();
    if (data.size() < static_cast<std::size_t>(config.n_shot))
        throw Error("bad_config", "dataset smaller than n_shot");
    namespace fs = std::filesystem;
    Vocab vocab(params.hyper.V);
    const int L_max = target.L_max;
    const int fake_n = config.fake_batch_size > 0 ? config.fake_batch_size
                                                  : static_cast<int>(data.size());
    const int minibatch = std::min<int>(config.minibatch, static_cast<int>(data.size()));
    Rng rng(config.seed);

    std::ofstream metrics_out;
    std::ofstream fakes_out;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        metrics_out.open(fs::path(out_dir) / "metrics.jsonl");
    }

    // fixed context panel for the few-shot generation marginal
    std::vector<std::vector<Sequence>> panel;
    for (int i = 0; i < config.panel_size; ++i)
        panel.push_back(sample_context(data, config.n_shot, rng));

    // one optimizer state across warm-up and both adversarial phases: they
    // all update the same parameter vector, and a carried second-moment
    // accumulator keeps the first adversarial steps at a sane scale
    const bool separate = config.mode == TrainMode::separate;
    OptimizerState g_state;
    g_state.kind = config.optimizer;

    if (config.warmup_epochs > 0)
        warmup(params, data, L_max, config.n_shot, config.warmup_epochs, config.warmup_lr,
               config.warmup_minibatch > 0 ? config.warmup_minibatch : minibatch,
               config.optimizer, rng, &g_state);

    ModelParams disc_params = params;  // used only in separate mode
    OptimizerState d_sep_state;        // separate mode keeps its own state
    d_sep_state.kind = config.optimizer;
    OptimizerState& d_state = separate ? d_sep_state : g_state;

    TrainResult result;
    std::optional<TabularDist> prev_dist;

    for (int iter = 0; iter < config.iterations; ++iter) {
        double frac = config.iterations > 1
                          ? static_cast<double>(iter) / static_cast<double>(config.iterations - 1)
                          : 0.0;
        double lr = config.lr_start + (config.lr_end - config.lr_start) * frac;
        IterationMetrics met;
        met.iter = iter;

        // (1) freeze the generator and (2) build the fake dataset under it
        ParamSnapshot gen_snap = snapshot(params);
        FakeBatch fakes = detail::generate_fakes(gen_snap.get(), data, L_max, config.n_shot, fake_n, rng);

        std::vector<Sequence> fake_seqs;
        fake_seqs.reserve(fakes.items.size());
        for (const auto& it : fakes.items) fake_seqs.push_back(it.z);

        // (3) discrimination epoch(s)
        const bool do_disc = config.mode == TrainMode::full || config.mode == TrainMode::d_only ||
                             separate;
        if (do_disc) {
            ModelParams& dp = separate ? disc_params : params;
            for (int step = 0; step < config.d_steps; ++step) {
                std::vector<int> real_idx(data.size()), fake_idx(fake_seqs.size());
                std::iota(real_idx.begin(), real_idx.end(), 0);
                std::iota(fake_idx.begin(), fake_idx.end(), 0);
                std::shuffle(real_idx.begin(), real_idx.end(), rng);
                std::shuffle(fake_idx.begin(), fake_idx.end(), rng);
                std::size_t pairs = std::min(real_idx.size(), fake_idx.size());
                for (std::size_t start = 0; start < pairs; start += minibatch) {
                    std::size_t end = std::min(pairs, start + minibatch);
                    std::vector<Sequence> rb, fb;
                    for (std::size_t i = start; i < end; ++i) {
                        rb.push_back(data.samples[real_idx[i]]);
                        fb.push_back(fake_seqs[fake_idx[i]]);
                    }
                    optimizer_step(dp.theta, disc_gradient(dp, rb, fb), lr, d_state);
                    ++met.d_updates;
                }
            }
        }

        // (4) refreeze for the generation phase
        ParamSnapshot disc_snap = snapshot(separate ? disc_params : params);

        // optional few-shot generation marginal of the discriminator-phase
        // snapshot, needed when scoring against the exact D*
        std::optional<EvaluatedDist> oracle_pg;
        if (config.mode == TrainMode::oracle_d)
            oracle_pg = exact_model_dist(gen_snap.get(), vocab.V, L_max, DistProvenance::few_shot,
                                         panel, config.workers);

        auto score_of = [&](const Sequence& z) -> DiscScore {
            if (config.mode == TrainMode::oracle_d) {
                DiscScore s;
                s.p_real = std::clamp(detail::oracle_d_value(target, oracle_pg->dist, z), kProbFloor,
                                      1.0 - kProbFloor);
                s.raw_real = s.p_real;
                s.raw_fake = s.p_fake();
                return s;
            }
            return disc_score(disc_snap.get(), z);
        };

        // (5) generation epoch(s)
        const bool do_gen = config.mode != TrainMode::d_only;
        if (do_gen) {
            if (config.regenerate_fakes) {
                fakes = detail::generate_fakes(separate ? params : disc_snap.get(), data, L_max,
                                               config.n_shot, fake_n, rng);
                fake_seqs.clear();
                for (const auto& it : fakes.items) fake_seqs.push_back(it.z);
            }
            for (auto& it : fakes.items) it.score = score_of(it.z);
            ModelParams& gp = params;
            for (int step = 0; step < config.g_steps; ++step) {
                std::vector<int> idx(fakes.items.size());
                std::iota(idx.begin(), idx.end(), 0);
                std::shuffle(idx.begin(), idx.end(), rng);
                for (std::size_t start = 0; start < idx.size(); start += minibatch) {
                    std::size_t end = std::min(idx.size(), start + minibatch);
                    if (config.standardized && end - start < 2) break;
                    FakeBatch mb;
                    for (std::size_t i = start; i < end; ++i) mb.items.push_back(fakes.items[idx[i]]);
                    optimizer_step(gp.theta,
                                   gen_gradient(gp, mb, config.standardized, config.nonsaturating),
                                   lr, g_state);
                    ++met.g_updates;
                }
            }
        } else {
            for (auto& it : fakes.items) it.score = score_of(it.z);
        }

        // metrics against the post-update parameters
        const ModelParams& scorer = separate ? disc_params : params;
        double pr_real = 0.0, pr_fake = 0.0;
        for (const auto& z : data.samples) pr_real += disc_score(scorer, z).p_real;
        for (const auto& z : fake_seqs) pr_fake += disc_score(scorer, z).p_real;
        met.mean_p_real_real = pr_real / static_cast<double>(data.size());
        met.mean_p_real_fake = pr_fake / static_cast<double>(fake_seqs.size());
        met.disc_loss = disc_loss(scorer, data.samples, fake_seqs);

        EvaluatedDist few = exact_model_dist(params, vocab.V, L_max, DistProvenance::few_shot, panel,
                                             config.workers);
        EvaluatedDist zero = exact_model_dist(params, vocab.V, L_max, DistProvenance::zero_shot, {},
                                              config.workers);
        met.tv_to_target = tv(few.dist, target);
        met.jsd_to_target = jsd(few.dist, target);
        met.zero_shot_tv = tv(zero.dist, target);
        met.deficit = few.deficit;
        met.kl_successive = prev_dist ? kl(few.dist, *prev_dist) : 0.0;
        prev_dist = few.dist;

        std::set<Sequence> distinct(fake_seqs.begin(), fake_seqs.end());
        met.distinct_fake_ratio =
            static_cast<double>(distinct.size()) / static_cast<double>(fake_seqs.size());

        if (!std::isfinite(met.disc_loss) || !std::isfinite(met.tv_to_target) ||
            !std::isfinite(met.kl_successive))
            throw Error("non_finite_loss", "non-finite loss at iteration " + std::to_string(iter));

        if (!out_dir.empty()) {
            metrics_out << met.to_json().dump() << '\n';
            bool checkpoint = config.checkpoint_every > 0 &&
                              ((iter + 1) % config.checkpoint_every == 0 ||
                               iter + 1 == config.iterations);
            if (checkpoint) {
                save_params(params, (fs::path(out_dir) / ("params_iter_" + std::to_string(iter + 1) + ".bin")).string());
                std::ofstream fo(fs::path(out_dir) / ("fakes_iter_" + std::to_string(iter + 1) + ".jsonl"));
                for (const auto& it : fakes.items)
                    fo << nlohmann::json{{"tokens", it.z},
                                         {"p_real", it.score.p_real},
                                         {"logprob", it.gen_logprob}}
                              .dump()
                       << '\n';
            }
        }
        result.metrics.push_back(met);
    }

    result.params = std::move(params);
    if (separate) result.disc_params = std::move(disc_params);
    return result;
}

// ---------------------------------------------------------------------------
// Bayesian-ICL backend loop: generation updates on the prior logits against
// the exact optimal discriminator built from the target and the backend's
// current zero-shot distribution.

struct BayesTrainResult {
    PriorParams prior;
    std::vector<double> target_mass;   // softmax mass on the target domain per step
    std::vector<double> zero_shot_tv;  // TV(zero-shot dist, p_T) per step
};

inline BayesTrainResult train_bayes_icl(PriorParams prior, const DomainLibrary& lib,
                                        const RealDataset& data, int n_shot, int steps, double lr,
                                        Rng& rng) {
    lib.validate();
    const TabularDist& p_T = lib.target();
    BayesTrainResult result;
    for (int step = 0; step < steps; ++step) {
        auto ctx = sample_context(data, n_shot, rng);
        int star = map_domain(prior, lib, ctx);
        const TabularDist& gen = lib.domains[star];
        Sequence z = gen.space[draw_categorical(gen.probs, rng)];
        const TabularDist& zero_shot = icl_generation_dist(prior, lib, {});
        double d = detail::oracle_d_value(p_T, zero_shot, z);
        double reward = safe_log(1.0 - d);
        auto grad = prior_gradient(prior, lib, ctx, reward);
        for (std::size_t i = 0; i < prior.logits.size(); ++i) prior.logits[i] -= lr * grad[i];
        result.target_mass.push_back(prior.softmax()[lib.target_index]);
        result.zero_shot_tv.push_back(tv(icl_generation_dist(prior, lib, {}), p_T));
    }
    result.prior = std::move(prior);
    return result;
}

}  // namespace sgalm
