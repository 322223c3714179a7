#pragma once

// Synthetic data engine: over-generate with fresh contexts, keep the top
// fraction by self-discrimination score; plus mode-collapse diagnostics.

#include <map>
#include <set>

#include "sgalm/adversary.hpp"

namespace sgalm {

struct GeneratedSample {
    Sequence tokens;
    double p_real = 0.0;
    double logprob = 0.0;
};

// Generates want*k candidates, keeps the top `want` by p_real. Ties break by
// higher generation logprob, then lexicographic token order.
inline std::vector<GeneratedSample> generate_filtered(const ModelParams& params,
                                                      const RealDataset& data, int L_max, int want,
                                                      int overgen_factor, int n_shot, Rng& rng) {
    if (want < 1 || overgen_factor < 1) throw Error("bad_count", "want and overgen factor must be >= 1");
    Vocab vocab(params.hyper.V);
    std::vector<GeneratedSample> pool;
    pool.reserve(static_cast<std::size_t>(want) * overgen_factor);
    for (int i = 0; i < want * overgen_factor; ++i) {
        auto ctx = sample_context(data, n_shot, rng);
        auto prompt = build_prompt(vocab, PromptMode::generation, ctx, params.hyper.window);
        GeneratedSample s;
        s.tokens = sample_sequence(params, prompt, rng, L_max);
        s.logprob = sequence_logprob(params, prompt, s.tokens);
        s.p_real = disc_score(params, s.tokens).p_real;
        pool.push_back(std::move(s));
    }
    std::stable_sort(pool.begin(), pool.end(), [](const GeneratedSample& a, const GeneratedSample& b) {
        if (a.p_real != b.p_real) return a.p_real > b.p_real;
        if (a.logprob != b.logprob) return a.logprob > b.logprob;
        return a.tokens < b.tokens;
    });
    pool.resize(want);
    return pool;
}

struct PrefixProfile {
    std::vector<int> distinct_counts;   // per prefix length k = 1..max_k
    std::vector<double> modal_shares;   // share of the most common length-k prefix
};

// Counts distinct length-k prefixes and the modal prefix share. Samples
// shorter than k count as their full length, so both profiles stay monotone.
inline PrefixProfile prefix_divergence(const std::vector<Sequence>& samples, int max_k) {
    if (samples.empty()) throw Error("bad_count", "prefix_divergence needs samples");
    PrefixProfile out;
    for (int k = 1; k <= max_k; ++k) {
        std::map<Sequence, int> counts;
        for (const auto& z : samples) {
            Sequence prefix(z.begin(), z.begin() + std::min<std::size_t>(k, z.size()));
            ++counts[prefix];
        }
        int modal = 0;
        for (const auto& [pfx, c] : counts) modal = std::max(modal, c);
        out.distinct_counts.push_back(static_cast<int>(counts.size()));
        out.modal_shares.push_back(static_cast<double>(modal) / static_cast<double>(samples.size()));
    }
    return out;
}

struct ScoreHistograms {
    std::vector<double> seen;
    std::vector<double> unseen;
    std::vector<double> fake;
    double seen_unseen_tv = 0.0;  // memorization check
    double seen_fake_tv = 0.0;
};

// Binned p_real over [0,1] for seen real, unseen real, and generated
// samples, each normalized to sum to 1.
inline ScoreHistograms score_histogram(const ModelParams& params, const RealDataset& seen,
                                       const std::vector<Sequence>& unseen,
                                       const std::vector<Sequence>& fakes, int bins) {
    if (bins < 2) throw Error("bad_count", "need at least 2 bins");
    auto fill = [&](const std::vector<Sequence>& zs) {
        std::vector<double> h(bins, 0.0);
        for (const auto& z : zs) {
            double s = disc_score(params, z).p_real;
            int b = std::min(bins - 1, static_cast<int>(s * bins));
            h[b] += 1.0;
        }
        if (!zs.empty())
            for (double& v : h) v /= static_cast<double>(zs.size());
        return h;
    };
    ScoreHistograms out;
    out.seen = fill(seen.samples);
    out.unseen = fill(unseen);
    out.fake = fill(fakes);
    for (int b = 0; b < bins; ++b) {
        out.seen_unseen_tv += std::abs(out.seen[b] - out.unseen[b]);
        out.seen_fake_tv += std::abs(out.seen[b] - out.fake[b]);
    }
    out.seen_unseen_tv *= 0.5;
    out.seen_fake_tv *= 0.5;
    return out;
}

}  // namespace sgalm
