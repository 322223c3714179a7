#pragma once

// Backend that realizes in-context learning as hard MAP Bayesian inference
// over a discrete domain library: the model "is" a prior over domains, and a
// few-shot context selects the domain maximizing likelihood times prior.

#include "sgalm/core.hpp"

namespace sgalm {

struct PriorParams {
    std::vector<double> logits;  // one per domain

    std::vector<double> softmax() const {
        std::vector<double> out(logits.size());
        double m = *std::max_element(logits.begin(), logits.end());
        double Z = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) Z += (out[i] = std::exp(logits[i] - m));
        for (double& p : out) p /= Z;
        return out;
    }
};

// argmax over domains of sum_i log p(z^i | domain) + log prior(domain);
// empty context reduces to the prior argmax (zero-shot). Ties break to the
// lowest index.
inline int map_domain(const PriorParams& prior, const DomainLibrary& lib,
                      const std::vector<Sequence>& ctx) {
    if (prior.logits.size() != lib.domains.size())
        throw Error("bad_library", "prior size does not match library");
    auto pri = prior.softmax();
    int best = -1;
    double best_score = 0.0;
    bool any = false;
    for (std::size_t d = 0; d < lib.domains.size(); ++d) {
        double score = std::log(pri[d]);
        bool zero = false;
        for (const auto& z : ctx) {
            double f = lib.domains[d].prob_of(z);
            if (f <= 0.0) {
                zero = true;
                break;
            }
            score += std::log(f);
        }
        if (zero) continue;
        if (!any || score > best_score) {
            any = true;
            best = static_cast<int>(d);
            best_score = score;
        }
    }
    if (!any) throw Error("all_zero_likelihood", "every domain assigns zero probability to the context");
    return best;
}

inline const TabularDist& icl_generation_dist(const PriorParams& prior, const DomainLibrary& lib,
                                              const std::vector<Sequence>& ctx) {
    return lib.domains[map_domain(prior, lib, ctx)];
}

// Score-function gradient on the prior logits, treating the sampled MAP
// branch as the realized latent: reward * (one_hot(z*) - softmax(logits)).
inline std::vector<double> prior_gradient(const PriorParams& prior, const DomainLibrary& lib,
                                          const std::vector<Sequence>& ctx, double reward) {
    int star = map_domain(prior, lib, ctx);
    auto pri = prior.softmax();
    std::vector<double> grad(pri.size());
    for (std::size_t d = 0; d < pri.size(); ++d)
        grad[d] = reward * ((static_cast<int>(d) == star ? 1.0 : 0.0) - pri[d]);
    return grad;
}

// Smallest pairwise likelihood-ratio bound between distinct domains over the
// shared support; reported for library diagnostics, never enforced.
inline double library_gamma(const DomainLibrary& lib) {
    double worst = 0.0;
    for (std::size_t a = 0; a < lib.domains.size(); ++a)
        for (std::size_t b = 0; b < lib.domains.size(); ++b) {
            if (a == b) continue;
            // expected per-sample log ratio of domain b against a under a
            double elr = 0.0;
            for (std::size_t i = 0; i < lib.domains[a].probs.size(); ++i) {
                double pa = lib.domains[a].probs[i];
                if (pa <= 0.0) continue;
                elr += pa * (safe_log(lib.domains[b].probs[i]) - std::log(pa));
            }
            worst = std::max(worst, std::exp(elr));
        }
    return worst;
}

}  // namespace sgalm
