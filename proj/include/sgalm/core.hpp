#pragma once

// Vocabulary, sequence enumeration, tabular target distributions, few-shot
// context sampling and token-level prompt construction.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgalm/common.hpp"

namespace sgalm {

using Sequence = std::vector<int>;  // data-token indices only, 1 <= |z| <= L_max

// Token alphabet: data tokens 0..V-1 followed by seven reserved role tokens.
struct Vocab {
    int V = 0;

    explicit Vocab(int data_tokens) : V(data_tokens) {
        if (V < 1 || V > 16) throw Error("bad_vocab", "data alphabet size must be in [1,16]");
    }

    int total() const { return V + 7; }
    int bos() const { return V; }
    int eos() const { return V + 1; }
    int sep() const { return V + 2; }
    int g_role() const { return V + 3; }
    int d_role() const { return V + 4; }
    int real_tok() const { return V + 5; }
    int fake_tok() const { return V + 6; }

    bool is_data(int t) const { return t >= 0 && t < V; }
};

// ---------------------------------------------------------------------------
// sequence space enumeration

inline std::uint64_t space_size(int V, int L_max) {
    std::uint64_t n = 0, pw = 1;
    for (int l = 1; l <= L_max; ++l) {
        pw *= static_cast<std::uint64_t>(V);
        n += pw;
    }
    return n;
}

// Shorter sequences first, lexicographic within a length.
inline bool shortlex_less(const Sequence& a, const Sequence& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

// All sequences of length 1..L_max over tokens 0..V-1 in shortlex order:
// [0],[1],[0,0],[0,1],[1,0],[1,1],...
inline std::vector<Sequence> enumerate_space(int V, int L_max) {
    if (V < 1 || V > 16) throw Error("bad_vocab", "V must be in [1,16]");
    if (L_max < 1) throw Error("bad_space", "L_max must be >= 1");
    if (space_size(V, L_max) > (1u << 20))
        throw Error("space_too_large", "sequence space exceeds 2^20 elements");
    std::vector<Sequence> out;
    out.reserve(space_size(V, L_max));
    for (int l = 1; l <= L_max; ++l) {
        Sequence cur(l, 0);
        while (true) {
            out.push_back(cur);
            int i = l - 1;
            while (i >= 0 && cur[i] == V - 1) cur[i--] = 0;
            if (i < 0) break;
            ++cur[i];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// tabular distributions

struct TabularDist {
    int V = 0;
    int L_max = 0;
    std::vector<Sequence> space;
    std::vector<double> probs;

    TabularDist() = default;
    TabularDist(int V_, int L_max_, std::vector<double> probs_)
        : V(V_), L_max(L_max_), space(enumerate_space(V_, L_max_)), probs(std::move(probs_)) {
        if (probs.size() != space.size())
            throw Error("bad_dist", "probability table size mismatch");
        normalize();
    }

    void normalize() {
        double s = std::accumulate(probs.begin(), probs.end(), 0.0);
        if (s <= 0.0) throw Error("bad_dist", "probability table sums to zero");
        for (double& p : probs) p /= s;
    }

    int index_of(const Sequence& z) const {
        auto it = std::lower_bound(space.begin(), space.end(), z, shortlex_less);
        if (it == space.end() || *it != z) return -1;
        return static_cast<int>(it - space.begin());
    }

    double prob_of(const Sequence& z) const {
        int i = index_of(z);
        return i < 0 ? 0.0 : probs[i];
    }

    double entropy() const {
        double h = 0.0;
        for (double p : probs)
            if (p > 0.0) h -= p * std::log(p);
        return h;
    }
};

struct DomainLibrary {
    std::vector<TabularDist> domains;
    int target_index = 0;

    void validate() const {
        if (domains.size() < 2) throw Error("bad_library", "need at least 2 domains");
        if (target_index < 0 || target_index >= static_cast<int>(domains.size()))
            throw Error("bad_library", "target_index out of range");
        for (const auto& d : domains)
            if (d.V != domains[0].V || d.L_max != domains[0].L_max)
                throw Error("bad_library", "domains must share one sequence space");
    }

    const TabularDist& target() const { return domains[target_index]; }
};

// ---------------------------------------------------------------------------
// real dataset and context sampling

struct RealDataset {
    std::vector<Sequence> samples;
    std::size_t size() const { return samples.size(); }
};

inline RealDataset sample_target(const TabularDist& dist, Rng& rng, int m) {
    if (m < 1) throw Error("bad_count", "m must be >= 1");
    RealDataset out;
    out.samples.reserve(m);
    for (int i = 0; i < m; ++i)
        out.samples.push_back(dist.space[draw_categorical(dist.probs, rng)]);
    return out;
}

// n_shot distinct positions without replacement, order as drawn.
inline std::vector<Sequence> sample_context(const RealDataset& data, int n_shot, Rng& rng) {
    if (n_shot < 1 || n_shot > static_cast<int>(data.size()))
        throw Error("bad_count", "n_shot must be in [1, m]");
    std::vector<int> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<Sequence> out;
    out.reserve(n_shot);
    for (int i = 0; i < n_shot; ++i) {
        std::uniform_int_distribution<int> pick(i, static_cast<int>(idx.size()) - 1);
        std::swap(idx[i], idx[pick(rng)]);
        out.push_back(data.samples[idx[i]]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// prompt construction

enum class PromptMode { generation, discrimination };

struct PromptLayout {
    PromptMode mode = PromptMode::generation;
    int n_shot = 0;
    std::vector<int> rendered;
};

// generation:     [G_ROLE, SEP, z^1..., SEP, ..., z^n..., SEP]
// discrimination: [D_ROLE, SEP, z...,   SEP]
inline PromptLayout build_prompt(const Vocab& vocab, PromptMode mode,
                                 const std::vector<Sequence>& parts, int capacity) {
    if (mode == PromptMode::generation && parts.empty())
        throw Error("bad_prompt", "generation prompt needs at least one context example");
    if (mode == PromptMode::discrimination && parts.size() != 1)
        throw Error("bad_prompt", "discrimination prompt takes exactly one sample");
    PromptLayout out;
    out.mode = mode;
    out.n_shot = mode == PromptMode::generation ? static_cast<int>(parts.size()) : 0;
    out.rendered.push_back(mode == PromptMode::generation ? vocab.g_role() : vocab.d_role());
    out.rendered.push_back(vocab.sep());
    for (const auto& z : parts) {
        for (int t : z) {
            if (!vocab.is_data(t)) throw Error("bad_prompt", "prompt part contains a reserved token");
            out.rendered.push_back(t);
        }
        out.rendered.push_back(vocab.sep());
    }
    if (static_cast<int>(out.rendered.size()) > capacity)
        throw Error("prompt_too_long", "rendered prompt exceeds context capacity");
    return out;
}

// Inverse of the generation rendering; used by the round-trip property test.
inline std::vector<Sequence> decode_generation_prompt(const Vocab& vocab,
                                                      const PromptLayout& prompt) {
    if (prompt.mode != PromptMode::generation)
        throw Error("bad_prompt", "not a generation prompt");
    std::vector<Sequence> parts;
    Sequence cur;
    for (std::size_t i = 2; i < prompt.rendered.size(); ++i) {
        int t = prompt.rendered[i];
        if (t == vocab.sep()) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(t);
        }
    }
    return parts;
}

// ---------------------------------------------------------------------------
// target distribution families and JSON loading
//
// Schema: {"V":int, "L_max":int, "family":str?, "entries":[{"tokens":[...],
// "weight":f}]?, "transition":[[...]]?, "initial":[...]?}. Weights are
// normalized on load.

inline TabularDist make_uniform_subset(int V, int L_max,
                                       const std::vector<Sequence>& members) {
    auto space = enumerate_space(V, L_max);
    std::vector<double> probs(space.size(), 0.0);
    TabularDist tmp;
    tmp.V = V;
    tmp.L_max = L_max;
    tmp.space = space;
    tmp.probs.assign(space.size(), 0.0);
    for (const auto& z : members) {
        int i = tmp.index_of(z);
        if (i < 0) throw Error("bad_dist", "subset member outside sequence space");
        probs[i] = 1.0;
    }
    return TabularDist(V, L_max, std::move(probs));
}

// Uniform over sequences with even token-sum.
inline TabularDist make_parity_even(int V, int L_max) {
    auto space = enumerate_space(V, L_max);
    std::vector<double> probs(space.size(), 0.0);
    for (std::size_t i = 0; i < space.size(); ++i) {
        int s = std::accumulate(space[i].begin(), space[i].end(), 0);
        if (s % 2 == 0) probs[i] = 1.0;
    }
    return TabularDist(V, L_max, std::move(probs));
}

// p(z) proportional to initial[z_1] * prod_t transition[z_{t-1}][z_t],
// normalized over the finite space.
inline TabularDist make_markov_chain(int V, int L_max,
                                     const std::vector<double>& initial,
                                     const std::vector<std::vector<double>>& transition) {
    if (static_cast<int>(initial.size()) != V || static_cast<int>(transition.size()) != V)
        throw Error("bad_dist", "markov chain tables must be V-sized");
    auto space = enumerate_space(V, L_max);
    std::vector<double> probs(space.size(), 0.0);
    for (std::size_t i = 0; i < space.size(); ++i) {
        const auto& z = space[i];
        double w = initial[z[0]];
        for (std::size_t t = 1; t < z.size(); ++t) w *= transition[z[t - 1]][z[t]];
        probs[i] = w;
    }
    return TabularDist(V, L_max, std::move(probs));
}

inline TabularDist tabular_from_json(const nlohmann::json& j) {
    int V = j.at("V").get<int>();
    int L_max = j.at("L_max").get<int>();
    std::string family = j.value("family", std::string("table"));
    if (family == "parity_even") return make_parity_even(V, L_max);
    if (family == "markov_chain") {
        auto initial = j.at("initial").get<std::vector<double>>();
        auto transition = j.at("transition").get<std::vector<std::vector<double>>>();
        return make_markov_chain(V, L_max, initial, transition);
    }
    // "table" and "uniform_subset" share the entries list
    auto space = enumerate_space(V, L_max);
    TabularDist tmp;
    tmp.V = V;
    tmp.L_max = L_max;
    tmp.space = space;
    std::vector<double> probs(space.size(), 0.0);
    for (const auto& e : j.at("entries")) {
        auto tokens = e.at("tokens").get<Sequence>();
        double w = family == "uniform_subset" ? 1.0 : e.value("weight", 1.0);
        if (w < 0.0) throw Error("bad_dist", "negative weight");
        int i = tmp.index_of(tokens);
        if (i < 0) throw Error("bad_dist", "entry outside sequence space");
        probs[i] = w;
    }
    return TabularDist(V, L_max, std::move(probs));
}

inline TabularDist load_tabular(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config_not_found", "cannot open " + path);
    nlohmann::json j;
    in >> j;
    return tabular_from_json(j);
}

inline DomainLibrary library_from_json(const nlohmann::json& j) {
    DomainLibrary lib;
    for (const auto& d : j.at("domains")) lib.domains.push_back(tabular_from_json(d));
    lib.target_index = j.at("target_index").get<int>();
    lib.validate();
    return lib;
}

}  // namespace sgalm
