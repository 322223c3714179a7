#include <catch2/catch_amalgamated.hpp>

#include "sgalm/core.hpp"

using namespace sgalm;

TEST_CASE("enumerate_space base cases") {
    auto s1 = enumerate_space(2, 1);
    REQUIRE(s1 == std::vector<Sequence>{{0}, {1}});

    auto s2 = enumerate_space(2, 2);
    REQUIRE(s2 == std::vector<Sequence>{{0}, {1}, {0, 0}, {0, 1}, {1, 0}, {1, 1}});

    REQUIRE(enumerate_space(3, 4).size() == 120);
}

TEST_CASE("enumerate_space size matches the closed form") {
    for (int V : {1, 2, 3, 5}) {
        for (int L = 1; L <= 4; ++L) {
            auto s = enumerate_space(V, L);
            REQUIRE(s.size() == space_size(V, L));
            // duplicate-free and ordered
            for (std::size_t i = 1; i < s.size(); ++i) REQUIRE(shortlex_less(s[i - 1], s[i]));
        }
    }
}

TEST_CASE("enumerate_space rejects oversized spaces") {
    REQUIRE_THROWS_AS(enumerate_space(16, 6), Error);
}

TEST_CASE("vocab reserved tokens are disjoint from data tokens") {
    Vocab v(4);
    REQUIRE(v.total() == 11);
    std::set<int> reserved = {v.bos(), v.eos(), v.sep(), v.g_role(), v.d_role(), v.real_tok(), v.fake_tok()};
    REQUIRE(reserved.size() == 7);
    for (int t : reserved) REQUIRE_FALSE(v.is_data(t));
    REQUIRE(v.real_tok() != v.fake_tok());
}

TEST_CASE("sample_target point mass and determinism") {
    auto dist = make_uniform_subset(2, 2, {{0, 1}});
    Rng rng(7);
    auto ds = sample_target(dist, rng, 5);
    for (const auto& z : ds.samples) REQUIRE(z == Sequence{0, 1});

    Rng a(42), b(42);
    auto d1 = sample_target(dist, a, 50);
    auto d2 = sample_target(dist, b, 50);
    REQUIRE(d1.samples == d2.samples);
}

TEST_CASE("sample_target frequencies converge") {
    auto dist = make_uniform_subset(2, 2, {{0, 0}, {1, 1}});
    Rng rng(3);
    auto ds = sample_target(dist, rng, 100000);
    int c = 0;
    for (const auto& z : ds.samples)
        if (z == Sequence{0, 0}) ++c;
    double f = c / 100000.0;
    REQUIRE(std::abs(f - 0.5) < 0.01);  // binomial 3-sigma ~ 0.0047
}

TEST_CASE("sample_target converges in TV on a larger space") {
    Rng setup(11);
    auto space = enumerate_space(2, 4);  // 30 <= 64 sequences
    std::vector<double> probs(space.size());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (double& p : probs) p = unif(setup);
    TabularDist dist(2, 4, probs);
    Rng rng(5);
    auto ds = sample_target(dist, rng, 100000);
    std::vector<double> freq(space.size(), 0.0);
    for (const auto& z : ds.samples) freq[dist.index_of(z)] += 1.0 / ds.size();
    double tv = 0.0;
    for (std::size_t i = 0; i < freq.size(); ++i) tv += std::abs(freq[i] - dist.probs[i]);
    REQUIRE(tv / 2.0 <= 0.02);
}

TEST_CASE("sample_context draws without replacement, order kept") {
    RealDataset data;
    for (int i = 0; i < 5; ++i) data.samples.push_back({i % 2, i % 2});
    data.samples = {{0}, {1}, {0, 0}, {0, 1}, {1, 0}};
    Rng rng(1);
    auto ctx = sample_context(data, 2, rng);
    REQUIRE(ctx.size() == 2);

    // m = n_shot: a permutation of the full dataset
    auto all = sample_context(data, 5, rng);
    std::set<Sequence> seen(all.begin(), all.end());
    REQUIRE(seen.size() == 5);

    Rng a(9), b(9);
    REQUIRE(sample_context(data, 3, a) == sample_context(data, 3, b));
}

TEST_CASE("build_prompt layouts") {
    Vocab v(2);
    auto g = build_prompt(v, PromptMode::generation, {{0, 1}}, 64);
    REQUIRE(g.rendered == std::vector<int>{v.g_role(), v.sep(), 0, 1, v.sep()});

    auto d = build_prompt(v, PromptMode::discrimination, {{1, 0}}, 64);
    REQUIRE(d.rendered == std::vector<int>{v.d_role(), v.sep(), 1, 0, v.sep()});

    auto g4 = build_prompt(v, PromptMode::generation, {{0}, {1}, {0}, {1}}, 16);
    REQUIRE(g4.rendered.size() == 10);

    REQUIRE_THROWS_AS(build_prompt(v, PromptMode::generation, {{0}, {1}, {0}, {1}}, 8), Error);
    REQUIRE_THROWS_AS(build_prompt(v, PromptMode::generation, {}, 64), Error);
    REQUIRE_THROWS_AS(build_prompt(v, PromptMode::discrimination, {{0}, {1}}, 64), Error);
}

TEST_CASE("generation prompt round-trips its context") {
    Vocab v(3);
    Rng rng(17);
    auto dist = make_parity_even(3, 3);
    for (int trial = 0; trial < 50; ++trial) {
        auto data = sample_target(dist, rng, 8);
        auto ctx = sample_context(data, 4, rng);
        auto prompt = build_prompt(v, PromptMode::generation, ctx, 128);
        REQUIRE(decode_generation_prompt(v, prompt) == ctx);
    }
}

TEST_CASE("tabular families") {
    auto parity = make_parity_even(2, 4);
    int support = 0;
    for (std::size_t i = 0; i < parity.probs.size(); ++i) {
        if (parity.probs[i] > 0.0) {
            ++support;
            int s = 0;
            for (int t : parity.space[i]) s += t;
            REQUIRE(s % 2 == 0);
        }
    }
    REQUIRE(support == 15);
    double total = 0.0;
    for (double p : parity.probs) total += p;
    REQUIRE_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-12));

    auto markov = make_markov_chain(2, 2, {0.5, 0.5}, {{0.9, 0.1}, {0.1, 0.9}});
    REQUIRE(markov.prob_of({0, 0}) > markov.prob_of({0, 1}));
}

TEST_CASE("tabular JSON loading") {
    nlohmann::json j = {{"V", 2},
                        {"L_max", 2},
                        {"entries", {{{"tokens", {0, 1}}, {"weight", 3.0}}, {{"tokens", {1}}, {"weight", 1.0}}}}};
    auto d = tabular_from_json(j);
    REQUIRE_THAT(d.prob_of({0, 1}), Catch::Matchers::WithinAbs(0.75, 1e-12));
    REQUIRE_THAT(d.prob_of({1}), Catch::Matchers::WithinAbs(0.25, 1e-12));

    nlohmann::json fam = {{"V", 2}, {"L_max", 4}, {"family", "parity_even"}};
    REQUIRE(tabular_from_json(fam).prob_of({1, 1}) > 0.0);

    nlohmann::json lib_json = {{"domains", {fam, {{"V", 2}, {"L_max", 4}, {"family", "uniform_subset"},
                                                  {"entries", {{{"tokens", {1}}}}}}}},
                               {"target_index", 0}};
    auto lib = library_from_json(lib_json);
    REQUIRE(lib.domains.size() == 2);
    REQUIRE(lib.target().prob_of({0}) > 0.0);
}
