// sgalm: batch CLI for training runs, oracle checks, synthetic data export
// and plot-data extraction.
//
// Exit codes: 0 success, 1 oracle check failed, 2 usage/IO error.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <regex>

#include <CLI11.hpp>

#include "sgalm/engine.hpp"
#include "sgalm/runconfig.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int log_level() {
    const char* v = std::getenv("SGALM_LOG");
    if (!v) return 1;
    std::string s(v);
    if (s == "error") return 0;
    if (s == "debug") return 2;
    return 1;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[sgalm] " << msg << '\n';
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw sgalm::Error("config_not_found", "cannot open " + path);
    json j;
    in >> j;
    return j;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const std::string& config_path, const std::string& out_dir, std::int64_t seed,
              int workers) {
    json raw = read_json_file(config_path);
    if (seed >= 0) raw["seed"] = static_cast<std::uint64_t>(seed);
    auto config = sgalm::RunConfig::from_json(raw);
    if (workers > 0) config.train.workers = workers;

    auto target = config.make_target();
    sgalm::Rng rng(config.train.seed);
    auto data = sgalm::sample_target(target, rng, config.dataset_size);
    sgalm::ModelParams params(config.make_hyper(target));
    params.init_random(rng);

    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "config.json") << config.to_json().dump(2) << '\n';
    {
        json ds;
        for (const auto& z : data.samples) ds["samples"].push_back(z);
        std::ofstream(fs::path(out_dir) / "dataset.json") << ds.dump() << '\n';
    }

    log_info("training " + sgalm::to_string(config.train.mode) + " for " +
             std::to_string(config.train.iterations) + " iterations");
    auto result = sgalm::run(config.train, data, target, std::move(params), out_dir);

    // final score histograms (seen / unseen / generated) for the plot bundle
    auto unseen_n = std::min<int>(256, config.dataset_size);
    auto unseen = sgalm::sample_target(target, rng, unseen_n).samples;
    auto gen = sgalm::generate_filtered(result.params, data, target.L_max, unseen_n, 1,
                                        config.train.n_shot, rng);
    std::vector<sgalm::Sequence> fakes;
    for (const auto& g : gen) fakes.push_back(g.tokens);
    const int bins = 20;
    auto hist = sgalm::score_histogram(result.params, data, unseen, fakes, bins);
    {
        json h = {{"bins", bins},
                  {"seen", hist.seen},
                  {"unseen", hist.unseen},
                  {"fake", hist.fake},
                  {"seen_unseen_tv", hist.seen_unseen_tv},
                  {"seen_fake_tv", hist.seen_fake_tv}};
        std::ofstream(fs::path(out_dir) / "final_score_hist.json") << h.dump() << '\n';
    }

    const auto& last = result.metrics.back();
    json summary = {{"out", out_dir},
                    {"iterations", config.train.iterations},
                    {"final_tv", last.tv_to_target},
                    {"final_jsd", last.jsd_to_target},
                    {"final_zero_shot_tv", last.zero_shot_tv},
                    {"final_disc_loss", last.disc_loss}};
    std::cout << summary.dump() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// oracle checks

sgalm::TabularDist random_tabular(int V, int L_max, sgalm::Rng& rng, double sparsity = 0.0) {
    auto space = sgalm::enumerate_space(V, L_max);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> probs(space.size());
    for (double& p : probs) p = unif(rng) < sparsity ? 0.0 : unif(rng);
    double s = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (s <= 0.0) probs[0] = 1.0;
    return sgalm::TabularDist(V, L_max, std::move(probs));
}

// Per-sequence brute-force minimizer of the pointwise cross-entropy,
// independent of the closed form.
double pointwise_optimal_d(double pt, double pg) {
    auto loss = [&](double d) { return -(pt * std::log(d) + pg * std::log(1.0 - d)); };
    double lo = 1e-9, hi = 1.0 - 1e-9;
    for (int it = 0; it < 200; ++it) {
        double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (loss(m1) < loss(m2)) hi = m2;
        else lo = m1;
    }
    return 0.5 * (lo + hi);
}

int cmd_oracle(const std::string& check, int trials) {
    sgalm::Rng rng(12345);
    json report = {{"check", check}};
    bool pass = true;

    if (check == "dstar") {
        double max_err = 0.0;
        for (int t = 0; t < trials; ++t) {
            auto p = random_tabular(2, 3, rng), q = random_tabular(2, 3, rng);
            auto d = sgalm::d_star(p, q);
            for (std::size_t i = 0; i < d.size(); ++i) {
                if (p.probs[i] <= 0.0 && q.probs[i] <= 0.0) continue;
                if (p.probs[i] <= 0.0 || q.probs[i] <= 0.0) continue;  // boundary, exact by formula
                max_err = std::max(max_err, std::abs(d[i] - pointwise_optimal_d(p.probs[i], q.probs[i])));
            }
        }
        pass = max_err <= 1e-6;
        report["max_err"] = max_err;
        // the p_G = p_T symmetry case
        auto p = random_tabular(2, 3, rng);
        auto d = sgalm::d_star(p, p);
        double dev = 0.0;
        for (double v : d) dev = std::max(dev, std::abs(v - 0.5));
        pass = pass && dev <= 1e-12;
        report["symmetric_case_max_dev"] = dev;
    } else if (check == "jsd_identity") {
        double max_err = 0.0;
        for (int t = 0; t < trials; ++t) {
            auto p = random_tabular(2, 4, rng, 0.3), q = random_tabular(2, 4, rng, 0.3);
            auto v = sgalm::gan_value_at_dstar(p, q);
            max_err = std::max(max_err, std::abs(v.by_substitution - v.by_jsd_identity));
        }
        pass = max_err <= 1e-9;
        report["max_err"] = max_err;
    } else if (check == "kl_estimator") {
        int failures = 0;
        for (int t = 0; t < trials; ++t) {
            auto p_old = random_tabular(2, 2, rng), p_new = random_tabular(2, 2, rng);
            const int N = 100000;
            std::vector<double> ratios(N);
            std::vector<double> terms(N);
            for (int i = 0; i < N; ++i) {
                int zi = sgalm::draw_categorical(p_old.probs, rng);
                double r = p_new.probs[zi] / p_old.probs[zi];
                ratios[i] = r;
                double rc = std::max(r, sgalm::kProbFloor);
                terms[i] = rc * std::log(rc) - rc + 1.0;
            }
            double est = sgalm::kl_estimator(ratios);
            double exact = sgalm::kl(p_new, p_old);
            double se = sgalm::mean_std(terms).std / std::sqrt(static_cast<double>(N));
            if (std::abs(est - exact) > 3.0 * se + 1e-12) ++failures;
        }
        pass = failures == 0;
        report["failures"] = failures;
    } else if (check == "gradcheck") {
        sgalm::ModelHyper h;
        h.V = 2;
        h.window = sgalm::ModelHyper::required_window(2, 2);
        h.embed_dim = 4;
        h.hidden_dim = 8;
        double max_rel = 0.0;
        for (int t = 0; t < 3; ++t) {
            sgalm::ModelParams p(h);
            p.init_random(rng);
            sgalm::Vocab vocab(h.V);
            std::vector<sgalm::Sequence> ctx = {{0, 1}, {1}};
            auto prompt = sgalm::build_prompt(vocab, sgalm::PromptMode::generation, ctx, h.window);
            sgalm::Sequence z = {1, 0};
            auto grad = sgalm::logprob_gradient(p, prompt, z);
            std::uniform_int_distribution<std::size_t> pick(0, p.theta.size() - 1);
            for (int c = 0; c < trials; ++c) {
                std::size_t i = pick(rng);
                double fd = sgalm::central_diff(p.theta, i,
                                                [&] { return sgalm::sequence_logprob(p, prompt, z); });
                max_rel = std::max(max_rel, sgalm::rel_err(grad[i], fd));
            }
            std::vector<sgalm::Sequence> real = {{0, 0}, {1, 1}}, fake = {{0, 1}};
            auto dgrad = sgalm::disc_gradient(p, real, fake);
            for (int c = 0; c < trials; ++c) {
                std::size_t i = pick(rng);
                double fd = sgalm::central_diff(p.theta, i,
                                                [&] { return sgalm::disc_loss(p, real, fake); });
                max_rel = std::max(max_rel, sgalm::rel_err(dgrad[i], fd));
            }
        }
        pass = max_rel <= 1e-4;
        report["max_rel_err"] = max_rel;
    } else {
        throw sgalm::Error("unknown_check", "unknown oracle check: " + check);
    }

    report["pass"] = pass;
    std::cout << report.dump() << '\n';
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const std::string& run_dir, int want, int overgen, std::int64_t seed) {
    auto config = sgalm::RunConfig::from_json(read_json_file((fs::path(run_dir) / "config.json").string()));
    auto target = config.make_target();

    sgalm::RealDataset data;
    json ds = read_json_file((fs::path(run_dir) / "dataset.json").string());
    for (const auto& z : ds.at("samples")) data.samples.push_back(z.get<sgalm::Sequence>());

    // latest checkpoint in the run directory
    int best_iter = -1;
    std::regex pat(R"(params_iter_(\d+)\.bin)");
    for (const auto& e : fs::directory_iterator(run_dir)) {
        std::smatch m;
        std::string name = e.path().filename().string();
        if (std::regex_match(name, m, pat)) best_iter = std::max(best_iter, std::stoi(m[1]));
    }
    if (best_iter < 0) throw sgalm::Error("checkpoint_not_found", "no params_iter_*.bin in " + run_dir);
    auto params = sgalm::load_params(
        (fs::path(run_dir) / ("params_iter_" + std::to_string(best_iter) + ".bin")).string());

    sgalm::Rng rng(seed >= 0 ? static_cast<std::uint64_t>(seed) : config.train.seed + 1);
    log_info("generating " + std::to_string(want * overgen) + " candidates, keeping " +
             std::to_string(want));
    auto kept = sgalm::generate_filtered(params, data, target.L_max, want, overgen,
                                         config.train.n_shot, rng);

    std::ofstream jl(fs::path(run_dir) / "synthetic.jsonl");
    std::ofstream csv(fs::path(run_dir) / "synthetic.csv");
    csv << "tokens,p_real,logprob\n";
    double mean_p_real = 0.0, mean_log_pt = 0.0;
    std::set<sgalm::Sequence> distinct;
    for (const auto& s : kept) {
        jl << json{{"tokens", s.tokens}, {"p_real", s.p_real}, {"logprob", s.logprob}}.dump() << '\n';
        std::string toks;
        for (std::size_t i = 0; i < s.tokens.size(); ++i)
            toks += (i ? " " : "") + std::to_string(s.tokens[i]);
        csv << '"' << toks << "\"," << fmt17(s.p_real) << ',' << fmt17(s.logprob) << '\n';
        mean_p_real += s.p_real;
        mean_log_pt += sgalm::safe_log(target.prob_of(s.tokens));
        distinct.insert(s.tokens);
    }
    mean_p_real /= kept.size();
    mean_log_pt /= kept.size();
    json summary = {{"kept", kept.size()},
                    {"candidates", want * overgen},
                    {"mean_p_real", mean_p_real},
                    {"mean_log_p_T", mean_log_pt},
                    {"distinct_ratio", static_cast<double>(distinct.size()) / kept.size()}};
    std::cout << summary.dump() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// plotdata

int cmd_plotdata(const std::string& run_dir) {
    std::ifstream in(fs::path(run_dir) / "metrics.jsonl");
    if (!in) throw sgalm::Error("config_not_found", "no metrics.jsonl in " + run_dir);
    std::vector<json> rows;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(json::parse(line));
    if (rows.empty()) throw sgalm::Error("empty_metrics", "metrics.jsonl is empty");

    auto write_csv = [&](const std::string& name, const std::vector<std::string>& cols) {
        std::ofstream out(fs::path(run_dir) / name);
        for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
        out << '\n';
        for (const auto& r : rows) {
            for (std::size_t c = 0; c < cols.size(); ++c) {
                if (c) out << ',';
                const auto& v = r.at(cols[c]);
                if (v.is_number_integer()) out << v.get<std::int64_t>();
                else out << fmt17(v.get<double>());
            }
            out << '\n';
        }
    };
    write_csv("scores_vs_iter.csv", {"iter", "mean_p_real_real", "mean_p_real_fake", "disc_loss"});
    write_csv("kl_vs_iter.csv", {"iter", "kl_successive"});
    write_csv("tv_jsd_vs_iter.csv", {"iter", "tv_to_target", "jsd_to_target", "zero_shot_tv"});

    std::ifstream hin(fs::path(run_dir) / "final_score_hist.json");
    if (hin) {
        json h;
        hin >> h;
        std::ofstream out(fs::path(run_dir) / "score_hist.csv");
        out << "bin_lo,bin_hi,seen,unseen,fake\n";
        int bins = h.at("bins").get<int>();
        for (int b = 0; b < bins; ++b) {
            out << fmt17(static_cast<double>(b) / bins) << ',' << fmt17(static_cast<double>(b + 1) / bins)
                << ',' << fmt17(h["seen"][b].get<double>()) << ',' << fmt17(h["unseen"][b].get<double>())
                << ',' << fmt17(h["fake"][b].get<double>()) << '\n';
        }
    }

    json schema = {
        {"scores_vs_iter.csv",
         {{"iter", "training iteration index"},
          {"mean_p_real_real", "mean discrimination score on the real dataset"},
          {"mean_p_real_fake", "mean discrimination score on generated samples"},
          {"disc_loss", "discriminator cross-entropy loss"}}},
        {"kl_vs_iter.csv",
         {{"iter", "training iteration index"},
          {"kl_successive", "KL between this and the previous iteration's few-shot generation distribution"}}},
        {"tv_jsd_vs_iter.csv",
         {{"iter", "training iteration index"},
          {"tv_to_target", "total variation between the few-shot generation distribution and the target"},
          {"jsd_to_target", "Jensen-Shannon divergence to the target"},
          {"zero_shot_tv", "total variation of the zero-shot distribution to the target"}}},
        {"score_hist.csv",
         {{"bin_lo", "score bin lower edge"},
          {"bin_hi", "score bin upper edge"},
          {"seen", "normalized count, seen real samples"},
          {"unseen", "normalized count, unseen real samples"},
          {"fake", "normalized count, generated samples"}}}};
    std::ofstream(fs::path(run_dir) / "plot_schema.json") << schema.dump(2) << '\n';
    std::cout << json{{"rows", rows.size()}, {"out", run_dir}}.dump() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-adversarial sequence model trainer and oracle suite"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "run", run_dir, check;
    std::int64_t seed = -1;
    int workers = 0, trials = 100, want = 10, overgen = 8;

    auto* train = app.add_subcommand("train", "run the adversarial training loop");
    train->add_option("--config", config_path, "config JSON path")->required();
    train->add_option("--out", out_dir, "run directory");
    train->add_option("--seed", seed, "seed override");
    train->add_option("--workers", workers, "worker threads for exact evaluation");

    auto* oracle = app.add_subcommand("oracle", "run a named brute-force check");
    oracle->add_option("check", check, "dstar | jsd_identity | kl_estimator | gradcheck")->required();
    oracle->add_option("--trials", trials, "number of random trials");

    auto* generate = app.add_subcommand("generate", "export filtered synthetic samples");
    generate->add_option("--run", run_dir, "run directory")->required();
    generate->add_option("--want", want, "samples to keep");
    generate->add_option("--overgen", overgen, "over-generation factor");
    generate->add_option("--seed", seed, "seed override");

    auto* plotdata = app.add_subcommand("plotdata", "export plot CSVs from a run directory");
    plotdata->add_option("--run", run_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
        if (train->parsed()) return cmd_train(config_path, out_dir, seed, workers);
        if (oracle->parsed()) return cmd_oracle(check, trials);
        if (generate->parsed()) return cmd_generate(run_dir, want, overgen, seed);
        if (plotdata->parsed()) return cmd_plotdata(run_dir);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const sgalm::Error& e) {
        std::cerr << json{{"error", e.kind()}, {"message", e.what()}}.dump() << '\n';
        return e.kind() == "check_failed" ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }
    return 2;
}
