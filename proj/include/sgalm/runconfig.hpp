#pragma once

// JSON run configuration with full-default materialization: every omitted
// field is resolved to its default and the resolved form is written back
// into the run directory.

#include "sgalm/trainer.hpp"

namespace sgalm {

struct RunConfig {
    nlohmann::json target_spec;
    int dataset_size = 256;
    int embed_dim = 8;
    int hidden_dim = 64;
    TrainConfig train;

    static RunConfig from_json(const nlohmann::json& j) {
        RunConfig c;
        c.target_spec = j.at("target");
        c.dataset_size = j.value("dataset_size", 256);
        if (j.contains("model")) {
            c.embed_dim = j["model"].value("embed_dim", 8);
            c.hidden_dim = j["model"].value("hidden_dim", 64);
        }
        const auto t = j.value("train", nlohmann::json::object());
        TrainConfig& tc = c.train;
        tc.mode = train_mode_from_string(t.value("mode", std::string("full")));
        tc.iterations = t.value("iterations", 40);
        tc.fake_batch_size = t.value("fake_batch_size", 0);
        tc.n_shot = t.value("n_shot", 4);
        tc.lr_start = t.value("lr_start", 0.02);
        tc.lr_end = t.value("lr_end", 0.01);
        tc.optimizer = t.value("optimizer", std::string("adaptive")) == "plain"
                           ? OptimizerKind::plain
                           : OptimizerKind::adaptive;
        tc.standardized = t.value("standardized", true);
        tc.warmup_epochs = t.value("warmup_epochs", 5);
        tc.warmup_lr = t.value("warmup_lr", 0.02);
        tc.warmup_minibatch = t.value("warmup_minibatch", 0);
        tc.d_steps = t.value("d_steps", 1);
        tc.g_steps = t.value("g_steps", 1);
        tc.minibatch = t.value("minibatch", 64);
        tc.panel_size = t.value("panel_size", 64);
        tc.checkpoint_every = t.value("checkpoint_every", 10);
        tc.regenerate_fakes = t.value("regenerate_fakes", false);
        tc.nonsaturating = t.value("nonsaturating", false);
        tc.workers = t.value("workers", 1);
        tc.seed = j.value("seed", static_cast<std::uint64_t>(1));
        tc.validate();
        if (c.dataset_size < tc.n_shot) throw Error("bad_config", "dataset_size < n_shot");
        return c;
    }

    nlohmann::json to_json() const {
        return {{"target", target_spec},
                {"dataset_size", dataset_size},
                {"seed", train.seed},
                {"model", {{"embed_dim", embed_dim}, {"hidden_dim", hidden_dim}}},
                {"train",
                 {{"mode", to_string(train.mode)},
                  {"iterations", train.iterations},
                  {"fake_batch_size", train.fake_batch_size},
                  {"n_shot", train.n_shot},
                  {"lr_start", train.lr_start},
                  {"lr_end", train.lr_end},
                  {"optimizer", train.optimizer == OptimizerKind::plain ? "plain" : "adaptive"},
                  {"standardized", train.standardized},
                  {"warmup_epochs", train.warmup_epochs},
                  {"warmup_lr", train.warmup_lr},
                  {"warmup_minibatch", train.warmup_minibatch},
                  {"d_steps", train.d_steps},
                  {"g_steps", train.g_steps},
                  {"minibatch", train.minibatch},
                  {"panel_size", train.panel_size},
                  {"checkpoint_every", train.checkpoint_every},
                  {"regenerate_fakes", train.regenerate_fakes},
                  {"nonsaturating", train.nonsaturating},
                  {"workers", train.workers}}}};
    }

    TabularDist make_target() const { return tabular_from_json(target_spec); }

    ModelHyper make_hyper(const TabularDist& target) const {
        ModelHyper h;
        h.V = target.V;
        h.window = ModelHyper::required_window(train.n_shot, target.L_max);
        h.embed_dim = embed_dim;
        h.hidden_dim = hidden_dim;
        return h;
    }
};

}  // namespace sgalm
