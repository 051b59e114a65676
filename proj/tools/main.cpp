// fusecurr command line. Subcommands cover the whole pipeline: synthesize a
// dataset, pretrain/train the fusion net, evaluate a checkpoint, score images,
// and apply the degradation stack to a single file.
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime failure.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fusecurr/degrade.hpp"
#include "fusecurr/errors.hpp"
#include "fusecurr/imgio.hpp"
#include "fusecurr/trainer.hpp"

namespace {

using fusecurr::train::TrainConfig;

// Config file first, then explicit CLI flags on top.
struct ConfigArgs {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;

    TrainConfig resolve() const {
        TrainConfig cfg = config_path.empty()
                              ? TrainConfig{}
                              : fusecurr::train::parse_config_file(config_path);
        for (const auto& [k, v] : overrides) fusecurr::train::apply_config_entry(cfg, k, v);
        return cfg;
    }
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.config_path, "key = value config file");
    static const char* keys[] = {"dataset_dir", "teacher", "student_lr", "batch_size",
                                 "agent_lr", "pretrain_epochs", "train_epochs", "p",
                                 "steps_per_episode", "crop", "seed", "baseline_enabled",
                                 "log_path", "out_dir"};
    for (const char* key : keys) {
        cmd->add_option_function<std::string>(
            std::string("--") + key,
            [&args, key](const std::string& v) { args.overrides.emplace_back(key, v); },
            std::string("override config key ") + key);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"infrared/visible image fusion trainer"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic ir/vi dataset");
    std::string synth_out;
    int synth_pairs = 4;
    int synth_size = 64;
    std::uint64_t synth_seed = 0;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--pairs", synth_pairs, "number of image pairs");
    synth->add_option("--size", synth_size, "image side length (multiple of 16)");
    synth->add_option("--seed", synth_seed, "generator seed");

    // pretrain / train
    auto* pretrain = app.add_subcommand("pretrain", "teacher-only warm start");
    ConfigArgs pretrain_cfg;
    add_config_options(pretrain, pretrain_cfg);

    auto* train = app.add_subcommand("train", "pretrain plus agent-driven training");
    ConfigArgs train_cfg;
    add_config_options(train, train_cfg);

    // eval
    auto* eval = app.add_subcommand("eval", "fuse a dataset and score the results");
    std::string eval_ckpt, eval_data, eval_out;
    eval->add_option("--ckpt", eval_ckpt,
                     "student checkpoint path, or 'rule' for the fusion rule")
        ->required();
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--out", eval_out, "output directory")->required();

    // metrics
    auto* metrics = app.add_subcommand("metrics", "score the source images of a dataset");
    std::string metrics_data, metrics_out;
    metrics->add_option("--data", metrics_data, "dataset directory")->required();
    metrics->add_option("--out", metrics_out, "output csv path")->required();

    // degrade
    auto* degrade = app.add_subcommand("degrade", "apply the degradation stack to one image");
    std::string deg_in, deg_out;
    fusecurr::degrade::DegradationParams deg_params;
    std::uint64_t deg_seed = 0;
    degrade->add_option("--in", deg_in, "input pgm")->required();
    degrade->add_option("--out", deg_out, "output pgm")->required();
    degrade->add_option("--blur", deg_params.blur, "blur strength in [0,1]");
    degrade->add_option("--compress", deg_params.compress, "compression strength in [0,1]");
    degrade->add_option("--brightness", deg_params.brightness, "brightness knob in [0,1]");
    degrade->add_option("--contrast", deg_params.contrast, "contrast knob in [0,1]");
    degrade->add_option("--noise", deg_params.noise, "noise strength in [0,1]");
    degrade->add_option("--seed", deg_seed, "noise seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);  // --help exits 0, bad usage nonzero
    }

    try {
        if (*synth) {
            fusecurr::train::make_synthetic_dataset(synth_out, synth_pairs, synth_size,
                                                    synth_seed);
            std::cout << "wrote " << synth_pairs << " pairs to " << synth_out << "\n";
        } else if (*pretrain) {
            const auto res = fusecurr::train::pretrain(pretrain_cfg.resolve());
            for (size_t i = 0; i < res.epoch_mean_loss.size(); ++i)
                std::cout << "pretrain epoch " << i << " loss "
                          << fusecurr::train::format_double(res.epoch_mean_loss[i]) << "\n";
            std::cout << "checkpoint " << res.checkpoint_path << "\n";
        } else if (*train) {
            const auto res = fusecurr::train::train(train_cfg.resolve());
            std::cout << "log " << res.log_path << "\n";
            std::cout << "student checkpoint " << res.student_checkpoint << "\n";
            std::cout << "agent checkpoint " << res.agent_checkpoint << "\n";
        } else if (*eval) {
            fusecurr::train::evaluate(eval_ckpt, eval_data, eval_out);
            std::cout << "results in " << eval_out << "\n";
        } else if (*metrics) {
            fusecurr::train::write_metrics_csv(metrics_data, metrics_out);
            std::cout << "wrote " << metrics_out << "\n";
        } else if (*degrade) {
            const auto im = fusecurr::img::load_pgm(deg_in);
            fusecurr::img::save_pgm(
                deg_out, fusecurr::degrade::degrade_image(im, deg_params, deg_seed));
            std::cout << "wrote " << deg_out << "\n";
        }
    } catch (const fusecurr::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const fusecurr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
