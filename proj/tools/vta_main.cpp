// Command-line surface for the synthetic video-to-audio pipeline.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vta/errors.hpp"
#include "vta/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::string out = "out";
    bool force = false;
    std::optional<double> gamma;
    std::optional<double> threshold;
    std::optional<int> n_gen;
};

vta::RunConfig effective_config(const CommonOpts& opts) {
    vta::RunConfig cfg = opts.config_path.empty() ? vta::RunConfig{}
                                                  : vta::RunConfig::from_file(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.gamma) cfg.sample.gamma = *opts.gamma;
    if (opts.threshold) cfg.curation.threshold = *opts.threshold;
    if (opts.n_gen) cfg.eval.n_gen = *opts.n_gen;
    cfg.out_dir = opts.out;
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON run configuration");
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_option("--out", opts.out, "output directory");
    cmd->add_flag("--force", opts.force, "reuse a non-empty output directory");
    cmd->add_option("--gamma", opts.gamma, "guidance scale override");
    cmd->add_option("--threshold", opts.threshold, "curation threshold override");
    cmd->add_option("--n-gen", opts.n_gen, "generations per test video");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic audio-visual generation pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string manifest, codec_path, checkpoint, video, resume;
    bool reduced = false;

    CLI::App* synth = app.add_subcommand("synth", "generate the synthetic dataset");
    add_common(synth, opts);

    CLI::App* codec_fit = app.add_subcommand("codec-fit", "fit RVQ codebooks");
    add_common(codec_fit, opts);
    codec_fit->add_option("--manifest", manifest, "dataset manifest")->required();

    CLI::App* train = app.add_subcommand("train", "train the generator");
    add_common(train, opts);
    train->add_option("--manifest", manifest, "training manifest")->required();
    train->add_option("--codec", codec_path, "codebook artifact")->required();
    train->add_option("--resume", resume, "resume from a train_state checkpoint");

    CLI::App* generate = app.add_subcommand("generate", "generate audio for one video");
    add_common(generate, opts);
    generate->add_option("--ckpt", checkpoint, "model checkpoint")->required();
    generate->add_option("--codec", codec_path, "codebook artifact")->required();
    generate->add_option("--video", video, "video feature file (VFEA)")->required();

    CLI::App* curate = app.add_subcommand("curate", "filter a dataset by AV similarity");
    add_common(curate, opts);
    curate->add_option("--manifest", manifest, "dataset manifest")->required();

    CLI::App* evaluate = app.add_subcommand("eval", "run the metric suite");
    add_common(evaluate, opts);
    evaluate->add_option("--manifest", manifest, "test manifest")->required();
    evaluate->add_option("--ckpt", checkpoint, "model checkpoint")->required();
    evaluate->add_option("--codec", codec_path, "codebook artifact")->required();

    CLI::App* ablate = app.add_subcommand("ablate", "run the trend experiments");
    add_common(ablate, opts);
    ablate->add_flag("--reduced", reduced, "reduced sweeps for small budgets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const vta::RunConfig cfg = effective_config(opts);
        if (synth->parsed()) {
            const std::string path = vta::cmd_synth(cfg, opts.out, opts.force);
            std::cout << path << "\n";
        } else if (codec_fit->parsed()) {
            const std::string path =
                vta::cmd_codec_fit(cfg, manifest, opts.out + "/codec.vrvq");
            std::cout << path << "\n";
        } else if (train->parsed()) {
            const vta::TrainOutputs out = vta::cmd_train(cfg, manifest, codec_path, opts.out, resume);
            std::cout << out.checkpoint_path << "\n";
        } else if (generate->parsed()) {
            const vta::GenerateOutputs out =
                vta::cmd_generate(cfg, checkpoint, codec_path, video, opts.out,
                                  opts.seed.value_or(cfg.seed));
            std::cout << out.wav_path << "\n";
        } else if (curate->parsed()) {
            const vta::CurateOutputs out = vta::cmd_curate(cfg, manifest, opts.out);
            std::cout << out.manifest_path << "\n";
        } else if (evaluate->parsed()) {
            const vta::EvalOutputs out =
                vta::cmd_eval(cfg, checkpoint, codec_path, manifest, opts.out);
            std::cout << out.report_path << "\n";
        } else if (ablate->parsed()) {
            for (const std::string& path : vta::cmd_ablate(cfg, opts.out, reduced)) {
                std::cout << path << "\n";
            }
        }
    } catch (const vta::artifact_mismatch_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const vta::numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const vta::invalid_state_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
