#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vta/codec.hpp"
#include "vta/curation.hpp"
#include "vta/manifest.hpp"
#include "vta/metrics.hpp"
#include "vta/model.hpp"
#include "vta/sampler.hpp"
#include "vta/synthworld.hpp"

namespace vta {

constexpr const char* kToolVersion = "vta 1.0.0";

// One declarative configuration drives every stage. Every field has a
// default; unknown keys are rejected; the effective config is persisted next
// to each command's outputs.
struct RunConfig {
    uint64_t seed = 0;
    std::string out_dir = "out";

    struct World {
        int n_clips = 64;
        double duration_s = 2.56;
        int sample_rate = 8000;
        double fps = 25.0;
        int d_raw = 16;
        int class_count = 8;
        double event_rate = 2.0;
        double noise_std = 0.05;
        double p_corrupt = 0.0;
        std::string corruption_mode = "replace";
    } world;

    struct Codec {
        int n_q = 4;
        int K = 256;
        int frame_len = 64;
        int hop = 32;
        int fit_iters = 25;
        int max_fit_frames = 120000;
    } codec;

    struct Model {
        int d_a = 128;
        int d_v = 64;
        int d_h = 128;
        int n_layer = 4;
        int n_head = 4;
    } model;

    struct Train {
        double lr = 1e-3;
        double weight_decay = 0.01;
        double cfg_dropout = 0.10;
        int batch_size = 8;
        int steps = 500;
        int epochs = 0;  // when > 0, steps = epochs * ceil(n_clips / batch_size)
        double grad_clip = 1.0;
        int log_every = 10;
        std::string conditioning = "fusion";
    } train;

    struct Sample {
        double gamma = 6.0;
        double temperature = 1.0;
        int top_k = 0;
    } sample;

    struct Curation {
        double threshold = 0.3;
        std::vector<double> sweep = {0.0, 0.2, 0.3, 0.4};
    } curation;

    struct Eval {
        int n_gen = 10;
    } eval;

    ModelConfig model_config() const;
    std::string to_json() const;

    static RunConfig from_json(const std::string& text);
    static RunConfig from_file(const std::string& path);
};

// Refuses to reuse a non-empty directory unless force is set.
void prepare_output_dir(const std::string& dir, bool force);

// Provenance sidecar: tool version, command, config hash, per-file content
// hashes, and the only timestamps in the pipeline.
void write_provenance(const std::string& artifact_path, const std::string& command,
                      const RunConfig& config,
                      const std::vector<std::pair<std::string, std::string>>& inputs);

// --- commands (throw on failure; the CLI maps exception types to exit codes)

// Synthesizes n_clips (optionally corrupting a seeded fraction), writes WAV +
// VFEA files and the JSONL manifest.
std::string cmd_synth(const RunConfig& config, const std::string& out_dir, bool force);

// Fits RVQ codebooks on the manifest's audio and writes the VRVQ artifact.
std::string cmd_codec_fit(const RunConfig& config, const std::string& manifest_path,
                          const std::string& out_path);

struct TrainOutputs {
    std::string checkpoint_path;   // model only
    std::string state_path;        // model + optimizer, resumable
    std::string log_path;
    double final_loss = 0.0;
    double wall_seconds = 0.0;
};

TrainOutputs cmd_train(const RunConfig& config, const std::string& manifest_path,
                       const std::string& codec_path, const std::string& out_dir,
                       const std::string& resume_path = "");

struct GenerateOutputs {
    std::string wav_path;
    std::string tokens_path;
    std::string sidecar_path;
};

GenerateOutputs cmd_generate(const RunConfig& config, const std::string& checkpoint_path,
                             const std::string& codec_path, const std::string& video_path,
                             const std::string& out_dir, uint64_t seed);

struct CurateOutputs {
    std::string manifest_path;
    std::string report_path;
    CurationReport report;
};

CurateOutputs cmd_curate(const RunConfig& config, const std::string& manifest_path,
                         const std::string& out_dir);

struct EvalOutputs {
    std::string report_path;
    std::string per_video_path;
    MetricsReport report;
};

EvalOutputs cmd_eval(const RunConfig& config, const std::string& checkpoint_path,
                     const std::string& codec_path, const std::string& manifest_path,
                     const std::string& out_dir);

// Runs the three trend recipes (conditioning method, guidance-scale sweep,
// curation-threshold sweep) at the config's scale and writes one CSV each.
// `reduced` trims the sweeps for small compute budgets.
std::vector<std::string> cmd_ablate(const RunConfig& config, const std::string& out_dir,
                                    bool reduced);

// Helpers shared by commands and tests.
std::vector<TrainItem> load_train_items(const RunConfig& config,
                                        const std::vector<ManifestRecord>& records,
                                        const RvqCodebooks& cb);
std::vector<EvalItem> load_eval_items(const RunConfig& config,
                                      const std::vector<ManifestRecord>& records);
ClipSample load_clip(const RunConfig& config, const ManifestRecord& rec);

}  // namespace vta
