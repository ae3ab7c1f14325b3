#pragma once

#include <string>
#include <vector>

#include "vta/codec.hpp"
#include "vta/common.hpp"
#include "vta/curation.hpp"
#include "vta/model.hpp"
#include "vta/sampler.hpp"
#include "vta/synthworld.hpp"

namespace vta {

// Evaluation suite: synchronization offset against the ground-truth event
// train, KL relevance under a fixed matched-filter classifier, Frechet
// distance between embedding statistics, and cosine relevance.

// 21 offset classes, -2.0 s .. +2.0 s in 0.2 s steps.
struct OffsetGrid {
    static constexpr int kClasses = 21;
    static constexpr double kStepS = 0.2;
    static constexpr double kMaxS = 2.0;

    static double class_offset_s(int index);    // index in [0, 20]
    static int class_of_offset(double offset_s);  // nearest class
};

constexpr int kEnvelopeRateHz = 250;

// Rectified first difference of short-window RMS at 250 Hz.
std::vector<double> onset_envelope(const Waveform& waveform, double win_ms);

struct OffsetEstimate {
    double offset_ms = 0.0;
    int class_index = OffsetGrid::kClasses / 2;
};

// Cross-correlates the onset envelope with the reference impulse train over
// lags in [-2 s, +2 s]; ties prefer the smaller |lag|, negative first.
OffsetEstimate estimate_offset(const Waveform& gen_audio, const EventTimeline& ref);

double mean_abs_offset_ms(const std::vector<double>& offsets_ms);

// Mean |offset| in ms over the pairs; pairs with empty reference timelines
// are rejected by estimate_offset.
double sync_score(const std::vector<const Waveform*>& gen_audio,
                  const std::vector<const EventTimeline*>& refs);

// Matched-filter energies -> normalized class posterior (floored at 1e-12).
std::vector<double> classify_audio(const Waveform& waveform, const AvEmbedder& embedder);

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

// Mean over pairs of KL(classify(gt) || classify(gen)).
double kld_relevance(const std::vector<const Waveform*>& gen_set,
                     const std::vector<const Waveform*>& gt_set, const AvEmbedder& embedder);

// Frechet distance between Gaussian fits of two embedding sets (rows =
// samples). Requires at least dim+1 rows per set.
double frechet_distance(const MatD& set_a, const MatD& set_b);

// 100 * cosine between the audio and video embeddings.
double ib_score(const Waveform& gen_audio, const VideoFeatureStream& video,
                const AvEmbedder& embedder);

struct MetricsReport {
    double sync_ms = 0.0;
    double kld = 0.0;
    double fd = 0.0;  // NaN when either embedding set is too small
    double ib = 0.0;
    int n_samples = 0;               // videos evaluated
    int n_generations_per_video = 0;
    int undefined_offsets = 0;       // excluded from sync_ms, never dropped silently
};

struct EvalItem {
    std::string id;
    EventTimeline ref;
    VideoFeatureStream video;
    Waveform gt_audio;
};

struct PerVideoRow {
    std::string id;
    double sync_ms = 0.0;
    double kld = 0.0;
    double ib = 0.0;
};

// Generates n_gen clips per video (seed = base seed + global index), computes
// all four metrics, averages per video and then over videos.
MetricsReport evaluate(const Net<float>& net, const RvqCodebooks& codebooks,
                       const AvEmbedder& embedder, const std::vector<EvalItem>& items,
                       const SampleConfig& base_config, int n_gen, int sample_rate,
                       std::vector<PerVideoRow>* per_video = nullptr);

std::string metrics_report_json(const MetricsReport& report);
std::string metrics_csv(const MetricsReport& report, const std::vector<PerVideoRow>& rows);

}  // namespace vta
