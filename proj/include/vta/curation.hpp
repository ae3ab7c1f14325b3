#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vta/manifest.hpp"
#include "vta/synthworld.hpp"

namespace vta {

// Deterministic joint audio-visual embedder: the audio side scores
// matched-filter energy against each class's damped-sinusoid signature, the
// video side pools the class channels. Both land in the same C-dimensional
// space, so cosine similarity measures audio-visual correspondence.

struct AvEmbedder {
    int class_count = 8;
    int sample_rate = 8000;
    int stride = 4;  // correlation evaluated every `stride` samples
    std::vector<std::vector<float>> templates;  // unit-energy, one per class
};

AvEmbedder make_embedder(int class_count, int sample_rate);

// Raw (unnormalized) per-class matched-filter energies. Shared with the
// metrics-side audio classifier.
std::vector<double> matched_filter_energies(const Waveform& waveform, const AvEmbedder& embedder);

// Unit vectors; all-zero inputs fall back to the uniform vector 1/sqrt(C).
std::vector<double> embed_audio_clip(const Waveform& waveform, const AvEmbedder& embedder);
std::vector<double> embed_video_clip(const VideoFeatureStream& stream, const AvEmbedder& embedder);

double cosine(const std::vector<double>& a, const std::vector<double>& b);

double av_similarity(const ClipSample& sample, const AvEmbedder& embedder);

struct CurationReport {
    double threshold = 0.0;
    int kept = 0;
    int dropped = 0;
    int skipped = 0;  // malformed manifest lines
    struct SweepRow {
        double threshold;
        int kept;
        int dropped;
    };
    std::vector<SweepRow> sweep;
};

inline std::vector<double> default_sweep_grid() { return {0.0, 0.2, 0.3, 0.4}; }

// Scores every record with the loader-supplied clip, keeps those with
// similarity >= threshold and annotates records with their similarity.
// The sweep table is computed from the same scores.
std::pair<std::vector<ManifestRecord>, CurationReport> filter_dataset(
    const std::vector<ManifestRecord>& records, const AvEmbedder& embedder, double threshold,
    const std::vector<double>& sweep_grid,
    const std::function<ClipSample(const ManifestRecord&)>& loader);

std::string curation_report_csv(const CurationReport& report);

}  // namespace vta
