#include "vta/curation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vta/common.hpp"

namespace vta {

AvEmbedder make_embedder(int class_count, int sample_rate) {
    if (class_count < 2) throw std::invalid_argument("class_count must be >= 2");
    AvEmbedder e;
    e.class_count = class_count;
    e.sample_rate = sample_rate;
    const int len = static_cast<int>(std::llround(0.1 * sample_rate));  // 100 ms of decay
    e.templates.resize(class_count);
    for (int c = 0; c < class_count; ++c) {
        std::vector<float>& h = e.templates[c];
        h.resize(len);
        const double freq = class_frequency_hz(c);
        double energy = 0.0;
        for (int n = 0; n < len; ++n) {
            const double t = static_cast<double>(n) / sample_rate;
            h[n] = static_cast<float>(std::exp(-t / kAudioDecayS) * std::sin(2.0 * M_PI * freq * t));
            energy += static_cast<double>(h[n]) * h[n];
        }
        const float inv = energy > 0.0 ? static_cast<float>(1.0 / std::sqrt(energy)) : 1.0f;
        for (float& v : h) v *= inv;
    }
    return e;
}

std::vector<double> matched_filter_energies(const Waveform& waveform, const AvEmbedder& e) {
    if (waveform.samples.empty()) throw std::invalid_argument("empty waveform");
    std::vector<double> energies(e.class_count, 0.0);
    const int n = static_cast<int>(waveform.samples.size());
    for (int c = 0; c < e.class_count; ++c) {
        const std::vector<float>& h = e.templates[c];
        const int len = static_cast<int>(h.size());
        if (n < len) continue;
        double acc = 0.0;
        for (int off = 0; off + len <= n; off += e.stride) {
            const float corr = dot(waveform.samples.data() + off, h.data(), len);
            acc += static_cast<double>(corr) * corr;
        }
        energies[c] = acc;
    }
    return energies;
}

namespace {

std::vector<double> normalize_or_uniform(std::vector<double> v) {
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    if (norm_sq <= 0.0) {
        const double u = 1.0 / std::sqrt(static_cast<double>(v.size()));
        std::fill(v.begin(), v.end(), u);
        return v;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& x : v) x *= inv;
    return v;
}

}  // namespace

std::vector<double> embed_audio_clip(const Waveform& waveform, const AvEmbedder& e) {
    return normalize_or_uniform(matched_filter_energies(waveform, e));
}

std::vector<double> embed_video_clip(const VideoFeatureStream& stream, const AvEmbedder& e) {
    if (stream.features.rows == 0) throw std::invalid_argument("empty feature stream");
    std::vector<double> comps(e.class_count, 0.0);
    const int d_raw = stream.d_raw();
    for (int c = 0; c < e.class_count; ++c) {
        const int bump_ch = (2 * c) % d_raw;
        const int spike_ch = (2 * c + 1) % d_raw;
        double acc = 0.0;
        for (int t = 0; t < stream.features.rows; ++t) {
            acc += std::max(0.0f, stream.features.at(t, bump_ch));
            acc += std::max(0.0f, stream.features.at(t, spike_ch));
        }
        comps[c] = acc;
    }
    return normalize_or_uniform(std::move(comps));
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty()) throw std::invalid_argument("cosine: shape mismatch");
    double num = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return std::clamp(num / std::sqrt(na * nb), -1.0, 1.0);
}

double av_similarity(const ClipSample& sample, const AvEmbedder& e) {
    if (std::abs(sample.audio.duration_s() - sample.video.duration_s()) > 0.5) {
        throw std::invalid_argument("audio and video durations differ");
    }
    return cosine(embed_audio_clip(sample.audio, e), embed_video_clip(sample.video, e));
}

std::pair<std::vector<ManifestRecord>, CurationReport> filter_dataset(
    const std::vector<ManifestRecord>& records, const AvEmbedder& embedder, double threshold,
    const std::vector<double>& sweep_grid,
    const std::function<ClipSample(const ManifestRecord&)>& loader) {
    if (threshold < -1.0 || threshold > 1.0) {
        throw std::invalid_argument("threshold must be in [-1, 1]");
    }

    const int n = static_cast<int>(records.size());
    std::vector<double> sims(n, 0.0);
    parallel_for(n, [&](int i) { sims[i] = av_similarity(loader(records[i]), embedder); });

    CurationReport report;
    report.threshold = threshold;
    std::vector<ManifestRecord> kept;
    for (int i = 0; i < n; ++i) {
        if (sims[i] >= threshold) {
            ManifestRecord rec = records[i];
            rec.similarity = sims[i];
            rec.has_similarity = true;
            kept.push_back(std::move(rec));
            ++report.kept;
        } else {
            ++report.dropped;
        }
    }
    for (double tau : sweep_grid) {
        int k = 0;
        for (double s : sims) {
            if (s >= tau) ++k;
        }
        report.sweep.push_back({tau, k, n - k});
    }
    return {std::move(kept), std::move(report)};
}

std::string curation_report_csv(const CurationReport& report) {
    std::ostringstream ss;
    ss << "threshold,kept,dropped\n";
    for (const auto& row : report.sweep) {
        ss << row.threshold << "," << row.kept << "," << row.dropped << "\n";
    }
    return ss.str();
}

}  // namespace vta
