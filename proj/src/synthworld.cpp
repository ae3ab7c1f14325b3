#include "vta/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vta/errors.hpp"
#include "vta/rng.hpp"

namespace vta {

const char* corruption_name(Corruption c) {
    switch (c) {
        case Corruption::none: return "none";
        case Corruption::replace: return "replace";
        case Corruption::tone: return "tone";
        case Corruption::noise: return "noise";
    }
    return "none";
}

Corruption corruption_from_name(const std::string& name) {
    if (name == "none") return Corruption::none;
    if (name == "replace") return Corruption::replace;
    if (name == "tone") return Corruption::tone;
    if (name == "noise") return Corruption::noise;
    throw std::invalid_argument("unknown corruption mode: " + name);
}

EventTimeline generate_timeline(uint64_t seed, double duration_s, double event_rate,
                                int class_count) {
    if (duration_s <= 0.0) throw std::invalid_argument("duration_s must be positive");
    if (event_rate <= 0.0) throw std::invalid_argument("event_rate must be positive");
    if (class_count < 2) throw std::invalid_argument("class_count must be >= 2");

    Rng rng(derive_seed(seed, 0x74696d65ULL));  // "time"
    EventTimeline tl;
    tl.duration_s = duration_s;
    tl.class_count = class_count;
    tl.seed = seed;

    const int n = rng.poisson(event_rate * duration_s);
    tl.events.resize(n);
    for (Event& e : tl.events) {
        e.t = rng.uniform(0.0, duration_s);
        e.class_id = static_cast<int>(rng.uniform_index(class_count));
        e.amplitude = rng.uniform(0.5, 1.0);
    }
    std::sort(tl.events.begin(), tl.events.end(),
              [](const Event& a, const Event& b) { return a.t < b.t; });
    return tl;
}

Waveform render_audio(const EventTimeline& timeline, int sample_rate) {
    const double f_max = class_frequency_hz(timeline.class_count - 1);
    if (f_max >= sample_rate / 2.0) {
        throw std::invalid_argument("highest class frequency " + std::to_string(f_max) +
                                    " Hz violates Nyquist at " + std::to_string(sample_rate) +
                                    " Hz");
    }

    const size_t n = static_cast<size_t>(std::llround(timeline.duration_s * sample_rate));
    std::vector<double> acc(n, 0.0);
    for (const Event& e : timeline.events) {
        const double freq = class_frequency_hz(e.class_id);
        const double first = std::ceil(e.t * sample_rate - 1e-9);
        const size_t start = first <= 0.0 ? 0 : static_cast<size_t>(first);
        for (size_t i = start; i < n; ++i) {
            const double dt = static_cast<double>(i) / sample_rate - e.t;
            if (dt < 0.0) continue;
            acc[i] += e.amplitude * std::exp(-dt / kAudioDecayS) * std::sin(2.0 * M_PI * freq * dt);
        }
    }

    Waveform w;
    w.sample_rate = sample_rate;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
        w.samples[i] = static_cast<float>(std::clamp(acc[i], -1.0, 1.0));
    }
    return w;
}

VideoFeatureStream render_video_features(const EventTimeline& timeline, double fps, int d_raw,
                                         double noise_std) {
    if (fps <= 0.0) throw std::invalid_argument("fps must be positive");
    if (d_raw < 1) throw std::invalid_argument("d_raw must be >= 1");

    const int t_v = static_cast<int>(std::llround(timeline.duration_s * fps));
    VideoFeatureStream s;
    s.fps = fps;
    s.features = MatF(t_v, d_raw);

    for (const Event& e : timeline.events) {
        const int bump_ch = (2 * e.class_id) % d_raw;
        const int spike_ch = (2 * e.class_id + 1) % d_raw;
        for (int f = 0; f < t_v; ++f) {
            const double t_f = static_cast<double>(f) / fps;
            if (t_f < e.t) continue;
            s.features.at(f, bump_ch) +=
                static_cast<float>(e.amplitude * std::exp(-(t_f - e.t) / kVideoDecayS));
        }
        const int onset_frame = static_cast<int>(std::floor(e.t * fps));
        if (onset_frame >= 0 && onset_frame < t_v) {
            s.features.at(onset_frame, spike_ch) += static_cast<float>(e.amplitude);
        }
    }

    if (noise_std > 0.0) {
        Rng rng(derive_seed(timeline.seed, 0x766e6f69ULL));  // video noise stream
        for (float& v : s.features.data) v += static_cast<float>(rng.normal(0.0, noise_std));
    }
    return s;
}

ClipSample corrupt_audio(const ClipSample& sample, Corruption mode, uint64_t seed) {
    if (sample.corruption != Corruption::none) {
        throw invalid_state_error("sample " + sample.id + " is already corrupted");
    }
    if (mode == Corruption::none) throw std::invalid_argument("corruption mode cannot be 'none'");

    ClipSample out = sample;
    out.corruption = mode;
    const int sr = sample.audio.sample_rate;
    const size_t n = sample.audio.samples.size();

    switch (mode) {
        case Corruption::replace: {
            // Independent timeline at roughly the original event density.
            const double duration = sample.timeline.duration_s;
            const double rate =
                std::max(0.5, static_cast<double>(sample.timeline.events.size()) / duration);
            EventTimeline other = generate_timeline(derive_seed(seed, 0x7265706cULL), duration,
                                                    rate, sample.timeline.class_count);
            out.audio = render_audio(other, sr);
            break;
        }
        case Corruption::tone: {
            for (size_t i = 0; i < n; ++i) {
                const double t = static_cast<double>(i) / sr;
                out.audio.samples[i] = static_cast<float>(0.3 * std::sin(2.0 * M_PI * 440.0 * t));
            }
            break;
        }
        case Corruption::noise: {
            const double signal_power = mean_power(sample.audio.samples);
            const double sigma = std::sqrt(signal_power);  // 0 dB SNR
            Rng rng(derive_seed(seed, 0x6e6f6973ULL));
            for (size_t i = 0; i < n; ++i) {
                const double v = sample.audio.samples[i] + rng.normal(0.0, sigma);
                out.audio.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
            }
            break;
        }
        case Corruption::none:
            break;
    }
    return out;
}

}  // namespace vta
