#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vta/common.hpp"

namespace vta {

// Synthetic audio-visual world. A hidden event timeline drives both the
// rendered waveform and the video feature stream, so audio-visual
// correspondence is known exactly and corruption can be injected on purpose.

struct Event {
    double t = 0.0;       // seconds
    int class_id = 0;     // [0, class_count)
    double amplitude = 0; // (0, 1]
};

struct EventTimeline {
    double duration_s = 0.0;
    int class_count = 8;
    uint64_t seed = 0;
    std::vector<Event> events;  // sorted ascending by t
};

struct Waveform {
    std::vector<float> samples;  // [-1, 1]
    int sample_rate = 8000;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

struct VideoFeatureStream {
    MatF features;      // t_v x d_raw
    double fps = 25.0;

    int t_v() const { return features.rows; }
    int d_raw() const { return features.cols; }
    double duration_s() const { return features.rows / fps; }
};

enum class Corruption { none, replace, tone, noise };

const char* corruption_name(Corruption c);
Corruption corruption_from_name(const std::string& name);

struct ClipSample {
    std::string id;
    EventTimeline timeline;
    VideoFeatureStream video;
    Waveform audio;
    Corruption corruption = Corruption::none;
};

// Class c rings at 300*(c+1) Hz with a 50 ms decay; the classes stay
// separable with matched filters at 8 kHz.
constexpr double kAudioDecayS = 0.05;
constexpr double kVideoDecayS = 0.2;
inline double class_frequency_hz(int class_id) { return 300.0 * (class_id + 1); }

// Seeded Poisson event count, uniform times and classes, amplitudes uniform
// in [0.5, 1]. Pure function of its arguments.
EventTimeline generate_timeline(uint64_t seed, double duration_s, double event_rate,
                                int class_count);

// Each event adds amplitude * exp(-(t-t_e)/tau) * sin(2*pi*f_c*(t-t_e)) for
// t >= t_e; the sum is clipped to [-1, 1].
Waveform render_audio(const EventTimeline& timeline, int sample_rate);

// Each event writes a decaying bump on channel 2c (attack at the event, 0.2 s
// decay) and a one-frame onset spike on channel 2c+1; channels wrap modulo
// d_raw. Seeded Gaussian noise on all channels.
VideoFeatureStream render_video_features(const EventTimeline& timeline, double fps, int d_raw,
                                         double noise_std);

// Replaces the audio track while leaving video untouched:
//   replace - re-render from an independent seeded timeline
//   tone    - constant 440 Hz sinusoid at amplitude 0.3
//   noise   - original mixed with Gaussian noise at 0 dB SNR
ClipSample corrupt_audio(const ClipSample& sample, Corruption mode, uint64_t seed);

}  // namespace vta
