#pragma once

#include <cstdint>
#include <vector>

#include "vta/codec.hpp"
#include "vta/model.hpp"
#include "vta/rng.hpp"
#include "vta/sequencer.hpp"
#include "vta/synthworld.hpp"

namespace vta {

struct SampleConfig {
    double gamma = 6.0;        // guidance scale
    double temperature = 1.0;
    int top_k = 0;             // 0 = disabled
    uint64_t seed = 0;
    double duration_s = 2.56;
};

// log-softmax in double; the sampling-side mixing runs at 64-bit so gamma=1
// reduces to the conditional distribution exactly.
std::vector<double> log_softmax(const std::vector<double>& scores);

// gamma*logp_cond + (1-gamma)*logp_uncond, renormalized. Both inputs must be
// log-softmax outputs of identical shape.
std::vector<double> cfg_mix(const std::vector<double>& logp_cond,
                            const std::vector<double>& logp_uncond, double gamma);

// temperature 0 picks the argmax (ties to the lowest index); otherwise a
// seeded categorical draw over softmax(scores/temperature), restricted to the
// top_k highest scores when top_k > 0.
int sample_token(const std::vector<double>& scores, double temperature, int top_k, Rng& rng);

struct GenerateStats {
    int cond_rows = 0;    // conditional forward evaluations
    int uncond_rows = 0;  // unconditional forward evaluations (0 when gamma=1)
};

struct GenerateResult {
    TokenGrid grid;
    Waveform audio;
    GenerateStats stats;
};

// Autoregressive generation: all-PAD delayed layout, per position two guided
// forward passes (one when gamma=1), per-level sampling where the layout has
// interior cells, then remove_delay + decode. Visual rows follow
// build_alignment, so only past and present frames are consumed.
GenerateResult generate(const Net<float>& net, const RvqCodebooks& codebooks,
                        const VideoFeatureStream& video, const SampleConfig& cfg, int sample_rate);

}  // namespace vta
