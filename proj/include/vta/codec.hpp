#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vta/common.hpp"
#include "vta/synthworld.hpp"

namespace vta {

// Deterministic residual vector quantizer over Hann-windowed raw frames.
// Analysis is the identity on windowed frames, so the codec is exactly
// invertible up to quantization error.

struct RvqCodebooks {
    int n_q = 0;
    int K = 0;
    int frame_len = 64;
    int hop = 32;                   // frame_len/2, constant overlap-add
    std::vector<MatF> codebooks;    // n_q tables, each K x frame_len
    std::vector<float> window;      // periodic Hann, length frame_len

    bool fitted() const { return n_q > 0 && !codebooks.empty(); }
};

struct TokenGrid {
    int t_a = 0;
    int n_q = 0;
    int K = 0;
    std::vector<int32_t> tokens;  // t_a x n_q, row-major, values in [0, K-1]

    int32_t& at(int t, int level) { return tokens[static_cast<size_t>(t) * n_q + level]; }
    int32_t at(int t, int level) const { return tokens[static_cast<size_t>(t) * n_q + level]; }
};

std::vector<float> hann_window(int frame_len);

// Windowed framing: row j = window * samples[j*hop : j*hop+frame_len].
// t_a = floor((T_a - frame_len)/hop) + 1.
MatF analyze(const Waveform& waveform, int frame_len, int hop);

// Per-level k-means on residuals: level 0 fits raw frames, level i fits what
// levels 0..i-1 left over. k-means++ init, `iters` Lloyd steps, empty
// clusters re-seeded to the farthest point. hop is fixed to frame_len/2.
RvqCodebooks fit_rvq(const MatF& corpus, int n_q, int K, uint64_t seed, int iters);

// Greedy residual quantization, nearest-L2 with ties to the lowest index.
// Residual energy is verified non-increasing across levels as it goes.
TokenGrid encode(const Waveform& waveform, const RvqCodebooks& codebooks);

// Sum of codevectors per frame, overlap-added and clipped to [-1, 1].
Waveform decode(const TokenGrid& grid, const RvqCodebooks& codebooks, int sample_rate);

// 10*log10(signal power / error power) between two signals, truncated to the
// shorter length. +inf when the error is exactly zero.
double snr_db(const std::vector<float>& reference, const std::vector<float>& test);

// SNR of waveform vs decode(encode(waveform)).
double roundtrip_snr(const Waveform& waveform, const RvqCodebooks& codebooks);

// Codebook file: "VRVQ", version u16, N_q u16, K u32, frame_len u32, hop u32,
// codebooks row-major f32.
constexpr uint16_t kVrvqVersion = 1;
void write_codebooks(const std::string& path, const RvqCodebooks& cb);
RvqCodebooks read_codebooks(const std::string& path);

// Token file: "VTOK", version u16, N_q u16, t_a u32, K u32, tokens row-major
// u16. PAD id (= K) never appears; stored grids are delay-free.
constexpr uint16_t kVtokVersion = 1;
void write_tokens(const std::string& path, const TokenGrid& grid);
TokenGrid read_tokens(const std::string& path);

}  // namespace vta
