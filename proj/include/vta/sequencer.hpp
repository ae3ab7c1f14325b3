#pragma once

#include <cstdint>
#include <vector>

#include "vta/codec.hpp"
#include "vta/common.hpp"

namespace vta {

// Index bookkeeping between modalities: the delay pattern over RVQ levels,
// temporal alignment of video frames to audio token positions, and the
// channel-wise fusion layout.
//
// Level i (0-indexed) is delayed by i+1 steps, so even the first level is
// shifted once; the delayed sequence is L = t_a + n_q rows and row 0 is
// all-PAD. PAD is token id K.

struct DelayedGrid {
    int t_a = 0;
    int n_q = 0;
    int K = 0;
    std::vector<int32_t> cells;  // L x n_q, PAD = K

    int L() const { return t_a + n_q; }
    int pad_id() const { return K; }
    int32_t& at(int row, int level) { return cells[static_cast<size_t>(row) * n_q + level]; }
    int32_t at(int row, int level) const { return cells[static_cast<size_t>(row) * n_q + level]; }

    // Interior cells hold tokens: row j carries level i's token for audio
    // step j-(i+1) whenever that index lands in [0, t_a).
    bool is_interior(int row, int level) const {
        const int t = row - (level + 1);
        return t >= 0 && t < t_a;
    }
};

DelayedGrid apply_delay(const TokenGrid& grid);

// Exact inverse of apply_delay. Rejects grids with tokens in mandatory-PAD
// cells or PAD in interior cells.
TokenGrid remove_delay(const DelayedGrid& delayed);

// Maps fused positions to video frames. frame_of[j] is a 0-based frame index
// or kVisualPad for the learned padding slots past the audio span.
constexpr int kVisualPad = -1;

struct AlignmentMap {
    int t_a = 0;
    int t_v = 0;
    int n_q = 0;
    std::vector<int> frame_of;  // length L = t_a + n_q

    int L() const { return t_a + n_q; }
};

// Duplicates frames by floor((j * t_v) / t_a) so every audio position sees
// the newest frame that is not in its future; positions past t_a get VPAD.
AlignmentMap build_alignment(int t_v, int t_a, int n_q);

// True when every frame the map exposes at position j starts no later than
// the end of the audio frame predicted from position j.
bool alignment_is_causal(const AlignmentMap& map, double fps, int sample_rate, int frame_len,
                         int hop);

// Row-wise channel concatenation, audio channels first.
MatF fuse(const MatF& audio_embeds, const MatF& visual_embeds);

// Inverse of fuse.
void split_fused(const MatF& fused, int d_a, MatF* audio_out, MatF* visual_out);

// Baseline conditioning: concatenation along time, condition rows first.
// Both inputs must already share one width.
MatF prepend_condition(const MatF& audio_rows, const MatF& visual_rows);

}  // namespace vta
