#include "vta/sequencer.hpp"

#include <stdexcept>
#include <string>

#include "vta/errors.hpp"

namespace vta {

DelayedGrid apply_delay(const TokenGrid& grid) {
    DelayedGrid out;
    out.t_a = grid.t_a;
    out.n_q = grid.n_q;
    out.K = grid.K;
    out.cells.assign(static_cast<size_t>(out.L()) * out.n_q, grid.K);
    for (int row = 0; row < out.L(); ++row) {
        for (int level = 0; level < out.n_q; ++level) {
            const int t = row - (level + 1);
            if (t >= 0 && t < grid.t_a) out.at(row, level) = grid.at(t, level);
        }
    }
    return out;
}

TokenGrid remove_delay(const DelayedGrid& delayed) {
    TokenGrid grid;
    grid.t_a = delayed.t_a;
    grid.n_q = delayed.n_q;
    grid.K = delayed.K;
    grid.tokens.resize(static_cast<size_t>(grid.t_a) * grid.n_q);
    for (int row = 0; row < delayed.L(); ++row) {
        for (int level = 0; level < delayed.n_q; ++level) {
            const int32_t cell = delayed.at(row, level);
            if (delayed.is_interior(row, level)) {
                if (cell == delayed.pad_id()) {
                    throw malformed_grid_error("PAD in interior cell (" + std::to_string(row) +
                                               ", " + std::to_string(level) + ")");
                }
                grid.at(row - (level + 1), level) = cell;
            } else if (cell != delayed.pad_id()) {
                throw malformed_grid_error("token in mandatory-PAD cell (" + std::to_string(row) +
                                           ", " + std::to_string(level) + ")");
            }
        }
    }
    return grid;
}

AlignmentMap build_alignment(int t_v, int t_a, int n_q) {
    if (t_v < 1 || t_a < 1) throw std::invalid_argument("t_v and t_a must be >= 1");
    AlignmentMap map;
    map.t_a = t_a;
    map.t_v = t_v;
    map.n_q = n_q;
    map.frame_of.resize(map.L());
    for (int j = 0; j < map.L(); ++j) {
        if (j < t_a) {
            const int f = static_cast<int>((static_cast<int64_t>(j) * t_v) / t_a);
            map.frame_of[j] = std::min(t_v - 1, f);
        } else {
            map.frame_of[j] = kVisualPad;
        }
    }
    return map;
}

bool alignment_is_causal(const AlignmentMap& map, double fps, int sample_rate, int frame_len,
                         int hop) {
    // Position j predicts the audio frame covering samples
    // [j*hop, j*hop + frame_len); the frame it looks at must not start later.
    for (int j = 0; j < map.t_a; ++j) {
        const int f = map.frame_of[j];
        if (f == kVisualPad) continue;
        const double video_start_s = f / fps;
        const double audio_end_s =
            (static_cast<double>(j) * hop + frame_len) / static_cast<double>(sample_rate);
        if (video_start_s > audio_end_s + 1e-9) return false;
    }
    return true;
}

MatF fuse(const MatF& audio_embeds, const MatF& visual_embeds) {
    if (audio_embeds.rows != visual_embeds.rows) {
        throw std::invalid_argument("fuse: length mismatch (" + std::to_string(audio_embeds.rows) +
                                    " audio rows vs " + std::to_string(visual_embeds.rows) +
                                    " visual rows)");
    }
    MatF fused(audio_embeds.rows, audio_embeds.cols + visual_embeds.cols);
    for (int r = 0; r < fused.rows; ++r) {
        float* dst = fused.row(r);
        std::copy_n(audio_embeds.row(r), audio_embeds.cols, dst);
        std::copy_n(visual_embeds.row(r), visual_embeds.cols, dst + audio_embeds.cols);
    }
    return fused;
}

void split_fused(const MatF& fused, int d_a, MatF* audio_out, MatF* visual_out) {
    if (d_a < 0 || d_a > fused.cols) throw std::invalid_argument("split_fused: bad d_a");
    const int d_v = fused.cols - d_a;
    *audio_out = MatF(fused.rows, d_a);
    *visual_out = MatF(fused.rows, d_v);
    for (int r = 0; r < fused.rows; ++r) {
        std::copy_n(fused.row(r), d_a, audio_out->row(r));
        std::copy_n(fused.row(r) + d_a, d_v, visual_out->row(r));
    }
}

MatF prepend_condition(const MatF& audio_rows, const MatF& visual_rows) {
    if (visual_rows.rows > 0 && audio_rows.cols != visual_rows.cols) {
        throw std::invalid_argument("prepend_condition: width mismatch");
    }
    MatF out(visual_rows.rows + audio_rows.rows, audio_rows.cols);
    for (int r = 0; r < visual_rows.rows; ++r) {
        std::copy_n(visual_rows.row(r), visual_rows.cols, out.row(r));
    }
    for (int r = 0; r < audio_rows.rows; ++r) {
        std::copy_n(audio_rows.row(r), audio_rows.cols, out.row(visual_rows.rows + r));
    }
    return out;
}

}  // namespace vta
