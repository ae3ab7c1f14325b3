#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vta/common.hpp"
#include "vta/sequencer.hpp"
#include "vta/synthworld.hpp"

namespace vta {

// Decoder-only causal transformer over fused audio-visual rows.
// Pre-norm RMSNorm, rotary phases on query/key, SiLU-gated feed-forward,
// summed per-level audio embedding tables, a two-layer GELU projection for
// raw video features, and one classification head per RVQ level.
//
// Training runs in float; gradient checking instantiates the same code in
// double.

struct ModelConfig {
    int d_a = 128;      // audio embedding width
    int d_v = 64;       // visual embedding width
    int d_raw = 16;     // raw video feature channels
    int d_h = 128;      // visual projection hidden width
    int n_layer = 4;
    int n_head = 4;
    int K = 256;        // codebook entries per level; PAD id = K
    int n_q = 4;        // RVQ levels

    int d() const { return d_a + d_v; }
    int head_dim() const { return d() / n_head; }
    int vocab() const { return K + 1; }
    // Gated FFN hidden: 8d/3 rounded to the nearest multiple of 16.
    int ffn_hidden() const { return ((8 * d() / 3) + 8) / 16 * 16; }

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct TensorSpec {
    std::string name;
    size_t offset = 0;
    std::vector<int> dims;
    size_t size = 0;
};

struct ParamLayout {
    struct Block {
        size_t attn_norm, wq, wk, wv, wo, ffn_norm, w_gate, w_up, w_down;
    };
    std::vector<TensorSpec> tensors;
    size_t total = 0;

    std::vector<size_t> embed;  // per level, (K+1) x d_a
    size_t vp_w1 = 0, vp_b1 = 0, vp_w2 = 0, vp_b2 = 0;  // visual projection
    size_t u_cond = 0, v_pad = 0;                        // d_v each
    std::vector<Block> blocks;
    size_t final_norm = 0;
    std::vector<size_t> head_w, head_b;  // (K+1) x d, (K+1)
};

ParamLayout make_layout(const ModelConfig& cfg);

// The audited parameter-count routine; everything that allocates or
// serializes parameters goes through the same layout.
size_t param_count(const ModelConfig& cfg);

template <typename T>
struct Net {
    ModelConfig cfg;
    ParamLayout lay;
    std::vector<T> params;

    T* at(size_t offset) { return params.data() + offset; }
    const T* at(size_t offset) const { return params.data() + offset; }
};

Net<float> make_net(const ModelConfig& cfg, uint64_t seed);
Net<double> to_double(const Net<float>& net);

// --- sequence plans -------------------------------------------------------

enum class VisualSource : uint8_t { none, frame, vpad, ucond };
enum class Conditioning { fusion, prepend };

Conditioning conditioning_from_name(const std::string& name);
const char* conditioning_name(Conditioning c);

// One training/eval item laid out as rows the net consumes directly.
// targets[r * n_q + i] is the id expected from the logits at row r
// (the content of row r+1); kMaskedTarget marks cells without loss.
constexpr int32_t kMaskedTarget = -1;

struct SequencePlan {
    int n_q = 0;
    int K = 0;
    std::vector<uint8_t> has_audio;      // per row
    std::vector<VisualSource> visual;    // per row
    std::vector<int32_t> frame;          // per row, valid when visual==frame
    std::vector<int32_t> audio_cells;    // L x n_q, PAD = K
    std::vector<int32_t> targets;        // L x n_q
    const MatF* video = nullptr;

    int L() const { return static_cast<int>(has_audio.size()); }
};

SequencePlan make_fusion_plan(const DelayedGrid& grid, const AlignmentMap& align,
                              const MatF& video, bool drop_condition);
SequencePlan make_prepend_plan(const DelayedGrid& grid, const MatF& video, bool drop_condition);

// --- spec-level operations -------------------------------------------------

// Row j = sum over levels of E_i[cell(j, i)].
template <typename T>
Mat<T> embed_audio(const DelayedGrid& grid, const Net<T>& net);

// Two affine maps with a GELU between, rows independent.
template <typename T>
Mat<T> project_visual(const MatF& features, const Net<T>& net);

// Transformer + heads over externally built fused rows. Logits at position j
// parameterize the distribution of row j+1, all levels in parallel.
// Output layout: L x n_q x (K+1).
template <typename T>
std::vector<T> forward_fused(const Net<T>& net, const Mat<T>& fused);

struct LossResult {
    double value = 0.0;
    int cells = 0;           // contributing (position, level) cells
    bool empty_mask = false; // no real-token targets anywhere
};

// Mean cross-entropy over cells whose target is a real token; PAD targets
// are excluded. `logits` as produced by forward_fused for the same grid.
template <typename T>
LossResult loss_over_grid(const std::vector<T>& logits, const DelayedGrid& target);

// --- training --------------------------------------------------------------

struct TrainConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double weight_decay = 0.01;
    double cfg_dropout = 0.10;  // unconditional-embedding probability
    int batch_size = 8;
    int steps = 500;
    uint64_t seed = 0;
    double grad_clip = 1.0;
};

struct AdamState {
    std::vector<float> m, v;
    int64_t step = 0;
};

AdamState make_adam_state(const Net<float>& net);

struct TrainItem {
    DelayedGrid grid;
    AlignmentMap align;
    MatF video;
};

struct StepStats {
    double loss = 0.0;
    double grad_norm = 0.0;
    int cells = 0;
};

// Loss + gradient over a batch of plans; grads has param_count entries.
template <typename T>
LossResult batch_gradient(const Net<T>& net, const std::vector<SequencePlan>& plans,
                          std::vector<T>& grads);

// One AdamW step with the per-sample seeded condition dropout. The dropout
// draw for sample i of step s depends only on (cfg.seed, s, i), so training
// resumes bit-exactly from a saved (net, opt) pair.
StepStats train_step(Net<float>& net, AdamState& opt, const std::vector<const TrainItem*>& batch,
                     const TrainConfig& cfg, Conditioning mode);

// Max relative error between analytic and central-difference gradients over
// n_coords coordinates spanning every parameter tensor. Pass
// analytic_override to compare against externally supplied gradients
// (negative-control tests).
double grad_check(const Net<double>& net, const std::vector<SequencePlan>& plans, int n_coords,
                  uint64_t seed, const std::vector<double>* analytic_override = nullptr);

// --- incremental decoding ---------------------------------------------------

// Per-layer key/value history. Appending rows through forward_step produces
// bit-identical values to the full-sequence path.
struct KvCache {
    int len = 0;
    std::vector<std::vector<float>> k, v;  // per layer, capacity x d

    void reset(const ModelConfig& cfg, int capacity);
};

// Feeds one fused row at position cache.len; returns this row's logits
// (n_q x (K+1)).
void forward_step(const Net<float>& net, const float* fused_row, KvCache& cache,
                  std::vector<float>& logits_out);

// Builds one fused row from plan row r (embedding lookup + visual source).
template <typename T>
void build_fused_row_t(const Net<T>& net, const SequencePlan& plan, int r, T* out);

inline void build_fused_row(const Net<float>& net, const SequencePlan& plan, int r, float* out) {
    build_fused_row_t<float>(net, plan, r, out);
}

// --- checkpoint io -----------------------------------------------------------
// "VCKP": version u16, hyperparameter block, named tensor directory.

constexpr uint16_t kVckpVersion = 1;
void write_checkpoint(const std::string& path, const Net<float>& net,
                      const AdamState* opt = nullptr);
Net<float> read_checkpoint(const std::string& path, AdamState* opt = nullptr);

}  // namespace vta
