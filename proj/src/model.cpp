#include "vta/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <stdexcept>

#include "vta/errors.hpp"
#include "vta/io.hpp"
#include "vta/rng.hpp"

namespace vta {

void ModelConfig::validate() const {
    if (d_a < 1 || d_v < 1 || d_raw < 1 || d_h < 1) {
        throw std::invalid_argument("model dims must be positive");
    }
    if (n_layer < 1 || n_head < 1 || K < 2 || n_q < 1) {
        throw std::invalid_argument("n_layer, n_head, K, n_q out of range");
    }
    if (d() % (2 * n_head) != 0) {
        throw std::invalid_argument("d = d_a + d_v must be divisible by 2*n_head for rotary pairs");
    }
}

ParamLayout make_layout(const ModelConfig& cfg) {
    cfg.validate();
    ParamLayout lay;
    size_t off = 0;
    auto add = [&](const std::string& name, std::vector<int> dims) {
        size_t n = 1;
        for (int d : dims) n *= static_cast<size_t>(d);
        lay.tensors.push_back({name, off, std::move(dims), n});
        const size_t at = off;
        off += n;
        return at;
    };

    for (int i = 0; i < cfg.n_q; ++i) {
        lay.embed.push_back(add("embed." + std::to_string(i), {cfg.vocab(), cfg.d_a}));
    }
    lay.vp_w1 = add("visual_proj.w1", {cfg.d_h, cfg.d_raw});
    lay.vp_b1 = add("visual_proj.b1", {cfg.d_h});
    lay.vp_w2 = add("visual_proj.w2", {cfg.d_v, cfg.d_h});
    lay.vp_b2 = add("visual_proj.b2", {cfg.d_v});
    lay.u_cond = add("u_cond", {cfg.d_v});
    lay.v_pad = add("v_pad", {cfg.d_v});

    const int d = cfg.d();
    const int f = cfg.ffn_hidden();
    for (int l = 0; l < cfg.n_layer; ++l) {
        const std::string p = "block." + std::to_string(l) + ".";
        ParamLayout::Block b;
        b.attn_norm = add(p + "attn_norm", {d});
        b.wq = add(p + "wq", {d, d});
        b.wk = add(p + "wk", {d, d});
        b.wv = add(p + "wv", {d, d});
        b.wo = add(p + "wo", {d, d});
        b.ffn_norm = add(p + "ffn_norm", {d});
        b.w_gate = add(p + "w_gate", {f, d});
        b.w_up = add(p + "w_up", {f, d});
        b.w_down = add(p + "w_down", {d, f});
        lay.blocks.push_back(b);
    }
    lay.final_norm = add("final_norm", {d});
    for (int i = 0; i < cfg.n_q; ++i) {
        lay.head_w.push_back(add("head." + std::to_string(i) + ".w", {cfg.vocab(), d}));
        lay.head_b.push_back(add("head." + std::to_string(i) + ".b", {cfg.vocab()}));
    }
    lay.total = off;
    return lay;
}

size_t param_count(const ModelConfig& cfg) { return make_layout(cfg).total; }

Net<float> make_net(const ModelConfig& cfg, uint64_t seed) {
    Net<float> net;
    net.cfg = cfg;
    net.lay = make_layout(cfg);
    net.params.assign(net.lay.total, 0.0f);

    Rng rng(derive_seed(seed, 0x696e6974ULL));  // "init"
    const double base_std = 0.02;
    const double resid_std = base_std / std::sqrt(2.0 * cfg.n_layer);

    for (const TensorSpec& t : net.lay.tensors) {
        float* p = net.at(t.offset);
        const bool is_norm = t.name.find("norm") != std::string::npos;
        const bool is_bias = t.name.ends_with(".b") || t.name.ends_with("b1") ||
                             t.name.ends_with("b2");
        const bool is_resid_proj = t.name.ends_with(".wo") || t.name.ends_with(".w_down");
        if (is_norm) {
            std::fill_n(p, t.size, 1.0f);
        } else if (is_bias) {
            std::fill_n(p, t.size, 0.0f);
        } else {
            const double std = is_resid_proj ? resid_std : base_std;
            for (size_t i = 0; i < t.size; ++i) p[i] = static_cast<float>(rng.normal(0.0, std));
        }
    }
    return net;
}

Net<double> to_double(const Net<float>& net) {
    Net<double> out;
    out.cfg = net.cfg;
    out.lay = net.lay;
    out.params.assign(net.params.begin(), net.params.end());
    return out;
}

Conditioning conditioning_from_name(const std::string& name) {
    if (name == "fusion") return Conditioning::fusion;
    if (name == "prepend") return Conditioning::prepend;
    throw std::invalid_argument("unknown conditioning mode: " + name);
}

const char* conditioning_name(Conditioning c) {
    return c == Conditioning::fusion ? "fusion" : "prepend";
}

// --- plans ------------------------------------------------------------------

namespace {

void fill_targets_from_rows(SequencePlan& plan, int first_audio_row, const DelayedGrid& grid) {
    // Logits at row r predict row r+1; only real-token cells carry loss.
    const int L = plan.L();
    plan.targets.assign(static_cast<size_t>(L) * plan.n_q, kMaskedTarget);
    for (int r = 0; r + 1 < L; ++r) {
        const int next_grid_row = r + 1 - first_audio_row;
        if (next_grid_row < 0 || next_grid_row >= grid.L()) continue;
        for (int i = 0; i < plan.n_q; ++i) {
            const int32_t id = grid.at(next_grid_row, i);
            if (id != grid.pad_id()) plan.targets[static_cast<size_t>(r) * plan.n_q + i] = id;
        }
    }
}

}  // namespace

SequencePlan make_fusion_plan(const DelayedGrid& grid, const AlignmentMap& align,
                              const MatF& video, bool drop_condition) {
    if (align.t_a != grid.t_a || align.n_q != grid.n_q) {
        throw std::invalid_argument("alignment map does not match grid");
    }
    const int L = grid.L();
    SequencePlan plan;
    plan.n_q = grid.n_q;
    plan.K = grid.K;
    plan.video = &video;
    plan.has_audio.assign(L, 1);
    plan.visual.resize(L);
    plan.frame.assign(L, -1);
    plan.audio_cells = grid.cells;
    for (int r = 0; r < L; ++r) {
        if (drop_condition) {
            plan.visual[r] = VisualSource::ucond;
        } else if (align.frame_of[r] == kVisualPad) {
            plan.visual[r] = VisualSource::vpad;
        } else {
            plan.visual[r] = VisualSource::frame;
            plan.frame[r] = align.frame_of[r];
        }
    }
    fill_targets_from_rows(plan, 0, grid);
    return plan;
}

SequencePlan make_prepend_plan(const DelayedGrid& grid, const MatF& video, bool drop_condition) {
    const int t_v = video.rows;
    const int L = t_v + grid.L();
    SequencePlan plan;
    plan.n_q = grid.n_q;
    plan.K = grid.K;
    plan.video = &video;
    plan.has_audio.assign(L, 0);
    plan.visual.assign(L, VisualSource::none);
    plan.frame.assign(L, -1);
    plan.audio_cells.assign(static_cast<size_t>(L) * grid.n_q, grid.K);
    for (int r = 0; r < t_v; ++r) {
        plan.visual[r] = drop_condition ? VisualSource::ucond : VisualSource::frame;
        plan.frame[r] = r;
    }
    for (int r = 0; r < grid.L(); ++r) {
        plan.has_audio[t_v + r] = 1;
        for (int i = 0; i < grid.n_q; ++i) {
            plan.audio_cells[static_cast<size_t>(t_v + r) * grid.n_q + i] = grid.at(r, i);
        }
    }
    fill_targets_from_rows(plan, t_v, grid);
    return plan;
}

// --- training ----------------------------------------------------------------

AdamState make_adam_state(const Net<float>& net) {
    AdamState s;
    s.m.assign(net.params.size(), 0.0f);
    s.v.assign(net.params.size(), 0.0f);
    s.step = 0;
    return s;
}

StepStats train_step(Net<float>& net, AdamState& opt, const std::vector<const TrainItem*>& batch,
                     const TrainConfig& cfg, Conditioning mode) {
    if (batch.empty()) throw std::invalid_argument("empty batch");

    std::vector<SequencePlan> plans;
    plans.reserve(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        Rng rng(derive_seed(cfg.seed, static_cast<uint64_t>(opt.step) + 0x64726f70ULL,
                            static_cast<uint64_t>(i)));
        const bool drop = rng.uniform() < cfg.cfg_dropout;
        const TrainItem& it = *batch[i];
        plans.push_back(mode == Conditioning::fusion
                            ? make_fusion_plan(it.grid, it.align, it.video, drop)
                            : make_prepend_plan(it.grid, it.video, drop));
    }

    std::vector<float> grads;
    const LossResult loss = batch_gradient(net, plans, grads);
    if (!std::isfinite(loss.value)) {
        throw numeric_error("non-finite training loss at step " + std::to_string(opt.step));
    }

    double norm_sq = 0.0;
    for (float g : grads) norm_sq += static_cast<double>(g) * g;
    const double grad_norm = std::sqrt(norm_sq);
    const double clip_scale =
        (cfg.grad_clip > 0.0 && grad_norm > cfg.grad_clip) ? cfg.grad_clip / grad_norm : 1.0;

    opt.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step));
    const size_t n = net.params.size();
    for (size_t i = 0; i < n; ++i) {
        const double g = grads[i] * clip_scale;
        const double m = cfg.beta1 * opt.m[i] + (1.0 - cfg.beta1) * g;
        const double v = cfg.beta2 * opt.v[i] + (1.0 - cfg.beta2) * g * g;
        opt.m[i] = static_cast<float>(m);
        opt.v[i] = static_cast<float>(v);
        const double update = (m / bc1) / (std::sqrt(v / bc2) + 1e-8);
        const double p = net.params[i];
        net.params[i] = static_cast<float>(p - cfg.lr * (update + cfg.weight_decay * p));
    }

    return {loss.value, grad_norm, loss.cells};
}

// --- gradient check ------------------------------------------------------------

namespace {

double plans_loss(const Net<double>& net, const std::vector<SequencePlan>& plans) {
    double total = 0.0;
    for (const SequencePlan& plan : plans) {
        Mat<double> fused(plan.L(), net.cfg.d());
        for (int r = 0; r < plan.L(); ++r) {
            build_fused_row_t<double>(net, plan, r, fused.row(r));
        }
        const std::vector<double> logits = forward_fused(net, fused);
        double item = 0.0;
        int cells = 0;
        const int vocab = net.cfg.vocab();
        for (int r = 0; r < plan.L(); ++r) {
            for (int i = 0; i < plan.n_q; ++i) {
                const int32_t tgt = plan.targets[static_cast<size_t>(r) * plan.n_q + i];
                if (tgt < 0) continue;
                const double* lr = logits.data() + (static_cast<size_t>(r) * plan.n_q + i) * vocab;
                double mx = lr[0];
                for (int j = 1; j < vocab; ++j) mx = std::max(mx, lr[j]);
                double lse = 0.0;
                for (int j = 0; j < vocab; ++j) lse += std::exp(lr[j] - mx);
                item += (mx + std::log(lse)) - lr[tgt];
                ++cells;
            }
        }
        if (cells > 0) total += item / cells;
    }
    return total / static_cast<double>(plans.size());
}

}  // namespace

double grad_check(const Net<double>& net, const std::vector<SequencePlan>& plans, int n_coords,
                  uint64_t seed, const std::vector<double>* analytic_override) {
    std::vector<double> analytic;
    if (analytic_override) {
        analytic = *analytic_override;
    } else {
        batch_gradient(net, plans, analytic);
    }

    // Used audio-embedding rows; unused rows have exactly zero gradient and
    // zero difference, which the magnitude guard would skip anyway.
    std::set<int32_t> used_ids;
    for (const SequencePlan& plan : plans) {
        for (int32_t id : plan.audio_cells) used_ids.insert(id);
    }

    Rng rng(derive_seed(seed, 0x67636b21ULL));
    std::vector<size_t> coords;
    const int per_tensor = std::max(1, n_coords / static_cast<int>(net.lay.tensors.size()));
    for (const TensorSpec& t : net.lay.tensors) {
        for (int c = 0; c < per_tensor; ++c) {
            size_t idx;
            if (t.name.rfind("embed.", 0) == 0 && !used_ids.empty()) {
                const int d_a = net.cfg.d_a;
                auto it = used_ids.begin();
                std::advance(it, static_cast<long>(rng.uniform_index(used_ids.size())));
                idx = static_cast<size_t>(*it) * d_a + rng.uniform_index(d_a);
            } else {
                idx = rng.uniform_index(t.size);
            }
            coords.push_back(t.offset + idx);
        }
    }

    Net<double> probe = net;
    const double h = 1e-5;
    double max_rel = 0.0;
    for (size_t coord : coords) {
        const double saved = probe.params[coord];
        probe.params[coord] = saved + h;
        const double f_plus = plans_loss(probe, plans);
        probe.params[coord] = saved - h;
        const double f_minus = plans_loss(probe, plans);
        probe.params[coord] = saved;
        const double g_fd = (f_plus - f_minus) / (2.0 * h);
        const double g_an = analytic[coord];
        const double mag = std::max(std::abs(g_fd), std::abs(g_an));
        if (mag < 1e-12) continue;  // both effectively zero
        max_rel = std::max(max_rel, std::abs(g_fd - g_an) / mag);
    }
    return max_rel;
}

// --- checkpoint io ---------------------------------------------------------------

void write_checkpoint(const std::string& path, const Net<float>& net, const AdamState* opt) {
    BinWriter w(path);
    w.magic("VCKP");
    w.u16(kVckpVersion);
    const ModelConfig& c = net.cfg;
    for (int v : {c.d_a, c.d_v, c.d_raw, c.d_h, c.n_layer, c.n_head, c.K, c.n_q}) {
        w.u32(static_cast<uint32_t>(v));
    }

    const uint32_t extra = opt ? 3u : 0u;
    w.u32(static_cast<uint32_t>(net.lay.tensors.size()) + extra);
    auto emit = [&](const std::string& name, const std::vector<int>& dims, const float* data,
                    size_t n) {
        w.u16(static_cast<uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        const uint8_t rank = static_cast<uint8_t>(dims.size());
        w.bytes(&rank, 1);
        for (int d : dims) w.u32(static_cast<uint32_t>(d));
        w.f32_array(data, n);
    };
    for (const TensorSpec& t : net.lay.tensors) {
        emit(t.name, t.dims, net.params.data() + t.offset, t.size);
    }
    if (opt) {
        const int total = static_cast<int>(net.lay.total);
        emit("opt.m", {total}, opt->m.data(), opt->m.size());
        emit("opt.v", {total}, opt->v.data(), opt->v.size());
        const float step = static_cast<float>(opt->step);
        emit("opt.step", {1}, &step, 1);
    }
    w.close();
}

Net<float> read_checkpoint(const std::string& path, AdamState* opt) {
    BinReader r(path);
    r.expect_magic("VCKP");
    check_version(path, r.u16(), kVckpVersion);
    ModelConfig cfg;
    cfg.d_a = static_cast<int>(r.u32());
    cfg.d_v = static_cast<int>(r.u32());
    cfg.d_raw = static_cast<int>(r.u32());
    cfg.d_h = static_cast<int>(r.u32());
    cfg.n_layer = static_cast<int>(r.u32());
    cfg.n_head = static_cast<int>(r.u32());
    cfg.K = static_cast<int>(r.u32());
    cfg.n_q = static_cast<int>(r.u32());

    Net<float> net;
    net.cfg = cfg;
    net.lay = make_layout(cfg);
    net.params.assign(net.lay.total, 0.0f);
    if (opt) {
        opt->m.assign(net.lay.total, 0.0f);
        opt->v.assign(net.lay.total, 0.0f);
        opt->step = 0;
    }

    const uint32_t count = r.u32();
    std::set<std::string> seen;
    for (uint32_t t = 0; t < count; ++t) {
        const uint16_t name_len = r.u16();
        std::string name(name_len, '\0');
        r.bytes(name.data(), name_len);
        uint8_t rank = 0;
        r.bytes(&rank, 1);
        size_t n = 1;
        std::vector<int> dims(rank);
        for (int i = 0; i < rank; ++i) {
            dims[i] = static_cast<int>(r.u32());
            n *= static_cast<size_t>(dims[i]);
        }
        std::vector<float> data(n);
        r.f32_array(data.data(), n);

        if (name == "opt.m" || name == "opt.v" || name == "opt.step") {
            if (!opt) continue;
            if (name == "opt.step") {
                opt->step = static_cast<int64_t>(data.at(0));
            } else if (n == net.lay.total) {
                (name == "opt.m" ? opt->m : opt->v) = std::move(data);
            } else {
                throw artifact_mismatch_error(path + ": optimizer state size mismatch");
            }
            continue;
        }
        const auto it = std::find_if(net.lay.tensors.begin(), net.lay.tensors.end(),
                                     [&](const TensorSpec& s) { return s.name == name; });
        if (it == net.lay.tensors.end()) {
            throw artifact_mismatch_error(path + ": unknown tensor '" + name + "'");
        }
        if (it->dims != dims) {
            throw artifact_mismatch_error(path + ": tensor '" + name + "' has unexpected shape");
        }
        std::copy(data.begin(), data.end(), net.params.begin() + static_cast<long>(it->offset));
        seen.insert(name);
    }
    if (seen.size() != net.lay.tensors.size()) {
        throw artifact_mismatch_error(path + ": checkpoint is missing parameter tensors");
    }
    return net;
}

}  // namespace vta
