#include <cmath>
#include <cstring>
#include <stdexcept>

#include "vta/errors.hpp"
#include "vta/model.hpp"

// Forward/backward passes of the fused-sequence transformer. The same row
// arithmetic backs the full-sequence path (training, spec-level forward) and
// the incremental path (generation with a KV cache), so the two agree
// bit-for-bit.

namespace vta {

namespace {

constexpr double kRmsEps = 1e-5;

template <typename T>
void matvec(T* y, const T* w, const T* x, int out_dim, int in_dim) {
    for (int o = 0; o < out_dim; ++o) y[o] = dot(w + static_cast<size_t>(o) * in_dim, x, in_dim);
}

template <typename T>
void matvec_add_bias(T* y, const T* w, const T* b, const T* x, int out_dim, int in_dim) {
    for (int o = 0; o < out_dim; ++o) {
        y[o] = dot(w + static_cast<size_t>(o) * in_dim, x, in_dim) + b[o];
    }
}

// dx += W^T dy
template <typename T>
void matvec_transpose_acc(T* dx, const T* w, const T* dy, int out_dim, int in_dim) {
    for (int o = 0; o < out_dim; ++o) axpy(dy[o], w + static_cast<size_t>(o) * in_dim, dx, in_dim);
}

// dW += dy x^T
template <typename T>
void outer_acc(T* dw, const T* dy, const T* x, int out_dim, int in_dim) {
    for (int o = 0; o < out_dim; ++o) axpy(dy[o], x, dw + static_cast<size_t>(o) * in_dim, in_dim);
}

template <typename T>
T rms_inv(const T* x, int d) {
    T acc = dot(x, x, d);
    return T(1) / std::sqrt(acc / T(d) + T(kRmsEps));
}

template <typename T>
void rmsnorm_row(const T* x, const T* gain, int d, T* y, T* inv_out) {
    const T inv = rms_inv(x, d);
    *inv_out = inv;
    for (int i = 0; i < d; ++i) y[i] = x[i] * inv * gain[i];
}

// Accumulates into dx and dgain given stored x and inv.
template <typename T>
void rmsnorm_backward(const T* x, const T* gain, const T* dy, T inv, int d, T* dx, T* dgain) {
    T mean_tx = T(0);
    for (int i = 0; i < d; ++i) mean_tx += dy[i] * gain[i] * x[i];
    mean_tx /= T(d);
    const T inv3 = inv * inv * inv;
    for (int i = 0; i < d; ++i) {
        dx[i] += dy[i] * gain[i] * inv - x[i] * inv3 * mean_tx;
        dgain[i] += dy[i] * x[i] * inv;
    }
}

template <typename T>
void rope_rotate(T* row, int d, int n_head, int pos, bool inverse) {
    const int hd = d / n_head;
    for (int h = 0; h < n_head; ++h) {
        T* hr = row + h * hd;
        for (int p = 0; p < hd / 2; ++p) {
            const double theta = pos * std::pow(10000.0, -2.0 * p / hd);
            const T c = static_cast<T>(std::cos(theta));
            const T s0 = static_cast<T>(std::sin(theta));
            const T s = inverse ? -s0 : s0;
            const T a = hr[2 * p];
            const T b = hr[2 * p + 1];
            hr[2 * p] = a * c - b * s;
            hr[2 * p + 1] = a * s + b * c;
        }
    }
}

template <typename T>
T silu(T x) {
    return x / (T(1) + std::exp(-x));
}

template <typename T>
T silu_grad(T x) {
    const T s = T(1) / (T(1) + std::exp(-x));
    return s * (T(1) + x * (T(1) - s));
}

template <typename T>
T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(M_SQRT1_2)));
}

template <typename T>
T gelu_grad(T x) {
    const T phi_big = T(0.5) * (T(1) + std::erf(x * T(M_SQRT1_2)));
    const T phi_small = std::exp(T(-0.5) * x * x) * T(0.3989422804014327);
    return phi_big + x * phi_small;
}

// Attention over rows 0..pos using k/v histories laid out as rows of width d.
// Writes softmax probabilities (length pos+1) into prow and the head output
// into out (width hd). Shared verbatim by both forward paths.
template <typename T>
void attend_head(const T* q_head, const T* k_hist, const T* v_hist, int d, int hd, int pos,
                 T inv_sqrt_hd, T* prow, T* out) {
    for (int t = 0; t <= pos; ++t) {
        prow[t] = dot(q_head, k_hist + static_cast<size_t>(t) * d, hd) * inv_sqrt_hd;
    }
    T mx = prow[0];
    for (int t = 1; t <= pos; ++t) mx = std::max(mx, prow[t]);
    T sum = T(0);
    for (int t = 0; t <= pos; ++t) {
        prow[t] = std::exp(prow[t] - mx);
        sum += prow[t];
    }
    const T inv = T(1) / sum;
    for (int t = 0; t <= pos; ++t) prow[t] *= inv;
    std::fill_n(out, hd, T(0));
    for (int t = 0; t <= pos; ++t) axpy(prow[t], v_hist + static_cast<size_t>(t) * d, out, hd);
}

template <typename T>
struct Acts {
    int L = 0;
    std::vector<T> x;          // L x d fused input
    std::vector<T> vp_hidden;  // L x d_h pre-GELU (frame rows only)
    struct Layer {
        std::vector<T> ln1, q, k, v, att_o, h_mid, ln2, h_out;  // L x d
        std::vector<T> gate, up, act;                           // L x f
        std::vector<T> rms1, rms2;                              // L
        std::vector<T> probs;                                   // n_head x L x L
    };
    std::vector<Layer> layers;
    std::vector<T> hf, rmsf;  // L x d, L
    std::vector<T> logits;    // L x n_q x vocab
};

template <typename T>
void acts_resize(Acts<T>& A, const ModelConfig& cfg, int L) {
    const size_t ld = static_cast<size_t>(L) * cfg.d();
    const size_t lf = static_cast<size_t>(L) * cfg.ffn_hidden();
    A.L = L;
    A.x.assign(ld, T(0));
    A.vp_hidden.assign(static_cast<size_t>(L) * cfg.d_h, T(0));
    A.layers.resize(cfg.n_layer);
    for (auto& layer : A.layers) {
        for (auto* m : {&layer.ln1, &layer.q, &layer.k, &layer.v, &layer.att_o, &layer.h_mid,
                        &layer.ln2, &layer.h_out}) {
            m->assign(ld, T(0));
        }
        for (auto* m : {&layer.gate, &layer.up, &layer.act}) m->assign(lf, T(0));
        layer.rms1.assign(L, T(0));
        layer.rms2.assign(L, T(0));
        layer.probs.assign(static_cast<size_t>(cfg.n_head) * L * L, T(0));
    }
    A.hf.assign(ld, T(0));
    A.rmsf.assign(L, T(0));
    A.logits.assign(static_cast<size_t>(L) * cfg.n_q * cfg.vocab(), T(0));
}

// Transformer blocks + heads over embeddings already placed in A.x.
template <typename T>
void forward_core(const Net<T>& net, Acts<T>& A) {
    const ModelConfig& cfg = net.cfg;
    const int L = A.L;
    const int d = cfg.d();
    const int f = cfg.ffn_hidden();
    const int hd = cfg.head_dim();
    const T inv_sqrt_hd = T(1) / std::sqrt(T(hd));

    const T* h_in = A.x.data();
    for (int l = 0; l < cfg.n_layer; ++l) {
        auto& ly = A.layers[l];
        const auto& b = net.lay.blocks[l];
        for (int r = 0; r < L; ++r) {
            rmsnorm_row(h_in + static_cast<size_t>(r) * d, net.at(b.attn_norm), d,
                        ly.ln1.data() + static_cast<size_t>(r) * d, &ly.rms1[r]);
        }
        for (int r = 0; r < L; ++r) {
            const T* ln = ly.ln1.data() + static_cast<size_t>(r) * d;
            T* q = ly.q.data() + static_cast<size_t>(r) * d;
            T* k = ly.k.data() + static_cast<size_t>(r) * d;
            T* v = ly.v.data() + static_cast<size_t>(r) * d;
            matvec(q, net.at(b.wq), ln, d, d);
            matvec(k, net.at(b.wk), ln, d, d);
            matvec(v, net.at(b.wv), ln, d, d);
            rope_rotate(q, d, cfg.n_head, r, false);
            rope_rotate(k, d, cfg.n_head, r, false);
        }
        for (int r = 0; r < L; ++r) {
            for (int h = 0; h < cfg.n_head; ++h) {
                attend_head(ly.q.data() + static_cast<size_t>(r) * d + h * hd, ly.k.data() + h * hd,
                            ly.v.data() + h * hd, d, hd, r, inv_sqrt_hd,
                            ly.probs.data() + (static_cast<size_t>(h) * L + r) * L,
                            ly.att_o.data() + static_cast<size_t>(r) * d + h * hd);
            }
        }
        for (int r = 0; r < L; ++r) {
            T* mid = ly.h_mid.data() + static_cast<size_t>(r) * d;
            matvec(mid, net.at(b.wo), ly.att_o.data() + static_cast<size_t>(r) * d, d, d);
            const T* in = h_in + static_cast<size_t>(r) * d;
            for (int i = 0; i < d; ++i) mid[i] += in[i];
        }
        for (int r = 0; r < L; ++r) {
            const size_t rd = static_cast<size_t>(r) * d;
            const size_t rf = static_cast<size_t>(r) * f;
            rmsnorm_row(ly.h_mid.data() + rd, net.at(b.ffn_norm), d, ly.ln2.data() + rd,
                        &ly.rms2[r]);
            matvec(ly.gate.data() + rf, net.at(b.w_gate), ly.ln2.data() + rd, f, d);
            matvec(ly.up.data() + rf, net.at(b.w_up), ly.ln2.data() + rd, f, d);
            for (int i = 0; i < f; ++i) {
                ly.act[rf + i] = silu(ly.gate[rf + i]) * ly.up[rf + i];
            }
            T* out = ly.h_out.data() + rd;
            matvec(out, net.at(b.w_down), ly.act.data() + rf, d, f);
            const T* mid = ly.h_mid.data() + rd;
            for (int i = 0; i < d; ++i) out[i] += mid[i];
        }
        h_in = ly.h_out.data();
    }

    for (int r = 0; r < L; ++r) {
        rmsnorm_row(h_in + static_cast<size_t>(r) * d, net.at(net.lay.final_norm), d,
                    A.hf.data() + static_cast<size_t>(r) * d, &A.rmsf[r]);
    }
    const int vocab = cfg.vocab();
    for (int r = 0; r < L; ++r) {
        for (int i = 0; i < cfg.n_q; ++i) {
            matvec_add_bias(A.logits.data() + (static_cast<size_t>(r) * cfg.n_q + i) * vocab,
                            net.at(net.lay.head_w[i]), net.at(net.lay.head_b[i]),
                            A.hf.data() + static_cast<size_t>(r) * d, vocab, d);
        }
    }
}

template <typename T>
void check_cell_range(int32_t id, int K) {
    if (id < 0 || id > K) {
        throw invalid_token_error("embedding id " + std::to_string(id) + " outside [0, " +
                                  std::to_string(K) + "]");
    }
}

// Loss + dlogits for one plan. dlogits may be null (loss only).
template <typename T>
LossResult plan_loss(const ModelConfig& cfg, const std::vector<T>& logits,
                     const std::vector<int32_t>& targets, int L, std::vector<T>* dlogits) {
    const int vocab = cfg.vocab();
    if (dlogits) dlogits->assign(logits.size(), T(0));
    double total = 0.0;
    int cells = 0;
    for (int r = 0; r < L; ++r) {
        for (int i = 0; i < cfg.n_q; ++i) {
            const int32_t tgt = targets[static_cast<size_t>(r) * cfg.n_q + i];
            if (tgt < 0) continue;
            ++cells;
            const size_t base = (static_cast<size_t>(r) * cfg.n_q + i) * vocab;
            const T* lr = logits.data() + base;
            T mx = lr[0];
            for (int j = 1; j < vocab; ++j) mx = std::max(mx, lr[j]);
            T sum = T(0);
            for (int j = 0; j < vocab; ++j) sum += std::exp(lr[j] - mx);
            total += static_cast<double>(mx) + std::log(static_cast<double>(sum)) -
                     static_cast<double>(lr[tgt]);
            if (dlogits) {
                T* dl = dlogits->data() + base;
                const T inv = T(1) / sum;
                for (int j = 0; j < vocab; ++j) dl[j] = std::exp(lr[j] - mx) * inv;
                dl[tgt] -= T(1);
            }
        }
    }
    LossResult res;
    res.cells = cells;
    res.empty_mask = cells == 0;
    res.value = cells > 0 ? total / cells : 0.0;
    return res;
}

// Backward through blocks and embeddings for one plan. dlogits must already
// carry the loss scale.
template <typename T>
void backward_core(const Net<T>& net, const SequencePlan& plan, const Acts<T>& A,
                   const std::vector<T>& dlogits, T* grads) {
    const ModelConfig& cfg = net.cfg;
    const int L = A.L;
    const int d = cfg.d();
    const int f = cfg.ffn_hidden();
    const int hd = cfg.head_dim();
    const int vocab = cfg.vocab();
    const T inv_sqrt_hd = T(1) / std::sqrt(T(hd));

    std::vector<T> dh(static_cast<size_t>(L) * d, T(0));

    // Heads and final norm.
    {
        std::vector<T> dhf(static_cast<size_t>(L) * d, T(0));
        for (int r = 0; r < L; ++r) {
            for (int i = 0; i < cfg.n_q; ++i) {
                const size_t base = (static_cast<size_t>(r) * cfg.n_q + i) * vocab;
                const T* dl = dlogits.data() + base;
                bool any = false;
                for (int j = 0; j < vocab; ++j) {
                    if (dl[j] != T(0)) {
                        any = true;
                        break;
                    }
                }
                if (!any) continue;
                outer_acc(grads + net.lay.head_w[i], dl, A.hf.data() + static_cast<size_t>(r) * d,
                          vocab, d);
                axpy(T(1), dl, grads + net.lay.head_b[i], vocab);
                matvec_transpose_acc(dhf.data() + static_cast<size_t>(r) * d,
                                     net.at(net.lay.head_w[i]), dl, vocab, d);
            }
        }
        const T* h_last =
            cfg.n_layer > 0 ? A.layers.back().h_out.data() : A.x.data();
        for (int r = 0; r < L; ++r) {
            rmsnorm_backward(h_last + static_cast<size_t>(r) * d, net.at(net.lay.final_norm),
                             dhf.data() + static_cast<size_t>(r) * d, A.rmsf[r], d,
                             dh.data() + static_cast<size_t>(r) * d, grads + net.lay.final_norm);
        }
    }

    std::vector<T> dmid(static_cast<size_t>(L) * d);
    std::vector<T> dln(static_cast<size_t>(L) * d);
    std::vector<T> dgate(f), dup(f), dact(f);
    std::vector<T> dq(static_cast<size_t>(L) * d), dk(static_cast<size_t>(L) * d),
        dv(static_cast<size_t>(L) * d);
    std::vector<T> dp(L);

    for (int l = cfg.n_layer - 1; l >= 0; --l) {
        const auto& ly = A.layers[l];
        const auto& b = net.lay.blocks[l];
        const T* h_in = l == 0 ? A.x.data() : A.layers[l - 1].h_out.data();

        // FFN: h_out = h_mid + Wd (silu(Wg ln2) * Wu ln2)
        std::copy(dh.begin(), dh.end(), dmid.begin());
        std::fill(dln.begin(), dln.end(), T(0));
        for (int r = 0; r < L; ++r) {
            const size_t rd = static_cast<size_t>(r) * d;
            const size_t rf = static_cast<size_t>(r) * f;
            const T* dout = dh.data() + rd;
            outer_acc(grads + b.w_down, dout, ly.act.data() + rf, d, f);
            std::fill(dact.begin(), dact.end(), T(0));
            matvec_transpose_acc(dact.data(), net.at(b.w_down), dout, d, f);
            for (int i = 0; i < f; ++i) {
                const T g = ly.gate[rf + i];
                dgate[i] = dact[i] * ly.up[rf + i] * silu_grad(g);
                dup[i] = dact[i] * silu(g);
            }
            outer_acc(grads + b.w_gate, dgate.data(), ly.ln2.data() + rd, f, d);
            outer_acc(grads + b.w_up, dup.data(), ly.ln2.data() + rd, f, d);
            matvec_transpose_acc(dln.data() + rd, net.at(b.w_gate), dgate.data(), f, d);
            matvec_transpose_acc(dln.data() + rd, net.at(b.w_up), dup.data(), f, d);
        }
        for (int r = 0; r < L; ++r) {
            const size_t rd = static_cast<size_t>(r) * d;
            rmsnorm_backward(ly.h_mid.data() + rd, net.at(b.ffn_norm), dln.data() + rd, ly.rms2[r],
                             d, dmid.data() + rd, grads + b.ffn_norm);
        }

        // Attention: h_mid = h_in + Wo att_o
        std::copy(dmid.begin(), dmid.end(), dh.begin());  // dh now holds d(h_in) partial
        std::fill(dq.begin(), dq.end(), T(0));
        std::fill(dk.begin(), dk.end(), T(0));
        std::fill(dv.begin(), dv.end(), T(0));
        std::fill(dln.begin(), dln.end(), T(0));
        std::vector<T> dao(d);
        for (int r = 0; r < L; ++r) {
            const size_t rd = static_cast<size_t>(r) * d;
            const T* datt = dmid.data() + rd;
            outer_acc(grads + b.wo, datt, ly.att_o.data() + rd, d, d);
            std::fill(dao.begin(), dao.end(), T(0));
            matvec_transpose_acc(dao.data(), net.at(b.wo), datt, d, d);
            for (int h = 0; h < cfg.n_head; ++h) {
                const T* dor = dao.data() + h * hd;
                const T* prow = ly.probs.data() + (static_cast<size_t>(h) * L + r) * L;
                T dot_pp = T(0);
                for (int t = 0; t <= r; ++t) {
                    dp[t] = dot(dor, ly.v.data() + static_cast<size_t>(t) * d + h * hd, hd);
                    dot_pp += dp[t] * prow[t];
                }
                for (int t = 0; t <= r; ++t) {
                    const T ds = prow[t] * (dp[t] - dot_pp) * inv_sqrt_hd;
                    axpy(ds, ly.k.data() + static_cast<size_t>(t) * d + h * hd, dq.data() + rd + h * hd,
                         hd);
                    axpy(ds, ly.q.data() + rd + h * hd,
                         dk.data() + static_cast<size_t>(t) * d + h * hd, hd);
                    axpy(prow[t], dor, dv.data() + static_cast<size_t>(t) * d + h * hd, hd);
                }
            }
        }
        for (int r = 0; r < L; ++r) {
            const size_t rd = static_cast<size_t>(r) * d;
            rope_rotate(dq.data() + rd, d, cfg.n_head, r, true);
            rope_rotate(dk.data() + rd, d, cfg.n_head, r, true);
            outer_acc(grads + b.wq, dq.data() + rd, ly.ln1.data() + rd, d, d);
            outer_acc(grads + b.wk, dk.data() + rd, ly.ln1.data() + rd, d, d);
            outer_acc(grads + b.wv, dv.data() + rd, ly.ln1.data() + rd, d, d);
            matvec_transpose_acc(dln.data() + rd, net.at(b.wq), dq.data() + rd, d, d);
            matvec_transpose_acc(dln.data() + rd, net.at(b.wk), dk.data() + rd, d, d);
            matvec_transpose_acc(dln.data() + rd, net.at(b.wv), dv.data() + rd, d, d);
        }
        for (int r = 0; r < L; ++r) {
            const size_t rd = static_cast<size_t>(r) * d;
            rmsnorm_backward(h_in + rd, net.at(b.attn_norm), dln.data() + rd, ly.rms1[r], d,
                             dh.data() + rd, grads + b.attn_norm);
        }
    }

    // Embeddings.
    const int d_a = cfg.d_a;
    const int d_v = cfg.d_v;
    const int d_h2 = cfg.d_h;
    std::vector<T> dxv(d_v), dact_h(d_h2), dhid(d_h2);
    for (int r = 0; r < L; ++r) {
        const T* dxr = dh.data() + static_cast<size_t>(r) * d;
        if (plan.has_audio[r]) {
            for (int i = 0; i < cfg.n_q; ++i) {
                const int32_t id = plan.audio_cells[static_cast<size_t>(r) * cfg.n_q + i];
                axpy(T(1), dxr, grads + net.lay.embed[i] + static_cast<size_t>(id) * d_a, d_a);
            }
        }
        const T* dvr = dxr + d_a;
        switch (plan.visual[r]) {
            case VisualSource::none:
                break;
            case VisualSource::vpad:
                axpy(T(1), dvr, grads + net.lay.v_pad, d_v);
                break;
            case VisualSource::ucond:
                axpy(T(1), dvr, grads + net.lay.u_cond, d_v);
                break;
            case VisualSource::frame: {
                const T* hid = A.vp_hidden.data() + static_cast<size_t>(r) * d_h2;
                std::copy_n(dvr, d_v, dxv.begin());
                for (int i = 0; i < d_h2; ++i) dact_h[i] = gelu(hid[i]);
                outer_acc(grads + net.lay.vp_w2, dxv.data(), dact_h.data(), d_v, d_h2);
                axpy(T(1), dxv.data(), grads + net.lay.vp_b2, d_v);
                std::fill(dhid.begin(), dhid.end(), T(0));
                matvec_transpose_acc(dhid.data(), net.at(net.lay.vp_w2), dxv.data(), d_v, d_h2);
                for (int i = 0; i < d_h2; ++i) dhid[i] *= gelu_grad(hid[i]);
                const float* feat_row = plan.video->row(plan.frame[r]);
                // raw features are inputs; only the projection gets gradients
                std::vector<T> feat(feat_row, feat_row + cfg.d_raw);
                outer_acc(grads + net.lay.vp_w1, dhid.data(), feat.data(), d_h2, cfg.d_raw);
                axpy(T(1), dhid.data(), grads + net.lay.vp_b1, d_h2);
                break;
            }
        }
    }
}

}  // namespace

// --- public templated operations ---------------------------------------------

template <typename T>
void build_fused_row_t(const Net<T>& net, const SequencePlan& plan, int r, T* out) {
    const ModelConfig& cfg = net.cfg;
    const int d_a = cfg.d_a;
    std::fill_n(out, cfg.d(), T(0));
    if (plan.has_audio[r]) {
        for (int i = 0; i < cfg.n_q; ++i) {
            const int32_t id = plan.audio_cells[static_cast<size_t>(r) * cfg.n_q + i];
            check_cell_range<T>(id, cfg.K);
            axpy(T(1), net.at(net.lay.embed[i]) + static_cast<size_t>(id) * d_a, out, d_a);
        }
    }
    T* vis = out + d_a;
    switch (plan.visual[r]) {
        case VisualSource::none:
            break;
        case VisualSource::vpad:
            std::copy_n(net.at(net.lay.v_pad), cfg.d_v, vis);
            break;
        case VisualSource::ucond:
            std::copy_n(net.at(net.lay.u_cond), cfg.d_v, vis);
            break;
        case VisualSource::frame: {
            const float* feat_row = plan.video->row(plan.frame[r]);
            std::vector<T> feat(feat_row, feat_row + cfg.d_raw);
            std::vector<T> hid(cfg.d_h);
            matvec_add_bias(hid.data(), net.at(net.lay.vp_w1), net.at(net.lay.vp_b1), feat.data(),
                            cfg.d_h, cfg.d_raw);
            std::vector<T> act(cfg.d_h);
            for (int i = 0; i < cfg.d_h; ++i) act[i] = gelu(hid[i]);
            matvec_add_bias(vis, net.at(net.lay.vp_w2), net.at(net.lay.vp_b2), act.data(), cfg.d_v,
                            cfg.d_h);
            break;
        }
    }
}

template <typename T>
Mat<T> embed_audio(const DelayedGrid& grid, const Net<T>& net) {
    if (grid.n_q != net.cfg.n_q || grid.K != net.cfg.K) {
        throw std::invalid_argument("grid does not match model (N_q, K)");
    }
    Mat<T> out(grid.L(), net.cfg.d_a);
    for (int r = 0; r < grid.L(); ++r) {
        T* row = out.row(r);
        for (int i = 0; i < grid.n_q; ++i) {
            const int32_t id = grid.at(r, i);
            check_cell_range<T>(id, net.cfg.K);
            axpy(T(1), net.at(net.lay.embed[i]) + static_cast<size_t>(id) * net.cfg.d_a, row,
                 net.cfg.d_a);
        }
    }
    return out;
}

template <typename T>
Mat<T> project_visual(const MatF& features, const Net<T>& net) {
    if (features.cols != net.cfg.d_raw) {
        throw std::invalid_argument("feature width " + std::to_string(features.cols) +
                                    " does not match model d_raw " +
                                    std::to_string(net.cfg.d_raw));
    }
    Mat<T> out(features.rows, net.cfg.d_v);
    std::vector<T> feat(net.cfg.d_raw), hid(net.cfg.d_h), act(net.cfg.d_h);
    for (int r = 0; r < features.rows; ++r) {
        const float* src = features.row(r);
        std::copy_n(src, net.cfg.d_raw, feat.begin());
        matvec_add_bias(hid.data(), net.at(net.lay.vp_w1), net.at(net.lay.vp_b1), feat.data(),
                        net.cfg.d_h, net.cfg.d_raw);
        for (int i = 0; i < net.cfg.d_h; ++i) act[i] = gelu(hid[i]);
        matvec_add_bias(out.row(r), net.at(net.lay.vp_w2), net.at(net.lay.vp_b2), act.data(),
                        net.cfg.d_v, net.cfg.d_h);
    }
    return out;
}

template <typename T>
std::vector<T> forward_fused(const Net<T>& net, const Mat<T>& fused) {
    if (fused.rows < 1) throw std::invalid_argument("empty fused sequence");
    if (fused.cols != net.cfg.d()) throw std::invalid_argument("fused width != d_a + d_v");
    Acts<T> A;
    acts_resize(A, net.cfg, fused.rows);
    std::copy(fused.data.begin(), fused.data.end(), A.x.begin());
    forward_core(net, A);
    if (!all_finite(A.logits.data(), A.logits.size())) {
        throw numeric_error("non-finite logits in forward pass");
    }
    return std::move(A.logits);
}

template <typename T>
LossResult loss_over_grid(const std::vector<T>& logits, const DelayedGrid& target) {
    const int L = target.L();
    const int vocab = target.K + 1;
    if (logits.size() != static_cast<size_t>(L) * target.n_q * vocab) {
        throw std::invalid_argument("logits shape does not match target grid");
    }
    // Position j is scored against row j+1.
    std::vector<int32_t> targets(static_cast<size_t>(L) * target.n_q, kMaskedTarget);
    for (int r = 0; r + 1 < L; ++r) {
        for (int i = 0; i < target.n_q; ++i) {
            const int32_t id = target.at(r + 1, i);
            if (id != target.pad_id()) targets[static_cast<size_t>(r) * target.n_q + i] = id;
        }
    }
    ModelConfig shape;
    shape.K = target.K;
    shape.n_q = target.n_q;
    return plan_loss<T>(shape, logits, targets, L, nullptr);
}

template <typename T>
LossResult batch_gradient(const Net<T>& net, const std::vector<SequencePlan>& plans,
                          std::vector<T>& grads) {
    if (plans.empty()) throw std::invalid_argument("no plans");
    grads.assign(net.lay.total, T(0));

    const int n = static_cast<int>(plans.size());
    std::vector<std::vector<T>> per_plan(n);
    std::vector<LossResult> losses(n);

    parallel_for(n, [&](int p) {
        const SequencePlan& plan = plans[p];
        Acts<T> A;
        acts_resize(A, net.cfg, plan.L());
        for (int r = 0; r < plan.L(); ++r) {
            build_fused_row_t(net, plan, r, A.x.data() + static_cast<size_t>(r) * net.cfg.d());
            if (plan.visual[r] == VisualSource::frame) {
                // stash the pre-GELU hidden for the backward pass
                const float* feat_row = plan.video->row(plan.frame[r]);
                std::vector<T> feat(feat_row, feat_row + net.cfg.d_raw);
                matvec_add_bias(A.vp_hidden.data() + static_cast<size_t>(r) * net.cfg.d_h,
                                net.at(net.lay.vp_w1), net.at(net.lay.vp_b1), feat.data(),
                                net.cfg.d_h, net.cfg.d_raw);
            }
        }
        forward_core(net, A);
        std::vector<T> dlogits;
        losses[p] = plan_loss(net.cfg, A.logits, plan.targets, plan.L(), &dlogits);
        if (losses[p].cells > 0) {
            const T scale = T(1) / (T(losses[p].cells) * T(n));
            for (T& v : dlogits) v *= scale;
            per_plan[p].assign(net.lay.total, T(0));
            backward_core(net, plan, A, dlogits, per_plan[p].data());
        }
    });

    LossResult agg;
    double total = 0.0;
    bool all_empty = true;
    for (int p = 0; p < n; ++p) {
        total += losses[p].value;
        agg.cells += losses[p].cells;
        all_empty = all_empty && losses[p].empty_mask;
        if (!per_plan[p].empty()) {
            for (size_t i = 0; i < grads.size(); ++i) grads[i] += per_plan[p][i];
        }
    }
    agg.value = total / n;
    agg.empty_mask = all_empty;
    return agg;
}

// --- incremental path ----------------------------------------------------------

void KvCache::reset(const ModelConfig& cfg, int capacity) {
    len = 0;
    k.assign(cfg.n_layer, std::vector<float>(static_cast<size_t>(capacity) * cfg.d(), 0.0f));
    v.assign(cfg.n_layer, std::vector<float>(static_cast<size_t>(capacity) * cfg.d(), 0.0f));
}

void forward_step(const Net<float>& net, const float* fused_row, KvCache& cache,
                  std::vector<float>& logits_out) {
    const ModelConfig& cfg = net.cfg;
    const int d = cfg.d();
    const int f = cfg.ffn_hidden();
    const int hd = cfg.head_dim();
    const int pos = cache.len;
    const float inv_sqrt_hd = 1.0f / std::sqrt(static_cast<float>(hd));

    std::vector<float> h(fused_row, fused_row + d);
    std::vector<float> ln(d), q(d), att_o(d), proj(d);
    std::vector<float> gate(f), up(f), act(f);
    std::vector<float> prow(pos + 1);
    float inv = 0.0f;

    for (int l = 0; l < cfg.n_layer; ++l) {
        const auto& b = net.lay.blocks[l];
        std::vector<float>& kc = cache.k[l];
        std::vector<float>& vc = cache.v[l];
        if (kc.size() < static_cast<size_t>(pos + 1) * d) {
            kc.resize(static_cast<size_t>(pos + 1) * d);
            vc.resize(static_cast<size_t>(pos + 1) * d);
        }
        float* k_new = kc.data() + static_cast<size_t>(pos) * d;
        float* v_new = vc.data() + static_cast<size_t>(pos) * d;

        rmsnorm_row(h.data(), net.at(b.attn_norm), d, ln.data(), &inv);
        matvec(q.data(), net.at(b.wq), ln.data(), d, d);
        matvec(k_new, net.at(b.wk), ln.data(), d, d);
        matvec(v_new, net.at(b.wv), ln.data(), d, d);
        rope_rotate(q.data(), d, cfg.n_head, pos, false);
        rope_rotate(k_new, d, cfg.n_head, pos, false);

        for (int head = 0; head < cfg.n_head; ++head) {
            attend_head(q.data() + head * hd, kc.data() + head * hd, vc.data() + head * hd, d, hd,
                        pos, inv_sqrt_hd, prow.data(), att_o.data() + head * hd);
        }
        matvec(proj.data(), net.at(b.wo), att_o.data(), d, d);
        for (int i = 0; i < d; ++i) h[i] += proj[i];

        rmsnorm_row(h.data(), net.at(b.ffn_norm), d, ln.data(), &inv);
        matvec(gate.data(), net.at(b.w_gate), ln.data(), f, d);
        matvec(up.data(), net.at(b.w_up), ln.data(), f, d);
        for (int i = 0; i < f; ++i) act[i] = silu(gate[i]) * up[i];
        matvec(proj.data(), net.at(b.w_down), act.data(), d, f);
        for (int i = 0; i < d; ++i) h[i] += proj[i];
    }

    rmsnorm_row(h.data(), net.at(net.lay.final_norm), d, ln.data(), &inv);
    const int vocab = cfg.vocab();
    logits_out.resize(static_cast<size_t>(cfg.n_q) * vocab);
    for (int i = 0; i < cfg.n_q; ++i) {
        matvec_add_bias(logits_out.data() + static_cast<size_t>(i) * vocab,
                        net.at(net.lay.head_w[i]), net.at(net.lay.head_b[i]), ln.data(), vocab, d);
    }
    cache.len += 1;
}

// --- explicit instantiations ------------------------------------------------------

template void build_fused_row_t<float>(const Net<float>&, const SequencePlan&, int, float*);
template void build_fused_row_t<double>(const Net<double>&, const SequencePlan&, int, double*);
template Mat<float> embed_audio<float>(const DelayedGrid&, const Net<float>&);
template Mat<double> embed_audio<double>(const DelayedGrid&, const Net<double>&);
template Mat<float> project_visual<float>(const MatF&, const Net<float>&);
template Mat<double> project_visual<double>(const MatF&, const Net<double>&);
template std::vector<float> forward_fused<float>(const Net<float>&, const Mat<float>&);
template std::vector<double> forward_fused<double>(const Net<double>&, const Mat<double>&);
template LossResult loss_over_grid<float>(const std::vector<float>&, const DelayedGrid&);
template LossResult loss_over_grid<double>(const std::vector<double>&, const DelayedGrid&);
template LossResult batch_gradient<float>(const Net<float>&, const std::vector<SequencePlan>&,
                                          std::vector<float>&);
template LossResult batch_gradient<double>(const Net<double>&, const std::vector<SequencePlan>&,
                                           std::vector<double>&);

}  // namespace vta
