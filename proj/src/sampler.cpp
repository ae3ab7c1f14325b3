#include "vta/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vta/errors.hpp"

namespace vta {

std::vector<double> log_softmax(const std::vector<double>& scores) {
    if (scores.empty()) throw std::invalid_argument("empty score vector");
    const double mx = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - mx);
    const double lse = mx + std::log(sum);
    std::vector<double> out(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] - lse;
    return out;
}

std::vector<double> cfg_mix(const std::vector<double>& logp_cond,
                            const std::vector<double>& logp_uncond, double gamma) {
    if (logp_cond.size() != logp_uncond.size()) {
        throw std::invalid_argument("cfg_mix: shape mismatch");
    }
    std::vector<double> mixed(logp_cond.size());
    for (size_t i = 0; i < mixed.size(); ++i) {
        mixed[i] = gamma * logp_cond[i] + (1.0 - gamma) * logp_uncond[i];
    }
    return log_softmax(mixed);
}

int sample_token(const std::vector<double>& scores, double temperature, int top_k, Rng& rng) {
    const int n = static_cast<int>(scores.size());
    if (n == 0) throw std::invalid_argument("empty score vector");
    if (temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");

    if (temperature == 0.0) {
        int best = 0;
        for (int i = 1; i < n; ++i) {
            if (scores[i] > scores[best]) best = i;
        }
        return best;
    }

    // Candidate ids ordered by score descending, index ascending, optionally
    // cut to the top_k highest.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] > scores[b]; });
    const int kept = (top_k > 0 && top_k < n) ? top_k : n;

    const double mx = scores[order[0]];
    std::vector<double> probs(kept);
    double sum = 0.0;
    for (int i = 0; i < kept; ++i) {
        probs[i] = std::exp((scores[order[i]] - mx) / temperature);
        sum += probs[i];
    }
    const double u = rng.uniform() * sum;
    double cum = 0.0;
    for (int i = 0; i < kept; ++i) {
        cum += probs[i];
        if (u < cum) return order[i];
    }
    return order[kept - 1];
}

GenerateResult generate(const Net<float>& net, const RvqCodebooks& cb,
                        const VideoFeatureStream& video, const SampleConfig& cfg,
                        int sample_rate) {
    if (net.cfg.K != cb.K || net.cfg.n_q != cb.n_q) {
        throw std::invalid_argument("model (K=" + std::to_string(net.cfg.K) +
                                    ", N_q=" + std::to_string(net.cfg.n_q) +
                                    ") incompatible with codebooks (K=" + std::to_string(cb.K) +
                                    ", N_q=" + std::to_string(cb.n_q) + ")");
    }
    if (video.d_raw() != net.cfg.d_raw) {
        throw std::invalid_argument("video feature width does not match the model");
    }
    if (cfg.duration_s > video.duration_s() + 1e-9) {
        throw std::invalid_argument("requested duration exceeds the video");
    }
    if (cfg.temperature < 0.0 || cfg.top_k < 0 || cfg.top_k > cb.K) {
        throw std::invalid_argument("bad sampling configuration");
    }

    const int t_samples = static_cast<int>(std::llround(cfg.duration_s * sample_rate));
    if (t_samples < cb.frame_len) throw std::invalid_argument("duration shorter than one frame");
    const int t_a = (t_samples - cb.frame_len) / cb.hop + 1;
    const int t_v = std::min(video.t_v(),
                             static_cast<int>(std::llround(cfg.duration_s * video.fps)));
    const AlignmentMap align = build_alignment(std::max(1, t_v), t_a, cb.n_q);

    DelayedGrid delayed;
    delayed.t_a = t_a;
    delayed.n_q = cb.n_q;
    delayed.K = cb.K;
    delayed.cells.assign(static_cast<size_t>(delayed.L()) * cb.n_q, cb.K);

    SequencePlan cond = make_fusion_plan(delayed, align, video.features, false);
    SequencePlan uncond = make_fusion_plan(delayed, align, video.features, true);

    const bool guided = cfg.gamma != 1.0;
    KvCache cache_c, cache_u;
    cache_c.reset(net.cfg, delayed.L());
    if (guided) cache_u.reset(net.cfg, delayed.L());

    Rng rng(derive_seed(cfg.seed, 0x67656e21ULL));  // generation stream
    GenerateResult res;
    const int vocab = net.cfg.vocab();
    std::vector<float> row(net.cfg.d());
    std::vector<float> logits_c, logits_u;
    std::vector<double> lc(cb.K), lu(cb.K);

    for (int j = 0; j + 1 < delayed.L(); ++j) {
        build_fused_row(net, cond, j, row.data());
        forward_step(net, row.data(), cache_c, logits_c);
        res.stats.cond_rows += 1;
        if (guided) {
            build_fused_row(net, uncond, j, row.data());
            forward_step(net, row.data(), cache_u, logits_u);
            res.stats.uncond_rows += 1;
        }

        for (int level = 0; level < cb.n_q; ++level) {
            if (!delayed.is_interior(j + 1, level)) continue;
            // Sampling support excludes PAD (id K).
            for (int t = 0; t < cb.K; ++t) {
                lc[t] = logits_c[static_cast<size_t>(level) * vocab + t];
            }
            std::vector<double> scores = log_softmax(lc);
            if (guided) {
                for (int t = 0; t < cb.K; ++t) {
                    lu[t] = logits_u[static_cast<size_t>(level) * vocab + t];
                }
                scores = cfg_mix(scores, log_softmax(lu), cfg.gamma);
            }
            for (double s : scores) {
                if (!std::isfinite(s)) throw numeric_error("non-finite sampling scores");
            }
            const int id = sample_token(scores, cfg.temperature, cfg.top_k, rng);
            const size_t cell = static_cast<size_t>(j + 1) * cb.n_q + level;
            delayed.cells[cell] = id;
            cond.audio_cells[cell] = id;
            uncond.audio_cells[cell] = id;
        }
    }

    res.grid = remove_delay(delayed);
    res.audio = decode(res.grid, cb, sample_rate);
    if (static_cast<int>(res.audio.samples.size()) > t_samples) {
        res.audio.samples.resize(t_samples);
    }
    return res;
}

}  // namespace vta
