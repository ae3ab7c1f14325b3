#include "vta/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "vta/errors.hpp"

namespace vta {

double OffsetGrid::class_offset_s(int index) {
    if (index < 0 || index >= kClasses) throw std::invalid_argument("offset class out of range");
    return -kMaxS + kStepS * index;
}

int OffsetGrid::class_of_offset(double offset_s) {
    const long idx = std::lround(offset_s / kStepS) + kClasses / 2;
    return static_cast<int>(std::clamp(idx, 0l, static_cast<long>(kClasses - 1)));
}

std::vector<double> onset_envelope(const Waveform& waveform, double win_ms) {
    if (win_ms <= 0.0) throw std::invalid_argument("win_ms must be positive");
    const int sr = waveform.sample_rate;
    const int hop = std::max(1, sr / kEnvelopeRateHz);
    const int win = std::max(1, static_cast<int>(std::llround(win_ms * 1e-3 * sr)));
    const int n = static_cast<int>(waveform.samples.size());
    if (n < win) return {};

    const int frames = (n - win) / hop + 1;
    std::vector<double> rms(frames);
    for (int k = 0; k < frames; ++k) {
        double acc = 0.0;
        const float* x = waveform.samples.data() + static_cast<size_t>(k) * hop;
        for (int i = 0; i < win; ++i) acc += static_cast<double>(x[i]) * x[i];
        rms[k] = std::sqrt(acc / win);
    }
    std::vector<double> env(frames);
    env[0] = std::max(0.0, rms[0]);
    for (int k = 1; k < frames; ++k) env[k] = std::max(0.0, rms[k] - rms[k - 1]);
    return env;
}

OffsetEstimate estimate_offset(const Waveform& gen_audio, const EventTimeline& ref) {
    if (ref.events.empty()) {
        throw undefined_metric_error("offset undefined for an empty reference timeline");
    }
    const std::vector<double> env = onset_envelope(gen_audio, 10.0);
    if (env.empty()) throw undefined_metric_error("audio too short for an onset envelope");

    std::vector<int> event_idx;
    event_idx.reserve(ref.events.size());
    for (const Event& e : ref.events) {
        event_idx.push_back(static_cast<int>(std::llround(e.t * kEnvelopeRateHz)));
    }

    const int max_lag = 2 * kEnvelopeRateHz;  // +-2 s
    double best = -std::numeric_limits<double>::infinity();
    int best_lag = 0;
    // Visit lags by growing |lag|, negative first, so argmax ties resolve to
    // the smaller magnitude and then to the negative side.
    for (int mag = 0; mag <= max_lag; ++mag) {
        for (const int lag : {-mag, mag}) {
            double corr = 0.0;
            for (const int e : event_idx) {
                const int pos = e + lag;
                if (pos >= 0 && pos < static_cast<int>(env.size())) corr += env[pos];
            }
            if (corr > best) {
                best = corr;
                best_lag = lag;
            }
            if (mag == 0) break;  // lag 0 only once
        }
    }

    OffsetEstimate est;
    est.offset_ms = best_lag * (1000.0 / kEnvelopeRateHz);
    est.class_index = OffsetGrid::class_of_offset(est.offset_ms / 1000.0);
    return est;
}

double mean_abs_offset_ms(const std::vector<double>& offsets_ms) {
    if (offsets_ms.empty()) throw std::invalid_argument("no offsets");
    double acc = 0.0;
    for (double o : offsets_ms) acc += std::abs(o);
    return acc / static_cast<double>(offsets_ms.size());
}

double sync_score(const std::vector<const Waveform*>& gen_audio,
                  const std::vector<const EventTimeline*>& refs) {
    if (gen_audio.size() != refs.size() || gen_audio.empty()) {
        throw std::invalid_argument("sync_score: mismatched or empty pair lists");
    }
    std::vector<double> offsets;
    offsets.reserve(gen_audio.size());
    for (size_t i = 0; i < gen_audio.size(); ++i) {
        offsets.push_back(estimate_offset(*gen_audio[i], *refs[i]).offset_ms);
    }
    return mean_abs_offset_ms(offsets);
}

std::vector<double> classify_audio(const Waveform& waveform, const AvEmbedder& embedder) {
    std::vector<double> e = matched_filter_energies(waveform, embedder);
    double total = 0.0;
    for (double& v : e) {
        v = std::max(v, 1e-12);
        total += v;
    }
    for (double& v : e) v /= total;
    return e;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size() || p.empty()) throw std::invalid_argument("kl: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        acc += p[i] * std::log(p[i] / std::max(q[i], 1e-300));
    }
    return acc;
}

double kld_relevance(const std::vector<const Waveform*>& gen_set,
                     const std::vector<const Waveform*>& gt_set, const AvEmbedder& embedder) {
    if (gen_set.size() != gt_set.size() || gen_set.empty()) {
        throw std::invalid_argument("kld_relevance: mismatched or empty sets");
    }
    double acc = 0.0;
    for (size_t i = 0; i < gen_set.size(); ++i) {
        acc += kl_divergence(classify_audio(*gt_set[i], embedder),
                             classify_audio(*gen_set[i], embedder));
    }
    return acc / static_cast<double>(gen_set.size());
}

// --- Frechet distance --------------------------------------------------------

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix; A is destroyed.
void jacobi_eig(MatD& a, std::vector<double>& eigenvalues) {
    const int n = a.rows;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
        }
        if (off < 1e-24) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a.at(k, p);
                    const double akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a.at(p, k);
                    const double aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    eigenvalues.resize(n);
    for (int i = 0; i < n; ++i) eigenvalues[i] = a.at(i, i);
}

// Full eigendecomposition with vectors (accumulating rotations).
void jacobi_eig_vectors(MatD a, MatD& vectors, std::vector<double>& eigenvalues) {
    const int n = a.rows;
    vectors = MatD(n, n);
    for (int i = 0; i < n; ++i) vectors.at(i, i) = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) off += a.at(i, j) * a.at(i, j);
        }
        if (off < 1e-24) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a.at(k, p);
                    const double akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a.at(p, k);
                    const double aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = vectors.at(k, p);
                    const double vkq = vectors.at(k, q);
                    vectors.at(k, p) = c * vkp - s * vkq;
                    vectors.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    eigenvalues.resize(n);
    for (int i = 0; i < n; ++i) eigenvalues[i] = a.at(i, i);
}

MatD matmul(const MatD& a, const MatD& b) {
    MatD c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
        }
    }
    return c;
}

// Symmetric PSD square root via eigendecomposition, negatives floored at 0.
MatD sqrtm_psd(const MatD& s) {
    MatD v;
    std::vector<double> lam;
    jacobi_eig_vectors(s, v, lam);
    MatD scaled(v.rows, v.cols);
    for (int j = 0; j < v.cols; ++j) {
        const double r = std::sqrt(std::max(lam[j], 0.0));
        for (int i = 0; i < v.rows; ++i) scaled.at(i, j) = v.at(i, j) * r;
    }
    // v diag(sqrt(lam)) v^T
    MatD vt(v.cols, v.rows);
    for (int i = 0; i < v.rows; ++i) {
        for (int j = 0; j < v.cols; ++j) vt.at(j, i) = v.at(i, j);
    }
    return matmul(scaled, vt);
}

void mean_and_cov(const MatD& set, std::vector<double>& mean, MatD& cov) {
    const int n = set.rows;
    const int d = set.cols;
    mean.assign(d, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) mean[j] += set.at(i, j);
    }
    for (double& m : mean) m /= n;
    cov = MatD(d, d);
    for (int i = 0; i < n; ++i) {
        for (int a = 0; a < d; ++a) {
            const double da = set.at(i, a) - mean[a];
            for (int b = 0; b < d; ++b) cov.at(a, b) += da * (set.at(i, b) - mean[b]);
        }
    }
    for (double& v : cov.data) v /= (n - 1);
}

}  // namespace

double frechet_distance(const MatD& set_a, const MatD& set_b) {
    if (set_a.cols != set_b.cols) throw std::invalid_argument("frechet: dim mismatch");
    const int d = set_a.cols;
    if (set_a.rows < d + 1 || set_b.rows < d + 1) {
        throw std::invalid_argument("frechet: need at least dim+1 samples per set");
    }

    std::vector<double> mu_a, mu_b;
    MatD cov_a, cov_b;
    mean_and_cov(set_a, mu_a, cov_a);
    mean_and_cov(set_b, mu_b, cov_b);

    double mean_term = 0.0;
    for (int i = 0; i < d; ++i) {
        const double diff = mu_a[i] - mu_b[i];
        mean_term += diff * diff;
    }

    const MatD sqrt_a = sqrtm_psd(cov_a);
    MatD inner = matmul(matmul(sqrt_a, cov_b), sqrt_a);
    // Symmetrize before the eigendecomposition; the product picks up tiny
    // asymmetries in floating point.
    for (int i = 0; i < d; ++i) {
        for (int j = i + 1; j < d; ++j) {
            const double m = 0.5 * (inner.at(i, j) + inner.at(j, i));
            inner.at(i, j) = m;
            inner.at(j, i) = m;
        }
    }
    std::vector<double> lam;
    jacobi_eig(inner, lam);
    double tr_sqrt = 0.0;
    for (double l : lam) tr_sqrt += std::sqrt(std::max(l, 0.0));

    double tr_a = 0.0, tr_b = 0.0;
    for (int i = 0; i < d; ++i) {
        tr_a += cov_a.at(i, i);
        tr_b += cov_b.at(i, i);
    }
    const double fd = mean_term + tr_a + tr_b - 2.0 * tr_sqrt;
    if (fd < -1e-8) throw numeric_error("frechet distance below the numerical floor");
    return std::max(fd, 0.0);
}

double ib_score(const Waveform& gen_audio, const VideoFeatureStream& video,
                const AvEmbedder& embedder) {
    if (std::abs(gen_audio.duration_s() - video.duration_s()) > 0.5) {
        throw std::invalid_argument("ib_score: duration mismatch");
    }
    return 100.0 * cosine(embed_audio_clip(gen_audio, embedder), embed_video_clip(video, embedder));
}

MetricsReport evaluate(const Net<float>& net, const RvqCodebooks& codebooks,
                       const AvEmbedder& embedder, const std::vector<EvalItem>& items,
                       const SampleConfig& base_config, int n_gen, int sample_rate,
                       std::vector<PerVideoRow>* per_video) {
    if (items.empty()) throw std::invalid_argument("no evaluation items");
    if (n_gen < 1) throw std::invalid_argument("n_gen must be >= 1");

    const int n_videos = static_cast<int>(items.size());
    const int total = n_videos * n_gen;
    std::vector<Waveform> gens(total);
    parallel_for(total, [&](int g) {
        const int iv = g / n_gen;
        SampleConfig cfg = base_config;
        cfg.seed = base_config.seed + static_cast<uint64_t>(g);
        cfg.duration_s = std::min(cfg.duration_s, items[iv].video.duration_s());
        gens[g] = generate(net, codebooks, items[iv].video, cfg, sample_rate).audio;
    });

    MetricsReport report;
    report.n_generations_per_video = n_gen;
    report.n_samples = n_videos;

    const int dim = embedder.class_count;
    MatD gen_embeds(total, dim);
    MatD gt_embeds(n_videos, dim);

    std::vector<double> video_sync(n_videos, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> video_kld(n_videos, 0.0);
    std::vector<double> video_ib(n_videos, 0.0);
    std::vector<int> video_undefined(n_videos, 0);

    parallel_for(n_videos, [&](int iv) {
        const EvalItem& item = items[iv];
        const std::vector<double> gt_post = classify_audio(item.gt_audio, embedder);
        const std::vector<double> gt_embed = embed_audio_clip(item.gt_audio, embedder);
        std::copy(gt_embed.begin(), gt_embed.end(), gt_embeds.row(iv));

        std::vector<double> abs_offsets;
        double kld_acc = 0.0;
        double ib_acc = 0.0;
        for (int g = 0; g < n_gen; ++g) {
            const Waveform& gen = gens[iv * n_gen + g];
            const std::vector<double> gen_embed = embed_audio_clip(gen, embedder);
            std::copy(gen_embed.begin(), gen_embed.end(), gen_embeds.row(iv * n_gen + g));
            kld_acc += kl_divergence(gt_post, classify_audio(gen, embedder));
            ib_acc += ib_score(gen, item.video, embedder);
            try {
                abs_offsets.push_back(std::abs(estimate_offset(gen, item.ref).offset_ms));
            } catch (const undefined_metric_error&) {
                video_undefined[iv] += 1;
            }
        }
        video_kld[iv] = kld_acc / n_gen;
        video_ib[iv] = ib_acc / n_gen;
        if (!abs_offsets.empty()) {
            double acc = 0.0;
            for (double o : abs_offsets) acc += o;
            video_sync[iv] = acc / static_cast<double>(abs_offsets.size());
        }
    });

    double sync_acc = 0.0;
    int sync_videos = 0;
    double kld_acc = 0.0, ib_acc = 0.0;
    for (int iv = 0; iv < n_videos; ++iv) {
        report.undefined_offsets += video_undefined[iv];
        kld_acc += video_kld[iv];
        ib_acc += video_ib[iv];
        if (!std::isnan(video_sync[iv])) {
            sync_acc += video_sync[iv];
            ++sync_videos;
        }
        if (per_video) {
            per_video->push_back({items[iv].id, video_sync[iv], video_kld[iv], video_ib[iv]});
        }
    }
    report.kld = kld_acc / n_videos;
    report.ib = ib_acc / n_videos;
    report.sync_ms = sync_videos > 0 ? sync_acc / sync_videos
                                     : std::numeric_limits<double>::quiet_NaN();
    report.fd = (gen_embeds.rows >= dim + 1 && gt_embeds.rows >= dim + 1)
                    ? frechet_distance(gen_embeds, gt_embeds)
                    : std::numeric_limits<double>::quiet_NaN();
    return report;
}

std::string metrics_report_json(const MetricsReport& r) {
    nlohmann::json j;
    j["sync_ms"] = r.sync_ms;
    j["kld"] = r.kld;
    if (std::isnan(r.fd)) {
        j["fd"] = nullptr;
    } else {
        j["fd"] = r.fd;
    }
    j["ib"] = r.ib;
    j["n_samples"] = r.n_samples;
    j["n_generations_per_video"] = r.n_generations_per_video;
    j["undefined_offsets"] = r.undefined_offsets;
    return j.dump(2);
}

std::string metrics_csv(const MetricsReport& r, const std::vector<PerVideoRow>& rows) {
    std::ostringstream ss;
    ss << "id,sync_ms,kld,ib\n";
    for (const PerVideoRow& row : rows) {
        ss << row.id << "," << row.sync_ms << "," << row.kld << "," << row.ib << "\n";
    }
    // Aggregate row in Table-1 column order.
    ss << "\nkld,fad_analog,ib,sync_ms\n";
    ss << r.kld << "," << r.fd << "," << r.ib << "," << r.sync_ms << "\n";
    return ss.str();
}

}  // namespace vta
