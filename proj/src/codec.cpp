#include "vta/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vta/errors.hpp"
#include "vta/io.hpp"
#include "vta/rng.hpp"

namespace vta {

std::vector<float> hann_window(int frame_len) {
    // Periodic Hann; with hop = frame_len/2 the overlapped windows sum to 1.
    std::vector<float> w(frame_len);
    for (int n = 0; n < frame_len; ++n) {
        w[n] = static_cast<float>(0.5 * (1.0 - std::cos(2.0 * M_PI * n / frame_len)));
    }
    return w;
}

MatF analyze(const Waveform& waveform, int frame_len, int hop) {
    if (frame_len < 2 || hop < 1) throw std::invalid_argument("bad frame geometry");
    const int n = static_cast<int>(waveform.samples.size());
    if (n < frame_len) {
        throw std::invalid_argument("waveform shorter than one frame (" + std::to_string(n) +
                                    " < " + std::to_string(frame_len) + ")");
    }
    const std::vector<float> win = hann_window(frame_len);
    const int t_a = (n - frame_len) / hop + 1;
    MatF frames(t_a, frame_len);
    for (int j = 0; j < t_a; ++j) {
        const float* src = waveform.samples.data() + static_cast<size_t>(j) * hop;
        float* dst = frames.row(j);
        for (int i = 0; i < frame_len; ++i) dst[i] = win[i] * src[i];
    }
    return frames;
}

namespace {

// Nearest centroid by L2, ties broken by lowest index. Uses
// |c|^2 - 2 x.c, which orders identically to the true distance.
int nearest_centroid(const float* x, const MatF& centroids, const std::vector<float>& cnorm) {
    int best = 0;
    float best_score = std::numeric_limits<float>::infinity();
    for (int k = 0; k < centroids.rows; ++k) {
        const float score = cnorm[k] - 2.0f * dot(x, centroids.row(k), centroids.cols);
        if (score < best_score) {
            best_score = score;
            best = k;
        }
    }
    return best;
}

std::vector<float> centroid_norms(const MatF& centroids) {
    std::vector<float> norms(centroids.rows);
    for (int k = 0; k < centroids.rows; ++k) {
        norms[k] = dot(centroids.row(k), centroids.row(k), centroids.cols);
    }
    return norms;
}

double sq_dist(const float* a, const float* b, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc;
}


// pin_zero keeps centroid 0 at the zero vector (never updated, never
// reseeded). Residual levels use it so the greedy encoder always has a
// no-op codeword available and residual energy cannot grow across levels.
MatF kmeans(const MatF& points, int K, Rng& rng, int iters, bool pin_zero) {
    const int n = points.rows;
    const int dim = points.cols;

    // k-means++ seeding.
    MatF centroids(K, dim);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    if (!pin_zero) {
        const int first = static_cast<int>(rng.uniform_index(n));
        std::copy_n(points.row(first), dim, centroids.row(0));
    }
    for (int k = 1; k < K; ++k) {
        const float* prev = centroids.row(k - 1);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], sq_dist(points.row(i), prev, dim));
            total += d2[i];
        }
        int pick = n - 1;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double cum = 0.0;
            for (int i = 0; i < n; ++i) {
                cum += d2[i];
                if (cum >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<int>(rng.uniform_index(n));
        }
        std::copy_n(points.row(pick), dim, centroids.row(k));
    }

    std::vector<int> assign(n, -1);
    std::vector<double> sums(static_cast<size_t>(K) * dim);
    std::vector<int> counts(K);

    for (int it = 0; it < iters; ++it) {
        const std::vector<float> cnorm = centroid_norms(centroids);
        bool changed = false;
        std::vector<int> next(n);
        parallel_for(n, [&](int i) { next[i] = nearest_centroid(points.row(i), centroids, cnorm); });
        for (int i = 0; i < n; ++i) {
            if (next[i] != assign[i]) changed = true;
            assign[i] = next[i];
        }
        if (!changed && it > 0) break;

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < n; ++i) {
            const float* p = points.row(i);
            double* s = sums.data() + static_cast<size_t>(assign[i]) * dim;
            for (int c = 0; c < dim; ++c) s[c] += p[c];
            ++counts[assign[i]];
        }

        // Empty clusters grab the point farthest from its current centroid.
        std::vector<char> stolen(n, 0);
        for (int k = pin_zero ? 1 : 0; k < K; ++k) {
            if (counts[k] > 0) continue;
            int far = -1;
            double far_d = -1.0;
            for (int i = 0; i < n; ++i) {
                if (stolen[i] || counts[assign[i]] <= 1) continue;
                const double d = sq_dist(points.row(i), centroids.row(assign[i]), dim);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far < 0) continue;  // fewer distinct points than clusters
            stolen[far] = 1;
            double* s_old = sums.data() + static_cast<size_t>(assign[far]) * dim;
            const float* p = points.row(far);
            for (int c = 0; c < dim; ++c) s_old[c] -= p[c];
            --counts[assign[far]];
            assign[far] = k;
            double* s_new = sums.data() + static_cast<size_t>(k) * dim;
            for (int c = 0; c < dim; ++c) s_new[c] += p[c];
            counts[k] = 1;
        }

        for (int k = pin_zero ? 1 : 0; k < K; ++k) {
            if (counts[k] == 0) continue;
            float* c = centroids.row(k);
            const double* s = sums.data() + static_cast<size_t>(k) * dim;
            for (int d = 0; d < dim; ++d) c[d] = static_cast<float>(s[d] / counts[k]);
        }
    }
    return centroids;
}

}  // namespace

RvqCodebooks fit_rvq(const MatF& corpus, int n_q, int K, uint64_t seed, int iters) {
    if (n_q < 1) throw std::invalid_argument("n_q must be >= 1");
    if (K < 2) throw std::invalid_argument("K must be >= 2");
    if (iters < 1) throw std::invalid_argument("iters must be >= 1");
    if (corpus.rows < K) {
        throw std::invalid_argument("corpus has " + std::to_string(corpus.rows) +
                                    " frames, need at least K=" + std::to_string(K));
    }
    if (corpus.cols % 2 != 0) throw std::invalid_argument("frame_len must be even");

    RvqCodebooks cb;
    cb.n_q = n_q;
    cb.K = K;
    cb.frame_len = corpus.cols;
    cb.hop = corpus.cols / 2;
    cb.window = hann_window(cb.frame_len);

    MatF residual = corpus;
    for (int level = 0; level < n_q; ++level) {
        Rng rng(derive_seed(seed, 0x72767121ULL, static_cast<uint64_t>(level)));
        MatF centroids = kmeans(residual, K, rng, iters, /*pin_zero=*/level > 0);

        // Subtract the quantization of this level before fitting the next.
        if (level + 1 < n_q) {
            const std::vector<float> cnorm = centroid_norms(centroids);
            parallel_for(residual.rows, [&](int i) {
                float* r = residual.row(i);
                const int k = nearest_centroid(r, centroids, cnorm);
                const float* c = centroids.row(k);
                for (int d = 0; d < residual.cols; ++d) r[d] -= c[d];
            });
        }
        cb.codebooks.push_back(std::move(centroids));
    }
    return cb;
}

TokenGrid encode(const Waveform& waveform, const RvqCodebooks& cb) {
    if (!cb.fitted()) throw std::invalid_argument("codebooks are not fitted");
    const MatF frames = analyze(waveform, cb.frame_len, cb.hop);

    TokenGrid grid;
    grid.t_a = frames.rows;
    grid.n_q = cb.n_q;
    grid.K = cb.K;
    grid.tokens.resize(static_cast<size_t>(grid.t_a) * cb.n_q);

    // Selection and the residual chain run in double so the cross-level
    // monotonicity tolerance is far above the arithmetic noise.
    std::vector<Mat<double>> books(cb.n_q);
    for (int level = 0; level < cb.n_q; ++level) {
        books[level] = Mat<double>(cb.K, cb.frame_len);
        std::copy(cb.codebooks[level].data.begin(), cb.codebooks[level].data.end(),
                  books[level].data.begin());
    }

    std::vector<char> monotone(frames.rows, 1);
    parallel_for(frames.rows, [&](int j) {
        std::vector<double> residual(frames.row(j), frames.row(j) + cb.frame_len);
        // Energy must not grow from one level to the next; the raw frame
        // itself carries no such guarantee (a zero frame still maps to the
        // nearest codeword of the first level).
        double prev_energy = -1.0;
        for (int level = 0; level < cb.n_q; ++level) {
            const Mat<double>& book = books[level];
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int k = 0; k < cb.K; ++k) {
                const double* c = book.row(k);
                double dist = 0.0;
                for (int d = 0; d < cb.frame_len; ++d) {
                    const double diff = residual[d] - c[d];
                    dist += diff * diff;
                }
                if (dist < best_d) {
                    best_d = dist;
                    best = k;
                }
            }
            grid.at(j, level) = best;
            const double* c = book.row(best);
            for (int d = 0; d < cb.frame_len; ++d) residual[d] -= c[d];
            if (level > 0 && best_d > prev_energy + 1e-9) monotone[j] = 0;
            prev_energy = best_d;
        }
    });
    for (int j = 0; j < frames.rows; ++j) {
        if (!monotone[j]) {
            throw numeric_error("residual energy increased across levels at frame " +
                                std::to_string(j));
        }
    }
    return grid;
}

Waveform decode(const TokenGrid& grid, const RvqCodebooks& cb, int sample_rate) {
    if (!cb.fitted()) throw std::invalid_argument("codebooks are not fitted");
    if (grid.n_q != cb.n_q || grid.K != cb.K) {
        throw artifact_mismatch_error("token grid (N_q=" + std::to_string(grid.n_q) +
                                      ", K=" + std::to_string(grid.K) +
                                      ") does not match codebooks (N_q=" + std::to_string(cb.n_q) +
                                      ", K=" + std::to_string(cb.K) + ")");
    }
    for (int32_t t : grid.tokens) {
        if (t < 0 || t >= cb.K) {
            throw invalid_token_error("token " + std::to_string(t) + " outside [0, " +
                                      std::to_string(cb.K - 1) + "]");
        }
    }

    const size_t out_len =
        grid.t_a == 0 ? 0 : static_cast<size_t>(grid.t_a - 1) * cb.hop + cb.frame_len;
    std::vector<double> acc(out_len, 0.0);
    std::vector<float> frame(cb.frame_len);
    for (int j = 0; j < grid.t_a; ++j) {
        std::fill(frame.begin(), frame.end(), 0.0f);
        for (int level = 0; level < cb.n_q; ++level) {
            const float* c = cb.codebooks[level].row(grid.at(j, level));
            for (int d = 0; d < cb.frame_len; ++d) frame[d] += c[d];
        }
        double* out = acc.data() + static_cast<size_t>(j) * cb.hop;
        for (int d = 0; d < cb.frame_len; ++d) out[d] += frame[d];
    }

    // Hann at 50% overlap sums to exactly 1; the normalization is explicit
    // so a different window/hop pairing fails loudly in review, not silently.
    const double cola_norm = 1.0;
    Waveform w;
    w.sample_rate = sample_rate;
    w.samples.resize(out_len);
    for (size_t i = 0; i < out_len; ++i) {
        w.samples[i] = static_cast<float>(std::clamp(acc[i] / cola_norm, -1.0, 1.0));
    }
    return w;
}

double snr_db(const std::vector<float>& reference, const std::vector<float>& test) {
    const size_t n = std::min(reference.size(), test.size());
    if (n == 0) throw std::invalid_argument("empty signals");
    double sig = 0.0;
    double err = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double r = reference[i];
        const double d = r - test[i];
        sig += r * r;
        err += d * d;
    }
    if (sig == 0.0) throw undefined_metric_error("SNR undefined for a silent reference");
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(sig / err);
}

double roundtrip_snr(const Waveform& waveform, const RvqCodebooks& cb) {
    const Waveform rebuilt = decode(encode(waveform, cb), cb, waveform.sample_rate);
    return snr_db(waveform.samples, rebuilt.samples);
}

void write_codebooks(const std::string& path, const RvqCodebooks& cb) {
    BinWriter w(path);
    w.magic("VRVQ");
    w.u16(kVrvqVersion);
    w.u16(static_cast<uint16_t>(cb.n_q));
    w.u32(static_cast<uint32_t>(cb.K));
    w.u32(static_cast<uint32_t>(cb.frame_len));
    w.u32(static_cast<uint32_t>(cb.hop));
    for (const MatF& table : cb.codebooks) w.f32_array(table.data.data(), table.size());
    w.close();
}

RvqCodebooks read_codebooks(const std::string& path) {
    BinReader r(path);
    r.expect_magic("VRVQ");
    check_version(path, r.u16(), kVrvqVersion);
    RvqCodebooks cb;
    cb.n_q = r.u16();
    cb.K = static_cast<int>(r.u32());
    cb.frame_len = static_cast<int>(r.u32());
    cb.hop = static_cast<int>(r.u32());
    if (cb.n_q < 1 || cb.K < 2 || cb.hop != cb.frame_len / 2) {
        throw artifact_mismatch_error(path + ": invalid codebook geometry (hop must be frame_len/2)");
    }
    cb.window = hann_window(cb.frame_len);
    cb.codebooks.resize(cb.n_q);
    for (MatF& table : cb.codebooks) {
        table = MatF(cb.K, cb.frame_len);
        r.f32_array(table.data.data(), table.size());
    }
    return cb;
}

void write_tokens(const std::string& path, const TokenGrid& grid) {
    if (grid.K > 0xFFFF) throw std::invalid_argument("K too large for u16 token file");
    BinWriter w(path);
    w.magic("VTOK");
    w.u16(kVtokVersion);
    w.u16(static_cast<uint16_t>(grid.n_q));
    w.u32(static_cast<uint32_t>(grid.t_a));
    w.u32(static_cast<uint32_t>(grid.K));
    for (int32_t t : grid.tokens) w.u16(static_cast<uint16_t>(t));
    w.close();
}

TokenGrid read_tokens(const std::string& path) {
    BinReader r(path);
    r.expect_magic("VTOK");
    check_version(path, r.u16(), kVtokVersion);
    TokenGrid grid;
    grid.n_q = r.u16();
    grid.t_a = static_cast<int>(r.u32());
    grid.K = static_cast<int>(r.u32());
    grid.tokens.resize(static_cast<size_t>(grid.t_a) * grid.n_q);
    for (int32_t& t : grid.tokens) t = r.u16();
    return grid;
}

}  // namespace vta
