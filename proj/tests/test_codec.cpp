#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "vta/codec.hpp"
#include "vta/errors.hpp"
#include "vta/io.hpp"
#include "vta/rng.hpp"
#include "vta/synthworld.hpp"

using namespace vta;

namespace {

Waveform world_clip(uint64_t seed, double duration = 2.56) {
    return render_audio(generate_timeline(seed, duration, 1.5, 8), 8000);
}

MatF collect_frames(int n_clips, uint64_t seed0, int frame_len = 64) {
    std::vector<MatF> per;
    size_t rows = 0;
    for (int i = 0; i < n_clips; ++i) {
        per.push_back(analyze(world_clip(seed0 + i), frame_len, frame_len / 2));
        rows += per.back().rows;
    }
    MatF corpus(static_cast<int>(rows), frame_len);
    int r = 0;
    for (const MatF& m : per) {
        std::copy(m.data.begin(), m.data.end(), corpus.row(r));
        r += m.rows;
    }
    return corpus;
}

}  // namespace

TEST_CASE("analyze: zeros in, zeros out") {
    Waveform w;
    w.samples.assign(256, 0.0f);
    const MatF f = analyze(w, 64, 32);
    CHECK(f.rows == (256 - 64) / 32 + 1);
    for (float v : f.data) CHECK(v == 0.0f);
}

TEST_CASE("analyze of a constant-one waveform reproduces the window") {
    Waveform w;
    w.samples.assign(128, 1.0f);
    const MatF f = analyze(w, 64, 32);
    const std::vector<float> win = hann_window(64);
    for (int j = 0; j < f.rows; ++j) {
        for (int i = 0; i < 64; ++i) CHECK(f.at(j, i) == win[i]);
    }
}

TEST_CASE("analyze frame count formula") {
    Waveform w;
    w.samples.assign(8096, 0.25f);
    CHECK(analyze(w, 64, 32).rows == 252);
}

TEST_CASE("analyze rejects too-short waveforms") {
    Waveform w;
    w.samples.assign(63, 0.0f);
    CHECK_THROWS_AS(analyze(w, 64, 32), std::invalid_argument);
}

TEST_CASE("hann window satisfies constant overlap-add at half hop") {
    const std::vector<float> w = hann_window(64);
    for (int n = 0; n < 32; ++n) {
        CHECK(w[n] + w[n + 32] == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("fit_rvq on exactly K distinct rows is a k-means fixed point") {
    const int K = 16;
    MatF corpus(K, 8);
    Rng rng(4);
    for (size_t i = 0; i < corpus.size(); ++i) {
        corpus.data[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
    const RvqCodebooks cb = fit_rvq(corpus, 1, K, 7, 10);
    REQUIRE(cb.codebooks.size() == 1);
    // Every corpus row appears as a centroid (any order), quantization error 0.
    std::multiset<std::vector<float>> want, got;
    for (int r = 0; r < K; ++r) {
        want.insert(std::vector<float>(corpus.row(r), corpus.row(r) + 8));
        got.insert(std::vector<float>(cb.codebooks[0].row(r), cb.codebooks[0].row(r) + 8));
    }
    CHECK(want == got);
    Waveform w;
    w.samples.assign(64, 0.0f);
    (void)w;
}

TEST_CASE("fit_rvq two-cluster hand case") {
    const int m = 5;
    MatF corpus(2 * m, 2);
    for (int i = 0; i < m; ++i) {
        corpus.at(i, 0) = 0.0f;
        corpus.at(i, 1) = 0.0f;
        corpus.at(m + i, 0) = 4.0f;
        corpus.at(m + i, 1) = 4.0f;
    }
    const RvqCodebooks cb = fit_rvq(corpus, 1, 2, 3, 10);
    const MatF& book = cb.codebooks[0];
    std::set<std::pair<float, float>> centroids;
    centroids.insert({book.at(0, 0), book.at(0, 1)});
    centroids.insert({book.at(1, 0), book.at(1, 1)});
    const std::set<std::pair<float, float>> expected{{0.0f, 0.0f}, {4.0f, 4.0f}};
    CHECK(centroids == expected);
}

TEST_CASE("fit_rvq accepts N_q=9 and produces 9 codebooks") {
    const MatF corpus = collect_frames(4, 900);
    const RvqCodebooks cb = fit_rvq(corpus, 9, 16, 1, 4);
    CHECK(cb.codebooks.size() == 9);
    CHECK(cb.n_q == 9);
}

TEST_CASE("fit_rvq rejects a corpus smaller than K") {
    MatF corpus(7, 4);
    CHECK_THROWS_AS(fit_rvq(corpus, 1, 8, 1, 5), std::invalid_argument);
}

TEST_CASE("encode recovers construction tokens exactly (N_q=1, zero-residual corpus)") {
    // Corpus = analysis frames of one waveform; with K >= distinct frames the
    // fit has zero error, decode is exact (COLA), and re-encoding decoded
    // audio reproduces the grid.
    Waveform w = world_clip(42, 0.64);
    const MatF corpus = analyze(w, 64, 32);
    const RvqCodebooks cb = fit_rvq(corpus, 1, corpus.rows, 5, 8);
    const TokenGrid grid = encode(w, cb);
    const Waveform rebuilt = decode(grid, cb, 8000);
    REQUIRE(rebuilt.samples.size() <= w.samples.size());
    // Interior samples reconstruct exactly up to float rounding.
    for (size_t i = 32; i + 64 < rebuilt.samples.size(); ++i) {
        CHECK(rebuilt.samples[i] == doctest::Approx(w.samples[i]).epsilon(5e-5));
    }
    const TokenGrid again = encode(rebuilt, cb);
    REQUIRE(again.t_a == grid.t_a);
    CHECK(again.tokens == grid.tokens);
}

TEST_CASE("encode maps an all-zero waveform to one constant token") {
    const MatF corpus = collect_frames(3, 50);
    const RvqCodebooks cb = fit_rvq(corpus, 2, 32, 9, 10);
    Waveform w;
    w.samples.assign(512, 0.0f);
    const TokenGrid grid = encode(w, cb);
    for (int j = 0; j < grid.t_a; ++j) {
        CHECK(grid.at(j, 0) == grid.at(0, 0));
        CHECK(grid.at(j, 1) == grid.at(0, 1));
    }
}

TEST_CASE("encode residual energy is monotone across levels") {
    const MatF corpus = collect_frames(6, 70);
    const RvqCodebooks cb = fit_rvq(corpus, 4, 64, 2, 10);
    // encode() itself asserts the per-frame property; held-out clips.
    for (uint64_t seed = 500; seed < 520; ++seed) {
        CHECK_NOTHROW(encode(world_clip(seed), cb));
    }
}

TEST_CASE("decode of the zero codeword is silence") {
    MatF corpus(8, 4);
    for (int r = 4; r < 8; ++r) {
        for (int c = 0; c < 4; ++c) corpus.at(r, c) = static_cast<float>(r + c);
    }
    // rows 0..3 are zero; k-means places a centroid at zero.
    const RvqCodebooks cb = fit_rvq(corpus, 1, 2, 1, 10);
    int zero_tok = -1;
    for (int k = 0; k < 2; ++k) {
        bool all_zero = true;
        for (int c = 0; c < 4; ++c) all_zero = all_zero && cb.codebooks[0].at(k, c) == 0.0f;
        if (all_zero) zero_tok = k;
    }
    REQUIRE(zero_tok >= 0);
    TokenGrid grid;
    grid.t_a = 5;
    grid.n_q = 1;
    grid.K = 2;
    grid.tokens.assign(5, zero_tok);
    const Waveform out = decode(grid, cb, 8000);
    for (float s : out.samples) CHECK(s == 0.0f);
}

TEST_CASE("decode rejects out-of-range tokens") {
    const MatF corpus = collect_frames(2, 80);
    const RvqCodebooks cb = fit_rvq(corpus, 1, 8, 1, 4);
    TokenGrid grid;
    grid.t_a = 3;
    grid.n_q = 1;
    grid.K = 8;
    grid.tokens = {0, 8, 1};
    CHECK_THROWS_AS(decode(grid, cb, 8000), invalid_token_error);
}

TEST_CASE("snr definitions: identical signals are +inf, equal-power error is 0 dB") {
    std::vector<float> a(100, 0.5f);
    CHECK(std::isinf(snr_db(a, a)));
    std::vector<float> b(100, 1.0f);  // error 0.5 everywhere = signal power
    CHECK(snr_db(a, b) == doctest::Approx(0.0).epsilon(1e-9));
    std::vector<float> silent(100, 0.0f);
    CHECK_THROWS_AS(snr_db(silent, a), undefined_metric_error);
}

TEST_CASE("roundtrip SNR improves with more levels on a small corpus") {
    const MatF corpus = collect_frames(24, 300);
    const RvqCodebooks cb1 = fit_rvq(corpus, 1, 64, 13, 12);
    const RvqCodebooks cb2 = fit_rvq(corpus, 2, 64, 13, 12);
    const RvqCodebooks cb4 = fit_rvq(corpus, 4, 64, 13, 12);
    double s1 = 0.0, s2 = 0.0, s4 = 0.0;
    int n = 0;
    for (uint64_t seed = 4000; seed < 4008; ++seed) {
        const Waveform w = world_clip(seed);
        if (mean_power(w.samples) == 0.0) continue;
        s1 += roundtrip_snr(w, cb1);
        s2 += roundtrip_snr(w, cb2);
        s4 += roundtrip_snr(w, cb4);
        ++n;
    }
    REQUIRE(n >= 6);
    CHECK(s2 >= s1);
    CHECK(s4 >= s2);
    CHECK(s4 / n > 0.0);
}

TEST_CASE("fit_rvq and encode are deterministic given seed and inputs") {
    const MatF corpus = collect_frames(4, 60);
    const RvqCodebooks a = fit_rvq(corpus, 2, 16, 77, 8);
    const RvqCodebooks b = fit_rvq(corpus, 2, 16, 77, 8);
    for (int level = 0; level < 2; ++level) {
        CHECK(a.codebooks[level].data == b.codebooks[level].data);
    }
    const Waveform w = world_clip(8);
    CHECK(encode(w, a).tokens == encode(w, b).tokens);
}

TEST_CASE("codebook and token files round trip; bad versions are named") {
    const MatF corpus = collect_frames(2, 91);
    const RvqCodebooks cb = fit_rvq(corpus, 2, 8, 3, 5);
    const std::string dir = std::filesystem::temp_directory_path().string();
    const std::string cb_path = dir + "/vta_t.vrvq";
    write_codebooks(cb_path, cb);
    const RvqCodebooks back = read_codebooks(cb_path);
    CHECK(back.n_q == cb.n_q);
    CHECK(back.K == cb.K);
    CHECK(back.frame_len == cb.frame_len);
    CHECK(back.hop == cb.hop);
    for (int level = 0; level < cb.n_q; ++level) {
        CHECK(back.codebooks[level].data == cb.codebooks[level].data);
    }

    const TokenGrid grid = encode(world_clip(12, 0.64), cb);
    const std::string tok_path = dir + "/vta_t.vtok";
    write_tokens(tok_path, grid);
    const TokenGrid tback = read_tokens(tok_path);
    CHECK(tback.t_a == grid.t_a);
    CHECK(tback.n_q == grid.n_q);
    CHECK(tback.K == grid.K);
    CHECK(tback.tokens == grid.tokens);

    // Corrupt the version field (offset 4, u16) and expect both versions named.
    std::string raw = read_text_file(cb_path);
    raw[4] = 9;
    write_text_file(cb_path, raw);
    try {
        read_codebooks(cb_path);
        FAIL("expected artifact_mismatch_error");
    } catch (const artifact_mismatch_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("9") != std::string::npos);
        CHECK(msg.find("1") != std::string::npos);
    }
    std::remove(cb_path.c_str());
    std::remove(tok_path.c_str());
}
