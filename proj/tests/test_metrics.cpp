#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "vta/errors.hpp"
#include "vta/metrics.hpp"
#include "vta/rng.hpp"
#include "vta/synthworld.hpp"

using namespace vta;

namespace {

Waveform world_clip(uint64_t seed, double rate = 2.0) {
    return render_audio(generate_timeline(seed, 2.56, rate, 8), 8000);
}

}  // namespace

TEST_CASE("offset grid has 21 symmetric classes with midpoint boundaries") {
    CHECK(OffsetGrid::kClasses == 21);
    CHECK(OffsetGrid::class_offset_s(0) == doctest::Approx(-2.0));
    CHECK(OffsetGrid::class_offset_s(10) == doctest::Approx(0.0));
    CHECK(OffsetGrid::class_offset_s(20) == doctest::Approx(2.0));
    // Every lag maps to exactly one class; boundaries sit at +-0.1 s midpoints.
    CHECK(OffsetGrid::class_of_offset(0.0) == 10);
    CHECK(OffsetGrid::class_of_offset(0.099) == 10);
    CHECK(OffsetGrid::class_of_offset(0.101) == 11);
    CHECK(OffsetGrid::class_of_offset(-0.101) == 9);
    CHECK(OffsetGrid::class_of_offset(0.399) == 12);
    CHECK(OffsetGrid::class_of_offset(5.0) == 20);
    CHECK(OffsetGrid::class_of_offset(-5.0) == 0);
    for (int k = 0; k < 21; ++k) {
        CHECK(OffsetGrid::class_of_offset(OffsetGrid::class_offset_s(k)) == k);
    }
}

TEST_CASE("onset envelope of silence is all zero") {
    Waveform w;
    w.samples.assign(8000, 0.0f);
    for (double v : onset_envelope(w, 10.0)) CHECK(v == 0.0);
}

TEST_CASE("onset envelope peaks at event times") {
    EventTimeline tl;
    tl.duration_s = 2.56;
    tl.class_count = 8;
    tl.events.push_back({1.0, 2, 0.9});
    const Waveform w = render_audio(tl, 8000);
    const std::vector<double> env = onset_envelope(w, 10.0);
    const size_t peak = std::max_element(env.begin(), env.end()) - env.begin();
    const double peak_t = static_cast<double>(peak) / kEnvelopeRateHz;
    CHECK(std::abs(peak_t - 1.0) <= 0.020);

    // Two events -> two local maxima near the event times.
    tl.events.push_back({1.9, 5, 0.8});
    const Waveform w2 = render_audio(tl, 8000);
    const std::vector<double> env2 = onset_envelope(w2, 10.0);
    auto local_peak_near = [&](double t) {
        const int center = static_cast<int>(std::llround(t * kEnvelopeRateHz));
        int best = std::max(0, center - 5);
        for (int i = best; i <= std::min<int>(env2.size() - 1, center + 5); ++i) {
            if (env2[i] > env2[best]) best = i;
        }
        return std::abs(best / static_cast<double>(kEnvelopeRateHz) - t) <= 0.020 &&
               env2[best] > 0.0;
    };
    CHECK(local_peak_near(1.0));
    CHECK(local_peak_near(1.9));
}

TEST_CASE("onset envelope rejects non-positive windows") {
    Waveform w;
    w.samples.assign(100, 0.0f);
    CHECK_THROWS_AS(onset_envelope(w, 0.0), std::invalid_argument);
}

TEST_CASE("estimate_offset self-aligns rendered audio at class 0.0 s") {
    const EventTimeline tl = generate_timeline(77, 2.56, 2.0, 8);
    REQUIRE(!tl.events.empty());
    const Waveform w = render_audio(tl, 8000);
    const OffsetEstimate est = estimate_offset(w, tl);
    CHECK(est.class_index == 10);
    CHECK(std::abs(est.offset_ms) <= 20.0);
}

TEST_CASE("estimate_offset detects a constructed +0.4 s delay") {
    // Delay audio by prepending 0.4 s of silence, truncated to length.
    const EventTimeline tl = generate_timeline(99, 2.56, 2.0, 8);
    REQUIRE(!tl.events.empty());
    const Waveform w = render_audio(tl, 8000);
    Waveform delayed;
    delayed.sample_rate = w.sample_rate;
    delayed.samples.assign(w.samples.size(), 0.0f);
    const int shift = static_cast<int>(0.4 * w.sample_rate);
    for (size_t i = shift; i < w.samples.size(); ++i) {
        delayed.samples[i] = w.samples[i - shift];
    }
    const OffsetEstimate est = estimate_offset(delayed, tl);
    CHECK(est.class_index == OffsetGrid::class_of_offset(0.4));
    CHECK(est.offset_ms == doctest::Approx(400.0).epsilon(0.05));
}

TEST_CASE("estimate_offset on noise stays within the contract") {
    Rng rng(8);
    Waveform noise;
    noise.sample_rate = 8000;
    noise.samples.resize(8000 * 2);
    for (float& s : noise.samples) s = static_cast<float>(rng.normal(0.0, 0.2));
    const EventTimeline tl = generate_timeline(5, 2.0, 2.0, 8);
    REQUIRE(!tl.events.empty());
    const OffsetEstimate est = estimate_offset(noise, tl);
    CHECK(est.class_index >= 0);
    CHECK(est.class_index < 21);
    CHECK(std::abs(est.offset_ms) <= 2000.0);
}

TEST_CASE("estimate_offset rejects an empty reference timeline") {
    EventTimeline tl;
    tl.duration_s = 1.0;
    Waveform w;
    w.samples.assign(8000, 0.1f);
    w.sample_rate = 8000;
    CHECK_THROWS_AS(estimate_offset(w, tl), undefined_metric_error);
}

TEST_CASE("sync score aggregates absolute offsets") {
    CHECK(mean_abs_offset_ms({400.0, -400.0}) == doctest::Approx(400.0));
    CHECK(mean_abs_offset_ms({0.0, 0.0, 0.0}) == doctest::Approx(0.0));
    CHECK(mean_abs_offset_ms({100.0, -300.0}) == doctest::Approx(200.0));

    // Pair-order invariance via the waveform-level API.
    const EventTimeline t1 = generate_timeline(31, 2.56, 2.0, 8);
    const EventTimeline t2 = generate_timeline(32, 2.56, 2.0, 8);
    REQUIRE(!t1.events.empty());
    REQUIRE(!t2.events.empty());
    const Waveform w1 = render_audio(t1, 8000);
    const Waveform w2 = render_audio(t2, 8000);
    const double fwd = sync_score({&w1, &w2}, {&t1, &t2});
    const double rev = sync_score({&w2, &w1}, {&t2, &t1});
    CHECK(fwd == doctest::Approx(rev).epsilon(1e-12));
}

TEST_CASE("classify_audio: pure class-2 clip peaks at class 2; silence is uniform") {
    const AvEmbedder e = make_embedder(8, 8000);
    EventTimeline tl;
    tl.duration_s = 2.56;
    tl.class_count = 8;
    tl.events.push_back({0.4, 2, 0.9});
    const std::vector<double> p = classify_audio(render_audio(tl, 8000), e);
    CHECK(std::max_element(p.begin(), p.end()) - p.begin() == 2);
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-9);

    Waveform silent;
    silent.samples.assign(8000, 0.0f);
    const std::vector<double> q = classify_audio(silent, e);
    for (double v : q) CHECK(v == doctest::Approx(1.0 / 8).epsilon(1e-9));
}

TEST_CASE("kl divergence hand value and non-negativity") {
    CHECK(kl_divergence({0.5, 0.5}, {0.25, 0.75}) ==
          doctest::Approx(0.1438410362).epsilon(1e-7));
    CHECK(kl_divergence({0.3, 0.7}, {0.3, 0.7}) == doctest::Approx(0.0).epsilon(1e-12));
    Rng rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> p(6), q(6);
        double sp = 0.0, sq = 0.0;
        for (int i = 0; i < 6; ++i) {
            p[i] = rng.uniform() + 1e-6;
            q[i] = rng.uniform() + 1e-6;
            sp += p[i];
            sq += q[i];
        }
        for (int i = 0; i < 6; ++i) {
            p[i] /= sp;
            q[i] /= sq;
        }
        CHECK(kl_divergence(p, q) >= -1e-12);
    }
}

TEST_CASE("frechet distance of identical sets is zero") {
    Rng rng(3);
    MatD a(40, 8);
    for (double& v : a.data) v = rng.normal();
    CHECK(frechet_distance(a, a) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("frechet distance is symmetric") {
    Rng rng(4);
    MatD a(30, 5), b(30, 5);
    for (double& v : a.data) v = rng.normal(0.0, 1.0);
    for (double& v : b.data) v = rng.normal(0.4, 1.3);
    CHECK(frechet_distance(a, b) ==
          doctest::Approx(frechet_distance(b, a)).epsilon(1e-9));
    CHECK(frechet_distance(a, b) >= 0.0);
}

TEST_CASE("frechet distance matches the 1-D closed form by Monte Carlo") {
    // N(0,1) vs N(1,1), n = 1e5 each: FD = (mu difference)^2 = 1.
    Rng rng(5);
    MatD a(100000, 1), b(100000, 1);
    for (double& v : a.data) v = rng.normal(0.0, 1.0);
    for (double& v : b.data) v = rng.normal(1.0, 1.0);
    CHECK(frechet_distance(a, b) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("frechet distance rejects degenerate set sizes") {
    MatD a(8, 8), b(20, 8);
    CHECK_THROWS_AS(frechet_distance(a, b), std::invalid_argument);
}

TEST_CASE("ib score: identical embeddings give 100, matched clips beat permuted pairs") {
    const AvEmbedder e = make_embedder(8, 8000);
    // Matched vs mismatched pairs; permutation pairing over 200 clips.
    int win = 0;
    int n = 0;
    std::vector<ClipSample> clips;
    for (uint64_t seed = 0; seed < 210 && n < 200; ++seed) {
        ClipSample s;
        s.timeline = generate_timeline(seed + 600, 2.56, 2.0, 8);
        if (s.timeline.events.empty()) continue;
        s.audio = render_audio(s.timeline, 8000);
        s.video = render_video_features(s.timeline, 25.0, 16, 0.0);
        clips.push_back(std::move(s));
        ++n;
    }
    REQUIRE(n == 200);
    for (int i = 0; i < n; ++i) {
        const int j = (i + 7) % n;  // permuted partner
        const double matched = ib_score(clips[i].audio, clips[i].video, e);
        const double permuted = ib_score(clips[i].audio, clips[j].video, e);
        if (matched > permuted) ++win;
    }
    CHECK(win >= 190);

    // Identical embeddings: audio of clip i against a video whose embedding
    // direction matches exactly is bounded by 100; equality case via cosine.
    CHECK(100.0 * cosine({0.6, 0.8}, {0.6, 0.8}) == doctest::Approx(100.0).epsilon(1e-12));

    // Disjoint-class pair is near zero (within 10 on the 100 scale).
    EventTimeline audio_tl;
    audio_tl.duration_s = 2.56;
    audio_tl.class_count = 8;
    audio_tl.events.push_back({0.5, 1, 0.9});
    EventTimeline video_tl = audio_tl;
    video_tl.events[0].class_id = 0;
    const Waveform wa = render_audio(audio_tl, 8000);
    const VideoFeatureStream vv = render_video_features(video_tl, 25.0, 16, 0.0);
    CHECK(std::abs(ib_score(wa, vv, e)) < 10.0);
}

namespace {

struct EvalFixture {
    RvqCodebooks cb;
    Net<float> net;
    AvEmbedder embedder = make_embedder(8, 8000);
    std::vector<EvalItem> items;

    explicit EvalFixture(int n_videos) {
        std::vector<MatF> frames;
        size_t rows = 0;
        for (uint64_t seed = 0; seed < 4; ++seed) {
            const Waveform w = world_clip(seed);
            frames.push_back(analyze(w, 64, 32));
            rows += frames.back().rows;
        }
        MatF corpus(static_cast<int>(rows), 64);
        int r = 0;
        for (const MatF& m : frames) {
            std::copy(m.data.begin(), m.data.end(), corpus.row(r));
            r += m.rows;
        }
        cb = fit_rvq(corpus, 2, 16, 3, 6);
        ModelConfig cfg;
        cfg.d_a = 16;
        cfg.d_v = 8;
        cfg.d_raw = 16;
        cfg.d_h = 8;
        cfg.n_layer = 1;
        cfg.n_head = 2;
        cfg.K = cb.K;
        cfg.n_q = cb.n_q;
        net = make_net(cfg, 55);
        for (int i = 0; i < n_videos; ++i) {
            EvalItem item;
            item.id = "v" + std::to_string(i);
            item.ref = generate_timeline(900 + i, 0.64, 3.0, 8);
            item.gt_audio = render_audio(item.ref, 8000);
            VideoFeatureStream video;
            video.features = render_video_features(item.ref, 25.0, 16, 0.05).features;
            video.fps = 25.0;
            item.video = video;
            items.push_back(std::move(item));
        }
    }
};

}  // namespace

TEST_CASE("evaluate: n_gen=1 with 2 videos reports n_samples=2") {
    const EvalFixture fx(2);
    SampleConfig sc;
    sc.gamma = 2.0;
    sc.duration_s = 0.64;
    const MetricsReport rep = evaluate(fx.net, fx.cb, fx.embedder, fx.items, sc, 1, 8000);
    CHECK(rep.n_samples == 2);
    CHECK(rep.n_generations_per_video == 1);
    CHECK(std::isnan(rep.fd));  // 2 gt embeddings cannot fit an 8-dim Gaussian
    CHECK(std::isfinite(rep.kld));
    CHECK(rep.kld >= 0.0);
    CHECK(std::isfinite(rep.ib));
}

TEST_CASE("evaluate is deterministic and stable in expectation when n_gen doubles") {
    const EvalFixture fx(10);
    SampleConfig sc;
    sc.gamma = 2.0;
    sc.duration_s = 0.64;
    sc.seed = 40;
    const MetricsReport a = evaluate(fx.net, fx.cb, fx.embedder, fx.items, sc, 4, 8000);
    const MetricsReport a2 = evaluate(fx.net, fx.cb, fx.embedder, fx.items, sc, 4, 8000);
    CHECK(a.sync_ms == a2.sync_ms);
    CHECK(a.kld == a2.kld);
    CHECK(a.fd == a2.fd);
    CHECK(a.ib == a2.ib);

    // Full report fields finite and non-negative where required.
    CHECK(std::isfinite(a.sync_ms));
    CHECK(a.sync_ms >= 0.0);
    CHECK(a.fd >= -1e-8);

    // Doubling n_gen moves the estimate, not the expectation: loose bounds.
    const MetricsReport b = evaluate(fx.net, fx.cb, fx.embedder, fx.items, sc, 8, 8000);
    CHECK(std::abs(b.sync_ms - a.sync_ms) < std::max(150.0, 0.6 * a.sync_ms));
    CHECK(std::abs(b.kld - a.kld) < std::max(0.5, 0.6 * a.kld));
    CHECK(std::abs(b.ib - a.ib) < 25.0);
}
