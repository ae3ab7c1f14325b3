// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vta/codec.hpp"
#include "vta/curation.hpp"
#include "vta/errors.hpp"
#include "vta/io.hpp"
#include "vta/metrics.hpp"
#include "vta/model.hpp"
#include "vta/pipeline.hpp"
#include "vta/rng.hpp"
#include "vta/sampler.hpp"
#include "vta/sequencer.hpp"
#include "vta/synthworld.hpp"

using namespace vta;
namespace fs = std::filesystem;

namespace {

struct Ctx {
    fs::path work;
    std::string detail;

    // Artifacts shared between the training criteria.
    std::string train_manifest, codec_path;
    std::vector<EvalItem> test_items;
    Net<float> fusion_net;
    RvqCodebooks smoke_codec;
    double fusion_train_seconds = 0.0;
    double fusion_sync = -1.0, fusion_ib = -1.0;
};

char buf[512];

// --- the smoke-train recipe shared by criteria 6 and 7 ----------------------

RunConfig smoke_config() {
    RunConfig cfg;
    cfg.seed = 1;
    cfg.world.n_clips = 1024;
    cfg.world.duration_s = 1.28;
    cfg.world.event_rate = 6.0;
    cfg.world.noise_std = 0.1;
    cfg.codec.n_q = 4;
    cfg.codec.K = 256;
    cfg.codec.fit_iters = 15;
    cfg.codec.max_fit_frames = 40000;
    cfg.model.d_a = 96;
    cfg.model.d_v = 32;
    cfg.model.d_h = 64;
    cfg.model.n_layer = 2;
    cfg.model.n_head = 4;
    cfg.train.batch_size = 8;
    cfg.train.steps = 500;
    cfg.train.lr = 1e-3;
    cfg.train.log_every = 100;
    return cfg;
}

// Held-out world for sync evaluation: denser events anchor the correlation.
RunConfig smoke_test_config() {
    RunConfig cfg = smoke_config();
    cfg.seed = 777;
    cfg.world.n_clips = 50;
    cfg.world.event_rate = 4.0;
    return cfg;
}

constexpr int kSyncGensPerClip = 2;

double mean_abs_sync(const Net<float>& net, const RvqCodebooks& cb,
                     const std::vector<EvalItem>& items, double gamma, double duration_s) {
    const int total = static_cast<int>(items.size()) * kSyncGensPerClip;
    std::vector<double> offsets(total, -1.0);
    parallel_for(total, [&](int g) {
        const int i = g / kSyncGensPerClip;
        SampleConfig sc;
        sc.gamma = gamma;
        sc.duration_s = duration_s;
        sc.seed = 9000 + g;
        const GenerateResult r = generate(net, cb, items[i].video, sc, 8000);
        try {
            offsets[g] = std::abs(estimate_offset(r.audio, items[i].ref).offset_ms);
        } catch (const undefined_metric_error&) {
        }
    });
    double acc = 0.0;
    int n = 0;
    for (double o : offsets) {
        if (o >= 0) {
            acc += o;
            ++n;
        }
    }
    return n > 0 ? acc / n : std::numeric_limits<double>::quiet_NaN();
}

double mean_ib(const Net<float>& net, const RvqCodebooks& cb, const AvEmbedder& embedder,
               const std::vector<EvalItem>& items, double gamma, double duration_s) {
    const int total = static_cast<int>(items.size()) * kSyncGensPerClip;
    std::vector<double> scores(total, 0.0);
    parallel_for(total, [&](int g) {
        const int i = g / kSyncGensPerClip;
        SampleConfig sc;
        sc.gamma = gamma;
        sc.duration_s = duration_s;
        sc.seed = 9000 + g;
        const GenerateResult r = generate(net, cb, items[i].video, sc, 8000);
        scores[g] = ib_score(r.audio, items[i].video, embedder);
    });
    double acc = 0.0;
    for (double s : scores) acc += s;
    return acc / total;
}

// --- criteria ----------------------------------------------------------------

bool criterion1(Ctx& ctx) {
    // Delay bijection: exhaustive for t_a <= 16, N_q <= 9; 1000 random above.
    int cases = 0;
    for (int t_a = 0; t_a <= 16; ++t_a) {
        for (int n_q = 1; n_q <= 9; ++n_q) {
            TokenGrid g;
            g.t_a = t_a;
            g.n_q = n_q;
            g.K = 11;
            g.tokens.resize(static_cast<size_t>(t_a) * n_q);
            Rng rng(derive_seed(3, t_a, n_q));
            for (int32_t& t : g.tokens) t = static_cast<int32_t>(rng.uniform_index(g.K));
            const TokenGrid back = remove_delay(apply_delay(g));
            if (back.tokens != g.tokens || back.t_a != g.t_a) return false;
            ++cases;
        }
    }
    Rng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
        TokenGrid g;
        g.t_a = 17 + static_cast<int>(rng.uniform_index(700));
        g.n_q = 1 + static_cast<int>(rng.uniform_index(9));
        g.K = 256;
        g.tokens.resize(static_cast<size_t>(g.t_a) * g.n_q);
        for (int32_t& t : g.tokens) t = static_cast<int32_t>(rng.uniform_index(g.K));
        const TokenGrid back = remove_delay(apply_delay(g));
        if (back.tokens != g.tokens) return false;
        ++cases;
    }
    snprintf(buf, sizeof buf, "%d grids, zero mismatches", cases);
    ctx.detail = buf;
    return true;
}

bool criterion2(Ctx& ctx) {
    // Codec roundtrip at N_q=4, K=256 fitted on 1000 clips.
    const int frame_len = 64;
    std::vector<MatF> per_clip(1000);
    parallel_for(1000, [&](int i) {
        const Waveform w =
            render_audio(generate_timeline(derive_seed(40, i), 2.56, 2.0, 8), 8000);
        per_clip[i] = analyze(w, frame_len, frame_len / 2);
    });
    size_t total = 0;
    for (const MatF& m : per_clip) total += m.rows;
    const size_t budget = 40000;
    const size_t stride = std::max<size_t>(1, (total + budget - 1) / budget);
    MatF corpus(static_cast<int>((total + stride - 1) / stride), frame_len);
    int row = 0;
    size_t global = 0;
    for (const MatF& m : per_clip) {
        for (int r = 0; r < m.rows; ++r, ++global) {
            if (global % stride == 0) std::copy_n(m.row(r), frame_len, corpus.row(row++));
        }
    }
    corpus.rows = row;
    corpus.data.resize(static_cast<size_t>(row) * frame_len);
    per_clip.clear();

    const RvqCodebooks cb4 = fit_rvq(corpus, 4, 256, 11, 15);
    // Levels nest: the first n codebooks of the 4-level fit are exactly the
    // n-level fit (per-level seeding depends only on the level index).
    auto sub_codec = [&](int n_q) {
        RvqCodebooks cb = cb4;
        cb.n_q = n_q;
        cb.codebooks.resize(n_q);
        return cb;
    };
    const RvqCodebooks cb1 = sub_codec(1);
    const RvqCodebooks cb2 = sub_codec(2);

    std::vector<double> snr1(100), snr2(100), snr4(100);
    parallel_for(100, [&](int i) {
        const Waveform w =
            render_audio(generate_timeline(derive_seed(41, i), 2.56, 2.0, 8), 8000);
        if (mean_power(w.samples) == 0.0) {
            snr1[i] = snr2[i] = snr4[i] = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        snr1[i] = roundtrip_snr(w, cb1);
        snr2[i] = roundtrip_snr(w, cb2);
        snr4[i] = roundtrip_snr(w, cb4);
    });
    auto median_of = [](std::vector<double> v) {
        v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }),
                v.end());
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    const double m1 = median_of(snr1), m2 = median_of(snr2), m4 = median_of(snr4);
    snprintf(buf, sizeof buf, "median SNR dB: N_q=1 %.2f, N_q=2 %.2f, N_q=4 %.2f", m1, m2, m4);
    ctx.detail = buf;
    return m4 >= 10.0 && m4 >= m2 && m2 >= m1;
}

bool criterion3(Ctx& ctx) {
    // Gradient correctness at 64-bit over >= 200 coordinates.
    ModelConfig cfg;
    cfg.d_a = 12;
    cfg.d_v = 4;
    cfg.d_raw = 3;
    cfg.d_h = 6;
    cfg.n_layer = 2;
    cfg.n_head = 2;
    cfg.K = 5;
    cfg.n_q = 2;
    const Net<double> net = to_double(make_net(cfg, 19));
    MatF video(5, cfg.d_raw);
    Rng rng(20);
    for (float& v : video.data) v = static_cast<float>(rng.normal(0.0, 0.5));

    auto plan_for = [&](bool drop, uint64_t seed) {
        TokenGrid g;
        g.t_a = 7;
        g.n_q = cfg.n_q;
        g.K = cfg.K;
        g.tokens.resize(static_cast<size_t>(g.t_a) * g.n_q);
        Rng trng(seed);
        for (int32_t& t : g.tokens) t = static_cast<int32_t>(trng.uniform_index(g.K));
        return make_fusion_plan(apply_delay(g), build_alignment(video.rows, g.t_a, g.n_q), video,
                                drop);
    };
    const std::vector<SequencePlan> plans{plan_for(false, 21), plan_for(true, 22)};
    const int n_tensors = static_cast<int>(net.lay.tensors.size());
    const int n_coords = ((200 + n_tensors - 1) / n_tensors) * n_tensors;  // >= 200, all families
    const double max_rel = grad_check(net, plans, n_coords, 23);
    snprintf(buf, sizeof buf, "%d coordinates over %d tensors, max relative error %.3g",
             n_coords, n_tensors, max_rel);
    ctx.detail = buf;
    return max_rel < 1e-4;
}

bool criterion4(Ctx& ctx) {
    // Causality: bitwise logit stability plus the alignment timestamp audit.
    ModelConfig cfg;
    cfg.d_a = 24;
    cfg.d_v = 8;
    cfg.d_raw = 4;
    cfg.d_h = 8;
    cfg.n_layer = 2;
    cfg.n_head = 2;
    cfg.K = 9;
    cfg.n_q = 2;
    const Net<float> net = make_net(cfg, 31);
    Rng rng(32);
    int probes = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int L = 3 + static_cast<int>(rng.uniform_index(14));
        Mat<float> fused(L, cfg.d());
        for (float& v : fused.data) v = static_cast<float>(rng.normal());
        const std::vector<float> base = forward_fused(net, fused);
        const int j = static_cast<int>(rng.uniform_index(L - 1));  // perturb row j+1
        Mat<float> mod = fused;
        mod.at(j + 1, static_cast<int>(rng.uniform_index(cfg.d()))) += 2.0f;
        const std::vector<float> out = forward_fused(net, mod);
        const size_t prefix = static_cast<size_t>(j + 1) * cfg.n_q * cfg.vocab();
        if (std::memcmp(base.data(), out.data(), prefix * sizeof(float)) != 0) return false;
        ++probes;
    }
    // Alignment audit at the default world geometry and 50 random shapes.
    for (int trial = 0; trial < 50; ++trial) {
        const int t_v = 1 + static_cast<int>(rng.uniform_index(128));
        const int t_a = std::max(1, t_v * (1 + static_cast<int>(rng.uniform_index(12))));
        const AlignmentMap map = build_alignment(t_v, t_a, 4);
        if (!alignment_is_causal(map, 25.0, 8000, 64, 32)) return false;
        for (int j = 0; j < t_a; ++j) {
            const int bound = static_cast<int>(
                std::ceil(static_cast<double>(j + 1) * t_v / t_a - 1e-12));
            if (map.frame_of[j] + 1 > bound) return false;
        }
    }
    snprintf(buf, sizeof buf, "%d bitwise probes, 50 alignment audits, zero violations", probes);
    ctx.detail = buf;
    return true;
}

bool criterion5(Ctx& ctx) {
    // CFG exactness at 64-bit.
    Rng rng(41);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> raw_c(257), raw_u(257);
        for (double& v : raw_c) v = rng.normal(0.0, 4.0);
        for (double& v : raw_u) v = rng.normal(0.0, 4.0);
        const std::vector<double> lc = log_softmax(raw_c);
        const std::vector<double> mixed = cfg_mix(lc, log_softmax(raw_u), 1.0);
        for (size_t i = 0; i < lc.size(); ++i) {
            worst = std::max(worst, std::abs(mixed[i] - lc[i]));
        }
    }
    const std::vector<double> mixed =
        cfg_mix({std::log(0.8), std::log(0.2)}, {std::log(0.5), std::log(0.5)}, 6.0);
    const double err0 = std::abs(std::exp(mixed[0]) - 0.999755918965096);
    const double err1 = std::abs(std::exp(mixed[1]) - 2.44081034903588e-4);
    snprintf(buf, sizeof buf, "gamma=1 max abs diff %.3g; hand-example errors %.3g / %.3g", worst,
             err0, err1);
    ctx.detail = buf;
    return worst < 1e-12 && err0 < 1e-9 && err1 < 1e-9;
}

bool train_smoke_artifacts(Ctx& ctx) {
    const RunConfig cfg = smoke_config();
    const fs::path root = ctx.work / "smoke";
    ctx.train_manifest = cmd_synth(cfg, (root / "data").string(), true);
    ctx.codec_path = (root / "codec.vrvq").string();
    cmd_codec_fit(cfg, ctx.train_manifest, ctx.codec_path);
    ctx.smoke_codec = read_codebooks(ctx.codec_path);

    const RunConfig tcfg = smoke_test_config();
    const std::string tman = cmd_synth(tcfg, (root / "test").string(), true);
    ctx.test_items = load_eval_items(tcfg, read_manifest(tman));

    const auto t0 = std::chrono::steady_clock::now();
    const TrainOutputs out =
        cmd_train(cfg, ctx.train_manifest, ctx.codec_path, (root / "train_fusion").string());
    ctx.fusion_train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ctx.fusion_net = read_checkpoint(out.checkpoint_path);
    return true;
}

// Envelope peak counter for the generated-onset regression check.
int count_onsets(const Waveform& w) {
    const std::vector<double> env = onset_envelope(w, 10.0);
    if (env.size() < 3) return 0;
    double mx = 0.0;
    for (double v : env) mx = std::max(mx, v);
    if (mx <= 1e-4) return 0;
    const double thr = 0.3 * mx;
    int count = 0;
    for (size_t i = 0; i + 1 < env.size(); ++i) {
        const double prev = i == 0 ? 0.0 : env[i - 1];
        if (env[i] >= thr && env[i] >= prev && env[i] >= env[i + 1]) {
            ++count;
            i += 6;  // 24 ms refractory
        }
    }
    return count;
}

// Recorded at the first successful training of this recipe: the guided
// sampler over-generates onsets relative to the reference count (energy
// inflation under strong guidance), so the agreement rate is low and pinned
// here as a regression floor rather than a quality target.
constexpr int kOnsetAgreementFloor = 6;  // of 50 clips, recorded 8/50

bool onset_regression(Ctx& ctx) {
    std::vector<int> got(ctx.test_items.size()), want(ctx.test_items.size());
    parallel_for(static_cast<int>(ctx.test_items.size()), [&](int i) {
        SampleConfig sc;
        sc.gamma = 6.0;
        sc.duration_s = smoke_config().world.duration_s;
        sc.seed = 4000 + i;
        const GenerateResult r = generate(ctx.fusion_net, ctx.smoke_codec,
                                          ctx.test_items[i].video, sc, 8000);
        got[i] = count_onsets(r.audio);
        want[i] = static_cast<int>(ctx.test_items[i].ref.events.size());
    });
    int within1 = 0;
    for (size_t i = 0; i < got.size(); ++i) {
        if (std::abs(got[i] - want[i]) <= 1) ++within1;
    }
    snprintf(buf, sizeof buf, "onset count within +-1 of reference on %d/%zu clips (floor %d)",
             within1, got.size(), kOnsetAgreementFloor);
    ctx.detail = buf;
    return within1 >= kOnsetAgreementFloor;
}

bool criterion6(Ctx& ctx) {
    const RunConfig cfg = smoke_config();
    train_smoke_artifacts(ctx);
    const Net<float> untrained = make_net(cfg.model_config(), cfg.seed);

    const double d = cfg.world.duration_s;
    const double untrained_sync = mean_abs_sync(untrained, ctx.smoke_codec, ctx.test_items, 6.0, d);
    const double g6 = mean_abs_sync(ctx.fusion_net, ctx.smoke_codec, ctx.test_items, 6.0, d);
    const double g1 = mean_abs_sync(ctx.fusion_net, ctx.smoke_codec, ctx.test_items, 1.0, d);
    ctx.fusion_sync = g6;
    snprintf(buf, sizeof buf,
             "mean |offset| ms: untrained %.0f, gamma=6 %.0f, gamma=1 %.0f (train %.0f s)",
             untrained_sync, g6, g1, ctx.fusion_train_seconds);
    ctx.detail = buf;
    return g6 <= untrained_sync / 2.0 && g6 <= g1 / 2.0;
}

bool criterion7(Ctx& ctx) {
    RunConfig cfg = smoke_config();
    cfg.train.conditioning = "prepend";
    const TrainOutputs out = cmd_train(cfg, ctx.train_manifest, ctx.codec_path,
                                       (ctx.work / "smoke" / "train_prepend").string());
    const Net<float> prepend_net = read_checkpoint(out.checkpoint_path);
    const AvEmbedder embedder = make_embedder(cfg.world.class_count, cfg.world.sample_rate);

    const double d = cfg.world.duration_s;
    const double prepend_sync = mean_abs_sync(prepend_net, ctx.smoke_codec, ctx.test_items, 6.0, d);
    const double prepend_ib = mean_ib(prepend_net, ctx.smoke_codec, embedder, ctx.test_items, 6.0, d);
    ctx.fusion_ib = mean_ib(ctx.fusion_net, ctx.smoke_codec, embedder, ctx.test_items, 6.0, d);
    snprintf(buf, sizeof buf, "sync ms fusion %.0f vs prepend %.0f; IB fusion %.1f vs prepend %.1f",
             ctx.fusion_sync, prepend_sync, ctx.fusion_ib, prepend_ib);
    ctx.detail = buf;
    return ctx.fusion_sync < prepend_sync && ctx.fusion_ib > prepend_ib;
}

bool criterion8(Ctx& ctx) {
    // Curation trend on 40% replace-corrupted data, fixed-epoch budget.
    RunConfig cfg = smoke_config();
    cfg.seed = 5;
    cfg.world.n_clips = 512;
    cfg.world.p_corrupt = 0.4;
    cfg.world.corruption_mode = "replace";
    cfg.curation.threshold = 0.8;
    cfg.train.steps = 0;
    cfg.train.epochs = 5;

    const fs::path root = ctx.work / "curation";
    const std::string manifest = cmd_synth(cfg, (root / "data").string(), true);
    const std::string codec_path = (root / "codec.vrvq").string();
    cmd_codec_fit(cfg, manifest, codec_path);
    const RvqCodebooks cb = read_codebooks(codec_path);

    const CurateOutputs cur = cmd_curate(cfg, manifest, (root / "curated").string());

    const auto t0 = std::chrono::steady_clock::now();
    const TrainOutputs unfiltered = cmd_train(cfg, manifest, codec_path, (root / "train_all").string());
    const double secs_all =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto t1 = std::chrono::steady_clock::now();
    const TrainOutputs filtered =
        cmd_train(cfg, cur.manifest_path, codec_path, (root / "train_cur").string());
    const double secs_cur =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();

    // Clean evaluation world.
    RunConfig tcfg = cfg;
    tcfg.seed = 888;
    tcfg.world.n_clips = 40;
    tcfg.world.p_corrupt = 0.0;
    const std::string tman = cmd_synth(tcfg, (root / "test").string(), true);
    const std::vector<EvalItem> items = load_eval_items(tcfg, read_manifest(tman));
    const AvEmbedder embedder = make_embedder(cfg.world.class_count, cfg.world.sample_rate);

    const Net<float> net_all = read_checkpoint(unfiltered.checkpoint_path);
    const Net<float> net_cur = read_checkpoint(filtered.checkpoint_path);

    auto kld_of = [&](const Net<float>& net) {
        std::vector<double> klds(items.size(), 0.0);
        parallel_for(static_cast<int>(items.size()), [&](int i) {
            SampleConfig sc;
            sc.gamma = 6.0;
            sc.duration_s = cfg.world.duration_s;
            sc.seed = 700 + i;
            const GenerateResult r = generate(net, cb, items[i].video, sc, 8000);
            klds[i] = kl_divergence(classify_audio(items[i].gt_audio, embedder),
                                    classify_audio(r.audio, embedder));
        });
        double acc = 0.0;
        for (double v : klds) acc += v;
        return acc / items.size();
    };
    const double kld_all = kld_of(net_all);
    const double kld_cur = kld_of(net_cur);
    const double ib_all = mean_ib(net_all, cb, embedder, items, 6.0, cfg.world.duration_s);
    const double ib_cur = mean_ib(net_cur, cb, embedder, items, 6.0, cfg.world.duration_s);

    snprintf(buf, sizeof buf,
             "kept %d/%d; KLD %.3f->%.3f; IB %.1f->%.1f; train %.0fs->%.0fs",
             cur.report.kept, cur.report.kept + cur.report.dropped, kld_all, kld_cur, ib_all,
             ib_cur, secs_all, secs_cur);
    ctx.detail = buf;
    return kld_cur < kld_all && ib_cur > ib_all && secs_cur < secs_all;
}

bool criterion9(Ctx& ctx) {
    // Metric oracles.
    const double kl = kl_divergence({0.5, 0.5}, {0.25, 0.75});
    if (std::abs(kl - 0.1438410362) > 1e-4) return false;

    Rng rng(51);
    MatD a(60, 8), b(60, 8);
    for (double& v : a.data) v = rng.normal();
    for (double& v : b.data) v = rng.normal(0.3, 1.2);
    if (frechet_distance(a, a) > 1e-6) return false;
    if (std::abs(frechet_distance(a, b) - frechet_distance(b, a)) > 1e-9) return false;

    MatD s1(100000, 1), s2(100000, 1);
    for (double& v : s1.data) v = rng.normal(0.0, 1.0);
    for (double& v : s2.data) v = rng.normal(1.0, 1.0);
    const double fd_mc = frechet_distance(s1, s2);
    if (std::abs(fd_mc - 1.0) > 0.05) return false;

    // +0.4 s shift lands in the +0.4 s class.
    const EventTimeline tl = generate_timeline(99, 2.56, 2.0, 8);
    const Waveform w = render_audio(tl, 8000);
    Waveform delayed;
    delayed.sample_rate = w.sample_rate;
    delayed.samples.assign(w.samples.size(), 0.0f);
    const int shift = static_cast<int>(0.4 * w.sample_rate);
    for (size_t i = shift; i < w.samples.size(); ++i) delayed.samples[i] = w.samples[i - shift];
    const OffsetEstimate est = estimate_offset(delayed, tl);
    if (est.class_index != OffsetGrid::class_of_offset(0.4)) return false;

    // Curation ROC-AUC on clean vs replace-corrupted.
    const AvEmbedder embedder = make_embedder(8, 8000);
    std::vector<double> clean_sims, corrupt_sims;
    for (uint64_t seed = 0; seed < 150; ++seed) {
        ClipSample s;
        s.timeline = generate_timeline(seed + 2000, 2.56, 2.0, 8);
        if (s.timeline.events.empty()) continue;
        s.audio = render_audio(s.timeline, 8000);
        s.video = render_video_features(s.timeline, 25.0, 16, 0.05);
        clean_sims.push_back(av_similarity(s, embedder));
        corrupt_sims.push_back(av_similarity(corrupt_audio(s, Corruption::replace, seed + 1), embedder));
    }
    double wins = 0.0;
    for (double p : clean_sims) {
        for (double q : corrupt_sims) wins += p > q ? 1.0 : (p == q ? 0.5 : 0.0);
    }
    const double auc = wins / (clean_sims.size() * corrupt_sims.size());
    snprintf(buf, sizeof buf, "KL %.6f; FD mc %.3f; shift class +0.4 s; ROC-AUC %.3f", kl, fd_mc,
             auc);
    ctx.detail = buf;
    return auc >= 0.9;
}

bool criterion10(Ctx& ctx) {
    // Determinism: the smoke pipeline re-run is byte-identical (artifacts
    // exclude provenance sidecars and the wall-clock training log).
    RunConfig cfg = smoke_config();
    cfg.world.n_clips = 24;
    cfg.codec.K = 64;
    cfg.codec.max_fit_frames = 6000;
    cfg.train.steps = 20;
    cfg.eval.n_gen = 1;
    cfg.world.p_corrupt = 0.25;

    auto run_all = [&](const std::string& tag) {
        const fs::path root = ctx.work / ("det_" + tag);
        fs::remove_all(root);
        const std::string manifest = cmd_synth(cfg, (root / "data").string(), true);
        const std::string codec = (root / "codec.vrvq").string();
        cmd_codec_fit(cfg, manifest, codec);
        const TrainOutputs t = cmd_train(cfg, manifest, codec, (root / "run").string());
        cmd_generate(cfg, t.checkpoint_path, codec, (root / "data" / "clip_00003.vfea").string(),
                     (root / "gen").string(), 3);
        cmd_curate(cfg, manifest, (root / "cur").string());
        cmd_eval(cfg, t.checkpoint_path, codec, manifest, (root / "eval").string());
        std::map<std::string, std::string> bytes;
        for (const auto& entry : fs::recursive_directory_iterator(root)) {
            if (!entry.is_regular_file()) continue;
            const std::string name = entry.path().filename().string();
            if (name.ends_with(".prov.json") || name == "log.csv") continue;
            bytes[fs::relative(entry.path(), root).string()] =
                read_text_file(entry.path().string());
        }
        return bytes;
    };
    const auto a = run_all("a");
    const auto b = run_all("b");
    if (a.size() != b.size()) return false;
    int files = 0;
    for (const auto& [name, content] : a) {
        const auto it = b.find(name);
        if (it == b.end() || it->second != content) {
            ctx.detail = "mismatch at " + name;
            return false;
        }
        ++files;
    }
    snprintf(buf, sizeof buf, "%d artifacts byte-identical across re-runs", files);
    ctx.detail = buf;
    return true;
}

}  // namespace

int main() {
    Ctx ctx;
    ctx.work = fs::temp_directory_path() / "vta_acceptance";
    fs::remove_all(ctx.work);
    fs::create_directories(ctx.work);

    struct Criterion {
        int id;
        const char* label;
        std::function<bool(Ctx&)> run;
    };
    const std::vector<Criterion> criteria{
        {1, "delay-pattern bijection", criterion1},
        {2, "codec roundtrip SNR", criterion2},
        {3, "gradient correctness", criterion3},
        {4, "causality", criterion4},
        {5, "CFG exactness", criterion5},
        {6, "end-to-end learning trend", criterion6},
        {0, "generated onset-count regression", onset_regression},
        {7, "conditioning ablation trend", criterion7},
        {8, "curation trend", criterion8},
        {9, "metric oracles", criterion9},
        {10, "determinism", criterion10},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        bool ok = false;
        ctx.detail.clear();
        try {
            ok = c.run(ctx);
        } catch (const std::exception& e) {
            ctx.detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.id > 0) {
            std::printf("[%s] criterion %d (%s): %s (%.1f s)\n", ok ? "PASS" : "FAIL", c.id,
                        c.label, ctx.detail.c_str(), secs);
        } else {
            std::printf("[%s] extra (%s): %s (%.1f s)\n", ok ? "PASS" : "FAIL", c.label,
                        ctx.detail.c_str(), secs);
        }
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
