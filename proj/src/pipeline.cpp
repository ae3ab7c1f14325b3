#include "vta/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "vta/errors.hpp"
#include "vta/io.hpp"
#include "vta/rng.hpp"
#include "vta/sequencer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vta {

// --- config -------------------------------------------------------------------

ModelConfig RunConfig::model_config() const {
    ModelConfig m;
    m.d_a = model.d_a;
    m.d_v = model.d_v;
    m.d_raw = world.d_raw;
    m.d_h = model.d_h;
    m.n_layer = model.n_layer;
    m.n_head = model.n_head;
    m.K = codec.K;
    m.n_q = codec.n_q;
    return m;
}

namespace {

void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("unknown config key '" + where + key + "'");
        }
    }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["world"] = {{"n_clips", world.n_clips},
                  {"duration_s", world.duration_s},
                  {"sample_rate", world.sample_rate},
                  {"fps", world.fps},
                  {"d_raw", world.d_raw},
                  {"class_count", world.class_count},
                  {"event_rate", world.event_rate},
                  {"noise_std", world.noise_std},
                  {"p_corrupt", world.p_corrupt},
                  {"corruption_mode", world.corruption_mode}};
    j["codec"] = {{"n_q", codec.n_q},
                  {"K", codec.K},
                  {"frame_len", codec.frame_len},
                  {"hop", codec.hop},
                  {"fit_iters", codec.fit_iters},
                  {"max_fit_frames", codec.max_fit_frames}};
    j["model"] = {{"d_a", model.d_a},
                  {"d_v", model.d_v},
                  {"d_h", model.d_h},
                  {"n_layer", model.n_layer},
                  {"n_head", model.n_head}};
    j["train"] = {{"lr", train.lr},
                  {"weight_decay", train.weight_decay},
                  {"cfg_dropout", train.cfg_dropout},
                  {"batch_size", train.batch_size},
                  {"steps", train.steps},
                  {"epochs", train.epochs},
                  {"grad_clip", train.grad_clip},
                  {"log_every", train.log_every},
                  {"conditioning", train.conditioning}};
    j["sample"] = {{"gamma", sample.gamma},
                   {"temperature", sample.temperature},
                   {"top_k", sample.top_k}};
    j["curation"] = {{"threshold", curation.threshold}, {"sweep", curation.sweep}};
    j["eval"] = {{"n_gen", eval.n_gen}};
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    RunConfig c;
    reject_unknown_keys(
        j, {"seed", "out_dir", "world", "codec", "model", "train", "sample", "curation", "eval"},
        "");
    maybe(j, "seed", c.seed);
    maybe(j, "out_dir", c.out_dir);
    if (j.contains("world")) {
        const json& w = j.at("world");
        reject_unknown_keys(w,
                            {"n_clips", "duration_s", "sample_rate", "fps", "d_raw", "class_count",
                             "event_rate", "noise_std", "p_corrupt", "corruption_mode"},
                            "world.");
        maybe(w, "n_clips", c.world.n_clips);
        maybe(w, "duration_s", c.world.duration_s);
        maybe(w, "sample_rate", c.world.sample_rate);
        maybe(w, "fps", c.world.fps);
        maybe(w, "d_raw", c.world.d_raw);
        maybe(w, "class_count", c.world.class_count);
        maybe(w, "event_rate", c.world.event_rate);
        maybe(w, "noise_std", c.world.noise_std);
        maybe(w, "p_corrupt", c.world.p_corrupt);
        maybe(w, "corruption_mode", c.world.corruption_mode);
    }
    if (j.contains("codec")) {
        const json& jc = j.at("codec");
        reject_unknown_keys(jc, {"n_q", "K", "frame_len", "hop", "fit_iters", "max_fit_frames"},
                            "codec.");
        maybe(jc, "n_q", c.codec.n_q);
        maybe(jc, "K", c.codec.K);
        maybe(jc, "frame_len", c.codec.frame_len);
        maybe(jc, "hop", c.codec.hop);
        maybe(jc, "fit_iters", c.codec.fit_iters);
        maybe(jc, "max_fit_frames", c.codec.max_fit_frames);
    }
    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown_keys(m, {"d_a", "d_v", "d_h", "n_layer", "n_head"}, "model.");
        maybe(m, "d_a", c.model.d_a);
        maybe(m, "d_v", c.model.d_v);
        maybe(m, "d_h", c.model.d_h);
        maybe(m, "n_layer", c.model.n_layer);
        maybe(m, "n_head", c.model.n_head);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown_keys(t,
                            {"lr", "weight_decay", "cfg_dropout", "batch_size", "steps", "epochs",
                             "grad_clip", "log_every", "conditioning"},
                            "train.");
        maybe(t, "lr", c.train.lr);
        maybe(t, "weight_decay", c.train.weight_decay);
        maybe(t, "cfg_dropout", c.train.cfg_dropout);
        maybe(t, "batch_size", c.train.batch_size);
        maybe(t, "steps", c.train.steps);
        maybe(t, "epochs", c.train.epochs);
        maybe(t, "grad_clip", c.train.grad_clip);
        maybe(t, "log_every", c.train.log_every);
        maybe(t, "conditioning", c.train.conditioning);
    }
    if (j.contains("sample")) {
        const json& s = j.at("sample");
        reject_unknown_keys(s, {"gamma", "temperature", "top_k"}, "sample.");
        maybe(s, "gamma", c.sample.gamma);
        maybe(s, "temperature", c.sample.temperature);
        maybe(s, "top_k", c.sample.top_k);
    }
    if (j.contains("curation")) {
        const json& cu = j.at("curation");
        reject_unknown_keys(cu, {"threshold", "sweep"}, "curation.");
        maybe(cu, "threshold", c.curation.threshold);
        maybe(cu, "sweep", c.curation.sweep);
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        reject_unknown_keys(e, {"n_gen"}, "eval.");
        maybe(e, "n_gen", c.eval.n_gen);
    }
    if (c.train.cfg_dropout < 0.0 || c.train.cfg_dropout >= 1.0) {
        throw std::invalid_argument("train.cfg_dropout must be in [0, 1)");
    }
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    return from_json(read_text_file(path));
}

void prepare_output_dir(const std::string& dir, bool force) {
    if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
        throw std::invalid_argument("output directory '" + dir +
                                    "' is not empty; pass --force to reuse it");
    }
    fs::create_directories(dir);
}

void write_provenance(const std::string& artifact_path, const std::string& command,
                      const RunConfig& config,
                      const std::vector<std::pair<std::string, std::string>>& inputs) {
    json j;
    j["tool_version"] = kToolVersion;
    j["command"] = command;
    j["created_unix"] = static_cast<int64_t>(
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
    j["config_hash"] = hash_string_hex(config.to_json());
    json in = json::object();
    for (const auto& [label, path] : inputs) {
        in[label] = {{"path", path}, {"hash", hash_file_hex(path)}};
    }
    j["inputs"] = in;
    j["artifact"] = {{"path", artifact_path}, {"hash", hash_file_hex(artifact_path)}};
    write_text_file(artifact_path + ".prov.json", j.dump(2));
}

// --- synth ---------------------------------------------------------------------

namespace {

std::string clip_id(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%05d", index);
    return buf;
}

Waveform canonical16(Waveform w) {
    for (float& s : w.samples) s = dequantize16(quantize16(s));
    return w;
}

}  // namespace

ClipSample load_clip(const RunConfig& config, const ManifestRecord& rec) {
    ClipSample s;
    s.id = rec.id;
    s.corruption = corruption_from_name(rec.corruption);
    s.timeline = generate_timeline(rec.seed, rec.duration_s, config.world.event_rate,
                                   config.world.class_count);
    int sr = 0;
    s.audio.samples = read_wav(rec.audio_path, &sr);
    s.audio.sample_rate = sr;
    s.video.features = read_vfea(rec.video_path);
    s.video.fps = config.world.fps;
    return s;
}

std::string cmd_synth(const RunConfig& config, const std::string& out_dir, bool force) {
    prepare_output_dir(out_dir, force);
    const auto& w = config.world;
    if (w.n_clips < 1) throw std::invalid_argument("world.n_clips must be >= 1");

    // Seeded choice of exactly round(N * p_corrupt) corrupted clips.
    const int n_corrupt =
        static_cast<int>(std::llround(w.n_clips * std::clamp(w.p_corrupt, 0.0, 1.0)));
    std::vector<int> order(w.n_clips);
    std::iota(order.begin(), order.end(), 0);
    Rng pick(derive_seed(config.seed, 0x636f7272ULL));
    for (int i = w.n_clips - 1; i > 0; --i) {
        std::swap(order[i], order[pick.uniform_index(i + 1)]);
    }
    std::vector<char> corrupted(w.n_clips, 0);
    for (int i = 0; i < n_corrupt; ++i) corrupted[order[i]] = 1;

    std::vector<ManifestRecord> records(w.n_clips);
    parallel_for(w.n_clips, [&](int i) {
        const uint64_t clip_seed = derive_seed(config.seed, 0x636c6970ULL, i);
        ClipSample s;
        s.id = clip_id(i);
        s.timeline = generate_timeline(clip_seed, w.duration_s, w.event_rate, w.class_count);
        s.audio = render_audio(s.timeline, w.sample_rate);
        s.video = render_video_features(s.timeline, w.fps, w.d_raw, w.noise_std);
        if (corrupted[i]) {
            Corruption mode;
            if (w.corruption_mode == "mixed") {
                Rng mrng(derive_seed(config.seed, 0x6d6f6465ULL, i));
                const Corruption modes[3] = {Corruption::replace, Corruption::tone,
                                             Corruption::noise};
                mode = modes[mrng.uniform_index(3)];
            } else {
                mode = corruption_from_name(w.corruption_mode);
            }
            s = corrupt_audio(s, mode, derive_seed(config.seed, 0x63727074ULL, i));
        }
        // Canonicalize to the 16-bit grid so files and memory agree exactly.
        s.audio = canonical16(std::move(s.audio));

        ManifestRecord rec;
        rec.id = s.id;
        rec.seed = clip_seed;
        rec.duration_s = w.duration_s;
        rec.corruption = corruption_name(s.corruption);
        rec.audio_path = (fs::path(out_dir) / (s.id + ".wav")).string();
        rec.video_path = (fs::path(out_dir) / (s.id + ".vfea")).string();
        write_wav(rec.audio_path, s.audio.samples, s.audio.sample_rate);
        write_vfea(rec.video_path, s.video.features);
        records[i] = std::move(rec);
    });

    const std::string manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
    write_manifest(manifest_path, records);
    write_text_file((fs::path(out_dir) / "config.json").string(), config.to_json());
    write_provenance(manifest_path, "synth", config, {});
    return manifest_path;
}

// --- codec fit -------------------------------------------------------------------

std::string cmd_codec_fit(const RunConfig& config, const std::string& manifest_path,
                          const std::string& out_path) {
    const std::vector<ManifestRecord> records = read_manifest(manifest_path);
    if (records.empty()) throw std::invalid_argument("manifest has no records");
    if (config.codec.hop != config.codec.frame_len / 2) {
        throw std::invalid_argument("codec.hop must equal frame_len/2");
    }

    std::vector<MatF> per_clip(records.size());
    parallel_for(static_cast<int>(records.size()), [&](int i) {
        int sr = 0;
        Waveform wav;
        wav.samples = read_wav(records[i].audio_path, &sr);
        wav.sample_rate = sr;
        per_clip[i] = analyze(wav, config.codec.frame_len, config.codec.hop);
    });

    size_t total_frames = 0;
    for (const MatF& m : per_clip) total_frames += m.rows;
    const size_t budget = static_cast<size_t>(std::max(config.codec.max_fit_frames, config.codec.K));
    const size_t stride = std::max<size_t>(1, (total_frames + budget - 1) / budget);

    MatF corpus(static_cast<int>((total_frames + stride - 1) / stride), config.codec.frame_len);
    int row = 0;
    size_t global = 0;
    for (const MatF& m : per_clip) {
        for (int r = 0; r < m.rows; ++r, ++global) {
            if (global % stride == 0) std::copy_n(m.row(r), m.cols, corpus.row(row++));
        }
    }
    corpus.rows = row;
    corpus.data.resize(static_cast<size_t>(row) * corpus.cols);

    const RvqCodebooks cb = fit_rvq(corpus, config.codec.n_q, config.codec.K,
                                    derive_seed(config.seed, 0x72767166ULL), config.codec.fit_iters);
    fs::create_directories(fs::path(out_path).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(out_path).parent_path());
    write_codebooks(out_path, cb);
    write_provenance(out_path, "codec-fit", config, {{"manifest", manifest_path}});
    return out_path;
}

// --- train ------------------------------------------------------------------------

std::vector<TrainItem> load_train_items(const RunConfig& config,
                                        const std::vector<ManifestRecord>& records,
                                        const RvqCodebooks& cb) {
    std::vector<TrainItem> items(records.size());
    parallel_for(static_cast<int>(records.size()), [&](int i) {
        const ClipSample clip = load_clip(config, records[i]);
        const TokenGrid grid = encode(clip.audio, cb);
        TrainItem item;
        item.grid = apply_delay(grid);
        item.video = clip.video.features;
        item.align = build_alignment(std::max(1, clip.video.t_v()), grid.t_a, grid.n_q);
        items[i] = std::move(item);
    });
    return items;
}

TrainOutputs cmd_train(const RunConfig& config, const std::string& manifest_path,
                       const std::string& codec_path, const std::string& out_dir,
                       const std::string& resume_path) {
    const auto t_start = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);
    const std::vector<ManifestRecord> records = read_manifest(manifest_path);
    if (records.empty()) throw std::invalid_argument("manifest has no records");
    const RvqCodebooks cb = read_codebooks(codec_path);
    if (cb.n_q != config.codec.n_q || cb.K != config.codec.K) {
        throw artifact_mismatch_error("codebooks (N_q=" + std::to_string(cb.n_q) +
                                      ", K=" + std::to_string(cb.K) +
                                      ") do not match config (N_q=" +
                                      std::to_string(config.codec.n_q) +
                                      ", K=" + std::to_string(config.codec.K) + ")");
    }

    const std::vector<TrainItem> items = load_train_items(config, records, cb);
    const ModelConfig mc = config.model_config();

    Net<float> net;
    AdamState opt;
    if (!resume_path.empty()) {
        net = read_checkpoint(resume_path, &opt);
        if (!(net.cfg == mc)) {
            throw artifact_mismatch_error("resume checkpoint hyperparameters do not match config");
        }
    } else {
        net = make_net(mc, config.seed);
        opt = make_adam_state(net);
    }

    TrainConfig tc;
    tc.lr = config.train.lr;
    tc.weight_decay = config.train.weight_decay;
    tc.cfg_dropout = config.train.cfg_dropout;
    tc.batch_size = config.train.batch_size;
    tc.steps = config.train.steps;
    if (config.train.epochs > 0) {
        const int per_epoch =
            (static_cast<int>(items.size()) + tc.batch_size - 1) / tc.batch_size;
        tc.steps = config.train.epochs * per_epoch;
    }
    tc.seed = config.seed;
    tc.grad_clip = config.train.grad_clip;
    const Conditioning mode = conditioning_from_name(config.train.conditioning);

    TrainOutputs out;
    out.log_path = (fs::path(out_dir) / "log.csv").string();
    std::ofstream log(out.log_path, resume_path.empty() ? std::ios::trunc : std::ios::app);
    if (resume_path.empty()) log << "step,loss,grad_norm,lr,seconds\n";

    double last_loss = 0.0;
    while (opt.step < tc.steps) {
        const int64_t step_index = opt.step;
        Rng batch_rng(derive_seed(tc.seed, 0x62617463ULL, static_cast<uint64_t>(step_index)));
        std::vector<const TrainItem*> batch;
        for (int b = 0; b < tc.batch_size; ++b) {
            batch.push_back(&items[batch_rng.uniform_index(items.size())]);
        }
        StepStats stats;
        try {
            stats = train_step(net, opt, batch, tc, mode);
        } catch (const numeric_error&) {
            const std::string dump = (fs::path(out_dir) / "abort_dump.vckp").string();
            write_checkpoint(dump, net, &opt);
            std::cerr << "numeric failure; state dumped to " << dump << "\n";
            throw;
        }
        last_loss = stats.loss;
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        log << opt.step << "," << stats.loss << "," << stats.grad_norm << "," << tc.lr << ","
            << secs << "\n";
        if (config.train.log_every > 0 && opt.step % config.train.log_every == 0) {
            std::cerr << "step " << opt.step << "/" << tc.steps << " loss " << stats.loss << "\n";
        }
    }
    log.close();

    out.checkpoint_path = (fs::path(out_dir) / "model.vckp").string();
    out.state_path = (fs::path(out_dir) / "train_state.vckp").string();
    write_checkpoint(out.checkpoint_path, net);
    write_checkpoint(out.state_path, net, &opt);
    write_text_file((fs::path(out_dir) / "config.json").string(), config.to_json());
    write_provenance(out.checkpoint_path, "train", config,
                     {{"manifest", manifest_path}, {"codebooks", codec_path}});
    out.final_loss = last_loss;
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
}

// --- generate -----------------------------------------------------------------------

GenerateOutputs cmd_generate(const RunConfig& config, const std::string& checkpoint_path,
                             const std::string& codec_path, const std::string& video_path,
                             const std::string& out_dir, uint64_t seed) {
    fs::create_directories(out_dir);
    const Net<float> net = read_checkpoint(checkpoint_path);
    const RvqCodebooks cb = read_codebooks(codec_path);
    if (net.cfg.K != cb.K || net.cfg.n_q != cb.n_q) {
        throw artifact_mismatch_error("checkpoint (K=" + std::to_string(net.cfg.K) + ", N_q=" +
                                      std::to_string(net.cfg.n_q) + ") does not match codebooks " +
                                      "(K=" + std::to_string(cb.K) +
                                      ", N_q=" + std::to_string(cb.n_q) + ")");
    }

    VideoFeatureStream video;
    video.features = read_vfea(video_path);
    video.fps = config.world.fps;

    SampleConfig sc;
    sc.gamma = config.sample.gamma;
    sc.temperature = config.sample.temperature;
    sc.top_k = config.sample.top_k;
    sc.seed = seed;
    sc.duration_s = std::min(config.world.duration_s, video.duration_s());

    const GenerateResult res = generate(net, cb, video, sc, config.world.sample_rate);

    GenerateOutputs out;
    out.wav_path = (fs::path(out_dir) / "gen.wav").string();
    out.tokens_path = (fs::path(out_dir) / "gen.vtok").string();
    out.sidecar_path = (fs::path(out_dir) / "gen.json").string();
    write_wav(out.wav_path, res.audio.samples, res.audio.sample_rate);
    write_tokens(out.tokens_path, res.grid);
    write_text_file((fs::path(out_dir) / "config.json").string(), config.to_json());
    json sidecar;
    sidecar["gamma"] = sc.gamma;
    sidecar["temperature"] = sc.temperature;
    sidecar["top_k"] = sc.top_k;
    sidecar["seed"] = sc.seed;
    sidecar["duration_s"] = sc.duration_s;
    sidecar["checkpoint_hash"] = hash_file_hex(checkpoint_path);
    write_text_file(out.sidecar_path, sidecar.dump(2));
    write_provenance(out.wav_path, "generate", config,
                     {{"checkpoint", checkpoint_path},
                      {"codebooks", codec_path},
                      {"video", video_path}});
    return out;
}

// --- curate --------------------------------------------------------------------------

CurateOutputs cmd_curate(const RunConfig& config, const std::string& manifest_path,
                         const std::string& out_dir) {
    fs::create_directories(out_dir);
    int skipped = 0;
    const std::vector<ManifestRecord> records = read_manifest(manifest_path, &skipped);
    const AvEmbedder embedder = make_embedder(config.world.class_count, config.world.sample_rate);

    auto [kept, report] =
        filter_dataset(records, embedder, config.curation.threshold, config.curation.sweep,
                       [&](const ManifestRecord& rec) { return load_clip(config, rec); });
    report.skipped = skipped;

    CurateOutputs out;
    out.manifest_path = (fs::path(out_dir) / "curated.jsonl").string();
    out.report_path = (fs::path(out_dir) / "curation_report.csv").string();
    write_manifest(out.manifest_path, kept);
    write_text_file(out.report_path, curation_report_csv(report));
    write_text_file((fs::path(out_dir) / "config.json").string(), config.to_json());
    write_provenance(out.manifest_path, "curate", config, {{"manifest", manifest_path}});
    out.report = std::move(report);
    return out;
}

// --- eval ----------------------------------------------------------------------------

std::vector<EvalItem> load_eval_items(const RunConfig& config,
                                      const std::vector<ManifestRecord>& records) {
    std::vector<EvalItem> items(records.size());
    parallel_for(static_cast<int>(records.size()), [&](int i) {
        const ClipSample clip = load_clip(config, records[i]);
        items[i] = {clip.id, clip.timeline, clip.video, clip.audio};
    });
    return items;
}

EvalOutputs cmd_eval(const RunConfig& config, const std::string& checkpoint_path,
                     const std::string& codec_path, const std::string& manifest_path,
                     const std::string& out_dir) {
    fs::create_directories(out_dir);
    const std::vector<ManifestRecord> records = read_manifest(manifest_path);
    if (records.empty()) throw std::invalid_argument("no samples in manifest: " + manifest_path);
    const Net<float> net = read_checkpoint(checkpoint_path);
    const RvqCodebooks cb = read_codebooks(codec_path);
    if (net.cfg.K != cb.K || net.cfg.n_q != cb.n_q) {
        throw artifact_mismatch_error("checkpoint and codebooks disagree on (K, N_q)");
    }
    const std::vector<EvalItem> items = load_eval_items(config, records);
    const AvEmbedder embedder = make_embedder(config.world.class_count, config.world.sample_rate);

    SampleConfig sc;
    sc.gamma = config.sample.gamma;
    sc.temperature = config.sample.temperature;
    sc.top_k = config.sample.top_k;
    sc.seed = config.seed;
    sc.duration_s = config.world.duration_s;

    EvalOutputs out;
    std::vector<PerVideoRow> rows;
    out.report = evaluate(net, cb, embedder, items, sc, config.eval.n_gen,
                          config.world.sample_rate, &rows);
    out.report_path = (fs::path(out_dir) / "report.json").string();
    out.per_video_path = (fs::path(out_dir) / "per_video.csv").string();
    write_text_file(out.report_path, metrics_report_json(out.report));
    write_text_file(out.per_video_path, metrics_csv(out.report, rows));
    write_text_file((fs::path(out_dir) / "config.json").string(), config.to_json());
    write_provenance(out.report_path, "eval", config,
                     {{"checkpoint", checkpoint_path},
                      {"codebooks", codec_path},
                      {"manifest", manifest_path}});
    return out;
}

// --- ablate ------------------------------------------------------------------------------

std::vector<std::string> cmd_ablate(const RunConfig& config, const std::string& out_dir,
                                    bool reduced) {
    fs::create_directories(out_dir);
    if (reduced) {
        std::cerr << "warning: running reduced ablation sweeps\n";
    }
    const fs::path root(out_dir);
    write_text_file((root / "config.json").string(), config.to_json());

    // Shared dataset + codec.
    const std::string data_dir = (root / "data").string();
    const std::string manifest = cmd_synth(config, data_dir, true);
    const std::string codec_path = (root / "codec.vrvq").string();
    cmd_codec_fit(config, manifest, codec_path);

    auto eval_with = [&](const std::string& ckpt, double gamma, const std::string& tag) {
        RunConfig ec = config;
        ec.sample.gamma = gamma;
        return cmd_eval(ec, ckpt, codec_path, manifest, (root / ("eval_" + tag)).string());
    };

    std::vector<std::string> outputs;

    // 1. Conditioning method: fusion vs prepend under the same budget.
    {
        std::ostringstream csv;
        csv << "method,kld,fad_analog,ib,sync_ms\n";
        for (const std::string method : {"fusion", "prepend"}) {
            RunConfig tc = config;
            tc.train.conditioning = method;
            const TrainOutputs t =
                cmd_train(tc, manifest, codec_path, (root / ("train_" + method)).string());
            const EvalOutputs e = eval_with(t.checkpoint_path, config.sample.gamma, method);
            csv << method << "," << e.report.kld << "," << e.report.fd << "," << e.report.ib << ","
                << e.report.sync_ms << "\n";
        }
        const std::string path = (root / "ablation_cond.csv").string();
        write_text_file(path, csv.str());
        outputs.push_back(path);
    }

    // 2. Guidance-scale sweep over one trained model.
    {
        const std::string ckpt = (root / "train_fusion" / "model.vckp").string();
        std::vector<double> gammas = reduced ? std::vector<double>{1, 6}
                                             : std::vector<double>{1, 3, 5, 6, 7, 9};
        std::ostringstream csv;
        csv << "gamma,kld,fad_analog,ib,sync_ms\n";
        for (double g : gammas) {
            std::ostringstream tag;
            tag << "gamma_" << g;
            const EvalOutputs e = eval_with(ckpt, g, tag.str());
            csv << g << "," << e.report.kld << "," << e.report.fd << "," << e.report.ib << ","
                << e.report.sync_ms << "\n";
        }
        const std::string path = (root / "ablation_cfg.csv").string();
        write_text_file(path, csv.str());
        outputs.push_back(path);
    }

    // 3. Curation-threshold sweep on a corrupted dataset.
    {
        RunConfig wc = config;
        wc.world.p_corrupt = std::max(wc.world.p_corrupt, 0.4);
        const std::string cdir = (root / "data_corrupt").string();
        const std::string cmanifest = cmd_synth(wc, cdir, true);
        std::vector<double> thresholds =
            reduced ? std::vector<double>{0.0, 0.3} : std::vector<double>{0.0, 0.2, 0.3, 0.4};
        std::ostringstream csv;
        csv << "threshold,kept,train_seconds,kld,fad_analog,ib,sync_ms\n";
        for (double tau : thresholds) {
            RunConfig cc = wc;
            cc.curation.threshold = tau;
            std::ostringstream tag;
            tag << "tau_" << tau;
            const CurateOutputs cur = cmd_curate(cc, cmanifest, (root / ("curate_" + tag.str())).string());
            const TrainOutputs t = cmd_train(cc, cur.manifest_path, codec_path,
                                             (root / ("train_" + tag.str())).string());
            const EvalOutputs e = eval_with(t.checkpoint_path, config.sample.gamma, tag.str());
            csv << tau << "," << cur.report.kept << "," << t.wall_seconds << "," << e.report.kld
                << "," << e.report.fd << "," << e.report.ib << "," << e.report.sync_ms << "\n";
        }
        const std::string path = (root / "ablation_threshold.csv").string();
        write_text_file(path, csv.str());
        outputs.push_back(path);
    }
    return outputs;
}

}  // namespace vta
