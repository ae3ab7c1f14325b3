#include "vta/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace vta {

using nlohmann::json;

namespace {

// Manifests store paths relative to their own location, so a dataset
// directory is relocatable and identical runs produce identical bytes no
// matter where they land.
std::string relativize(const std::string& path, const fs::path& base) {
    if (path.empty() || !fs::path(path).is_absolute()) return path;
    std::error_code ec;
    const fs::path rel = fs::relative(path, base, ec);
    if (ec || rel.empty()) return path;
    return rel.generic_string();
}

std::string resolve(const std::string& path, const fs::path& base) {
    if (path.empty() || fs::path(path).is_absolute()) return path;
    return (base / path).lexically_normal().string();
}

}  // namespace

std::string manifest_record_to_json(const ManifestRecord& rec) {
    json j;
    j["id"] = rec.id;
    j["seed"] = rec.seed;
    j["duration_s"] = rec.duration_s;
    j["corruption"] = rec.corruption;
    j["paths"] = {{"audio", rec.audio_path}, {"video", rec.video_path}};
    if (rec.has_similarity) j["similarity"] = rec.similarity;
    return j.dump();
}

std::vector<ManifestRecord> read_manifest(const std::string& path, int* skipped) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    std::vector<ManifestRecord> records;
    int bad = 0;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            ManifestRecord rec;
            rec.id = j.at("id").get<std::string>();
            rec.seed = j.at("seed").get<uint64_t>();
            rec.duration_s = j.at("duration_s").get<double>();
            rec.corruption = j.at("corruption").get<std::string>();
            const fs::path base = fs::path(path).parent_path();
            rec.audio_path = resolve(j.at("paths").at("audio").get<std::string>(), base);
            rec.video_path = resolve(j.at("paths").at("video").get<std::string>(), base);
            if (j.contains("similarity")) {
                rec.similarity = j.at("similarity").get<double>();
                rec.has_similarity = true;
            }
            records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            ++bad;
            std::cerr << "warning: skipping malformed manifest line " << line_no << " in " << path
                      << ": " << e.what() << "\n";
        }
    }
    if (skipped) *skipped = bad;
    return records;
}

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open manifest for writing: " + path);
    const fs::path base = fs::absolute(fs::path(path)).parent_path();
    auto normalized = [&](const std::string& p) {
        if (p.empty()) return p;
        return relativize(fs::absolute(p).lexically_normal().string(), base);
    };
    for (ManifestRecord rec : records) {
        rec.audio_path = normalized(rec.audio_path);
        rec.video_path = normalized(rec.video_path);
        out << manifest_record_to_json(rec) << "\n";
    }
    if (!out) throw std::runtime_error("manifest write failed: " + path);
}

}  // namespace vta
