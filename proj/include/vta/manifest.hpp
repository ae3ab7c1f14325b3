#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vta {

// Dataset manifest: JSON Lines, one record per clip.

struct ManifestRecord {
    std::string id;
    uint64_t seed = 0;
    double duration_s = 0.0;
    std::string corruption = "none";
    std::string audio_path;
    std::string video_path;
    double similarity = 0.0;
    bool has_similarity = false;
};

// Malformed lines are skipped with a warning on stderr; the skip count is
// reported so curation can account for them.
std::vector<ManifestRecord> read_manifest(const std::string& path, int* skipped = nullptr);

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records);

std::string manifest_record_to_json(const ManifestRecord& rec);

}  // namespace vta
