#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "vta/common.hpp"

namespace vta {

// All artifact files are little-endian. These helpers assume a little-endian
// host (checked once at startup of the readers/writers).

class BinWriter {
public:
    explicit BinWriter(const std::string& path);
    ~BinWriter();
    BinWriter(const BinWriter&) = delete;
    BinWriter& operator=(const BinWriter&) = delete;

    void magic(const char tag[4]);
    void u16(uint16_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void f32(float v);
    void bytes(const void* p, size_t n);
    void f32_array(const float* p, size_t n);
    void close();

private:
    std::FILE* f_ = nullptr;
    std::string path_;
};

class BinReader {
public:
    explicit BinReader(const std::string& path);
    ~BinReader();
    BinReader(const BinReader&) = delete;
    BinReader& operator=(const BinReader&) = delete;

    void expect_magic(const char tag[4]);
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    float f32();
    void bytes(void* p, size_t n);
    void f32_array(float* p, size_t n);
    bool at_eof();

private:
    std::FILE* f_ = nullptr;
    std::string path_;
};

// Checks a format version field, throwing artifact_mismatch_error with both
// versions named.
void check_version(const std::string& what, uint16_t found, uint16_t supported);

// --- WAV (16-bit PCM mono) ---

constexpr int16_t quantize16(float x) {
    const float c = x < -1.0f ? -1.0f : (x > 1.0f ? 1.0f : x);
    const float s = c * 32767.0f;
    return static_cast<int16_t>(s >= 0.0f ? s + 0.5f : s - 0.5f);
}

constexpr float dequantize16(int16_t v) { return static_cast<float>(v) / 32767.0f; }

void write_wav(const std::string& path, const std::vector<float>& samples, int sample_rate);
std::vector<float> read_wav(const std::string& path, int* sample_rate_out);

// --- VFEA (feature stream) ---
// magic "VFEA", version u16, t_v u32, d_raw u32, row-major f32.

constexpr uint16_t kVfeaVersion = 1;
void write_vfea(const std::string& path, const MatF& features);
MatF read_vfea(const std::string& path);

// --- misc file utilities ---

bool file_exists(const std::string& path);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// FNV-1a 64-bit content hash, hex-encoded. Used to pin artifact provenance.
uint64_t fnv1a64(const void* data, size_t n);
std::string hash_file_hex(const std::string& path);
std::string hash_string_hex(const std::string& s);

}  // namespace vta
