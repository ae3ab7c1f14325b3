#include "vta/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vta/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "artifact formats are little-endian; big-endian hosts are unsupported");

namespace vta {

BinWriter::BinWriter(const std::string& path) : path_(path) {
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_) throw std::runtime_error("cannot open for writing: " + path);
}

BinWriter::~BinWriter() {
    if (f_) std::fclose(f_);
}

void BinWriter::close() {
    if (f_) {
        if (std::fclose(f_) != 0) {
            f_ = nullptr;
            throw std::runtime_error("write failed: " + path_);
        }
        f_ = nullptr;
    }
}

void BinWriter::bytes(const void* p, size_t n) {
    if (std::fwrite(p, 1, n, f_) != n) throw std::runtime_error("write failed: " + path_);
}

void BinWriter::magic(const char tag[4]) { bytes(tag, 4); }
void BinWriter::u16(uint16_t v) { bytes(&v, 2); }
void BinWriter::u32(uint32_t v) { bytes(&v, 4); }
void BinWriter::u64(uint64_t v) { bytes(&v, 8); }
void BinWriter::f32(float v) { bytes(&v, 4); }
void BinWriter::f32_array(const float* p, size_t n) { bytes(p, n * 4); }

BinReader::BinReader(const std::string& path) : path_(path) {
    f_ = std::fopen(path.c_str(), "rb");
    if (!f_) throw std::runtime_error("cannot open for reading: " + path);
}

BinReader::~BinReader() {
    if (f_) std::fclose(f_);
}

void BinReader::bytes(void* p, size_t n) {
    if (std::fread(p, 1, n, f_) != n) throw std::runtime_error("truncated file: " + path_);
}

void BinReader::expect_magic(const char tag[4]) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, tag, 4) != 0) {
        throw artifact_mismatch_error("bad magic in " + path_ + ": expected " +
                                      std::string(tag, 4) + ", found " + std::string(got, 4));
    }
}

uint16_t BinReader::u16() { uint16_t v; bytes(&v, 2); return v; }
uint32_t BinReader::u32() { uint32_t v; bytes(&v, 4); return v; }
uint64_t BinReader::u64() { uint64_t v; bytes(&v, 8); return v; }
float BinReader::f32() { float v; bytes(&v, 4); return v; }
void BinReader::f32_array(float* p, size_t n) { bytes(p, n * 4); }

bool BinReader::at_eof() {
    const int c = std::fgetc(f_);
    if (c == EOF) return true;
    std::ungetc(c, f_);
    return false;
}

void check_version(const std::string& what, uint16_t found, uint16_t supported) {
    if (found != supported) {
        throw artifact_mismatch_error(what + " version " + std::to_string(found) +
                                      " is incompatible with supported version " +
                                      std::to_string(supported));
    }
}

// --- WAV ---

void write_wav(const std::string& path, const std::vector<float>& samples, int sample_rate) {
    BinWriter w(path);
    const uint32_t n = static_cast<uint32_t>(samples.size());
    const uint32_t data_bytes = n * 2;
    w.magic("RIFF");
    w.u32(36 + data_bytes);
    w.magic("WAVE");
    w.magic("fmt ");
    w.u32(16);
    w.u16(1);  // PCM
    w.u16(1);  // mono
    w.u32(static_cast<uint32_t>(sample_rate));
    w.u32(static_cast<uint32_t>(sample_rate) * 2);
    w.u16(2);
    w.u16(16);
    w.magic("data");
    w.u32(data_bytes);
    std::vector<int16_t> pcm(n);
    for (uint32_t i = 0; i < n; ++i) pcm[i] = quantize16(samples[i]);
    w.bytes(pcm.data(), data_bytes);
    w.close();
}

std::vector<float> read_wav(const std::string& path, int* sample_rate_out) {
    BinReader r(path);
    r.expect_magic("RIFF");
    r.u32();
    r.expect_magic("WAVE");
    uint32_t sample_rate = 0;
    std::vector<float> samples;
    bool got_data = false;
    while (!r.at_eof()) {
        char tag[4];
        r.bytes(tag, 4);
        const uint32_t size = r.u32();
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            const uint16_t format = r.u16();
            const uint16_t channels = r.u16();
            sample_rate = r.u32();
            r.u32();
            r.u16();
            const uint16_t bits = r.u16();
            if (format != 1 || channels != 1 || bits != 16) {
                throw artifact_mismatch_error(path + ": only 16-bit mono PCM is supported");
            }
            if (size > 16) {
                std::vector<char> skip(size - 16);
                r.bytes(skip.data(), skip.size());
            }
        } else if (std::memcmp(tag, "data", 4) == 0) {
            std::vector<int16_t> pcm(size / 2);
            r.bytes(pcm.data(), size);
            samples.resize(pcm.size());
            for (size_t i = 0; i < pcm.size(); ++i) samples[i] = dequantize16(pcm[i]);
            got_data = true;
        } else {
            std::vector<char> skip(size);
            r.bytes(skip.data(), size);
        }
    }
    if (!got_data || sample_rate == 0) throw std::runtime_error(path + ": missing fmt/data chunk");
    if (sample_rate_out) *sample_rate_out = static_cast<int>(sample_rate);
    return samples;
}

// --- VFEA ---

void write_vfea(const std::string& path, const MatF& features) {
    BinWriter w(path);
    w.magic("VFEA");
    w.u16(kVfeaVersion);
    w.u32(static_cast<uint32_t>(features.rows));
    w.u32(static_cast<uint32_t>(features.cols));
    w.f32_array(features.data.data(), features.size());
    w.close();
}

MatF read_vfea(const std::string& path) {
    BinReader r(path);
    r.expect_magic("VFEA");
    check_version(path, r.u16(), kVfeaVersion);
    const uint32_t t_v = r.u32();
    const uint32_t d_raw = r.u32();
    MatF m(static_cast<int>(t_v), static_cast<int>(d_raw));
    r.f32_array(m.data.data(), m.size());
    return m;
}

// --- misc ---

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

uint64_t fnv1a64(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

static std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

std::string hash_file_hex(const std::string& path) {
    const std::string content = read_text_file(path);
    return hex64(fnv1a64(content.data(), content.size()));
}

std::string hash_string_hex(const std::string& s) { return hex64(fnv1a64(s.data(), s.size())); }

}  // namespace vta
