#pragma once
// Little-endian binary I/O, atomic file writes, and FNV-1a content hashes.
// All artifact formats live here so the byte layouts stay in one place:
//
//   TNS1  tensor        : "TNS1", u32 rank, u32 extent[rank], f32 values
//   KGT1  triple file   : "KGT1", u32 count, { u32 head, u8 relation, u32 tail }
//   FEAT  feature file  : "FEAT", u32 version, u32 rows, u32 dim,
//                         { u16 id_len, id bytes, f32 value[dim] }

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kgmc::io {

// ---- low-level little-endian primitives over an in-memory buffer ----

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void f32(float v);
    void bytes(const void* p, std::size_t n);
    void magic(const char tag[4]) { bytes(tag, 4); }
    const std::string& data() const { return buf_; }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(const std::string& data, std::string name)
        : data_(data), name_(std::move(name)) {}
    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    float f32();
    std::string bytes(std::size_t n);
    void expect_magic(const char tag[4]);
    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const;
    const std::string& data_;
    std::string name_;
    std::size_t pos_ = 0;
};

// ---- files ----

std::string read_file(const std::filesystem::path& path);

// Write via temp file + rename so partially written artifacts never appear.
void atomic_write(const std::filesystem::path& path, const std::string& data);

// FNV-1a 64-bit over the raw bytes, as a 16-digit hex string. Used for the
// manifest hashes that chain pipeline stages together.
std::string fnv1a_hex(const std::string& data);
std::string file_hash(const std::filesystem::path& path);

// ---- TNS1 tensors (f32 on disk, f64 in memory) ----

struct TensorFile {
    std::vector<std::size_t> shape;
    std::vector<double> values;  // row-major
};

std::string encode_tensor(const std::vector<std::size_t>& shape, const std::vector<double>& values);
TensorFile decode_tensor(const std::string& data, const std::string& name);
void write_tensor(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
                  const std::vector<double>& values);
TensorFile read_tensor(const std::filesystem::path& path);

// ---- FEAT feature files ----

struct FeatureFile {
    std::uint32_t dim = 0;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;  // one vector of length dim per id
};

std::string encode_features(const FeatureFile& f);
FeatureFile decode_features(const std::string& data, const std::string& name);
void write_features(const std::filesystem::path& path, const FeatureFile& f);
FeatureFile read_features(const std::filesystem::path& path);

}  // namespace kgmc::io
