#include "kgmc/util/io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kgmc::io {

void ByteWriter::u16(std::uint16_t v) {
    buf_.push_back(static_cast<char>(v & 0xff));
    buf_.push_back(static_cast<char>((v >> 8) & 0xff));
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
}

void ByteWriter::bytes(const void* p, std::size_t n) {
    buf_.append(static_cast<const char*>(p), n);
}

void ByteReader::need(std::size_t n) const {
    if (pos_ + n > data_.size())
        throw std::runtime_error(name_ + ": truncated (need " + std::to_string(n) +
                                 " bytes at offset " + std::to_string(pos_) + ")");
}

std::uint8_t ByteReader::u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint16_t ByteReader::u16() {
    need(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
    return v;
}

float ByteReader::f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::string ByteReader::bytes(std::size_t n) {
    need(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
}

void ByteReader::expect_magic(const char tag[4]) {
    const std::string got = bytes(4);
    if (std::memcmp(got.data(), tag, 4) != 0)
        throw std::runtime_error(name_ + ": bad magic, expected '" + std::string(tag, 4) +
                                 "' got '" + got + "'");
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

void atomic_write(const std::filesystem::path& path, const std::string& data) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write file: " + tmp.string());
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

std::string file_hash(const std::filesystem::path& path) { return fnv1a_hex(read_file(path)); }

std::string encode_tensor(const std::vector<std::size_t>& shape,
                          const std::vector<double>& values) {
    std::size_t count = 1;
    for (std::size_t e : shape) count *= e;
    if (count != values.size())
        throw std::runtime_error("tensor encode: shape/value mismatch");
    ByteWriter w;
    w.magic("TNS1");
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t e : shape) w.u32(static_cast<std::uint32_t>(e));
    for (double v : values) w.f32(static_cast<float>(v));
    return w.data();
}

TensorFile decode_tensor(const std::string& data, const std::string& name) {
    ByteReader r(data, name);
    r.expect_magic("TNS1");
    const std::uint32_t rank = r.u32();
    TensorFile t;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        t.shape.push_back(r.u32());
        count *= t.shape.back();
    }
    t.values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) t.values.push_back(static_cast<double>(r.f32()));
    return t;
}

void write_tensor(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
                  const std::vector<double>& values) {
    atomic_write(path, encode_tensor(shape, values));
}

TensorFile read_tensor(const std::filesystem::path& path) {
    return decode_tensor(read_file(path), path.string());
}

std::string encode_features(const FeatureFile& f) {
    ByteWriter w;
    w.magic("FEAT");
    w.u32(1);
    w.u32(static_cast<std::uint32_t>(f.ids.size()));
    w.u32(f.dim);
    for (std::size_t i = 0; i < f.ids.size(); ++i) {
        const std::string& id = f.ids[i];
        if (id.size() > 0xffff) throw std::runtime_error("feature id too long: " + id);
        if (f.rows[i].size() != f.dim)
            throw std::runtime_error("feature row dim mismatch for id: " + id);
        w.u16(static_cast<std::uint16_t>(id.size()));
        w.bytes(id.data(), id.size());
        for (double v : f.rows[i]) w.f32(static_cast<float>(v));
    }
    return w.data();
}

FeatureFile decode_features(const std::string& data, const std::string& name) {
    ByteReader r(data, name);
    r.expect_magic("FEAT");
    const std::uint32_t version = r.u32();
    if (version != 1)
        throw std::runtime_error(name + ": unsupported feature file version " +
                                 std::to_string(version));
    const std::uint32_t rows = r.u32();
    FeatureFile f;
    f.dim = r.u32();
    f.ids.reserve(rows);
    f.rows.reserve(rows);
    for (std::uint32_t i = 0; i < rows; ++i) {
        const std::uint16_t len = r.u16();
        f.ids.push_back(r.bytes(len));
        std::vector<double> row(f.dim);
        for (std::uint32_t j = 0; j < f.dim; ++j) row[j] = static_cast<double>(r.f32());
        f.rows.push_back(std::move(row));
    }
    return f;
}

void write_features(const std::filesystem::path& path, const FeatureFile& f) {
    atomic_write(path, encode_features(f));
}

FeatureFile read_features(const std::filesystem::path& path) {
    return decode_features(read_file(path), path.string());
}

}  // namespace kgmc::io
