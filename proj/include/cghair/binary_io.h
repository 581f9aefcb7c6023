#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cghair/error.h"

namespace cghair {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class ByteWriter {
public:
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u16(std::uint16_t v) { raw(&v, 2); }
    void f32(float v) { raw(&v, 4); }
    void f64(double v) { raw(&v, 8); }
    void magic(const char (&m)[5]) { raw(m, 4); }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes_.insert(bytes_.end(), b, b + n);
    }
    void zeros(std::size_t n) { bytes_.resize(bytes_.size() + n, 0); }

    std::size_t size() const { return bytes_.size(); }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32() { return read<std::uint32_t>(); }
    std::uint16_t u16() { return read<std::uint16_t>(); }
    float f32() { return read<float>(); }
    double f64() { return read<double>(); }
    void expect_magic(const char (&m)[5]) {
        need(4);
        if (std::memcmp(bytes_.data() + pos_, m, 4) != 0)
            throw Error(ErrorCode::BadMagic, std::string("expected magic '") + m + "'");
        pos_ += 4;
    }
    void raw(void* out, std::size_t n) {
        need(n);
        std::memcpy(out, bytes_.data() + pos_, n);
        pos_ += n;
    }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    std::size_t position() const { return pos_; }

private:
    template <class T>
    T read() {
        T v;
        raw(&v, sizeof(T));
        return v;
    }
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n)
            throw Error(ErrorCode::TruncatedFile, "unexpected end of data");
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace cghair
