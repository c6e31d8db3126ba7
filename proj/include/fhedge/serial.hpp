// SPDX-License-Identifier: Apache-2.0
//
// Little-endian byte serialization. Every object is written as a tagged,
// version-stamped, length-prefixed section so files stay byte-identical
// across platforms for the same logical value.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fhedge::serial {

class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class Writer {
  public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(std::uint8_t(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(std::uint8_t(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const std::uint8_t* p, std::size_t len) {
        buf_.insert(buf_.end(), p, p + len);
    }
    void blob(const std::vector<std::uint8_t>& b) {
        u64(b.size());
        bytes(b.data(), b.size());
    }
    void str(const std::string& s) {
        u64(s.size());
        bytes(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
    }
    void u64_vec(const std::vector<std::uint64_t>& v) {
        u64(v.size());
        for (auto x : v) u64(x);
    }

    // Opens a section: tag + version + u64 length placeholder. end_section
    // backpatches the length.
    std::size_t begin_section(std::uint32_t tag, std::uint8_t version) {
        u32(tag);
        u8(version);
        std::size_t at = buf_.size();
        u64(0);
        return at;
    }
    void end_section(std::size_t at) {
        std::uint64_t len = buf_.size() - at - 8;
        for (int i = 0; i < 8; ++i) buf_[at + i] = std::uint8_t(len >> (8 * i));
    }

    const std::vector<std::uint8_t>& data() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

  private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
  public:
    Reader(const std::uint8_t* p, std::size_t len) : p_(p), end_(p + len) {}
    explicit Reader(const std::vector<std::uint8_t>& b) : Reader(b.data(), b.size()) {}

    std::uint8_t u8() {
        need(1, "byte");
        return *p_++;
    }
    std::uint32_t u32() {
        need(4, "u32");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(*p_++) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8, "u64");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(*p_++) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::vector<std::uint8_t> blob() {
        std::uint64_t len = u64();
        need(len, "blob body");
        std::vector<std::uint8_t> b(p_, p_ + len);
        p_ += len;
        return b;
    }
    std::string str() {
        std::uint64_t len = u64();
        need(len, "string body");
        std::string s(reinterpret_cast<const char*>(p_), len);
        p_ += len;
        return s;
    }
    std::vector<std::uint64_t> u64_vec() {
        std::uint64_t count = u64();
        need(count * 8, "u64 vector body");
        std::vector<std::uint64_t> v(count);
        for (auto& x : v) x = u64();
        return v;
    }

    // Reads a section header, checking the expected tag and that the
    // declared length fits the remaining buffer.
    std::uint8_t expect_section(std::uint32_t tag, const char* what) {
        if (remaining() < 13)
            throw ParseError(std::string("truncated file: missing ") + what + " section");
        std::uint32_t got = u32();
        if (got != tag)
            throw ParseError(std::string("unexpected section where ") + what + " expected");
        std::uint8_t version = u8();
        std::uint64_t len = u64();
        if (len > remaining())
            throw ParseError(std::string("truncated file: ") + what + " section body cut short");
        return version;
    }

    std::size_t remaining() const { return std::size_t(end_ - p_); }
    bool done() const { return p_ == end_; }

  private:
    void need(std::uint64_t n, const char* what) {
        if (remaining() < n)
            throw ParseError(std::string("unexpected end of data reading ") + what);
    }
    const std::uint8_t* p_;
    const std::uint8_t* end_;
};

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("cannot open: " + path);
    auto size = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size), 0);
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw std::runtime_error("read failed: " + path);
    return bytes;
}

}  // namespace fhedge::serial
