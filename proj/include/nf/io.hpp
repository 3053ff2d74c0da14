#pragma once

// Little-endian binary primitives shared by the vector, index, and
// checkpoint file formats. All multi-byte values are serialized
// explicitly byte by byte so files are identical across platforms.

#include <cstdint>
#include <iosfwd>
#include <string>

namespace nf::io {

void write_u8(std::ostream& os, std::uint8_t v);
void write_u16(std::ostream& os, std::uint16_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f32(std::ostream& os, float v);
void write_f64(std::ostream& os, double v);
void write_bytes(std::ostream& os, const void* data, std::size_t n);

// All readers throw format_error on EOF/truncation.
std::uint8_t read_u8(std::istream& is);
std::uint16_t read_u16(std::istream& is);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
float read_f32(std::istream& is);
double read_f64(std::istream& is);
void read_bytes(std::istream& is, void* data, std::size_t n);

// Reads exactly `n` bytes as a string.
std::string read_string(std::istream& is, std::size_t n);

// Reads a 4-byte magic and checks it against `expected`.
void expect_magic(std::istream& is, const char expected[4]);

// Whole-file helpers used by determinism checks and the CLI.
std::string slurp(const std::string& path);
void spit(const std::string& path, const std::string& contents);

}  // namespace nf::io
