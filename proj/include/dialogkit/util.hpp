#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dialogkit {

// Bad configuration (missing files, invalid parameters). CLI maps this to exit 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable input data. CLI maps this to exit 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace utf8 {

// Decodes UTF-8 into code points. Invalid bytes are kept as their own code
// point values so noisy input never throws.
std::vector<uint32_t> decode(std::string_view s);

void append(std::string& out, uint32_t cp);
std::string encode(const std::vector<uint32_t>& cps);

// Number of code points.
std::size_t length(std::string_view s);

// Byte offset of each code point start, plus s.size() as a final sentinel.
std::vector<std::size_t> offsets(std::string_view s);

}  // namespace utf8

bool is_space_cp(uint32_t cp);
bool has_space(std::string_view s);

// Splits on runs of Unicode whitespace; never returns empty pieces.
std::vector<std::string> split_ws(std::string_view s);

std::string trim(std::string_view s);

// splitmix64 finalizer.
uint64_t mix64(uint64_t x);

// Small deterministic generator used for synthetic fixtures and reference
// weights. Fixed constants, identical streams on every platform.
struct Lcg {
  uint64_t state;

  explicit Lcg(uint64_t seed) : state(mix64(seed ^ 0x9e3779b97f4a7c15ull)) {}

  uint64_t next() {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return mix64(state);
  }

  // Uniform in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0); }

  uint64_t below(uint64_t n) { return n == 0 ? 0 : next() % n; }
};

std::string format_double(double v);  // shortest round-trip decimal ("%.17g" trimmed)
std::string human_bytes(uint64_t bytes);

}  // namespace dialogkit
