#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace poisoncraft {

inline constexpr const char* kToolName = "poisoncraft";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

// Error taxonomy. ValidationError and ConfigError are caller mistakes and map
// to CLI exit 2; the remaining kinds are operational failures and map to 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct ConfigError : ValidationError {
  using ValidationError::ValidationError;
};
struct IoError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct CraftError : Error {
  using Error::Error;
};

std::uint64_t splitmix64(std::uint64_t x);

// Folds stream identifiers into a base seed so per-item random streams do not
// depend on iteration order or thread schedule.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Seeded RNG with hand-rolled draw helpers. std::uniform_int_distribution and
// std::shuffle are implementation-defined, which would make crafted sets
// differ across standard libraries for the same seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform draw in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t bounded(std::uint64_t n);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from [0, n), returned ascending.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

std::string sha256_hex(std::string_view data);
std::uint64_t fnv1a64(std::string_view data);

bool is_valid_utf8(std::string_view text);

// Appends the UTF-8 encoding of cp (cp must be a Unicode scalar value).
void append_utf8(std::string& out, char32_t cp);
std::string to_utf8(char32_t cp);

// Decodes one UTF-8 sequence starting at `pos`; throws ParseError on invalid
// input. Returns the code point and advances pos past it.
char32_t decode_utf8_at(std::string_view text, std::size_t& pos);

// Non-overlapping occurrence count.
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);
std::string replace_all(std::string_view text, std::string_view from, std::string_view to);

// One text line: [begin, end) excludes the '\n'; next is where the following
// line starts (== end for a file that does not end in a newline).
struct LineView {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t next = 0;
};
std::vector<LineView> line_views(std::string_view text);

// Leading-whitespace width in columns; a tab advances to the next multiple of
// eight columns.
std::size_t indent_columns(std::string_view line);
bool is_blank_line(std::string_view line);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string now_iso8601();

}  // namespace poisoncraft
