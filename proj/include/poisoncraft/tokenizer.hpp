#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace poisoncraft::bpe {

// Byte <-> printable-codepoint bijection used by the published byte-level BPE
// file format: visible ASCII and most Latin-1 signs map to themselves, the
// remaining bytes map to U+0100 + n in byte order.
struct ByteCoder {
  std::array<std::string, 256> byte_to_sym;  // UTF-8 of the mapped code point
  std::unordered_map<char32_t, std::uint8_t> sym_to_byte;
  ByteCoder();
};

struct Vocab {
  std::unordered_map<std::string, int> token_to_id;
  std::unordered_map<int, std::string> id_to_token;
  std::vector<std::pair<std::string, std::string>> merges;
  std::unordered_map<std::string, int> merge_rank;  // "left right" -> rank
  ByteCoder coder;
};

// vocab_path: JSON map token -> id. merges_path: one "left right" pair per
// line; a leading line starting with '#' is treated as a format header.
Vocab load_vocab(const std::filesystem::path& vocab_path,
                 const std::filesystem::path& merges_path);

// Pre-tokenisation used by encode, exposed for testing. Splits text into
// contraction suffixes ('s 't 're 've 'm 'll 'd), letter runs, digit runs,
// symbol runs (each of the three optionally claiming one preceding space),
// and whitespace runs; a whitespace run directly followed by a word yields
// all but its last character, leaving that space to attach to the word.
// Letters are ASCII alphabetics plus any non-whitespace code point >= U+0080;
// digits are ASCII 0-9.
std::vector<std::string> segment(std::string_view text);

// Byte-level BPE: each pre-token is mapped byte-by-byte through the coder,
// then the lowest-ranked adjacent pair is merged (all its occurrences at
// once) until no listed merge applies. Input must be valid UTF-8.
std::vector<int> encode(const Vocab& vocab, std::string_view text);

std::string decode(const Vocab& vocab, const std::vector<int>& ids);

// True iff encode(content) fits in `limit` tokens.
bool check_context_window(const Vocab& vocab, std::string_view content,
                          std::size_t limit);

// Seeded uniform draw of k tokens from the eligible subset: tokens whose
// decoded bytes are valid UTF-8 and contain no newline, carriage return,
// triple quote (either kind), or NUL. The concatenation is re-checked against
// the same rules so token boundaries cannot assemble a forbidden substring.
std::string sample_random_text(const Vocab& vocab, std::size_t k,
                               std::uint64_t seed);

}  // namespace poisoncraft::bpe
