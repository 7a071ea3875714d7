#include "poisoncraft/tokenizer.hpp"

#include <algorithm>
#include <climits>
#include <fstream>

#include <json.hpp>

#include "poisoncraft/common.hpp"

namespace poisoncraft::bpe {

namespace {

bool printable_byte(int b) {
  return (b >= '!' && b <= '~') || (b >= 0xA1 && b <= 0xAC) ||
         (b >= 0xAE && b <= 0xFF);
}

bool is_space_cp(char32_t cp) {
  switch (cp) {
    case 0x09:
    case 0x0A:
    case 0x0B:
    case 0x0C:
    case 0x0D:
    case 0x1C:
    case 0x1D:
    case 0x1E:
    case 0x1F:
    case 0x20:
    case 0x85:
    case 0xA0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_letter_cp(char32_t cp) {
  if ((cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z')) return true;
  return cp >= 0x80 && !is_space_cp(cp);
}

bool is_digit_cp(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

constexpr std::string_view kContractions[] = {"'s", "'t", "'re", "'ve",
                                              "'m", "'ll", "'d"};

std::string merge_key(std::string_view left, std::string_view right) {
  std::string key;
  key.reserve(left.size() + right.size() + 1);
  key.append(left);
  key.push_back(' ');
  key.append(right);
  return key;
}

// Decodes the byte sequence a single token stands for.
std::string token_bytes(const Vocab& vocab, const std::string& token) {
  std::string out;
  out.reserve(token.size());
  std::size_t pos = 0;
  while (pos < token.size()) {
    char32_t cp = decode_utf8_at(token, pos);
    auto it = vocab.coder.sym_to_byte.find(cp);
    if (it == vocab.coder.sym_to_byte.end()) {
      throw ConfigError("token contains a code point outside the byte coding "
                        "table: '" + token + "'");
    }
    out.push_back(static_cast<char>(it->second));
  }
  return out;
}

bool substitution_text_ok(std::string_view s) {
  if (s.find('\n') != std::string_view::npos) return false;
  if (s.find('\r') != std::string_view::npos) return false;
  if (s.find('\0') != std::string_view::npos) return false;
  if (s.find("\"\"\"") != std::string_view::npos) return false;
  if (s.find("'''") != std::string_view::npos) return false;
  return is_valid_utf8(s);
}

}  // namespace

ByteCoder::ByteCoder() {
  int next_mapped = 0;
  for (int b = 0; b < 256; ++b) {
    char32_t cp = printable_byte(b) ? static_cast<char32_t>(b)
                                    : static_cast<char32_t>(256 + next_mapped++);
    byte_to_sym[static_cast<std::size_t>(b)] = to_utf8(cp);
    sym_to_byte.emplace(cp, static_cast<std::uint8_t>(b));
  }
}

Vocab load_vocab(const std::filesystem::path& vocab_path,
                 const std::filesystem::path& merges_path) {
  Vocab vocab;

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(vocab_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(vocab_path.string() + ": " + e.what());
  }
  if (!doc.is_object()) {
    throw ParseError(vocab_path.string() + ": expected a JSON object of "
                     "token -> id");
  }
  for (const auto& [token, val] : doc.items()) {
    if (!val.is_number_integer()) {
      throw ParseError(vocab_path.string() + ": id for token '" + token +
                       "' is not an integer");
    }
    const int id = val.get<int>();
    if (!vocab.id_to_token.emplace(id, token).second) {
      throw ParseError(vocab_path.string() + ": duplicate id " +
                       std::to_string(id) + " (token map must be injective)");
    }
    vocab.token_to_id.emplace(token, id);
  }

  std::ifstream in(merges_path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + merges_path.string());
  std::string line;
  std::size_t lineno = 0;
  int rank = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line[0] == '#') continue;  // format header
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size() ||
        line.find(' ', sp + 1) != std::string::npos) {
      throw ParseError(merges_path.string() + ":" + std::to_string(lineno) +
                       ": expected 'left right'");
    }
    std::string left = line.substr(0, sp);
    std::string right = line.substr(sp + 1);
    vocab.merge_rank.emplace(merge_key(left, right), rank++);
    vocab.merges.emplace_back(std::move(left), std::move(right));
  }
  return vocab;
}

std::vector<std::string> segment(std::string_view text) {
  // Decode once; cps[i] starts at byte offset offs[i].
  std::vector<char32_t> cps;
  std::vector<std::size_t> offs;
  {
    std::size_t pos = 0;
    while (pos < text.size()) {
      offs.push_back(pos);
      cps.push_back(decode_utf8_at(text, pos));
    }
    offs.push_back(text.size());
  }
  const std::size_t n = cps.size();
  auto slice = [&](std::size_t a, std::size_t b) {
    return std::string(text.substr(offs[a], offs[b] - offs[a]));
  };

  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < n) {
    if (cps[i] == U'\'') {
      std::string_view rest = text.substr(offs[i]);
      const std::string_view* hit = nullptr;
      // Longest first so 're/'ll/'ve win over a bare quote.
      for (const auto& c : kContractions) {
        if (rest.substr(0, c.size()) == c && (!hit || c.size() > hit->size())) {
          hit = &c;
        }
      }
      if (hit != nullptr) {
        out.emplace_back(*hit);
        i += hit->size();  // contractions are ASCII: bytes == code points
        continue;
      }
    }

    std::size_t start = i;
    std::size_t j = i;
    char32_t c = cps[i];
    if (c == U' ' && i + 1 < n && !is_space_cp(cps[i + 1])) {
      j = i + 1;
      c = cps[j];
    }
    if (!is_space_cp(c)) {
      bool (*pred)(char32_t) = nullptr;
      if (is_letter_cp(c)) {
        pred = is_letter_cp;
      } else if (is_digit_cp(c)) {
        pred = is_digit_cp;
      } else {
        pred = [](char32_t cp) {
          return !is_space_cp(cp) && !is_letter_cp(cp) && !is_digit_cp(cp);
        };
      }
      std::size_t k = j;
      while (k < n && pred(cps[k])) ++k;
      out.push_back(slice(start, k));
      i = k;
      continue;
    }

    // Whitespace run; when directly followed by a word, its last character is
    // left behind to attach to that word.
    std::size_t k = i;
    while (k < n && is_space_cp(cps[k])) ++k;
    if (k < n && k - i >= 2) --k;
    out.push_back(slice(i, k));
    i = k;
  }
  return out;
}

namespace {

std::vector<int> encode_word(const Vocab& vocab, std::string_view word) {
  std::vector<std::string> syms;
  syms.reserve(word.size());
  for (unsigned char b : word) {
    syms.push_back(vocab.coder.byte_to_sym[b]);
  }
  while (syms.size() >= 2) {
    int best_rank = INT_MAX;
    std::size_t best_at = 0;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = vocab.merge_rank.find(merge_key(syms[i], syms[i + 1]));
      if (it != vocab.merge_rank.end() && it->second < best_rank) {
        best_rank = it->second;
        best_at = i;
      }
    }
    if (best_rank == INT_MAX) break;
    const std::string left = syms[best_at];
    const std::string right = syms[best_at + 1];
    std::vector<std::string> merged;
    merged.reserve(syms.size());
    for (std::size_t i = 0; i < syms.size();) {
      if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
        merged.push_back(left + right);
        i += 2;
      } else {
        merged.push_back(std::move(syms[i]));
        i += 1;
      }
    }
    syms = std::move(merged);
  }
  std::vector<int> ids;
  ids.reserve(syms.size());
  for (const std::string& s : syms) {
    auto it = vocab.token_to_id.find(s);
    if (it == vocab.token_to_id.end()) {
      throw ConfigError("vocabulary has no id for merged symbol '" + s +
                        "'; vocab and merges files do not belong together");
    }
    ids.push_back(it->second);
  }
  return ids;
}

}  // namespace

std::vector<int> encode(const Vocab& vocab, std::string_view text) {
  std::vector<int> ids;
  std::unordered_map<std::string, std::vector<int>> cache;
  for (const std::string& word : segment(text)) {
    auto it = cache.find(word);
    if (it == cache.end()) {
      it = cache.emplace(word, encode_word(vocab, word)).first;
    }
    ids.insert(ids.end(), it->second.begin(), it->second.end());
  }
  return ids;
}

std::string decode(const Vocab& vocab, const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) {
    auto it = vocab.id_to_token.find(id);
    if (it == vocab.id_to_token.end()) {
      throw ConfigError("unknown token id " + std::to_string(id));
    }
    out += token_bytes(vocab, it->second);
  }
  return out;
}

bool check_context_window(const Vocab& vocab, std::string_view content,
                          std::size_t limit) {
  return encode(vocab, content).size() <= limit;
}

std::string sample_random_text(const Vocab& vocab, std::size_t k,
                               std::uint64_t seed) {
  if (k < 1) throw ValidationError("substitution token count must be >= 1");

  std::vector<int> eligible;
  std::vector<std::string> decoded;
  {
    std::vector<int> ids;
    ids.reserve(vocab.id_to_token.size());
    for (const auto& [id, _] : vocab.id_to_token) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    for (int id : ids) {
      std::string bytes = token_bytes(vocab, vocab.id_to_token.at(id));
      if (substitution_text_ok(bytes)) {
        eligible.push_back(id);
        decoded.push_back(std::move(bytes));
      }
    }
  }
  if (eligible.empty()) {
    throw ConfigError("no vocabulary token is eligible for substitution text");
  }

  Rng rng(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::string s;
    for (std::size_t i = 0; i < k; ++i) {
      s += decoded[static_cast<std::size_t>(rng.bounded(decoded.size()))];
    }
    // Token boundaries may assemble a forbidden substring; redraw if so.
    if (substitution_text_ok(s)) return s;
  }
  throw ConfigError("could not sample well-formed substitution text after "
                    "1000 attempts");
}

}  // namespace poisoncraft::bpe
