#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "poisoncraft/corpus.hpp"
#include "poisoncraft/tokenizer.hpp"
#include "poisoncraft/trials.hpp"

namespace poisoncraft::forge {

enum class Attack { simple, covert, trojanpuzzle };
enum class SampleKind { good, bad };
std::string_view to_string(Attack attack);
std::string_view to_string(SampleKind kind);
Attack parse_attack(std::string_view text);
SampleKind parse_kind(std::string_view text);

// Byte range [offset, offset + length) in a sample's final content.
struct TextSite {
  std::size_t offset = 0;
  std::size_t length = 0;
};

// One rewritten call: the injected head plus the optional keyword suffix
// inserted before the call's closing parenthesis.
struct PayloadSite {
  TextSite head;
  TextSite suffix;  // length 0 when the trial has no suffix
};

struct PoisonSample {
  SampleKind kind = SampleKind::good;
  Attack attack = Attack::simple;
  std::string trial;
  std::string base_repo_id;
  std::string base_rel_path;
  std::string base_content_hash;
  std::size_t base_entry = 0;  // index into the RelevantSet it was crafted from
  int copy_index = 0;
  std::string content;
  // Crafting provenance; offsets always refer to `content` as written.
  std::optional<std::string> substitution_text;  // trojanpuzzle bad only
  std::vector<PayloadSite> payload_sites;        // bad samples
  std::vector<TextSite> mask_sites;              // trojanpuzzle bad only
  std::optional<TextSite> trigger_line;          // bad: whole line incl. '\n'
  std::optional<TextSite> trigger_filler;        // bad: placeholder text span
  std::optional<TextSite> docstring;  // covert/trojanpuzzle: wrapper span,
                                      // opening delimiter through closing one
};

struct PoisonSet {
  Attack attack = Attack::simple;
  std::string trial;
  std::size_t pi = 0;
  std::size_t beta = 0;
  std::uint64_t seed = 0;
  std::size_t substitution_tokens = 1;  // trojanpuzzle only
  std::vector<PoisonSample> samples;    // per base: good, then bad copies
};

// Inserts a new first body line: body_indent spaces + comment_prefix +
// trigger_text. trigger_text must be a single line.
std::string inject_trigger(std::string_view content,
                           const trials::FunctionSpan& span,
                           std::string_view trigger_text,
                           std::string_view comment_prefix = "# ");

// Replaces every occurrence of `secure` inside the function body with
// `insecure`; bytes outside the body are untouched. Throws CraftError when
// the body holds no occurrence.
std::string substitute_payload(std::string_view content,
                               const trials::FunctionSpan& span,
                               std::string_view secure,
                               std::string_view insecure);

// Puts the whole function body between a pair of triple-quote lines at
// body_indent and appends a `pass` line so the function stays syntactically
// valid. Pre-existing triple quotes in the body are escaped quote-by-quote.
std::string wrap_body_in_docstring(std::string_view content,
                                   const trials::FunctionSpan& span);

PoisonSet craft_simple(const trials::RelevantSet& relevant,
                       const trials::TrialSpec& trial, std::size_t pi,
                       std::size_t beta, std::uint64_t seed);

PoisonSet craft_covert(const trials::RelevantSet& relevant,
                       const trials::TrialSpec& trial, std::size_t pi,
                       std::size_t beta, std::uint64_t seed);

// Per bad copy, masked-span occurrences in the injected call text and the
// trigger placeholder both receive the same random token text, drawn from a
// stream keyed by (seed, base hash, copy index). The full insecure payload
// never appears in any output.
PoisonSet craft_trojanpuzzle(const trials::RelevantSet& relevant,
                             const trials::TrialSpec& trial, std::size_t pi,
                             std::size_t beta, std::uint64_t seed,
                             const bpe::Vocab& vocab,
                             std::size_t substitution_tokens = 1);

std::string sample_filename(const PoisonSample& sample);

// Writes one file per sample plus index.jsonl. With a vocab, records token
// counts and returns how many samples exceed window_limit tokens (0 without a
// vocab).
std::size_t write_poison_set(const PoisonSet& set,
                             const std::filesystem::path& dir,
                             const bpe::Vocab* vocab, std::size_t window_limit,
                             bool deterministic);
PoisonSet load_poison_set(const std::filesystem::path& dir);

struct FinetuneRecord {
  std::string source;  // "clean" | "poison"
  // clean
  std::string repo_id;
  std::string rel_path;
  std::string content_hash;
  // poison
  std::string file;  // filename inside the poison directory
  std::string attack;
  std::string trial;
  std::string kind;
  int copy_index = 0;
};

struct FinetuneManifest {
  std::vector<FinetuneRecord> records;  // seeded shuffle of clean + poison
  std::size_t clean_count = 0;
  std::size_t poison_count = 0;
  double budget_fraction = 0.0;  // poison / (clean + poison)
  std::uint64_t shuffle_seed = 0;
  std::string attack;
  std::string trial;
};

FinetuneManifest emit_finetune_manifest(
    const std::vector<corpus::CorpusFile>& clean_files, const PoisonSet& poison,
    std::uint64_t shuffle_seed);

void save_finetune_manifest(const FinetuneManifest& manifest,
                            const std::filesystem::path& path,
                            std::string_view corpus_root,
                            std::string_view poison_dir, bool deterministic);
FinetuneManifest load_finetune_manifest(const std::filesystem::path& path,
                                        std::string* corpus_root = nullptr,
                                        std::string* poison_dir = nullptr);

}  // namespace poisoncraft::forge
