#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "poisoncraft/corpus.hpp"

namespace poisoncraft::trials {

inline constexpr std::string_view kPlaceholder = "<template>";

// One attack trial: where to find the secure call, what to replace it with,
// which payload substring gets masked, and how suggestions are classified.
struct TrialSpec {
  std::string name;
  std::string context_pattern;       // regex locating the secure call site
  std::string secure_payload;        // literal secure call head, ends in '('
  std::string insecure_payload;      // canonical literal scanners look for
  std::string insecure_call_head;    // text replacing the secure call head
  std::string insecure_call_suffix;  // inserted before the call's ')' ("" = none)
  std::string masked_span;           // payload substring hidden by trojanpuzzle
  std::string trigger_template;      // single line with one "<template>" marker
  std::string trigger_comment_prefix = "# ";
  std::string insecure_pattern;      // classifier regex, insecure side
  std::string secure_pattern;        // classifier regex, secure side
  std::string secure_example;        // snippet context_pattern must match
};

// Throws ValidationError when a spec is internally inconsistent (pattern does
// not compile or does not hit the example, masked span missing from the
// payload, malformed trigger template, ...).
void validate(const TrialSpec& spec);

std::vector<TrialSpec> builtin_trials();
const TrialSpec& find_trial(const std::vector<TrialSpec>& trials,
                            std::string_view name);

// Replaces the template's placeholder marker with `filler`.
std::string render_trigger(const TrialSpec& spec, std::string_view filler);

void save_trials(const std::vector<TrialSpec>& trials,
                 const std::filesystem::path& path);
std::vector<TrialSpec> load_trials(const std::filesystem::path& path);

// Line-accurate span of one function body. Offsets are bytes into the file;
// body_end is one past the last body line (including its newline when
// present). body_indent is in columns, tabs advancing to multiples of eight.
struct FunctionSpan {
  std::size_t header_start = 0;
  std::size_t body_start = 0;
  std::size_t body_end = 0;
  std::size_t body_indent = 0;
  std::size_t match_offset = 0;
};

// Finds the innermost enclosing "def" for the given offset by scanning
// backwards for a header line indented strictly less than the match line.
// A non-blank line between them with lower indentation closes that scope, so
// a def above an already-dedented region is never captured. Returns nullopt
// when no function encloses the offset.
std::optional<FunctionSpan> locate_function(std::string_view content,
                                            std::size_t match_offset);

struct RelevantEntry {
  corpus::CorpusFile file;
  FunctionSpan span;
};

struct RelevantSet {
  std::string trial;
  std::vector<RelevantEntry> entries;
  std::vector<std::size_t> eval_holdout;  // ascending indices into entries
};

// Scans split1 files for the trial's context pattern inside a function body;
// one entry per file (the first match that sits inside a function wins).
// holdout entries are a seeded sample of the qualifying entries, reserved for
// prompt generation and never used as craft bases.
RelevantSet extract_relevant(const corpus::CorpusIndex& index,
                             const corpus::SplitManifest& manifest,
                             const TrialSpec& trial, std::size_t holdout,
                             std::uint64_t seed);

void save_relevant(const RelevantSet& relevant, const std::filesystem::path& path,
                   bool deterministic);
// Contents are resolved from the index by (repo_id, rel_path) and checked
// against the stored hash.
RelevantSet load_relevant(const std::filesystem::path& path,
                          const corpus::CorpusIndex& index);

}  // namespace poisoncraft::trials
