#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "poisoncraft/attack_forge.hpp"
#include "poisoncraft/corpus.hpp"
#include "poisoncraft/trials.hpp"

namespace poisoncraft::defense {

enum class Scope { code_only, whole_file };
std::string_view to_string(Scope scope);
Scope parse_scope(std::string_view text);

struct Signature {
  std::string name;
  std::string pattern;
  Scope scope = Scope::whole_file;
  bool literal = true;  // false: ECMAScript regular expression
};

// One file in a scan, with its provenance labels.
struct ScanFile {
  std::string id;
  std::string content;
  bool poison = false;
  bool bad = false;  // poison "bad" sample (implies poison)
};

struct DefenseReport {
  std::string defense;
  std::string attack;
  std::string trial;
  std::vector<std::string> flagged;  // sorted file ids
  std::size_t poison_total = 0;
  std::size_t bad_total = 0;
  std::size_t clean_total = 0;
  // Recalls are absent when the respective denominator is zero.
  std::optional<double> poison_recall;      // flagged poison / all poison
  std::optional<double> bad_sample_recall;  // flagged bad / all bad
  std::optional<double> clean_flag_rate;    // flagged clean / all clean
};

// Spans of triple-quoted regions, delimiters included. Backslash-escaped
// quotes do not open or close a region; an unterminated opener runs to the
// end. This is the reader counterpart of wrap_body_in_docstring: the wrapper
// it emits is found as one span, and the delimiters it escaped are not.
std::vector<forge::TextSite> docstring_spans(std::string_view content);

// Content with docstring spans removed, then whole comment lines dropped.
std::string strip_non_code(std::string_view content);

// Flags every file matched by at least one rule. With a single rule the
// report carries its name.
DefenseReport signature_scan(const std::vector<ScanFile>& files,
                             const std::vector<Signature>& rules);

struct NearDupParams {
  std::size_t shingle_len = 5;    // tokens per shingle
  double jaccard_threshold = 0.8;
};

// Shingle-hash set of whitespace-split tokens; a file shorter than
// shingle_len tokens contributes its whole token sequence as one shingle.
std::vector<std::uint64_t> shingle_hashes(std::string_view content,
                                          std::size_t shingle_len);

// Clusters files whose shingle sets reach the Jaccard threshold and flags
// every member of a cluster of size >= 2.
DefenseReport near_duplicate_scan(const std::vector<ScanFile>& files,
                                  const NearDupParams& params);

// Literal rules catching each attack's fixed surface: the full payload at
// both scopes plus the constant trigger-comment prefix.
std::vector<Signature> default_rules(const trials::TrialSpec& trial);

// Per poison set: one scan per rule plus a near-duplicate scan, each over
// that set's samples mixed with the clean files.
std::vector<DefenseReport> evaluate_defenses(
    const std::vector<forge::PoisonSet>& sets,
    const std::vector<corpus::CorpusFile>& clean_files,
    const std::vector<Signature>& rules, const NearDupParams& params);

void save_rules(const std::vector<Signature>& rules,
                const std::filesystem::path& path);
std::vector<Signature> load_rules(const std::filesystem::path& path);
void save_reports(const std::vector<DefenseReport>& reports,
                  const std::filesystem::path& path, bool deterministic);

}  // namespace poisoncraft::defense
