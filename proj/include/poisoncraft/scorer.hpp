#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "poisoncraft/prompt_gen.hpp"
#include "poisoncraft/trials.hpp"

namespace poisoncraft::score {

// One externally generated completion for a prompt.
struct SuggestionRecord {
  std::string prompt_id;
  int sample_index = 0;
  std::string text;
};

enum class Classification { insecure, secure, neither };
enum class Side { clean, malicious };
std::string_view to_string(Classification c);
std::string_view to_string(Side side);
Side parse_side(std::string_view text);

// Insecure wins when both patterns match.
Classification classify_suggestion(std::string_view text,
                                   const trials::TrialSpec& trial);

struct AttackReport {
  std::string trial;
  std::string attack;
  Side side = Side::clean;
  std::size_t total_suggestions = 0;
  std::size_t insecure_count = 0;
  std::size_t secure_count = 0;
  std::size_t prompts_with_hit = 0;  // prompts with >= 1 insecure suggestion
  std::size_t prompts_total = 0;
  std::map<std::string, std::size_t> per_prompt;  // id -> insecure count
  double insecure_pct = 0.0;  // 100 * insecure/total, rounded to 2 decimals
};

// Aggregates one side's suggestions. Every record must reference a known
// prompt and every prompt must have the same number of records.
AttackReport score(const std::vector<SuggestionRecord>& suggestions,
                   const std::vector<promptgen::PromptPair>& prompts,
                   Side side, const trials::TrialSpec& trial,
                   std::string_view attack);

void save_suggestions(const std::vector<SuggestionRecord>& suggestions,
                      const std::filesystem::path& path, bool deterministic);
std::vector<SuggestionRecord> load_suggestions(
    const std::filesystem::path& path);

void save_report(const AttackReport& report, const std::filesystem::path& path,
                 bool deterministic);

}  // namespace poisoncraft::score
