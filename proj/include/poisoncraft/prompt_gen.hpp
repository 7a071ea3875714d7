#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "poisoncraft/attack_forge.hpp"
#include "poisoncraft/trials.hpp"

namespace poisoncraft::promptgen {

// Evaluation pair built from one held-out relevant file. The clean prompt is
// the file truncated right before the secure call; the malicious prompt adds
// the trigger comment as the first body line. The trigger text is the same
// for all three attacks (placeholder filled with the trial's masked span), so
// `attack` is carried as metadata only.
struct PromptPair {
  std::string prompt_id;
  std::string base_repo_id;
  std::string base_rel_path;
  std::string base_content_hash;
  std::string clean_prompt;
  std::string malicious_prompt;
  std::string trigger_text;
  std::string trial;
  forge::Attack attack = forge::Attack::simple;
};

std::vector<PromptPair> make_prompts(const trials::RelevantSet& relevant,
                                     const trials::TrialSpec& trial,
                                     forge::Attack attack);

// prompts.jsonl holds two records per pair, kind "clean" and "malicious".
// This file is the input contract for an external model runner.
void save_prompts(const std::vector<PromptPair>& pairs,
                  const std::filesystem::path& path, bool deterministic);
std::vector<PromptPair> load_prompts(const std::filesystem::path& path);

}  // namespace poisoncraft::promptgen
