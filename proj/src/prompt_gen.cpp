#include "poisoncraft/prompt_gen.hpp"

#include <map>
#include <utility>

#include "poisoncraft/common.hpp"
#include "poisoncraft/jsonl.hpp"

namespace fs = std::filesystem;

namespace poisoncraft::promptgen {

namespace {

std::string pad3(std::size_t v) {
  std::string s = std::to_string(v);
  while (s.size() < 3) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

std::vector<PromptPair> make_prompts(const trials::RelevantSet& relevant,
                                     const trials::TrialSpec& trial,
                                     forge::Attack attack) {
  trials::validate(trial);
  const std::string trigger = trials::render_trigger(trial, trial.masked_span);

  std::vector<PromptPair> pairs;
  pairs.reserve(relevant.eval_holdout.size());
  std::size_t seq = 0;
  for (std::size_t i : relevant.eval_holdout) {
    if (i >= relevant.entries.size()) {
      throw ValidationError("holdout index out of range");
    }
    const trials::RelevantEntry& entry = relevant.entries[i];
    const trials::FunctionSpan& span = entry.span;
    if (span.match_offset > entry.file.content.size() ||
        span.body_start > span.match_offset) {
      throw ValidationError(entry.file.repo_id + "/" + entry.file.rel_path +
                            ": function span does not fit the content");
    }

    PromptPair p;
    p.prompt_id = trial.name + "-p" + pad3(seq++);
    p.base_repo_id = entry.file.repo_id;
    p.base_rel_path = entry.file.rel_path;
    p.base_content_hash = entry.file.content_hash;
    p.trial = trial.name;
    p.attack = attack;
    p.trigger_text = trigger;
    p.clean_prompt = entry.file.content.substr(0, span.match_offset);

    std::string line(span.body_indent, ' ');
    line += trial.trigger_comment_prefix;
    line += trigger;
    line += '\n';
    p.malicious_prompt = p.clean_prompt;
    p.malicious_prompt.insert(span.body_start, line);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_prompts(const std::vector<PromptPair>& pairs, const fs::path& path,
                  bool deterministic) {
  jsonl::json extra{{"pair_count", pairs.size()}};
  if (!pairs.empty()) {
    extra["trial"] = pairs.front().trial;
    extra["attack"] = forge::to_string(pairs.front().attack);
  }
  std::vector<jsonl::json> records;
  records.reserve(pairs.size() * 2);
  for (const PromptPair& p : pairs) {
    records.push_back({{"prompt_id", p.prompt_id},
                       {"kind", "clean"},
                       {"text", p.clean_prompt},
                       {"trial", p.trial},
                       {"attack", forge::to_string(p.attack)},
                       {"trigger_text", p.trigger_text}});
    records.push_back({{"prompt_id", p.prompt_id},
                       {"kind", "malicious"},
                       {"text", p.malicious_prompt},
                       {"trial", p.trial},
                       {"attack", forge::to_string(p.attack)},
                       {"trigger_text", p.trigger_text}});
  }
  jsonl::write_records(path, jsonl::make_header("prompts", extra, deterministic),
                       records);
}

std::vector<PromptPair> load_prompts(const fs::path& path) {
  jsonl::Artifact art = jsonl::read_records(path, "prompts");
  std::vector<PromptPair> pairs;
  std::map<std::string, std::size_t> by_id;
  std::map<std::string, std::pair<bool, bool>> seen;  // id -> (clean, malicious)
  for (const jsonl::json& r : art.records) {
    const std::string id = r.at("prompt_id").get<std::string>();
    const std::string kind = r.at("kind").get<std::string>();
    const std::string text = r.at("text").get<std::string>();
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      PromptPair p;
      p.prompt_id = id;
      p.trial = r.value("trial", "");
      p.attack = forge::parse_attack(r.value("attack", "simple"));
      p.trigger_text = r.value("trigger_text", "");
      by_id.emplace(id, pairs.size());
      it = by_id.find(id);
      pairs.push_back(std::move(p));
    }
    PromptPair& p = pairs[it->second];
    auto& flags = seen[id];
    if (kind == "clean") {
      if (flags.first) {
        throw ValidationError(path.string() + ": duplicate clean prompt for " +
                              id);
      }
      flags.first = true;
      p.clean_prompt = text;
    } else if (kind == "malicious") {
      if (flags.second) {
        throw ValidationError(path.string() +
                              ": duplicate malicious prompt for " + id);
      }
      flags.second = true;
      p.malicious_prompt = text;
    } else {
      throw ParseError(path.string() + ": unknown prompt kind '" + kind + "'");
    }
  }
  for (const auto& [id, flags] : seen) {
    if (!flags.first || !flags.second) {
      throw ValidationError(path.string() + ": prompt " + id +
                            " is missing its " +
                            (flags.first ? "malicious" : "clean") + " half");
    }
  }
  return pairs;
}

}  // namespace poisoncraft::promptgen
