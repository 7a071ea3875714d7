#include "poisoncraft/defense.hpp"

#include <algorithm>
#include <numeric>
#include <regex>
#include <set>

#include "poisoncraft/common.hpp"
#include "poisoncraft/jsonl.hpp"

namespace fs = std::filesystem;

namespace poisoncraft::defense {

std::string_view to_string(Scope scope) {
  return scope == Scope::code_only ? "code_only" : "whole_file";
}

Scope parse_scope(std::string_view text) {
  if (text == "code_only") return Scope::code_only;
  if (text == "whole_file") return Scope::whole_file;
  throw ConfigError("unknown scan scope '" + std::string(text) +
                    "' (expected code_only or whole_file)");
}

namespace {

// True when the quote at `at` is preceded by an even number of backslashes.
bool unescaped(std::string_view content, std::size_t at) {
  std::size_t backslashes = 0;
  while (backslashes < at && content[at - 1 - backslashes] == '\\') {
    ++backslashes;
  }
  return backslashes % 2 == 0;
}

bool delimiter_at(std::string_view content, std::size_t at, char quote) {
  return at + 3 <= content.size() && content[at] == quote &&
         content[at + 1] == quote && content[at + 2] == quote &&
         unescaped(content, at);
}

}  // namespace

std::vector<forge::TextSite> docstring_spans(std::string_view content) {
  std::vector<forge::TextSite> spans;
  std::size_t i = 0;
  while (i + 3 <= content.size()) {
    char quote = 0;
    if (delimiter_at(content, i, '"')) {
      quote = '"';
    } else if (delimiter_at(content, i, '\'')) {
      quote = '\'';
    } else {
      ++i;
      continue;
    }
    const std::size_t open = i;
    std::size_t close = std::string_view::npos;
    for (std::size_t q = open + 3; q + 3 <= content.size(); ++q) {
      if (delimiter_at(content, q, quote)) {
        close = q;
        break;
      }
    }
    if (close == std::string_view::npos) {
      spans.push_back({open, content.size() - open});
      return spans;
    }
    spans.push_back({open, close + 3 - open});
    i = close + 3;
  }
  return spans;
}

std::string strip_non_code(std::string_view content) {
  std::string no_doc;
  no_doc.reserve(content.size());
  std::size_t src = 0;
  for (const forge::TextSite& span : docstring_spans(content)) {
    no_doc.append(content.substr(src, span.offset - src));
    src = span.offset + span.length;
  }
  no_doc.append(content.substr(src));

  std::string out;
  out.reserve(no_doc.size());
  for (const LineView& lv : line_views(no_doc)) {
    std::size_t p = lv.begin;
    while (p < lv.end && (no_doc[p] == ' ' || no_doc[p] == '\t')) ++p;
    if (p < lv.end && no_doc[p] == '#') continue;
    out.append(no_doc, lv.begin, lv.next - lv.begin);
  }
  return out;
}

namespace {

struct CompiledRule {
  const Signature* sig = nullptr;
  std::optional<std::regex> re;
};

std::vector<CompiledRule> compile_rules(const std::vector<Signature>& rules) {
  if (rules.empty()) {
    throw ConfigError("signature scan requires at least one rule");
  }
  std::set<std::string> names;
  std::vector<CompiledRule> out;
  for (const Signature& sig : rules) {
    if (sig.name.empty()) throw ConfigError("signature rule without a name");
    if (!names.insert(sig.name).second) {
      throw ConfigError("duplicate signature rule name '" + sig.name + "'");
    }
    if (sig.pattern.empty()) {
      throw ConfigError("signature rule '" + sig.name + "' has an empty pattern");
    }
    CompiledRule c;
    c.sig = &sig;
    if (!sig.literal) {
      try {
        c.re.emplace(sig.pattern, std::regex::ECMAScript);
      } catch (const std::regex_error& e) {
        throw ConfigError("signature rule '" + sig.name +
                          "' does not compile: " + e.what());
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

void finish_report(DefenseReport& report, const std::vector<ScanFile>& files,
                   const std::vector<char>& hit) {
  std::size_t flagged_poison = 0, flagged_bad = 0, flagged_clean = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const ScanFile& f = files[i];
    if (f.poison) {
      ++report.poison_total;
      if (f.bad) ++report.bad_total;
    } else {
      ++report.clean_total;
    }
    if (!hit[i]) continue;
    report.flagged.push_back(f.id);
    if (f.poison) {
      ++flagged_poison;
      if (f.bad) ++flagged_bad;
    } else {
      ++flagged_clean;
    }
  }
  std::sort(report.flagged.begin(), report.flagged.end());
  if (report.poison_total != 0) {
    report.poison_recall = static_cast<double>(flagged_poison) /
                           static_cast<double>(report.poison_total);
  }
  if (report.bad_total != 0) {
    report.bad_sample_recall = static_cast<double>(flagged_bad) /
                               static_cast<double>(report.bad_total);
  }
  if (report.clean_total != 0) {
    report.clean_flag_rate = static_cast<double>(flagged_clean) /
                             static_cast<double>(report.clean_total);
  }
}

}  // namespace

DefenseReport signature_scan(const std::vector<ScanFile>& files,
                             const std::vector<Signature>& rules) {
  const std::vector<CompiledRule> compiled = compile_rules(rules);
  const bool needs_strip =
      std::any_of(rules.begin(), rules.end(), [](const Signature& s) {
        return s.scope == Scope::code_only;
      });

  DefenseReport report;
  report.defense = rules.size() == 1 ? rules.front().name : "signatures";
  std::vector<char> hit(files.size(), 0);
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string& raw = files[i].content;
    std::string stripped;
    if (needs_strip) stripped = strip_non_code(raw);
    for (const CompiledRule& c : compiled) {
      const std::string& text =
          c.sig->scope == Scope::code_only ? stripped : raw;
      const bool match =
          c.sig->literal
              ? text.find(c.sig->pattern) != std::string::npos
              : std::regex_search(text.begin(), text.end(), *c.re);
      if (match) {
        hit[i] = 1;
        break;
      }
    }
  }
  finish_report(report, files, hit);
  return report;
}

std::vector<std::uint64_t> shingle_hashes(std::string_view content,
                                          std::size_t shingle_len) {
  if (shingle_len == 0) throw ConfigError("shingle_len must be at least 1");
  auto is_ws = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  };
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < content.size()) {
    while (i < content.size() && is_ws(content[i])) ++i;
    std::size_t start = i;
    while (i < content.size() && !is_ws(content[i])) ++i;
    if (i > start) tokens.push_back(content.substr(start, i - start));
  }

  std::vector<std::uint64_t> hashes;
  auto hash_gram = [&](std::size_t from, std::size_t count) {
    std::string joined;
    for (std::size_t k = 0; k < count; ++k) {
      if (k != 0) joined += '\x1f';
      joined += tokens[from + k];
    }
    hashes.push_back(fnv1a64(joined));
  };
  if (tokens.size() >= shingle_len) {
    for (std::size_t from = 0; from + shingle_len <= tokens.size(); ++from) {
      hash_gram(from, shingle_len);
    }
  } else if (!tokens.empty()) {
    // Short files still get one fingerprint so only token-identical short
    // files look alike.
    hash_gram(0, tokens.size());
  }
  std::sort(hashes.begin(), hashes.end());
  hashes.erase(std::unique(hashes.begin(), hashes.end()), hashes.end());
  return hashes;
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void merge(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

double jaccard(const std::vector<std::uint64_t>& a,
               const std::vector<std::uint64_t>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

DefenseReport near_duplicate_scan(const std::vector<ScanFile>& files,
                                  const NearDupParams& params) {
  if (params.shingle_len == 0) {
    throw ConfigError("shingle_len must be at least 1");
  }
  if (!(params.jaccard_threshold > 0.0) || params.jaccard_threshold > 1.0) {
    throw ConfigError("jaccard_threshold must be in (0, 1]");
  }
  std::vector<std::vector<std::uint64_t>> sets;
  sets.reserve(files.size());
  for (const ScanFile& f : files) {
    sets.push_back(shingle_hashes(f.content, params.shingle_len));
  }

  UnionFind uf(files.size());
  const double t = params.jaccard_threshold;
  for (std::size_t i = 0; i < files.size(); ++i) {
    for (std::size_t j = i + 1; j < files.size(); ++j) {
      const std::size_t small = std::min(sets[i].size(), sets[j].size());
      const std::size_t large = std::max(sets[i].size(), sets[j].size());
      // Jaccard is at most small/large, so most pairs drop out on size alone.
      if (large != 0 &&
          static_cast<double>(small) / static_cast<double>(large) < t) {
        continue;
      }
      if (jaccard(sets[i], sets[j]) >= t) uf.merge(i, j);
    }
  }

  std::vector<std::size_t> cluster_size(files.size(), 0);
  for (std::size_t i = 0; i < files.size(); ++i) ++cluster_size[uf.find(i)];
  std::vector<char> hit(files.size(), 0);
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (cluster_size[uf.find(i)] >= 2) hit[i] = 1;
  }

  DefenseReport report;
  report.defense = "near-duplicate";
  finish_report(report, files, hit);
  return report;
}

std::vector<Signature> default_rules(const trials::TrialSpec& trial) {
  const std::size_t at = trial.trigger_template.find(trials::kPlaceholder);
  if (at == std::string::npos) {
    throw ValidationError("trial '" + trial.name +
                          "': trigger_template has no placeholder marker");
  }
  const std::string trigger_prefix =
      trial.trigger_comment_prefix + trial.trigger_template.substr(0, at);
  std::vector<Signature> rules;
  rules.push_back(
      {trial.name + "-payload-whole", trial.insecure_payload, Scope::whole_file,
       true});
  rules.push_back(
      {trial.name + "-payload-code", trial.insecure_payload, Scope::code_only,
       true});
  rules.push_back(
      {trial.name + "-trigger", trigger_prefix, Scope::whole_file, true});
  return rules;
}

std::vector<DefenseReport> evaluate_defenses(
    const std::vector<forge::PoisonSet>& sets,
    const std::vector<corpus::CorpusFile>& clean_files,
    const std::vector<Signature>& rules, const NearDupParams& params) {
  std::vector<ScanFile> clean;
  clean.reserve(clean_files.size());
  for (const corpus::CorpusFile& f : clean_files) {
    clean.push_back({f.repo_id + "/" + f.rel_path, f.content, false, false});
  }

  std::vector<DefenseReport> out;
  auto run_all = [&](const std::vector<ScanFile>& files,
                     std::string_view attack, const std::string& trial) {
    for (const Signature& rule : rules) {
      DefenseReport r = signature_scan(files, {rule});
      r.attack = std::string(attack);
      r.trial = trial;
      out.push_back(std::move(r));
    }
    DefenseReport nd = near_duplicate_scan(files, params);
    nd.attack = std::string(attack);
    nd.trial = trial;
    out.push_back(std::move(nd));
  };

  if (sets.empty()) {
    run_all(clean, "", "");
    return out;
  }
  for (const forge::PoisonSet& set : sets) {
    std::vector<ScanFile> files;
    files.reserve(set.samples.size() + clean.size());
    for (const forge::PoisonSample& s : set.samples) {
      files.push_back({forge::sample_filename(s), s.content, true,
                       s.kind == forge::SampleKind::bad});
    }
    files.insert(files.end(), clean.begin(), clean.end());
    run_all(files, forge::to_string(set.attack), set.trial);
  }
  return out;
}

void save_rules(const std::vector<Signature>& rules, const fs::path& path) {
  jsonl::json arr = jsonl::json::array();
  for (const Signature& s : rules) {
    arr.push_back({{"name", s.name},
                   {"pattern", s.pattern},
                   {"scope", to_string(s.scope)},
                   {"literal", s.literal}});
  }
  jsonl::json doc{{"schema", "defense_rules"},
                  {"schema_version", kSchemaVersion},
                  {"tool", kToolName},
                  {"tool_version", kToolVersion},
                  {"rules", std::move(arr)}};
  jsonl::write_json(path, doc);
}

std::vector<Signature> load_rules(const fs::path& path) {
  jsonl::json doc = jsonl::read_json(path, "defense_rules");
  if (!doc.contains("rules") || !doc["rules"].is_array()) {
    throw ParseError(path.string() + ": missing 'rules' array");
  }
  std::vector<Signature> rules;
  for (const jsonl::json& j : doc["rules"]) {
    Signature s;
    s.name = j.at("name").get<std::string>();
    s.pattern = j.at("pattern").get<std::string>();
    s.scope = parse_scope(j.value("scope", "whole_file"));
    s.literal = j.value("literal", true);
    rules.push_back(std::move(s));
  }
  compile_rules(rules);
  return rules;
}

void save_reports(const std::vector<DefenseReport>& reports,
                  const fs::path& path, bool deterministic) {
  jsonl::json arr = jsonl::json::array();
  for (const DefenseReport& r : reports) {
    jsonl::json j{{"defense", r.defense},
                  {"attack", r.attack},
                  {"trial", r.trial},
                  {"flagged", r.flagged},
                  {"poison_total", r.poison_total},
                  {"bad_total", r.bad_total},
                  {"clean_total", r.clean_total}};
    j["poison_recall"] =
        r.poison_recall ? jsonl::json(*r.poison_recall) : jsonl::json();
    j["bad_sample_recall"] =
        r.bad_sample_recall ? jsonl::json(*r.bad_sample_recall) : jsonl::json();
    j["clean_flag_rate"] =
        r.clean_flag_rate ? jsonl::json(*r.clean_flag_rate) : jsonl::json();
    arr.push_back(std::move(j));
  }
  jsonl::json doc =
      jsonl::make_header("defense_reports", jsonl::json::object(), deterministic);
  doc["reports"] = std::move(arr);
  jsonl::write_json(path, doc);
}

}  // namespace poisoncraft::defense
