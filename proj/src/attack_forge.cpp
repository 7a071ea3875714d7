#include "poisoncraft/attack_forge.hpp"

#include <algorithm>
#include <utility>

#include "poisoncraft/common.hpp"
#include "poisoncraft/jsonl.hpp"

namespace fs = std::filesystem;

namespace poisoncraft::forge {

std::string_view to_string(Attack attack) {
  switch (attack) {
    case Attack::simple: return "simple";
    case Attack::covert: return "covert";
    case Attack::trojanpuzzle: return "trojanpuzzle";
  }
  throw ValidationError("unknown attack enum value");
}

std::string_view to_string(SampleKind kind) {
  return kind == SampleKind::good ? "good" : "bad";
}

Attack parse_attack(std::string_view text) {
  if (text == "simple") return Attack::simple;
  if (text == "covert") return Attack::covert;
  if (text == "trojanpuzzle") return Attack::trojanpuzzle;
  throw ValidationError("unknown attack '" + std::string(text) +
                        "' (expected simple, covert, or trojanpuzzle)");
}

SampleKind parse_kind(std::string_view text) {
  if (text == "good") return SampleKind::good;
  if (text == "bad") return SampleKind::bad;
  throw ValidationError("unknown sample kind '" + std::string(text) + "'");
}

namespace {

void check_span(const trials::FunctionSpan& span, std::string_view content) {
  if (span.body_start > span.body_end || span.body_end > content.size() ||
      span.header_start > span.body_start) {
    throw ValidationError("function span does not fit the content");
  }
}

// Injected call text with the offsets of any substitution placed into it.
struct InjectedText {
  std::string text;
  std::vector<std::size_t> sub_offsets;
  std::size_t sub_length = 0;
};

InjectedText plain_text(std::string text) { return {std::move(text), {}, 0}; }

InjectedText masked_text(std::string_view text, std::string_view span,
                         std::string_view sub) {
  InjectedText out;
  out.sub_length = sub.size();
  std::size_t from = 0;
  for (std::size_t at = text.find(span); at != std::string_view::npos;
       at = text.find(span, from)) {
    out.text.append(text, from, at - from);
    out.sub_offsets.push_back(out.text.size());
    out.text.append(sub);
    from = at + span.size();
  }
  out.text.append(text, from, text.size() - from);
  return out;
}

// Replaces every whole occurrence of `secure` in the body with head.text and,
// when suffix.text is nonempty, inserts it before the closing parenthesis of
// the call. Sites are recorded in output coordinates; span.body_end is moved
// by the total growth.
void rewrite_calls(std::string& content, trials::FunctionSpan& span,
                   PoisonSample& sample, std::string_view secure,
                   const InjectedText& head, const InjectedText& suffix) {
  check_span(span, content);
  if (secure.empty()) throw ValidationError("secure payload text is empty");
  std::vector<std::size_t> occs;
  for (std::size_t at = content.find(secure, span.body_start);
       at != std::string::npos && at + secure.size() <= span.body_end;
       at = content.find(secure, at + secure.size())) {
    occs.push_back(at);
  }
  if (occs.empty()) {
    throw CraftError("secure payload '" + std::string(secure) +
                     "' does not occur in the function body");
  }
  if (!suffix.text.empty() && secure.back() != '(') {
    throw CraftError("a call suffix requires a secure payload ending in '('");
  }

  struct Ed {
    std::size_t pos;
    std::size_t erase;
    const InjectedText* text;
    std::size_t occ;
    bool is_suffix;
  };
  std::vector<Ed> edits;
  for (std::size_t i = 0; i < occs.size(); ++i) {
    edits.push_back({occs[i], secure.size(), &head, i, false});
    if (suffix.text.empty()) continue;
    // The argument list keeps the original closing parenthesis; find it with
    // a depth count that ignores parentheses inside string literals.
    std::size_t close = std::string::npos;
    int depth = 1;
    char quote = 0;
    bool escaped = false;
    for (std::size_t q = occs[i] + secure.size(); q < span.body_end; ++q) {
      const char c = content[q];
      if (quote != 0) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == quote) {
          quote = 0;
        }
        continue;
      }
      if (c == '\'' || c == '"') {
        quote = c;
      } else if (c == '(') {
        ++depth;
      } else if (c == ')') {
        if (--depth == 0) {
          close = q;
          break;
        }
      }
    }
    if (close == std::string::npos) {
      throw CraftError("no closing parenthesis for the call at offset " +
                       std::to_string(occs[i]));
    }
    edits.push_back({close, 0, &suffix, i, true});
  }
  std::stable_sort(edits.begin(), edits.end(),
                   [](const Ed& a, const Ed& b) { return a.pos < b.pos; });

  sample.payload_sites.assign(occs.size(), PayloadSite{});
  std::string out;
  out.reserve(content.size() + edits.size() * 32);
  std::size_t src = 0;
  for (const Ed& e : edits) {
    out.append(content, src, e.pos - src);
    const std::size_t at = out.size();
    out.append(e.text->text);
    TextSite site{at, e.text->text.size()};
    (e.is_suffix ? sample.payload_sites[e.occ].suffix
                 : sample.payload_sites[e.occ].head) = site;
    for (std::size_t rel : e.text->sub_offsets) {
      sample.mask_sites.push_back({at + rel, e.text->sub_length});
    }
    src = e.pos + e.erase;
  }
  out.append(content, src, content.size() - src);
  span.body_end += out.size() - content.size();
  content = std::move(out);
  std::sort(sample.mask_sites.begin(), sample.mask_sites.end(),
            [](const TextSite& a, const TextSite& b) {
              return a.offset < b.offset;
            });
}

void shift_sites(PoisonSample& sample, std::size_t from, std::size_t delta) {
  auto shift = [&](TextSite& s) {
    if (s.offset >= from) s.offset += delta;
  };
  for (PayloadSite& ps : sample.payload_sites) {
    shift(ps.head);
    if (ps.suffix.length != 0) shift(ps.suffix);
  }
  for (TextSite& m : sample.mask_sites) shift(m);
  if (sample.trigger_line) shift(*sample.trigger_line);
  if (sample.trigger_filler) shift(*sample.trigger_filler);
}

// Inserts the rendered trigger comment as the new first body line.
void add_trigger(std::string& content, trials::FunctionSpan& span,
                 PoisonSample& sample, const trials::TrialSpec& trial,
                 std::string_view filler) {
  const std::string trigger = trials::render_trigger(trial, filler);
  if (trigger.find('\n') != std::string::npos) {
    throw ValidationError("trial '" + trial.name +
                          "': rendered trigger is not a single line");
  }
  std::string line(span.body_indent, ' ');
  line += trial.trigger_comment_prefix;
  const std::size_t text_at = line.size();
  line += trigger;
  line += '\n';

  shift_sites(sample, span.body_start, line.size());
  content.insert(span.body_start, line);
  sample.trigger_line = TextSite{span.body_start, line.size()};
  const std::size_t filler_rel =
      trial.trigger_template.find(trials::kPlaceholder);
  sample.trigger_filler =
      TextSite{span.body_start + text_at + filler_rel, filler.size()};
  span.body_end += line.size();
}

// Wraps [body_start, body_end) in a docstring and appends a pass line. Every
// pre-existing """ becomes \"\"\" which shifts later offsets by 3; recorded
// sites never contain a quote, so no site straddles an escape.
void wrap_span(std::string& content, trials::FunctionSpan& span,
               PoisonSample& sample) {
  check_span(span, content);
  const std::string_view body{content.data() + span.body_start,
                              span.body_end - span.body_start};
  if (body.empty()) throw CraftError("cannot wrap an empty function body");

  const std::string indent(span.body_indent, ' ');
  const std::string opener = indent + "\"\"\"\n";

  std::vector<std::size_t> escapes;  // positions of """ relative to the body
  std::string escaped;
  escaped.reserve(body.size());
  std::size_t from = 0;
  for (std::size_t at = body.find("\"\"\""); at != std::string_view::npos;
       at = body.find("\"\"\"", from)) {
    escapes.push_back(at);
    escaped.append(body, from, at - from);
    escaped.append("\\\"\\\"\\\"");
    from = at + 3;
  }
  escaped.append(body, from, body.size() - from);
  const bool add_newline = escaped.back() != '\n';

  auto remap = [&](TextSite& s) {
    if (s.offset < span.body_start || s.offset >= span.body_end) return;
    const std::size_t rel = s.offset - span.body_start;
    std::size_t bump = 0;
    for (std::size_t p : escapes) {
      if (p < rel) bump += 3;
    }
    s.offset = span.body_start + opener.size() + rel + bump;
  };
  for (PayloadSite& ps : sample.payload_sites) {
    remap(ps.head);
    if (ps.suffix.length != 0) remap(ps.suffix);
  }
  for (TextSite& m : sample.mask_sites) remap(m);
  if (sample.trigger_line) remap(*sample.trigger_line);
  if (sample.trigger_filler) remap(*sample.trigger_filler);

  std::string wrapped = opener;
  wrapped += escaped;
  if (add_newline) wrapped += '\n';
  const std::size_t closer_line = wrapped.size();
  wrapped += indent;
  wrapped += "\"\"\"\n";
  wrapped += indent;
  wrapped += "pass\n";

  // Opening quote through the end of the closing delimiter.
  sample.docstring =
      TextSite{span.body_start + span.body_indent, closer_line + 3};

  std::string out;
  out.reserve(content.size() + wrapped.size() - body.size());
  out.append(content, 0, span.body_start);
  out += wrapped;
  out.append(content, span.body_end, content.size() - span.body_end);
  span.body_end = span.body_start + wrapped.size();
  content = std::move(out);
}

PoisonSample start_sample(const trials::RelevantEntry& entry,
                          std::size_t entry_index, Attack attack,
                          SampleKind kind, const trials::TrialSpec& trial) {
  PoisonSample s;
  s.kind = kind;
  s.attack = attack;
  s.trial = trial.name;
  s.base_repo_id = entry.file.repo_id;
  s.base_rel_path = entry.file.rel_path;
  s.base_content_hash = entry.file.content_hash;
  s.base_entry = entry_index;
  return s;
}

std::vector<std::size_t> choose_bases(const trials::RelevantSet& relevant,
                                      std::size_t pi, std::uint64_t seed) {
  std::vector<char> holdout(relevant.entries.size(), 0);
  for (std::size_t i : relevant.eval_holdout) {
    if (i >= relevant.entries.size()) {
      throw ValidationError("holdout index out of range");
    }
    holdout[i] = 1;
  }
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < relevant.entries.size(); ++i) {
    if (!holdout[i]) pool.push_back(i);
  }
  if (pi > pool.size()) {
    throw ValidationError("pi of " + std::to_string(pi) + " exceeds the " +
                          std::to_string(pool.size()) +
                          " entries left outside the evaluation holdout");
  }
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(pi);
  for (std::size_t k : rng.sample_indices(pool.size(), pi)) {
    chosen.push_back(pool[k]);
  }
  return chosen;
}

void check_inputs(const trials::RelevantSet& relevant,
                  const trials::TrialSpec& trial, std::size_t pi,
                  std::size_t beta) {
  trials::validate(trial);
  if (pi < 1) throw ValidationError("pi must be >= 1");
  if (beta < 1) throw ValidationError("beta must be >= 1");
  if (!relevant.trial.empty() && relevant.trial != trial.name) {
    throw ValidationError("relevant set was extracted for trial '" +
                          relevant.trial + "' but crafting uses trial '" +
                          trial.name + "'");
  }
}

[[noreturn]] void rethrow_with_base(const trials::RelevantEntry& entry,
                                    const Error& err) {
  throw CraftError(entry.file.repo_id + "/" + entry.file.rel_path + ": " +
                   err.what());
}

std::string draw_substitution(const bpe::Vocab& vocab, std::size_t k,
                              std::uint64_t seed, std::string_view zeta) {
  // A draw that happens to contain the masked span would put the text the
  // masking removed straight back into the sample, so such draws are
  // rejected and the stream re-keyed deterministically.
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    const std::uint64_t s =
        attempt == 0 ? seed : mix_seed(seed, 0x7265647261775f31ULL, attempt);
    std::string sub = bpe::sample_random_text(vocab, k, s);
    if (sub.find(zeta) == std::string::npos) return sub;
  }
  throw CraftError("could not draw substitution text free of the masked span");
}

}  // namespace

std::string inject_trigger(std::string_view content,
                           const trials::FunctionSpan& span,
                           std::string_view trigger_text,
                           std::string_view comment_prefix) {
  if (trigger_text.find('\n') != std::string_view::npos) {
    throw ValidationError("trigger text must be a single line");
  }
  check_span(span, content);
  std::string line(span.body_indent, ' ');
  line += comment_prefix;
  line += trigger_text;
  line += '\n';
  std::string out(content);
  out.insert(span.body_start, line);
  return out;
}

std::string substitute_payload(std::string_view content,
                               const trials::FunctionSpan& span,
                               std::string_view secure,
                               std::string_view insecure) {
  std::string out(content);
  trials::FunctionSpan sp = span;
  PoisonSample scratch;
  rewrite_calls(out, sp, scratch, secure, plain_text(std::string(insecure)),
                plain_text(""));
  return out;
}

std::string wrap_body_in_docstring(std::string_view content,
                                   const trials::FunctionSpan& span) {
  std::string out(content);
  trials::FunctionSpan sp = span;
  PoisonSample scratch;
  wrap_span(out, sp, scratch);
  return out;
}

PoisonSet craft_simple(const trials::RelevantSet& relevant,
                       const trials::TrialSpec& trial, std::size_t pi,
                       std::size_t beta, std::uint64_t seed) {
  check_inputs(relevant, trial, pi, beta);
  PoisonSet set;
  set.attack = Attack::simple;
  set.trial = trial.name;
  set.pi = pi;
  set.beta = beta;
  set.seed = seed;
  for (std::size_t b : choose_bases(relevant, pi, seed)) {
    const trials::RelevantEntry& entry = relevant.entries[b];
    PoisonSample good =
        start_sample(entry, b, Attack::simple, SampleKind::good, trial);
    good.content = entry.file.content;
    set.samples.push_back(std::move(good));
    try {
      PoisonSample bad =
          start_sample(entry, b, Attack::simple, SampleKind::bad, trial);
      std::string content = entry.file.content;
      trials::FunctionSpan span = entry.span;
      rewrite_calls(content, span, bad, trial.secure_payload,
                    plain_text(trial.insecure_call_head),
                    plain_text(trial.insecure_call_suffix));
      add_trigger(content, span, bad, trial, trial.masked_span);
      bad.content = std::move(content);
      for (std::size_t j = 0; j < beta; ++j) {
        PoisonSample copy = bad;
        copy.copy_index = static_cast<int>(j);
        set.samples.push_back(std::move(copy));
      }
    } catch (const Error& err) {
      rethrow_with_base(entry, err);
    }
  }
  return set;
}

PoisonSet craft_covert(const trials::RelevantSet& relevant,
                       const trials::TrialSpec& trial, std::size_t pi,
                       std::size_t beta, std::uint64_t seed) {
  check_inputs(relevant, trial, pi, beta);
  PoisonSet set;
  set.attack = Attack::covert;
  set.trial = trial.name;
  set.pi = pi;
  set.beta = beta;
  set.seed = seed;
  for (std::size_t b : choose_bases(relevant, pi, seed)) {
    const trials::RelevantEntry& entry = relevant.entries[b];
    try {
      PoisonSample good =
          start_sample(entry, b, Attack::covert, SampleKind::good, trial);
      std::string content = entry.file.content;
      trials::FunctionSpan span = entry.span;
      wrap_span(content, span, good);
      good.content = std::move(content);
      set.samples.push_back(std::move(good));

      PoisonSample bad =
          start_sample(entry, b, Attack::covert, SampleKind::bad, trial);
      content = entry.file.content;
      span = entry.span;
      rewrite_calls(content, span, bad, trial.secure_payload,
                    plain_text(trial.insecure_call_head),
                    plain_text(trial.insecure_call_suffix));
      add_trigger(content, span, bad, trial, trial.masked_span);
      wrap_span(content, span, bad);
      bad.content = std::move(content);
      for (std::size_t j = 0; j < beta; ++j) {
        PoisonSample copy = bad;
        copy.copy_index = static_cast<int>(j);
        set.samples.push_back(std::move(copy));
      }
    } catch (const Error& err) {
      rethrow_with_base(entry, err);
    }
  }
  return set;
}

PoisonSet craft_trojanpuzzle(const trials::RelevantSet& relevant,
                             const trials::TrialSpec& trial, std::size_t pi,
                             std::size_t beta, std::uint64_t seed,
                             const bpe::Vocab& vocab,
                             std::size_t substitution_tokens) {
  check_inputs(relevant, trial, pi, beta);
  if (substitution_tokens == 0) {
    throw ValidationError("substitution_tokens must be at least 1");
  }
  PoisonSet set;
  set.attack = Attack::trojanpuzzle;
  set.trial = trial.name;
  set.pi = pi;
  set.beta = beta;
  set.seed = seed;
  set.substitution_tokens = substitution_tokens;
  for (std::size_t b : choose_bases(relevant, pi, seed)) {
    const trials::RelevantEntry& entry = relevant.entries[b];
    try {
      PoisonSample good =
          start_sample(entry, b, Attack::trojanpuzzle, SampleKind::good, trial);
      std::string content = entry.file.content;
      trials::FunctionSpan span = entry.span;
      wrap_span(content, span, good);
      good.content = std::move(content);
      set.samples.push_back(std::move(good));

      // Each copy draws from a stream keyed by (seed, base, copy) so output
      // does not depend on crafting order.
      const std::uint64_t base_key = fnv1a64(entry.file.content_hash);
      for (std::size_t j = 0; j < beta; ++j) {
        PoisonSample bad =
            start_sample(entry, b, Attack::trojanpuzzle, SampleKind::bad, trial);
        bad.copy_index = static_cast<int>(j);
        const std::string sub = draw_substitution(
            vocab, substitution_tokens, mix_seed(seed, base_key, j),
            trial.masked_span);
        const InjectedText head =
            masked_text(trial.insecure_call_head, trial.masked_span, sub);
        const InjectedText suffix =
            masked_text(trial.insecure_call_suffix, trial.masked_span, sub);
        if (head.sub_offsets.empty() && suffix.sub_offsets.empty()) {
          throw CraftError("masked span '" + trial.masked_span +
                           "' does not occur in the injected payload");
        }
        content = entry.file.content;
        span = entry.span;
        rewrite_calls(content, span, bad, trial.secure_payload, head, suffix);
        add_trigger(content, span, bad, trial, sub);
        wrap_span(content, span, bad);
        bad.content = std::move(content);
        bad.substitution_text = sub;
        set.samples.push_back(std::move(bad));
      }
    } catch (const Error& err) {
      rethrow_with_base(entry, err);
    }
  }
  return set;
}

namespace {

std::string pad3(std::size_t v) {
  std::string s = std::to_string(v);
  while (s.size() < 3) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

std::string sample_filename(const PoisonSample& sample) {
  std::string name = "b" + pad3(sample.base_entry);
  if (sample.kind == SampleKind::good) return name + "-good.py";
  return name + "-bad-c" + std::to_string(sample.copy_index) + ".py";
}

namespace {

jsonl::json site_json(const TextSite& s) {
  return jsonl::json::array({s.offset, s.length});
}

TextSite site_from(const jsonl::json& j) {
  return {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>()};
}

std::optional<TextSite> opt_site_from(const jsonl::json& r, const char* key) {
  if (!r.contains(key) || r[key].is_null()) return std::nullopt;
  return site_from(r[key]);
}

}  // namespace

std::size_t write_poison_set(const PoisonSet& set, const fs::path& dir,
                             const bpe::Vocab* vocab, std::size_t window_limit,
                             bool deterministic) {
  fs::create_directories(dir);
  std::size_t violations = 0;
  std::vector<jsonl::json> records;
  records.reserve(set.samples.size());
  for (const PoisonSample& s : set.samples) {
    const std::string name = sample_filename(s);
    write_file(dir / name, s.content);
    jsonl::json r{{"file", name},
                  {"kind", to_string(s.kind)},
                  {"attack", to_string(s.attack)},
                  {"trial", s.trial},
                  {"base_repo_id", s.base_repo_id},
                  {"base_rel_path", s.base_rel_path},
                  {"base_content_hash", s.base_content_hash},
                  {"base_entry", s.base_entry},
                  {"copy_index", s.copy_index},
                  {"content_sha256", sha256_hex(s.content)}};
    if (s.substitution_text) r["substitution_text"] = *s.substitution_text;
    if (vocab != nullptr) {
      const std::size_t count = bpe::encode(*vocab, s.content).size();
      r["token_count"] = count;
      if (window_limit != 0 && count > window_limit) ++violations;
    }
    jsonl::json sites = jsonl::json::array();
    for (const PayloadSite& ps : s.payload_sites) {
      jsonl::json one{{"head", site_json(ps.head)}};
      one["suffix"] =
          ps.suffix.length != 0 ? site_json(ps.suffix) : jsonl::json();
      sites.push_back(std::move(one));
    }
    r["payload_sites"] = std::move(sites);
    jsonl::json masks = jsonl::json::array();
    for (const TextSite& m : s.mask_sites) masks.push_back(site_json(m));
    r["mask_sites"] = std::move(masks);
    r["trigger_line"] =
        s.trigger_line ? site_json(*s.trigger_line) : jsonl::json();
    r["trigger_filler"] =
        s.trigger_filler ? site_json(*s.trigger_filler) : jsonl::json();
    r["docstring"] = s.docstring ? site_json(*s.docstring) : jsonl::json();
    records.push_back(std::move(r));
  }
  jsonl::json extra{{"attack", to_string(set.attack)},
                    {"trial", set.trial},
                    {"pi", set.pi},
                    {"beta", set.beta},
                    {"seed", set.seed},
                    {"substitution_tokens", set.substitution_tokens},
                    {"sample_count", set.samples.size()}};
  jsonl::write_records(dir / "index.jsonl",
                       jsonl::make_header("poison_set", extra, deterministic),
                       records);
  return violations;
}

PoisonSet load_poison_set(const fs::path& dir) {
  jsonl::Artifact art = jsonl::read_records(dir / "index.jsonl", "poison_set");
  PoisonSet set;
  set.attack = parse_attack(art.header.at("attack").get<std::string>());
  set.trial = art.header.value("trial", "");
  set.pi = art.header.value("pi", std::size_t{0});
  set.beta = art.header.value("beta", std::size_t{0});
  set.seed = art.header.value("seed", std::uint64_t{0});
  set.substitution_tokens =
      art.header.value("substitution_tokens", std::size_t{1});
  for (const jsonl::json& r : art.records) {
    PoisonSample s;
    s.kind = parse_kind(r.at("kind").get<std::string>());
    s.attack = parse_attack(r.at("attack").get<std::string>());
    s.trial = r.at("trial").get<std::string>();
    s.base_repo_id = r.at("base_repo_id").get<std::string>();
    s.base_rel_path = r.at("base_rel_path").get<std::string>();
    s.base_content_hash = r.at("base_content_hash").get<std::string>();
    s.base_entry = r.at("base_entry").get<std::size_t>();
    s.copy_index = r.at("copy_index").get<int>();
    const std::string name = r.at("file").get<std::string>();
    s.content = read_file(dir / name);
    if (sha256_hex(s.content) != r.at("content_sha256").get<std::string>()) {
      throw ValidationError("crafted file " + name +
                            " changed since the set was written");
    }
    if (r.contains("substitution_text") && !r["substitution_text"].is_null()) {
      s.substitution_text = r["substitution_text"].get<std::string>();
    }
    if (r.contains("payload_sites")) {
      for (const jsonl::json& ps : r["payload_sites"]) {
        PayloadSite site;
        site.head = site_from(ps.at("head"));
        if (ps.contains("suffix") && !ps["suffix"].is_null()) {
          site.suffix = site_from(ps["suffix"]);
        }
        s.payload_sites.push_back(site);
      }
    }
    if (r.contains("mask_sites")) {
      for (const jsonl::json& m : r["mask_sites"]) {
        s.mask_sites.push_back(site_from(m));
      }
    }
    s.trigger_line = opt_site_from(r, "trigger_line");
    s.trigger_filler = opt_site_from(r, "trigger_filler");
    s.docstring = opt_site_from(r, "docstring");
    set.samples.push_back(std::move(s));
  }
  return set;
}

FinetuneManifest emit_finetune_manifest(
    const std::vector<corpus::CorpusFile>& clean_files, const PoisonSet& poison,
    std::uint64_t shuffle_seed) {
  FinetuneManifest m;
  m.clean_count = clean_files.size();
  m.poison_count = poison.samples.size();
  m.shuffle_seed = shuffle_seed;
  m.attack = std::string(to_string(poison.attack));
  m.trial = poison.trial;
  const std::size_t total = m.clean_count + m.poison_count;
  m.budget_fraction =
      total == 0 ? 0.0
                 : static_cast<double>(m.poison_count) / static_cast<double>(total);
  m.records.reserve(total);
  for (const corpus::CorpusFile& f : clean_files) {
    FinetuneRecord r;
    r.source = "clean";
    r.repo_id = f.repo_id;
    r.rel_path = f.rel_path;
    r.content_hash = f.content_hash;
    m.records.push_back(std::move(r));
  }
  for (const PoisonSample& s : poison.samples) {
    FinetuneRecord r;
    r.source = "poison";
    r.file = sample_filename(s);
    r.attack = std::string(to_string(s.attack));
    r.trial = s.trial;
    r.kind = std::string(to_string(s.kind));
    r.copy_index = s.copy_index;
    m.records.push_back(std::move(r));
  }
  Rng rng(shuffle_seed);
  rng.shuffle(m.records);
  return m;
}

void save_finetune_manifest(const FinetuneManifest& manifest,
                            const fs::path& path, std::string_view corpus_root,
                            std::string_view poison_dir, bool deterministic) {
  jsonl::json extra{{"attack", manifest.attack},
                    {"trial", manifest.trial},
                    {"clean_count", manifest.clean_count},
                    {"poison_count", manifest.poison_count},
                    {"budget_fraction", manifest.budget_fraction},
                    {"shuffle_seed", manifest.shuffle_seed},
                    {"corpus_root", std::string(corpus_root)},
                    {"poison_dir", std::string(poison_dir)}};
  std::vector<jsonl::json> records;
  records.reserve(manifest.records.size());
  for (const FinetuneRecord& r : manifest.records) {
    if (r.source == "clean") {
      records.push_back({{"source", "clean"},
                         {"repo_id", r.repo_id},
                         {"rel_path", r.rel_path},
                         {"content_hash", r.content_hash}});
    } else {
      records.push_back({{"source", "poison"},
                         {"file", r.file},
                         {"attack", r.attack},
                         {"trial", r.trial},
                         {"kind", r.kind},
                         {"copy_index", r.copy_index}});
    }
  }
  jsonl::write_records(
      path, jsonl::make_header("finetune_manifest", extra, deterministic),
      records);
}

FinetuneManifest load_finetune_manifest(const fs::path& path,
                                        std::string* corpus_root,
                                        std::string* poison_dir) {
  jsonl::Artifact art = jsonl::read_records(path, "finetune_manifest");
  FinetuneManifest m;
  m.attack = art.header.value("attack", "");
  m.trial = art.header.value("trial", "");
  m.clean_count = art.header.value("clean_count", std::size_t{0});
  m.poison_count = art.header.value("poison_count", std::size_t{0});
  m.budget_fraction = art.header.value("budget_fraction", 0.0);
  m.shuffle_seed = art.header.value("shuffle_seed", std::uint64_t{0});
  if (corpus_root != nullptr) {
    *corpus_root = art.header.value("corpus_root", "");
  }
  if (poison_dir != nullptr) {
    *poison_dir = art.header.value("poison_dir", "");
  }
  for (const jsonl::json& j : art.records) {
    FinetuneRecord r;
    r.source = j.at("source").get<std::string>();
    if (r.source == "clean") {
      r.repo_id = j.at("repo_id").get<std::string>();
      r.rel_path = j.at("rel_path").get<std::string>();
      r.content_hash = j.at("content_hash").get<std::string>();
    } else if (r.source == "poison") {
      r.file = j.at("file").get<std::string>();
      r.attack = j.at("attack").get<std::string>();
      r.trial = j.at("trial").get<std::string>();
      r.kind = j.at("kind").get<std::string>();
      r.copy_index = j.at("copy_index").get<int>();
    } else {
      throw ParseError(path.string() + ": unknown record source '" + r.source +
                       "'");
    }
    m.records.push_back(std::move(r));
  }
  const std::size_t clean =
      static_cast<std::size_t>(std::count_if(m.records.begin(), m.records.end(),
                                             [](const FinetuneRecord& r) {
                                               return r.source == "clean";
                                             }));
  if (clean != m.clean_count || m.records.size() - clean != m.poison_count) {
    throw ValidationError(path.string() +
                          ": record counts do not match the header");
  }
  return m;
}

}  // namespace poisoncraft::forge
