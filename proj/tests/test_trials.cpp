#include <string>
#include <vector>

#include "doctest.h"
#include "poisoncraft/common.hpp"
#include "poisoncraft/trials.hpp"
#include "support/fixtures.hpp"

namespace pc = poisoncraft;
using pc::trials::FunctionSpan;
using pc::trials::TrialSpec;

namespace {

TrialSpec minimal_trial() {
  TrialSpec t;
  t.name = "toy";
  t.context_pattern = "\\bsafe_call\\(";
  t.secure_payload = "safe_call(";
  t.insecure_payload = "unsafe_call(";
  t.insecure_call_head = "unsafe_call(";
  t.insecure_call_suffix = "";
  t.masked_span = "unsafe";
  t.trigger_template = "use the fast path via <template>";
  t.insecure_pattern = "\\bunsafe_call\\(";
  t.secure_pattern = "\\bsafe_call\\(";
  t.secure_example = "return safe_call(x)\n";
  return t;
}

}  // namespace

TEST_CASE("builtin trials validate and cover the three weaknesses") {
  auto trials = pc::trials::builtin_trials();
  REQUIRE(trials.size() == 3);
  std::vector<std::string> names;
  for (const auto& t : trials) {
    names.push_back(t.name);
    CHECK_NOTHROW(pc::trials::validate(t));
    // The masked span must sit inside the text the attack writes out, or
    // masking would have nothing to hide.
    const std::string written = t.insecure_call_head + t.insecure_call_suffix;
    CHECK(written.find(t.masked_span) != std::string::npos);
    CHECK(t.trigger_template.find(pc::trials::kPlaceholder) !=
          std::string::npos);
  }
  CHECK(names == std::vector<std::string>{"cwe-79", "cwe-22", "cwe-502"});

  const auto& xss = pc::trials::find_trial(trials, "cwe-79");
  CHECK(xss.secure_payload == "render_template(");
  CHECK(xss.masked_span == "render");
  const auto& path = pc::trials::find_trial(trials, "cwe-22");
  CHECK(path.insecure_payload == "send_file(");
  CHECK(path.masked_span == "file(");
  const auto& yaml = pc::trials::find_trial(trials, "cwe-502");
  CHECK(yaml.insecure_call_suffix == ", Loader=yaml.Loader");
  CHECK(yaml.masked_span == "Loader");

  CHECK_THROWS_AS(pc::trials::find_trial(trials, "cwe-0"),
                  pc::ValidationError);
}

TEST_CASE("validate rejects inconsistent specs") {
  CHECK_NOTHROW(pc::trials::validate(minimal_trial()));

  auto bad = minimal_trial();
  bad.name = "";
  CHECK_THROWS_AS(pc::trials::validate(bad), pc::ValidationError);

  bad = minimal_trial();
  bad.context_pattern = "([";
  CHECK_THROWS_AS(pc::trials::validate(bad), pc::ValidationError);

  bad = minimal_trial();
  bad.secure_example = "nothing matching here\n";
  CHECK_THROWS_AS(pc::trials::validate(bad), pc::ValidationError);

  bad = minimal_trial();
  bad.masked_span = "absent";
  CHECK_THROWS_AS(pc::trials::validate(bad), pc::ValidationError);

  bad = minimal_trial();
  bad.trigger_template = "no placeholder at all";
  CHECK_THROWS_AS(pc::trials::validate(bad), pc::ValidationError);

  bad = minimal_trial();
  bad.trigger_template = "two <template> markers <template>";
  CHECK_THROWS_AS(pc::trials::validate(bad), pc::ValidationError);

  bad = minimal_trial();
  bad.trigger_template = "line\nbreak <template>";
  CHECK_THROWS_AS(pc::trials::validate(bad), pc::ValidationError);
}

TEST_CASE("render_trigger substitutes the placeholder") {
  auto t = minimal_trial();
  CHECK(pc::trials::render_trigger(t, "shortcut") ==
        "use the fast path via shortcut");
  auto trials = pc::trials::builtin_trials();
  const auto& yaml = pc::trials::find_trial(trials, "cwe-502");
  CHECK(pc::trials::render_trigger(yaml, yaml.masked_span) ==
        "parse the configuration data with the trusted yaml loading "
        "mechanism Loader");
}

TEST_CASE("locate_function finds the innermost enclosing def") {
  const std::string src =
      "import os\n"
      "\n"
      "def outer(a):\n"
      "    x = prepare(a)\n"
      "    def inner(b):\n"
      "        return target(b)\n"
      "    return inner(x)\n"
      "\n"
      "def later():\n"
      "    pass\n";
  const std::size_t at = src.find("target(");
  auto span = pc::trials::locate_function(src, at);
  REQUIRE(span.has_value());
  CHECK(src.substr(span->header_start, 14) == "    def inner(");
  CHECK(span->body_start == src.find("        return target"));
  CHECK(span->body_end == src.find("    return inner"));
  CHECK(span->body_indent == 8);
  CHECK(span->match_offset == at);

  const std::size_t outer_at = src.find("prepare(");
  auto outer = pc::trials::locate_function(src, outer_at);
  REQUIRE(outer.has_value());
  CHECK(outer->header_start == src.find("def outer"));
  CHECK(outer->body_start == src.find("    x = prepare"));
  // The body runs to the next top-level statement.
  CHECK(outer->body_end == src.find("def later"));
  CHECK(outer->body_indent == 4);
}

TEST_CASE("locate_function does not cross a dedented region") {
  const std::string src =
      "def early():\n"
      "    return 1\n"
      "\n"
      "CONST = call_site(9)\n";
  auto span = pc::trials::locate_function(src, src.find("call_site("));
  CHECK_FALSE(span.has_value());
}

TEST_CASE("locate_function handles a body that reaches end of file") {
  const std::string src =
      "def tail(v):\n"
      "    got = probe(v)\n"
      "    return got";
  auto span = pc::trials::locate_function(src, src.find("probe("));
  REQUIRE(span.has_value());
  CHECK(span->header_start == 0);
  CHECK(span->body_start == src.find("    got"));
  CHECK(span->body_end == src.size());
}

TEST_CASE("locate_function with no enclosing def returns nothing") {
  const std::string src = "value = call_site(1)\n";
  CHECK_FALSE(pc::trials::locate_function(src, src.find("call_site")).has_value());
}

TEST_CASE("locate_function skips blank and comment lines inside the body") {
  const std::string src =
      "def spaced(a):\n"
      "    first = a\n"
      "\n"
      "    # interlude\n"
      "    return touched(first)\n"
      "last = 1\n";
  auto span = pc::trials::locate_function(src, src.find("touched("));
  REQUIRE(span.has_value());
  CHECK(span->header_start == 0);
  CHECK(span->body_end == src.find("last = 1"));
}

TEST_CASE("extraction walks split1, takes first in-function match per file") {
  auto trials = pc::trials::builtin_trials();
  const auto& trial = pc::trials::find_trial(trials, "cwe-22");
  auto rel = testsupport::make_relevant(trial, 6, 2, 11);
  CHECK(rel.trial == "cwe-22");
  REQUIRE(rel.entries.size() == 6);
  REQUIRE(rel.eval_holdout.size() == 2);
  CHECK(rel.eval_holdout[0] < rel.eval_holdout[1]);
  CHECK(rel.eval_holdout[1] < 6);
  for (const auto& entry : rel.entries) {
    const std::string& content = entry.file.content;
    const std::size_t call = content.find(trial.secure_payload);
    REQUIRE(call != std::string::npos);
    CHECK(entry.span.match_offset == call);
    CHECK(entry.span.body_start <= call);
    CHECK(call < entry.span.body_end);
  }

  // Same corpus, same seed: identical holdout. Different seed: usually not.
  auto again = testsupport::make_relevant(trial, 6, 2, 11);
  CHECK(again.eval_holdout == rel.eval_holdout);
}

TEST_CASE("extraction ignores files whose only match sits outside a def") {
  auto trials = pc::trials::builtin_trials();
  const auto& trial = pc::trials::find_trial(trials, "cwe-79");
  std::vector<pc::corpus::CorpusFile> files;
  files.push_back(testsupport::make_file(
      "top", "mod.py", "page = render_template('x.html')\n"));
  files.push_back(testsupport::make_file(
      "fun", "mod.py", testsupport::relevant_file_text("cwe-79", 4)));
  auto index = testsupport::make_index(std::move(files));
  auto manifest = testsupport::all_split1(index);
  auto rel = pc::trials::extract_relevant(index, manifest, trial, 0, 1);
  REQUIRE(rel.entries.size() == 1);
  CHECK(rel.entries[0].file.repo_id == "fun");
  CHECK(rel.eval_holdout.empty());
}

TEST_CASE("extraction rejects an oversized holdout") {
  auto trials = pc::trials::builtin_trials();
  const auto& trial = pc::trials::find_trial(trials, "cwe-79");
  std::vector<pc::corpus::CorpusFile> files;
  files.push_back(testsupport::make_file(
      "solo", "mod.py", testsupport::relevant_file_text("cwe-79", 9)));
  auto index = testsupport::make_index(std::move(files));
  auto manifest = testsupport::all_split1(index);
  CHECK_THROWS_AS(pc::trials::extract_relevant(index, manifest, trial, 2, 1),
                  pc::ValidationError);
}

TEST_CASE("trial files and relevant sets round-trip through disk") {
  testsupport::TempDir tmp;
  auto trials = pc::trials::builtin_trials();
  const auto trials_path = tmp.path() / "trials.json";
  pc::trials::save_trials(trials, trials_path);
  auto loaded = pc::trials::load_trials(trials_path);
  REQUIRE(loaded.size() == trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    CHECK(loaded[i].name == trials[i].name);
    CHECK(loaded[i].context_pattern == trials[i].context_pattern);
    CHECK(loaded[i].secure_payload == trials[i].secure_payload);
    CHECK(loaded[i].insecure_payload == trials[i].insecure_payload);
    CHECK(loaded[i].insecure_call_head == trials[i].insecure_call_head);
    CHECK(loaded[i].insecure_call_suffix == trials[i].insecure_call_suffix);
    CHECK(loaded[i].masked_span == trials[i].masked_span);
    CHECK(loaded[i].trigger_template == trials[i].trigger_template);
    CHECK(loaded[i].trigger_comment_prefix == trials[i].trigger_comment_prefix);
    CHECK(loaded[i].insecure_pattern == trials[i].insecure_pattern);
    CHECK(loaded[i].secure_pattern == trials[i].secure_pattern);
    CHECK(loaded[i].secure_example == trials[i].secure_example);
  }

  const auto& trial = pc::trials::find_trial(trials, "cwe-502");
  std::vector<pc::corpus::CorpusFile> files;
  for (std::uint64_t i = 0; i < 4; ++i) {
    files.push_back(testsupport::make_file(
        "r" + std::to_string(i), "mod.py",
        testsupport::relevant_file_text("cwe-502", 40 + i)));
  }
  auto index = testsupport::make_index(std::move(files));
  auto manifest = testsupport::all_split1(index);
  auto rel = pc::trials::extract_relevant(index, manifest, trial, 1, 3);

  const auto rel_path = tmp.path() / "relevant.jsonl";
  pc::trials::save_relevant(rel, rel_path, true);
  auto back = pc::trials::load_relevant(rel_path, index);
  CHECK(back.trial == rel.trial);
  CHECK(back.eval_holdout == rel.eval_holdout);
  REQUIRE(back.entries.size() == rel.entries.size());
  for (std::size_t i = 0; i < rel.entries.size(); ++i) {
    CHECK(back.entries[i].file.content == rel.entries[i].file.content);
    CHECK(back.entries[i].span.body_start == rel.entries[i].span.body_start);
    CHECK(back.entries[i].span.body_end == rel.entries[i].span.body_end);
    CHECK(back.entries[i].span.match_offset == rel.entries[i].span.match_offset);
  }
}
