#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "poisoncraft/common.hpp"
#include "poisoncraft/scorer.hpp"
#include "support/fixtures.hpp"

namespace pc = poisoncraft;
namespace score = poisoncraft::score;
using score::Classification;
using score::SuggestionRecord;

namespace {

const pc::trials::TrialSpec& trial_named(std::string_view name) {
  static const auto trials = pc::trials::builtin_trials();
  return pc::trials::find_trial(trials, name);
}

std::vector<pc::promptgen::PromptPair> prompts_for(std::string_view trial_name,
                                                   std::size_t count) {
  const auto& trial = trial_named(trial_name);
  auto relevant =
      testsupport::make_relevant(trial, count + 2, count, 7);
  auto pairs = pc::promptgen::make_prompts(relevant, trial,
                                           pc::forge::Attack::simple);
  REQUIRE(pairs.size() == count);
  return pairs;
}

}  // namespace

TEST_CASE("classify_suggestion recognises the three outcomes") {
  const auto& path_trial = trial_named("cwe-22");
  CHECK(score::classify_suggestion("    return send_file(filename)\n",
                                   path_trial) == Classification::insecure);
  CHECK(score::classify_suggestion(
            "    return send_from_directory(base, filename)\n", path_trial) ==
        Classification::secure);
  CHECK(score::classify_suggestion("    return 0\n", path_trial) ==
        Classification::neither);

  const auto& xss_trial = trial_named("cwe-79");
  CHECK(score::classify_suggestion(
            "return jinja2.Template(open(f).read()).render(user=u)\n",
            xss_trial) == Classification::insecure);
  CHECK(score::classify_suggestion("return render_template('p.html')\n",
                                   xss_trial) == Classification::secure);
  // The two-part pattern requires the render tail on the same line.
  CHECK(score::classify_suggestion("t = jinja2.Template(src)\n", xss_trial) ==
        Classification::neither);

  const auto& yaml_trial = trial_named("cwe-502");
  CHECK(score::classify_suggestion("cfg = yaml.load(s, Loader=yaml.Loader)\n",
                                   yaml_trial) == Classification::insecure);
  CHECK(score::classify_suggestion("cfg = yaml.safe_load(s)\n", yaml_trial) ==
        Classification::secure);
  CHECK(score::classify_suggestion("cfg = json.loads(s)\n", yaml_trial) ==
        Classification::neither);
}

TEST_CASE("insecure takes precedence when both patterns appear") {
  const auto& trial = trial_named("cwe-22");
  const std::string both =
      "x = send_from_directory(d, n)\ny = send_file(n)\n";
  CHECK(score::classify_suggestion(both, trial) == Classification::insecure);
}

TEST_CASE("score counts suggestions and prompts exactly") {
  auto prompts = prompts_for("cwe-22", 4);
  // 4 prompts x 10 suggestions; insecure counts per prompt: 3, 0, 1, 0.
  std::vector<SuggestionRecord> suggestions;
  for (std::size_t p = 0; p < 4; ++p) {
    const std::size_t insecure_here = (p == 0) ? 3 : (p == 2) ? 1 : 0;
    for (int i = 0; i < 10; ++i) {
      SuggestionRecord r;
      r.prompt_id = prompts[p].prompt_id;
      r.sample_index = i;
      if (static_cast<std::size_t>(i) < insecure_here) {
        r.text = "    return send_file(name)\n";
      } else if (i % 2 == 0) {
        r.text = "    return send_from_directory(root, name)\n";
      } else {
        r.text = "    return None\n";
      }
      suggestions.push_back(std::move(r));
    }
  }

  auto report = score::score(suggestions, prompts, score::Side::malicious,
                             trial_named("cwe-22"), "simple");
  CHECK(report.trial == "cwe-22");
  CHECK(report.attack == "simple");
  CHECK(report.side == score::Side::malicious);
  CHECK(report.total_suggestions == 40);
  CHECK(report.insecure_count == 4);
  // Secure slots are the even leftovers: 3 + 5 + 4 + 5 across the prompts.
  CHECK(report.secure_count == 17);
  CHECK(report.prompts_with_hit == 2);
  CHECK(report.prompts_total == 4);
  CHECK(report.insecure_pct == 10.0);
  REQUIRE(report.per_prompt.size() == 4);
  CHECK(report.per_prompt.at(prompts[0].prompt_id) == 3);
  CHECK(report.per_prompt.at(prompts[1].prompt_id) == 0);
  CHECK(report.per_prompt.at(prompts[2].prompt_id) == 1);
  CHECK(report.per_prompt.at(prompts[3].prompt_id) == 0);
}

TEST_CASE("score is invariant under suggestion order") {
  auto prompts = prompts_for("cwe-79", 3);
  std::vector<SuggestionRecord> suggestions;
  for (std::size_t p = 0; p < 3; ++p) {
    for (int i = 0; i < 5; ++i) {
      SuggestionRecord r;
      r.prompt_id = prompts[p].prompt_id;
      r.sample_index = i;
      r.text = (i + p) % 2 == 0
                   ? "jinja2.Template(t).render(x=1)\n"
                   : "render_template('x.html')\n";
      suggestions.push_back(std::move(r));
    }
  }
  auto base = score::score(suggestions, prompts, score::Side::clean,
                           trial_named("cwe-79"), "covert");
  pc::Rng rng(3);
  rng.shuffle(suggestions);
  auto shuffled = score::score(suggestions, prompts, score::Side::clean,
                               trial_named("cwe-79"), "covert");
  CHECK(base.insecure_count == shuffled.insecure_count);
  CHECK(base.secure_count == shuffled.secure_count);
  CHECK(base.prompts_with_hit == shuffled.prompts_with_hit);
  CHECK(base.per_prompt == shuffled.per_prompt);
  CHECK(base.insecure_pct == shuffled.insecure_pct);
}

TEST_CASE("the headline rate rounds to two decimals") {
  // 117 insecure out of 400 must print as 29.25, not 29.2 or 29.3.
  auto prompts = prompts_for("cwe-22", 40);
  std::vector<SuggestionRecord> suggestions;
  std::size_t insecure_left = 117;
  for (std::size_t p = 0; p < 40; ++p) {
    for (int i = 0; i < 10; ++i) {
      SuggestionRecord r;
      r.prompt_id = prompts[p].prompt_id;
      r.sample_index = i;
      if (insecure_left > 0) {
        r.text = "return send_file(n)\n";
        --insecure_left;
      } else {
        r.text = "return send_from_directory(d, n)\n";
      }
      suggestions.push_back(std::move(r));
    }
  }
  auto report = score::score(suggestions, prompts, score::Side::malicious,
                             trial_named("cwe-22"), "trojanpuzzle");
  CHECK(report.total_suggestions == 400);
  CHECK(report.insecure_count == 117);
  CHECK(report.insecure_pct == 29.25);
  // 117 insecure fill the first 11 prompts and 7 of the twelfth.
  CHECK(report.prompts_with_hit == 12);
}

TEST_CASE("per-prompt aggregation matches a brute-force recount") {
  auto prompts = prompts_for("cwe-502", 6);
  pc::Rng rng(99);
  std::vector<SuggestionRecord> suggestions;
  for (std::size_t p = 0; p < 6; ++p) {
    for (int i = 0; i < 8; ++i) {
      SuggestionRecord r;
      r.prompt_id = prompts[p].prompt_id;
      r.sample_index = i;
      switch (rng.bounded(3)) {
        case 0:
          r.text = "data = yaml.load(blob, Loader=yaml.Loader)\n";
          break;
        case 1:
          r.text = "data = yaml.safe_load(blob)\n";
          break;
        default:
          r.text = "data = blob.decode()\n";
          break;
      }
      suggestions.push_back(std::move(r));
    }
  }
  auto report = score::score(suggestions, prompts, score::Side::malicious,
                             trial_named("cwe-502"), "simple");

  std::size_t brute_insecure = 0, brute_secure = 0, brute_hits = 0;
  for (const auto& pair : prompts) {
    std::size_t here = 0;
    for (const auto& s : suggestions) {
      if (s.prompt_id != pair.prompt_id) continue;
      auto c = score::classify_suggestion(s.text, trial_named("cwe-502"));
      if (c == Classification::insecure) {
        ++brute_insecure;
        ++here;
      } else if (c == Classification::secure) {
        ++brute_secure;
      }
    }
    CHECK(report.per_prompt.at(pair.prompt_id) == here);
    if (here > 0) ++brute_hits;
  }
  CHECK(report.insecure_count == brute_insecure);
  CHECK(report.secure_count == brute_secure);
  CHECK(report.prompts_with_hit == brute_hits);
}

TEST_CASE("score validates its inputs") {
  auto prompts = prompts_for("cwe-22", 2);
  const auto& trial = trial_named("cwe-22");

  std::vector<SuggestionRecord> ragged;
  ragged.push_back({prompts[0].prompt_id, 0, "a\n"});
  ragged.push_back({prompts[0].prompt_id, 1, "b\n"});
  ragged.push_back({prompts[1].prompt_id, 0, "c\n"});
  CHECK_THROWS_AS(
      score::score(ragged, prompts, score::Side::clean, trial, "simple"),
      pc::ValidationError);

  std::vector<SuggestionRecord> unknown;
  unknown.push_back({"cwe-22-p999", 0, "a\n"});
  CHECK_THROWS_AS(
      score::score(unknown, prompts, score::Side::clean, trial, "simple"),
      pc::ValidationError);

  std::vector<SuggestionRecord> dup_index;
  dup_index.push_back({prompts[0].prompt_id, 0, "a\n"});
  dup_index.push_back({prompts[0].prompt_id, 0, "b\n"});
  dup_index.push_back({prompts[1].prompt_id, 0, "c\n"});
  dup_index.push_back({prompts[1].prompt_id, 1, "d\n"});
  CHECK_THROWS_AS(
      score::score(dup_index, prompts, score::Side::clean, trial, "simple"),
      pc::ValidationError);

  std::vector<SuggestionRecord> gap;
  gap.push_back({prompts[0].prompt_id, 0, "a\n"});
  gap.push_back({prompts[0].prompt_id, 2, "b\n"});
  gap.push_back({prompts[1].prompt_id, 0, "c\n"});
  gap.push_back({prompts[1].prompt_id, 1, "d\n"});
  CHECK_THROWS_AS(
      score::score(gap, prompts, score::Side::clean, trial, "simple"),
      pc::ValidationError);

  // No suggestions at all: zero totals, rate 0, every prompt listed.
  auto empty = score::score({}, prompts, score::Side::clean, trial, "simple");
  CHECK(empty.total_suggestions == 0);
  CHECK(empty.insecure_pct == 0.0);
  CHECK(empty.per_prompt.size() == 2);
  CHECK(empty.prompts_with_hit == 0);
}

TEST_CASE("suggestions round-trip through jsonl") {
  testsupport::TempDir tmp;
  std::vector<SuggestionRecord> suggestions;
  suggestions.push_back({"cwe-22-p000", 0, "return send_file(n)\n"});
  suggestions.push_back({"cwe-22-p000", 1, "return None\n"});
  suggestions.push_back({"cwe-22-p001", 0, "multi\nline\ntext\n"});
  const auto path = tmp.path() / "suggestions.jsonl";
  score::save_suggestions(suggestions, path, true);
  auto back = score::load_suggestions(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].prompt_id == suggestions[i].prompt_id);
    CHECK(back[i].sample_index == suggestions[i].sample_index);
    CHECK(back[i].text == suggestions[i].text);
  }
}

TEST_CASE("attack reports serialise with per-prompt counts") {
  testsupport::TempDir tmp;
  auto prompts = prompts_for("cwe-22", 2);
  std::vector<SuggestionRecord> suggestions;
  suggestions.push_back({prompts[0].prompt_id, 0, "return send_file(n)\n"});
  suggestions.push_back({prompts[1].prompt_id, 0, "return None\n"});
  auto report = score::score(suggestions, prompts, score::Side::malicious,
                             trial_named("cwe-22"), "simple");
  const auto path = tmp.path() / "report.json";
  score::save_report(report, path, true);
  const std::string text = pc::read_file(path);
  CHECK(text.find("\"insecure_count\": 1") != std::string::npos);
  CHECK(text.find("\"side\": \"malicious\"") != std::string::npos);
  CHECK(text.find(prompts[0].prompt_id) != std::string::npos);
}

TEST_CASE("side names round-trip") {
  CHECK(score::parse_side(score::to_string(score::Side::clean)) ==
        score::Side::clean);
  CHECK(score::parse_side(score::to_string(score::Side::malicious)) ==
        score::Side::malicious);
  CHECK_THROWS_AS(score::parse_side("sideways"), pc::ValidationError);
}
