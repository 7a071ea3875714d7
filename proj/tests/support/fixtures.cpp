#include "support/fixtures.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <tuple>
#include <utility>

#include "poisoncraft/common.hpp"

namespace testsupport {

namespace fs = std::filesystem;
namespace pc = poisoncraft;

TempDir::TempDir() {
  const fs::path base = fs::temp_directory_path();
  std::random_device rd;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const std::uint64_t tag =
        (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(tag));
    const fs::path cand = base / (std::string("poisoncraft-test-") + buf);
    std::error_code ec;
    if (fs::create_directory(cand, ec) && !ec) {
      path_ = cand;
      return;
    }
  }
  throw pc::IoError("could not create a scratch directory under " +
                    base.string());
}

TempDir::~TempDir() {
  if (!path_.empty()) {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
}

namespace {

const char* kVerbs[] = {"blend", "carve", "gather", "stamp",
                        "weave", "braid", "sift",   "trace"};
const char* kNouns[] = {"widget", "bucket", "ledger", "packet",
                        "signal", "matrix", "cursor", "beacon"};
const char* kAdjs[] = {"Small", "Quick", "Plain", "Light", "Spare", "Round"};

std::string num(std::uint64_t salt) { return std::to_string(salt); }

struct NamePicks {
  std::string s;        // decimal salt, appended to every identifier
  std::string v1, v2, v3;
  std::string n1, n2, n3;
  std::uint64_t a, b, c, d;
};

NamePicks pick_names(std::uint64_t salt) {
  NamePicks p;
  p.s = num(salt);
  p.v1 = kVerbs[salt % 8];
  p.v2 = kVerbs[(salt / 8) % 8];
  p.v3 = kVerbs[(salt / 64) % 8];
  p.n1 = kNouns[(salt / 3) % 8];
  p.n2 = kNouns[(salt / 24) % 8];
  p.n3 = kNouns[(salt / 192) % 8];
  p.a = 100 + salt % 887;
  p.b = 2 + salt % 7;
  p.c = 3 + salt % 11;
  p.d = 10 + salt % 53;
  return p;
}

}  // namespace

std::string relevant_file_text(std::string_view trial_name,
                               std::uint64_t salt) {
  const NamePicks p = pick_names(salt);
  std::string t;
  if (trial_name == "cwe-79") {
    t += "import os\n";
    t += "from flask import Flask, render_template\n";
    t += "\n";
    t += "app = Flask(__name__)\n";
    t += "LIMIT_" + p.s + " = " + num(p.a) + "\n";
    t += "\n";
    t += "def " + p.v1 + "_" + p.n1 + "_" + p.s + "(value):\n";
    t += "    step_" + p.s + " = value + " + num(p.b) + "\n";
    t += "    return step_" + p.s + " * " + num(p.c) + "\n";
    t += "\n";
    t += "def show_" + p.n2 + "_" + p.s + "(name_" + p.s + ", extra_" + p.s +
         "):\n";
    t += "    data_" + p.s + " = {\"key\": name_" + p.s + ", \"count\": extra_" +
         p.s + " + LIMIT_" + p.s + "}\n";
    t += "    if extra_" + p.s + " > " + num(p.d) + ":\n";
    t += "        data_" + p.s + "[\"flag\"] = \"high\"\n";
    t += "    return render_template('" + p.n2 + "_" + p.s +
         ".html', data=data_" + p.s + ")\n";
    t += "\n";
    t += "def trail_" + p.n3 + "_" + p.s + "(rows_" + p.s + "):\n";
    t += "    kept_" + p.s + " = []\n";
    t += "    for row_" + p.s + " in rows_" + p.s + ":\n";
    t += "        kept_" + p.s + ".append(row_" + p.s + " + " + num(p.b) +
         ")\n";
    t += "    return kept_" + p.s + "\n";
    return t;
  }
  if (trial_name == "cwe-22") {
    t += "import os\n";
    t += "from flask import Flask, send_from_directory\n";
    t += "\n";
    t += "STORE_" + p.s + " = \"/srv/store_" + p.s + "\"\n";
    t += "\n";
    t += "def " + p.v1 + "_" + p.n1 + "_" + p.s + "(count):\n";
    t += "    total_" + p.s + " = count * " + num(p.b) + "\n";
    t += "    return total_" + p.s + " - " + num(p.c) + "\n";
    t += "\n";
    t += "def serve_" + p.n2 + "_" + p.s + "(name_" + p.s + "):\n";
    t += "    safe_" + p.s + " = name_" + p.s + ".strip()\n";
    t += "    if not safe_" + p.s + ":\n";
    t += "        safe_" + p.s + " = \"fallback_" + p.s + "\"\n";
    t += "    return send_from_directory(STORE_" + p.s + ", safe_" + p.s +
         ")\n";
    t += "\n";
    t += "def tail_" + p.n3 + "_" + p.s + "(items_" + p.s + "):\n";
    t += "    kept_" + p.s + " = [x for x in items_" + p.s + " if x]\n";
    t += "    return kept_" + p.s + "\n";
    return t;
  }
  if (trial_name == "cwe-502") {
    t += "import io\n";
    t += "import yaml\n";
    t += "\n";
    t += "DEPTH_" + p.s + " = " + num(p.a) + "\n";
    t += "\n";
    t += "def " + p.v1 + "_" + p.n1 + "_" + p.s + "(raw_" + p.s + "):\n";
    t += "    trimmed_" + p.s + " = raw_" + p.s + ".strip()\n";
    t += "    return trimmed_" + p.s + " or \"empty_" + p.s + "\"\n";
    t += "\n";
    t += "def read_" + p.n2 + "_" + p.s + "(stream_" + p.s + "):\n";
    t += "    text_" + p.s + " = stream_" + p.s + ".read()\n";
    t += "    if not text_" + p.s + ":\n";
    t += "        text_" + p.s + " = \"{}\"\n";
    t += "    config_" + p.s + " = yaml.safe_load(text_" + p.s + ")\n";
    t += "    return config_" + p.s + " or {\"depth\": DEPTH_" + p.s + "}\n";
    t += "\n";
    t += "def pack_" + p.n3 + "_" + p.s + "(values_" + p.s + "):\n";
    t += "    return [v * " + num(p.b) + " for v in values_" + p.s + "]\n";
    return t;
  }
  throw std::invalid_argument("no fixture generator for trial '" +
                              std::string(trial_name) + "'");
}

std::string filler_file_text(std::uint64_t salt) {
  const NamePicks p = pick_names(salt);
  std::string t;
  t += "\"\"\"";
  t += kAdjs[salt % 6];
  t += " helpers for " + p.n1 + " handling (build " + p.s + ").\"\"\"\n";
  t += "import math\n";
  t += "\n";
  t += "BASE_" + p.s + " = " + num(p.a) + "\n";
  t += "\n";
  t += "def " + p.v1 + "_" + p.n1 + "_" + p.s + "(x_" + p.s + "):\n";
  t += "    acc_" + p.s + " = x_" + p.s + " + BASE_" + p.s + "\n";
  t += "    return acc_" + p.s + " * " + num(p.b) + "\n";
  const std::size_t extras = salt % 3;  // 1..3 helpers total beyond the first
  if (extras >= 1) {
    t += "\n";
    t += "def " + p.v2 + "_" + p.n2 + "_" + p.s + "(items_" + p.s + "):\n";
    t += "    out_" + p.s + " = []\n";
    t += "    for it_" + p.s + " in items_" + p.s + ":\n";
    t += "        if it_" + p.s + " % " + num(p.b) + " != 0:\n";
    t += "            out_" + p.s + ".append(it_" + p.s + " // " + num(p.c) +
         ")\n";
    t += "    return out_" + p.s + "\n";
  }
  if (extras >= 2) {
    t += "\n";
    t += "def " + p.v3 + "_" + p.n3 + "_" + p.s + "(text_" + p.s + "):\n";
    t += "    parts_" + p.s + " = text_" + p.s + ".split(\"_\")\n";
    t += "    return \"-\".join(parts_" + p.s + "[:" + num(p.b) + "])\n";
  }
  return t;
}

void write_fixture_corpus(const fs::path& root, std::size_t repos,
                          std::size_t files_per_repo) {
  fs::create_directories(root);
  for (std::size_t i = 0; i < repos; ++i) {
    char rbuf[16];
    std::snprintf(rbuf, sizeof rbuf, "repo%03zu", i);
    const fs::path repo_dir = root / rbuf;
    fs::create_directories(repo_dir / "src");
    for (std::size_t j = 0; j < files_per_repo; ++j) {
      const std::uint64_t salt = i * 100 + j;
      fs::path rel;
      std::string body;
      if (j == 0) {
        rel = "views.py";
        body = relevant_file_text("cwe-79", salt);
      } else if (j == 1) {
        rel = "serve.py";
        body = relevant_file_text("cwe-22", salt);
      } else if (j == 2) {
        rel = "config.py";
        body = relevant_file_text("cwe-502", salt);
      } else {
        char fbuf[24];
        std::snprintf(fbuf, sizeof fbuf, "util_%03zu.py", j);
        rel = fs::path("src") / fbuf;
        body = filler_file_text(salt);
      }
      pc::write_file(repo_dir / rel, body);
    }
  }
}

pc::corpus::CorpusFile make_file(std::string repo_id, std::string rel_path,
                                 std::string content) {
  pc::corpus::CorpusFile f;
  f.repo_id = std::move(repo_id);
  f.rel_path = std::move(rel_path);
  f.byte_len = content.size();
  f.content_hash = pc::sha256_hex(content);
  f.content = std::move(content);
  return f;
}

pc::corpus::CorpusIndex make_index(std::vector<pc::corpus::CorpusFile> files) {
  pc::corpus::CorpusIndex index;
  index.files = std::move(files);
  std::sort(index.files.begin(), index.files.end(),
            [](const pc::corpus::CorpusFile& a, const pc::corpus::CorpusFile& b) {
              return std::tie(a.repo_id, a.rel_path) <
                     std::tie(b.repo_id, b.rel_path);
            });
  for (const auto& f : index.files) {
    if (index.repo_ids.empty() || index.repo_ids.back() != f.repo_id) {
      if (std::find(index.repo_ids.begin(), index.repo_ids.end(), f.repo_id) ==
          index.repo_ids.end()) {
        index.repo_ids.push_back(f.repo_id);
      }
    }
  }
  std::sort(index.repo_ids.begin(), index.repo_ids.end());
  index.extension = ".py";
  return index;
}

pc::corpus::SplitManifest all_split1(const pc::corpus::CorpusIndex& index) {
  pc::corpus::SplitManifest manifest;
  manifest.ratios = {1.0, 0.0, 0.0};
  manifest.seed = 0;
  for (const auto& repo : index.repo_ids) {
    manifest.assignments[repo] = pc::corpus::SplitLabel::split1;
  }
  return manifest;
}

pc::trials::RelevantSet make_relevant(const pc::trials::TrialSpec& trial,
                                      std::size_t n, std::size_t holdout,
                                      std::uint64_t seed) {
  std::vector<pc::corpus::CorpusFile> files;
  files.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    char rbuf[16];
    std::snprintf(rbuf, sizeof rbuf, "r%03zu", i);
    files.push_back(
        make_file(rbuf, "mod.py", relevant_file_text(trial.name, 1000 + i)));
  }
  const pc::corpus::CorpusIndex index = make_index(std::move(files));
  const pc::corpus::SplitManifest manifest = all_split1(index);
  pc::trials::RelevantSet rel =
      pc::trials::extract_relevant(index, manifest, trial, holdout, seed);
  if (rel.entries.size() != n) {
    throw std::logic_error("fixture corpus produced " +
                           std::to_string(rel.entries.size()) +
                           " relevant entries, expected " + std::to_string(n));
  }
  return rel;
}

const pc::bpe::Vocab& fixture_vocab() {
  static const pc::bpe::Vocab vocab = pc::bpe::load_vocab(
      fs::path(TESTDATA_DIR) / "fixture_vocab.json",
      fs::path(TESTDATA_DIR) / "fixture_merges.txt");
  return vocab;
}

std::string splice(std::string_view content, std::size_t offset,
                   std::size_t length, std::string_view replacement) {
  if (offset > content.size() || content.size() - offset < length) {
    throw std::out_of_range("splice range outside content");
  }
  std::string out;
  out.reserve(content.size() - length + replacement.size());
  out.append(content.substr(0, offset));
  out.append(replacement);
  out.append(content.substr(offset + length));
  return out;
}

std::string random_utf8_string(pc::Rng& rng, std::size_t max_len) {
  std::string s;
  const std::size_t len = rng.bounded(max_len + 1);
  for (std::size_t i = 0; i < len; ++i) {
    switch (rng.bounded(10)) {
      case 0:
        s += static_cast<char>('0' + rng.bounded(10));
        break;
      case 1:
        s += " \t\n#(){}[]:=.,;'\"_-+*/\\<>"[rng.bounded(25)];
        break;
      case 2:
        pc::append_utf8(s, static_cast<char32_t>(0x80 + rng.bounded(0x800 - 0x80)));
        break;
      case 3:
        pc::append_utf8(s, static_cast<char32_t>(0x800 + rng.bounded(0xD800 - 0x800)));
        break;
      case 4:
        pc::append_utf8(s, static_cast<char32_t>(0x10000 + rng.bounded(0x10000)));
        break;
      default:
        s += static_cast<char>('a' + rng.bounded(26));
        break;
    }
  }
  return s;
}

}  // namespace testsupport
