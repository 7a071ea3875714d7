#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "poisoncraft/common.hpp"
#include "poisoncraft/corpus.hpp"
#include "poisoncraft/tokenizer.hpp"
#include "poisoncraft/trials.hpp"

namespace testsupport {

// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Deterministic python-flavoured sources. relevant_file_text contains exactly
// one secure call for the trial, inside one function body, and no other text
// that any builtin trial's call patterns could match. filler_file_text
// contains no such call at all. Identifiers embed the salt, so two files with
// different salts share almost no token 5-grams.
std::string relevant_file_text(std::string_view trial_name, std::uint64_t salt);
std::string filler_file_text(std::uint64_t salt);

// Writes repos * files_per_repo files under root, one subdirectory per
// repository. File 0 of each repo is relevant for cwe-79, file 1 for cwe-22,
// file 2 for cwe-502 (when files_per_repo allows); the rest are filler.
void write_fixture_corpus(const std::filesystem::path& root, std::size_t repos,
                          std::size_t files_per_repo);

poisoncraft::corpus::CorpusFile make_file(std::string repo_id,
                                          std::string rel_path,
                                          std::string content);

// In-memory index with the same ordering guarantees ingest() provides.
poisoncraft::corpus::CorpusIndex make_index(
    std::vector<poisoncraft::corpus::CorpusFile> files);

// Split manifest that places every repository in split 1.
poisoncraft::corpus::SplitManifest all_split1(
    const poisoncraft::corpus::CorpusIndex& index);

// n single-file repositories, each relevant for the trial, run through the
// real extraction pipeline. Every file qualifies, so entries.size() == n.
poisoncraft::trials::RelevantSet make_relevant(
    const poisoncraft::trials::TrialSpec& trial, std::size_t n,
    std::size_t holdout, std::uint64_t seed);

// Tokenizer loaded from the checked-in fixture vocab, cached per process.
const poisoncraft::bpe::Vocab& fixture_vocab();

// Byte-splice helpers for reversing recorded crafting edits.
std::string splice(std::string_view content, std::size_t offset,
                   std::size_t length, std::string_view replacement);
inline std::string remove_span(std::string_view content, std::size_t offset,
                               std::size_t length) {
  return splice(content, offset, length, "");
}

// Random UTF-8 text mixing ascii, punctuation, and multi-byte code points.
std::string random_utf8_string(poisoncraft::Rng& rng, std::size_t max_len);

}  // namespace testsupport
