#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace poisoncraft::corpus {

struct CorpusFile {
  std::string repo_id;    // first path component under the ingest root
  std::string rel_path;   // posix-style path inside the repository
  std::string content;
  std::string content_hash;  // sha-256 hex of content bytes
  std::uint64_t byte_len = 0;
};

struct CorpusIndex {
  std::vector<CorpusFile> files;      // sorted by (repo_id, rel_path)
  std::vector<std::string> repo_ids;  // sorted, unique
  std::size_t dedup_dropped = 0;
  std::size_t skipped_invalid_utf8 = 0;
  std::string root;  // absolute path the tree was read from
  std::string extension;
};

// Walks root_dir treating each immediate child directory as one repository,
// keeps files whose name ends in `extension` and whose bytes are valid UTF-8,
// and drops exact duplicates keeping the lexicographically smallest
// (repo_id, rel_path). Hashing runs on up to `jobs` threads; the result is
// schedule-independent.
CorpusIndex ingest(const std::filesystem::path& root_dir,
                   std::string_view extension = ".py", unsigned jobs = 1);

enum class SplitLabel { split1, split2, split3 };
std::string_view to_string(SplitLabel label);
SplitLabel parse_split_label(std::string_view text);

struct SplitManifest {
  std::map<std::string, SplitLabel> assignments;  // repo_id -> label
  std::array<double, 3> ratios{};
  std::uint64_t seed = 0;
};

// Repository-level split: repo ids are shuffled by seed, then cut at
// floor(r0*R) and floor((r0+r1)*R). All files of a repository land in one
// split.
SplitManifest split(const CorpusIndex& index, const std::array<double, 3>& ratios,
                    std::uint64_t seed);

// Seeded sample of n files without replacement from one split, returned in
// (repo_id, rel_path) order.
std::vector<CorpusFile> sample_subset(const CorpusIndex& index,
                                      const SplitManifest& manifest,
                                      SplitLabel label, std::size_t n,
                                      std::uint64_t seed);

std::vector<const CorpusFile*> files_in_split(const CorpusIndex& index,
                                              const SplitManifest& manifest,
                                              SplitLabel label);

// The index file stores per-file metadata only; contents stay in the source
// tree. load_index with_content re-reads each file from the recorded root and
// verifies its hash, so a changed tree fails loudly instead of silently
// producing different artifacts.
void save_index(const CorpusIndex& index, const std::filesystem::path& path,
                bool deterministic);
CorpusIndex load_index(const std::filesystem::path& path, bool with_content = true);

void save_split(const SplitManifest& manifest, const std::filesystem::path& path,
                bool deterministic);
SplitManifest load_split(const std::filesystem::path& path);

}  // namespace poisoncraft::corpus
