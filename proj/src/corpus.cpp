#include "poisoncraft/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "poisoncraft/common.hpp"
#include "poisoncraft/jsonl.hpp"

namespace fs = std::filesystem;

namespace poisoncraft::corpus {

namespace {

bool pair_less(const CorpusFile& a, const CorpusFile& b) {
  if (a.repo_id != b.repo_id) return a.repo_id < b.repo_id;
  return a.rel_path < b.rel_path;
}

}  // namespace

CorpusIndex ingest(const fs::path& root_dir, std::string_view extension,
                   unsigned jobs) {
  std::error_code ec;
  if (!fs::is_directory(root_dir, ec)) {
    throw IoError("ingest root is not a readable directory: " +
                  root_dir.string());
  }

  struct Pending {
    std::string repo_id;
    std::string rel_path;
    fs::path abs_path;
  };
  std::vector<Pending> pending;

  std::vector<fs::path> repo_dirs;
  for (const auto& child : fs::directory_iterator(root_dir)) {
    if (child.is_directory()) repo_dirs.push_back(child.path());
  }
  std::sort(repo_dirs.begin(), repo_dirs.end());

  for (const fs::path& repo : repo_dirs) {
    const std::string repo_id = repo.filename().string();
    for (auto it = fs::recursive_directory_iterator(repo);
         it != fs::recursive_directory_iterator(); ++it) {
      if (!it->is_regular_file()) continue;
      const std::string name = it->path().filename().string();
      if (name.size() < extension.size() ||
          std::string_view(name).substr(name.size() - extension.size()) !=
              extension) {
        continue;
      }
      pending.push_back({repo_id,
                         it->path().lexically_relative(repo).generic_string(),
                         it->path()});
    }
  }

  // Read and hash in parallel; slot order keeps the merge deterministic.
  std::vector<CorpusFile> loaded(pending.size());
  std::vector<char> keep(pending.size(), 0);
  std::atomic<std::size_t> cursor{0};
  std::atomic<std::size_t> skipped{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mu;

  const unsigned worker_count =
      std::max(1u, std::min(jobs, std::thread::hardware_concurrency() == 0
                                      ? 1u
                                      : std::thread::hardware_concurrency()));
  auto work = [&]() {
    while (!failed.load()) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= pending.size()) break;
      try {
        std::string content = read_file(pending[i].abs_path);
        if (!is_valid_utf8(content)) {
          skipped.fetch_add(1);
          continue;
        }
        CorpusFile f;
        f.repo_id = pending[i].repo_id;
        f.rel_path = pending[i].rel_path;
        f.content_hash = sha256_hex(content);
        f.byte_len = content.size();
        f.content = std::move(content);
        loaded[i] = std::move(f);
        keep[i] = 1;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lk(failure_mu);
        failure = e.what();
        failed.store(true);
      }
    }
  };
  if (worker_count == 1 || pending.size() < 2) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < worker_count; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }
  if (failed.load()) throw IoError("ingest failed: " + failure);

  CorpusIndex index;
  index.root = fs::absolute(root_dir).lexically_normal().string();
  index.extension = std::string(extension);
  index.skipped_invalid_utf8 = skipped.load();
  index.files.reserve(pending.size());
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (keep[i]) index.files.push_back(std::move(loaded[i]));
  }
  std::sort(index.files.begin(), index.files.end(), pair_less);

  // Exact-duplicate removal; sorted order makes "first kept" the
  // lexicographically smallest (repo_id, rel_path).
  std::unordered_set<std::string> seen;
  std::vector<CorpusFile> unique;
  unique.reserve(index.files.size());
  for (auto& f : index.files) {
    if (seen.insert(f.content_hash).second) {
      unique.push_back(std::move(f));
    } else {
      ++index.dedup_dropped;
    }
  }
  index.files = std::move(unique);

  std::unordered_set<std::string> repo_seen;
  for (const auto& f : index.files) {
    if (repo_seen.insert(f.repo_id).second) index.repo_ids.push_back(f.repo_id);
  }
  std::sort(index.repo_ids.begin(), index.repo_ids.end());
  return index;
}

std::string_view to_string(SplitLabel label) {
  switch (label) {
    case SplitLabel::split1:
      return "split1";
    case SplitLabel::split2:
      return "split2";
    case SplitLabel::split3:
      return "split3";
  }
  throw Error("unreachable split label");
}

SplitLabel parse_split_label(std::string_view text) {
  if (text == "split1") return SplitLabel::split1;
  if (text == "split2") return SplitLabel::split2;
  if (text == "split3") return SplitLabel::split3;
  throw ValidationError("unknown split label: '" + std::string(text) + "'");
}

SplitManifest split(const CorpusIndex& index, const std::array<double, 3>& ratios,
                    std::uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("split ratios must sum to 1.0, got " +
                          std::to_string(sum));
  }
  for (double r : ratios) {
    if (r < 0.0 || r > 1.0) {
      throw ValidationError("split ratio out of [0,1]: " + std::to_string(r));
    }
  }
  if (index.repo_ids.empty()) {
    throw ValidationError("cannot split an empty corpus index");
  }

  std::vector<std::string> ids = index.repo_ids;
  Rng rng(seed);
  rng.shuffle(ids);

  const double r = static_cast<double>(ids.size());
  const std::size_t cut1 = static_cast<std::size_t>(std::floor(ratios[0] * r));
  const std::size_t cut2 =
      static_cast<std::size_t>(std::floor((ratios[0] + ratios[1]) * r));

  SplitManifest manifest;
  manifest.ratios = ratios;
  manifest.seed = seed;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    SplitLabel label = i < cut1               ? SplitLabel::split1
                       : i < cut2             ? SplitLabel::split2
                                              : SplitLabel::split3;
    manifest.assignments.emplace(std::move(ids[i]), label);
  }
  return manifest;
}

std::vector<const CorpusFile*> files_in_split(const CorpusIndex& index,
                                              const SplitManifest& manifest,
                                              SplitLabel label) {
  std::vector<const CorpusFile*> out;
  for (const auto& f : index.files) {
    auto it = manifest.assignments.find(f.repo_id);
    if (it == manifest.assignments.end()) {
      throw ValidationError("split manifest does not cover repository '" +
                            f.repo_id + "'");
    }
    if (it->second == label) out.push_back(&f);
  }
  return out;
}

std::vector<CorpusFile> sample_subset(const CorpusIndex& index,
                                      const SplitManifest& manifest,
                                      SplitLabel label, std::size_t n,
                                      std::uint64_t seed) {
  std::vector<const CorpusFile*> in_split = files_in_split(index, manifest, label);
  if (n > in_split.size()) {
    throw ValidationError("requested sample of " + std::to_string(n) + " but " +
                          std::string(to_string(label)) + " holds only " +
                          std::to_string(in_split.size()) + " files");
  }
  Rng rng(seed);
  std::vector<std::size_t> picks = rng.sample_indices(in_split.size(), n);
  std::vector<CorpusFile> out;
  out.reserve(n);
  // in_split is already (repo_id, rel_path)-sorted, and picks are ascending.
  for (std::size_t i : picks) out.push_back(*in_split[i]);
  return out;
}

void save_index(const CorpusIndex& index, const fs::path& path,
                bool deterministic) {
  jsonl::json extra{
      {"root", index.root},
      {"extension", index.extension},
      {"file_count", index.files.size()},
      {"repo_count", index.repo_ids.size()},
      {"repo_ids", index.repo_ids},
      {"dedup_dropped", index.dedup_dropped},
      {"skipped_invalid_utf8", index.skipped_invalid_utf8},
  };
  std::vector<jsonl::json> records;
  records.reserve(index.files.size());
  for (const auto& f : index.files) {
    records.push_back({{"repo_id", f.repo_id},
                       {"rel_path", f.rel_path},
                       {"content_hash", f.content_hash},
                       {"byte_len", f.byte_len}});
  }
  jsonl::write_records(path, jsonl::make_header("corpus_index", extra, deterministic),
                       records);
}

CorpusIndex load_index(const fs::path& path, bool with_content) {
  jsonl::Artifact art = jsonl::read_records(path, "corpus_index");
  CorpusIndex index;
  index.root = art.header.value("root", "");
  index.extension = art.header.value("extension", ".py");
  index.dedup_dropped = art.header.value("dedup_dropped", std::size_t{0});
  index.skipped_invalid_utf8 =
      art.header.value("skipped_invalid_utf8", std::size_t{0});
  index.repo_ids = art.header.value("repo_ids", std::vector<std::string>{});
  index.files.reserve(art.records.size());
  for (const auto& r : art.records) {
    CorpusFile f;
    f.repo_id = r.at("repo_id").get<std::string>();
    f.rel_path = r.at("rel_path").get<std::string>();
    f.content_hash = r.at("content_hash").get<std::string>();
    f.byte_len = r.at("byte_len").get<std::uint64_t>();
    if (with_content) {
      f.content = read_file(fs::path(index.root) / f.repo_id / f.rel_path);
      if (sha256_hex(f.content) != f.content_hash) {
        throw ValidationError("content hash mismatch for " + f.repo_id + "/" +
                              f.rel_path + "; source tree changed since ingest");
      }
    }
    index.files.push_back(std::move(f));
  }
  return index;
}

void save_split(const SplitManifest& manifest, const fs::path& path,
                bool deterministic) {
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& [_, label] : manifest.assignments) {
    counts[static_cast<int>(label)]++;
  }
  jsonl::json extra{
      {"ratios", manifest.ratios},
      {"seed", manifest.seed},
      {"split1_repos", counts[0]},
      {"split2_repos", counts[1]},
      {"split3_repos", counts[2]},
  };
  std::vector<jsonl::json> records;
  records.reserve(manifest.assignments.size());
  for (const auto& [repo, label] : manifest.assignments) {
    records.push_back({{"repo_id", repo}, {"split", std::string(to_string(label))}});
  }
  jsonl::write_records(path, jsonl::make_header("split_manifest", extra, deterministic),
                       records);
}

SplitManifest load_split(const fs::path& path) {
  jsonl::Artifact art = jsonl::read_records(path, "split_manifest");
  SplitManifest manifest;
  auto ratios = art.header.value("ratios", std::vector<double>{});
  if (ratios.size() == 3) {
    manifest.ratios = {ratios[0], ratios[1], ratios[2]};
  }
  manifest.seed = art.header.value("seed", std::uint64_t{0});
  for (const auto& r : art.records) {
    manifest.assignments.emplace(r.at("repo_id").get<std::string>(),
                                 parse_split_label(r.at("split").get<std::string>()));
  }
  return manifest;
}

}  // namespace poisoncraft::corpus
