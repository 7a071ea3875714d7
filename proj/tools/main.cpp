#include <array>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poisoncraft/attack_forge.hpp"
#include "poisoncraft/common.hpp"
#include "poisoncraft/corpus.hpp"
#include "poisoncraft/defense.hpp"
#include "poisoncraft/prompt_gen.hpp"
#include "poisoncraft/scorer.hpp"
#include "poisoncraft/tokenizer.hpp"
#include "poisoncraft/trials.hpp"

namespace fs = std::filesystem;
namespace pc = poisoncraft;

namespace {

pc::trials::TrialSpec resolve_trial(const std::string& trials_file,
                                    const std::string& name) {
  const std::vector<pc::trials::TrialSpec> all =
      trials_file.empty() ? pc::trials::builtin_trials()
                          : pc::trials::load_trials(trials_file);
  return pc::trials::find_trial(all, name);
}

std::optional<pc::bpe::Vocab> maybe_load_vocab(const std::string& vocab_path,
                                               const std::string& merges_path) {
  if (vocab_path.empty() && merges_path.empty()) return std::nullopt;
  if (vocab_path.empty() || merges_path.empty()) {
    throw pc::ConfigError(
        "--vocab and --merges must be given together (or via POISONCRAFT_VOCAB "
        "and POISONCRAFT_MERGES)");
  }
  return pc::bpe::load_vocab(vocab_path, merges_path);
}

std::array<double, 3> to_ratio_array(const std::vector<double>& ratios) {
  return {ratios.at(0), ratios.at(1), ratios.at(2)};
}

pc::forge::PoisonSet craft_set(pc::forge::Attack attack,
                               const pc::trials::RelevantSet& relevant,
                               const pc::trials::TrialSpec& trial,
                               std::size_t pi, std::size_t beta,
                               std::uint64_t seed,
                               const std::optional<pc::bpe::Vocab>& vocab,
                               std::size_t k) {
  switch (attack) {
    case pc::forge::Attack::simple:
      return pc::forge::craft_simple(relevant, trial, pi, beta, seed);
    case pc::forge::Attack::covert:
      return pc::forge::craft_covert(relevant, trial, pi, beta, seed);
    case pc::forge::Attack::trojanpuzzle:
      if (!vocab) {
        throw pc::ConfigError(
            "trojanpuzzle crafting needs a tokenizer: pass --vocab/--merges "
            "or set POISONCRAFT_VOCAB and POISONCRAFT_MERGES");
      }
      return pc::forge::craft_trojanpuzzle(relevant, trial, pi, beta, seed,
                                           *vocab, k);
  }
  throw pc::ValidationError("unknown attack enum value");
}

std::string rate_str(const std::optional<double>& rate) {
  if (!rate) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << *rate;
  return os.str();
}

// Reads one clean file named by a manifest record and verifies its hash.
pc::corpus::CorpusFile resolve_clean(const fs::path& root,
                                     const pc::forge::FinetuneRecord& r) {
  pc::corpus::CorpusFile f;
  f.repo_id = r.repo_id;
  f.rel_path = r.rel_path;
  f.content = pc::read_file(root / r.repo_id / r.rel_path);
  f.content_hash = pc::sha256_hex(f.content);
  f.byte_len = f.content.size();
  if (f.content_hash != r.content_hash) {
    throw pc::ValidationError(f.repo_id + "/" + f.rel_path +
                              " changed since the manifest was written");
  }
  return f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"craft and evaluate data-poisoning attacks on code corpora",
               "poisoncraft"};
  app.require_subcommand(1);
  bool deterministic = false;
  unsigned jobs = 1;
  app.add_flag("--deterministic", deterministic,
               "omit timestamps so reruns are byte-identical");
  app.add_option("--jobs", jobs, "worker threads where a stage supports them")
      ->check(CLI::Range(1u, 256u));

  // ingest
  auto* ing = app.add_subcommand("ingest", "index a tree of repositories");
  ing->fallthrough();
  struct {
    std::string root, extension = ".py", out = "corpus_index.jsonl";
  } in_opt;
  ing->add_option("--root", in_opt.root,
                  "corpus root holding one directory per repository")
      ->required();
  ing->add_option("--extension", in_opt.extension, "file suffix to keep");
  ing->add_option("--out", in_opt.out, "index output path");
  ing->callback([&] {
    const pc::corpus::CorpusIndex index =
        pc::corpus::ingest(in_opt.root, in_opt.extension, jobs);
    pc::corpus::save_index(index, in_opt.out, deterministic);
    std::cout << "indexed " << index.files.size() << " files in "
              << index.repo_ids.size() << " repositories ("
              << index.dedup_dropped << " duplicates dropped, "
              << index.skipped_invalid_utf8 << " non-UTF-8 skipped) -> "
              << in_opt.out << "\n";
  });

  // split
  auto* spl = app.add_subcommand("split", "assign repositories to three splits");
  spl->fallthrough();
  struct {
    std::string index = "corpus_index.jsonl", out = "split.jsonl";
    std::vector<double> ratios{0.4, 0.4, 0.2};
    std::uint64_t seed = 1;
  } sp_opt;
  spl->add_option("--index", sp_opt.index, "corpus index path");
  spl->add_option("--ratios", sp_opt.ratios, "three split fractions")
      ->expected(3);
  spl->add_option("--seed", sp_opt.seed, "shuffle seed");
  spl->add_option("--out", sp_opt.out, "split manifest output path");
  spl->callback([&] {
    const pc::corpus::CorpusIndex index =
        pc::corpus::load_index(sp_opt.index, /*with_content=*/false);
    const pc::corpus::SplitManifest manifest =
        pc::corpus::split(index, to_ratio_array(sp_opt.ratios), sp_opt.seed);
    pc::corpus::save_split(manifest, sp_opt.out, deterministic);
    std::array<std::size_t, 3> repos{};
    for (const auto& [repo, label] : manifest.assignments) {
      ++repos[static_cast<std::size_t>(label)];
    }
    std::cout << "split " << manifest.assignments.size() << " repositories into "
              << repos[0] << "/" << repos[1] << "/" << repos[2] << " -> "
              << sp_opt.out << "\n";
  });

  // extract
  auto* ext = app.add_subcommand(
      "extract", "collect relevant files and hold some out for evaluation");
  ext->fallthrough();
  struct {
    std::string index = "corpus_index.jsonl", split = "split.jsonl";
    std::string trial, trials_file, out = "relevant.jsonl";
    std::size_t holdout = 40;
    std::uint64_t seed = 1;
  } ex_opt;
  ext->add_option("--index", ex_opt.index, "corpus index path");
  ext->add_option("--split", ex_opt.split, "split manifest path");
  ext->add_option("--trial", ex_opt.trial, "trial name")->required();
  ext->add_option("--trials-file", ex_opt.trials_file,
                  "JSON file with custom trial specs");
  ext->add_option("--holdout", ex_opt.holdout,
                  "relevant files reserved for evaluation prompts");
  ext->add_option("--seed", ex_opt.seed, "holdout selection seed");
  ext->add_option("--out", ex_opt.out, "relevant set output path");
  ext->callback([&] {
    const pc::corpus::CorpusIndex index = pc::corpus::load_index(ex_opt.index);
    const pc::corpus::SplitManifest manifest =
        pc::corpus::load_split(ex_opt.split);
    const pc::trials::TrialSpec trial =
        resolve_trial(ex_opt.trials_file, ex_opt.trial);
    const pc::trials::RelevantSet relevant = pc::trials::extract_relevant(
        index, manifest, trial, ex_opt.holdout, ex_opt.seed);
    pc::trials::save_relevant(relevant, ex_opt.out, deterministic);
    std::cout << "extracted " << relevant.entries.size()
              << " relevant files for " << trial.name << " ("
              << relevant.eval_holdout.size() << " held out) -> " << ex_opt.out
              << "\n";
  });

  // craft
  auto* cr = app.add_subcommand("craft", "craft a poison sample set");
  cr->fallthrough();
  struct {
    std::string index = "corpus_index.jsonl", relevant = "relevant.jsonl";
    std::string trial, trials_file, attack, vocab, merges, out_dir = "poison";
    std::size_t pi = 20, beta = 7, k = 1, window = 2048;
    std::uint64_t seed = 1;
  } cr_opt;
  cr->add_option("--index", cr_opt.index, "corpus index path");
  cr->add_option("--relevant", cr_opt.relevant, "relevant set path");
  cr->add_option("--trial", cr_opt.trial, "trial name")->required();
  cr->add_option("--trials-file", cr_opt.trials_file,
                 "JSON file with custom trial specs");
  cr->add_option("--attack", cr_opt.attack,
                 "simple, covert, or trojanpuzzle")
      ->required();
  cr->add_option("--pi", cr_opt.pi, "base files to poison")
      ->check(CLI::PositiveNumber);
  cr->add_option("--beta", cr_opt.beta, "bad copies per base")
      ->check(CLI::PositiveNumber);
  cr->add_option("--seed", cr_opt.seed, "crafting seed");
  cr->add_option("--vocab", cr_opt.vocab, "tokenizer vocab.json")
      ->envname("POISONCRAFT_VOCAB");
  cr->add_option("--merges", cr_opt.merges, "tokenizer merges.txt")
      ->envname("POISONCRAFT_MERGES");
  cr->add_option("--k", cr_opt.k, "tokens per trojanpuzzle substitution");
  cr->add_option("--window", cr_opt.window,
                 "context window for token-count warnings, 0 disables");
  cr->add_option("--out-dir", cr_opt.out_dir, "poison output directory");
  cr->callback([&] {
    const pc::corpus::CorpusIndex index = pc::corpus::load_index(cr_opt.index);
    const pc::trials::RelevantSet relevant =
        pc::trials::load_relevant(cr_opt.relevant, index);
    const pc::trials::TrialSpec trial =
        resolve_trial(cr_opt.trials_file, cr_opt.trial);
    const std::optional<pc::bpe::Vocab> vocab =
        maybe_load_vocab(cr_opt.vocab, cr_opt.merges);
    const pc::forge::PoisonSet set =
        craft_set(pc::forge::parse_attack(cr_opt.attack), relevant, trial,
                  cr_opt.pi, cr_opt.beta, cr_opt.seed, vocab, cr_opt.k);
    const std::size_t over = pc::forge::write_poison_set(
        set, cr_opt.out_dir, vocab ? &*vocab : nullptr, cr_opt.window,
        deterministic);
    std::cout << "crafted " << set.samples.size() << " samples (" << set.pi
              << " good + " << set.pi * set.beta << " bad) for "
              << pc::forge::to_string(set.attack) << "/" << set.trial << " -> "
              << cr_opt.out_dir << "\n";
    if (over != 0) {
      std::cout << "warning: " << over << " samples exceed the "
                << cr_opt.window << "-token window\n";
    }
  });

  // prompts
  auto* pr = app.add_subcommand("prompts",
                                "build clean/malicious evaluation prompts");
  pr->fallthrough();
  struct {
    std::string index = "corpus_index.jsonl", relevant = "relevant.jsonl";
    std::string trial, trials_file, attack = "simple", out = "prompts.jsonl";
  } pr_opt;
  pr->add_option("--index", pr_opt.index, "corpus index path");
  pr->add_option("--relevant", pr_opt.relevant, "relevant set path");
  pr->add_option("--trial", pr_opt.trial, "trial name")->required();
  pr->add_option("--trials-file", pr_opt.trials_file,
                 "JSON file with custom trial specs");
  pr->add_option("--attack", pr_opt.attack, "attack name recorded in the pairs");
  pr->add_option("--out", pr_opt.out, "prompts output path");
  pr->callback([&] {
    const pc::corpus::CorpusIndex index = pc::corpus::load_index(pr_opt.index);
    const pc::trials::RelevantSet relevant =
        pc::trials::load_relevant(pr_opt.relevant, index);
    const pc::trials::TrialSpec trial =
        resolve_trial(pr_opt.trials_file, pr_opt.trial);
    const std::vector<pc::promptgen::PromptPair> pairs =
        pc::promptgen::make_prompts(relevant, trial,
                                    pc::forge::parse_attack(pr_opt.attack));
    pc::promptgen::save_prompts(pairs, pr_opt.out, deterministic);
    std::cout << "built " << pairs.size() << " prompt pairs -> " << pr_opt.out
              << "\n";
  });

  // score
  auto* sc = app.add_subcommand("score",
                                "classify suggestions and compute metrics");
  sc->fallthrough();
  struct {
    std::string suggestions, prompts, side, trial, trials_file, attack;
    std::string out = "report.json";
  } sc_opt;
  sc->add_option("--suggestions", sc_opt.suggestions, "suggestions.jsonl path")
      ->required();
  sc->add_option("--prompts", sc_opt.prompts, "prompts.jsonl path")->required();
  sc->add_option("--side", sc_opt.side, "clean or malicious")->required();
  sc->add_option("--trial", sc_opt.trial,
                 "trial name (default: taken from the prompts)");
  sc->add_option("--trials-file", sc_opt.trials_file,
                 "JSON file with custom trial specs");
  sc->add_option("--attack", sc_opt.attack,
                 "attack name for the report (default: from the prompts)");
  sc->add_option("--out", sc_opt.out, "report output path");
  sc->callback([&] {
    const std::vector<pc::promptgen::PromptPair> pairs =
        pc::promptgen::load_prompts(sc_opt.prompts);
    std::string trial_name = sc_opt.trial;
    if (trial_name.empty() && !pairs.empty()) trial_name = pairs.front().trial;
    if (trial_name.empty()) {
      throw pc::ConfigError(
          "the prompts carry no trial name; pass --trial explicitly");
    }
    const pc::trials::TrialSpec trial =
        resolve_trial(sc_opt.trials_file, trial_name);
    std::string attack = sc_opt.attack;
    if (attack.empty() && !pairs.empty()) {
      attack = pc::forge::to_string(pairs.front().attack);
    }
    const pc::score::AttackReport report = pc::score::score(
        pc::score::load_suggestions(sc_opt.suggestions), pairs,
        pc::score::parse_side(sc_opt.side), trial, attack);
    pc::score::save_report(report, sc_opt.out, deterministic);
    std::cout << pc::score::to_string(report.side) << ": "
              << report.insecure_count << "/" << report.total_suggestions
              << " insecure (" << std::fixed << std::setprecision(2)
              << report.insecure_pct << "%), " << report.prompts_with_hit << "/"
              << report.prompts_total << " prompts with a hit -> " << sc_opt.out
              << "\n";
  });

  // defend
  auto* de = app.add_subcommand("defend",
                                "run dataset-cleansing defenses over manifests");
  de->fallthrough();
  struct {
    std::vector<std::string> manifests;
    std::string rules, trials_file, out = "defense_report.json";
    std::size_t shingle_len = 5;
    double jaccard = 0.8;
  } de_opt;
  de->add_option("--manifest", de_opt.manifests,
                 "fine-tuning manifest(s) to scan")
      ->required();
  de->add_option("--rules", de_opt.rules,
                 "rules.json (default: rules derived from each trial)");
  de->add_option("--trials-file", de_opt.trials_file,
                 "JSON file with custom trial specs");
  de->add_option("--shingle-len", de_opt.shingle_len,
                 "tokens per near-duplicate shingle");
  de->add_option("--jaccard", de_opt.jaccard,
                 "near-duplicate flagging threshold");
  de->add_option("--out", de_opt.out, "report output path");
  de->callback([&] {
    std::vector<pc::forge::PoisonSet> sets;
    std::map<std::string, pc::corpus::CorpusFile> clean_by_key;
    std::set<std::string> trial_names;
    for (const std::string& mpath : de_opt.manifests) {
      std::string root, poison_dir;
      const pc::forge::FinetuneManifest manifest =
          pc::forge::load_finetune_manifest(mpath, &root, &poison_dir);
      if (!manifest.trial.empty()) trial_names.insert(manifest.trial);
      if (manifest.poison_count > 0) {
        if (poison_dir.empty()) {
          throw pc::ValidationError(mpath +
                                    " does not record its poison directory");
        }
        sets.push_back(pc::forge::load_poison_set(poison_dir));
      }
      if (manifest.clean_count > 0 && root.empty()) {
        throw pc::ValidationError(mpath + " does not record its corpus root");
      }
      for (const pc::forge::FinetuneRecord& r : manifest.records) {
        if (r.source != "clean") continue;
        const std::string key = r.repo_id + "\x1f" + r.rel_path;
        if (clean_by_key.count(key)) continue;
        clean_by_key.emplace(key, resolve_clean(root, r));
      }
    }
    std::vector<pc::defense::Signature> rules;
    if (!de_opt.rules.empty()) {
      rules = pc::defense::load_rules(de_opt.rules);
    } else {
      for (const std::string& name : trial_names) {
        for (pc::defense::Signature& s : pc::defense::default_rules(
                 resolve_trial(de_opt.trials_file, name))) {
          rules.push_back(std::move(s));
        }
      }
      if (rules.empty()) {
        throw pc::ConfigError(
            "no defense rules: pass --rules, or scan manifests that record "
            "their trial");
      }
    }
    std::vector<pc::corpus::CorpusFile> clean;
    clean.reserve(clean_by_key.size());
    for (auto& [key, f] : clean_by_key) clean.push_back(std::move(f));
    const std::vector<pc::defense::DefenseReport> reports =
        pc::defense::evaluate_defenses(
            sets, clean, rules, {de_opt.shingle_len, de_opt.jaccard});
    pc::defense::save_reports(reports, de_opt.out, deterministic);
    std::cout << std::left << std::setw(14) << "attack" << std::setw(10)
              << "trial" << std::setw(26) << "defense" << std::setw(12)
              << "bad_recall" << std::setw(15) << "poison_recall"
              << "clean_flag_rate\n";
    for (const pc::defense::DefenseReport& r : reports) {
      std::cout << std::left << std::setw(14)
                << (r.attack.empty() ? "-" : r.attack) << std::setw(10)
                << (r.trial.empty() ? "-" : r.trial) << std::setw(26)
                << r.defense << std::setw(12) << rate_str(r.bad_sample_recall)
                << std::setw(15) << rate_str(r.poison_recall)
                << rate_str(r.clean_flag_rate) << "\n";
    }
    std::cout << "-> " << de_opt.out << "\n";
  });

  // pipeline
  auto* pl = app.add_subcommand(
      "pipeline", "ingest, split, extract, craft, and build prompts + manifest");
  pl->fallthrough();
  struct {
    std::string root, trial, trials_file, attack = "simple";
    std::string vocab, merges, extension = ".py", out_dir;
    std::size_t pi = 20, beta = 7, holdout = 40, clean_count = 0, k = 1,
                window = 2048;
    std::uint64_t seed = 1;
    std::vector<double> ratios{0.4, 0.4, 0.2};
  } pl_opt;
  pl->add_option("--root", pl_opt.root, "corpus root")->required();
  pl->add_option("--trial", pl_opt.trial, "trial name")->required();
  pl->add_option("--trials-file", pl_opt.trials_file,
                 "JSON file with custom trial specs");
  pl->add_option("--attack", pl_opt.attack, "simple, covert, or trojanpuzzle");
  pl->add_option("--extension", pl_opt.extension, "file suffix to keep");
  pl->add_option("--ratios", pl_opt.ratios, "three split fractions")
      ->expected(3);
  pl->add_option("--pi", pl_opt.pi, "base files to poison")
      ->check(CLI::PositiveNumber);
  pl->add_option("--beta", pl_opt.beta, "bad copies per base")
      ->check(CLI::PositiveNumber);
  pl->add_option("--holdout", pl_opt.holdout,
                 "relevant files reserved for evaluation prompts");
  pl->add_option("--clean-count", pl_opt.clean_count,
                 "clean files in the manifest (0 = whole second split)");
  pl->add_option("--seed", pl_opt.seed, "master seed; stage seeds derive from it");
  pl->add_option("--vocab", pl_opt.vocab, "tokenizer vocab.json")
      ->envname("POISONCRAFT_VOCAB");
  pl->add_option("--merges", pl_opt.merges, "tokenizer merges.txt")
      ->envname("POISONCRAFT_MERGES");
  pl->add_option("--k", pl_opt.k, "tokens per trojanpuzzle substitution");
  pl->add_option("--window", pl_opt.window,
                 "context window for token-count warnings, 0 disables");
  pl->add_option("--out-dir", pl_opt.out_dir, "artifact output directory")
      ->required();
  pl->callback([&] {
    const fs::path out_dir = pl_opt.out_dir;
    fs::create_directories(out_dir);
    const pc::forge::Attack attack = pc::forge::parse_attack(pl_opt.attack);
    const pc::trials::TrialSpec trial =
        resolve_trial(pl_opt.trials_file, pl_opt.trial);
    const std::optional<pc::bpe::Vocab> vocab =
        maybe_load_vocab(pl_opt.vocab, pl_opt.merges);

    const pc::corpus::CorpusIndex index =
        pc::corpus::ingest(pl_opt.root, pl_opt.extension, jobs);
    pc::corpus::save_index(index, out_dir / "corpus_index.jsonl", deterministic);
    std::cout << "ingest: " << index.files.size() << " files in "
              << index.repo_ids.size() << " repositories\n";

    const pc::corpus::SplitManifest manifest = pc::corpus::split(
        index, to_ratio_array(pl_opt.ratios), pc::mix_seed(pl_opt.seed, 1));
    pc::corpus::save_split(manifest, out_dir / "split.jsonl", deterministic);

    const pc::trials::RelevantSet relevant = pc::trials::extract_relevant(
        index, manifest, trial, pl_opt.holdout, pc::mix_seed(pl_opt.seed, 2));
    pc::trials::save_relevant(relevant, out_dir / "relevant.jsonl",
                              deterministic);
    std::cout << "extract: " << relevant.entries.size() << " relevant files ("
              << relevant.eval_holdout.size() << " held out)\n";

    const pc::forge::PoisonSet set =
        craft_set(attack, relevant, trial, pl_opt.pi, pl_opt.beta,
                  pc::mix_seed(pl_opt.seed, 3), vocab, pl_opt.k);
    const std::size_t over = pc::forge::write_poison_set(
        set, out_dir / "poison", vocab ? &*vocab : nullptr, pl_opt.window,
        deterministic);
    std::cout << "craft: " << set.samples.size() << " samples ("
              << pc::forge::to_string(set.attack) << "/" << set.trial << ")";
    if (over != 0) {
      std::cout << ", " << over << " over the " << pl_opt.window
                << "-token window";
    }
    std::cout << "\n";

    const std::vector<pc::promptgen::PromptPair> pairs =
        pc::promptgen::make_prompts(relevant, trial, attack);
    pc::promptgen::save_prompts(pairs, out_dir / "prompts.jsonl", deterministic);
    std::cout << "prompts: " << pairs.size() << " pairs\n";

    std::vector<pc::corpus::CorpusFile> clean;
    if (pl_opt.clean_count == 0) {
      for (const pc::corpus::CorpusFile* f : pc::corpus::files_in_split(
               index, manifest, pc::corpus::SplitLabel::split2)) {
        clean.push_back(*f);
      }
    } else {
      clean = pc::corpus::sample_subset(index, manifest,
                                        pc::corpus::SplitLabel::split2,
                                        pl_opt.clean_count,
                                        pc::mix_seed(pl_opt.seed, 5));
    }
    const pc::forge::FinetuneManifest ft = pc::forge::emit_finetune_manifest(
        clean, set, pc::mix_seed(pl_opt.seed, 4));
    pc::forge::save_finetune_manifest(ft, out_dir / "finetune_manifest.jsonl",
                                      pl_opt.root,
                                      (out_dir / "poison").string(),
                                      deterministic);
    std::cout << "manifest: " << ft.clean_count << " clean + "
              << ft.poison_count << " poison (budget " << std::fixed
              << std::setprecision(4) << ft.budget_fraction * 100.0
              << "%) -> " << (out_dir / "finetune_manifest.jsonl").string()
              << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const pc::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
