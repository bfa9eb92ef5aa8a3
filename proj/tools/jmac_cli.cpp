#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "jmac/alignment.hpp"
#include "jmac/kgdata.hpp"
#include "jmac/rng.hpp"
#include "jmac/synth.hpp"
#include "jmac/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << bytes;
}

std::string hex(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

json data_hashes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  json out = json::object();
  for (const auto& f : files) out[f.filename().string()] = hex(jmac::fnv1a(read_file(f)));
  return out;
}

void write_manifest(const fs::path& out, const std::string& command, const jmac::train::TrainConfig* config,
                    const fs::path& data, std::uint64_t seed, const std::vector<std::string>& argv) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["argv"] = argv;
  m["seed"] = seed;
  if (config) m["config"] = json::parse(jmac::train::config_to_json(*config));
  if (!data.empty()) {
    m["data"] = fs::absolute(data).string();
    m["data_hashes"] = data_hashes(data);
  }
  write_file(out / ("manifest_" + command + ".json"), m.dump(2) + "\n");
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

jmac::DatasetOptions dataset_options(const jmac::train::TrainConfig& c) {
  auto rng = jmac::named_stream(c.seed, "splits");
  return {c.seed_train_fraction, rng()};
}

std::string ablation_list(const jmac::train::TrainConfig& c) {
  const auto j = json::parse(jmac::train::config_to_json(c));
  std::string out;
  for (const auto& a : j["ablations"]) out += (out.empty() ? "" : ",") + a.get<std::string>();
  return out.empty() ? "none" : out;
}

struct CommonArgs {
  std::string config;
  std::string data;
  std::string out = ".";
  std::vector<std::string> ablations;
  std::optional<std::uint64_t> seed;
};

jmac::train::TrainConfig resolve_config(const CommonArgs& a) {
  if (a.config.empty()) throw jmac::train::ConfigError("--config is required");
  auto c = jmac::train::config_from_json(read_file(a.config));
  jmac::train::apply_env_overrides(c, [](const char* k) { return std::getenv(k); });
  for (const auto& name : a.ablations) jmac::train::set_ablation(c, name);
  if (a.seed) c.seed = *a.seed;
  return c;
}

std::string epoch_line(const jmac::train::EpochLog& e) {
  std::ostringstream ss;
  ss << e.epoch << '\t' << fixed(e.completion_loss) << '\t' << fixed(e.alignment_loss) << '\t' << e.budget
     << '\t' << e.transferred << '\t' << fixed(e.validation_mrr);
  return ss.str();
}

// Trains one config and writes checkpoint, metrics log and sidecars into `out`.
jmac::train::FitResult run_train(const jmac::train::TrainConfig& config, const fs::path& data,
                                 const fs::path& out, bool verbose) {
  fs::create_directories(out);
  const auto mkg = jmac::load_dataset(data, dataset_options(config));
  std::ofstream log(out / "metrics.log", std::ios::binary);
  log << "# ablations: " << ablation_list(config) << "\n";
  log << "# data:";
  for (const auto& kg : mkg.kgs) log << ' ' << kg.id() << ' ' << kg.entity_count() << '/' << kg.triples().size();
  log << " relations " << mkg.relations.size() << "\n";
  log << "# epoch\tL_c\tL_a\tq\ttransferred\tval_mrr\n";
  auto result = jmac::train::fit(mkg, config, [&](const jmac::train::EpochLog& e) {
    log << epoch_line(e) << '\n';
    log.flush();
    if (verbose) std::cerr << "epoch " << epoch_line(e) << '\n';
  });
  log << "# best_epoch\t" << result.best.epoch << "\t" << fixed(result.best.validation_mrr) << '\n';
  write_file(out / "checkpoint.bin", result.best.bytes);
  const auto& c = config;
  if (!c.ablations.no_align && !c.ablations.no_entr) {
    jmac::train::load_trainer(mkg, result.best.bytes).write_transfer_sidecars(out);
  }
  return result;
}

std::vector<jmac::train::TaskMetrics> run_eval(const fs::path& checkpoint, const fs::path& data,
                                               const std::string& task, const fs::path& out) {
  if (task != "kgc" && task != "kga" && task != "both")
    throw jmac::train::ConfigError("--task must be kgc, kga or both");
  const std::string bytes = read_file(checkpoint);
  const auto config = jmac::train::checkpoint_config(bytes);
  const auto mkg = jmac::load_dataset(data, dataset_options(config));
  const auto trainer = jmac::train::load_trainer(mkg, bytes);
  const bool kgc = task != "kga", kga = task != "kgc";
  auto results = trainer.evaluate_test(kgc, kga && !config.ablations.no_align);

  fs::create_directories(out);
  std::ofstream rows(out / "results.tsv", std::ios::binary);
  rows << "task\tscope\tmetric\tvalue\n";
  for (const std::string t : {"kgc", "kga"}) {
    double mrr = 0, h1 = 0, h10 = 0;
    std::size_t n = 0;
    for (const auto& r : results) {
      if (r.task != t) continue;
      rows << t << '\t' << r.scope << "\tMRR\t" << fixed(r.metrics.mrr) << '\n';
      rows << t << '\t' << r.scope << "\tHits@1\t" << fixed(r.metrics.hits.at(1)) << '\n';
      rows << t << '\t' << r.scope << "\tHits@10\t" << fixed(r.metrics.hits.at(10)) << '\n';
      mrr += r.metrics.mrr;
      h1 += r.metrics.hits.at(1);
      h10 += r.metrics.hits.at(10);
      ++n;
    }
    if (n == 0) continue;
    const double d = static_cast<double>(n);
    rows << t << "\tmean\tMRR\t" << fixed(mrr / d) << '\n';
    rows << t << "\tmean\tHits@1\t" << fixed(h1 / d) << '\n';
    rows << t << "\tmean\tHits@10\t" << fixed(h10 / d) << '\n';
  }

  if (kga && !config.ablations.no_align) {
    const auto finals = trainer.final_entities();
    for (const auto& t : trainer.data().alignments) {
      const auto a = jmac::alignment::build_alignment_matrix(finals, mkg, t.test.source_kg, t.test.target_kg);
      const auto& src = mkg.kgs[t.test.source_kg];
      const auto& tgt = mkg.kgs[t.test.target_kg];
      std::ofstream m(out / ("matching_" + src.id() + "_" + tgt.id() + ".tsv"), std::ios::binary);
      for (const auto& x : jmac::alignment::greedy_match(a.values))
        m << src.entities().label(x.row) << '\t' << tgt.entities().label(x.col) << '\t' << fixed(x.score) << '\n';
    }
  }
  return results;
}

void print_summary(const std::vector<jmac::train::TaskMetrics>& results) {
  std::cout << std::left << std::setw(6) << "task" << std::setw(24) << "scope" << std::right << std::setw(10)
            << "MRR" << std::setw(10) << "H@1" << std::setw(10) << "H@10" << std::setw(8) << "n" << '\n';
  for (const auto& r : results) {
    std::cout << std::left << std::setw(6) << r.task << std::setw(24) << r.scope << std::right << std::setw(10)
              << fixed(r.metrics.mrr, 4) << std::setw(10) << fixed(r.metrics.hits.at(1), 4) << std::setw(10)
              << fixed(r.metrics.hits.at(10), 4) << std::setw(8) << r.metrics.count << '\n';
  }
}

std::string module_tag(const std::exception& e) {
  if (dynamic_cast<const jmac::DataError*>(&e)) return "kgdata";
  if (dynamic_cast<const jmac::diff::DiffError*>(&e)) return "diff";
  if (dynamic_cast<const jmac::rgnn::ModelError*>(&e)) return "rgnn";
  if (dynamic_cast<const jmac::entr::EntrError*>(&e)) return "entr";
  if (dynamic_cast<const jmac::eval::EvalError*>(&e)) return "eval";
  if (dynamic_cast<const jmac::train::ConfigError*>(&e)) return "config";
  if (dynamic_cast<const jmac::train::TrainError*>(&e)) return "train";
  if (dynamic_cast<const jmac::synth::SynthError*>(&e)) return "synth";
  return "cli";
}

json default_grid() {
  return {{"layers", {1, 2, 3}},          {"dim", {128, 256, 512}}, {"lr_c", {1e-4, 5e-4, 1e-3}},
          {"lr_a", {1e-4, 5e-4, 1e-3}},   {"beta", {0.1, 0.2, 0.3}}, {"gamma_c", {0, 5, 10}},
          {"gamma_a", {0, 5, 10}}};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Joint multilingual knowledge graph completion and alignment"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonArgs common;
  std::string task = "both", checkpoint, grid_file;
  bool verbose = false;
  std::size_t max_runs = 0;
  jmac::synth::SynthSpec spec;

  auto* cfg = app.add_subcommand("config", "Print the default training config as JSON");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic KG pair");
  synth->add_option("--out", common.out, "Output data directory")->required();
  synth->add_option("--seed", spec.rng_seed, "Random seed");
  synth->add_option("--entities", spec.entity_count, "Entity count");
  synth->add_option("--relations", spec.relation_count, "Relation count");
  synth->add_option("--degree", spec.mean_degree, "Mean entity degree");
  synth->add_option("--missing", spec.missing_rate, "Probability of dropping a triple from KG");
  synth->add_option("--seed-fraction", spec.seed_fraction, "Fraction of entities given as alignment seeds");
  synth->add_option("--holdout", spec.holdout_fraction, "Fraction of triples held out for valid/test");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Config JSON file");
    sub->add_option("--data", common.data, "Data directory")->required();
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--ablation", common.ablations, "Ablation flag (repeatable)");
    sub->add_option("--seed", common.seed, "Override the config seed");
    sub->add_flag("--verbose", verbose, "Print one line per epoch");
  };
  auto* train = app.add_subcommand("train", "Train and keep the best-validation checkpoint");
  add_common(train);
  train->add_option("--task", task, "Evaluate after training: kgc, kga or both");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test splits");
  eval->add_option("--data", common.data, "Data directory")->required();
  eval->add_option("--out", common.out, "Output directory");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file (default <out>/checkpoint.bin)");
  eval->add_option("--task", task, "kgc, kga or both");

  auto* grid = app.add_subcommand("grid", "Train and evaluate every config of a search grid");
  add_common(grid);
  grid->add_option("--grid", grid_file, "JSON object mapping config keys to value lists");
  grid->add_option("--max-runs", max_runs, "Stop after this many configs (0 = all)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cfg->parsed()) {
      std::cout << jmac::train::config_to_json(jmac::train::TrainConfig{}) << '\n';
    } else if (synth->parsed()) {
      const auto g = jmac::synth::write_synthetic(spec, common.out);
      write_manifest(common.out, "synth", nullptr, {}, spec.rng_seed, args);
      std::cout << "base triples " << g.base.size() << ", KG triples " << g.kept_count() << ", seed pairs "
                << g.seed_pairs << '\n';
    } else if (train->parsed()) {
      const auto config = resolve_config(common);
      const auto result = run_train(config, common.data, common.out, verbose);
      write_manifest(common.out, "train", &config, common.data, config.seed, args);
      std::cout << "best epoch " << result.best.epoch << ", validation MRR " << fixed(result.best.validation_mrr)
                << '\n';
      if (train->count("--task") > 0) print_summary(run_eval(fs::path(common.out) / "checkpoint.bin", common.data, task, common.out));
    } else if (eval->parsed()) {
      const fs::path ckpt = checkpoint.empty() ? fs::path(common.out) / "checkpoint.bin" : fs::path(checkpoint);
      const auto results = run_eval(ckpt, common.data, task, common.out);
      const auto config = jmac::train::checkpoint_config(read_file(ckpt));
      write_manifest(common.out, "eval", &config, common.data, config.seed, args);
      print_summary(results);
    } else if (grid->parsed()) {
      const auto base = resolve_config(common);
      const json space = grid_file.empty() ? default_grid() : json::parse(read_file(grid_file));
      std::vector<std::pair<std::string, json>> axes(space.begin(), space.end());
      std::vector<std::size_t> idx(axes.size(), 0);
      std::vector<std::pair<double, std::string>> board;
      for (std::size_t run = 0;; ++run) {
        if (max_runs != 0 && run >= max_runs) break;
        json j = json::parse(jmac::train::config_to_json(base));
        for (std::size_t a = 0; a < axes.size(); ++a) j[axes[a].first] = axes[a].second.at(idx[a]);
        const auto config = jmac::train::config_from_json(j.dump());
        const fs::path dir = fs::path(common.out) / ("run_" + std::to_string(run));
        const auto result = run_train(config, common.data, dir, verbose);
        write_file(dir / "config.json", jmac::train::config_to_json(config) + "\n");
        run_eval(dir / "checkpoint.bin", common.data, task, dir);
        board.emplace_back(result.best.validation_mrr, dir.filename().string());
        std::size_t a = 0;
        for (; a < axes.size(); ++a) {
          if (++idx[a] < axes[a].second.size()) break;
          idx[a] = 0;
        }
        if (a == axes.size()) break;
      }
      std::stable_sort(board.begin(), board.end(), [](auto& x, auto& y) { return x.first > y.first; });
      std::ofstream lb(fs::path(common.out) / "leaderboard.tsv", std::ios::binary);
      lb << "run\tvalidation_mrr\n";
      for (const auto& [mrr, name] : board) lb << name << '\t' << fixed(mrr) << '\n';
      write_manifest(common.out, "grid", &base, common.data, base.seed, args);
      std::cout << "best " << (board.empty() ? "-" : board.front().second) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "jmac: [" << module_tag(e) << "] " << e.what() << '\n';
    return 1;
  }
  return 0;
}
