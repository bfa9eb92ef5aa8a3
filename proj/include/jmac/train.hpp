// Alternating two-optimizer training with per-epoch seed enlargement and
// triple transfer, binary checkpoints, and validation-MRR model selection.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "jmac/alignment.hpp"
#include "jmac/diff.hpp"
#include "jmac/entr.hpp"
#include "jmac/eval.hpp"
#include "jmac/kgdata.hpp"
#include "jmac/rgnn.hpp"

namespace jmac::train {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Ablations {
  bool no_ra_gnn = false;
  bool one_gnn = false;
  bool no_sir = false;
  bool no_entr = false;
  bool no_align = false;
  bool no_comple = false;
  bool operator==(const Ablations&) const = default;
};

struct TrainConfig {
  std::size_t layers = 2;
  std::size_t dim = 128;
  double lr_c = 1e-3;
  double lr_a = 1e-3;
  double beta = 0.2;
  double gamma_c = 5.0;
  double gamma_a = 5.0;
  std::size_t epochs = 30;
  std::size_t negatives = 5;        // corrupted triples per positive
  std::size_t align_negatives = 5;  // nearest entities per side of a seed pair
  bool with_si = false;
  Ablations ablations;
  std::uint64_t seed = 0;
  double seed_train_fraction = 0.5;
  std::size_t steps_per_epoch = 1;
  std::size_t entr_period = 1;
  bool transferred_positives = true;

  bool sir_active() const {
    return !ablations.no_sir && !ablations.one_gnn && !ablations.no_comple && !ablations.no_align;
  }
  bool operator==(const TrainConfig&) const = default;
};

// Every key is required; a missing key raises ConfigError naming it.
TrainConfig config_from_json(std::string_view text);
std::string config_to_json(const TrainConfig& config);
// JMAC_<KEY> environment variables override keys of a parsed config.
void apply_env_overrides(TrainConfig& config, const std::function<const char*(const char*)>& getenv);
// Accepts no_ra_gnn, one_gnn, no_sir, no_entr, no_align, no_comple.
void set_ablation(TrainConfig& config, std::string_view name);
std::vector<std::string> config_keys();

struct Model {
  rgnn::EncoderParams completion;
  rgnn::EncoderParams alignment;
  alignment::FusionParams fusion;
  alignment::HeadParams heads;

  // Every tensor, in a fixed order used by checkpoints.
  std::vector<diff::Tensor> all_parameters() const;
};

Model make_model(const MultiKg& data, const TrainConfig& config);

struct EpochLog {
  std::size_t epoch = 0;
  double completion_loss = 0.0;
  double alignment_loss = 0.0;
  std::size_t budget = 0;       // q summed over KG pairs
  std::size_t transferred = 0;  // transferred triples currently in all KGs
  std::size_t newly_transferred = 0;
  double validation_mrr = 0.0;
};

struct TaskMetrics {
  std::string task;   // "kgc" or "kga"
  std::string scope;  // KG id or "src_tgt"
  eval::Metrics metrics;
};

class Trainer {
 public:
  Trainer(MultiKg data, TrainConfig config);

  // One epoch: completion step, alignment step, then seed enlargement and transfer.
  EpochLog train_epoch();

  double completion_step();
  double alignment_step();
  void run_entr(EpochLog& log);

  // Mean completion MRR over KGs with a non-empty validation split.
  double validation_mrr() const;
  bool has_validation() const;

  rgnn::LayerEmbeddings completion_layers() const;
  rgnn::LayerEmbeddings alignment_layers() const;
  diff::Matrix final_entities() const;

  std::vector<TaskMetrics> evaluate_test(bool kgc, bool kga) const;

  std::string checkpoint_bytes() const;
  void restore(std::string_view bytes);

  void write_transfer_sidecars(const std::filesystem::path& dir) const;

  const MultiKg& data() const { return data_; }
  const TrainConfig& config() const { return config_; }
  const Model& model() const { return model_; }
  const diff::Adam& completion_optimizer() const { return opt_c_; }
  const diff::Adam& alignment_optimizer() const { return opt_a_; }
  const std::vector<entr::EntropyState>& entropy() const { return entropy_; }
  std::size_t epoch() const { return epoch_; }
  double last_validation_mrr() const { return last_val_mrr_; }
  void set_last_validation_mrr(double v) { last_val_mrr_ = v; }

 private:
  const rgnn::EncoderParams& alignment_encoder() const;
  rgnn::EncoderOptions encoder_options() const;
  void update_transfer_epochs();

  MultiKg data_;
  TrainConfig config_;
  Model model_;
  diff::Adam opt_c_;
  diff::Adam opt_a_;
  rgnn::GraphIndex graph_;
  std::vector<entr::EntropyState> entropy_;
  std::vector<std::unordered_map<std::uint64_t, std::size_t>> transfer_epoch_;
  std::mt19937_64 negative_rng_;
  std::size_t epoch_ = 0;
  double last_val_mrr_ = 0.0;
};

// Hash of KG ids, entity labels and relation labels.
std::uint64_t vocabulary_hash(const MultiKg& data);

struct Checkpoint {
  std::string bytes;
  std::size_t epoch = 0;
  double validation_mrr = 0.0;
};

// Reads the config stored in a checkpoint.
TrainConfig checkpoint_config(std::string_view bytes);

struct FitResult {
  Checkpoint best;
  std::vector<EpochLog> log;  // entry 0 is the untrained model
};

// Runs config.epochs epochs and keeps the checkpoint with the best validation
// MRR (earliest on ties). With no completion training the last epoch wins.
FitResult fit(const MultiKg& data, const TrainConfig& config,
              const std::function<void(const EpochLog&)>& on_epoch = {});

// Restores a trainer from checkpoint bytes against freshly loaded data.
Trainer load_trainer(const MultiKg& data, std::string_view checkpoint);

// Applies with_si: strips initial vectors when false, requires them when true.
MultiKg prepare_data(MultiKg data, const TrainConfig& config);

}  // namespace jmac::train
