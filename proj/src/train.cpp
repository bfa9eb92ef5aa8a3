#include "jmac/train.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "jmac/completion.hpp"
#include "jmac/rng.hpp"

namespace jmac::train {

using diff::Matrix;
using diff::Tensor;

namespace {

constexpr char kMagic[8] = {'J', 'M', 'A', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_size(std::size_t v) { put<std::uint64_t>(v); }
  void put_string(std::string_view s) {
    put_size(s.size());
    out_.append(s);
  }
  void put_matrix(const Matrix& m) {
    put_size(m.rows());
    put_size(m.cols());
    for (double v : m.data()) put(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t get_size() { return static_cast<std::size_t>(get<std::uint64_t>()); }
  std::string get_string() {
    const std::size_t n = get_size();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  Matrix get_matrix() {
    const std::size_t r = get_size(), c = get_size();
    need(r * c * sizeof(double));
    Matrix m(r, c);
    for (double& v : m.data()) v = get<double>();
    return m;
  }
  void expect_end() const {
    if (pos_ != in_.size()) throw TrainError("checkpoint has trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw TrainError("checkpoint is truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw TrainError(std::string("non-finite ") + what);
}

std::vector<Tensor> concat(std::vector<Tensor> a, const std::vector<Tensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void write_adam(ByteWriter& w, const diff::Adam& opt) {
  w.put<std::int64_t>(opt.timestep());
  w.put_size(opt.states().size());
  for (const auto& s : opt.states()) {
    w.put_matrix(s.first_moment);
    w.put_matrix(s.second_moment);
  }
}

void read_adam(ByteReader& r, diff::Adam& opt) {
  opt.set_timestep(static_cast<long>(r.get<std::int64_t>()));
  if (r.get_size() != opt.states().size()) throw TrainError("checkpoint/data mismatch: optimizer state");
  for (auto& s : opt.states()) {
    Matrix m = r.get_matrix(), v = r.get_matrix();
    if (!m.same_shape(s.first_moment) || !v.same_shape(s.second_moment))
      throw TrainError("checkpoint/data mismatch: optimizer state shape");
    s.first_moment = std::move(m);
    s.second_moment = std::move(v);
  }
}

}  // namespace

std::vector<Tensor> Model::all_parameters() const {
  auto out = completion.parameters();
  out = concat(std::move(out), alignment.parameters());
  out = concat(std::move(out), fusion.parameters());
  return concat(std::move(out), heads.parameters());
}

Model make_model(const MultiKg& data, const TrainConfig& config) {
  auto rng = named_stream(config.seed, "init");
  Model m;
  m.completion = rgnn::make_encoder(data, config.layers, config.dim, rng);
  m.alignment = rgnn::make_encoder(data, config.layers, config.dim, rng);
  m.fusion = alignment::make_fusion(config.layers, config.dim, rng);
  m.heads = alignment::make_heads(config.layers, config.dim, rng);
  return m;
}

MultiKg prepare_data(MultiKg data, const TrainConfig& config) {
  if (!config.with_si) {
    data.initial_vectors.reset();
  } else if (!data.initial_vectors) {
    throw TrainError("si_mode 'with' requires a vectors.tsv file in the data directory");
  }
  return data;
}

std::uint64_t vocabulary_hash(const MultiKg& data) {
  std::uint64_t h = fnv1a("jmac-vocab");
  for (const auto& kg : data.kgs) {
    h = fnv1a(kg.id(), h);
    h = fnv1a("\x1f", h);
    for (const auto& l : kg.entities().labels()) {
      h = fnv1a(l, h);
      h = fnv1a("\x1e", h);
    }
  }
  for (const auto& l : data.relations.labels()) {
    h = fnv1a(l, h);
    h = fnv1a("\x1e", h);
  }
  return h;
}

Trainer::Trainer(MultiKg data, TrainConfig config)
    : data_(prepare_data(std::move(data), config)), config_(std::move(config)) {
  if (!config_.ablations.no_align) {
    if (data_.alignments.empty()) {
      throw TrainError("no alignment seed files found; use the no_align ablation for a single KG");
    }
    for (const auto& task : data_.alignments) {
      if (task.train.pairs.empty()) throw TrainError("an alignment task has no training seeds");
    }
  }
  model_ = make_model(data_, config_);
  opt_c_ = diff::Adam(model_.completion.parameters(), config_.lr_c);
  auto align_params = alignment_encoder().parameters();
  if (config_.sir_active()) align_params = concat(std::move(align_params), model_.fusion.parameters());
  align_params = concat(std::move(align_params), model_.heads.parameters());
  opt_a_ = diff::Adam(std::move(align_params), config_.lr_a);
  graph_ = rgnn::GraphIndex::build(data_);
  negative_rng_ = named_stream(config_.seed, "negatives");
  transfer_epoch_.resize(data_.kgs.size());
  entropy_.assign(data_.alignments.size(), {});
  if (!config_.ablations.no_align) {
    const Matrix finals = final_entities();
    for (std::size_t t = 0; t < data_.alignments.size(); ++t) {
      const auto& task = data_.alignments[t];
      const auto a = alignment::build_alignment_matrix(finals, data_, task.train.source_kg,
                                                       task.train.target_kg);
      const double h = entr::matrix_entropy(a.values);
      entropy_[t] = {h, h};
    }
  }
}

const rgnn::EncoderParams& Trainer::alignment_encoder() const {
  return config_.ablations.one_gnn ? model_.completion : model_.alignment;
}

rgnn::EncoderOptions Trainer::encoder_options() const {
  return {.relation_aware = !config_.ablations.no_ra_gnn};
}

rgnn::LayerEmbeddings Trainer::completion_layers() const {
  return rgnn::detach(rgnn::encode(graph_, model_.completion, encoder_options()));
}

rgnn::LayerEmbeddings Trainer::alignment_layers() const {
  if (config_.sir_active()) {
    const auto comp = completion_layers();
    return rgnn::detach(rgnn::encode(graph_, alignment_encoder(), encoder_options(),
                                     alignment::make_sir_hook(comp, model_.fusion)));
  }
  return rgnn::detach(rgnn::encode(graph_, alignment_encoder(), encoder_options()));
}

Matrix Trainer::final_entities() const {
  return alignment::final_embeddings(alignment_layers(), model_.heads).entities.value();
}

double Trainer::completion_step() {
  const auto layers = rgnn::encode(graph_, model_.completion, encoder_options());
  const auto offsets = data_.entity_offsets();
  completion::TripleRows pos, neg;
  for (std::size_t k = 0; k < data_.kgs.size(); ++k) {
    const Kg& kg = data_.kgs[k];
    std::vector<Triple> positives = kg.triples();
    if (config_.transferred_positives)
      positives.insert(positives.end(), kg.transferred().begin(), kg.transferred().end());
    if (positives.empty()) continue;
    const auto batch = completion::sample_negatives(positives, kg, config_.negatives, negative_rng_);
    for (std::size_t i = 0; i < batch.positives.size(); ++i) {
      for (std::size_t j = 0; j < batch.per_positive; ++j) {
        pos.push(batch.positives[i], offsets[k]);
        neg.push(batch.negatives[i * batch.per_positive + j], offsets[k]);
      }
    }
  }
  std::vector<std::size_t> src, tgt;
  for (const auto& task : data_.alignments) {
    for (const auto& p : task.train.pairs) {
      src.push_back(offsets[task.train.source_kg] + p.source.index());
      tgt.push_back(offsets[task.train.target_kg] + p.target.index());
    }
  }
  Tensor loss;
  if (pos.size() > 0) loss = completion::ranking_loss(pos, neg, config_.gamma_c, layers);
  if (!src.empty()) {
    Tensor constraint = completion::alignment_constraint_loss(src, tgt, layers);
    loss = loss.defined() ? completion::completion_loss(loss, constraint) : constraint;
  }
  if (!loss.defined()) return 0.0;
  check_finite(loss.item(), "completion loss");
  diff::backward(loss);
  opt_c_.step();
  opt_c_.zero_grad();
  return loss.item();
}

double Trainer::alignment_step() {
  rgnn::LayerEmbeddings comp;
  rgnn::FusionHook hook;
  if (config_.sir_active()) {
    comp = completion_layers();
    hook = alignment::make_sir_hook(comp, model_.fusion);
  }
  const auto layers = rgnn::encode(graph_, alignment_encoder(), encoder_options(), hook);
  const auto finals = alignment::final_embeddings(layers, model_.heads);
  const auto offsets = data_.entity_offsets();
  std::vector<std::size_t> ps, pt, ns, nt, np;
  for (const auto& task : data_.alignments) {
    const std::size_t a = task.train.source_kg, b = task.train.target_kg;
    if (task.train.pairs.empty()) continue;
    const Matrix src = alignment::take_rows(finals.entities.value(), offsets[a], data_.kgs[a].entity_count());
    const Matrix tgt = alignment::take_rows(finals.entities.value(), offsets[b], data_.kgs[b].entity_count());
    const auto negs = alignment::nearest_negatives(task.train.pairs, src, tgt, config_.align_negatives);
    const std::size_t base = ps.size();
    for (const auto& p : task.train.pairs) {
      ps.push_back(offsets[a] + p.source.index());
      pt.push_back(offsets[b] + p.target.index());
    }
    for (const auto& n : negs) {
      ns.push_back(offsets[a] + n.source.index());
      nt.push_back(offsets[b] + n.target.index());
      np.push_back(base + n.positive);
    }
  }
  if (ns.empty()) return 0.0;
  Tensor loss = alignment::alignment_loss(ps, pt, ns, nt, np, config_.gamma_a, finals.entities);
  check_finite(loss.item(), "alignment loss");
  diff::backward(loss);
  opt_a_.step();
  opt_a_.zero_grad();
  return loss.item();
}

void Trainer::run_entr(EpochLog& log) {
  const Matrix finals = final_entities();
  for (std::size_t t = 0; t < data_.alignments.size(); ++t) {
    auto& task = data_.alignments[t];
    const auto a = alignment::build_alignment_matrix(finals, data_, task.train.source_kg,
                                                     task.train.target_kg);
    entropy_[t].h_current = entr::matrix_entropy(a.values);
    const std::size_t q = entr::seed_budget(entropy_[t].h_tilde, entropy_[t].h_current, config_.beta,
                                            a.values.rows(), a.values.cols());
    log.budget += q;
    task.train = entr::enlarge_seeds(a.values, q, task.train);
    log.newly_transferred += entr::transfer_triples(task.train, data_);
  }
  graph_ = rgnn::GraphIndex::build(data_);
  update_transfer_epochs();
}

void Trainer::update_transfer_epochs() {
  for (std::size_t k = 0; k < data_.kgs.size(); ++k) {
    std::unordered_map<std::uint64_t, std::size_t> next;
    for (const auto& t : data_.kgs[k].transferred()) {
      const auto key = triple_key(t);
      auto it = transfer_epoch_[k].find(key);
      next.emplace(key, it == transfer_epoch_[k].end() ? epoch_ + 1 : it->second);
    }
    transfer_epoch_[k] = std::move(next);
  }
}

EpochLog Trainer::train_epoch() {
  EpochLog log;
  log.epoch = epoch_ + 1;
  for (std::size_t s = 0; s < config_.steps_per_epoch; ++s) {
    if (!config_.ablations.no_comple) log.completion_loss = completion_step();
    if (!config_.ablations.no_align) log.alignment_loss = alignment_step();
  }
  if (!config_.ablations.no_align && !config_.ablations.no_entr &&
      (epoch_ + 1) % config_.entr_period == 0) {
    run_entr(log);
  }
  ++epoch_;
  for (const auto& kg : data_.kgs) log.transferred += kg.transferred().size();
  log.validation_mrr = has_validation() ? validation_mrr() : 0.0;
  last_val_mrr_ = log.validation_mrr;
  return log;
}

bool Trainer::has_validation() const {
  for (const auto& s : data_.splits)
    if (!s.valid.empty()) return true;
  return false;
}

double Trainer::validation_mrr() const {
  const auto layers = completion_layers();
  double total = 0.0;
  std::size_t n = 0;
  const std::size_t ks[] = {1};
  for (std::size_t k = 0; k < data_.kgs.size(); ++k) {
    const auto& valid = data_.splits[k].valid;
    if (valid.empty()) continue;
    const auto ranks = eval::evaluate_kgc(data_, k, valid, layers);
    total += eval::aggregate(ranks, ks).mrr;
    ++n;
  }
  if (n == 0) throw TrainError("empty validation split");
  return total / static_cast<double>(n);
}

std::vector<TaskMetrics> Trainer::evaluate_test(bool kgc, bool kga) const {
  std::vector<TaskMetrics> out;
  const std::size_t ks[] = {1, 10};
  if (kgc) {
    const auto layers = completion_layers();
    for (std::size_t k = 0; k < data_.kgs.size(); ++k) {
      const auto& test = data_.splits[k].test;
      if (test.empty()) continue;
      out.push_back({"kgc", data_.kgs[k].id(), eval::aggregate(eval::evaluate_kgc(data_, k, test, layers), ks)});
    }
  }
  if (kga) {
    const Matrix finals = final_entities();
    for (const auto& task : data_.alignments) {
      if (task.test.pairs.empty()) continue;
      const std::string scope =
          data_.kgs[task.test.source_kg].id() + "_" + data_.kgs[task.test.target_kg].id();
      out.push_back({"kga", scope, eval::aggregate(eval::evaluate_kga(data_, task.test, finals), ks)});
    }
  }
  return out;
}

std::string Trainer::checkpoint_bytes() const {
  ByteWriter w;
  for (char c : kMagic) w.put(c);
  w.put(kVersion);
  w.put_string(config_to_json(config_));
  w.put<std::uint64_t>(vocabulary_hash(data_));
  w.put_size(epoch_);
  w.put(last_val_mrr_);
  const auto params = model_.all_parameters();
  w.put_size(params.size());
  for (const auto& p : params) w.put_matrix(p.value());
  write_adam(w, opt_c_);
  write_adam(w, opt_a_);
  w.put_size(entropy_.size());
  for (const auto& e : entropy_) {
    w.put(e.h_tilde);
    w.put(e.h_current);
  }
  w.put_size(data_.alignments.size());
  for (const auto& task : data_.alignments) {
    w.put_size(task.train.pairs.size());
    for (const auto& p : task.train.pairs) {
      w.put(p.source.value);
      w.put(p.target.value);
      w.put(static_cast<std::uint8_t>(p.provenance));
    }
  }
  w.put_size(data_.kgs.size());
  for (std::size_t k = 0; k < data_.kgs.size(); ++k) {
    const auto& groups = data_.kgs[k].transferred_groups();
    w.put_size(groups.size());
    for (const auto& [src, triples] : groups) {
      w.put_size(src);
      w.put_size(triples.size());
      for (const auto& t : triples) {
        w.put(t.head.value);
        w.put(t.relation.value);
        w.put(t.tail.value);
        w.put_size(transfer_epoch_[k].at(triple_key(t)));
      }
    }
  }
  std::ostringstream rng;
  rng << negative_rng_;
  w.put_string(rng.str());
  return w.take();
}

namespace {

TrainConfig read_header(ByteReader& r) {
  for (char c : kMagic)
    if (r.get<char>() != c) throw TrainError("not a checkpoint file");
  if (r.get<std::uint32_t>() != kVersion) throw TrainError("unsupported checkpoint version");
  return config_from_json(r.get_string());
}

}  // namespace

TrainConfig checkpoint_config(std::string_view bytes) {
  ByteReader r(bytes);
  return read_header(r);
}

void Trainer::restore(std::string_view bytes) {
  ByteReader r(bytes);
  if (!(read_header(r) == config_)) throw TrainError("checkpoint/data mismatch: config differs");
  if (r.get<std::uint64_t>() != vocabulary_hash(data_)) throw TrainError("checkpoint/data mismatch");
  epoch_ = r.get_size();
  last_val_mrr_ = r.get<double>();
  auto params = model_.all_parameters();
  if (r.get_size() != params.size()) throw TrainError("checkpoint/data mismatch: parameter count");
  for (auto& p : params) {
    Matrix m = r.get_matrix();
    if (!m.same_shape(p.value())) throw TrainError("checkpoint/data mismatch: parameter shape");
    p.mutable_value() = std::move(m);
    p.zero_grad();
  }
  read_adam(r, opt_c_);
  read_adam(r, opt_a_);
  if (r.get_size() != entropy_.size()) throw TrainError("checkpoint/data mismatch: entropy state");
  for (auto& e : entropy_) {
    e.h_tilde = r.get<double>();
    e.h_current = r.get<double>();
  }
  if (r.get_size() != data_.alignments.size()) throw TrainError("checkpoint/data mismatch: seed sets");
  for (auto& task : data_.alignments) {
    const std::size_t n = r.get_size();
    task.train.pairs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      SeedPair p;
      p.source = EntityId{r.get<std::uint32_t>()};
      p.target = EntityId{r.get<std::uint32_t>()};
      p.provenance = static_cast<SeedProvenance>(r.get<std::uint8_t>());
      task.train.pairs.push_back(p);
    }
  }
  if (r.get_size() != data_.kgs.size()) throw TrainError("checkpoint/data mismatch: KG count");
  for (std::size_t k = 0; k < data_.kgs.size(); ++k) {
    Kg& kg = data_.kgs[k];
    std::vector<std::size_t> old;
    for (const auto& [src, _] : kg.transferred_groups()) old.push_back(src);
    for (auto src : old) kg.set_transferred_from(src, {});
    transfer_epoch_[k].clear();
    const std::size_t groups = r.get_size();
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t src = r.get_size();
      const std::size_t n = r.get_size();
      std::vector<Triple> triples;
      for (std::size_t i = 0; i < n; ++i) {
        Triple t;
        t.head = EntityId{r.get<std::uint32_t>()};
        t.relation = RelationId{r.get<std::uint32_t>()};
        t.tail = EntityId{r.get<std::uint32_t>()};
        t.origin = TripleOrigin::kTransferred;
        transfer_epoch_[k][triple_key(t)] = r.get_size();
        triples.push_back(t);
      }
      kg.set_transferred_from(src, std::move(triples));
    }
  }
  std::istringstream rng(r.get_string());
  rng >> negative_rng_;
  r.expect_end();
  graph_ = rgnn::GraphIndex::build(data_);
}

void Trainer::write_transfer_sidecars(const std::filesystem::path& dir) const {
  for (std::size_t k = 0; k < data_.kgs.size(); ++k) {
    const Kg& kg = data_.kgs[k];
    std::ofstream out(dir / ("transferred_" + kg.id() + ".tsv"), std::ios::binary);
    if (!out) throw TrainError("cannot write transfer sidecar for KG " + kg.id());
    for (const auto& t : kg.transferred()) {
      out << kg.entities().label(t.head.value) << '\t' << data_.relations.label(t.relation.value)
          << '\t' << kg.entities().label(t.tail.value) << '\t'
          << transfer_epoch_[k].at(triple_key(t)) << '\n';
    }
  }
}

Trainer load_trainer(const MultiKg& data, std::string_view checkpoint) {
  Trainer t(data, checkpoint_config(checkpoint));
  t.restore(checkpoint);
  return t;
}

FitResult fit(const MultiKg& data, const TrainConfig& config,
              const std::function<void(const EpochLog&)>& on_epoch) {
  Trainer trainer(data, config);
  const bool select_last = config.ablations.no_comple;
  if (!trainer.has_validation() && !select_last) throw TrainError("empty validation split");
  FitResult result;
  EpochLog initial;
  initial.validation_mrr = trainer.has_validation() ? trainer.validation_mrr() : 0.0;
  trainer.set_last_validation_mrr(initial.validation_mrr);
  result.log.push_back(initial);
  if (on_epoch) on_epoch(initial);
  result.best = {trainer.checkpoint_bytes(), 0, initial.validation_mrr};
  for (std::size_t e = 0; e < config.epochs; ++e) {
    EpochLog log = trainer.train_epoch();
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (select_last || log.validation_mrr > result.best.validation_mrr) {
      result.best = {trainer.checkpoint_bytes(), log.epoch, log.validation_mrr};
    }
  }
  return result;
}

}  // namespace jmac::train
