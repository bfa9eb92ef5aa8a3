// Acceptance runner: one PASS / FAIL / SKIP line per criterion.
//   acceptance [--only N]... [--strict]
// Without --strict the exit status is nonzero only when a criterion could not
// be evaluated (an exception escaped it).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fixtures.hpp"
#include "grad_cases.hpp"
#include "jmac/alignment.hpp"
#include "jmac/completion.hpp"
#include "jmac/entr.hpp"
#include "jmac/eval.hpp"
#include "jmac/rgnn.hpp"
#include "jmac/synth.hpp"
#include "jmac/train.hpp"

using namespace jmac;
using diff::Matrix;
using diff::Tensor;
using jmac::testing::random_matrix;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status = Status::kFail;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- 1

struct KgCounts {
  std::size_t entities, relations, triples;
};

Outcome dataset_ingestion() {
  const char* root = std::getenv("JMAC_DBP5L_DIR");
  if (root == nullptr || !std::filesystem::is_directory(root))
    return {Status::kSkip, "JMAC_DBP5L_DIR not set or not a directory"};
  const std::map<std::string, KgCounts> expected = {{"el", {5231, 111, 13839}},
                                                    {"ja", {11805, 128, 28744}},
                                                    {"fr", {12382, 144, 54066}},
                                                    {"es", {13176, 178, 49015}},
                                                    {"en", {13996, 831, 80167}}};
  const auto t0 = std::chrono::steady_clock::now();
  const std::filesystem::path dir(root);
  std::string detail;
  bool ok = true;
  for (const auto& [lang, want] : expected) {
    std::string text;
    const auto full = dir / ("triples_" + lang + ".tsv");
    if (std::filesystem::exists(full)) {
      std::ifstream in(full);
      text.assign(std::istreambuf_iterator<char>(in), {});
    } else {
      for (const std::string part : {"train", "valid", "test"}) {
        std::ifstream in(dir / ("kgc_" + part + "_" + lang + ".tsv"));
        if (!in) continue;
        text.append(std::istreambuf_iterator<char>(in), {});
        text += "\n";
      }
    }
    if (text.empty()) return {Status::kFail, "no triple files for " + lang};
    Vocabulary relations;
    const auto parsed = parse_triples_text(text, lang, relations);
    const KgCounts got{parsed.kg.entity_count(), relations.size(), parsed.kg.triples().size()};
    detail += lang + " " + std::to_string(got.entities) + "/" + std::to_string(got.relations) + "/" +
              std::to_string(got.triples) + " ";
    ok = ok && got.entities == want.entities && got.relations == want.relations && got.triples == want.triples;
  }
  const double t = seconds_since(t0);
  ok = ok && t < 30.0;
  return {ok ? Status::kPass : Status::kFail, detail + "(" + fmt(t, 1) + " s)"};
}

// ---------------------------------------------------------------- 2

// Smallest distance to a kink of the completion loss: any L1 coordinate of
// h + r - t, or any per-layer hinge argument.
double kink_margin(const rgnn::LayerEmbeddings& l, const completion::TripleRows& pos,
                   const completion::TripleRows& neg, double gamma) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < l.depth(); ++k) {
    const auto& e = l.entities[k].value();
    const auto& r = l.relations[k].value();
    auto layer_score = [&](const completion::TripleRows& rows, std::size_t i) {
      double s = 0;
      for (std::size_t c = 0; c < e.cols(); ++c) {
        const double v = e(rows.head[i], c) + r(rows.relation[i], c) - e(rows.tail[i], c);
        margin = std::min(margin, std::abs(v));
        s -= std::abs(v);
      }
      return s;
    };
    for (std::size_t i = 0; i < pos.size(); ++i)
      margin = std::min(margin, std::abs(gamma - layer_score(pos, i) + layer_score(neg, i)));
  }
  return margin;
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double worst_op = 0.0;
  std::string worst_name;
  for (const auto& op : jmac::testing::op_cases()) {
    const double e = jmac::testing::worst_op_error(op, rng, 20);
    if (e > worst_op) worst_op = e, worst_name = op.first;
  }

  auto m = jmac::testing::build_multikg(
      {{"a", "p\tr\tq\nq\ts\tu\nu\tr\tv\nv\ts\tp\np\tr\tu\n"}, {"b", "P\tr\tQ\nQ\ts\tU\nU\tr\tV\nV\ts\tP\nQ\tr\tV\n"}});
  const auto graph = rgnn::GraphIndex::build(m);
  const auto offsets = m.entity_offsets();
  completion::TripleRows pos, neg;
  for (std::size_t k = 0; k < 2; ++k) {
    std::mt19937_64 nrng(k);
    const auto batch = completion::sample_negatives(m.kgs[k].triples(), m.kgs[k], 1, nrng);
    for (std::size_t i = 0; i < batch.positives.size(); ++i) {
      pos.push(batch.positives[i], offsets[k]);
      neg.push(batch.negatives[i], offsets[k]);
    }
  }
  const std::vector<std::size_t> src{0, 1, 2}, tgt{4, 5, 6};
  const std::vector<std::size_t> ns{0, 0, 1, 3}, nt{5, 7, 4, 6}, np{0, 0, 1, 2};

  double worst_model = 0.0;
  std::string worst_part;
  const std::size_t dim = 4, layers = 2;
  int redrawn = 0;
  for (int instance = 0, draw = 0; instance < 20; ++draw) {
    std::mt19937_64 init(100 + draw);
    auto comp = rgnn::make_encoder(m, layers, dim, init);
    auto align = rgnn::make_encoder(m, layers, dim, init);
    auto fusion = alignment::make_fusion(layers, dim, init);
    auto heads = alignment::make_heads(layers, dim, init);
    // Redraw instances within 1e-3 of an L1 or hinge kink.
    if (kink_margin(rgnn::encode(graph, comp, {}), pos, neg, 5.0) < 1e-3) {
      ++redrawn;
      continue;
    }
    ++instance;

    auto completion_loss = [&](const rgnn::EncoderParams& p) {
      const auto l = rgnn::encode(graph, p, {});
      return completion::completion_loss(completion::ranking_loss(pos, neg, 5.0, l),
                                         completion::alignment_constraint_loss(src, tgt, l));
    };
    auto alignment_loss = [&](const rgnn::EncoderParams& p, const alignment::FusionParams& f,
                              const alignment::HeadParams& h) {
      const auto c = rgnn::detach(rgnn::encode(graph, comp, {}));
      const auto l = rgnn::encode(graph, p, {}, alignment::make_sir_hook(c, f));
      return alignment::alignment_loss(src, tgt, ns, nt, np, 0.5, alignment::final_embeddings(l, h).entities);
    };
    std::vector<std::pair<std::string, double>> errs;
    auto check = [&](const std::string& name, const Matrix& at, const std::function<Tensor(const Tensor&)>& fn) {
      errs.emplace_back(name, diff::grad_check(fn, at, 1e-5));
    };
    check("completion/entity_table", comp.entity_table.value(), [&](const Tensor& x) {
      auto p = comp;
      p.entity_table = x;
      return completion_loss(p);
    });
    check("completion/relation_table", comp.relation_table.value(), [&](const Tensor& x) {
      auto p = comp;
      p.relation_table = x;
      return completion_loss(p);
    });
    for (std::size_t k = 0; k < layers; ++k) {
      const std::string tag = "/layer" + std::to_string(k);
      check("completion/composition" + tag, comp.blocks[k].composition.layers()[0].weight.value(), [&](const Tensor& x) {
        auto p = comp;
        p.blocks[k].composition.layers()[0].weight = x;
        return completion_loss(p);
      });
      check("completion/attention" + tag, comp.blocks[k].attention.layers()[0].weight.value(), [&](const Tensor& x) {
        auto p = comp;
        p.blocks[k].attention.layers()[0].weight = x;
        return completion_loss(p);
      });
      check("completion/update" + tag, comp.blocks[k].update.layers()[0].weight.value(), [&](const Tensor& x) {
        auto p = comp;
        p.blocks[k].update.layers()[0].weight = x;
        return completion_loss(p);
      });
      check("completion/relation" + tag, comp.blocks[k].relation.layers()[0].weight.value(), [&](const Tensor& x) {
        auto p = comp;
        p.blocks[k].relation.layers()[0].weight = x;
        return completion_loss(p);
      });
    }
    check("alignment/entity_table", align.entity_table.value(), [&](const Tensor& x) {
      auto p = align;
      p.entity_table = x;
      return alignment_loss(p, fusion, heads);
    });
    check("alignment/update", align.blocks[1].update.layers()[0].weight.value(), [&](const Tensor& x) {
      auto p = align;
      p.blocks[1].update.layers()[0].weight = x;
      return alignment_loss(p, fusion, heads);
    });
    check("alignment/fusion", fusion.entity[1].layers()[0].weight.value(), [&](const Tensor& x) {
      auto f = fusion;
      f.entity[1].layers()[0].weight = x;
      return alignment_loss(align, f, heads);
    });
    check("alignment/head", heads.entity.layers()[0].weight.value(), [&](const Tensor& x) {
      auto h = heads;
      h.entity.layers()[0].weight = x;
      return alignment_loss(align, fusion, h);
    });
    for (const auto& [name, e] : errs)
      if (e > worst_model) worst_model = e, worst_part = name;
  }
  const double t = seconds_since(t0);
  const bool ok = worst_op < 1e-4 && worst_model < 1e-4 && t < 60.0;
  return {ok ? Status::kPass : Status::kFail,
          "worst op error " + fmt(worst_op * 1e6, 3) + "e-6 (" + worst_name + "), worst model error " +
              fmt(worst_model * 1e6, 3) + "e-6 (" + worst_part + "), " + std::to_string(redrawn) +
              " instances redrawn near a kink, " + fmt(t, 1) + " s"};
}

// ---------------------------------------------------------------- 3

std::size_t brute_kgc(std::uint32_t head, std::uint32_t relation, std::uint32_t tail, const std::vector<double>& scores,
                      const std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>>& known) {
  std::vector<std::pair<double, std::uint32_t>> cands;
  for (std::uint32_t c = 0; c < scores.size(); ++c)
    if (c == tail || !known.count({head, relation, c})) cands.emplace_back(scores[c], c);
  std::sort(cands.begin(), cands.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second != tail && b.second == tail;
  });
  for (std::size_t i = 0; i < cands.size(); ++i)
    if (cands[i].second == tail) return i + 1;
  return 0;
}

std::size_t brute_kga(const std::vector<double>& u, const Matrix& targets, std::size_t truth) {
  auto cosine = [&](std::size_t j) {
    double dot = 0, nu = 0, nv = 0;
    for (std::size_t c = 0; c < u.size(); ++c) {
      dot += u[c] * targets(j, c);
      nu += u[c] * u[c];
      nv += targets(j, c) * targets(j, c);
    }
    return dot / std::sqrt(nu * nv);
  };
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t j = 0; j < targets.rows(); ++j) all.emplace_back(cosine(j), j);
  std::sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second != truth && b.second == truth;
  });
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i].second == truth) return i + 1;
  return 0;
}

Outcome ranking_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(33);
  std::size_t kgc_mismatch = 0, kga_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::uint32_t n = 2 + static_cast<std::uint32_t>(rng() % 11);
    const std::uint32_t rels = 1 + static_cast<std::uint32_t>(rng() % 3);
    // Random KG with embeddings; ranks come from the library's own TransE scorer.
    std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> known;
    eval::FilterIndex index;
    const std::size_t count = 1 + rng() % (2 * n);
    std::vector<Triple> triples;
    for (std::size_t i = 0; i < count; ++i) {
      Triple t{EntityId{static_cast<std::uint32_t>(rng() % n)}, RelationId{static_cast<std::uint32_t>(rng() % rels)},
               EntityId{static_cast<std::uint32_t>(rng() % n)}};
      if (known.insert({t.head.value, t.relation.value, t.tail.value}).second) triples.push_back(t);
      index.add(t);
    }
    rgnn::LayerEmbeddings layers;
    Matrix ents(n, 3);
    for (double& x : ents.data()) x = static_cast<double>(static_cast<int>(rng() % 3) - 1);  // coarse: ties are common
    layers.entities.push_back(Tensor::constant(ents));
    layers.relations.push_back(Tensor::constant(random_matrix(rels, 3, rng)));
    for (const auto& t : triples) {
      const auto scores = eval::tail_scores(t, 0, n, layers);
      std::vector<double> oracle_scores(n);
      for (std::uint32_t c = 0; c < n; ++c) oracle_scores[c] = completion::score(t.head.index(), t.relation.index(), c, layers);
      const auto got = eval::kgc_rank(t, scores, index);
      if (got.rank != brute_kgc(t.head.value, t.relation.value, t.tail.value, oracle_scores, known)) ++kgc_mismatch;
    }

    Matrix targets(n, 3);
    for (double& x : targets.data()) x = static_cast<double>(static_cast<int>(rng() % 5) - 2);
    for (std::size_t j = 0; j < n; ++j)
      if (targets(j, 0) == 0 && targets(j, 1) == 0 && targets(j, 2) == 0) targets(j, 0) = 1;
    for (std::size_t truth = 0; truth < n; ++truth) {
      std::vector<double> u(targets.row_span(truth).begin(), targets.row_span(truth).end());
      for (double& x : u) x += static_cast<double>(static_cast<int>(rng() % 3) - 1);
      if (u[0] == 0 && u[1] == 0 && u[2] == 0) u[2] = 1;
      if (eval::kga_rank(u, targets, truth).rank != brute_kga(u, targets, truth)) ++kga_mismatch;
    }
  }
  const double t = seconds_since(t0);
  const bool ok = kgc_mismatch == 0 && kga_mismatch == 0 && t < 60.0;
  return {ok ? Status::kPass : Status::kFail, std::to_string(kgc_mismatch) + " kgc and " + std::to_string(kga_mismatch) +
                                                  " kga mismatches over 100 random KGs, " + fmt(t, 2) + " s"};
}

// ---------------------------------------------------------------- 4

Outcome budget_examples() {
  const std::size_t a = entr::seed_budget(3.0, 3.0, 0.2, 100, 100);
  const std::size_t b = entr::seed_budget(3.0, 0.0, 0.2, 100, 100);
  const std::size_t c = entr::seed_budget(10.0, 5.0, 0.2, 100, 100);
  const bool ok = a == 0 && b == 20 && c == 10;
  return {ok ? Status::kPass : Status::kFail,
          "q = " + std::to_string(a) + ", " + std::to_string(b) + ", " + std::to_string(c) + " (want 0, 20, 10)"};
}

// ---------------------------------------------------------------- 5

Outcome missing_triple_transfer() {
  auto m = jmac::testing::build_multikg(
      {{"kg", "E\tr1\tB\nD\tr2\tB\nB\tr3\tC\nA\tr5\tC\nD\tr2\tA\n"},
       {"kgstar", "E*\tr1\tB*\nD*\tr2\tB*\nB*\tr3\tC*\nA*\tr5\tC*\nD*\tr2\tA*\nB*\tr4\tA*\n"}});
  using jmac::testing::ent;
  SeedSet seeds{0, 1, {{ent(m, 0, "B"), ent(m, 1, "B*")}, {ent(m, 0, "A"), ent(m, 1, "A*")}}};
  const std::size_t first = entr::transfer_triples(seeds, m);
  const auto& added = m.kgs[0].transferred();
  const bool exact = added.size() == 1 && added[0].head == ent(m, 0, "B") &&
                     added[0].relation == jmac::testing::rel(m, "r4") && added[0].tail == ent(m, 0, "A") &&
                     m.kgs[1].transferred().empty();
  const std::size_t second = entr::transfer_triples(seeds, m);
  const bool ok = first == 1 && exact && second == 0;
  return {ok ? Status::kPass : Status::kFail, "first run added " + std::to_string(first) +
                                                  (exact ? " (B, r4, A)" : " (unexpected set)") + ", second run added " +
                                                  std::to_string(second)};
}

// ---------------------------------------------------------------- 6-8

// Config shared by the synthetic experiments; calibrated once on synthetic seed 0.
train::TrainConfig synthetic_config(std::uint64_t seed) {
  train::TrainConfig c;
  c.layers = 2;
  c.dim = 128;
  c.epochs = 30;
  c.lr_c = 0.005;
  c.lr_a = 0.005;
  c.gamma_a = 0.0;
  c.align_negatives = 20;
  c.steps_per_epoch = 2;
  c.with_si = false;
  c.seed = seed;
  return c;
}

MultiKg synthetic_pair(double missing, std::uint64_t seed, const std::filesystem::path& dir) {
  synth::SynthSpec spec;
  spec.entity_count = 200;
  spec.relation_count = 3;
  spec.mean_degree = 4.0;
  spec.missing_rate = missing;
  spec.seed_fraction = 0.3;
  spec.rng_seed = seed;
  synth::write_synthetic(spec, dir);
  return load_dataset(dir, {0.5, seed});
}

struct RunResult {
  double kga_hits1 = 0.0;
  double kgc_mrr = 0.0;
  std::size_t max_budget = 0;
  double seconds = 0.0;
};

// Trains for the full epoch budget and evaluates the final model.
RunResult run_synthetic(const MultiKg& data, const train::TrainConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  train::Trainer trainer(data, config);
  RunResult r;
  for (std::size_t e = 0; e < config.epochs; ++e) r.max_budget = std::max(r.max_budget, trainer.train_epoch().budget);
  const auto metrics = trainer.evaluate_test(true, !config.ablations.no_align);
  std::size_t kgc = 0;
  for (const auto& t : metrics) {
    if (t.task == "kga") r.kga_hits1 = t.metrics.hits.at(1);
    if (t.task == "kgc") r.kgc_mrr += t.metrics.mrr, ++kgc;
  }
  if (kgc > 0) r.kgc_mrr /= static_cast<double>(kgc);
  r.seconds = seconds_since(t0);
  return r;
}

Outcome end_to_end_alignment() {
  jmac::testing::TempDir dir("acceptance_e2e");
  const auto data = synthetic_pair(0.0, 0, dir.path());
  const auto r = run_synthetic(data, synthetic_config(0));
  const bool ok = r.kga_hits1 >= 0.9 && r.seconds < 300.0;
  return {ok ? Status::kPass : Status::kFail,
          "KGA Hits@1 " + fmt(r.kga_hits1) + " (threshold 0.9), " + fmt(r.seconds, 1) + " s"};
}

struct Directional {
  std::vector<double> full_kga, no_sir_kga, no_entr_kga, full_kgc, no_align_kgc;
  std::size_t full_max_budget = 0;
};

const Directional& directional_runs() {
  static const Directional d = [] {
    Directional out;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      jmac::testing::TempDir dir("acceptance_dir_" + std::to_string(seed));
      const auto data = synthetic_pair(0.2, seed, dir.path());
      const auto full = run_synthetic(data, synthetic_config(seed));
      out.full_kga.push_back(full.kga_hits1);
      out.full_kgc.push_back(full.kgc_mrr);
      out.full_max_budget = std::max(out.full_max_budget, full.max_budget);
      for (const char* flag : {"no_sir", "no_entr", "no_align"}) {
        auto c = synthetic_config(seed);
        train::set_ablation(c, flag);
        const auto r = run_synthetic(data, c);
        if (std::string(flag) == "no_sir") out.no_sir_kga.push_back(r.kga_hits1);
        if (std::string(flag) == "no_entr") out.no_entr_kga.push_back(r.kga_hits1);
        if (std::string(flag) == "no_align") out.no_align_kgc.push_back(r.kgc_mrr);
      }
      std::cerr << "  directional seed " << seed << ": full KGA " << fmt(full.kga_hits1) << ", no_sir "
                << fmt(out.no_sir_kga.back()) << ", no_entr " << fmt(out.no_entr_kga.back()) << "; KGC MRR full "
                << fmt(full.kgc_mrr) << ", no_align " << fmt(out.no_align_kgc.back()) << "\n";
    }
    return out;
  }();
  return d;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Outcome sir_direction() {
  const auto& d = directional_runs();
  const double with = mean(d.full_kga), without = mean(d.no_sir_kga);
  return {with >= without ? Status::kPass : Status::kFail,
          "mean KGA Hits@1 with SIR " + fmt(with) + ", without " + fmt(without) + " over 5 seeds"};
}

Outcome entr_direction() {
  const auto& d = directional_runs();
  const double kga_with = mean(d.full_kga), kga_without = mean(d.no_entr_kga);
  const double kgc_with = mean(d.full_kgc), kgc_without = mean(d.no_align_kgc);
  const bool ok = kga_with >= kga_without && kgc_with >= kgc_without;
  return {ok ? Status::kPass : Status::kFail,
          "mean KGA Hits@1 with EnTr " + fmt(kga_with) + ", without " + fmt(kga_without) +
              " (largest budget q in full runs: " + std::to_string(d.full_max_budget) + "); mean KGC MRR with alignment " +
              fmt(kgc_with) + ", without " + fmt(kgc_without)};
}

// ---------------------------------------------------------------- 9

Outcome invariant_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(99);
  std::vector<std::string> failures;

  // Attention weights of each center entity sum to 1.
  {
    auto m = jmac::testing::build_multikg({{"x", "a\tr\tb\na\ts\tc\na\tr\td\nb\ts\tc\n"}});
    auto p = rgnn::make_encoder(m, 1, 6, rng);
    for (int trial = 0; trial < 50; ++trial) {
      const auto w = rgnn::attention(Tensor::constant(random_matrix(1, 6, rng)),
                                     Tensor::constant(random_matrix(1 + trial % 7, 6, rng)), p.blocks[0]);
      double s = 0;
      for (double x : w.value().data()) s += x;
      if (std::abs(s - 1.0) > 1e-12) {
        failures.push_back("attention");
        break;
      }
    }
  }
  // Entropy bounds and budget monotonicity.
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t r = 1 + trial % 9, c = 1 + (trial * 5) % 11;
    const Matrix a = random_matrix(r, c, rng, -3, 3);
    const double h = entr::matrix_entropy(a);
    if (h < 0 || h > static_cast<double>(r) * std::log(static_cast<double>(c)) + 1e-12) {
      failures.push_back("entropy bounds");
      break;
    }
  }
  {
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (int i = 0; i <= 100; ++i) {
      const std::size_t q = entr::seed_budget(10.0, 0.1 * i, 0.3, 150, 200);
      if (q > prev) {
        failures.push_back("budget monotonicity");
        break;
      }
      prev = q;
    }
  }
  // Greedy matching is one-to-one.
  for (int trial = 0; trial < 50; ++trial) {
    const auto ms = alignment::greedy_match(random_matrix(2 + trial % 8, 2 + trial % 5, rng));
    std::set<std::size_t> rows, cols;
    bool ok = true;
    for (const auto& x : ms) ok = ok && rows.insert(x.row).second && cols.insert(x.col).second;
    if (!ok) {
      failures.push_back("matching one-to-one");
      break;
    }
  }
  // Transfer idempotence and soundness under the inverse mapping.
  for (int trial = 0; trial < 20; ++trial) {
    std::string a, b;
    for (int i = 0; i < 15; ++i) {
      a += "a" + std::to_string(rng() % 8) + "\tr" + std::to_string(rng() % 3) + "\ta" + std::to_string(rng() % 8) + "\n";
      b += "b" + std::to_string(rng() % 8) + "\tr" + std::to_string(rng() % 3) + "\tb" + std::to_string(rng() % 8) + "\n";
    }
    auto m = jmac::testing::build_multikg({{"kg", a}, {"kgstar", b}});
    SeedSet s{0, 1, {}};
    const std::size_t n = std::min(m.kgs[0].entity_count(), m.kgs[1].entity_count());
    std::map<std::uint32_t, std::uint32_t> fwd, back;
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint32_t j = static_cast<std::uint32_t>((i * 3 + trial) % n);
      if (back.count(j)) continue;
      s.pairs.push_back({EntityId{i}, EntityId{j}});
      fwd[i] = j;
      back[j] = i;
    }
    entr::transfer_triples(s, m);
    bool sound = true;
    for (const auto& t : m.kgs[0].transferred())
      sound = sound && m.kgs[1].contains_loaded(EntityId{fwd.at(t.head.value)}, t.relation, EntityId{fwd.at(t.tail.value)});
    for (const auto& t : m.kgs[1].transferred())
      sound = sound && m.kgs[0].contains_loaded(EntityId{back.at(t.head.value)}, t.relation, EntityId{back.at(t.tail.value)});
    if (!sound) failures.push_back("transfer soundness");
    if (entr::transfer_triples(s, m) != 0) failures.push_back("transfer idempotence");
    if (!failures.empty()) break;
  }
  // Checkpoint round trip.
  {
    jmac::testing::TempDir dir("acceptance_ckpt");
    synth::SynthSpec spec;
    spec.entity_count = 40;
    spec.missing_rate = 0.2;
    spec.holdout_fraction = 0.1;
    synth::write_synthetic(spec, dir.path());
    const auto data = load_dataset(dir.path(), {0.5, 0});
    train::TrainConfig c;
    c.layers = 2;
    c.dim = 16;
    c.beta = 1.0;
    train::Trainer t(data, c);
    t.train_epoch();
    t.train_epoch();
    const std::string bytes = t.checkpoint_bytes();
    auto restored = train::load_trainer(data, bytes);
    if (restored.checkpoint_bytes() != bytes) failures.push_back("checkpoint round trip");
    if (restored.train_epoch().completion_loss != t.train_epoch().completion_loss)
      failures.push_back("checkpoint continuation");
  }
  const double t = seconds_since(t0);
  if (t >= 120.0) failures.push_back("runtime");
  std::string detail = failures.empty() ? "all invariants hold" : "failed:";
  for (const auto& f : failures) detail += " " + f;
  return {failures.empty() ? Status::kPass : Status::kFail, detail + ", " + fmt(t, 1) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("JMAC acceptance criteria");
  std::vector<int> only;
  bool strict = false;
  std::string report_path;
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--report", report_path, "Also write the criterion lines to this file");
  app.add_flag("--strict", strict, "Exit nonzero when any criterion fails");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"dataset ingestion fidelity", dataset_ingestion},
      {"gradient suite", gradient_suite},
      {"ranking oracle", ranking_oracle},
      {"seed budget arithmetic", budget_examples},
      {"missing triple transfer", missing_triple_transfer},
      {"end-to-end synthetic alignment", end_to_end_alignment},
      {"SIR directionality", sir_direction},
      {"EnTr and alignment directionality", entr_direction},
      {"invariant suite", invariant_suite},
  };
  std::ofstream report;
  if (!report_path.empty()) report.open(report_path);
  auto emit = [&](const std::string& line) {
    std::cout << line << std::endl;
    if (report) report << line << std::endl;
  };
  int failed = 0, errors = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("error: ") + e.what()};
      ++errors;
    }
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kSkip ? "SKIP" : "FAIL";
    if (o.status == Status::kFail) ++failed;
    emit("criterion " + std::to_string(id) + " " + tag + " " + criteria[i].first + ": " + o.detail);
  }
  emit("summary: " + std::to_string(failed) + " failed");
  if (errors > 0) return 2;
  return strict && failed > 0 ? 1 : 0;
}
