#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "jmac/alignment.hpp"
#include "jmac/entr.hpp"
#include "jmac/kgdata.hpp"
#include "jmac/synth.hpp"
#include "jmac/train.hpp"

namespace py = pybind11;
using namespace jmac;

namespace {

diff::Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
  diff::Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

py::array_t<double> to_array(const diff::Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

py::dict epoch_dict(const train::EpochLog& l) {
  py::dict d;
  d["epoch"] = l.epoch;
  d["completion_loss"] = l.completion_loss;
  d["alignment_loss"] = l.alignment_loss;
  d["budget"] = l.budget;
  d["transferred"] = l.transferred;
  d["validation_mrr"] = l.validation_mrr;
  return d;
}

py::list metrics_list(const std::vector<train::TaskMetrics>& ms) {
  py::list out;
  for (const auto& m : ms) {
    py::dict d;
    d["task"] = m.task;
    d["scope"] = m.scope;
    d["mrr"] = m.metrics.mrr;
    py::dict hits;
    for (const auto& [k, v] : m.metrics.hits) hits[py::int_(k)] = v;
    d["hits"] = hits;
    d["count"] = m.metrics.count;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_jmac, m) {
  m.doc() = "Joint multilingual knowledge graph completion and alignment";

  py::register_exception<train::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<train::TrainError>(m, "TrainError", PyExc_RuntimeError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<synth::SynthError>(m, "SynthError", PyExc_ValueError);
  py::register_exception<entr::EntrError>(m, "EntrError", PyExc_ValueError);

  m.def("default_config_json", [] { return train::config_to_json(train::TrainConfig{}); });
  m.def("normalize_config_json", [](const std::string& text) {
    return train::config_to_json(train::config_from_json(text));
  });

  m.def(
      "synth",
      [](const std::filesystem::path& out, std::size_t entities, std::size_t relations, double degree,
         double missing, double seed_fraction, double holdout, std::uint64_t seed) {
        synth::SynthSpec s{entities, relations, degree, missing, seed_fraction, holdout, seed};
        const auto r = synth::write_synthetic(s, out);
        py::dict d;
        d["base_triples"] = r.base.size();
        d["kg_triples"] = r.kept_count();
        d["seed_pairs"] = r.seed_pairs;
        return d;
      },
      py::arg("out"), py::arg("entities") = 200, py::arg("relations") = 3, py::arg("degree") = 4.0,
      py::arg("missing") = 0.0, py::arg("seed_fraction") = 0.3, py::arg("holdout") = 0.05, py::arg("seed") = 0);

  py::class_<MultiKg>(m, "Dataset")
      .def_property_readonly("kg_ids",
                             [](const MultiKg& d) {
                               std::vector<std::string> ids;
                               for (const auto& kg : d.kgs) ids.push_back(kg.id());
                               return ids;
                             })
      .def_property_readonly("entity_counts",
                             [](const MultiKg& d) {
                               std::vector<std::size_t> n;
                               for (const auto& kg : d.kgs) n.push_back(kg.entity_count());
                               return n;
                             })
      .def_property_readonly("triple_counts",
                             [](const MultiKg& d) {
                               std::vector<std::size_t> n;
                               for (const auto& kg : d.kgs) n.push_back(kg.triples().size());
                               return n;
                             })
      .def_property_readonly("relation_count", [](const MultiKg& d) { return d.relations.size(); })
      .def_property_readonly("seed_counts", [](const MultiKg& d) {
        std::vector<std::pair<std::size_t, std::size_t>> n;
        for (const auto& a : d.alignments) n.emplace_back(a.train.pairs.size(), a.test.pairs.size());
        return n;
      });

  m.def(
      "load_dataset",
      [](const std::filesystem::path& dir, double seed_train_fraction, std::uint64_t split_seed) {
        return load_dataset(dir, {seed_train_fraction, split_seed});
      },
      py::arg("dir"), py::arg("seed_train_fraction") = 0.5, py::arg("split_seed") = 0);

  py::class_<train::Trainer>(m, "Trainer")
      .def(py::init([](const MultiKg& data, const std::string& config) {
             return train::Trainer(data, train::config_from_json(config));
           }),
           py::arg("data"), py::arg("config_json"))
      .def("train_epoch", [](train::Trainer& t) { return epoch_dict(t.train_epoch()); })
      .def("validation_mrr", &train::Trainer::validation_mrr)
      .def("evaluate", [](const train::Trainer& t, bool kgc, bool kga) { return metrics_list(t.evaluate_test(kgc, kga)); },
           py::arg("kgc") = true, py::arg("kga") = true)
      .def("final_entities", [](const train::Trainer& t) { return to_array(t.final_entities()); })
      .def("checkpoint", [](const train::Trainer& t) { return py::bytes(t.checkpoint_bytes()); })
      .def_property_readonly("epoch", &train::Trainer::epoch)
      .def_property_readonly("config_json", [](const train::Trainer& t) { return train::config_to_json(t.config()); });

  m.def("load_trainer", [](const MultiKg& data, const py::bytes& ckpt) {
    return train::load_trainer(data, std::string(ckpt));
  });

  m.def(
      "fit",
      [](const MultiKg& data, const std::string& config) {
        auto r = train::fit(data, train::config_from_json(config));
        py::list log;
        for (const auto& l : r.log) log.append(epoch_dict(l));
        return py::make_tuple(py::bytes(r.best.bytes), r.best.epoch, log);
      },
      py::arg("data"), py::arg("config_json"));

  m.def("matrix_entropy", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    return entr::matrix_entropy(to_matrix(a));
  });
  m.def("seed_budget", &entr::seed_budget, py::arg("h_tilde"), py::arg("h_current"), py::arg("beta"),
        py::arg("entity_count"), py::arg("target_entity_count"));
  m.def("similarity_matrix", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& s,
                                const py::array_t<double, py::array::c_style | py::array::forcecast>& t) {
    return to_array(alignment::similarity_matrix(to_matrix(s), to_matrix(t)));
  });
  m.def("greedy_match", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<std::tuple<std::size_t, std::size_t, double>> out;
    for (const auto& x : alignment::greedy_match(to_matrix(a))) out.emplace_back(x.row, x.col, x.score);
    return out;
  });
}
