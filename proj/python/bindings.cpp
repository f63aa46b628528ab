#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "swt/analysis.hpp"
#include "swt/cli.hpp"
#include "swt/corpus_io.hpp"
#include "swt/masker.hpp"
#include "swt/synth.hpp"
#include "swt/trainer.hpp"

namespace py = pybind11;

namespace {

using FloatRows = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleVec = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<swt::Vector> rows_of(const FloatRows& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array (n, dim)");
  const auto n = static_cast<std::size_t>(a.shape(0));
  const auto dim = static_cast<std::size_t>(a.shape(1));
  std::vector<swt::Vector> out(n);
  const float* data = a.data();
  for (std::size_t i = 0; i < n; ++i) out[i].assign(data + i * dim, data + (i + 1) * dim);
  return out;
}

std::vector<double> vec_of(const DoubleVec& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return {a.data(), a.data() + a.shape(0)};
}

py::array_t<std::uint8_t> bits_array(const std::vector<std::uint8_t>& bits) {
  py::array_t<std::uint8_t> out(static_cast<py::ssize_t>(bits.size()));
  std::copy(bits.begin(), bits.end(), out.mutable_data());
  return out;
}

py::array_t<float> matrix_of(const swt::EmbeddingSet& set) {
  py::array_t<float> out({static_cast<py::ssize_t>(set.records.size()), static_cast<py::ssize_t>(set.dim)});
  float* dst = out.mutable_data();
  for (const auto& r : set.records) dst = std::copy(r.vector.begin(), r.vector.end(), dst);
  return out;
}

py::dict set_to_dict(const swt::EmbeddingSet& set) {
  py::list ids, lemmas, senses;
  for (const auto& r : set.records) {
    ids.append(r.instance_id);
    lemmas.append(r.lemma);
    senses.append(r.sense_id ? py::cast(*r.sense_id) : py::none());
  }
  py::dict d;
  d["dim"] = set.dim;
  d["model"] = set.model_id;
  d["ids"] = ids;
  d["lemmas"] = lemmas;
  d["senses"] = senses;
  d["vectors"] = matrix_of(set);
  return d;
}

py::dict state_to_dict(const swt::WeightState& s) {
  py::dict d;
  d["sense"] = s.sense_id;
  d["w"] = py::array_t<double>(static_cast<py::ssize_t>(s.w.size()), s.w.data());
  d["gti"] = py::array_t<double>(static_cast<py::ssize_t>(s.gti.size()), s.gti.data());
  d["epochs"] = s.epochs_run;
  d["s_pre"] = s.s_pre;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sense weight training: per-sense dimension importance for contextual embeddings";

  py::register_exception<swt::Error>(m, "SwtError", PyExc_ValueError);

  py::class_<swt::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &swt::TrainConfig::learning_rate)
      .def_readwrite("epochs", &swt::TrainConfig::epochs)
      .def_readwrite("explore_epochs", &swt::TrainConfig::explore_epochs)
      .def_readwrite("alpha", &swt::TrainConfig::alpha)
      .def_readwrite("mask_fraction", &swt::TrainConfig::mask_fraction)
      .def_readwrite("l1", &swt::TrainConfig::l1)
      .def_readwrite("epsilon", &swt::TrainConfig::epsilon)
      .def_readwrite("seed", &swt::TrainConfig::seed)
      .def_readwrite("init_weight", &swt::TrainConfig::init_weight)
      .def_property(
          "objective", [](const swt::TrainConfig& c) { return swt::to_string(c.objective); },
          [](swt::TrainConfig& c, const std::string& v) { c.objective = swt::parse_objective(v); })
      .def_property(
          "sign", [](const swt::TrainConfig& c) { return swt::to_string(c.sign); },
          [](swt::TrainConfig& c, const std::string& v) { c.sign = swt::parse_sign(v); })
      .def_property(
          "update", [](const swt::TrainConfig& c) { return swt::to_string(c.update); },
          [](swt::TrainConfig& c, const std::string& v) { c.update = swt::parse_update(v); })
      .def("mask_count", &swt::TrainConfig::mask_count);

  m.def(
      "pairwise_similarity",
      [](const FloatRows& vectors, const std::string& objective) {
        const auto r = swt::pairwise_similarity(rows_of(vectors), swt::parse_objective(objective));
        return py::make_tuple(r.value, r.zero_pairs);
      },
      py::arg("vectors"), py::arg("objective") = "sum",
      "Sum or mean pairwise cosine; returns (value, pairs involving a zero vector).");

  m.def(
      "train_group",
      [](const FloatRows& vectors, const swt::TrainConfig& config, const std::string& sense_id) -> py::object {
        swt::EmbeddingSet set;
        set.dim = vectors.ndim() == 2 ? static_cast<std::size_t>(vectors.shape(1)) : 0;
        auto rows = rows_of(vectors);
        for (std::size_t i = 0; i < rows.size(); ++i) {
          swt::EmbeddingRecord r;
          r.instance_id = std::to_string(i);
          r.sense_id = sense_id;
          r.vector = std::move(rows[i]);
          set.records.push_back(std::move(r));
        }
        const auto groups = swt::group_by_sense(set);
        if (groups.empty()) return py::none();
        std::optional<swt::WeightState> state;
        {
          py::gil_scoped_release release;
          state = swt::train_group(groups.front(), config);
        }
        return state ? py::object(state_to_dict(*state)) : py::object(py::none());
      },
      py::arg("vectors"), py::arg("config") = swt::TrainConfig{}, py::arg("sense_id") = "group",
      "Train one sense group; returns a dict with w, gti, epochs, s_pre, or None when skipped.");

  m.def(
      "percentile_mask", [](const DoubleVec& w, double p) { return bits_array(swt::percentile_mask(vec_of(w), p).bits); },
      py::arg("w"), py::arg("p"));
  m.def(
      "absolute_mask", [](const DoubleVec& w, double tau) { return bits_array(swt::absolute_mask(vec_of(w), tau).bits); },
      py::arg("w"), py::arg("tau"));

  m.def(
      "spearman", [](const DoubleVec& x, const DoubleVec& y) { return swt::spearman(vec_of(x), vec_of(y)); },
      py::arg("xs"), py::arg("ys"));

  m.def(
      "recovery_score",
      [](const DoubleVec& w, const std::vector<std::size_t>& signal_dims, double p) {
        return swt::recovery_score(vec_of(w), signal_dims, p);
      },
      py::arg("w"), py::arg("signal_dims"), py::arg("p"));

  m.def(
      "generate_synthetic",
      [](std::size_t groups, std::size_t group_size, std::size_t dim, std::size_t signal_dims, double mu,
         double sigma, double test_fraction, std::uint64_t seed) {
        swt::SynthConfig c;
        c.n_groups = groups;
        c.group_size = group_size;
        c.dim = dim;
        c.signal_dims = signal_dims;
        c.signal_strength = mu;
        c.noise_sigma = sigma;
        c.test_fraction = test_fraction;
        c.seed = seed;
        const auto corpus = swt::generate_synthetic(c);
        py::dict d;
        d["train"] = set_to_dict(corpus.train);
        d["test"] = set_to_dict(corpus.test);
        d["gold"] = corpus.gold;
        d["truth"] = corpus.truth.signal_dims;
        return d;
      },
      py::arg("groups") = 20, py::arg("group_size") = 100, py::arg("dim") = 64, py::arg("signal_dims") = 32,
      py::arg("mu") = 1.0, py::arg("sigma") = 0.5, py::arg("test_fraction") = 0.0, py::arg("seed") = 1);

  m.def(
      "load_embeddings", [](const std::string& path) { return set_to_dict(swt::load_embeddings(path)); },
      py::arg("path"), "Load a jsonl or packed embedding file into a dict with a (n, dim) float32 matrix.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = swt::cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the swt command line in-process; returns (exit_code, stdout, stderr).");
}
