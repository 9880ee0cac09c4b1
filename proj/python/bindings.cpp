#include <map>
#include <string>

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "terrasense/pipeline.hpp"

namespace py = pybind11;
using namespace terrasense;
using pipeline::PipelineConfig;

namespace {

std::string value_text(const py::handle& v) {
  if (py::isinstance<py::bool_>(v)) return v.cast<bool>() ? "true" : "false";
  if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
    std::string out;
    for (const auto& item : v) {
      if (!out.empty()) out += ",";
      out += py::str(item).cast<std::string>();
    }
    return out;
  }
  return py::str(v).cast<std::string>();
}

KeyValueConfig to_kv(const py::dict& overrides) {
  KeyValueConfig kv;
  for (const auto& [k, v] : overrides) kv.set(py::str(k).cast<std::string>(), value_text(v));
  return kv;
}

PipelineConfig config_from(const py::dict& overrides) {
  auto c = PipelineConfig::from_kv(to_kv(overrides));
  c.validate();
  return c;
}

std::vector<int> ints(const py::array_t<int, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

py::dict metrics_dict(const pipeline::RunMetrics& m) {
  py::dict d;
  d["clustering_accuracy"] = m.clustering_accuracy;
  d["nmi"] = m.nmi;
  d["triplet_correctness"] = m.triplet_correctness;
  d["miou"] = m.miou;
  d["mean_recall"] = m.mean_recall;
  d["validation_accuracy"] = m.validation_accuracy;
  d["validation_nmi"] = m.validation_nmi;
  return d;
}

using StageFn = void (*)(const std::filesystem::path&, const std::filesystem::path&, const PipelineConfig&);

const std::map<std::string, StageFn>& stage_table() {
  namespace s = pipeline::stages;
  static const std::map<std::string, StageFn> t{
      {"spectrogram", s::spectrogram}, {"features", s::features},   {"triplets", s::make_triplets},
      {"train-encoder", s::train_encoder}, {"cluster", s::cluster}, {"label", s::label},
      {"train-seg", s::train_seg},     {"evaluate", s::evaluate},   {"map", s::map},
      {"all", s::all}};
  return t;
}

}  // namespace

PYBIND11_MODULE(_terrasense, m) {
  m.doc() = "Audio-supervised terrain segmentation";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<StageError>(m, "StageError", base.ptr());

  m.def(
      "canonical_config", [](const py::dict& overrides) { return config_from(overrides).to_kv().to_text(); },
      py::arg("overrides") = py::dict(), "Full configuration as key=value text.");
  m.def(
      "config_hash", [](const py::dict& overrides) { return hex64(config_from(overrides).to_kv().hash()); },
      py::arg("overrides") = py::dict());

  m.def(
      "write_bundle",
      [](const std::filesystem::path& dir, const py::dict& overrides, bool force) {
        pipeline::write_dataset(dir, config_from(overrides), force);
      },
      py::arg("dir"), py::arg("overrides") = py::dict(), py::arg("force") = false);

  m.def(
      "generate",
      [](const py::dict& overrides, bool validation) {
        const auto data = pipeline::generate_dataset(config_from(overrides), validation);
        py::dict d;
        py::list clips;
        for (const auto& c : data.bundle.clips) {
          clips.append(py::array_t<double>(static_cast<py::ssize_t>(c.samples.size()), c.samples.data()));
        }
        d["clips"] = clips;
        d["sample_rate_hz"] = data.bundle.clips.empty() ? 0.0 : data.bundle.clips.front().sample_rate_hz;
        d["clip_classes"] = data.truth.clip_classes;
        d["num_images"] = data.bundle.images.size();
        d["spec_hash"] = data.bundle.info.spec_hash;
        return d;
      },
      py::arg("overrides") = py::dict(), py::arg("validation") = false,
      "Synthesizes a traversal in memory; clip_classes is the held-out truth.");

  m.def(
      "run",
      [](const py::dict& overrides, bool segmentation, bool validation) {
        const auto cfg = config_from(overrides);
        py::gil_scoped_release release;
        const auto data = pipeline::generate_dataset(cfg);
        const auto out = pipeline::run_pipeline(data, cfg, {segmentation, validation});
        py::gil_scoped_acquire acquire;
        auto d = metrics_dict(out.metrics);
        d["clip_clusters"] = out.clip_clusters;
        d["cluster_to_class"] = out.cluster_to_class;
        return d;
      },
      py::arg("overrides") = py::dict(), py::arg("segmentation") = true, py::arg("validation") = false,
      "Generates a dataset and runs the full pipeline in memory; returns the metrics.");

  m.def(
      "experiment",
      [](const std::string& name, const py::dict& overrides) {
        const auto cfg = config_from(overrides);
        std::vector<pipeline::ExperimentRow> rows;
        {
          py::gil_scoped_release release;
          rows = pipeline::run_experiment(name, cfg);
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d;
          d["variable"] = r.variable;
          d["seed"] = r.seed;
          d["clustering_accuracy"] = r.clustering_accuracy;
          d["nmi"] = r.nmi;
          out.append(d);
        }
        return out;
      },
      py::arg("name"), py::arg("overrides") = py::dict());

  m.def(
      "run_stage",
      [](const std::string& stage, const std::filesystem::path& bundle, const std::filesystem::path& out,
         const py::dict& overrides) {
        const auto it = stage_table().find(stage);
        if (it == stage_table().end()) throw ConfigError("unknown stage: " + stage);
        const auto cfg = config_from(overrides);
        py::gil_scoped_release release;
        it->second(bundle, out, cfg);
      },
      py::arg("stage"), py::arg("bundle"), py::arg("out"), py::arg("overrides") = py::dict());

  m.def(
      "stft",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& samples, int window, int hop,
         const std::string& fn) {
        dsp::AudioClip clip;
        clip.samples.assign(samples.data(), samples.data() + samples.size());
        dsp::StftParams p;
        p.window_size = window;
        p.hop = hop;
        p.window = dsp::parse_window(fn);
        return Eigen::MatrixXcd(dsp::stft(clip, p));
      },
      py::arg("samples"), py::arg("window") = 256, py::arg("hop") = 128, py::arg("window_fn") = "hann",
      "Complex STFT, one column per frame.");

  m.def(
      "kmeans",
      [](const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts) {
        const auto r = cluster::kmeans(points.transpose(), {.k = k, .seed = seed, .restarts = restarts});
        py::dict d;
        d["labels"] = r.labels;
        d["centroids"] = Eigen::MatrixXd(r.centroids.transpose());
        d["inertia"] = r.inertia;
        d["inertia_trace"] = r.inertia_trace;
        return d;
      },
      py::arg("points"), py::arg("k"), py::arg("seed") = 1, py::arg("restarts") = 10,
      "points is (n, dim); centroids come back as (k, dim).");

  m.def(
      "hungarian",
      [](const Eigen::MatrixXd& cost) {
        const auto a = cluster::hungarian(cost);
        return py::make_tuple(a.row_to_col, a.cost);
      },
      py::arg("cost"));

  m.def(
      "clustering_accuracy",
      [](const py::array_t<int, py::array::c_style | py::array::forcecast>& pred,
         const py::array_t<int, py::array::c_style | py::array::forcecast>& truth) {
        return cluster::clustering_accuracy(ints(pred), ints(truth));
      },
      py::arg("pred"), py::arg("truth"));
  m.def(
      "nmi",
      [](const py::array_t<int, py::array::c_style | py::array::forcecast>& y,
         const py::array_t<int, py::array::c_style | py::array::forcecast>& c) {
        return cluster::nmi(ints(y), ints(c));
      },
      py::arg("y"), py::arg("c"));

  m.def(
      "triplet_correctness",
      [](const py::array_t<int, py::array::c_style | py::array::forcecast>& triplets,
         const py::array_t<int, py::array::c_style | py::array::forcecast>& labels) {
        if (triplets.ndim() != 2 || triplets.shape(1) != 3) throw InputError("triplets must be an (n, 3) array");
        std::vector<triplets::Triplet> t;
        const auto r = triplets.unchecked<2>();
        for (py::ssize_t i = 0; i < r.shape(0); ++i) t.push_back({r(i, 0), r(i, 1), r(i, 2)});
        return triplets::triplet_correctness(t, ints(labels));
      },
      py::arg("triplets"), py::arg("labels"));

  m.def(
      "plan",
      [](const Eigen::MatrixXd& costs, std::pair<int, int> start, std::pair<int, int> goal) {
        Grid<double> g(static_cast<int>(costs.cols()), static_cast<int>(costs.rows()));
        for (int r = 0; r < g.height; ++r) {
          for (int c = 0; c < g.width; ++c) g.at(r, c) = costs(r, c);
        }
        const auto t = mapplan::plan(g, {start.first, start.second}, {goal.first, goal.second});
        std::vector<std::pair<int, int>> cells;
        for (const auto& c : t.cells) cells.emplace_back(c.row, c.col);
        py::dict d;
        d["found"] = t.found;
        d["cells"] = cells;
        d["cost"] = t.cost;
        return d;
      },
      py::arg("costs"), py::arg("start"), py::arg("goal"), "Least-cost 4-connected path over a (rows, cols) grid.");
}
