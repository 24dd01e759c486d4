#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "wac/analysis.hpp"
#include "wac/composition.hpp"
#include "wac/error.hpp"
#include "wac/model.hpp"
#include "wac/parser.hpp"
#include "wac/scenegen.hpp"

namespace py = pybind11;
using namespace wac;

PYBIND11_MODULE(_wac, m) {
  m.doc() = "words-as-classifiers reference resolution";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidInputError>(m, "InvalidInputError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<DimensionMismatchError>(m, "DimensionMismatchError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());
  py::register_exception<OovError>(m, "OovError", base.ptr());
  py::register_exception<BackendMismatchError>(m, "BackendMismatchError", base.ptr());
  py::register_exception<UndefinedCorrelationError>(m, "UndefinedCorrelationError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::enum_<Backend>(m, "Backend")
      .value("LogReg", Backend::LogReg)
      .value("Mlp", Backend::Mlp)
      .value("Tree", Backend::Tree);

  py::enum_<Split>(m, "Split").value("Train", Split::Train).value("Dev", Split::Dev).value("Test", Split::Test);

  py::class_<Entity>(m, "Entity")
      .def_readonly("object_id", &Entity::object_id)
      .def_readonly("features", &Entity::features)
      .def_readonly("attributes", &Entity::attributes);

  py::class_<Scene>(m, "Scene")
      .def_readonly("scene_id", &Scene::scene_id)
      .def_readonly("entities", &Scene::entities);

  py::class_<RefExpInstance>(m, "RefExp")
      .def_readonly("scene_id", &RefExpInstance::scene_id)
      .def_readonly("tokens", &RefExpInstance::tokens)
      .def_readonly("target_object_id", &RefExpInstance::target_object_id);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("scenes", &Dataset::scenes)
      .def_readonly("refexps", &Dataset::refexps)
      .def_readonly("split", &Dataset::split)
      .def_readonly("feature_dim", &Dataset::feature_dim)
      .def("scene", &Dataset::scene, py::return_value_policy::reference_internal)
      .def("__len__", [](const Dataset& d) { return d.refexps.size(); });

  m.def("load_dataset", &load_dataset, py::arg("scenes_path"), py::arg("refexps_path"),
        py::arg("split") = Split::Train);
  m.def("split_dataset", &split_dataset, py::arg("dataset"), py::arg("train_fraction"),
        py::arg("dev_fraction"));
  m.def("tokenize", &tokenize);

  py::class_<GenConfig>(m, "GenConfig")
      .def(py::init<>())
      .def_readwrite("n_scenes", &GenConfig::n_scenes)
      .def_readwrite("objects_per_scene", &GenConfig::objects_per_scene)
      .def_readwrite("expressions_per_scene", &GenConfig::expressions_per_scene)
      .def_readwrite("noise_sigma", &GenConfig::noise_sigma)
      .def_readwrite("seed", &GenConfig::seed)
      .def_readwrite("relation_fraction", &GenConfig::relation_fraction)
      .def_readwrite("prototype_dim", &GenConfig::prototype_dim);

  m.def("generate_dataset", &generate_dataset, py::arg("config"));
  m.def("hue_to_rgb", &hue_to_rgb, py::arg("hue_degrees"));
  m.def("load_lexicons", &load_lexicons);
  m.def("default_lexicons", [] { return lexicons_for(GenLexicon::defaults()); });

  py::class_<Lexicons>(m, "Lexicons");

  py::class_<SamplingConfig>(m, "SamplingConfig")
      .def(py::init<>())
      .def_readwrite("neg_ratio", &SamplingConfig::neg_ratio)
      .def_readwrite("min_positives", &SamplingConfig::min_positives)
      .def_readwrite("seed", &SamplingConfig::seed);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("max_epochs", &TrainConfig::max_epochs)
      .def_readwrite("l2_alpha", &TrainConfig::l2_alpha)
      .def_readwrite("l1_lambda", &TrainConfig::l1_lambda)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_property(
          "learning_rate", [](const TrainConfig& c) { return c.adam.learning_rate; },
          [](TrainConfig& c, double lr) { c.adam.learning_rate = lr; });

  py::class_<WordStats>(m, "WordStats")
      .def_readonly("positives", &WordStats::positives)
      .def_readonly("negatives", &WordStats::negatives);

  py::class_<WacModel>(m, "WacModel")
      .def_readonly("backend", &WacModel::backend)
      .def_readonly("feature_dim", &WacModel::feature_dim)
      .def_readonly("train_meta", &WacModel::train_meta)
      .def_readonly("excluded", &WacModel::excluded)
      .def_property_readonly("vocabulary",
                             [](const WacModel& w) {
                               std::vector<std::string> out;
                               for (const auto& [word, _] : w.classifiers) out.push_back(word);
                               return out;
                             })
      .def_property_readonly("relations",
                             [](const WacModel& w) {
                               std::vector<std::string> out;
                               for (const auto& [phrase, _] : w.relational) out.push_back(phrase);
                               return out;
                             })
      .def("__contains__", &WacModel::contains)
      .def("predict",
           [](const WacModel& w, const std::string& word, const std::vector<double>& x) {
             return predict(w.classifier(word), x);
           })
      .def("to_json", &model_to_json);

  m.def("train_model", &train_model, py::arg("dataset"), py::arg("backend"),
        py::arg("sampling") = SamplingConfig{}, py::arg("train") = TrainConfig{},
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "add_relational",
      [](WacModel& model, const Lexicons& lexicons, const Dataset& dataset) {
        add_relational(model, lexicons, dataset, default_relational_np(model.backend));
      },
      py::arg("model"), py::arg("lexicons"), py::arg("dataset"), py::call_guard<py::gil_scoped_release>());
  m.def("save_model", &save_model);
  m.def("load_model", &load_model);
  m.def("model_from_json", &model_from_json, py::arg("text"), py::arg("source") = "<string>");
  m.def("word_fitness", &word_fitness);

  m.def("strategy_names", &strategy_names);
  m.def(
      "resolve",
      [](const WacModel& model, const Lexicons& lexicons, const std::string& expression, const Scene& scene,
         const std::string& strategy) {
        const auto named = strategy_from_name(strategy, model.backend);
        const auto r = resolve(model, lexicons, tokenize(expression), scene, named.strategy);
        return py::make_tuple(r.object_id, r.scores.scores);
      },
      py::arg("model"), py::arg("lexicons"), py::arg("expression"), py::arg("scene"),
      py::arg("strategy") = "relational");

  m.def("cosine", [](const std::vector<double>& u, const std::vector<double>& v) { return cosine(u, v); });
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); });
  m.def("extract_embedding", &extract_embedding);
  m.def(
      "probe",
      [](const WacModel& model, const std::string& word, std::size_t samples, std::size_t prototype_dim) {
        HueSweep sweep;
        sweep.samples = samples;
        sweep.layout = FeatureLayout{prototype_dim};
        return probe_classifier(model, word, sweep);
      },
      py::arg("model"), py::arg("word"), py::arg("samples") = 73, py::arg("prototype_dim") = 32);
}
