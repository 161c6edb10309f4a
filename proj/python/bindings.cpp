// Python bindings for the distillation toolkit: dataset types, teacher
// ensembling, ranking metrics, student training, synthetic data, file I/O,
// and the end-to-end benchmark.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pilekd/ensemble.hpp"
#include "pilekd/errors.hpp"
#include "pilekd/io.hpp"
#include "pilekd/metrics.hpp"
#include "pilekd/pipeline.hpp"
#include "pilekd/rng.hpp"
#include "pilekd/student.hpp"
#include "pilekd/synth.hpp"
#include "pilekd/types.hpp"

namespace py = pybind11;
using namespace pilekd;

PYBIND11_MODULE(_core, m) {
    m.doc() =
        "Multi-teacher knowledge distillation for learning-to-rank: "
        "label-guided iterative teacher ensembling, ranking metrics, "
        "desk-scale student training, and synthetic benchmark data.";

    // ----------------------------------------------------------- errors
    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<InvalidInputError>(m, "InvalidInputError", base);
    py::register_exception<InvalidStateError>(m, "InvalidStateError", base);
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<ParseError>(m, "ParseError", base);
    py::register_exception<ValidationError>(m, "ValidationError", base);
    py::register_exception<AlignmentError>(m, "AlignmentError", base);
    py::register_exception<TrainingError>(m, "TrainingError", base);
    py::register_exception<IoError>(m, "IoError", base);

    // -------------------------------------------------------------- rng
    m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("stream"),
          "Independent sub-stream seed, a pure function of (seed, stream).");

    py::class_<Rng>(m, "Rng", "Deterministic 64-bit generator; identical "
                              "sequences for a seed on every platform.")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("next", &Rng::next)
        .def("uniform", py::overload_cast<>(&Rng::uniform))
        .def("uniform", py::overload_cast<double, double>(&Rng::uniform),
             py::arg("lo"), py::arg("hi"))
        .def("below", &Rng::below, py::arg("n"))
        .def("normal", py::overload_cast<>(&Rng::normal))
        .def("normal", py::overload_cast<double, double>(&Rng::normal),
             py::arg("mean"), py::arg("sigma"))
        .def("bernoulli", &Rng::bernoulli, py::arg("p"));

    // ------------------------------------------------------------ types
    py::class_<RelevanceLabel>(m, "RelevanceLabel",
                               "Human relevance grade in 0..4.")
        .def(py::init([](int v) { return RelevanceLabel{v}; }),
             py::arg("value") = 0)
        .def_readwrite("value", &RelevanceLabel::value)
        .def("__eq__", [](const RelevanceLabel& a,
                          const RelevanceLabel& b) { return a == b; })
        .def("__repr__", [](const RelevanceLabel& l) {
            return "RelevanceLabel(" + std::to_string(l.value) + ")";
        });
    py::implicitly_convertible<py::int_, RelevanceLabel>();

    m.attr("MIN_GRADE") = kMinGrade;
    m.attr("MAX_GRADE") = kMaxGrade;

    py::class_<DocEntry>(m, "DocEntry",
                         "One candidate document: features, grade, and the "
                         "logit each teacher assigned it.")
        .def(py::init([](std::string doc_id, std::vector<double> features,
                         RelevanceLabel label,
                         std::vector<double> teacher_logits) {
                 return DocEntry{std::move(doc_id), std::move(features), label,
                                 std::move(teacher_logits)};
             }),
             py::arg("doc_id") = "", py::arg("features") = std::vector<double>{},
             py::arg("label") = RelevanceLabel{0},
             py::arg("teacher_logits") = std::vector<double>{})
        .def_readwrite("doc_id", &DocEntry::doc_id)
        .def_readwrite("features", &DocEntry::features)
        .def_readwrite("label", &DocEntry::label)
        .def_readwrite("teacher_logits", &DocEntry::teacher_logits)
        .def("__eq__",
             [](const DocEntry& a, const DocEntry& b) { return a == b; });

    py::class_<QueryGroup>(m, "QueryGroup",
                           "A query with its candidate documents, in input "
                           "order.")
        .def(py::init([](std::string query_id, std::vector<DocEntry> docs) {
                 return QueryGroup{std::move(query_id), std::move(docs)};
             }),
             py::arg("query_id") = "", py::arg("docs") = std::vector<DocEntry>{})
        .def_readwrite("query_id", &QueryGroup::query_id)
        .def_readwrite("docs", &QueryGroup::docs)
        .def("__len__", &QueryGroup::size)
        .def("label_values", &QueryGroup::label_values)
        .def("__eq__",
             [](const QueryGroup& a, const QueryGroup& b) { return a == b; });

    py::class_<Dataset>(m, "Dataset",
                        "Query groups sharing one feature dimension and one "
                        "teacher count (0 = logits not filled yet).")
        .def(py::init([](std::vector<QueryGroup> groups, std::size_t dim,
                         std::size_t teachers) {
                 return Dataset{std::move(groups), dim, teachers};
             }),
             py::arg("groups") = std::vector<QueryGroup>{},
             py::arg("feature_dim") = 0, py::arg("num_teachers") = 0)
        .def_readwrite("groups", &Dataset::groups)
        .def_readwrite("feature_dim", &Dataset::feature_dim)
        .def_readwrite("num_teachers", &Dataset::num_teachers)
        .def("__len__", [](const Dataset& d) { return d.groups.size(); })
        .def("__eq__",
             [](const Dataset& a, const Dataset& b) { return a == b; });

    py::class_<ValidationIssue>(m, "ValidationIssue")
        .def_readonly("group_index", &ValidationIssue::group_index)
        .def_readonly("doc_index", &ValidationIssue::doc_index)
        .def_readonly("query_id", &ValidationIssue::query_id)
        .def_readonly("doc_id", &ValidationIssue::doc_id)
        .def_readonly("message", &ValidationIssue::message)
        .def("__str__",
             [](const ValidationIssue& i) { return to_string(i); });

    m.def("validate_dataset", &validate_dataset, py::arg("dataset"),
          "All invariant violations with their locations; empty == valid.");
    m.def("require_valid", &require_valid, py::arg("dataset"),
          "Raises ValidationError on the first violation.");

    // --------------------------------------------------------- ensemble
    py::class_<WeightMatrix>(m, "WeightMatrix",
                             "Dense binary doc-by-teacher weight matrix.")
        .def_readonly("rows", &WeightMatrix::rows)
        .def_readonly("cols", &WeightMatrix::cols)
        .def("at",
             [](const WeightMatrix& w, std::size_t i, std::size_t k) {
                 return static_cast<int>(w.at(i, k));
             },
             py::arg("doc"), py::arg("teacher"))
        .def("tolist", [](const WeightMatrix& w) {
            std::vector<std::vector<int>> out(w.rows);
            for (std::size_t i = 0; i < w.rows; ++i)
                for (std::size_t k = 0; k < w.cols; ++k)
                    out[i].push_back(w.at(i, k));
            return out;
        });

    py::enum_<StopPolicy>(m, "StopPolicy")
        .value("OrderConsistent", StopPolicy::OrderConsistent)
        .value("FixedPoint", StopPolicy::FixedPoint);

    py::enum_<PairPolicy>(m, "PairPolicy")
        .value("UniformRandom", PairPolicy::UniformRandom)
        .value("Sweep", PairPolicy::Sweep);

    py::class_<PileConfig>(m, "PileConfig",
                           "Iterative ensemble settings: update rate, "
                           "iteration cap, stop and pair policies.")
        .def(py::init<>())
        .def_readwrite("lambda_", &PileConfig::lambda)
        .def_readwrite("max_iters_exponent", &PileConfig::max_iters_exponent)
        .def_readwrite("max_iters_override", &PileConfig::max_iters_override)
        .def_readwrite("stop_policy", &PileConfig::stop_policy)
        .def_readwrite("epsilon", &PileConfig::epsilon)
        .def_readwrite("pair_policy", &PileConfig::pair_policy)
        .def_readwrite("seed", &PileConfig::seed)
        .def_readwrite("trace", &PileConfig::trace);

    py::class_<EnsembleState>(m, "EnsembleState")
        .def_readonly("logits", &EnsembleState::logits)
        .def_readonly("weights", &EnsembleState::weights)
        .def_readonly("iteration", &EnsembleState::iteration);

    py::class_<EnsembleOutput>(m, "EnsembleOutput")
        .def_readonly("logits", &EnsembleOutput::logits)
        .def_readonly("final_weights", &EnsembleOutput::final_weights)
        .def_readonly("iterations_used", &EnsembleOutput::iterations_used)
        .def_readonly("converged", &EnsembleOutput::converged)
        .def_readonly("trace", &EnsembleOutput::trace);

    m.def("average_ensemble", &average_ensemble, py::arg("group"),
          "Equal-weight mean of the teacher logits per doc.");
    m.def("pile_ensemble", &pile_ensemble, py::arg("group"),
          py::arg("config") = PileConfig{},
          "Label-guided iterative reweighting of the teacher logits, "
          "starting from their average.");
    m.def("is_reversed_pair", &is_reversed_pair, py::arg("e_i"),
          py::arg("e_j"), py::arg("y_i"), py::arg("y_j"),
          "True iff the higher-label doc carries the strictly lower logit.");
    m.def(
        "count_reversed_pairs",
        [](const std::vector<double>& logits, const std::vector<int>& labels) {
            return count_reversed_pairs(logits, labels);
        },
        py::arg("logits"), py::arg("labels"));

    // ----------------------------------------------------------- metrics
    m.def(
        "pnr_query",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
            return pnr_query(scores, labels);
        },
        py::arg("scores"), py::arg("labels"),
        "Concordant over discordant label-distinct pairs for one query; "
        "None when undefined.");

    py::class_<QueryScores>(m, "QueryScores")
        .def(py::init([](std::string query_id, std::vector<double> scores,
                         std::vector<int> labels) {
                 return QueryScores{std::move(query_id), std::move(scores),
                                    std::move(labels)};
             }),
             py::arg("query_id") = "", py::arg("scores") = std::vector<double>{},
             py::arg("labels") = std::vector<int>{})
        .def_readwrite("query_id", &QueryScores::query_id)
        .def_readwrite("scores", &QueryScores::scores)
        .def_readwrite("labels", &QueryScores::labels);

    py::class_<MetricReport>(m, "MetricReport")
        .def(py::init<>())
        .def_readwrite("mean_pnr", &MetricReport::mean_pnr)
        .def_readwrite("per_query_pnr", &MetricReport::per_query_pnr)
        .def_readwrite("skipped_no_discordant",
                       &MetricReport::skipped_no_discordant)
        .def_readwrite("skipped_no_pairs", &MetricReport::skipped_no_pairs)
        .def_readwrite("dcg_at_k", &MetricReport::dcg_at_k)
        .def_readwrite("parameters", &MetricReport::parameters);

    m.def("pnr_mean", &pnr_mean, py::arg("queries"),
          "Mean per-query ratio where defined, with skip counters.");
    m.def(
        "dcg",
        [](const std::vector<double>& gains, std::optional<int> k) {
            return dcg(gains, k);
        },
        py::arg("gains_in_rank_order"), py::arg("k") = std::nullopt,
        "Position-discounted gain sum over the first min(k, N) positions.");

    py::enum_<GainScheme>(m, "GainScheme")
        .value("Linear", GainScheme::Linear)
        .value("Exponential", GainScheme::Exponential);

    m.def(
        "gains_from_labels",
        [](const std::vector<int>& labels, GainScheme scheme) {
            return gains_from_labels(labels, scheme);
        },
        py::arg("labels"), py::arg("scheme") = GainScheme::Exponential);
    m.def("delta_ab", &delta_ab, py::arg("wins_a"), py::arg("wins_b"),
          py::arg("ties"),
          "Interleaving gain 0.5 * (wins_a - wins_b) / total.");
    m.def("delta_gsb", &delta_gsb, py::arg("good"), py::arg("same"),
          py::arg("bad"), "Side-by-side gain (good - bad) / total.");

    // ----------------------------------------------------------- student
    py::enum_<Architecture>(m, "Architecture")
        .value("Linear", Architecture::Linear)
        .value("Mlp", Architecture::Mlp);

    py::class_<StudentParams>(m, "StudentParams",
                              "Flat parameters of the small scorer.")
        .def(py::init<>())
        .def_readwrite("architecture", &StudentParams::architecture)
        .def_readwrite("hidden_sizes", &StudentParams::hidden_sizes)
        .def_readwrite("feature_dim", &StudentParams::feature_dim)
        .def_readwrite("weights", &StudentParams::weights)
        .def("__eq__", [](const StudentParams& a, const StudentParams& b) {
            return a == b;
        });

    m.def("init_params", &init_params, py::arg("architecture"),
          py::arg("hidden_sizes"), py::arg("feature_dim"), py::arg("rng"),
          "Fresh fan-in-scaled weights and zero biases.");
    m.def(
        "score",
        [](const StudentParams& params, const std::vector<double>& features) {
            return score(params, features);
        },
        py::arg("params"), py::arg("features"));
    m.def("total_loss", &total_loss, py::arg("params"), py::arg("group"),
          py::arg("targets") = std::nullopt, py::arg("alpha") = 0.0,
          "Mean pairwise loss plus alpha * mean squared target error.");
    m.def("gradient", &gradient, py::arg("params"), py::arg("group"),
          py::arg("targets") = std::nullopt, py::arg("alpha") = 0.0,
          "Analytic gradient of total_loss in flat-weight order.");

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("adam_beta1", &TrainConfig::adam_beta1)
        .def_readwrite("adam_beta2", &TrainConfig::adam_beta2)
        .def_readwrite("batch_pairs", &TrainConfig::batch_pairs)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("kd_alpha", &TrainConfig::kd_alpha)
        .def_readwrite("seed", &TrainConfig::seed);

    py::class_<TrainLog>(m, "TrainLog")
        .def_readonly("initial_loss", &TrainLog::initial_loss)
        .def_readonly("epoch_loss", &TrainLog::epoch_loss);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("params", &TrainResult::params)
        .def_readonly("log", &TrainResult::log);

    m.def("train", &train, py::arg("dataset"),
          py::arg("targets_per_group") = std::nullopt, py::arg("initial"),
          py::arg("config") = TrainConfig{},
          "Minibatch Adam over all label-distinct pairs; optional "
          "per-group distillation targets. Deterministic given the seed.");

    // ------------------------------------------------------------- synth
    py::enum_<TeacherMode>(m, "TeacherMode")
        .value("Trained", TeacherMode::Trained)
        .value("Perturbed", TeacherMode::Perturbed);

    py::class_<SynthConfig>(m, "SynthConfig")
        .def(py::init<>())
        .def_readwrite("num_queries", &SynthConfig::num_queries)
        .def_readwrite("docs_per_query_min", &SynthConfig::docs_per_query_min)
        .def_readwrite("docs_per_query_max", &SynthConfig::docs_per_query_max)
        .def_readwrite("feature_dim", &SynthConfig::feature_dim)
        .def_readwrite("num_teachers", &SynthConfig::num_teachers)
        .def_readwrite("teacher_mode", &SynthConfig::teacher_mode)
        .def_readwrite("subset_fraction", &SynthConfig::subset_fraction)
        .def_readwrite("teacher_hidden", &SynthConfig::teacher_hidden)
        .def_readwrite("teacher_epochs", &SynthConfig::teacher_epochs)
        .def_readwrite("teacher_lr", &SynthConfig::teacher_lr)
        .def_readwrite("teacher_batch_pairs", &SynthConfig::teacher_batch_pairs)
        .def_readwrite("noise_sigma", &SynthConfig::noise_sigma)
        .def_readwrite("bias_magnitude", &SynthConfig::bias_magnitude)
        .def_readwrite("biased_query_fraction",
                       &SynthConfig::biased_query_fraction)
        .def_readwrite("label_noise", &SynthConfig::label_noise)
        .def_readwrite("seed", &SynthConfig::seed);

    m.def("validate_config", &validate_config, py::arg("config"),
          "Raises ConfigError on any out-of-range field.");

    py::class_<GroundTruth>(m, "GroundTruth")
        .def_readwrite("dataset", &GroundTruth::dataset)
        .def_readwrite("oracle", &GroundTruth::oracle);

    m.def("gen_ground_truth", &gen_ground_truth, py::arg("config"),
          py::arg("rng"),
          "Normal features scored by a frozen nonlinear oracle, bucketed "
          "into grades at fixed quantiles, with optional adjacent-grade "
          "noise.");
    m.def("apply_label_noise", &apply_label_noise, py::arg("dataset"),
          py::arg("noise"), py::arg("rng"),
          "Flips each grade to an adjacent one with the given probability, "
          "in place.");

    py::class_<TeacherResult>(m, "TeacherResult")
        .def_readonly("dataset", &TeacherResult::dataset)
        .def_readonly("teacher_models", &TeacherResult::teacher_models);

    m.def("make_teachers", &make_teachers, py::arg("truth"), py::arg("config"),
          py::arg("rng"),
          "Fills every doc's teacher logits: trained scorers on query "
          "subsets, or noisy copies of the true scores.");
    m.def("score_dataset", &score_dataset, py::arg("model"),
          py::arg("dataset"),
          "Scores every doc, grouped like the dataset.");

    // ---------------------------------------------------------------- io
    m.def("read_groups", &read_groups, py::arg("path"));
    m.def("write_groups", &write_groups, py::arg("dataset"), py::arg("path"));
    m.def("read_ensemble", &read_ensemble, py::arg("path"));
    m.def("write_ensemble", &write_ensemble, py::arg("outputs"),
          py::arg("path"));
    m.def("read_model", &read_model, py::arg("path"));
    m.def("write_model", &write_model, py::arg("params"), py::arg("path"));
    m.def("read_report", &read_report, py::arg("path"));
    m.def("write_report", &write_report, py::arg("report"), py::arg("path"));

    // ---------------------------------------------------------- pipeline
    py::enum_<System>(m, "System")
        .value("Base", System::Base)
        .value("SingleKd", System::SingleKd)
        .value("AeKd", System::AeKd)
        .value("PileKd", System::PileKd);

    py::class_<BenchConfig>(m, "BenchConfig")
        .def(py::init<>())
        .def_readwrite("train_queries", &BenchConfig::train_queries)
        .def_readwrite("test_queries", &BenchConfig::test_queries)
        .def_readwrite("docs_per_query", &BenchConfig::docs_per_query)
        .def_readwrite("feature_dim", &BenchConfig::feature_dim)
        .def_readwrite("num_teachers", &BenchConfig::num_teachers)
        .def_readwrite("subset_fraction", &BenchConfig::subset_fraction)
        .def_readwrite("label_noise", &BenchConfig::label_noise)
        .def_readwrite("teacher_hidden", &BenchConfig::teacher_hidden)
        .def_readwrite("teacher_epochs", &BenchConfig::teacher_epochs)
        .def_readwrite("teacher_lr", &BenchConfig::teacher_lr)
        .def_readwrite("teacher_batch_pairs", &BenchConfig::teacher_batch_pairs)
        .def_readwrite("pile", &BenchConfig::pile)
        .def_readwrite("student_arch", &BenchConfig::student_arch)
        .def_readwrite("student_hidden", &BenchConfig::student_hidden)
        .def_readwrite("student_epochs", &BenchConfig::student_epochs)
        .def_readwrite("student_lr", &BenchConfig::student_lr)
        .def_readwrite("student_batch_pairs", &BenchConfig::student_batch_pairs)
        .def_readwrite("kd_alpha", &BenchConfig::kd_alpha);

    py::class_<BenchResult>(m, "BenchResult")
        .def_readonly("ae_train_pnr", &BenchResult::ae_train_pnr)
        .def_readonly("pile_train_pnr", &BenchResult::pile_train_pnr)
        .def_readonly("pile_mean_iterations",
                      &BenchResult::pile_mean_iterations)
        .def_readonly("teacher_test_pnr", &BenchResult::teacher_test_pnr)
        .def_readonly("best_teacher", &BenchResult::best_teacher)
        .def_readonly("student_test_pnr", &BenchResult::student_test_pnr);

    m.def(
        "run_benchmark",
        [](const BenchConfig& config, std::uint64_t seed,
           const std::vector<System>& systems) {
            return run_benchmark(config, seed, systems);
        },
        py::arg("config"), py::arg("seed"),
        py::arg("systems") = std::vector<System>{System::Base, System::SingleKd,
                                                 System::AeKd, System::PileKd},
        "Generate data, train teachers, build both ensembles, distill one "
        "student per system, and score everything held-out.");

    m.def("mean_pnr_of", &mean_pnr_of, py::arg("dataset"), py::arg("scores"),
          "Mean PNR of per-group scores against the dataset's labels.");

    py::class_<SweepRow>(m, "SweepRow")
        .def_readonly("param", &SweepRow::param)
        .def_readonly("value", &SweepRow::value)
        .def_readonly("seed", &SweepRow::seed)
        .def_readonly("ensemble_train_pnr", &SweepRow::ensemble_train_pnr)
        .def_readonly("student_test_pnr", &SweepRow::student_test_pnr)
        .def_readonly("ok", &SweepRow::ok)
        .def_readonly("error", &SweepRow::error);

    m.def(
        "run_sweep",
        [](const BenchConfig& config, const std::string& param,
           const std::vector<double>& values, int num_seeds,
           std::uint64_t base_seed) {
            return run_sweep(config, param, values, num_seeds, base_seed);
        },
        py::arg("config"), py::arg("param"), py::arg("values"),
        py::arg("num_seeds") = 5, py::arg("base_seed") = 1,
        "Rerun the full pipeline per (value, seed); failures are recorded "
        "per row, not raised.");
}
