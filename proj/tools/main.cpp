// pilekd command-line tool: synth -> ensemble -> distill -> evaluate, plus
// parameter sweeps over the whole pipeline. Commands compose via files so
// each stage can be rerun or swapped independently.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pilekd/ensemble.hpp"
#include "pilekd/errors.hpp"
#include "pilekd/io.hpp"
#include "pilekd/metrics.hpp"
#include "pilekd/pipeline.hpp"
#include "pilekd/rng.hpp"
#include "pilekd/student.hpp"
#include "pilekd/synth.hpp"
#include "pilekd/types.hpp"

namespace {

using namespace pilekd;

// Flag combinations that pass CLI11 but are still unusable.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

int exit_code_for(const std::string& category) {
  if (category == "io") return 74;
  if (category == "training") return 70;
  return 65;  // parse, validation, alignment, config, invalid input/state
}

CLI::Validator unit_interval_open_low() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          const double v = std::stod(s);
          if (v > 0.0 && v <= 1.0) return {};
        } catch (...) {
        }
        return "value must be in (0, 1]";
      },
      "FLOAT in (0,1]");
}

CLI::Validator fraction_closed() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          const double v = std::stod(s);
          if (v >= 0.0 && v <= 1.0) return {};
        } catch (...) {
        }
        return "value must be in [0, 1]";
      },
      "FLOAT in [0,1]");
}

CLI::Validator noise_range() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          const double v = std::stod(s);
          if (v >= 0.0 && v < 1.0) return {};
        } catch (...) {
        }
        return "value must be in [0, 1)";
      },
      "FLOAT in [0,1)");
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::size_t queries = 100;
  std::size_t docs = 10;
  std::size_t docs_max = 0;  // 0: same as docs
  std::size_t dim = 10;
  std::size_t teachers = 3;
  std::string mode = "trained";
  double subset = 0.8;
  int teacher_epochs = 8;
  double teacher_lr = 1e-3;
  double sigma = 0.1;
  double bias = 0.5;
  double biased_frac = 0.3;
  double label_noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string oracle_out;
};

void run_synth(const SynthArgs& args) {
  SynthConfig config;
  config.num_queries = args.queries;
  config.docs_per_query_min = args.docs;
  config.docs_per_query_max = args.docs_max == 0 ? args.docs : args.docs_max;
  config.feature_dim = args.dim;
  config.num_teachers = args.teachers;
  config.teacher_mode =
      args.mode == "trained" ? TeacherMode::Trained : TeacherMode::Perturbed;
  config.subset_fraction = args.subset;
  config.teacher_epochs = args.teacher_epochs;
  config.teacher_lr = args.teacher_lr;
  config.noise_sigma = args.sigma;
  config.bias_magnitude = args.bias;
  config.biased_query_fraction = args.biased_frac;
  config.label_noise = args.label_noise;
  config.seed = args.seed;

  Rng rng(config.seed);
  const GroundTruth truth = gen_ground_truth(config, rng);
  const TeacherResult teachers = make_teachers(truth, config, rng);

  write_groups(teachers.dataset, args.out);
  const std::string oracle_path =
      args.oracle_out.empty() ? args.out + ".oracle" : args.oracle_out;
  write_model(truth.oracle, oracle_path);

  std::size_t docs = 0;
  std::size_t grades[kNumGrades] = {0, 0, 0, 0, 0};
  for (const auto& group : teachers.dataset.groups) {
    docs += group.docs.size();
    for (const auto& doc : group.docs) ++grades[doc.label.value];
  }
  std::cout << "groups: " << teachers.dataset.groups.size() << "\n"
            << "docs: " << docs << "\n"
            << "teachers: " << teachers.dataset.num_teachers << "\n"
            << "grades:";
  for (std::size_t count : grades) std::cout << ' ' << count;
  std::cout << "\nwrote: " << args.out << "\nwrote: " << oracle_path << "\n";
}

// ---------------------------------------------------------------------------
// ensemble

struct EnsembleArgs {
  std::string in;
  std::string method = "pile";
  double lambda = 0.9;
  std::string stop = "fixedpoint";
  double eps = 1e-4;
  double max_iters_exp = 1.5;
  std::int64_t max_iters = -1;
  std::string pair = "uniform";
  std::size_t teacher_index = 0;
  std::uint64_t seed = 0;
  std::string out;
  bool trace = false;
};

EnsembleOutput teacher_as_ensemble(const QueryGroup& group, std::size_t k,
                                   std::size_t num_teachers) {
  if (k >= num_teachers) {
    throw InvalidInputError("teacher index " + std::to_string(k) +
                            " out of range, dataset has " +
                            std::to_string(num_teachers) + " teachers");
  }
  EnsembleOutput out;
  out.logits.reserve(group.docs.size());
  for (const auto& doc : group.docs) out.logits.push_back(doc.teacher_logits[k]);
  out.final_weights = WeightMatrix(group.docs.size(), num_teachers, 0);
  for (std::size_t i = 0; i < group.docs.size(); ++i) {
    out.final_weights.at(i, k) = 1;
  }
  out.converged = true;
  return out;
}

void run_ensemble(const EnsembleArgs& args) {
  const Dataset dataset = read_groups(args.in);
  require_valid(dataset);
  if (dataset.num_teachers == 0) {
    throw InvalidInputError("dataset " + args.in + " carries no teacher logits");
  }

  PileConfig pc;
  pc.lambda = args.lambda;
  pc.stop_policy = args.stop == "order" ? StopPolicy::OrderConsistent
                                        : StopPolicy::FixedPoint;
  pc.epsilon = args.eps;
  pc.max_iters_exponent = args.max_iters_exp;
  if (args.max_iters >= 0) {
    pc.max_iters_override = static_cast<std::uint64_t>(args.max_iters);
  }
  pc.pair_policy =
      args.pair == "sweep" ? PairPolicy::Sweep : PairPolicy::UniformRandom;
  pc.trace = args.trace;

  std::vector<NamedEnsemble> outputs;
  outputs.reserve(dataset.groups.size());
  double iteration_sum = 0.0;
  std::size_t converged = 0;
  for (std::size_t g = 0; g < dataset.groups.size(); ++g) {
    const QueryGroup& group = dataset.groups[g];
    EnsembleOutput out;
    if (args.method == "ae") {
      out.logits = average_ensemble(group);
      out.final_weights = WeightMatrix(group.docs.size(),
                                       dataset.num_teachers, 1);
      out.converged = true;
    } else if (args.method == "teacher") {
      out = teacher_as_ensemble(group, args.teacher_index,
                                dataset.num_teachers);
    } else {
      PileConfig group_config = pc;
      group_config.seed = derive_seed(args.seed, g);
      out = pile_ensemble(group, group_config);
    }
    iteration_sum += static_cast<double>(out.iterations_used);
    converged += out.converged ? 1 : 0;
    outputs.emplace_back(group.query_id, std::move(out));
  }

  if (args.trace && args.method == "pile") {
    nlohmann::json lines = nlohmann::json::array();
    std::ofstream trace_file(args.out + ".trace", std::ios::binary);
    if (!trace_file) throw IoError("cannot open for writing: " + args.out + ".trace");
    for (const auto& [query_id, out] : outputs) {
      nlohmann::json snapshots = nlohmann::json::array();
      if (out.trace) {
        for (const auto& state : *out.trace) {
          nlohmann::json weights = nlohmann::json::array();
          for (std::size_t i = 0; i < state.weights.rows; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t k = 0; k < state.weights.cols; ++k) {
              row.push_back(static_cast<int>(state.weights.at(i, k)));
            }
            weights.push_back(std::move(row));
          }
          snapshots.push_back({{"iteration", state.iteration},
                               {"logits", state.logits},
                               {"weights", std::move(weights)}});
        }
      }
      trace_file << nlohmann::json{{"query_id", query_id},
                                   {"snapshots", std::move(snapshots)}}
                        .dump()
                 << "\n";
    }
  }

  // Strip traces before persisting; the file schema stores final state only.
  for (auto& [query_id, out] : outputs) out.trace.reset();
  write_ensemble(outputs, args.out);

  std::vector<QueryScores> queries;
  queries.reserve(outputs.size());
  for (std::size_t g = 0; g < outputs.size(); ++g) {
    queries.push_back({outputs[g].first, outputs[g].second.logits,
                       dataset.groups[g].label_values()});
  }
  std::cout << "groups: " << dataset.groups.size() << "\n"
            << "method: " << args.method << "\n";
  try {
    std::cout << "mean_pnr: " << format_short(pnr_mean(queries).mean_pnr)
              << "\n";
  } catch (const InvalidInputError&) {
    std::cout << "mean_pnr: undefined (no query has a discordant pair)\n";
  }
  std::cout << "mean_iterations: "
            << format_short(iteration_sum /
                            static_cast<double>(dataset.groups.size()))
            << "\n"
            << "converged: " << converged << "/" << dataset.groups.size()
            << "\n"
            << "wrote: " << args.out << "\n";
  if (args.trace && args.method == "pile") {
    std::cout << "wrote: " << args.out << ".trace\n";
  }
}

// ---------------------------------------------------------------------------
// distill

struct DistillArgs {
  std::string in;
  std::string targets = "none";
  double alpha = 1.0;
  std::string arch = "mlp";
  std::vector<int> hidden = {8};
  double lr = 0.0;  // 0: pick default_learning_rate(arch)
  int epochs = 10;
  int batch = 64;
  std::uint64_t seed = 0;
  std::string out_model;
  std::string out_log;
};

std::vector<std::vector<double>> targets_from_ensemble_file(
    const Dataset& dataset, const std::string& path) {
  const std::vector<NamedEnsemble> outputs = read_ensemble(path);
  if (outputs.size() != dataset.groups.size()) {
    throw AlignmentError("targets file has " + std::to_string(outputs.size()) +
                         " groups, dataset has " +
                         std::to_string(dataset.groups.size()));
  }
  std::vector<std::vector<double>> targets;
  targets.reserve(outputs.size());
  for (std::size_t g = 0; g < outputs.size(); ++g) {
    const auto& [query_id, out] = outputs[g];
    if (query_id != dataset.groups[g].query_id) {
      throw AlignmentError("group " + std::to_string(g) + ": targets are for \"" +
                           query_id + "\", dataset has \"" +
                           dataset.groups[g].query_id + "\"");
    }
    if (out.logits.size() != dataset.groups[g].docs.size()) {
      throw AlignmentError(
          "group " + std::to_string(g) + " (" + query_id + "): " +
          std::to_string(out.logits.size()) + " target logits for " +
          std::to_string(dataset.groups[g].docs.size()) + " docs");
    }
    targets.push_back(out.logits);
  }
  return targets;
}

void run_distill(const DistillArgs& args) {
  const Dataset dataset = read_groups(args.in);
  require_valid(dataset);

  std::optional<std::vector<std::vector<double>>> targets;
  if (args.targets != "none") {
    targets = targets_from_ensemble_file(dataset, args.targets);
  }

  const Architecture arch =
      args.arch == "linear" ? Architecture::Linear : Architecture::Mlp;
  Rng init_rng(derive_seed(args.seed, 0));
  StudentParams initial =
      init_params(arch, args.hidden, dataset.feature_dim, init_rng);

  TrainConfig tc;
  tc.learning_rate = args.lr > 0.0 ? args.lr : default_learning_rate(arch);
  tc.epochs = args.epochs;
  tc.batch_pairs = args.batch;
  tc.kd_alpha = args.alpha;
  tc.seed = derive_seed(args.seed, 1);

  const TrainResult result = train(dataset, targets, std::move(initial), tc);
  write_model(result.params, args.out_model);

  if (!args.out_log.empty()) {
    std::string log = "epoch\tloss\n0\t" + format_double(result.log.initial_loss) + "\n";
    for (std::size_t e = 0; e < result.log.epoch_loss.size(); ++e) {
      log += std::to_string(e + 1) + "\t" +
             format_double(result.log.epoch_loss[e]) + "\n";
    }
    std::ofstream log_file(args.out_log, std::ios::binary | std::ios::trunc);
    if (!log_file) throw IoError("cannot open for writing: " + args.out_log);
    log_file << log;
  }

  std::cout << "groups: " << dataset.groups.size() << "\n"
            << "targets: " << (targets ? args.targets : "none") << "\n"
            << "initial_loss: " << format_short(result.log.initial_loss) << "\n"
            << "final_loss: "
            << format_short(result.log.epoch_loss.empty()
                                ? result.log.initial_loss
                                : result.log.epoch_loss.back())
            << "\n"
            << "wrote: " << args.out_model << "\n";
  if (!args.out_log.empty()) std::cout << "wrote: " << args.out_log << "\n";
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string model;
  std::string test;
  std::vector<std::string> metrics = {"pnr"};
  int dcg_k = 0;  // 0: no cutoff
  std::string gain = "linear";
  std::string out_report;
};

void run_evaluate(const EvaluateArgs& args) {
  for (const auto& metric : args.metrics) {
    if (metric != "pnr" && metric != "dcg") {
      throw UsageError("unknown metric \"" + metric +
                       "\" (expected pnr and/or dcg)");
    }
  }
  const StudentParams model = read_model(args.model);
  const Dataset dataset = read_groups(args.test);
  require_valid(dataset);
  if (dataset.feature_dim != model.feature_dim) {
    throw AlignmentError("model expects feature_dim " +
                         std::to_string(model.feature_dim) +
                         ", dataset has " +
                         std::to_string(dataset.feature_dim));
  }

  const std::vector<std::vector<double>> scores = score_dataset(model, dataset);
  std::vector<QueryScores> queries;
  queries.reserve(dataset.groups.size());
  for (std::size_t g = 0; g < dataset.groups.size(); ++g) {
    queries.push_back({dataset.groups[g].query_id, scores[g],
                       dataset.groups[g].label_values()});
  }

  MetricReport report;
  bool pnr_defined = true;
  try {
    report = pnr_mean(queries);
  } catch (const InvalidInputError&) {
    // Nothing evaluable (e.g. a perfect model); report the skips instead.
    pnr_defined = false;
    report.mean_pnr = 0.0;
    for (const auto& query : queries) {
      const auto pnr = pnr_query(query.scores, query.labels);
      report.per_query_pnr.emplace_back(query.query_id, pnr);
      if (query.labels.size() < 2 ||
          std::all_of(query.labels.begin(), query.labels.end(),
                      [&](int l) { return l == query.labels.front(); })) {
        ++report.skipped_no_pairs;
      } else {
        ++report.skipped_no_discordant;
      }
    }
  }

  const bool want_dcg = std::find(args.metrics.begin(), args.metrics.end(),
                                  "dcg") != args.metrics.end();
  if (want_dcg) {
    const GainScheme scheme =
        args.gain == "exp" ? GainScheme::Exponential : GainScheme::Linear;
    double dcg_sum = 0.0;
    for (std::size_t g = 0; g < dataset.groups.size(); ++g) {
      std::vector<std::size_t> order(scores[g].size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return scores[g][a] > scores[g][b];
                       });
      std::vector<int> ranked_labels;
      ranked_labels.reserve(order.size());
      for (std::size_t i : order) {
        ranked_labels.push_back(dataset.groups[g].docs[i].label.value);
      }
      const std::vector<double> gains = gains_from_labels(ranked_labels, scheme);
      dcg_sum += dcg(gains, args.dcg_k > 0 ? std::optional<int>(args.dcg_k)
                                           : std::nullopt);
    }
    report.dcg_at_k = dcg_sum / static_cast<double>(dataset.groups.size());
  }

  report.parameters.emplace_back("model_path", args.model);
  report.parameters.emplace_back("test_path", args.test);
  report.parameters.emplace_back("pnr_defined", pnr_defined ? "true" : "false");
  if (want_dcg) {
    report.parameters.emplace_back("gain", args.gain);
    report.parameters.emplace_back(
        "dcg_k", args.dcg_k > 0 ? std::to_string(args.dcg_k) : "all");
  }

  if (!args.out_report.empty()) write_report(report, args.out_report);

  std::cout << "queries: " << dataset.groups.size() << "\n";
  if (pnr_defined) {
    std::cout << "mean_pnr: " << format_short(report.mean_pnr) << "\n";
  } else {
    std::cout << "mean_pnr: undefined (0 evaluable queries)\n";
  }
  std::cout << "skipped: " << report.skipped_no_discordant
            << " no-discordant, " << report.skipped_no_pairs << " no-pairs\n";
  if (want_dcg) {
    std::cout << "mean_dcg: " << format_short(*report.dcg_at_k) << "\n";
  }
  if (!args.out_report.empty()) {
    std::cout << "wrote: " << args.out_report << "\n";
  }
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string param;
  std::vector<double> values;
  int seeds = 5;
  std::uint64_t base_seed = 0;
  std::string out;
  BenchConfig bench;
  std::string stop = "order";
};

void run_sweep_cmd(const SweepArgs& args) {
  if (args.values.empty()) {
    throw UsageError("--values must list at least one value");
  }
  if (args.param == "lambda") {
    for (double v : args.values) {
      if (!(v > 0.0 && v <= 1.0)) {
        throw UsageError("--values for lambda must lie in (0, 1]");
      }
    }
  } else if (args.param == "teachers") {
    for (double v : args.values) {
      if (v < 1.0 || v != std::floor(v)) {
        throw UsageError("--values for teachers must be positive integers");
      }
    }
  }

  const std::vector<SweepRow> rows =
      run_sweep(args.bench, args.param, args.values, args.seeds,
                args.base_seed);

  std::string table = "param\tvalue\tseed\tensemble_pnr\tstudent_pnr\tstatus\n";
  for (const auto& row : rows) {
    table += row.param + "\t" + format_short(row.value) + "\t" +
             std::to_string(row.seed) + "\t";
    if (row.ok) {
      table += format_double(row.ensemble_train_pnr) + "\t" +
               format_double(row.student_test_pnr) + "\tok\n";
    } else {
      std::string reason = row.error;
      std::replace(reason.begin(), reason.end(), '\t', ' ');
      table += "-\t-\terror: " + reason + "\n";
    }
  }
  std::cout << table;
  if (!args.out.empty()) {
    std::ofstream out_file(args.out, std::ios::binary | std::ios::trunc);
    if (!out_file) throw IoError("cannot open for writing: " + args.out);
    out_file << table;
    std::cout << "wrote: " << args.out << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-teacher logit ensembling and ranking distillation toolkit"};
  app.set_version_flag("--version", "pilekd 0.1.0");
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth_cmd = app.add_subcommand(
      "synth", "Generate a synthetic ranking dataset with teacher logits");
  synth_cmd->add_option("--queries", synth_args.queries, "Number of queries")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--docs", synth_args.docs, "Docs per query")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth_cmd
      ->add_option("--docs-max", synth_args.docs_max,
                   "Upper bound for a random docs-per-query range")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--dim", synth_args.dim, "Feature dimension")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--teachers", synth_args.teachers, "Number of teachers")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth_cmd
      ->add_option("--mode", synth_args.mode,
                   "Teacher construction: trained | perturbed")
      ->capture_default_str()
      ->check(CLI::IsMember({"trained", "perturbed"}));
  synth_cmd
      ->add_option("--subset", synth_args.subset,
                   "Query fraction seen by teachers 2..K (trained mode)")
      ->capture_default_str()
      ->check(unit_interval_open_low());
  synth_cmd
      ->add_option("--teacher-epochs", synth_args.teacher_epochs,
                   "Training epochs per teacher (trained mode)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  synth_cmd
      ->add_option("--teacher-lr", synth_args.teacher_lr,
                   "Teacher learning rate (trained mode)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth_cmd
      ->add_option("--sigma", synth_args.sigma,
                   "Teacher noise sigma (perturbed mode)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  synth_cmd
      ->add_option("--bias", synth_args.bias,
                   "Bias magnitude on biased queries (perturbed mode)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  synth_cmd
      ->add_option("--biased-frac", synth_args.biased_frac,
                   "Fraction of queries biased per teacher (perturbed mode)")
      ->capture_default_str()
      ->check(fraction_closed());
  synth_cmd
      ->add_option("--label-noise", synth_args.label_noise,
                   "Probability of flipping a grade to an adjacent one")
      ->capture_default_str()
      ->check(noise_range());
  synth_cmd->add_option("--seed", synth_args.seed, "RNG seed")
      ->capture_default_str()
      ->envname("PILEKD_SEED");
  synth_cmd->add_option("--out", synth_args.out, "Output dataset path")
      ->required();
  synth_cmd->add_option("--oracle-out", synth_args.oracle_out,
                        "Oracle model path (default: <out>.oracle)");

  EnsembleArgs ensemble_args;
  CLI::App* ensemble_cmd = app.add_subcommand(
      "ensemble", "Combine teacher logits into per-doc ensemble logits");
  ensemble_cmd->add_option("--in", ensemble_args.in, "Input dataset")
      ->required();
  ensemble_cmd
      ->add_option("--method", ensemble_args.method,
                   "ae | pile | teacher (copy one teacher's logits)")
      ->capture_default_str()
      ->check(CLI::IsMember({"ae", "pile", "teacher"}));
  ensemble_cmd->add_option("--lambda", ensemble_args.lambda, "Update rate")
      ->capture_default_str()
      ->check(unit_interval_open_low());
  ensemble_cmd
      ->add_option("--stop", ensemble_args.stop,
                   "Stopping rule: order | fixedpoint")
      ->capture_default_str()
      ->check(CLI::IsMember({"order", "fixedpoint"}));
  ensemble_cmd
      ->add_option("--eps", ensemble_args.eps,
                   "Fixed-point pending-update threshold")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  ensemble_cmd
      ->add_option("--max-iters-exp", ensemble_args.max_iters_exp,
                   "Iteration cap exponent: floor(N^exp)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  ensemble_cmd
      ->add_option("--max-iters", ensemble_args.max_iters,
                   "Hard ceiling on the iteration cap")
      ->check(CLI::NonNegativeNumber);
  ensemble_cmd
      ->add_option("--pair", ensemble_args.pair,
                   "Pair selection: uniform | sweep")
      ->capture_default_str()
      ->check(CLI::IsMember({"uniform", "sweep"}));
  ensemble_cmd
      ->add_option("--teacher-index", ensemble_args.teacher_index,
                   "Teacher to copy when --method teacher")
      ->capture_default_str();
  ensemble_cmd->add_option("--seed", ensemble_args.seed, "RNG seed")
      ->capture_default_str()
      ->envname("PILEKD_SEED");
  ensemble_cmd->add_option("--out", ensemble_args.out, "Output ensemble path")
      ->required();
  ensemble_cmd->add_flag("--trace", ensemble_args.trace,
                         "Also write per-iteration snapshots to <out>.trace");

  DistillArgs distill_args;
  CLI::App* distill_cmd = app.add_subcommand(
      "distill", "Train a student scorer, optionally against target logits");
  distill_cmd->add_option("--in", distill_args.in, "Training dataset")
      ->required();
  distill_cmd
      ->add_option("--targets", distill_args.targets,
                   "Ensemble file with distillation targets, or 'none'")
      ->capture_default_str();
  distill_cmd
      ->add_option("--alpha", distill_args.alpha,
                   "Weight of the distillation term")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  distill_cmd
      ->add_option("--arch", distill_args.arch, "Student: linear | mlp")
      ->capture_default_str()
      ->check(CLI::IsMember({"linear", "mlp"}));
  distill_cmd
      ->add_option("--hidden", distill_args.hidden,
                   "Hidden layer sizes for --arch mlp")
      ->capture_default_str()
      ->delimiter(',');
  distill_cmd
      ->add_option("--lr", distill_args.lr,
                   "Learning rate (default: 1e-2 linear, 1e-3 mlp)")
      ->check(CLI::PositiveNumber);
  distill_cmd->add_option("--epochs", distill_args.epochs, "Training epochs")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  distill_cmd->add_option("--batch", distill_args.batch, "Pairs per minibatch")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  distill_cmd->add_option("--seed", distill_args.seed, "RNG seed")
      ->capture_default_str()
      ->envname("PILEKD_SEED");
  distill_cmd
      ->add_option("--out-model", distill_args.out_model, "Output model path")
      ->required();
  distill_cmd->add_option("--out-log", distill_args.out_log,
                          "Optional per-epoch loss table (TSV)");

  EvaluateArgs evaluate_args;
  CLI::App* evaluate_cmd = app.add_subcommand(
      "evaluate", "Score a test dataset with a model and report metrics");
  evaluate_cmd->add_option("--model", evaluate_args.model, "Model file")
      ->required();
  evaluate_cmd->add_option("--test", evaluate_args.test, "Test dataset")
      ->required();
  evaluate_cmd
      ->add_option("--metrics", evaluate_args.metrics,
                   "Metrics to compute: pnr,dcg")
      ->capture_default_str()
      ->delimiter(',');
  evaluate_cmd
      ->add_option("--dcg-k", evaluate_args.dcg_k,
                   "DCG cutoff (0 = whole list)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  evaluate_cmd
      ->add_option("--gain", evaluate_args.gain,
                   "DCG gain: linear (G=y) | exp (G=2^y-1)")
      ->capture_default_str()
      ->check(CLI::IsMember({"linear", "exp"}));
  evaluate_cmd->add_option("--out-report", evaluate_args.out_report,
                           "Output report path");

  SweepArgs sweep_args;
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "Rerun the whole pipeline across parameter values and seeds");
  sweep_cmd->set_config("--pipeline-config", "",
                        "Read benchmark settings from a TOML file");
  sweep_cmd
      ->add_option("--param", sweep_args.param, "Swept parameter")
      ->required()
      ->check(CLI::IsMember({"lambda", "teachers"}));
  sweep_cmd
      ->add_option("--values", sweep_args.values, "Comma-separated values")
      ->required()
      ->delimiter(',');
  sweep_cmd->add_option("--seeds", sweep_args.seeds, "Seeds per value")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--seed", sweep_args.base_seed, "Base seed")
      ->capture_default_str()
      ->envname("PILEKD_SEED");
  sweep_cmd->add_option("--out", sweep_args.out, "Output table path (TSV)");
  sweep_cmd
      ->add_option("--train-queries", sweep_args.bench.train_queries,
                   "Training queries per run")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sweep_cmd
      ->add_option("--test-queries", sweep_args.bench.test_queries,
                   "Held-out queries per run")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sweep_cmd
      ->add_option("--docs", sweep_args.bench.docs_per_query, "Docs per query")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--dim", sweep_args.bench.feature_dim,
                        "Feature dimension")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sweep_cmd
      ->add_option("--teachers", sweep_args.bench.num_teachers,
                   "Teacher count (base value unless swept)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sweep_cmd
      ->add_option("--subset", sweep_args.bench.subset_fraction,
                   "Query fraction for teachers 2..K")
      ->capture_default_str()
      ->check(unit_interval_open_low());
  sweep_cmd
      ->add_option("--label-noise", sweep_args.bench.label_noise,
                   "Grade flip probability")
      ->capture_default_str()
      ->check(noise_range());
  sweep_cmd
      ->add_option("--teacher-epochs", sweep_args.bench.teacher_epochs,
                   "Training epochs per teacher")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sweep_cmd
      ->add_option("--lambda", sweep_args.bench.pile.lambda,
                   "Update rate (base value unless swept)")
      ->capture_default_str()
      ->check(unit_interval_open_low());
  sweep_cmd
      ->add_option("--stop", sweep_args.stop,
                   "Stopping rule: order | fixedpoint")
      ->capture_default_str()
      ->check(CLI::IsMember({"order", "fixedpoint"}));
  sweep_cmd
      ->add_option("--alpha", sweep_args.bench.kd_alpha,
                   "Distillation weight for the student")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sweep_cmd
      ->add_option("--student-epochs", sweep_args.bench.student_epochs,
                   "Student training epochs")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 64;
  }

  try {
    if (*synth_cmd) {
      run_synth(synth_args);
    } else if (*ensemble_cmd) {
      run_ensemble(ensemble_args);
    } else if (*distill_cmd) {
      run_distill(distill_args);
    } else if (*evaluate_cmd) {
      run_evaluate(evaluate_args);
    } else if (*sweep_cmd) {
      sweep_args.bench.pile.stop_policy = sweep_args.stop == "order"
                                              ? StopPolicy::OrderConsistent
                                              : StopPolicy::FixedPoint;
      run_sweep_cmd(sweep_args);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 64;
  } catch (const Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 70;
  }
  return 0;
}
