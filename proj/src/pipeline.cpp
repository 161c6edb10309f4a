#include "pilekd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "pilekd/errors.hpp"
#include "pilekd/metrics.hpp"
#include "pilekd/rng.hpp"

namespace pilekd {

namespace {

Dataset slice_groups(const Dataset& dataset, std::size_t begin,
                     std::size_t end) {
  Dataset out;
  out.feature_dim = dataset.feature_dim;
  out.num_teachers = dataset.num_teachers;
  out.groups.assign(dataset.groups.begin() + static_cast<std::ptrdiff_t>(begin),
                    dataset.groups.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

SynthConfig synth_config_of(const BenchConfig& config) {
  SynthConfig sc;
  sc.num_queries = config.train_queries + config.test_queries;
  sc.docs_per_query_min = config.docs_per_query;
  sc.docs_per_query_max = config.docs_per_query;
  sc.feature_dim = config.feature_dim;
  sc.num_teachers = config.num_teachers;
  sc.teacher_mode = TeacherMode::Trained;
  sc.subset_fraction = config.subset_fraction;
  sc.teacher_hidden = config.teacher_hidden;
  sc.teacher_epochs = config.teacher_epochs;
  sc.teacher_lr = config.teacher_lr;
  sc.teacher_batch_pairs = config.teacher_batch_pairs;
  sc.label_noise = config.label_noise;
  return sc;
}

std::vector<std::vector<double>> teacher_column(const Dataset& dataset,
                                                std::size_t k) {
  std::vector<std::vector<double>> out;
  out.reserve(dataset.groups.size());
  for (const auto& group : dataset.groups) {
    std::vector<double> column;
    column.reserve(group.docs.size());
    for (const auto& doc : group.docs) column.push_back(doc.teacher_logits[k]);
    out.push_back(std::move(column));
  }
  return out;
}

}  // namespace

std::string to_string(System system) {
  switch (system) {
    case System::Base: return "base";
    case System::SingleKd: return "single-kd";
    case System::AeKd: return "ae-kd";
    case System::PileKd: return "pile-kd";
  }
  return "?";
}

double mean_pnr_of(const Dataset& dataset,
                   const std::vector<std::vector<double>>& scores) {
  if (scores.size() != dataset.groups.size()) {
    throw AlignmentError("scores cover " + std::to_string(scores.size()) +
                         " groups, dataset has " +
                         std::to_string(dataset.groups.size()));
  }
  std::vector<QueryScores> queries;
  queries.reserve(dataset.groups.size());
  for (std::size_t g = 0; g < dataset.groups.size(); ++g) {
    queries.push_back({dataset.groups[g].query_id, scores[g],
                       dataset.groups[g].label_values()});
  }
  return pnr_mean(queries).mean_pnr;
}

BenchResult run_benchmark(const BenchConfig& config, std::uint64_t seed,
                          std::span<const System> systems) {
  if (config.train_queries < 1 || config.test_queries < 1) {
    throw ConfigError("benchmark needs at least one train and one test query");
  }

  // Label noise corrupts only the training split: teachers and students
  // learn from flipped grades, while the held-out split keeps the oracle's
  // clean grades so mean PNR measures real ranking quality rather than
  // agreement with flipped labels.
  SynthConfig sc = synth_config_of(config);
  sc.label_noise = 0.0;
  Rng rng(derive_seed(seed, 0));
  GroundTruth truth = gen_ground_truth(sc, rng);

  GroundTruth train_truth;
  train_truth.oracle = truth.oracle;
  train_truth.dataset = slice_groups(truth.dataset, 0, config.train_queries);
  apply_label_noise(train_truth.dataset, config.label_noise, rng);
  const Dataset test =
      slice_groups(truth.dataset, config.train_queries,
                   config.train_queries + config.test_queries);

  TeacherResult teachers = make_teachers(train_truth, sc, rng);
  const Dataset& train_data = teachers.dataset;

  BenchResult result;
  result.teacher_test_pnr.reserve(teachers.teacher_models.size());
  // The single-KD baseline picks its teacher by train-split PNR; choosing on
  // the test split would leak the evaluation data into system selection.
  std::vector<double> teacher_train_pnr;
  for (const auto& model : teachers.teacher_models) {
    result.teacher_test_pnr.push_back(
        mean_pnr_of(test, score_dataset(model, test)));
    teacher_train_pnr.push_back(
        mean_pnr_of(train_data, score_dataset(model, train_data)));
  }
  result.best_teacher = static_cast<std::size_t>(
      std::max_element(teacher_train_pnr.begin(), teacher_train_pnr.end()) -
      teacher_train_pnr.begin());

  // Both ensembles over the train split.
  const std::uint64_t pile_base = derive_seed(seed, 1);
  std::vector<std::vector<double>> ae_logits;
  std::vector<std::vector<double>> pile_logits;
  ae_logits.reserve(train_data.groups.size());
  pile_logits.reserve(train_data.groups.size());
  double iteration_sum = 0.0;
  for (std::size_t g = 0; g < train_data.groups.size(); ++g) {
    ae_logits.push_back(average_ensemble(train_data.groups[g]));
    PileConfig pc = config.pile;
    pc.seed = derive_seed(pile_base, g);
    EnsembleOutput out = pile_ensemble(train_data.groups[g], pc);
    iteration_sum += static_cast<double>(out.iterations_used);
    pile_logits.push_back(std::move(out.logits));
  }
  result.ae_train_pnr = mean_pnr_of(train_data, ae_logits);
  result.pile_train_pnr = mean_pnr_of(train_data, pile_logits);
  result.pile_mean_iterations =
      iteration_sum / static_cast<double>(train_data.groups.size());

  // One student per system from a shared initialization and training seed, so
  // the only difference between systems is the distillation target.
  Rng init_rng(derive_seed(seed, 2));
  const StudentParams initial =
      init_params(config.student_arch, config.student_hidden,
                  config.feature_dim, init_rng);
  TrainConfig tc;
  tc.learning_rate = config.student_lr;
  tc.epochs = config.student_epochs;
  tc.batch_pairs = config.student_batch_pairs;
  tc.kd_alpha = config.kd_alpha;
  tc.seed = derive_seed(seed, 3);

  for (System system : systems) {
    std::optional<std::vector<std::vector<double>>> targets;
    switch (system) {
      case System::Base: targets = std::nullopt; break;
      case System::SingleKd:
        targets = teacher_column(train_data, result.best_teacher);
        break;
      case System::AeKd: targets = ae_logits; break;
      case System::PileKd: targets = pile_logits; break;
    }
    TrainResult trained = train(train_data, targets, initial, tc);
    const double test_pnr =
        mean_pnr_of(test, score_dataset(trained.params, test));
    result.student_test_pnr.emplace_back(system, test_pnr);
  }
  return result;
}

std::vector<SweepRow> run_sweep(const BenchConfig& base,
                                const std::string& param,
                                std::span<const double> values, int num_seeds,
                                std::uint64_t base_seed) {
  if (param != "lambda" && param != "teachers") {
    throw ConfigError("unknown sweep parameter \"" + param +
                      "\" (expected lambda or teachers)");
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (num_seeds < 1) throw ConfigError("sweep needs at least one seed");

  std::vector<SweepRow> rows;
  const System pile_only[] = {System::PileKd};
  for (double value : values) {
    BenchConfig config = base;
    if (param == "lambda") {
      config.pile.lambda = value;
    } else {
      if (value < 1.0 || value != std::floor(value)) {
        throw ConfigError("teacher counts must be positive integers");
      }
      config.num_teachers = static_cast<std::size_t>(value);
    }
    for (int s = 0; s < num_seeds; ++s) {
      SweepRow row;
      row.param = param;
      row.value = value;
      row.seed = base_seed + static_cast<std::uint64_t>(s);
      try {
        const BenchResult bench = run_benchmark(config, row.seed, pile_only);
        row.ensemble_train_pnr = bench.pile_train_pnr;
        row.student_test_pnr = bench.student_test_pnr.front().second;
        row.ok = true;
      } catch (const Error& e) {
        row.ok = false;
        row.error = e.category() + ": " + e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace pilekd
