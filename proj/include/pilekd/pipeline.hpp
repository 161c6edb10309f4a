#ifndef PILEKD_PIPELINE_HPP_
#define PILEKD_PIPELINE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pilekd/ensemble.hpp"
#include "pilekd/student.hpp"
#include "pilekd/synth.hpp"
#include "pilekd/types.hpp"

namespace pilekd {

// The four training configurations compared by the benchmark: no teacher,
// the best single teacher's logits, the averaged-ensemble logits, and the
// iterative-ensemble logits as distillation targets.
enum class System { Base, SingleKd, AeKd, PileKd };

std::string to_string(System system);

// Defaults give the desk-scale benchmark: 200 train / 50 test queries of 20
// docs, 3 teachers trained on subsets, one student per system distilled from
// the respective targets and scored by held-out mean PNR.
struct BenchConfig {
  std::size_t train_queries = 200;
  std::size_t test_queries = 50;
  std::size_t docs_per_query = 20;
  std::size_t feature_dim = 16;
  std::size_t num_teachers = 3;
  double subset_fraction = 0.8;
  double label_noise = 0.15;

  // Capacity-limited teachers trained near convergence end up comparable in
  // quality with decorrelated errors, which is the regime where averaging
  // beats the single best teacher.
  std::vector<int> teacher_hidden = {12, 12};
  int teacher_epochs = 44;
  double teacher_lr = 1e-3;
  int teacher_batch_pairs = 64;

  // Distillation targets stop at label consistency rather than running the
  // blend to a fixed point: updating already-consistent pairs distorts the
  // calibration the student regresses onto.
  PileConfig pile = [] {
    PileConfig pc;
    pc.stop_policy = StopPolicy::OrderConsistent;
    return pc;
  }();

  // Students train close to convergence (many epochs, large batches) so a
  // run's outcome reflects its distillation targets rather than the noise of
  // a truncated optimization.
  Architecture student_arch = Architecture::Mlp;
  std::vector<int> student_hidden = {8};
  int student_epochs = 30;
  double student_lr = 1e-3;
  int student_batch_pairs = 128;
  double kd_alpha = 2.0;
};

struct BenchResult {
  double ae_train_pnr = 0.0;    // mean PNR of averaged-ensemble logits
  double pile_train_pnr = 0.0;  // mean PNR of iterative-ensemble logits
  double pile_mean_iterations = 0.0;
  std::vector<double> teacher_test_pnr;
  std::size_t best_teacher = 0;  // argmax of train-split PNR
  std::vector<std::pair<System, double>> student_test_pnr;
};

// Runs the full pipeline once: generate data, train teachers, build both
// ensembles on the train split, train one student per requested system with
// shared initialization and training seed, and evaluate everything on the
// held-out split. Deterministic given (config, seed).
BenchResult run_benchmark(const BenchConfig& config, std::uint64_t seed,
                          std::span<const System> systems);

// Mean PNR of per-group scores against the dataset's labels.
double mean_pnr_of(const Dataset& dataset,
                   const std::vector<std::vector<double>>& scores);

struct SweepRow {
  std::string param;
  double value = 0.0;
  std::uint64_t seed = 0;
  double ensemble_train_pnr = 0.0;  // iterative ensemble on train
  double student_test_pnr = 0.0;    // its distilled student on test
  bool ok = false;
  std::string error;  // category: message when ok is false
};

// Reruns the pipeline for every (value, seed index) combination, seeds
// base_seed + index so runs pair across values. param is "lambda" (pile
// update rate) or "teachers" (teacher count). Failures are recorded in the
// row and do not abort the remaining runs.
std::vector<SweepRow> run_sweep(const BenchConfig& base,
                                const std::string& param,
                                std::span<const double> values, int num_seeds,
                                std::uint64_t base_seed);

}  // namespace pilekd

#endif  // PILEKD_PIPELINE_HPP_
