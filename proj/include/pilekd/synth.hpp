#ifndef PILEKD_SYNTH_HPP_
#define PILEKD_SYNTH_HPP_

#include <cstdint>
#include <vector>

#include "pilekd/rng.hpp"
#include "pilekd/student.hpp"
#include "pilekd/types.hpp"

namespace pilekd {

enum class TeacherMode {
  // K scorers trained via the student module: teacher 1 on all queries,
  // teachers 2..K each on an independent subset_fraction sample of queries.
  Trained,
  // Training-free fixture: teacher logit = true score + Gaussian noise, plus
  // a +-bias_magnitude offset on a per-teacher random slice of queries.
  Perturbed,
};

struct SynthConfig {
  std::size_t num_queries = 100;
  // Docs per query, inclusive range; equal bounds give a fixed count.
  std::size_t docs_per_query_min = 10;
  std::size_t docs_per_query_max = 10;
  std::size_t feature_dim = 10;
  std::size_t num_teachers = 3;
  TeacherMode teacher_mode = TeacherMode::Trained;

  // Trained-mode knobs.
  double subset_fraction = 0.8;  // in (0, 1]
  std::vector<int> teacher_hidden = {16, 16};
  int teacher_epochs = 8;
  double teacher_lr = 1e-3;
  int teacher_batch_pairs = 64;

  // Perturbed-mode knobs.
  double noise_sigma = 0.1;
  double bias_magnitude = 0.5;
  double biased_query_fraction = 0.3;

  // Probability that a doc's grade is flipped to an adjacent grade.
  double label_noise = 0.0;  // in [0, 1)
  std::uint64_t seed = 0;
};

// Throws ConfigError on any out-of-range field.
void validate_config(const SynthConfig& config);

// A generated dataset plus the frozen scorer that defined true relevance.
// The dataset carries no teacher logits yet (num_teachers == 0).
struct GroundTruth {
  Dataset dataset;
  StudentParams oracle;
};

// Draws features from a standard normal, scores them with a freshly
// initialized frozen MLP(16,16) oracle, buckets the scores into grades 0..4
// at global quantiles 10/20/40/20/10%, then (when label_noise > 0) flips each
// grade to an adjacent one with probability label_noise. Deterministic given
// the rng state.
GroundTruth gen_ground_truth(const SynthConfig& config, Rng& rng);

// Flips each doc's grade to an adjacent one with the given probability (half
// down, half up; edge grades flip inward). One uniform draw per doc when
// noise > 0; no draws when noise == 0. Throws ConfigError outside [0, 1).
void apply_label_noise(Dataset& dataset, double noise, Rng& rng);

struct TeacherResult {
  Dataset dataset;  // copy of the input with all K teacher logits filled
  // Trained mode: the K scorers, teacher-index order (usable on held-out
  // data). Perturbed mode: empty.
  std::vector<StudentParams> teacher_models;
};

// Fills teacher logits for every doc of truth.dataset according to
// config.teacher_mode. Trained teachers fit the dataset's labels with the
// student module (no KD term); each teacher's subset choice, initialization,
// and training stream are seeded independently, so teachers may train in
// parallel with identical results. Requires that the dataset has no logits
// yet (num_teachers == 0).
TeacherResult make_teachers(const GroundTruth& truth, const SynthConfig& config,
                            Rng& rng);

// Scores every doc of `dataset` with `model`, grouped like the dataset.
std::vector<std::vector<double>> score_dataset(const StudentParams& model,
                                               const Dataset& dataset);

}  // namespace pilekd

#endif  // PILEKD_SYNTH_HPP_
