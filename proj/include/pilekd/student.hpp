#ifndef PILEKD_STUDENT_HPP_
#define PILEKD_STUDENT_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pilekd/rng.hpp"
#include "pilekd/types.hpp"

namespace pilekd {

enum class Architecture {
  Linear,  // dot(w, x) + b
  Mlp,     // affine layers with tanh on hidden units, scalar linear output
};

// Parameters of the small scorer f(q, d; theta). Weights are stored flat,
// layer by layer from input to output; within a layer the weight matrix comes
// first (row-major, [out][in]) followed by the biases.
struct StudentParams {
  Architecture architecture = Architecture::Linear;
  std::vector<int> hidden_sizes;  // empty for Linear
  std::size_t feature_dim = 0;
  std::vector<double> weights;

  bool operator==(const StudentParams&) const = default;
};

// Layer sizes from input to the scalar output, e.g. {d, 8, 1} for Mlp(8).
std::vector<std::size_t> layer_sizes(const StudentParams& params);

std::size_t weight_count(Architecture architecture,
                         std::span<const int> hidden_sizes,
                         std::size_t feature_dim);

// Fresh parameters with per-layer uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
// weights and zero biases.
StudentParams init_params(Architecture architecture,
                          std::vector<int> hidden_sizes,
                          std::size_t feature_dim, Rng& rng);

double default_learning_rate(Architecture architecture);

double score(const StudentParams& params, std::span<const double> features);

// Scores a doc and returns d(score)/d(theta) alongside.
void score_with_grad(const StudentParams& params,
                     std::span<const double> features, double& score_out,
                     std::vector<double>& grad_out);

// Logistic pairwise loss log(1 + exp(-(s_hi - s_lo))), stable for any margin.
double pairwise_loss(double s_hi, double s_lo);

// Squared error between the student score and the distillation target logit.
double kd_loss(double student_score, double target_logit);

// Mean pairwise loss over all label-distinct pairs in the group, plus
// alpha * mean kd loss over docs when targets are given. Without targets only
// the pairwise term remains.
double total_loss(const StudentParams& params, const QueryGroup& group,
                  const std::optional<std::vector<double>>& targets,
                  double alpha);

// Analytic gradient of total_loss w.r.t. the flat weights.
std::vector<double> gradient(const StudentParams& params,
                             const QueryGroup& group,
                             const std::optional<std::vector<double>>& targets,
                             double alpha);

struct TrainConfig {
  double learning_rate = 1e-2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  int batch_pairs = 64;
  int epochs = 10;
  double kd_alpha = 1.0;
  std::uint64_t seed = 0;
};

struct TrainLog {
  double initial_loss = 0.0;          // full-dataset loss before any update
  std::vector<double> epoch_loss;     // running mean per epoch
};

struct TrainResult {
  StudentParams params;
  TrainLog log;
};

// Minibatch Adam over all label-distinct pairs of the dataset, reshuffled per
// epoch. Each pair contributes its pairwise loss plus, when targets are
// present and kd_alpha > 0, alpha * (kd_hi + kd_lo) / 2. Deterministic given
// the seed. Throws TrainingError with the epoch index if the loss turns
// non-finite, and AlignmentError if targets do not line up with the dataset.
TrainResult train(
    const Dataset& dataset,
    const std::optional<std::vector<std::vector<double>>>& targets_per_group,
    StudentParams initial, const TrainConfig& config);

}  // namespace pilekd

#endif  // PILEKD_STUDENT_HPP_
