#include "pilekd/student.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pilekd/errors.hpp"

namespace pilekd {

namespace {

void check_params(const StudentParams& params) {
  const std::size_t expected = weight_count(
      params.architecture, params.hidden_sizes, params.feature_dim);
  if (params.weights.size() != expected) {
    throw InvalidInputError(
        "student params hold " + std::to_string(params.weights.size()) +
        " weights, architecture requires " + std::to_string(expected));
  }
}

// Forward pass keeping post-activation values per layer; activations[0] is the
// input. Returns the scalar output.
double forward(const StudentParams& params, std::span<const double> x,
               std::vector<std::vector<double>>* activations) {
  const auto sizes = layer_sizes(params);
  if (x.size() != params.feature_dim) {
    throw InvalidInputError("score: feature vector has dimension " +
                            std::to_string(x.size()) + ", model expects " +
                            std::to_string(params.feature_dim));
  }
  std::vector<double> current(x.begin(), x.end());
  if (activations) {
    activations->clear();
    activations->push_back(current);
  }
  std::size_t offset = 0;
  for (std::size_t layer = 1; layer < sizes.size(); ++layer) {
    const std::size_t in = sizes[layer - 1];
    const std::size_t out = sizes[layer];
    const bool is_output = layer + 1 == sizes.size();
    std::vector<double> next(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double z = 0.0;
      const double* w = params.weights.data() + offset + r * in;
      for (std::size_t c = 0; c < in; ++c) z += w[c] * current[c];
      z += params.weights[offset + out * in + r];  // bias
      next[r] = is_output ? z : std::tanh(z);
    }
    offset += out * in + out;
    current = std::move(next);
    if (activations) activations->push_back(current);
  }
  return current[0];
}

// Backprop of d(score)/d(theta) given the cached activations.
void backward(const StudentParams& params,
              const std::vector<std::vector<double>>& activations,
              std::vector<double>& grad) {
  const auto sizes = layer_sizes(params);
  grad.assign(params.weights.size(), 0.0);

  // Per-layer flat offsets.
  std::vector<std::size_t> offsets(sizes.size(), 0);
  std::size_t offset = 0;
  for (std::size_t layer = 1; layer < sizes.size(); ++layer) {
    offsets[layer] = offset;
    offset += sizes[layer] * sizes[layer - 1] + sizes[layer];
  }

  std::vector<double> delta = {1.0};  // d(score)/d(z_last)
  for (std::size_t layer = sizes.size() - 1; layer >= 1; --layer) {
    const std::size_t in = sizes[layer - 1];
    const std::size_t out = sizes[layer];
    const auto& input = activations[layer - 1];
    const std::size_t base = offsets[layer];
    for (std::size_t r = 0; r < out; ++r) {
      for (std::size_t c = 0; c < in; ++c) {
        grad[base + r * in + c] = delta[r] * input[c];
      }
      grad[base + out * in + r] = delta[r];
    }
    if (layer == 1) break;
    std::vector<double> prev_delta(in, 0.0);
    for (std::size_t c = 0; c < in; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < out; ++r) {
        acc += params.weights[base + r * in + c] * delta[r];
      }
      prev_delta[c] = acc * (1.0 - input[c] * input[c]);  // tanh'
    }
    delta = std::move(prev_delta);
  }
}

// sigma(-m) = 1 / (1 + e^m), computed without overflow.
double sigmoid_neg(double margin) {
  if (margin >= 0.0) {
    const double t = std::exp(-margin);
    return t / (1.0 + t);
  }
  return 1.0 / (1.0 + std::exp(margin));
}

struct PairRef {
  std::size_t group;
  std::size_t hi;
  std::size_t lo;
};

std::vector<PairRef> enumerate_pairs(const Dataset& dataset) {
  std::vector<PairRef> pairs;
  for (std::size_t g = 0; g < dataset.groups.size(); ++g) {
    const auto& docs = dataset.groups[g].docs;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      for (std::size_t j = i + 1; j < docs.size(); ++j) {
        if (docs[i].label == docs[j].label) continue;
        if (docs[i].label > docs[j].label) {
          pairs.push_back({g, i, j});
        } else {
          pairs.push_back({g, j, i});
        }
      }
    }
  }
  return pairs;
}

void check_target_alignment(
    const Dataset& dataset,
    const std::optional<std::vector<std::vector<double>>>& targets) {
  if (!targets) return;
  if (targets->size() != dataset.groups.size()) {
    throw AlignmentError("targets cover " + std::to_string(targets->size()) +
                         " groups, dataset has " +
                         std::to_string(dataset.groups.size()));
  }
  for (std::size_t g = 0; g < dataset.groups.size(); ++g) {
    if ((*targets)[g].size() != dataset.groups[g].docs.size()) {
      throw AlignmentError(
          "group " + std::to_string(g) + " (" + dataset.groups[g].query_id +
          "): " + std::to_string((*targets)[g].size()) + " targets for " +
          std::to_string(dataset.groups[g].docs.size()) + " docs");
    }
  }
}

}  // namespace

std::vector<std::size_t> layer_sizes(const StudentParams& params) {
  std::vector<std::size_t> sizes = {params.feature_dim};
  if (params.architecture == Architecture::Mlp) {
    for (int h : params.hidden_sizes) {
      sizes.push_back(static_cast<std::size_t>(h));
    }
  }
  sizes.push_back(1);
  return sizes;
}

std::size_t weight_count(Architecture architecture,
                         std::span<const int> hidden_sizes,
                         std::size_t feature_dim) {
  std::vector<std::size_t> sizes = {feature_dim};
  if (architecture == Architecture::Mlp) {
    for (int h : hidden_sizes) {
      if (h <= 0) throw InvalidInputError("hidden layer size must be >= 1");
      sizes.push_back(static_cast<std::size_t>(h));
    }
  }
  sizes.push_back(1);
  std::size_t count = 0;
  for (std::size_t layer = 1; layer < sizes.size(); ++layer) {
    count += sizes[layer] * sizes[layer - 1] + sizes[layer];
  }
  return count;
}

StudentParams init_params(Architecture architecture,
                          std::vector<int> hidden_sizes,
                          std::size_t feature_dim, Rng& rng) {
  StudentParams params;
  params.architecture = architecture;
  params.hidden_sizes =
      architecture == Architecture::Mlp ? std::move(hidden_sizes) : std::vector<int>{};
  params.feature_dim = feature_dim;
  params.weights.resize(
      weight_count(architecture, params.hidden_sizes, feature_dim));

  const auto sizes = layer_sizes(params);
  std::size_t offset = 0;
  for (std::size_t layer = 1; layer < sizes.size(); ++layer) {
    const std::size_t in = sizes[layer - 1];
    const std::size_t out = sizes[layer];
    const double scale = in > 0 ? 1.0 / std::sqrt(static_cast<double>(in)) : 1.0;
    for (std::size_t i = 0; i < out * in; ++i) {
      params.weights[offset + i] = rng.uniform(-scale, scale);
    }
    // biases start at zero
    offset += out * in + out;
  }
  return params;
}

double default_learning_rate(Architecture architecture) {
  return architecture == Architecture::Linear ? 1e-2 : 1e-3;
}

double score(const StudentParams& params, std::span<const double> features) {
  check_params(params);
  return forward(params, features, nullptr);
}

void score_with_grad(const StudentParams& params,
                     std::span<const double> features, double& score_out,
                     std::vector<double>& grad_out) {
  check_params(params);
  std::vector<std::vector<double>> activations;
  score_out = forward(params, features, &activations);
  backward(params, activations, grad_out);
}

double pairwise_loss(double s_hi, double s_lo) {
  const double margin = s_hi - s_lo;
  // log(1 + exp(-m)) via the log-sum-exp guard
  if (margin >= 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

double kd_loss(double student_score, double target_logit) {
  const double diff = student_score - target_logit;
  return diff * diff;
}

double total_loss(const StudentParams& params, const QueryGroup& group,
                  const std::optional<std::vector<double>>& targets,
                  double alpha) {
  check_params(params);
  if (targets && targets->size() != group.docs.size()) {
    throw AlignmentError("group " + group.query_id + ": " +
                         std::to_string(targets->size()) + " targets for " +
                         std::to_string(group.docs.size()) + " docs");
  }
  std::vector<double> scores;
  scores.reserve(group.docs.size());
  for (const auto& doc : group.docs) {
    scores.push_back(forward(params, doc.features, nullptr));
  }

  double pair_sum = 0.0;
  std::size_t pair_count = 0;
  for (std::size_t i = 0; i < group.docs.size(); ++i) {
    for (std::size_t j = i + 1; j < group.docs.size(); ++j) {
      if (group.docs[i].label == group.docs[j].label) continue;
      const bool i_higher = group.docs[i].label > group.docs[j].label;
      const double s_hi = i_higher ? scores[i] : scores[j];
      const double s_lo = i_higher ? scores[j] : scores[i];
      pair_sum += pairwise_loss(s_hi, s_lo);
      ++pair_count;
    }
  }

  double loss = pair_count > 0 ? pair_sum / static_cast<double>(pair_count) : 0.0;
  if (targets && alpha != 0.0) {
    double kd_sum = 0.0;
    for (std::size_t i = 0; i < group.docs.size(); ++i) {
      kd_sum += kd_loss(scores[i], (*targets)[i]);
    }
    loss += alpha * kd_sum / static_cast<double>(group.docs.size());
  }
  return loss;
}

std::vector<double> gradient(const StudentParams& params,
                             const QueryGroup& group,
                             const std::optional<std::vector<double>>& targets,
                             double alpha) {
  check_params(params);
  if (targets && targets->size() != group.docs.size()) {
    throw AlignmentError("group " + group.query_id + ": " +
                         std::to_string(targets->size()) + " targets for " +
                         std::to_string(group.docs.size()) + " docs");
  }
  const std::size_t n = group.docs.size();
  std::vector<double> scores(n);
  std::vector<std::vector<double>> score_grads(n);
  for (std::size_t i = 0; i < n; ++i) {
    score_with_grad(params, group.docs[i].features, scores[i], score_grads[i]);
  }

  std::vector<double> grad(params.weights.size(), 0.0);
  std::size_t pair_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (group.docs[i].label == group.docs[j].label) continue;
      ++pair_count;
    }
  }
  if (pair_count > 0) {
    const double inv_pairs = 1.0 / static_cast<double>(pair_count);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (group.docs[i].label == group.docs[j].label) continue;
        const bool i_higher = group.docs[i].label > group.docs[j].label;
        const std::size_t hi = i_higher ? i : j;
        const std::size_t lo = i_higher ? j : i;
        // d/dm log(1 + exp(-m)) = -sigma(-m)
        const double coeff = sigmoid_neg(scores[hi] - scores[lo]) * inv_pairs;
        for (std::size_t p = 0; p < grad.size(); ++p) {
          grad[p] += coeff * (score_grads[lo][p] - score_grads[hi][p]);
        }
      }
    }
  }
  if (targets && alpha != 0.0) {
    const double inv_docs = alpha / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double coeff = 2.0 * (scores[i] - (*targets)[i]) * inv_docs;
      for (std::size_t p = 0; p < grad.size(); ++p) {
        grad[p] += coeff * score_grads[i][p];
      }
    }
  }
  return grad;
}

TrainResult train(
    const Dataset& dataset,
    const std::optional<std::vector<std::vector<double>>>& targets_per_group,
    StudentParams initial, const TrainConfig& config) {
  check_params(initial);
  check_target_alignment(dataset, targets_per_group);
  if (config.learning_rate <= 0.0) {
    throw ConfigError("learning_rate must be > 0");
  }
  if (config.adam_beta1 <= 0.0 || config.adam_beta1 >= 1.0 ||
      config.adam_beta2 <= 0.0 || config.adam_beta2 >= 1.0) {
    throw ConfigError("adam betas must be in (0, 1)");
  }
  if (config.batch_pairs < 1) {
    throw ConfigError("batch_pairs must be >= 1");
  }
  if (config.epochs < 0) {
    throw ConfigError("epochs must be >= 0");
  }

  std::vector<PairRef> pairs = enumerate_pairs(dataset);
  if (pairs.empty()) {
    throw InvalidInputError("train: dataset has no label-distinct pairs");
  }
  const bool use_kd = targets_per_group.has_value() && config.kd_alpha != 0.0;

  TrainResult result;
  result.params = std::move(initial);
  std::vector<double>& theta = result.params.weights;
  const std::size_t dim = theta.size();

  // Loss and gradient for one oriented pair. KD terms contribute half per
  // endpoint so a doc appearing in many pairs is not over-weighted relative
  // to the pairwise term.
  std::vector<double> grad_hi(dim), grad_lo(dim);
  auto pair_step = [&](const PairRef& p, std::vector<double>* grad_accum) {
    const auto& docs = dataset.groups[p.group].docs;
    double s_hi, s_lo;
    if (grad_accum) {
      score_with_grad(result.params, docs[p.hi].features, s_hi, grad_hi);
      score_with_grad(result.params, docs[p.lo].features, s_lo, grad_lo);
    } else {
      s_hi = forward(result.params, docs[p.hi].features, nullptr);
      s_lo = forward(result.params, docs[p.lo].features, nullptr);
    }
    double loss = pairwise_loss(s_hi, s_lo);
    double kd_hi = 0.0, kd_lo = 0.0;
    if (use_kd) {
      const auto& t = (*targets_per_group)[p.group];
      kd_hi = s_hi - t[p.hi];
      kd_lo = s_lo - t[p.lo];
      loss += config.kd_alpha * 0.5 * (kd_hi * kd_hi + kd_lo * kd_lo);
    }
    if (grad_accum) {
      const double c_pair = sigmoid_neg(s_hi - s_lo);
      double c_hi = -c_pair;
      double c_lo = c_pair;
      if (use_kd) {
        c_hi += config.kd_alpha * kd_hi;
        c_lo += config.kd_alpha * kd_lo;
      }
      for (std::size_t k = 0; k < dim; ++k) {
        (*grad_accum)[k] += c_hi * grad_hi[k] + c_lo * grad_lo[k];
      }
    }
    return loss;
  };

  auto mean_loss = [&]() {
    double sum = 0.0;
    for (const auto& p : pairs) sum += pair_step(p, nullptr);
    return sum / static_cast<double>(pairs.size());
  };

  result.log.initial_loss = mean_loss();
  if (!std::isfinite(result.log.initial_loss)) {
    throw TrainingError("non-finite loss before epoch 1");
  }

  Rng rng(config.seed);
  std::vector<double> m(dim, 0.0), v(dim, 0.0), grad(dim, 0.0);
  double beta1_pow = 1.0, beta2_pow = 1.0;
  constexpr double kAdamEps = 1e-8;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(pairs);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < pairs.size();
         start += static_cast<std::size_t>(config.batch_pairs)) {
      const std::size_t end = std::min(
          pairs.size(), start + static_cast<std::size_t>(config.batch_pairs));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t idx = start; idx < end; ++idx) {
        epoch_sum += pair_step(pairs[idx], &grad);
      }
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      beta1_pow *= config.adam_beta1;
      beta2_pow *= config.adam_beta2;
      const double corr1 = 1.0 - beta1_pow;
      const double corr2 = 1.0 - beta2_pow;
      for (std::size_t k = 0; k < dim; ++k) {
        const double g = grad[k] * inv_batch;
        m[k] = config.adam_beta1 * m[k] + (1.0 - config.adam_beta1) * g;
        v[k] = config.adam_beta2 * v[k] + (1.0 - config.adam_beta2) * g * g;
        theta[k] -= config.learning_rate * (m[k] / corr1) /
                    (std::sqrt(v[k] / corr2) + kAdamEps);
      }
    }
    const double epoch_loss = epoch_sum / static_cast<double>(pairs.size());
    result.log.epoch_loss.push_back(epoch_loss);
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError("non-finite loss in epoch " +
                          std::to_string(epoch + 1));
    }
    for (double w : theta) {
      if (!std::isfinite(w)) {
        throw TrainingError("non-finite parameters in epoch " +
                            std::to_string(epoch + 1));
      }
    }
  }
  return result;
}

}  // namespace pilekd
