#include "pilekd/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pilekd/errors.hpp"

namespace pilekd {

namespace {

// Mean of the teacher logits selected by `weights`, summed in ascending value
// order so the result does not depend on teacher ordering.
double masked_mean(std::span<const std::uint8_t> weights,
                   std::span<const double> f) {
  std::vector<double> kept;
  kept.reserve(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (weights[k] != 0) kept.push_back(f[k]);
  }
  if (kept.empty()) {
    throw InvalidStateError("ensemble update with all teacher weights zero");
  }
  std::sort(kept.begin(), kept.end());
  double sum = 0.0;
  for (double v : kept) sum += v;
  const double mean = sum / static_cast<double>(kept.size());
  // The exact mean lies in [min, max]; clamping removes the last-ulp rounding
  // spill so the hull bound holds with no tolerance.
  return std::clamp(mean, kept.front(), kept.back());
}

std::vector<std::pair<std::size_t, std::size_t>> label_distinct_pairs(
    const QueryGroup& group) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t n = group.docs.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (group.docs[i].label != group.docs[j].label) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

// Orients an index pair so the higher-label doc comes first.
std::pair<std::size_t, std::size_t> orient_by_label(
    const QueryGroup& group, std::pair<std::size_t, std::size_t> pair) {
  if (group.docs[pair.first].label < group.docs[pair.second].label) {
    std::swap(pair.first, pair.second);
  }
  return pair;
}

void validate_config(const PileConfig& config) {
  if (!(config.lambda > 0.0) || config.lambda > 1.0) {
    throw ConfigError("lambda must be in (0, 1], got " +
                      std::to_string(config.lambda));
  }
  if (config.stop_policy == StopPolicy::FixedPoint && !(config.epsilon > 0.0)) {
    throw ConfigError("epsilon must be > 0, got " +
                      std::to_string(config.epsilon));
  }
  if (!std::isfinite(config.max_iters_exponent) ||
      config.max_iters_exponent < 0.0) {
    throw ConfigError("max_iters_exponent must be finite and non-negative");
  }
}

std::uint64_t iteration_cap(std::size_t num_docs, const PileConfig& config) {
  const double raw = std::floor(
      std::pow(static_cast<double>(num_docs), config.max_iters_exponent));
  std::uint64_t cap = raw >= 9.0e18
                          ? std::numeric_limits<std::uint64_t>::max()
                          : static_cast<std::uint64_t>(raw);
  if (config.max_iters_override && *config.max_iters_override < cap) {
    cap = *config.max_iters_override;
  }
  return cap;
}

// The update a doc would receive in the given role, from its own teacher
// vector and current ensemble logit alone.
double pending_update(std::span<const double> f, double e, double lambda,
                      bool as_higher) {
  std::vector<std::uint8_t> weights(f.size(), 1);
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (as_higher ? f[k] < e : f[k] > e) weights[k] = 0;
  }
  return blend_update(e, weights, f, lambda);
}

// OrderConsistent: no label-distinct pair reversed. FixedPoint: additionally
// no doc's pending update (in any role it can play) moves its logit by more
// than epsilon.
bool stop_satisfied(const QueryGroup& group, const std::vector<int>& labels,
                    const std::vector<double>& logits,
                    const PileConfig& config) {
  if (count_reversed_pairs(logits, labels) > 0) return false;
  if (config.stop_policy != StopPolicy::FixedPoint) return true;

  int min_label = kMaxGrade + 1;
  int max_label = kMinGrade - 1;
  for (int y : labels) {
    min_label = std::min(min_label, y);
    max_label = std::max(max_label, y);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& f = group.docs[i].teacher_logits;
    if (labels[i] > min_label) {  // doc can be the higher side of some pair
      const double next = pending_update(f, logits[i], config.lambda, true);
      if (std::abs(next - logits[i]) > config.epsilon) return false;
    }
    if (labels[i] < max_label) {  // doc can be the lower side
      const double next = pending_update(f, logits[i], config.lambda, false);
      if (std::abs(next - logits[i]) > config.epsilon) return false;
    }
  }
  return true;
}

}  // namespace

std::vector<double> average_ensemble(const QueryGroup& group) {
  std::vector<double> out;
  out.reserve(group.docs.size());
  for (const auto& doc : group.docs) {
    if (doc.teacher_logits.empty()) {
      throw InvalidInputError("average_ensemble: doc '" + doc.doc_id +
                              "' has no teacher logits");
    }
    const std::vector<std::uint8_t> ones(doc.teacher_logits.size(), 1);
    out.push_back(masked_mean(ones, doc.teacher_logits));
  }
  return out;
}

bool is_reversed_pair(double e_i, double e_j, RelevanceLabel y_i,
                      RelevanceLabel y_j) {
  if (y_i > y_j) return e_i < e_j;
  if (y_j > y_i) return e_j < e_i;
  return false;
}

PairWeights reassign_weights(std::span<const double> f_hi,
                             std::span<const double> f_lo, double e_hi,
                             double e_lo) {
  PairWeights weights;
  weights.hi.assign(f_hi.size(), 1);
  weights.lo.assign(f_lo.size(), 1);
  for (std::size_t k = 0; k < f_hi.size(); ++k) {
    if (f_hi[k] < e_hi) weights.hi[k] = 0;
  }
  for (std::size_t k = 0; k < f_lo.size(); ++k) {
    if (f_lo[k] > e_lo) weights.lo[k] = 0;
  }
  return weights;
}

double blend_update(double e_old, std::span<const std::uint8_t> weights,
                    std::span<const double> f, double lambda) {
  const double etilde = masked_mean(weights, f);
  if (lambda == 0.0 || etilde == e_old) return e_old;
  if (lambda == 1.0) return etilde;
  const double blended = (1.0 - lambda) * e_old + lambda * etilde;
  // A convex combination cannot leave [e_old, etilde]; clamp away rounding.
  return std::clamp(blended, std::min(e_old, etilde), std::max(e_old, etilde));
}

std::optional<std::pair<std::size_t, std::size_t>> sample_pair(
    const QueryGroup& group, const EnsembleState& state, PairPolicy policy,
    Rng& rng) {
  const auto pairs = label_distinct_pairs(group);
  if (pairs.empty()) return std::nullopt;
  std::size_t index = 0;
  switch (policy) {
    case PairPolicy::UniformRandom:
      index = static_cast<std::size_t>(rng.below(pairs.size()));
      break;
    case PairPolicy::Sweep:
      index = static_cast<std::size_t>(state.iteration % pairs.size());
      break;
  }
  return orient_by_label(group, pairs[index]);
}

std::size_t count_reversed_pairs(std::span<const double> logits,
                                 std::span<const int> labels) {
  if (logits.size() != labels.size()) {
    throw InvalidInputError("count_reversed_pairs: length mismatch");
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      if (labels[i] == labels[j]) continue;
      const std::size_t hi = labels[i] > labels[j] ? i : j;
      const std::size_t lo = labels[i] > labels[j] ? j : i;
      if (logits[hi] < logits[lo]) ++count;
    }
  }
  return count;
}

EnsembleOutput pile_ensemble(const QueryGroup& group,
                             const PileConfig& config) {
  validate_config(config);
  if (group.docs.empty()) {
    throw InvalidInputError("pile_ensemble: empty group");
  }

  EnsembleState state;
  state.logits = average_ensemble(group);
  state.weights = WeightMatrix(group.docs.size(),
                               group.docs.front().teacher_logits.size(), 1);
  state.iteration = 0;

  const std::vector<int> labels = group.label_values();
  const std::uint64_t cap = iteration_cap(group.docs.size(), config);
  Rng rng(config.seed);

  EnsembleOutput output;
  if (config.trace) {
    output.trace.emplace();
    output.trace->push_back(state);
  }

  for (;;) {
    if (stop_satisfied(group, labels, state.logits, config)) {
      output.converged = true;
      break;
    }
    if (state.iteration >= cap) {
      output.converged = false;
      break;
    }
    const auto pair = sample_pair(group, state, config.pair_policy, rng);
    if (!pair) {
      output.converged = true;
      break;
    }
    state.iteration += 1;

    const auto [hi, lo] = *pair;
    const bool reversed =
        is_reversed_pair(state.logits[hi], state.logits[lo],
                         group.docs[hi].label, group.docs[lo].label);
    // OrderConsistent corrects reversed pairs only; FixedPoint keeps
    // applying the same update to consistent pairs until the state stops
    // moving.
    const bool apply =
        reversed || config.stop_policy == StopPolicy::FixedPoint;
    if (apply) {
      const auto& f_hi = group.docs[hi].teacher_logits;
      const auto& f_lo = group.docs[lo].teacher_logits;
      const double e_hi = state.logits[hi];
      const double e_lo = state.logits[lo];
      const PairWeights weights = reassign_weights(f_hi, f_lo, e_hi, e_lo);
      state.logits[hi] = blend_update(e_hi, weights.hi, f_hi, config.lambda);
      state.logits[lo] = blend_update(e_lo, weights.lo, f_lo, config.lambda);
      std::copy(weights.hi.begin(), weights.hi.end(), state.weights.row(hi));
      std::copy(weights.lo.begin(), weights.lo.end(), state.weights.row(lo));
      if (config.trace) output.trace->push_back(state);
    }
  }

  output.logits = std::move(state.logits);
  output.final_weights = std::move(state.weights);
  output.iterations_used = state.iteration;
  return output;
}

}  // namespace pilekd
