#ifndef PILEKD_ENSEMBLE_HPP_
#define PILEKD_ENSEMBLE_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pilekd/rng.hpp"
#include "pilekd/types.hpp"

namespace pilekd {

// Equal-weight mean of the K teacher logits per doc. This is both the
// baseline ensemble and the initial state of the iterative one. Teacher
// values are summed in sorted order, so permuting the teacher axis leaves the
// result bit-identical.
std::vector<double> average_ensemble(const QueryGroup& group);

// True iff the doc with the strictly higher label carries the strictly lower
// ensemble logit. Equal logits or equal labels are never reversed.
bool is_reversed_pair(double e_i, double e_j, RelevanceLabel y_i,
                      RelevanceLabel y_j);

struct PairWeights {
  std::vector<std::uint8_t> hi;  // weights for the higher-label doc
  std::vector<std::uint8_t> lo;  // weights for the lower-label doc
};

// Zero/one reweighting of the teachers blamed for a reversed pair: for the
// higher-label doc, teachers scoring strictly below its current ensemble
// logit are zeroed; for the lower-label doc, teachers scoring strictly above.
// Each returned vector keeps at least one teacher because the ensemble logit
// always lies inside the hull of that doc's teacher logits.
PairWeights reassign_weights(std::span<const double> f_hi,
                             std::span<const double> f_lo, double e_hi,
                             double e_lo);

// One relaxation step: e_new = (1 - lambda) * e_old + lambda * etilde, where
// etilde is the mean of the teachers kept by `weights`. Throws
// InvalidStateError when all weights are zero. Returns e_old bit-exactly when
// etilde == e_old or lambda == 0, so no-op updates cannot drift.
double blend_update(double e_old, std::span<const std::uint8_t> weights,
                    std::span<const double> f, double lambda);

// Picks a label-distinct pair, returned as (hi, lo) doc indices with
// label[hi] > label[lo]. UniformRandom draws uniformly over all unordered
// label-distinct pairs; Sweep walks them in (i, j) index order using
// state.iteration as the cursor. Returns nullopt when no such pair exists.
std::optional<std::pair<std::size_t, std::size_t>> sample_pair(
    const QueryGroup& group, const EnsembleState& state, PairPolicy policy,
    Rng& rng);

// Number of unordered label-distinct pairs where the higher-label doc has the
// strictly lower logit.
std::size_t count_reversed_pairs(std::span<const double> logits,
                                 std::span<const int> labels);

// The full iterative ensemble for one query group. Starts from the averaged
// ensemble, then repeatedly samples a pair and corrects it via
// reassign_weights + blend_update, until the stop policy is satisfied or the
// iteration cap floor(N^max_iters_exponent) is reached. Pure function of
// (group, config); identical inputs give bit-identical output.
EnsembleOutput pile_ensemble(const QueryGroup& group, const PileConfig& config);

}  // namespace pilekd

#endif  // PILEKD_ENSEMBLE_HPP_
