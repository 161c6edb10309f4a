#ifndef PILEKD_METRICS_HPP_
#define PILEKD_METRICS_HPP_

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pilekd {

// Positive-Negative Ratio for one query: concordant over discordant
// label-distinct score pairs, with strict comparisons (score ties count
// toward neither side). Returns nullopt when the query has no label-distinct
// pair or no discordant pair, since the ratio is then undefined.
std::optional<double> pnr_query(std::span<const double> scores,
                                std::span<const int> labels);

struct QueryScores {
  std::string query_id;
  std::vector<double> scores;
  std::vector<int> labels;
};

struct MetricReport {
  double mean_pnr = 0.0;
  std::vector<std::pair<std::string, std::optional<double>>> per_query_pnr;
  std::size_t skipped_no_discordant = 0;
  std::size_t skipped_no_pairs = 0;
  std::optional<double> dcg_at_k;
  std::vector<std::pair<std::string, std::string>> parameters;
};

// Mean PNR over the queries where it is defined; skipped queries are counted
// by reason. Throws InvalidInputError when no query is evaluable. The mean is
// accumulated in input order so results are deterministic.
MetricReport pnr_mean(const std::vector<QueryScores>& queries);

// Position-discounted gain sum over the first min(k, N) positions of a ranked
// list, positions 1-based: sum_i gains[i] / log2(i + 1). k = nullopt means no
// cutoff.
double dcg(std::span<const double> gains_in_rank_order,
           std::optional<int> k = std::nullopt);

enum class GainScheme {
  Linear,       // G_i = y_i
  Exponential,  // G_i = 2^y_i - 1
};

std::vector<double> gains_from_labels(std::span<const int> labels,
                                      GainScheme scheme);

// Interleaving gain of system A over system B from win/tie counts:
// 0.5 * (wins_a - wins_b) / (wins_a + wins_b + ties).
double delta_ab(std::size_t wins_a, std::size_t wins_b, std::size_t ties);

// Side-by-side gain from Good/Same/Bad counts:
// (good - bad) / (good + bad + same).
double delta_gsb(std::size_t good, std::size_t same, std::size_t bad);

}  // namespace pilekd

#endif  // PILEKD_METRICS_HPP_
