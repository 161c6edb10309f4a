#include "pilekd/metrics.hpp"

#include <cmath>

#include "pilekd/errors.hpp"
#include "pilekd/types.hpp"

namespace pilekd {

namespace {

struct PairCounts {
  std::size_t concordant = 0;
  std::size_t discordant = 0;
  bool has_label_distinct_pair = false;
};

PairCounts count_pairs(std::span<const double> scores,
                       std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw InvalidInputError("pnr: scores and labels length mismatch");
  }
  PairCounts counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      if (labels[i] == labels[j]) continue;
      counts.has_label_distinct_pair = true;
      const std::size_t hi = labels[i] > labels[j] ? i : j;
      const std::size_t lo = labels[i] > labels[j] ? j : i;
      if (scores[hi] > scores[lo]) {
        ++counts.concordant;
      } else if (scores[hi] < scores[lo]) {
        ++counts.discordant;
      }
    }
  }
  return counts;
}

}  // namespace

std::optional<double> pnr_query(std::span<const double> scores,
                                std::span<const int> labels) {
  if (labels.empty()) {
    throw InvalidInputError("pnr_query: empty query");
  }
  const PairCounts counts = count_pairs(scores, labels);
  if (!counts.has_label_distinct_pair || counts.discordant == 0) {
    return std::nullopt;
  }
  return static_cast<double>(counts.concordant) /
         static_cast<double>(counts.discordant);
}

MetricReport pnr_mean(const std::vector<QueryScores>& queries) {
  MetricReport report;
  double sum = 0.0;
  std::size_t evaluated = 0;
  for (const auto& query : queries) {
    const PairCounts counts = count_pairs(query.scores, query.labels);
    std::optional<double> pnr;
    if (!counts.has_label_distinct_pair) {
      ++report.skipped_no_pairs;
    } else if (counts.discordant == 0) {
      ++report.skipped_no_discordant;
    } else {
      pnr = static_cast<double>(counts.concordant) /
            static_cast<double>(counts.discordant);
      sum += *pnr;
      ++evaluated;
    }
    report.per_query_pnr.emplace_back(query.query_id, pnr);
  }
  if (evaluated == 0) {
    throw InvalidInputError(
        "pnr_mean: no evaluable queries (all skipped), report would be empty");
  }
  report.mean_pnr = sum / static_cast<double>(evaluated);
  return report;
}

double dcg(std::span<const double> gains_in_rank_order, std::optional<int> k) {
  if (k && *k < 0) {
    throw InvalidInputError("dcg: negative cutoff");
  }
  std::size_t limit = gains_in_rank_order.size();
  if (k) limit = std::min(limit, static_cast<std::size_t>(*k));
  double sum = 0.0;
  for (std::size_t i = 0; i < limit; ++i) {
    const double gain = gains_in_rank_order[i];
    if (!std::isfinite(gain)) {
      throw InvalidInputError("dcg: non-finite gain");
    }
    sum += gain / std::log2(static_cast<double>(i) + 2.0);
  }
  return sum;
}

std::vector<double> gains_from_labels(std::span<const int> labels,
                                      GainScheme scheme) {
  std::vector<double> gains;
  gains.reserve(labels.size());
  for (int y : labels) {
    switch (scheme) {
      case GainScheme::Linear:
        gains.push_back(static_cast<double>(y));
        break;
      case GainScheme::Exponential:
        gains.push_back(std::pow(2.0, static_cast<double>(y)) - 1.0);
        break;
    }
  }
  return gains;
}

double delta_ab(std::size_t wins_a, std::size_t wins_b, std::size_t ties) {
  const std::size_t total = wins_a + wins_b + ties;
  if (total == 0) {
    throw InvalidInputError("delta_ab: all counts zero");
  }
  return 0.5 * (static_cast<double>(wins_a) - static_cast<double>(wins_b)) /
         static_cast<double>(total);
}

double delta_gsb(std::size_t good, std::size_t same, std::size_t bad) {
  const std::size_t total = good + same + bad;
  if (total == 0) {
    throw InvalidInputError("delta_gsb: all counts zero");
  }
  return (static_cast<double>(good) - static_cast<double>(bad)) /
         static_cast<double>(total);
}

}  // namespace pilekd
