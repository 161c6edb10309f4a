#ifndef PILEKD_TYPES_HPP_
#define PILEKD_TYPES_HPP_

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pilekd {

// Human-annotated relevance grade. Valid grades are the integers 0..4
// ({bad, fair, good, excellent, perfect}); validate_dataset rejects anything
// else.
struct RelevanceLabel {
  int value = 0;

  auto operator<=>(const RelevanceLabel&) const = default;
};

constexpr int kMinGrade = 0;
constexpr int kMaxGrade = 4;
constexpr int kNumGrades = 5;

// One candidate document under a query: feature vector, grade, and the
// relevance logit each teacher predicted for it.
struct DocEntry {
  std::string doc_id;
  std::vector<double> features;
  RelevanceLabel label;
  std::vector<double> teacher_logits;

  bool operator==(const DocEntry&) const = default;
};

// A query with its retrieved candidates. The document order is preserved from
// input; nothing in the library reorders it.
struct QueryGroup {
  std::string query_id;
  std::vector<DocEntry> docs;

  std::size_t size() const { return docs.size(); }

  std::vector<int> label_values() const {
    std::vector<int> out;
    out.reserve(docs.size());
    for (const auto& doc : docs) out.push_back(doc.label.value);
    return out;
  }

  bool operator==(const QueryGroup&) const = default;
};

// A collection of query groups sharing one feature dimension and one teacher
// count. num_teachers == 0 means teacher logits have not been filled yet.
struct Dataset {
  std::vector<QueryGroup> groups;
  std::size_t feature_dim = 0;
  std::size_t num_teachers = 0;

  bool operator==(const Dataset&) const = default;
};

// Dense N x K binary matrix of per-(doc, teacher) ensemble weights.
struct WeightMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> data;  // row-major

  WeightMatrix() = default;
  WeightMatrix(std::size_t r, std::size_t c, std::uint8_t fill = 1)
      : rows(r), cols(c), data(r * c, fill) {}

  std::uint8_t& at(std::size_t i, std::size_t k) { return data[i * cols + k]; }
  std::uint8_t at(std::size_t i, std::size_t k) const {
    return data[i * cols + k];
  }

  // Row view for doc i.
  const std::uint8_t* row(std::size_t i) const { return data.data() + i * cols; }
  std::uint8_t* row(std::size_t i) { return data.data() + i * cols; }

  bool operator==(const WeightMatrix&) const = default;
};

// Evolving state of the iterative ensemble for one group: current ensemble
// logit per doc, current binary weights, and the iteration counter (number of
// pairs sampled so far).
struct EnsembleState {
  std::vector<double> logits;
  WeightMatrix weights;
  std::uint64_t iteration = 0;

  bool operator==(const EnsembleState&) const = default;
};

enum class StopPolicy {
  // Stop as soon as no label-distinct pair is in reversed order.
  OrderConsistent,
  // Additionally keep refining until no pending update would move any logit
  // by more than epsilon.
  FixedPoint,
};

enum class PairPolicy {
  UniformRandom,  // uniform over all unordered label-distinct pairs
  Sweep,          // cycle through them in (i, j) index order
};

struct PileConfig {
  double lambda = 0.9;           // update rate, in (0, 1]
  double max_iters_exponent = 1.5;  // cap = floor(N^exponent)
  std::optional<std::uint64_t> max_iters_override;  // hard ceiling on the cap
  StopPolicy stop_policy = StopPolicy::FixedPoint;
  double epsilon = 1e-4;         // FixedPoint threshold, > 0
  PairPolicy pair_policy = PairPolicy::UniformRandom;
  std::uint64_t seed = 0;
  bool trace = false;
};

struct EnsembleOutput {
  std::vector<double> logits;
  WeightMatrix final_weights;
  std::uint64_t iterations_used = 0;
  bool converged = false;
  std::optional<std::vector<EnsembleState>> trace;

  bool operator==(const EnsembleOutput&) const = default;
};

// One invariant violation found by validate_dataset. group_index/doc_index are
// npos when the violation is not tied to that level.
struct ValidationIssue {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t group_index = npos;
  std::size_t doc_index = npos;
  std::string query_id;
  std::string doc_id;
  std::string message;
};

std::string to_string(const ValidationIssue& issue);

// Checks every type invariant (grade range, unique doc ids, consistent
// feature/logit dimensions, finite values) and reports all violations with
// their location. Empty report == valid dataset. Pure function.
std::vector<ValidationIssue> validate_dataset(const Dataset& dataset);

// Throws ValidationError with the first violation if the dataset is invalid.
void require_valid(const Dataset& dataset);

}  // namespace pilekd

#endif  // PILEKD_TYPES_HPP_
