#include "pilekd/types.hpp"

#include <cmath>
#include <unordered_set>

#include "pilekd/errors.hpp"

namespace pilekd {

namespace {

bool all_finite(const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

std::string to_string(const ValidationIssue& issue) {
  std::string out;
  if (issue.group_index != ValidationIssue::npos) {
    out += "group " + std::to_string(issue.group_index);
    if (!issue.query_id.empty()) out += " (" + issue.query_id + ")";
    if (issue.doc_index != ValidationIssue::npos) {
      out += ", doc " + std::to_string(issue.doc_index);
      if (!issue.doc_id.empty()) out += " (" + issue.doc_id + ")";
    }
    out += ": ";
  }
  out += issue.message;
  return out;
}

std::vector<ValidationIssue> validate_dataset(const Dataset& dataset) {
  std::vector<ValidationIssue> issues;
  const auto add = [&issues](std::size_t g, std::size_t d, const QueryGroup* group,
                             const DocEntry* doc, std::string message) {
    ValidationIssue issue;
    issue.group_index = g;
    issue.doc_index = d;
    if (group != nullptr) issue.query_id = group->query_id;
    if (doc != nullptr) issue.doc_id = doc->doc_id;
    issue.message = std::move(message);
    issues.push_back(std::move(issue));
  };

  for (std::size_t g = 0; g < dataset.groups.size(); ++g) {
    const QueryGroup& group = dataset.groups[g];
    if (group.docs.empty()) {
      add(g, ValidationIssue::npos, &group, nullptr, "group has no docs");
      continue;
    }

    std::unordered_set<std::string> seen_ids;
    for (std::size_t d = 0; d < group.docs.size(); ++d) {
      const DocEntry& doc = group.docs[d];
      if (!seen_ids.insert(doc.doc_id).second) {
        add(g, d, &group, &doc, "duplicate doc_id within group");
      }
      if (doc.label.value < kMinGrade || doc.label.value > kMaxGrade) {
        add(g, d, &group, &doc,
            "label " + std::to_string(doc.label.value) + " outside [0, 4]");
      }
      if (doc.features.size() != dataset.feature_dim) {
        add(g, d, &group, &doc,
            "feature vector has dimension " + std::to_string(doc.features.size()) +
                ", dataset declares " + std::to_string(dataset.feature_dim));
      }
      if (doc.teacher_logits.size() != dataset.num_teachers) {
        add(g, d, &group, &doc,
            "doc has " + std::to_string(doc.teacher_logits.size()) +
                " teacher logits, dataset declares " +
                std::to_string(dataset.num_teachers));
      }
      if (!all_finite(doc.features)) {
        add(g, d, &group, &doc, "non-finite feature value");
      }
      if (!all_finite(doc.teacher_logits)) {
        add(g, d, &group, &doc, "non-finite teacher logit");
      }
    }
  }
  return issues;
}

void require_valid(const Dataset& dataset) {
  const auto issues = validate_dataset(dataset);
  if (!issues.empty()) {
    throw ValidationError(to_string(issues.front()));
  }
}

}  // namespace pilekd
