#ifndef PILEKD_IO_HPP_
#define PILEKD_IO_HPP_

#include <string>
#include <utility>
#include <vector>

#include "pilekd/metrics.hpp"
#include "pilekd/student.hpp"
#include "pilekd/types.hpp"

namespace pilekd {

// File formats
// ------------
// Every file starts with a header line "# pilekd-<kind> v1" followed by one
// JSON object per line. Writers emit a fixed key order and print every float
// with 17 significant digits, so equal in-memory values always produce
// byte-identical files and every double survives a round trip exactly.
//
//   groups:   {"query_id", "docs": [{"doc_id", "features", "label",
//              "teacher_logits"}]}           (one query group per line)
//   ensemble: {"query_id", "logits", "final_weights", "iterations_used",
//              "converged"}                  (one group per line)
//   model:    {"architecture": "linear"|"mlp", "hidden_sizes",
//              "feature_dim", "weights"}     (single line)
//   report:   {"mean_pnr", "per_query_pnr": [{"query_id", "pnr": num|null}],
//              "skipped_no_discordant", "skipped_no_pairs",
//              "dcg_at_k": num|null, "parameters": [[key, value], ...]}
//                                            (single line)

// Parses a groups file. Malformed JSON or schema violations raise ParseError
// naming the line; invariant violations (grade range, dimension mismatches,
// non-finite values, duplicate doc ids) raise ValidationError naming the
// line. An empty file yields an empty dataset.
Dataset read_groups(const std::string& path);

void write_groups(const Dataset& dataset, const std::string& path);

using NamedEnsemble = std::pair<std::string, EnsembleOutput>;

void write_ensemble(const std::vector<NamedEnsemble>& outputs,
                    const std::string& path);
std::vector<NamedEnsemble> read_ensemble(const std::string& path);

void write_model(const StudentParams& params, const std::string& path);
StudentParams read_model(const std::string& path);

void write_report(const MetricReport& report, const std::string& path);
MetricReport read_report(const std::string& path);

}  // namespace pilekd

#endif  // PILEKD_IO_HPP_
