#include "pilekd/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>

#include "json.hpp"
#include "pilekd/errors.hpp"

namespace pilekd {

namespace {

using nlohmann::json;

constexpr const char* kGroupsHeader = "# pilekd-groups v1";
constexpr const char* kEnsembleHeader = "# pilekd-ensemble v1";
constexpr const char* kModelHeader = "# pilekd-model v1";
constexpr const char* kReportHeader = "# pilekd-report v1";

std::string at_line(std::size_t line, const std::string& message) {
  return "line " + std::to_string(line) + ": " + message;
}

// Serializer with a fixed key order and 17-significant-digit floats, so the
// byte stream is a pure function of the value being written.
class JsonWriter {
 public:
  std::string take() { return std::move(out_); }

  void begin_object() { comma(); out_ += '{'; first_ = true; }
  void end_object() { out_ += '}'; first_ = false; }
  void begin_array() { comma(); out_ += '['; first_ = true; }
  void end_array() { out_ += ']'; first_ = false; }

  void key(const char* name) {
    comma();
    append_string(name);
    out_ += ':';
    first_ = true;  // suppress the comma before the value
  }

  void value(const std::string& s) { comma(); append_string(s.c_str()); }
  void value(const char* s) { comma(); append_string(s); }

  void value(double v) {
    if (!std::isfinite(v)) {
      throw ValidationError("cannot serialize non-finite value");
    }
    comma();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out_ += buf;
  }

  void value_int(long long v) {
    comma();
    out_ += std::to_string(v);
  }

  void value(bool b) { comma(); out_ += b ? "true" : "false"; }
  void null() { comma(); out_ += "null"; }

 private:
  void comma() {
    if (!first_) out_ += ',';
    first_ = false;
  }

  void append_string(const char* s) {
    out_ += '"';
    for (const char* p = s; *p; ++p) {
      const unsigned char c = static_cast<unsigned char>(*p);
      switch (c) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\b': out_ += "\\b"; break;
        case '\f': out_ += "\\f"; break;
        case '\n': out_ += "\\n"; break;
        case '\r': out_ += "\\r"; break;
        case '\t': out_ += "\\t"; break;
        default:
          if (c < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "\\u%04x", c);
            out_ += buf;
          } else {
            out_ += static_cast<char>(c);
          }
      }
    }
    out_ += '"';
  }

  std::string out_;
  bool first_ = true;
};

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open for writing: " + path);
  file.write(contents.data(),
             static_cast<std::streamsize>(contents.size()));
  file.flush();
  if (!file) throw IoError("write failed: " + path);
}

// Reads all lines; returns false if the file does not exist / cannot open.
std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open for reading: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(file, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Checks the header and returns the data lines paired with their 1-based
// line numbers. A completely empty file yields no records.
std::vector<std::pair<std::size_t, std::string>> data_lines(
    const std::string& path, const char* header) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<std::pair<std::size_t, std::string>> records;
  bool saw_header = false;
  for (std::size_t idx = 0; idx < lines.size(); ++idx) {
    const std::string& line = lines[idx];
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != header) {
        throw ParseError(at_line(idx + 1, "expected header \"" +
                                              std::string(header) + "\""));
      }
      saw_header = true;
      continue;
    }
    records.emplace_back(idx + 1, line);
  }
  return records;
}

json parse_record(const std::string& line, std::size_t line_no) {
  try {
    json value = json::parse(line);
    if (!value.is_object()) {
      throw ParseError(at_line(line_no, "expected a JSON object"));
    }
    return value;
  } catch (const json::exception& e) {
    throw ParseError(at_line(line_no, e.what()));
  }
}

const json& require(const json& obj, const char* field, std::size_t line_no) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw ParseError(
        at_line(line_no, "missing field \"" + std::string(field) + "\""));
  }
  return *it;
}

double require_number(const json& obj, const char* field,
                      std::size_t line_no) {
  const json& v = require(obj, field, line_no);
  if (!v.is_number()) {
    throw ParseError(
        at_line(line_no, "field \"" + std::string(field) + "\" must be a number"));
  }
  return v.get<double>();
}

long long require_int(const json& obj, const char* field,
                      std::size_t line_no) {
  const json& v = require(obj, field, line_no);
  if (!v.is_number_integer()) {
    throw ParseError(at_line(
        line_no, "field \"" + std::string(field) + "\" must be an integer"));
  }
  return v.get<long long>();
}

std::string require_string(const json& obj, const char* field,
                           std::size_t line_no) {
  const json& v = require(obj, field, line_no);
  if (!v.is_string()) {
    throw ParseError(at_line(
        line_no, "field \"" + std::string(field) + "\" must be a string"));
  }
  return v.get<std::string>();
}

std::vector<double> require_number_array(const json& obj, const char* field,
                                         std::size_t line_no) {
  const json& v = require(obj, field, line_no);
  if (!v.is_array()) {
    throw ParseError(at_line(
        line_no, "field \"" + std::string(field) + "\" must be an array"));
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& elem : v) {
    if (!elem.is_number()) {
      throw ParseError(at_line(line_no, "field \"" + std::string(field) +
                                            "\" must contain only numbers"));
    }
    out.push_back(elem.get<double>());
  }
  return out;
}

void check_finite(const std::vector<double>& values, const char* what,
                  std::size_t line_no) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw ValidationError(
          at_line(line_no, std::string(what) + " contains a non-finite value"));
    }
  }
}

void append_doubles(JsonWriter& w, const std::vector<double>& values) {
  w.begin_array();
  for (double v : values) w.value(v);
  w.end_array();
}

}  // namespace

Dataset read_groups(const std::string& path) {
  Dataset dataset;
  bool dims_known = false;
  for (const auto& [line_no, line] : data_lines(path, kGroupsHeader)) {
    const json record = parse_record(line, line_no);
    QueryGroup group;
    group.query_id = require_string(record, "query_id", line_no);
    const json& docs = require(record, "docs", line_no);
    if (!docs.is_array()) {
      throw ParseError(at_line(line_no, "field \"docs\" must be an array"));
    }
    if (docs.empty()) {
      throw ValidationError(
          at_line(line_no, "group \"" + group.query_id + "\" has no docs"));
    }
    std::unordered_set<std::string> seen_ids;
    for (const json& doc_json : docs) {
      if (!doc_json.is_object()) {
        throw ParseError(at_line(line_no, "docs entries must be objects"));
      }
      DocEntry doc;
      doc.doc_id = require_string(doc_json, "doc_id", line_no);
      if (!seen_ids.insert(doc.doc_id).second) {
        throw ValidationError(
            at_line(line_no, "duplicate doc_id \"" + doc.doc_id + "\""));
      }
      doc.features = require_number_array(doc_json, "features", line_no);
      check_finite(doc.features, "features", line_no);
      const long long label = require_int(doc_json, "label", line_no);
      if (label < kMinGrade || label > kMaxGrade) {
        throw ValidationError(at_line(
            line_no, "doc \"" + doc.doc_id + "\" has label " +
                         std::to_string(label) + ", expected 0..4"));
      }
      doc.label.value = static_cast<int>(label);
      doc.teacher_logits = require_number_array(doc_json, "teacher_logits",
                                                line_no);
      check_finite(doc.teacher_logits, "teacher_logits", line_no);

      if (!dims_known) {
        dataset.feature_dim = doc.features.size();
        dataset.num_teachers = doc.teacher_logits.size();
        dims_known = true;
      }
      if (doc.features.size() != dataset.feature_dim) {
        throw ValidationError(at_line(
            line_no, "doc \"" + doc.doc_id + "\" has " +
                         std::to_string(doc.features.size()) +
                         " features, expected " +
                         std::to_string(dataset.feature_dim)));
      }
      if (doc.teacher_logits.size() != dataset.num_teachers) {
        throw ValidationError(at_line(
            line_no, "doc \"" + doc.doc_id + "\" has " +
                         std::to_string(doc.teacher_logits.size()) +
                         " teacher logits, expected " +
                         std::to_string(dataset.num_teachers)));
      }
      group.docs.push_back(std::move(doc));
    }
    dataset.groups.push_back(std::move(group));
  }
  return dataset;
}

void write_groups(const Dataset& dataset, const std::string& path) {
  std::string out = kGroupsHeader;
  out += '\n';
  for (const auto& group : dataset.groups) {
    JsonWriter w;
    w.begin_object();
    w.key("query_id");
    w.value(group.query_id);
    w.key("docs");
    w.begin_array();
    for (const auto& doc : group.docs) {
      w.begin_object();
      w.key("doc_id");
      w.value(doc.doc_id);
      w.key("features");
      append_doubles(w, doc.features);
      w.key("label");
      w.value_int(doc.label.value);
      w.key("teacher_logits");
      append_doubles(w, doc.teacher_logits);
      w.end_object();
    }
    w.end_array();
    w.end_object();
    out += w.take();
    out += '\n';
  }
  write_file(path, out);
}

void write_ensemble(const std::vector<NamedEnsemble>& outputs,
                    const std::string& path) {
  std::string out = kEnsembleHeader;
  out += '\n';
  for (const auto& [query_id, ensemble] : outputs) {
    JsonWriter w;
    w.begin_object();
    w.key("query_id");
    w.value(query_id);
    w.key("logits");
    append_doubles(w, ensemble.logits);
    w.key("final_weights");
    w.begin_array();
    for (std::size_t i = 0; i < ensemble.final_weights.rows; ++i) {
      w.begin_array();
      for (std::size_t k = 0; k < ensemble.final_weights.cols; ++k) {
        w.value_int(ensemble.final_weights.at(i, k));
      }
      w.end_array();
    }
    w.end_array();
    w.key("iterations_used");
    w.value_int(static_cast<long long>(ensemble.iterations_used));
    w.key("converged");
    w.value(ensemble.converged);
    w.end_object();
    out += w.take();
    out += '\n';
  }
  write_file(path, out);
}

std::vector<NamedEnsemble> read_ensemble(const std::string& path) {
  std::vector<NamedEnsemble> outputs;
  for (const auto& [line_no, line] : data_lines(path, kEnsembleHeader)) {
    const json record = parse_record(line, line_no);
    NamedEnsemble entry;
    entry.first = require_string(record, "query_id", line_no);
    EnsembleOutput& ensemble = entry.second;
    ensemble.logits = require_number_array(record, "logits", line_no);
    check_finite(ensemble.logits, "logits", line_no);

    const json& weights = require(record, "final_weights", line_no);
    if (!weights.is_array()) {
      throw ParseError(
          at_line(line_no, "field \"final_weights\" must be an array"));
    }
    if (weights.size() != ensemble.logits.size()) {
      throw ValidationError(at_line(
          line_no, "final_weights rows (" + std::to_string(weights.size()) +
                       ") do not match logits (" +
                       std::to_string(ensemble.logits.size()) + ")"));
    }
    std::size_t cols = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const json& row = weights[i];
      if (!row.is_array()) {
        throw ParseError(
            at_line(line_no, "final_weights rows must be arrays"));
      }
      if (i == 0) {
        cols = row.size();
        ensemble.final_weights = WeightMatrix(weights.size(), cols, 0);
      } else if (row.size() != cols) {
        throw ValidationError(
            at_line(line_no, "final_weights rows have uneven lengths"));
      }
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (!row[k].is_number_integer()) {
          throw ParseError(
              at_line(line_no, "final_weights entries must be integers"));
        }
        const long long v = row[k].get<long long>();
        if (v != 0 && v != 1) {
          throw ValidationError(
              at_line(line_no, "final_weights entries must be 0 or 1"));
        }
        ensemble.final_weights.at(i, k) = static_cast<std::uint8_t>(v);
      }
    }

    const long long iterations = require_int(record, "iterations_used",
                                             line_no);
    if (iterations < 0) {
      throw ValidationError(at_line(line_no, "iterations_used must be >= 0"));
    }
    ensemble.iterations_used = static_cast<std::uint64_t>(iterations);
    const json& converged = require(record, "converged", line_no);
    if (!converged.is_boolean()) {
      throw ParseError(
          at_line(line_no, "field \"converged\" must be a boolean"));
    }
    ensemble.converged = converged.get<bool>();
    outputs.push_back(std::move(entry));
  }
  return outputs;
}

void write_model(const StudentParams& params, const std::string& path) {
  std::string out = kModelHeader;
  out += '\n';
  JsonWriter w;
  w.begin_object();
  w.key("architecture");
  w.value(params.architecture == Architecture::Linear ? "linear" : "mlp");
  w.key("hidden_sizes");
  w.begin_array();
  for (int h : params.hidden_sizes) w.value_int(h);
  w.end_array();
  w.key("feature_dim");
  w.value_int(static_cast<long long>(params.feature_dim));
  w.key("weights");
  append_doubles(w, params.weights);
  w.end_object();
  out += w.take();
  out += '\n';
  write_file(path, out);
}

StudentParams read_model(const std::string& path) {
  const auto records = data_lines(path, kModelHeader);
  if (records.empty()) throw ParseError("no model record in " + path);
  if (records.size() > 1) {
    throw ParseError(at_line(records[1].first,
                             "expected exactly one model record"));
  }
  const auto& [line_no, line] = records.front();
  const json record = parse_record(line, line_no);

  StudentParams params;
  const std::string arch = require_string(record, "architecture", line_no);
  if (arch == "linear") {
    params.architecture = Architecture::Linear;
  } else if (arch == "mlp") {
    params.architecture = Architecture::Mlp;
  } else {
    throw ValidationError(
        at_line(line_no, "unknown architecture \"" + arch + "\""));
  }
  const json& hidden = require(record, "hidden_sizes", line_no);
  if (!hidden.is_array()) {
    throw ParseError(
        at_line(line_no, "field \"hidden_sizes\" must be an array"));
  }
  for (const json& h : hidden) {
    if (!h.is_number_integer() || h.get<long long>() < 1) {
      throw ValidationError(
          at_line(line_no, "hidden_sizes must be positive integers"));
    }
    params.hidden_sizes.push_back(static_cast<int>(h.get<long long>()));
  }
  if (params.architecture == Architecture::Linear &&
      !params.hidden_sizes.empty()) {
    throw ValidationError(
        at_line(line_no, "linear architecture takes no hidden sizes"));
  }
  const long long dim = require_int(record, "feature_dim", line_no);
  if (dim < 1) {
    throw ValidationError(at_line(line_no, "feature_dim must be >= 1"));
  }
  params.feature_dim = static_cast<std::size_t>(dim);
  params.weights = require_number_array(record, "weights", line_no);
  check_finite(params.weights, "weights", line_no);
  const std::size_t expected = weight_count(
      params.architecture, params.hidden_sizes, params.feature_dim);
  if (params.weights.size() != expected) {
    throw ValidationError(at_line(
        line_no, "model has " + std::to_string(params.weights.size()) +
                     " weights, architecture requires " +
                     std::to_string(expected)));
  }
  return params;
}

void write_report(const MetricReport& report, const std::string& path) {
  std::string out = kReportHeader;
  out += '\n';
  JsonWriter w;
  w.begin_object();
  w.key("mean_pnr");
  w.value(report.mean_pnr);
  w.key("per_query_pnr");
  w.begin_array();
  for (const auto& [query_id, pnr] : report.per_query_pnr) {
    w.begin_object();
    w.key("query_id");
    w.value(query_id);
    w.key("pnr");
    if (pnr) {
      w.value(*pnr);
    } else {
      w.null();
    }
    w.end_object();
  }
  w.end_array();
  w.key("skipped_no_discordant");
  w.value_int(static_cast<long long>(report.skipped_no_discordant));
  w.key("skipped_no_pairs");
  w.value_int(static_cast<long long>(report.skipped_no_pairs));
  w.key("dcg_at_k");
  if (report.dcg_at_k) {
    w.value(*report.dcg_at_k);
  } else {
    w.null();
  }
  w.key("parameters");
  w.begin_array();
  for (const auto& [key, value] : report.parameters) {
    w.begin_array();
    w.value(key);
    w.value(value);
    w.end_array();
  }
  w.end_array();
  w.end_object();
  out += w.take();
  out += '\n';
  write_file(path, out);
}

MetricReport read_report(const std::string& path) {
  const auto records = data_lines(path, kReportHeader);
  if (records.empty()) throw ParseError("no report record in " + path);
  if (records.size() > 1) {
    throw ParseError(at_line(records[1].first,
                             "expected exactly one report record"));
  }
  const auto& [line_no, line] = records.front();
  const json record = parse_record(line, line_no);

  MetricReport report;
  report.mean_pnr = require_number(record, "mean_pnr", line_no);
  const json& per_query = require(record, "per_query_pnr", line_no);
  if (!per_query.is_array()) {
    throw ParseError(
        at_line(line_no, "field \"per_query_pnr\" must be an array"));
  }
  for (const json& entry : per_query) {
    if (!entry.is_object()) {
      throw ParseError(
          at_line(line_no, "per_query_pnr entries must be objects"));
    }
    const std::string query_id = require_string(entry, "query_id", line_no);
    const json& pnr = require(entry, "pnr", line_no);
    if (pnr.is_null()) {
      report.per_query_pnr.emplace_back(query_id, std::nullopt);
    } else if (pnr.is_number()) {
      report.per_query_pnr.emplace_back(query_id, pnr.get<double>());
    } else {
      throw ParseError(at_line(line_no, "pnr must be a number or null"));
    }
  }
  report.skipped_no_discordant = static_cast<std::size_t>(
      require_int(record, "skipped_no_discordant", line_no));
  report.skipped_no_pairs = static_cast<std::size_t>(
      require_int(record, "skipped_no_pairs", line_no));
  const json& dcg_at_k = require(record, "dcg_at_k", line_no);
  if (dcg_at_k.is_number()) {
    report.dcg_at_k = dcg_at_k.get<double>();
  } else if (!dcg_at_k.is_null()) {
    throw ParseError(at_line(line_no, "dcg_at_k must be a number or null"));
  }
  const json& parameters = require(record, "parameters", line_no);
  if (!parameters.is_array()) {
    throw ParseError(
        at_line(line_no, "field \"parameters\" must be an array"));
  }
  for (const json& pair : parameters) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() ||
        !pair[1].is_string()) {
      throw ParseError(at_line(
          line_no, "parameters entries must be [string, string] pairs"));
    }
    report.parameters.emplace_back(pair[0].get<std::string>(),
                                   pair[1].get<std::string>());
  }
  return report;
}

}  // namespace pilekd
