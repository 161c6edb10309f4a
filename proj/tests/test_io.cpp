#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "pilekd/ensemble.hpp"
#include "pilekd/errors.hpp"
#include "pilekd/io.hpp"

using namespace pilekd;
using testutil::TempDir;
using testutil::read_file;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

Dataset awkward_dataset() {
    // Values chosen to stress float printing and string escaping.
    Dataset ds;
    ds.feature_dim = 2;
    ds.num_teachers = 2;
    QueryGroup g;
    g.query_id = "q \"zero\"\t\\slash";
    g.docs.push_back({"d0", {0.1, -1.0 / 3.0}, {0}, {1e-300, -1e300}});
    g.docs.push_back({"d1", {5e-324, 0.0}, {4}, {0.1 + 0.2, 1.0 / 7.0}});
    ds.groups.push_back(g);
    QueryGroup g2;
    g2.query_id = "q1\ncontains newline";
    g2.docs.push_back({"a/b", {1.5, 2.5}, {2}, {0.25, -0.75}});
    ds.groups.push_back(g2);
    return ds;
}

}  // namespace

TEST_SUITE_BEGIN("io");

TEST_CASE("groups round-trip exactly, including hostile strings and doubles") {
    TempDir tmp;
    const Dataset ds = awkward_dataset();
    const std::string path = tmp.file("groups.jsonl");
    write_groups(ds, path);
    const Dataset back = read_groups(path);
    CHECK(back == ds);

    // Writing what was read reproduces the file byte for byte.
    const std::string again = tmp.file("again.jsonl");
    write_groups(back, again);
    CHECK(read_file(path) == read_file(again));
}

TEST_CASE("groups round-trip on random data") {
    TempDir tmp;
    Rng rng(61);
    for (int trial = 0; trial < 10; ++trial) {
        const Dataset ds = testutil::random_dataset(
            rng, 1 + int(rng.below(5)), 1 + int(rng.below(6)),
            1 + int(rng.below(4)), int(rng.below(4)));
        const std::string path = tmp.file("r" + std::to_string(trial) + ".jsonl");
        write_groups(ds, path);
        CHECK(read_groups(path) == ds);
    }
}

TEST_CASE("empty and header-only files give an empty dataset") {
    TempDir tmp;
    const std::string empty = tmp.file("empty.jsonl");
    write_text(empty, "");
    const Dataset a = read_groups(empty);
    CHECK(a.groups.empty());

    const std::string header_only = tmp.file("header.jsonl");
    write_text(header_only, "# pilekd-groups v1\n");
    const Dataset b = read_groups(header_only);
    CHECK(b.groups.empty());

    // Writing an empty dataset still emits the header.
    const std::string out = tmp.file("out.jsonl");
    write_groups(Dataset{}, out);
    CHECK(read_file(out) == "# pilekd-groups v1\n");
}

TEST_CASE("wrong or foreign header is rejected at line 1") {
    TempDir tmp;
    const std::string path = tmp.file("bad.jsonl");
    write_text(path, "# pilekd-ensemble v1\n");
    CHECK_THROWS_AS(read_groups(path), ParseError);
    try {
        read_groups(path);
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
}

TEST_CASE("malformed JSON names its line") {
    TempDir tmp;
    const std::string path = tmp.file("bad.jsonl");
    write_text(path,
               "# pilekd-groups v1\n"
               "{\"query_id\": \"q0\", \"docs\": [{\"doc_id\": \"a\", \"features\": [0.0], "
               "\"label\": 0, \"teacher_logits\": []}]}\n"
               "{not json\n");
    try {
        read_groups(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("teacher-count mismatch reports the offending line") {
    TempDir tmp;
    std::string text = "# pilekd-groups v1\n";
    for (int g = 0; g < 6; ++g) {
        const std::string logits = (g == 5) ? "[0.1]" : "[0.1, 0.2]";
        text += "{\"query_id\": \"q" + std::to_string(g) +
                "\", \"docs\": [{\"doc_id\": \"a\", \"features\": [0.0], \"label\": 1, "
                "\"teacher_logits\": [0.3, 0.4]}, {\"doc_id\": \"b\", \"features\": [1.0], "
                "\"label\": 2, \"teacher_logits\": " + logits + "}]}\n";
    }
    const std::string path = tmp.file("mismatch.jsonl");
    write_text(path, text);
    try {
        read_groups(path);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string what = e.what();
        CHECK(what.find("line 7") != std::string::npos);  // header + 6 groups
        CHECK(what.find("\"b\"") != std::string::npos);
        CHECK(what.find("1") != std::string::npos);
        CHECK(what.find("2") != std::string::npos);
    }
}

TEST_CASE("schema and invariant violations are caught with their line") {
    TempDir tmp;
    const std::string head = "# pilekd-groups v1\n";
    struct Case {
        const char* body;
        bool parse_error;  // otherwise ValidationError
    };
    const Case cases[] = {
        // label out of range
        {"{\"query_id\": \"q\", \"docs\": [{\"doc_id\": \"a\", \"features\": [0.0], "
         "\"label\": 9, \"teacher_logits\": []}]}",
         false},
        // duplicate doc id
        {"{\"query_id\": \"q\", \"docs\": [{\"doc_id\": \"a\", \"features\": [0.0], "
         "\"label\": 1, \"teacher_logits\": []}, {\"doc_id\": \"a\", \"features\": [1.0], "
         "\"label\": 2, \"teacher_logits\": []}]}",
         false},
        // empty docs array
        {"{\"query_id\": \"q\", \"docs\": []}", false},
        // feature dimension mismatch
        {"{\"query_id\": \"q\", \"docs\": [{\"doc_id\": \"a\", \"features\": [0.0], "
         "\"label\": 1, \"teacher_logits\": []}, {\"doc_id\": \"b\", \"features\": [1.0, 2.0], "
         "\"label\": 2, \"teacher_logits\": []}]}",
         false},
        // missing field
        {"{\"query_id\": \"q\", \"docs\": [{\"doc_id\": \"a\", \"label\": 1, "
         "\"teacher_logits\": []}]}",
         true},
        // wrong type
        {"{\"query_id\": \"q\", \"docs\": [{\"doc_id\": \"a\", \"features\": \"nope\", "
         "\"label\": 1, \"teacher_logits\": []}]}",
         true},
        // fractional label
        {"{\"query_id\": \"q\", \"docs\": [{\"doc_id\": \"a\", \"features\": [0.0], "
         "\"label\": 1.5, \"teacher_logits\": []}]}",
         true},
    };
    int idx = 0;
    for (const auto& c : cases) {
        const std::string path = tmp.file("case" + std::to_string(idx++) + ".jsonl");
        write_text(path, head + c.body + "\n");
        try {
            read_groups(path);
            FAIL("expected an error for case " << idx - 1);
        } catch (const ParseError& e) {
            CHECK(c.parse_error);
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        } catch (const ValidationError& e) {
            CHECK_FALSE(c.parse_error);
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
}

TEST_CASE("non-finite values are refused at write time") {
    TempDir tmp;
    Dataset ds = awkward_dataset();
    ds.groups[0].docs[0].features[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(write_groups(ds, tmp.file("inf.jsonl")), ValidationError);
}

TEST_CASE("unwritable and missing paths raise io errors") {
    CHECK_THROWS_AS(write_groups(Dataset{}, "/nonexistent-dir/x.jsonl"), IoError);
    CHECK_THROWS_AS(read_groups("/nonexistent-dir/x.jsonl"), IoError);
}

TEST_CASE("ensemble files round-trip exactly") {
    TempDir tmp;
    Rng rng(67);
    std::vector<NamedEnsemble> outs;
    for (int g = 0; g < 4; ++g) {
        QueryGroup grp = testutil::random_group(rng, 3 + int(rng.below(4)), 3);
        PileConfig pc;
        pc.seed = rng.next();
        outs.emplace_back("q" + std::to_string(g), pile_ensemble(grp, pc));
        outs.back().second.trace.reset();  // traces are not persisted
    }
    const std::string path = tmp.file("ens.jsonl");
    write_ensemble(outs, path);
    const auto back = read_ensemble(path);
    REQUIRE(back.size() == outs.size());
    for (std::size_t i = 0; i < outs.size(); ++i) {
        CHECK(back[i].first == outs[i].first);
        CHECK(back[i].second == outs[i].second);
    }
    const std::string again = tmp.file("ens2.jsonl");
    write_ensemble(back, again);
    CHECK(read_file(path) == read_file(again));
}

TEST_CASE("ensemble files validate weights and shapes") {
    TempDir tmp;
    const std::string head = "# pilekd-ensemble v1\n";
    const std::string path = tmp.file("bad.jsonl");

    // weight entry not 0/1
    write_text(path, head +
        "{\"query_id\": \"q\", \"logits\": [0.1, 0.2], \"final_weights\": [[1, 2], [1, 1]], "
        "\"iterations_used\": 0, \"converged\": true}\n");
    CHECK_THROWS_AS(read_ensemble(path), ValidationError);

    // ragged weight rows
    write_text(path, head +
        "{\"query_id\": \"q\", \"logits\": [0.1, 0.2], \"final_weights\": [[1], [1, 1]], "
        "\"iterations_used\": 0, \"converged\": true}\n");
    CHECK_THROWS_AS(read_ensemble(path), ValidationError);

    // row count != logit count
    write_text(path, head +
        "{\"query_id\": \"q\", \"logits\": [0.1, 0.2], \"final_weights\": [[1, 1]], "
        "\"iterations_used\": 0, \"converged\": true}\n");
    CHECK_THROWS_AS(read_ensemble(path), ValidationError);

    // negative iteration counter
    write_text(path, head +
        "{\"query_id\": \"q\", \"logits\": [0.1], \"final_weights\": [[1]], "
        "\"iterations_used\": -2, \"converged\": true}\n");
    CHECK_THROWS_AS(read_ensemble(path), ValidationError);
}

TEST_CASE("model files round-trip exactly for both architectures") {
    TempDir tmp;
    Rng rng(71);

    StudentParams linear = init_params(Architecture::Linear, {}, 4, rng);
    const std::string lpath = tmp.file("linear.jsonl");
    write_model(linear, lpath);
    CHECK(read_model(lpath) == linear);

    StudentParams mlp = init_params(Architecture::Mlp, {5, 3}, 4, rng);
    const std::string mpath = tmp.file("mlp.jsonl");
    write_model(mlp, mpath);
    const StudentParams back = read_model(mpath);
    CHECK(back == mlp);

    // Round-tripped parameters score identically, bit for bit.
    for (int i = 0; i < 20; ++i) {
        std::vector<double> x;
        for (int f = 0; f < 4; ++f) x.push_back(rng.normal());
        CHECK(score(back, x) == score(mlp, x));
    }
}

TEST_CASE("model files validate their schema") {
    TempDir tmp;
    const std::string head = "# pilekd-model v1\n";
    const std::string path = tmp.file("bad.jsonl");

    write_text(path, head +
        "{\"architecture\": \"transformer\", \"hidden_sizes\": [], \"feature_dim\": 2, "
        "\"weights\": [0.0, 0.0, 0.0]}\n");
    CHECK_THROWS_AS(read_model(path), ValidationError);

    // weight count inconsistent with the declared shape
    write_text(path, head +
        "{\"architecture\": \"linear\", \"hidden_sizes\": [], \"feature_dim\": 2, "
        "\"weights\": [0.0, 0.0]}\n");
    CHECK_THROWS_AS(read_model(path), ValidationError);

    // hidden layer of size zero
    write_text(path, head +
        "{\"architecture\": \"mlp\", \"hidden_sizes\": [0], \"feature_dim\": 2, "
        "\"weights\": [0.0]}\n");
    CHECK_THROWS_AS(read_model(path), ValidationError);

    // model files hold exactly one record
    write_text(path, head +
        "{\"architecture\": \"linear\", \"hidden_sizes\": [], \"feature_dim\": 1, "
        "\"weights\": [0.0, 0.0]}\n"
        "{\"architecture\": \"linear\", \"hidden_sizes\": [], \"feature_dim\": 1, "
        "\"weights\": [0.0, 0.0]}\n");
    CHECK_THROWS_AS(read_model(path), ParseError);

    write_text(path, head);
    CHECK_THROWS_AS(read_model(path), ParseError);
}

TEST_CASE("report files round-trip exactly") {
    TempDir tmp;
    MetricReport report;
    report.mean_pnr = 2.0 / 3.0;
    report.per_query_pnr = {{"q0", 1.5}, {"q1", std::nullopt}, {"q2", 0.0}};
    report.skipped_no_discordant = 1;
    report.skipped_no_pairs = 2;
    report.dcg_at_k = 4.25;
    report.parameters = {{"gain", "linear"}, {"dcg_k", "5"}};
    const std::string path = tmp.file("report.jsonl");
    write_report(report, path);
    const MetricReport back = read_report(path);
    CHECK(back.mean_pnr == report.mean_pnr);
    CHECK(back.per_query_pnr == report.per_query_pnr);
    CHECK(back.skipped_no_discordant == report.skipped_no_discordant);
    CHECK(back.skipped_no_pairs == report.skipped_no_pairs);
    CHECK(back.dcg_at_k == report.dcg_at_k);
    CHECK(back.parameters == report.parameters);

    report.dcg_at_k.reset();
    write_report(report, path);
    CHECK_FALSE(read_report(path).dcg_at_k.has_value());

    const std::string again = tmp.file("report2.jsonl");
    write_report(back, again);
    write_report(read_report(path), path);  // idempotent rewrite
    CHECK(read_file(again) != "");
}

TEST_SUITE_END();
