#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "pilekd/rng.hpp"
#include "pilekd/types.hpp"

namespace testutil {

// Two-doc query from the worked ensemble example: a low-relevance doc that
// every teacher overrates and a high-relevance doc that every teacher
// underrates relative to each other.
inline pilekd::QueryGroup table4_group() {
    pilekd::QueryGroup g;
    g.query_id = "q_table";
    g.docs.push_back({"d_low", {0.0}, pilekd::RelevanceLabel{0}, {0.0589, 0.1923, 0.1057}});
    g.docs.push_back({"d_high", {1.0}, pilekd::RelevanceLabel{3}, {0.0271, 0.0331, 0.0983}});
    return g;
}

inline pilekd::QueryGroup random_group(pilekd::Rng& rng, int n_docs, int n_teachers,
                                       int feature_dim = 2) {
    pilekd::QueryGroup g;
    g.query_id = "qr";
    for (int i = 0; i < n_docs; ++i) {
        pilekd::DocEntry doc;
        doc.doc_id = "d" + std::to_string(i);
        for (int f = 0; f < feature_dim; ++f) doc.features.push_back(rng.normal());
        doc.label.value = static_cast<int>(rng.below(5));
        for (int k = 0; k < n_teachers; ++k) doc.teacher_logits.push_back(rng.uniform(-1.0, 1.0));
        g.docs.push_back(std::move(doc));
    }
    return g;
}

inline pilekd::Dataset random_dataset(pilekd::Rng& rng, int n_groups, int docs_per_group,
                                      int feature_dim, int n_teachers) {
    pilekd::Dataset ds;
    ds.feature_dim = feature_dim;
    ds.num_teachers = n_teachers;
    for (int q = 0; q < n_groups; ++q) {
        pilekd::QueryGroup g = random_group(rng, docs_per_group, n_teachers, feature_dim);
        g.query_id = "q" + std::to_string(q);
        for (auto& d : g.docs) d.doc_id = g.query_id + "_" + d.doc_id;
        ds.groups.push_back(std::move(g));
    }
    return ds;
}

// Scratch directory removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "pilekd_test_XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (::mkdtemp(buf.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
        path = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::string shell_quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'') q += "'\\''";
        else q += c;
    }
    q += "'";
    return q;
}

// Runs the installed CLI binary (path in PILEKD_BIN) with the given args,
// capturing exit code, stdout, and stderr. `env_prefix` may hold extra
// KEY=VALUE assignments such as "PILEKD_SEED=7 ".
inline CliResult run_cli(const std::vector<std::string>& args,
                         const std::string& env_prefix = "") {
    const char* bin = std::getenv("PILEKD_BIN");
    if (bin == nullptr) throw std::runtime_error("PILEKD_BIN not set");
    TempDir cap;
    std::string cmd = env_prefix + shell_quote(bin);
    for (const auto& a : args) cmd += " " + shell_quote(a);
    cmd += " >" + shell_quote(cap.file("out")) + " 2>" + shell_quote(cap.file("err"));
    int raw = std::system(cmd.c_str());
    CliResult r;
    if (raw == -1) r.exit_code = -1;
    else if (WIFEXITED(raw)) r.exit_code = WEXITSTATUS(raw);
    else r.exit_code = 128;
    r.out = read_file(cap.file("out"));
    r.err = read_file(cap.file("err"));
    return r;
}

}  // namespace testutil
