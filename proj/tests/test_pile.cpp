#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "pilekd/ensemble.hpp"
#include "pilekd/errors.hpp"

using namespace pilekd;
using testutil::table4_group;

namespace {

// Closed-form trajectory for the two-doc worked example: once the kept
// teacher sets stabilize after the first update, each logit relaxes
// geometrically toward its kept-teacher mean m with rate (1 - lambda):
// e(t) = m + (1 - lambda)^(t-1) * (e(1) - m).
double relaxed(double e1, double m, double lambda, int t) {
    return m + std::pow(1.0 - lambda, t - 1) * (e1 - m);
}

constexpr double kAeLow = (0.0589 + 0.1057 + 0.1923) / 3.0;   // doc with label 0
constexpr double kAeHigh = (0.0271 + 0.0331 + 0.0983) / 3.0;  // doc with label 3

// After one correction: the high doc keeps only 0.0983, the low doc keeps
// {0.0589, 0.1057}.
const double kLow1 = 0.1 * kAeLow + 0.9 * ((0.0589 + 0.1057) / 2.0);
const double kHigh1 = 0.1 * kAeHigh + 0.9 * 0.0983;

QueryGroup identical_teacher_group() {
    QueryGroup g;
    g.query_id = "q_same";
    g.docs.push_back({"a", {0.0}, {0}, {0.1, 0.1, 0.1}});
    g.docs.push_back({"b", {0.0}, {2}, {0.3, 0.3, 0.3}});
    g.docs.push_back({"c", {0.0}, {4}, {0.7, 0.7, 0.7}});
    return g;
}

}  // namespace

TEST_SUITE_BEGIN("pile");

TEST_CASE("average ensemble reproduces the worked example") {
    const auto e = average_ensemble(table4_group());
    REQUIRE(e.size() == 2);
    CHECK(e[0] == doctest::Approx(kAeLow).epsilon(1e-14));
    CHECK(e[1] == doctest::Approx(kAeHigh).epsilon(1e-14));
    // published reference values, quoted to 4 decimals
    CHECK(std::abs(e[0] - 0.1190) < 5e-5);
    CHECK(std::abs(e[1] - 0.0528) < 5e-5);
}

TEST_CASE("average ensemble of one teacher is that teacher, bit-exact") {
    Rng rng(1);
    QueryGroup g = testutil::random_group(rng, 6, 1);
    const auto e = average_ensemble(g);
    for (std::size_t i = 0; i < g.docs.size(); ++i)
        CHECK(e[i] == g.docs[i].teacher_logits[0]);
}

TEST_CASE("average ensemble of identical values cannot leave them") {
    QueryGroup g;
    g.docs.push_back({"a", {}, {0}, {0.1, 0.1, 0.1}});
    const auto e = average_ensemble(g);
    CHECK(e[0] == 0.1);  // (0.1+0.1+0.1)/3 rounds 1 ulp high without the guard
}

TEST_CASE("average ensemble requires at least one teacher") {
    QueryGroup g;
    g.docs.push_back({"a", {}, {0}, {}});
    CHECK_THROWS_AS(average_ensemble(g), InvalidInputError);
}

TEST_CASE("reversed-pair predicate is strict") {
    CHECK(is_reversed_pair(0.1, 0.2, {3}, {0}));        // higher label, lower logit
    CHECK_FALSE(is_reversed_pair(0.2, 0.1, {3}, {0}));  // correctly ordered
    CHECK_FALSE(is_reversed_pair(0.2, 0.2, {3}, {0}));  // logit tie
    CHECK_FALSE(is_reversed_pair(0.1, 0.2, {2}, {2}));  // label tie
    CHECK(is_reversed_pair(0.5, 0.4, {0}, {1}));        // reversed, other orientation
}

TEST_CASE("weight reassignment on the worked example") {
    const QueryGroup g = table4_group();
    const auto e = average_ensemble(g);
    const auto w = reassign_weights(g.docs[1].teacher_logits,
                                    g.docs[0].teacher_logits, e[1], e[0]);
    CHECK(w.hi == std::vector<std::uint8_t>{0, 0, 1});  // only 0.0983 >= 0.0528
    CHECK(w.lo == std::vector<std::uint8_t>{1, 0, 1});  // 0.1923 > 0.1190 dropped
}

TEST_CASE("weight reassignment keeps at least one teacher on each side") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 1 + static_cast<int>(rng.below(6));
        std::vector<double> f_hi, f_lo;
        for (int i = 0; i < k; ++i) {
            f_hi.push_back(rng.uniform(-1.0, 1.0));
            f_lo.push_back(rng.uniform(-1.0, 1.0));
        }
        // Ensemble logits inside each hull, as the algorithm maintains.
        const double e_hi = 0.5 * (*std::min_element(f_hi.begin(), f_hi.end()) +
                                   *std::max_element(f_hi.begin(), f_hi.end()));
        const double e_lo = 0.5 * (*std::min_element(f_lo.begin(), f_lo.end()) +
                                   *std::max_element(f_lo.begin(), f_lo.end()));
        const auto w = reassign_weights(f_hi, f_lo, e_hi, e_lo);
        int kept_hi = 0, kept_lo = 0;
        for (int i = 0; i < k; ++i) {
            if (w.hi[i]) {
                ++kept_hi;
                CHECK(f_hi[i] >= e_hi);
            } else {
                CHECK(f_hi[i] < e_hi);
            }
            if (w.lo[i]) {
                ++kept_lo;
                CHECK(f_lo[i] <= e_lo);
            } else {
                CHECK(f_lo[i] > e_lo);
            }
        }
        CHECK(kept_hi >= 1);
        CHECK(kept_lo >= 1);
    }
}

TEST_CASE("blend step on the worked example") {
    const QueryGroup g = table4_group();
    const auto e = average_ensemble(g);
    const auto w = reassign_weights(g.docs[1].teacher_logits,
                                    g.docs[0].teacher_logits, e[1], e[0]);
    const double new_hi = blend_update(e[1], w.hi, g.docs[1].teacher_logits, 0.9);
    const double new_lo = blend_update(e[0], w.lo, g.docs[0].teacher_logits, 0.9);
    CHECK(new_hi == doctest::Approx(kHigh1).epsilon(1e-13));
    CHECK(new_lo == doctest::Approx(kLow1).epsilon(1e-13));
    CHECK(std::abs(new_hi - 0.09375) < 1e-5);
    CHECK(std::abs(new_lo - 0.08597) < 1e-5);
}

TEST_CASE("blend step degenerate rates") {
    const std::vector<double> f{0.2, 0.6};
    const std::vector<std::uint8_t> ones{1, 1};
    CHECK(blend_update(0.3, ones, f, 0.0) == 0.3);  // bit-exact no-op
    CHECK(blend_update(0.3, ones, f, 1.0) == 0.4);  // jumps to the mean
    // Target equal to the current value: returns the current value bit-exactly.
    const std::vector<double> same{0.1, 0.1, 0.1};
    const std::vector<std::uint8_t> ones3{1, 1, 1};
    CHECK(blend_update(0.1, ones3, same, 0.9) == 0.1);
}

TEST_CASE("blend step stays inside [old, target] for any lambda") {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const int k = 1 + static_cast<int>(rng.below(5));
        std::vector<double> f;
        std::vector<std::uint8_t> w;
        for (int i = 0; i < k; ++i) {
            f.push_back(rng.uniform(-2.0, 2.0));
            w.push_back(1);
        }
        const double e_old = rng.uniform(-2.0, 2.0);
        const double lambda = rng.uniform(0.0, 1.0);
        const double target = blend_update(e_old, w, f, 1.0);
        const double e_new = blend_update(e_old, w, f, lambda);
        CHECK(e_new >= std::min(e_old, target));
        CHECK(e_new <= std::max(e_old, target));
    }
}

TEST_CASE("blend step rejects all-zero weights") {
    const std::vector<double> f{0.2, 0.6};
    const std::vector<std::uint8_t> zeros{0, 0};
    CHECK_THROWS_AS(blend_update(0.3, zeros, f, 0.5), InvalidStateError);
}

TEST_CASE("pair sampling orients by label and covers pairs uniformly") {
    QueryGroup g;
    g.docs.push_back({"a", {}, {0}, {0.0}});
    g.docs.push_back({"b", {}, {1}, {0.0}});
    g.docs.push_back({"c", {}, {2}, {0.0}});
    EnsembleState state;
    state.logits = {0.0, 0.0, 0.0};

    Rng rng(7);
    std::map<std::pair<std::size_t, std::size_t>, int> counts;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto pair = sample_pair(g, state, PairPolicy::UniformRandom, rng);
        REQUIRE(pair.has_value());
        CHECK(g.docs[pair->first].label > g.docs[pair->second].label);
        ++counts[*pair];
    }
    REQUIRE(counts.size() == 3);
    for (const auto& [key, c] : counts)
        CHECK(std::abs(c / double(n) - 1.0 / 3.0) < 0.02);
}

TEST_CASE("sweep sampling cycles through pairs in index order") {
    QueryGroup g;
    g.docs.push_back({"a", {}, {0}, {0.0}});
    g.docs.push_back({"b", {}, {1}, {0.0}});
    g.docs.push_back({"c", {}, {2}, {0.0}});
    Rng rng(0);
    EnsembleState state;
    state.logits = {0.0, 0.0, 0.0};
    // label-distinct pairs in index order: (0,1), (0,2), (1,2), oriented hi-first
    const std::vector<std::pair<std::size_t, std::size_t>> expect{
        {1, 0}, {2, 0}, {2, 1}, {1, 0}, {2, 0}};
    for (std::size_t t = 0; t < expect.size(); ++t) {
        state.iteration = t;
        const auto pair = sample_pair(g, state, PairPolicy::Sweep, rng);
        REQUIRE(pair.has_value());
        CHECK(*pair == expect[t]);
    }
}

TEST_CASE("pair sampling returns nothing when all labels are equal") {
    QueryGroup g;
    g.docs.push_back({"a", {}, {2}, {0.0}});
    g.docs.push_back({"b", {}, {2}, {0.0}});
    EnsembleState state;
    Rng rng(0);
    CHECK_FALSE(sample_pair(g, state, PairPolicy::UniformRandom, rng).has_value());
}

TEST_CASE("reversed-pair counting") {
    const std::vector<double> logits{0.3, 0.1, 0.2};
    const std::vector<int> labels{0, 2, 1};
    // (0,1): label 2 doc has 0.1 < 0.3 -> reversed; (0,2): 0.2 < 0.3 -> reversed;
    // (1,2): label 2 doc has 0.1 < 0.2 -> reversed.
    CHECK(count_reversed_pairs(logits, labels) == 3);
    CHECK(count_reversed_pairs(std::vector<double>{0.1, 0.2, 0.3}, labels) == 1);
    const std::vector<double> two{0.0, 0.0};
    CHECK(count_reversed_pairs(two, std::vector<int>{0, 3}) == 0);  // tie: not reversed
    CHECK_THROWS_AS(count_reversed_pairs(two, labels), InvalidInputError);
}

TEST_CASE("iterative ensemble, stop at order consistency") {
    PileConfig pc;
    pc.stop_policy = StopPolicy::OrderConsistent;
    const EnsembleOutput out = pile_ensemble(table4_group(), pc);
    REQUIRE(out.logits.size() == 2);
    CHECK(out.iterations_used == 1);
    CHECK(out.converged);
    CHECK(out.logits[0] == doctest::Approx(kLow1).epsilon(1e-13));
    CHECK(out.logits[1] == doctest::Approx(kHigh1).epsilon(1e-13));
    CHECK(std::abs(out.logits[0] - 0.08597) < 1e-4);
    CHECK(std::abs(out.logits[1] - 0.09375) < 1e-4);
    CHECK(count_reversed_pairs(out.logits, table4_group().label_values()) == 0);
    CHECK(out.final_weights.at(1, 0) == 0);
    CHECK(out.final_weights.at(1, 1) == 0);
    CHECK(out.final_weights.at(1, 2) == 1);
}

TEST_CASE("iterative ensemble, run to fixed point") {
    PileConfig pc;  // FixedPoint, lambda 0.9, epsilon 1e-4 by default
    // Two docs need four updates to settle; floor(2^1.5) = 2 would stop
    // early, so give the run more headroom.
    pc.max_iters_exponent = 3.0;
    const EnsembleOutput out = pile_ensemble(table4_group(), pc);
    REQUIRE(out.logits.size() == 2);
    CHECK(out.converged);
    CHECK(out.iterations_used == 4);
    // After update 1 the kept sets are fixed: the low doc relaxes toward
    // 0.0589, the high doc toward 0.0983.
    const double want_low = relaxed(kLow1, 0.0589, 0.9, 4);
    const double want_high = relaxed(kHigh1, 0.0983, 0.9, 4);
    CHECK(out.logits[0] == doctest::Approx(want_low).epsilon(1e-10));
    CHECK(out.logits[1] == doctest::Approx(want_high).epsilon(1e-10));
    // published reference values (0.0590, 0.0981)
    CHECK(std::abs(out.logits[0] - 0.0590) < 0.0015);
    CHECK(std::abs(out.logits[1] - 0.0981) < 0.0015);
}

TEST_CASE("fixed point is insensitive to the pair policy on two docs") {
    PileConfig pc;
    pc.pair_policy = PairPolicy::Sweep;
    const EnsembleOutput sweep = pile_ensemble(table4_group(), pc);
    pc.pair_policy = PairPolicy::UniformRandom;
    const EnsembleOutput rand = pile_ensemble(table4_group(), pc);
    CHECK(sweep.logits == rand.logits);
    CHECK(sweep.iterations_used == rand.iterations_used);
}

TEST_CASE("single-teacher ensemble is the teacher, bit-exact") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        QueryGroup g = testutil::random_group(rng, 2 + int(rng.below(8)), 1);
        PileConfig pc;
        pc.seed = rng.next();
        const EnsembleOutput out = pile_ensemble(g, pc);
        for (std::size_t i = 0; i < g.docs.size(); ++i) {
            CHECK(out.logits[i] == g.docs[i].teacher_logits[0]);
            CHECK(out.final_weights.at(i, 0) == 1);
        }
    }
}

TEST_CASE("identical teachers are a no-op, bit-exact") {
    const QueryGroup g = identical_teacher_group();
    PileConfig pc;
    const EnsembleOutput out = pile_ensemble(g, pc);
    CHECK(out.converged);
    CHECK(out.iterations_used == 0);
    CHECK(out.logits == std::vector<double>{0.1, 0.3, 0.7});
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 3; ++k) CHECK(out.final_weights.at(i, k) == 1);
}

TEST_CASE("permuting teachers permutes weights and keeps logits bit-identical") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 2 + static_cast<int>(rng.below(5));
        QueryGroup g = testutil::random_group(rng, 2 + int(rng.below(8)), k);

        std::vector<int> perm(k);
        for (int i = 0; i < k; ++i) perm[i] = i;
        rng.shuffle(perm);

        QueryGroup permuted = g;
        for (std::size_t d = 0; d < g.docs.size(); ++d)
            for (int i = 0; i < k; ++i)
                permuted.docs[d].teacher_logits[i] =
                    g.docs[d].teacher_logits[static_cast<std::size_t>(perm[i])];

        PileConfig pc;
        pc.seed = rng.next();
        for (StopPolicy sp : {StopPolicy::OrderConsistent, StopPolicy::FixedPoint}) {
            pc.stop_policy = sp;
            const EnsembleOutput a = pile_ensemble(g, pc);
            const EnsembleOutput b = pile_ensemble(permuted, pc);
            CHECK(a.logits == b.logits);
            CHECK(a.iterations_used == b.iterations_used);
            CHECK(a.converged == b.converged);
            for (std::size_t i = 0; i < g.docs.size(); ++i)
                for (int t = 0; t < k; ++t)
                    CHECK(b.final_weights.at(i, t) ==
                          a.final_weights.at(i, static_cast<std::size_t>(perm[t])));
        }
    }
}

TEST_CASE("same config gives bit-identical output") {
    Rng rng(17);
    QueryGroup g = testutil::random_group(rng, 12, 4);
    PileConfig pc;
    pc.seed = 99;
    pc.trace = true;
    const EnsembleOutput a = pile_ensemble(g, pc);
    const EnsembleOutput b = pile_ensemble(g, pc);
    CHECK(a == b);
}

TEST_CASE("trace invariants: hull, kept-teacher count, one-sided moves") {
    Rng rng(19);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(10));
        const int k = 1 + static_cast<int>(rng.below(6));
        QueryGroup g = testutil::random_group(rng, n, k);
        PileConfig pc;
        pc.seed = rng.next();
        pc.stop_policy = (trial % 2 == 0) ? StopPolicy::FixedPoint
                                          : StopPolicy::OrderConsistent;
        pc.trace = true;
        const EnsembleOutput out = pile_ensemble(g, pc);
        REQUIRE(out.trace.has_value());
        REQUIRE(!out.trace->empty());

        for (const EnsembleState& s : *out.trace) {
            for (std::size_t i = 0; i < g.docs.size(); ++i) {
                const auto& f = g.docs[i].teacher_logits;
                const double lo = *std::min_element(f.begin(), f.end());
                const double hi = *std::max_element(f.begin(), f.end());
                CHECK(s.logits[i] >= lo);  // zero tolerance
                CHECK(s.logits[i] <= hi);
                int kept = 0;
                for (int t = 0; t < k; ++t) kept += s.weights.at(i, t);
                CHECK(kept >= 1);
            }
        }

        for (std::size_t t = 1; t < out.trace->size(); ++t) {
            const auto& prev = (*out.trace)[t - 1].logits;
            const auto& cur = (*out.trace)[t].logits;
            std::vector<std::size_t> up, down;
            for (std::size_t i = 0; i < prev.size(); ++i) {
                if (cur[i] > prev[i]) up.push_back(i);
                if (cur[i] < prev[i]) down.push_back(i);
            }
            // One pair update touches at most two docs: the higher-label doc
            // may only move up, the lower-label doc only down.
            CHECK(up.size() + down.size() <= 2);
            if (up.size() == 1 && down.size() == 1)
                CHECK(g.docs[up[0]].label > g.docs[down[0]].label);
        }

        CHECK(out.logits == out.trace->back().logits);
        CHECK(out.final_weights == out.trace->back().weights);
    }
}

TEST_CASE("an unfixable reversal stops at the iteration cap") {
    QueryGroup g;
    g.docs.push_back({"good", {}, {4}, {0.0}});
    g.docs.push_back({"bad", {}, {0}, {1.0}});
    PileConfig pc;
    const EnsembleOutput out = pile_ensemble(g, pc);
    CHECK_FALSE(out.converged);
    CHECK(out.iterations_used == 2);  // floor(2^1.5)
    CHECK(out.logits == std::vector<double>{0.0, 1.0});  // pinned at the hulls
}

TEST_CASE("iteration override caps the loop") {
    PileConfig pc;
    pc.max_iters_override = 0;
    const EnsembleOutput out = pile_ensemble(table4_group(), pc);
    CHECK(out.iterations_used == 0);
    CHECK_FALSE(out.converged);

    pc.max_iters_override = 2;
    const EnsembleOutput two = pile_ensemble(table4_group(), pc);
    CHECK(two.iterations_used == 2);
    CHECK_FALSE(two.converged);

    // The override is a ceiling: it can tighten the exponent cap but never
    // extend it.
    pc.max_iters_exponent = 3.0;  // floor(2^3) = 8
    pc.max_iters_override = 1;
    const EnsembleOutput one = pile_ensemble(table4_group(), pc);
    CHECK(one.iterations_used == 1);
    CHECK_FALSE(one.converged);

    pc.max_iters_exponent = 1.5;  // floor(2^1.5) = 2
    pc.max_iters_override = 50;
    const EnsembleOutput capped = pile_ensemble(table4_group(), pc);
    CHECK(capped.iterations_used == 2);
    CHECK_FALSE(capped.converged);
}

TEST_CASE("config validation") {
    PileConfig pc;
    pc.lambda = 0.0;
    CHECK_THROWS_AS(pile_ensemble(table4_group(), pc), ConfigError);
    pc.lambda = 1.5;
    CHECK_THROWS_AS(pile_ensemble(table4_group(), pc), ConfigError);
    pc.lambda = 1.0;
    CHECK_NOTHROW(pile_ensemble(table4_group(), pc));

    pc = PileConfig{};
    pc.epsilon = 0.0;
    CHECK_THROWS_AS(pile_ensemble(table4_group(), pc), ConfigError);
    pc.stop_policy = StopPolicy::OrderConsistent;  // epsilon unused there
    CHECK_NOTHROW(pile_ensemble(table4_group(), pc));

    pc = PileConfig{};
    pc.max_iters_exponent = -1.0;
    CHECK_THROWS_AS(pile_ensemble(table4_group(), pc), ConfigError);
}

TEST_CASE("empty group is rejected") {
    CHECK_THROWS_AS(pile_ensemble(QueryGroup{}, PileConfig{}), InvalidInputError);
}

TEST_CASE("all labels equal converges immediately") {
    QueryGroup g;
    g.docs.push_back({"a", {}, {2}, {0.4, 0.6}});
    g.docs.push_back({"b", {}, {2}, {0.1, 0.9}});
    const EnsembleOutput out = pile_ensemble(g, PileConfig{});
    CHECK(out.converged);
    CHECK(out.iterations_used == 0);
    CHECK(out.logits[0] == doctest::Approx(0.5));
    CHECK(out.logits[1] == doctest::Approx(0.5));
}

TEST_SUITE_END();
