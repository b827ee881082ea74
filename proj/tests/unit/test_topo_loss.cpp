#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "cubitopo/topo_loss.hpp"

using namespace cubitopo;

namespace {

BettiPrior one_class(int ndim, std::vector<int> betti) {
    return BettiPrior(ndim, {"bg", "a"}, {{{2}, std::move(betti)}});
}

// Two-channel stack (bg, a) with `a` given and bg = 1 - a.
ChannelStack two_channel(const GridShape& shape, std::vector<double> a) {
    std::vector<double> bg(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) bg[i] = 1.0 - a[i];
    return ChannelStack(shape, {std::move(bg), std::move(a)});
}

// Random stack whose channel values are all distinct, so every persistence
// pairing is stable under small perturbation.
ChannelStack distinct_stack(const GridShape& shape, int channels, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.02, 0.98);
    ChannelStack s(shape, channels);
    for (int k = 0; k < channels; ++k)
        for (auto& x : s.channel(k)) x = u(rng);
    return s;
}

// Redraws until every loss-subset union field has values at least `gap` apart.
ChannelStack separated_stack(const GridShape& shape, const BettiPrior& prior, std::mt19937_64& rng,
                             double gap) {
    for (;;) {
        const ChannelStack s = distinct_stack(shape, prior.num_classes(), rng);
        bool ok = true;
        for (const auto& sub : prior.loss_subsets()) {
            const ScalarField f = union_field(s, sub);
            std::vector<double> v(f.values().begin(), f.values().end());
            std::sort(v.begin(), v.end());
            for (std::size_t i = 1; i < v.size() && ok; ++i) ok = v[i] - v[i - 1] >= gap;
        }
        if (ok) return s;
    }
}

}  // namespace

TEST_CASE("single blob term and gradient") {
    // Blob of 0.9 on a 0.2 plateau: one bar (0.9, essential) in the
    // a-channel; the plateau dies with it, so B=1 matches 0.9 - 0 ... the
    // finite bar comes from a second blob.
    const GridShape shape({1, 5});
    const ChannelStack s = two_channel(shape, {0.9, 0.2, 0.8, 0.1, 0.05});
    // Bars: (0.9, ess) and (0.8, 0.2).
    const auto r1 = topo_loss(s, BettiPrior(2, {"bg", "a"}, {{{2}, {2, 0}}}), Construction::V, 1);
    CHECK(r1.breakdown.total == doctest::Approx(2.0 - 0.9 - 0.6));
    CHECK(r1.grad.at(1, 0) == -1.0);
    CHECK(r1.grad.at(1, 2) == -1.0);
    CHECK(r1.grad.at(1, 1) == 1.0);
    CHECK(r1.grad.at(1, 3) == 0.0);
    CHECK(r1.grad.at(0, 0) == 0.0);

    const auto r0 = topo_loss(s, one_class(2, {1, 0}), Construction::V, 1);
    CHECK(r0.breakdown.total == doctest::Approx(1.0 - 0.9 + 0.6));
    CHECK(r0.grad.at(1, 2) == 1.0);
    CHECK(r0.grad.at(1, 1) == -1.0);
    CHECK(r0.breakdown.terms.size() == 2);
}

TEST_CASE("exact one-hot match gives zero loss") {
    const GridShape shape({5, 5});
    std::vector<double> a(25, 0.0);
    for (std::size_t i = 0; i < 25; ++i) {
        const std::size_t r = i / 5, c = i % 5;
        if (r >= 1 && r <= 3 && c >= 1 && c <= 3 && !(r == 2 && c == 2)) a[i] = 1.0;
    }
    const auto r = topo_loss(two_channel(shape, a), one_class(2, {1, 1}), Construction::V, 1);
    CHECK(r.breakdown.total == 0.0);
}

TEST_CASE("finite differences agree with the analytic gradient") {
    std::mt19937_64 rng(2024);
    const double eps = 1e-4;
    int checked = 0;
    for (int t = 0; t < 16; ++t) {
        const bool three = t % 4 == 3;
        const GridShape shape = three ? GridShape({4, 4, 3}) : GridShape({6, 7});
        const BettiPrior prior = three ? wholeheart_prior(false) : shortaxis_prior();
        const ChannelStack s = separated_stack(shape, prior, rng, 2.5 * eps);
        const auto con = t % 2 ? Construction::T : Construction::V;
        const auto base = topo_loss(s, prior, con, 1);
        for (int k = 1; k < s.num_channels(); ++k) {
            for (std::size_t i = 0; i < s.points(); ++i) {
                ChannelStack up = s, down = s;
                up.at(k, i) += eps;
                down.at(k, i) -= eps;
                const double fd = (topo_loss(up, prior, con, 1).breakdown.total -
                                   topo_loss(down, prior, con, 1).breakdown.total) /
                                  (2 * eps);
                const double g = base.grad.at(k, i);
                CHECK(std::abs(g - fd) <= 1e-4 * std::max(1.0, std::abs(g)));
                ++checked;
            }
        }
        CHECK(base.grad.channel(0)[0] == 0.0);
    }
    CHECK(checked > 1000);
}

TEST_CASE("loss lower bound and symmetric subsets") {
    std::mt19937_64 rng(3);
    const BettiPrior prior = shortaxis_prior();
    double bound = 0.0;
    for (const auto& [s, b] : prior.entries())
        for (int x : b) bound += x;
    for (int t = 0; t < 10; ++t) {
        const ChannelStack s = distinct_stack(GridShape({8, 8}), 4, rng);
        const auto r = topo_loss(s, prior, Construction::V, 1);
        CHECK(r.breakdown.total >= -bound);
        for (const auto& term : r.breakdown.terms) {
            CHECK(term.matched >= 0.0);
            CHECK(term.superfluous >= 0.0);
        }
    }
    // A prior written with a reversed pair parses to the same subset.
    const BettiPrior p2 = prior_from_json(
        R"({"dims": 2, "classes": ["bg","rv","my","lv"], "betti": {"my|rv": [1,1]}})");
    const BettiPrior p3 = prior_from_json(
        R"({"dims": 2, "classes": ["bg","rv","my","lv"], "betti": {"rv|my": [1,1]}})");
    const ChannelStack s = distinct_stack(GridShape({6, 6}), 4, rng);
    CHECK(topo_loss(s, p2, Construction::V, 1).breakdown.total ==
          topo_loss(s, p3, Construction::V, 1).breakdown.total);
}

TEST_CASE("gradient support lies on critical points") {
    std::mt19937_64 rng(8);
    const BettiPrior prior = shortaxis_prior();
    const ChannelStack s = distinct_stack(GridShape({9, 9}), 4, rng);
    const auto r = topo_loss(s, prior, Construction::V, 1);
    std::set<std::size_t> critical;
    for (const auto& sub : prior.loss_subsets()) {
        const auto bc = compute_barcode(union_field(s, sub), Construction::V, 1);
        for (const auto& b : bc.bars) {
            critical.insert(b.birth_point);
            if (b.death_point) critical.insert(*b.death_point);
        }
    }
    for (int k = 0; k < 4; ++k)
        for (std::size_t i = 0; i < s.points(); ++i)
            if (r.grad.at(k, i) != 0.0) CHECK(critical.count(i) == 1);
}

TEST_CASE("singleton-only prior is the per-class loss") {
    std::mt19937_64 rng(4);
    const BettiPrior prior = shortaxis_prior();
    const ChannelStack s = distinct_stack(GridShape({7, 7}), 4, rng);
    const auto full = topo_loss(s, prior.singletons_only(), Construction::V, 1);
    double sum = 0.0;
    for (int c = 2; c <= 4; ++c) {
        const std::vector<int> betti = *prior.find(std::vector<int>{c});
        BettiPrior single(2, prior.class_names(), {{{c}, betti}});
        sum += topo_loss(s, single, Construction::V, 1).breakdown.total;
    }
    CHECK(full.breakdown.total == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("thread count does not change the result") {
    std::mt19937_64 rng(12);
    const ChannelStack s = distinct_stack(GridShape({10, 10}), 4, rng);
    const auto a = topo_loss(s, shortaxis_prior(), Construction::V, 1);
    const auto b = topo_loss(s, shortaxis_prior(), Construction::V, 4);
    CHECK(a.breakdown.total == b.breakdown.total);
    CHECK(a.grad == b.grad);
}

TEST_CASE("mse loss") {
    const ChannelStack ref(GridShape({1, 1}), {{0.5}, {0.5}});
    const ChannelStack cur(GridShape({1, 1}), {{0.6}, {0.4}});
    auto [v, g] = mse_loss(cur, ref);
    CHECK(v == doctest::Approx(0.02));
    CHECK(g.at(0, 0) == doctest::Approx(0.2));
    CHECK(g.at(1, 0) == doctest::Approx(-0.2));
    CHECK(mse_loss(ref, ref).first == 0.0);

    const ChannelStack ref2(GridShape({2, 2}), {{0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}});
    const ChannelStack cur2(GridShape({2, 2}), {{0.6, 0.6, 0.6, 0.6}, {0.4, 0.4, 0.4, 0.4}});
    CHECK(mse_loss(cur2, ref2).first == doctest::Approx(0.02));
    CHECK_THROWS_AS(mse_loss(cur2, ref), std::invalid_argument);
}

TEST_CASE("combined loss") {
    std::mt19937_64 rng(9);
    const ChannelStack s = distinct_stack(GridShape({6, 6}), 4, rng);
    ChannelStack ref = s;
    ref.at(2, 7) += 0.1;
    const auto topo = topo_loss(s, shortaxis_prior(), Construction::V, 1);
    const auto zero = combined_loss(s, ref, shortaxis_prior(), 0.0, Construction::V, 1);
    CHECK(zero.breakdown.combined == topo.breakdown.total);
    CHECK(zero.grad == topo.grad);
    const auto big = combined_loss(s, ref, shortaxis_prior(), 1000.0, Construction::V, 1);
    CHECK(big.breakdown.combined == doctest::Approx(topo.breakdown.total + 1000.0 * 0.01 / 36));
    CHECK(big.grad.at(2, 7) == doctest::Approx(topo.grad.at(2, 7) - 1000.0 * 0.2 / 36));
    CHECK_THROWS_AS(combined_loss(s, ref, shortaxis_prior(), -1.0, Construction::V, 1), std::invalid_argument);
    CHECK(default_lambda(2) == 1000.0);
    CHECK(default_lambda(3) == 1.0);
}
