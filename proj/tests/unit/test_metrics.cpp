#include <doctest.h>

#include <random>
#include <sstream>

#include "cubitopo/metrics.hpp"

using namespace cubitopo;

namespace {

BitField mask_from(std::vector<std::size_t> dims, std::vector<std::uint8_t> bits) {
    return BitField{GridShape(std::move(dims)), std::move(bits)};
}

BitField ring3x3() {
    std::vector<std::uint8_t> b(25, 0);
    for (int y = 1; y <= 3; ++y)
        for (int x = 1; x <= 3; ++x) b[y * 5 + x] = !(y == 2 && x == 2);
    return mask_from({5, 5}, b);
}

// 2D short-axis layout on a 20x20 grid: lv disc, my ring, rv block on the left.
LabelMap shortaxis_case(bool extra_rv) {
    std::vector<std::uint16_t> l(400, 1);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
            const int dy = y - 10, dx = x - 11;
            const int r2 = dy * dy + dx * dx;
            if (r2 <= 6) l[y * 20 + x] = 4;
            else if (r2 <= 20) l[y * 20 + x] = 3;
            else if (x >= 3 && x <= 6 && y >= 7 && y <= 13) l[y * 20 + x] = 2;
        }
    if (extra_rv) l[1 * 20 + 18] = l[1 * 20 + 17] = 2;
    return LabelMap(GridShape({20, 20}), 4, l);
}

}  // namespace

TEST_CASE("oracle on small shapes") {
    CHECK(betti_oracle(ring3x3(), Construction::V) == std::vector<int>{1, 1});
    CHECK(betti_oracle(ring3x3(), Construction::T) == std::vector<int>{1, 1});

    std::vector<std::uint8_t> cube(125, 0);
    for (int z = 1; z <= 3; ++z)
        for (int y = 1; y <= 3; ++y)
            for (int x = 1; x <= 3; ++x) cube[z * 25 + y * 5 + x] = !(z == 2 && y == 2 && x == 2);
    CHECK(betti_oracle(mask_from({5, 5, 5}, cube), Construction::V) == std::vector<int>{1, 0, 1});
    CHECK(betti_oracle(mask_from({5, 5, 5}, cube), Construction::T) == std::vector<int>{1, 0, 1});

    CHECK(betti_oracle(mask_from({4, 4}, std::vector<std::uint8_t>(16, 0)), Construction::V) ==
          std::vector<int>{0, 0});
    CHECK(betti_oracle(mask_from({3, 3, 3}, std::vector<std::uint8_t>(27, 0)), Construction::T) ==
          std::vector<int>{0, 0, 0});
}

TEST_CASE("diagonal neighbours depend on the construction") {
    // Two pixels touching at a corner.
    const BitField m = mask_from({2, 2}, {1, 0, 0, 1});
    CHECK(betti_oracle(m, Construction::V) == std::vector<int>{2, 0});
    CHECK(betti_oracle(m, Construction::T) == std::vector<int>{1, 0});
    // A diamond of four pixels encloses a hole only under V... it is 8-connected
    // for T and its centre is covered by the closed squares.
    const BitField d = mask_from({3, 3}, {0, 1, 0, 1, 0, 1, 0, 1, 0});
    CHECK(betti_oracle(d, Construction::V) == std::vector<int>{4, 0});
    CHECK(betti_oracle(d, Construction::T) == std::vector<int>{1, 1});
}

TEST_CASE("3D tunnel") {
    // A 3x3 square ring extruded along z: a solid torus.
    std::vector<std::uint8_t> b(5 * 5 * 5, 0);
    for (int z = 1; z <= 3; ++z)
        for (int y = 1; y <= 3; ++y)
            for (int x = 1; x <= 3; ++x) b[z * 25 + y * 5 + x] = !(y == 2 && x == 2);
    for (auto con : {Construction::V, Construction::T})
        CHECK(betti_oracle(mask_from({5, 5, 5}, b), con) == std::vector<int>{1, 1, 0});
}

TEST_CASE("betti error counts every affected subset") {
    const BettiPrior prior = shortaxis_prior();
    const auto clean = betti_error(shortaxis_case(false), prior, Construction::V);
    CHECK(clean.total == 0);
    const auto extra = betti_error(shortaxis_case(true), prior, Construction::V);
    CHECK(extra.total == 3);
    int affected = 0;
    for (const auto& s : extra.subsets) affected += s.error > 0;
    CHECK(affected == 3);
}

TEST_CASE("betti error needs every subset") {
    const BettiPrior full = shortaxis_prior();
    CHECK_THROWS_AS(betti_error(shortaxis_case(false), full.singletons_only(), Construction::V),
                    std::invalid_argument);
}

TEST_CASE("dice") {
    const LabelMap a(GridShape({2, 4}), 2, {2, 2, 1, 1, 2, 2, 1, 1});
    const LabelMap b(GridShape({2, 4}), 2, {1, 1, 2, 2, 1, 1, 2, 2});
    const LabelMap c(GridShape({2, 4}), 2, {1, 2, 2, 1, 1, 2, 2, 1});
    CHECK(dice(a, a, 2) == 1.0);
    CHECK(dice(a, b, 2) == 0.0);
    CHECK(dice(a, c, 2) == doctest::Approx(0.5));
    CHECK(dice(a, c, 2) == dice(c, a, 2));
    const LabelMap empty(GridShape({2, 2}), 3, {1, 1, 1, 1});
    CHECK(dice(empty, empty, 3) == 1.0);
    CHECK(gdice(a, a) == 1.0);
    CHECK(gdice(a, b) == 0.0);
    CHECK_THROWS_AS(dice(a, empty, 2), std::invalid_argument);
}

TEST_CASE("hausdorff") {
    const GridShape shape({1, 8}, {1.0, 1.25});
    std::vector<std::uint16_t> p(8, 1), g(8, 1);
    p[1] = 2;
    g[4] = 2;
    const LabelMap pm(shape, 2, p), gm(shape, 2, g);
    CHECK(hausdorff(pm, gm, 2).value() == doctest::Approx(3.75));
    CHECK(hausdorff(gm, pm, 2).value() == hausdorff(pm, gm, 2).value());
    CHECK(hausdorff(pm, pm, 2).value() == 0.0);
    const LabelMap none(shape, 2, std::vector<std::uint16_t>(8, 1));
    CHECK_FALSE(hausdorff(none, gm, 2).has_value());
}

TEST_CASE("hausdorff symmetry on random masks") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 10; ++t) {
        std::vector<std::uint16_t> a(120), b(120);
        for (auto& v : a) v = 1 + rng() % 2;
        for (auto& v : b) v = 1 + rng() % 2;
        const GridShape shape({4, 5, 6}, {1.0, 0.5, 2.0});
        const LabelMap am(shape, 2, a), bm(shape, 2, b);
        CHECK(hausdorff(am, bm, 2) == hausdorff(bm, am, 2));
    }
}

TEST_CASE("cca keeps the largest component") {
    std::vector<std::uint16_t> l(200, 1);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) l[y * 20 + x] = 2;  // size 100
    l[5 * 20 + 15] = l[5 * 20 + 16] = l[5 * 20 + 17] = 2;  // size 3
    const LabelMap m(GridShape({10, 20}), 2, l);
    const LabelMap out = cca_baseline(m);
    CHECK(out[5 * 20 + 16] == 1);
    CHECK(out.mask(2).count() == 100);
    CHECK(cca_baseline(out) == out);
}

TEST_CASE("cca ties go to the first component") {
    const LabelMap m(GridShape({1, 5}), 2, {2, 1, 1, 1, 2});
    const LabelMap out = cca_baseline(m);
    CHECK(out[0] == 2);
    CHECK(out[4] == 1);
}

TEST_CASE("cca leaves loops alone") {
    std::vector<std::uint16_t> l(25, 1);
    for (int i = 0; i < 25; ++i)
        if (ring3x3().bits[i]) l[i] = 2;
    const LabelMap m(GridShape({5, 5}), 2, l);
    CHECK(cca_baseline(m) == m);
}

TEST_CASE("cca never leaves a class with several components") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        std::vector<std::uint16_t> l(144);
        for (auto& v : l) v = 1 + rng() % 4;
        const LabelMap out = cca_baseline(LabelMap(GridShape({12, 12}), 4, l));
        for (int c = 2; c <= 4; ++c) CHECK(label_components(out.mask(c), false).count <= 1);
    }
}

TEST_CASE("percentiles and aggregate") {
    CHECK(percentile({0, 1, 5}, 50) == 1.0);
    CHECK(percentile({1, 2, 3, 4}, 25) == doctest::Approx(1.75));
    std::vector<TopoReport> reports(4);
    for (int i = 0; i < 4; ++i) {
        reports[i].be = i == 3 ? 2 : 0;
        reports[i].ts = i == 3 ? 0 : 1;
        reports[i].gdice = 0.9;
    }
    Summary s = aggregate(reports);
    CHECK(s.rho == doctest::Approx(75.0));
    CHECK(s.sigma_rho == doctest::Approx(100.0 * std::sqrt(0.75 * 0.25)));
    CHECK(s.be_p100 == 2.0);
    for (auto& r : reports) r.ts = 1, r.be = 0;
    s = aggregate(reports);
    CHECK(s.rho == 100.0);
    CHECK(s.sigma_rho == 0.0);
    CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
}

TEST_CASE("evaluate a perfect prediction") {
    const LabelMap gt = shortaxis_case(false);
    const TopoReport r = evaluate(gt, gt, shortaxis_prior(), Construction::V, "x");
    CHECK(r.be == 0);
    CHECK(r.ts == 1);
    CHECK(r.gdice == 1.0);
    for (double d : r.dice) CHECK(d == 1.0);
    for (const auto& h : r.hausdorff) CHECK(h.value() == 0.0);
    const std::string json = report_json({r}, aggregate({r}), shortaxis_prior().class_names());
    CHECK(json.find("\"rho\": 100.0") != std::string::npos);
    std::ostringstream csv;
    write_report_csv(csv, {r}, shortaxis_prior().class_names());
    CHECK(csv.str().rfind("case,BE,TS,gDSC,DSC_rv,DSC_my,DSC_lv,HDD_rv,HDD_my,HDD_lv\nx,0,1,1", 0) == 0);
}

TEST_CASE("euler characteristic of single cells") {
    const BitField one = mask_from({3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0});
    CHECK(euler_characteristic(one, Construction::V) == 1);
    CHECK(euler_characteristic(one, Construction::T) == 1);
    CHECK(euler_characteristic(ring3x3(), Construction::V) == 0);
}
