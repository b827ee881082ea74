#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cubitopo/metrics.hpp"
#include "cubitopo/npy.hpp"
#include "cubitopo/phantom.hpp"

using namespace cubitopo;

namespace {

int be(const LabelMap& l, const BettiPrior& p, Construction c = Construction::V) {
    return betti_error(l, p, c).total;
}

}  // namespace

TEST_CASE("names parse and format") {
    CHECK(parse_task("shortaxis2d") == PhantomTask::ShortAxis2D);
    CHECK(parse_task("wholeheart3d") == PhantomTask::WholeHeart3D);
    CHECK_THROWS_AS(parse_task("heart"), std::invalid_argument);
    const BettiPrior p = shortaxis_prior();
    const Defect d = parse_defect("hole-puncture:my:1.5:rv", p);
    CHECK(d.type == DefectType::HolePuncture);
    CHECK(d.target == 3);
    CHECK(d.magnitude == 1.5);
    CHECK(d.partner == 2);
    CHECK(parse_defect(format_defect(d, p), p) == d);
    CHECK(parse_defect("extra-component:rv", p).magnitude == 3.0);
    CHECK_THROWS_AS(parse_defect("extra-component:bg", p), std::invalid_argument);
    CHECK_THROWS_AS(parse_defect("extra-component:rv:-1", p), std::invalid_argument);
    CHECK_THROWS_AS(parse_defect("melt:rv", p), std::invalid_argument);
}

TEST_CASE("phantom settings validation") {
    PhantomSpec s;
    s.softness = 0.0;
    CHECK_THROWS_AS(generate(s), std::invalid_argument);
    s = {};
    s.softness = 0.6;
    CHECK_THROWS_AS(generate(s), std::invalid_argument);
    s = {};
    s.shape = GridShape({8, 40});
    CHECK_THROWS_AS(generate(s), std::invalid_argument);
    s = {};
    s.defects = {{DefectType::Bridge, 2, 2.0, 0}};
    CHECK_THROWS_AS(generate(s), std::invalid_argument);
    s = {};
    s.shape = GridShape({20, 20, 20});
    CHECK_THROWS_AS(generate(s), std::invalid_argument);  // task and dimension disagree
}

TEST_CASE("clean anatomy satisfies the prior in both constructions") {
    for (auto task : {PhantomTask::ShortAxis2D, PhantomTask::WholeHeart3D}) {
        for (std::uint64_t seed : {0u, 5u}) {
            PhantomSpec s;
            s.task = task;
            s.seed = seed;
            const PhantomCase c = generate(s);
            CHECK(c.truth.shape() == default_shape(task));
            CHECK(be(c.truth, c.prior, Construction::V) == 0);
            CHECK(be(c.truth, c.prior, Construction::T) == 0);
            CHECK(be(argmax_labels(c.probs), c.prior) == 0);
            CHECK(c.defective == c.truth);
        }
    }
    PhantomSpec s;
    s.shape = GridShape({64, 80});
    CHECK(be(generate(s).truth, shortaxis_prior()) == 0);
}

TEST_CASE("single defects have the expected Betti error") {
    const BettiPrior p = shortaxis_prior();
    const std::pair<const char*, int> cases[] = {
        {"extra-component:rv:2", 3}, {"extra-component:lv:2", 3}, {"hole-puncture:my:1", 3},
        {"hole-puncture:my:1:rv", 1}, {"bridge:rv:2:lv", 2},
    };
    for (const auto& [text, expected] : cases) {
        for (std::uint64_t seed : {1u, 2u}) {
            PhantomSpec s;
            s.seed = seed;
            s.defects = {parse_defect(text, p)};
            const PhantomCase c = generate(s);
            INFO(text);
            CHECK(be(c.defective, p) == expected);
            CHECK(be(argmax_labels(c.probs), p) == expected);
            CHECK(be(c.truth, p) == 0);
        }
    }
}

TEST_CASE("extra component peak probability") {
    const BettiPrior p = shortaxis_prior();
    PhantomSpec s;
    s.defects = {parse_defect("extra-component:rv:2", p)};
    const PhantomCase c = generate(s);
    double peak = 0.0;
    for (std::size_t i = 0; i < c.truth.labels().size(); ++i)
        if (c.defective[i] == 2 && c.truth[i] != 2) peak = std::max(peak, c.probs.prob(2, i));
    CHECK(peak >= 0.8);
}

TEST_CASE("bridge joining la and ra") {
    const BettiPrior p = wholeheart_prior();
    PhantomSpec s;
    s.task = PhantomTask::WholeHeart3D;
    s.defects = {parse_defect("bridge:la:2:ra", p)};
    const PhantomCase c = generate(s);
    const auto err = betti_error(argmax_labels(c.probs), p, Construction::V);
    const std::vector<int> la_ra{p.class_index("la"), p.class_index("ra")};
    bool seen = false;
    for (const auto& sb : err.subsets) {
        if (sb.subset != la_ra) continue;
        seen = true;
        CHECK(sb.predicted == std::vector<int>{1, 0, 0});
        CHECK(sb.target == std::vector<int>{2, 0, 0});
    }
    CHECK(seen);
    CHECK(err.total >= 1);
}

TEST_CASE("impossible defects are rejected") {
    const BettiPrior p = shortaxis_prior();
    PhantomSpec s;
    s.defects = {parse_defect("hole-puncture:my:30", p)};
    CHECK_THROWS_AS(generate(s), std::invalid_argument);
    s.defects = {parse_defect("extra-component:rv:200", p)};
    CHECK_THROWS_AS(generate(s), std::invalid_argument);
    s.task = PhantomTask::WholeHeart3D;
    s.defects = {{DefectType::LoopBreak, 2, 2.0, 0}};
    CHECK_THROWS_AS(generate(s), std::invalid_argument);
}

TEST_CASE("generation is deterministic and seed dependent") {
    PhantomSpec s;
    s.shape = GridShape({64, 64});
    const PhantomCase a = random_case(s, 11);
    const PhantomCase b = random_case(s, 11);
    CHECK(a.probs.stack() == b.probs.stack());
    CHECK(a.spec.defects == b.spec.defects);
    const PhantomCase c = random_case(s, 12);
    CHECK(!(a.defective == c.defective));

    s.defects = a.spec.defects;
    const auto cases = batch(s, 3, 4, 2);
    PhantomSpec one = s;
    one.seed = derive_seed(4, 1);
    CHECK(cases[1].probs.stack() == generate(one).probs.stack());
    CHECK(batch(s, 3, 4, 1)[2].probs.stack() == cases[2].probs.stack());
}

TEST_CASE("sampled defects do not mask each other") {
    PhantomSpec s;
    s.shape = GridShape({96, 96});
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const PhantomCase c = random_case(s, seed, 2, 2);
        CHECK(c.spec.defects.size() == 2);
        CHECK(defects_independent(c));
        int sum = 0;
        for (std::size_t i = 0; i < c.edits.size(); ++i) sum += be(single_defect_labels(c, i), c.prior);
        CHECK(be(c.defective, c.prior) == sum);
    }
}

TEST_CASE("masking combinations are detected") {
    // An extra lv blob next to an rv/lv bridge leaves rv|lv with two
    // components: the bridge's error there is hidden by the blob.
    const BettiPrior p = shortaxis_prior();
    int masked = 0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        PhantomSpec s;
        s.seed = seed;
        s.defects = {parse_defect("bridge:rv:2:lv", p), parse_defect("extra-component:lv:2", p)};
        masked += !defects_independent(generate(s));
    }
    CHECK(masked == 8);
}

TEST_CASE("case files") {
    const auto dir = std::filesystem::temp_directory_path() / "cubitopo_phantom_test";
    std::filesystem::remove_all(dir);
    PhantomSpec s;
    s.shape = GridShape({32, 32});
    s.defects = {parse_defect("extra-component:lv:2", shortaxis_prior())};
    const PhantomCase c = generate(s);
    write_case(c, dir);
    for (const char* f : {"probs.npy", "gt.npy", "defective.npy", "prior.json", "case.json"})
        CHECK(std::filesystem::exists(dir / f));
    CHECK(npy::load_stack(dir / "probs.npy") == c.probs.stack());
    CHECK(npy::load_labels(dir / "gt.npy", 4) == c.truth);
    std::ifstream in(dir / "prior.json");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(prior_from_json(text) == shortaxis_prior());
    std::filesystem::remove_all(dir);
}
