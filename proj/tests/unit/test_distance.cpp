#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cubitopo/distance.hpp"

using namespace cubitopo;

TEST_CASE("distance transform matches brute force") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 12; ++t) {
        const bool three = t % 2;
        const GridShape shape = three ? GridShape({5, 6, 7}, {1.5, 1.0, 0.7}) : GridShape({9, 11}, {1.0, 2.5});
        BitField seeds{shape, std::vector<std::uint8_t>(shape.size(), 0)};
        for (auto& b : seeds.bits) b = rng() % 9 == 0;
        const auto d = distance_to(seeds);
        const auto st = shape.strides();
        for (std::size_t i = 0; i < shape.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < shape.size(); ++j) {
                if (!seeds.bits[j]) continue;
                double s = 0.0;
                for (int a = 0; a < shape.ndim(); ++a) {
                    const double di = static_cast<double>(i / st[a] % shape.extent(a)) -
                                      static_cast<double>(j / st[a] % shape.extent(a));
                    s += di * di * shape.spacing()[a] * shape.spacing()[a];
                }
                best = std::min(best, std::sqrt(s));
            }
            if (std::isinf(best)) CHECK(std::isinf(d[i]));
            else CHECK(d[i] == doctest::Approx(best).epsilon(1e-12));
        }
    }
}

TEST_CASE("no seeds means infinite distance") {
    const BitField none{GridShape({3, 3}), std::vector<std::uint8_t>(9, 0)};
    for (double v : distance_to(none)) CHECK(std::isinf(v));
}
