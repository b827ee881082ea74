#include "cubitopo/distance.hpp"

#include <cmath>
#include <limits>

namespace cubitopo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), squared
// distances, sample spacing `h`. Infinite samples contribute no parabola.
void transform_line(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                    std::vector<double>& z, double h) {
    const int n = static_cast<int>(f.size());
    const double h2 = h * h;
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        const double fq = f[q] + h2 * q * q;
        double s = -kInf;
        while (k >= 0) {
            const int p = v[k];
            s = (fq - (f[p] + h2 * p * p)) / (2.0 * h2 * (q - p));
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -kInf : s;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q) d[q] = kInf;
        return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
        while (z[j + 1] < q) ++j;
        const double dq = (q - v[j]) * h;
        d[q] = dq * dq + f[v[j]];
    }
}

}  // namespace

std::vector<double> distance_to(const BitField& seeds) {
    const GridShape& shape = seeds.shape;
    const std::size_t n = shape.size();
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = seeds.bits[i] ? 0.0 : kInf;

    const auto strides = shape.strides();
    for (int axis = 0; axis < shape.ndim(); ++axis) {
        const std::size_t len = shape.extent(axis);
        const std::size_t stride = strides[axis];
        std::vector<double> f(len), d(len), z(len + 1);
        std::vector<int> v(len);
        for (std::size_t start = 0; start < n; ++start) {
            // Visit each line once, from its first element.
            if ((start / stride) % len != 0) continue;
            for (std::size_t i = 0; i < len; ++i) f[i] = sq[start + i * stride];
            transform_line(f, d, v, z, shape.spacing()[axis]);
            for (std::size_t i = 0; i < len; ++i) sq[start + i * stride] = d[i];
        }
    }
    for (double& x : sq) x = std::sqrt(x);
    return sq;
}

}  // namespace cubitopo
