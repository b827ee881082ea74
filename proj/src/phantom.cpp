#include "cubitopo/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cubitopo/distance.hpp"
#include "cubitopo/metrics.hpp"
#include "cubitopo/npy.hpp"
#include "cubitopo/parallel.hpp"

namespace cubitopo {

PhantomTask parse_task(std::string_view s) {
    if (s == "shortaxis2d") return PhantomTask::ShortAxis2D;
    if (s == "wholeheart3d") return PhantomTask::WholeHeart3D;
    throw std::invalid_argument("unknown phantom task '" + std::string(s) +
                                "' (expected shortaxis2d or wholeheart3d)");
}

const char* to_string(PhantomTask t) {
    return t == PhantomTask::ShortAxis2D ? "shortaxis2d" : "wholeheart3d";
}

DefectType parse_defect_type(std::string_view s) {
    if (s == "extra-component") return DefectType::ExtraComponent;
    if (s == "hole-puncture") return DefectType::HolePuncture;
    if (s == "bridge") return DefectType::Bridge;
    if (s == "loop-break") return DefectType::LoopBreak;
    throw std::invalid_argument("unknown defect type '" + std::string(s) + "'");
}

const char* to_string(DefectType t) {
    switch (t) {
        case DefectType::ExtraComponent: return "extra-component";
        case DefectType::HolePuncture: return "hole-puncture";
        case DefectType::Bridge: return "bridge";
        case DefectType::LoopBreak: return "loop-break";
    }
    return "?";
}

Defect parse_defect(std::string_view s, const BettiPrior& prior) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(':', start);
        parts.emplace_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    if (parts.size() < 2 || parts.size() > 4)
        throw std::invalid_argument("defect '" + std::string(s) + "' is not type:class[:magnitude[:partner]]");
    auto cls = [&](const std::string& name) {
        const int c = prior.class_index(name);
        if (c < 2) throw std::invalid_argument("defect class '" + name + "' is not a foreground class");
        return c;
    };
    Defect d;
    d.type = parse_defect_type(parts[0]);
    d.target = cls(parts[1]);
    if (parts.size() >= 3) {
        try {
            d.magnitude = std::stod(parts[2]);
        } catch (const std::exception&) {
            throw std::invalid_argument("defect magnitude '" + parts[2] + "' is not a number");
        }
        if (!(d.magnitude > 0.0)) throw std::invalid_argument("defect magnitude must be positive");
    }
    if (parts.size() == 4) d.partner = cls(parts[3]);
    return d;
}

std::string format_defect(const Defect& d, const BettiPrior& prior) {
    const auto& names = prior.class_names();
    char mag[32];
    std::snprintf(mag, sizeof(mag), "%g", d.magnitude);
    std::string out = std::string(to_string(d.type)) + ":" + names.at(d.target - 1) + ":" + mag;
    if (d.partner) out += ":" + names.at(d.partner - 1);
    return out;
}

GridShape default_shape(PhantomTask task) {
    return task == PhantomTask::ShortAxis2D ? GridShape({128, 128}) : GridShape({40, 40, 40});
}

BettiPrior task_prior(PhantomTask task) {
    return task == PhantomTask::ShortAxis2D ? shortaxis_prior() : wholeheart_prior(true);
}

void PhantomSpec::validate() const {
    if (!(softness > 0.0 && softness <= 0.5)) throw std::invalid_argument("softness must lie in (0, 0.5]");
    if (!(noise >= 0.0 && noise <= 0.25)) throw std::invalid_argument("noise must lie in [0, 0.25]");
    const int nd = task == PhantomTask::ShortAxis2D ? 2 : 3;
    if (shape.ndim() != 0 && shape.ndim() != nd)
        throw std::invalid_argument(std::string(to_string(task)) + " needs a " + std::to_string(nd) + "D shape");
    if (shape.ndim() != 0)
        for (std::size_t e : shape.dims())
            if (e < 16) throw std::invalid_argument("phantom extents must be at least 16");
    const int k = task == PhantomTask::ShortAxis2D ? 4 : 6;
    for (const auto& d : defects) {
        if (d.target < 2 || d.target > k) throw std::invalid_argument("defect target must be a foreground class");
        if (d.partner != 0 && (d.partner < 2 || d.partner > k || d.partner == d.target))
            throw std::invalid_argument("defect partner must be a different foreground class");
        if (!(d.magnitude > 0.0)) throw std::invalid_argument("defect magnitude must be positive");
        if (d.type == DefectType::Bridge && d.partner == 0)
            throw std::invalid_argument("bridge defects need a partner class");
    }
}

namespace {

using Labels = std::vector<std::uint16_t>;

struct Geometry {
    GridShape shape;  // unit spacing
    std::vector<std::size_t> strides;

    explicit Geometry(const GridShape& s) : shape(s.dims()), strides(s.strides()) {}

    int nd() const { return shape.ndim(); }
    std::size_t size() const { return shape.size(); }

    std::vector<double> coords(std::size_t i) const {
        std::vector<double> c(nd());
        for (int a = 0; a < nd(); ++a) {
            c[a] = static_cast<double>(i / strides[a] % shape.extent(a));
        }
        return c;
    }

    BitField mask_where(const Labels& l, auto pred) const {
        BitField m{shape, std::vector<std::uint8_t>(l.size())};
        for (std::size_t i = 0; i < l.size(); ++i) m.bits[i] = pred(l[i]);
        return m;
    }
};

double sq(double v) { return v * v; }

// Inside-test of an axis-aligned ellipsoid in normalized coordinates.
bool in_ellipsoid(const std::vector<double>& u, const std::vector<double>& c, const std::vector<double>& r) {
    double s = 0.0;
    for (std::size_t a = 0; a < u.size(); ++a) s += sq((u[a] - c[a]) / r[a]);
    return s <= 1.0;
}

Labels shortaxis_labels(const Geometry& g) {
    // Classes: 1 bg, 2 rv, 3 my, 4 lv.
    const double h = static_cast<double>(g.shape.extent(0)), w = static_cast<double>(g.shape.extent(1));
    const double s = std::min(h, w);
    const double cy = 0.5 * h - 0.5, cx = 0.56 * w - 0.5;
    const double r_lv = 0.15 * s;
    const double r_my = r_lv + std::max(0.05 * s, 4.0);
    const double r_rv = 0.19 * s, rv_dx = 0.25 * s;
    Labels l(g.size(), 1);
    for (std::size_t i = 0; i < l.size(); ++i) {
        const auto c = g.coords(i);
        const double d = std::hypot(c[0] - cy, c[1] - cx);
        if (d <= r_lv) l[i] = 4;
        else if (d <= r_my) l[i] = 3;
        else if (std::hypot(c[0] - cy, c[1] - (cx - rv_dx)) <= r_rv) l[i] = 2;
    }
    return l;
}

Labels wholeheart_labels(const Geometry& g) {
    // Classes: 1 bg, 2 my, 3 la, 4 lv, 5 ra, 6 rv. Left and right hearts are
    // ellipsoids split into atrium (top) and ventricle; a septal slab and a
    // cup under the left ventricle form the myocardium.
    const std::vector<double> lc{0.54, 0.5, 0.64}, lr{0.34, 0.17, 0.18};
    const std::vector<double> cup_r{0.41, 0.24, 0.25};
    const std::vector<double> rc{0.5, 0.5, 0.22}, rr{0.36, 0.17, 0.19};
    Labels l(g.size(), 1);
    std::vector<double> u(3);
    for (std::size_t i = 0; i < l.size(); ++i) {
        const auto c = g.coords(i);
        for (int a = 0; a < 3; ++a) u[a] = (c[a] + 0.5) / static_cast<double>(g.shape.extent(a));
        const bool slab = u[2] >= 0.38 && u[2] <= 0.48 && u[1] >= 0.26 && u[1] <= 0.74 && u[0] >= 0.10 &&
                          u[0] <= 0.90;
        if (in_ellipsoid(u, lc, lr)) l[i] = u[0] < 0.55 ? 4 : 3;
        else if (slab || (u[0] <= 0.42 && in_ellipsoid(u, lc, cup_r))) l[i] = 2;
        else if (in_ellipsoid(u, rc, rr)) l[i] = u[0] < 0.52 ? 6 : 5;
    }
    return l;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return unit_from_bits(engine_()); }
    std::size_t index(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(uniform() * n)); }

private:
    std::mt19937_64 engine_;
};

std::size_t pick(const std::vector<std::size_t>& candidates, Rng& rng, const Defect& d, const char* why) {
    if (candidates.empty())
        throw std::invalid_argument(std::string("cannot place ") + to_string(d.type) + " defect: " + why);
    return candidates[rng.index(candidates.size())];
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += sq(a[k] - b[k]);
    return std::sqrt(s);
}

void paint_ball(const Geometry& g, Labels& l, std::size_t center, double radius, std::uint16_t value) {
    const auto c = g.coords(center);
    for (std::size_t i = 0; i < l.size(); ++i)
        if (dist(g.coords(i), c) <= radius) l[i] = value;
}

// Distance from point p to segment [a, b].
double segment_distance(const std::vector<double>& p, const std::vector<double>& a, const std::vector<double>& b) {
    double len2 = 0.0, t = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        len2 += sq(b[k] - a[k]);
        t += (p[k] - a[k]) * (b[k] - a[k]);
    }
    t = len2 > 0.0 ? std::clamp(t / len2, 0.0, 1.0) : 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) s += sq(p[k] - (a[k] + t * (b[k] - a[k])));
    return std::sqrt(s);
}

void extra_component(const Geometry& g, Labels& l, const Defect& d, Rng& rng) {
    const auto fg = distance_to(g.mask_where(l, [](auto v) { return v != 1; }));
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < l.size(); ++i) {
        if (fg[i] < d.magnitude + 4.0) continue;
        const auto c = g.coords(i);
        bool inner = true;
        for (int a = 0; a < g.nd(); ++a)
            inner = inner && c[a] >= d.magnitude + 1 && c[a] + d.magnitude + 2 <= g.shape.extent(a);
        if (inner) cand.push_back(i);
    }
    paint_ball(g, l, pick(cand, rng, d, "no free space far enough from the anatomy"), d.magnitude,
               static_cast<std::uint16_t>(d.target));
}

void hole_puncture(const Geometry& g, Labels& l, const Defect& d, Rng& rng) {
    const auto t = static_cast<std::uint16_t>(d.target), p = static_cast<std::uint16_t>(d.partner);
    const auto outside = distance_to(g.mask_where(l, [&](auto v) { return v != t && (p == 0 || v != p); }));
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < l.size(); ++i) {
        if (l[i] != t || outside[i] < d.magnitude + 2.0) continue;
        if (p != 0) {
            bool touches = false;
            for (int a = 0; a < g.nd(); ++a) {
                const auto c = i / g.strides[a] % g.shape.extent(a);
                if (c > 0 && l[i - g.strides[a]] == p) touches = true;
                if (c + 1 < g.shape.extent(a) && l[i + g.strides[a]] == p) touches = true;
            }
            if (!touches) continue;
        }
        cand.push_back(i);
    }
    paint_ball(g, l, pick(cand, rng, d, "target region too thin for the hole"), d.magnitude, 1);
}

void bridge(const Geometry& g, Labels& l, const Defect& d, Rng& rng) {
    const auto t = static_cast<std::uint16_t>(d.target), p = static_cast<std::uint16_t>(d.partner);
    const auto to_partner = distance_to(g.mask_where(l, [&](auto v) { return v == p; }));
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < l.size(); ++i)
        if (l[i] == t) best = std::min(best, to_partner[i]);
    if (!std::isfinite(best)) throw std::invalid_argument("cannot place bridge defect: a class is empty");
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < l.size(); ++i)
        if (l[i] == t && to_partner[i] <= best + 1.5) cand.push_back(i);
    const auto a = g.coords(pick(cand, rng, d, "no target voxels"));
    // Nearest partner voxel to the start point.
    std::vector<double> b;
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < l.size(); ++i) {
        if (l[i] != p) continue;
        const auto c = g.coords(i);
        const double dd = dist(a, c);
        if (dd < nearest) nearest = dd, b = c;
    }
    const double radius = std::max(0.5 * d.magnitude, 1.0);
    for (std::size_t i = 0; i < l.size(); ++i)
        if (l[i] != p && segment_distance(g.coords(i), a, b) <= radius) l[i] = t;
}

void loop_break(const Geometry& g, Labels& l, const Defect& d, Rng& rng) {
    if (g.nd() != 2) throw std::invalid_argument("loop-break defects need a 2D phantom");
    const auto t = static_cast<std::uint16_t>(d.target);
    double cy = 0.0, cx = 0.0, n = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i)
        if (l[i] == t) {
            const auto c = g.coords(i);
            cy += c[0], cx += c[1], n += 1.0;
        }
    if (n == 0.0) throw std::invalid_argument("cannot place loop-break defect: target class is empty");
    cy /= n, cx /= n;
    const double angle = 2.0 * std::acos(-1.0) * rng.uniform();
    const double dy = std::sin(angle), dx = std::cos(angle);
    const double half = std::max(0.5 * d.magnitude, 1.0);
    for (std::size_t i = 0; i < l.size(); ++i) {
        if (l[i] != t) continue;
        const auto c = g.coords(i);
        const double along = (c[0] - cy) * dy + (c[1] - cx) * dx;
        const double across = std::abs(-(c[0] - cy) * dx + (c[1] - cx) * dy);
        if (along > 0.0 && across <= half) l[i] = 1;
    }
}

ProbSegmentation blur(const Geometry& g, const Labels& l, int k, const PhantomSpec& spec, Rng& rng) {
    constexpr double cap = 6.0;
    const double kappa = 1.0 / (2.0 * spec.softness);
    ChannelStack scores(g.shape, k, 0.0);
    for (int c = 1; c <= k; ++c) {
        const auto cls = static_cast<std::uint16_t>(c);
        const auto inside = g.mask_where(l, [&](auto v) { return v == cls; });
        const auto to_in = distance_to(inside);
        const auto to_out = distance_to(g.mask_where(l, [&](auto v) { return v != cls; }));
        for (std::size_t i = 0; i < l.size(); ++i) {
            double s = inside.bits[i] ? to_out[i] - 0.5 : -(to_in[i] - 0.5);
            if (!std::isfinite(s)) s = s > 0 ? cap : -cap;
            scores.at(c - 1, i) = std::clamp(kappa * s, -cap, cap);
        }
    }
    for (int c = 0; c < k; ++c)
        for (std::size_t i = 0; i < l.size(); ++i) scores.at(c, i) += spec.noise * (2.0 * rng.uniform() - 1.0);
    ChannelStack probs(g.shape, k, 0.0);
    for (std::size_t i = 0; i < l.size(); ++i) {
        double hi = scores.at(0, i);
        for (int c = 1; c < k; ++c) hi = std::max(hi, scores.at(c, i));
        double sum = 0.0;
        for (int c = 0; c < k; ++c) sum += (probs.at(c, i) = std::exp(scores.at(c, i) - hi));
        for (int c = 0; c < k; ++c) probs.at(c, i) /= sum;
    }
    return ProbSegmentation(std::move(probs));
}

}  // namespace

PhantomCase generate(const PhantomSpec& spec_in) {
    PhantomSpec spec = spec_in;
    spec.validate();
    if (spec.shape.ndim() == 0) spec.shape = default_shape(spec.task);
    const Geometry g(spec.shape);
    const BettiPrior prior = task_prior(spec.task);
    const int k = prior.num_classes();

    Labels clean = spec.task == PhantomTask::ShortAxis2D ? shortaxis_labels(g) : wholeheart_labels(g);
    Labels bad = clean;
    Rng rng(spec.seed);
    std::vector<std::vector<std::pair<std::size_t, int>>> edits;
    for (const auto& d : spec.defects) {
        const Labels before = bad;
        switch (d.type) {
            case DefectType::ExtraComponent: extra_component(g, bad, d, rng); break;
            case DefectType::HolePuncture: hole_puncture(g, bad, d, rng); break;
            case DefectType::Bridge: bridge(g, bad, d, rng); break;
            case DefectType::LoopBreak: loop_break(g, bad, d, rng); break;
        }
        auto& e = edits.emplace_back();
        for (std::size_t i = 0; i < bad.size(); ++i)
            if (bad[i] != before[i]) e.emplace_back(i, bad[i]);
    }
    ProbSegmentation probs = blur(g, bad, k, spec, rng);

    // Attach the requested spacing only now; geometry is built in voxels.
    ChannelStack stack = probs.stack();
    std::vector<std::vector<double>> channels;
    for (int c = 0; c < k; ++c) channels.emplace_back(stack.channel(c).begin(), stack.channel(c).end());
    PhantomCase out{spec,
                    ProbSegmentation(ChannelStack(spec.shape, std::move(channels))),
                    LabelMap(spec.shape, k, std::move(clean)),
                    LabelMap(spec.shape, k, std::move(bad)),
                    prior,
                    std::move(edits)};
    return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::size_t i) {
    std::uint64_t z = seed + static_cast<std::uint64_t>(i) + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<PhantomCase> batch(const PhantomSpec& templ, std::size_t n, std::uint64_t seed, std::size_t threads) {
    if (n < 1) throw std::invalid_argument("batch needs n >= 1");
    templ.validate();
    std::vector<PhantomCase> out(n);
    parallel_for(n, threads, [&](std::size_t i) {
        PhantomSpec s = templ;
        s.seed = derive_seed(seed, i);
        out[i] = generate(s);
    });
    return out;
}

std::vector<Defect> sample_defects(PhantomTask task, std::uint64_t seed, int min_count, int max_count) {
    if (min_count < 0 || max_count < min_count) throw std::invalid_argument("bad defect count range");
    std::vector<Defect> pool;
    if (task == PhantomTask::ShortAxis2D) {
        enum { rv = 2, my = 3, lv = 4 };
        pool = {
            {DefectType::ExtraComponent, rv, 2.0, 0},
            {DefectType::ExtraComponent, lv, 2.0, 0},
            {DefectType::HolePuncture, my, 1.0, 0},
            {DefectType::HolePuncture, my, 1.0, rv},
            {DefectType::Bridge, rv, 2.0, lv},
            {DefectType::LoopBreak, my, 2.0, 0},
        };
    } else {
        enum { my = 2, la = 3, lv = 4, ra = 5, rv = 6 };
        pool = {
            {DefectType::ExtraComponent, lv, 2.0, 0},
            {DefectType::ExtraComponent, ra, 2.0, 0},
            {DefectType::HolePuncture, lv, 1.0, 0},
            {DefectType::Bridge, la, 2.0, ra},
        };
    }
    Rng rng(seed);
    const int count = min_count + static_cast<int>(rng.index(static_cast<std::size_t>(max_count - min_count + 1)));
    std::vector<Defect> out;
    for (int i = 0; i < count; ++i) out.push_back(pool[rng.index(pool.size())]);
    return out;
}

LabelMap single_defect_labels(const PhantomCase& c, std::size_t i) {
    if (i >= c.edits.size()) throw std::out_of_range("defect index out of range");
    std::vector<std::uint16_t> l(c.truth.labels().begin(), c.truth.labels().end());
    for (const auto& [v, label] : c.edits[i]) l[v] = static_cast<std::uint16_t>(label);
    return LabelMap(c.truth.shape(), c.truth.num_classes(), std::move(l));
}

bool defects_independent(const PhantomCase& c, Construction construction) {
    if (c.edits.size() < 2) return true;
    int sum = 0;
    for (std::size_t i = 0; i < c.edits.size(); ++i)
        sum += betti_error(single_defect_labels(c, i), c.prior, construction).total;
    return betti_error(c.defective, c.prior, construction).total == sum;
}

PhantomCase random_case(const PhantomSpec& templ, std::uint64_t seed, int min_count, int max_count) {
    constexpr std::size_t attempts = 64;
    PhantomSpec s = templ;
    s.seed = seed;
    for (std::size_t a = 0; a < attempts; ++a) {
        s.defects = templ.defects;
        const auto extra = sample_defects(s.task, derive_seed(seed, a), min_count, max_count);
        s.defects.insert(s.defects.end(), extra.begin(), extra.end());
        try {
            PhantomCase c = generate(s);
            if (defects_independent(c)) return c;
        } catch (const std::invalid_argument&) {
            if (!templ.defects.empty() && extra.empty()) throw;
        }
    }
    throw std::invalid_argument("no independent defect combination found");
}

void write_case(const PhantomCase& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    npy::save(dir / "probs.npy", npy::stack_array(c.probs.stack()));
    npy::save(dir / "gt.npy", npy::labels_array(c.truth));
    npy::save(dir / "defective.npy", npy::labels_array(c.defective));
    {
        std::ofstream f(dir / "prior.json");
        f << prior_to_json(c.prior);
    }
    nlohmann::ordered_json meta;
    meta["task"] = to_string(c.spec.task);
    meta["shape"] = c.spec.shape.dims();
    meta["seed"] = c.spec.seed;
    meta["softness"] = c.spec.softness;
    meta["noise"] = c.spec.noise;
    auto defects = nlohmann::ordered_json::array();
    for (const auto& d : c.spec.defects) defects.push_back(format_defect(d, c.prior));
    meta["defects"] = defects;
    std::ofstream f(dir / "case.json");
    f << meta.dump(2) << '\n';
}

}  // namespace cubitopo
