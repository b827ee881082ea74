#include "cubitopo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "cubitopo/distance.hpp"

namespace cubitopo {

namespace {

// Neighbour offsets as per-axis steps in {-1, 0, 1}.
std::vector<std::vector<int>> neighbour_steps(int ndim, bool full) {
    std::vector<std::vector<int>> steps;
    if (!full) {
        for (int a = 0; a < ndim; ++a)
            for (int s : {-1, 1}) {
                std::vector<int> d(ndim, 0);
                d[a] = s;
                steps.push_back(d);
            }
        return steps;
    }
    int total = 1;
    for (int a = 0; a < ndim; ++a) total *= 3;
    for (int code = 0; code < total; ++code) {
        std::vector<int> d(ndim);
        int c = code;
        bool zero = true;
        for (int a = ndim - 1; a >= 0; --a) {
            d[a] = c % 3 - 1;
            c /= 3;
            zero = zero && d[a] == 0;
        }
        if (!zero) steps.push_back(d);
    }
    return steps;
}

std::vector<std::size_t> unravel(std::size_t i, const std::vector<std::size_t>& dims) {
    std::vector<std::size_t> c(dims.size());
    for (int a = static_cast<int>(dims.size()) - 1; a >= 0; --a) {
        c[a] = i % dims[a];
        i /= dims[a];
    }
    return c;
}

void require_same_shape(const LabelMap& a, const LabelMap& b) {
    if (!(a.shape().dims() == b.shape().dims()))
        throw std::invalid_argument("label maps have different shapes");
    if (a.num_classes() != b.num_classes())
        throw std::invalid_argument("label maps have different class counts");
}

bool on_border(const std::vector<std::size_t>& c, const std::vector<std::size_t>& dims) {
    for (std::size_t a = 0; a < dims.size(); ++a)
        if (c[a] == 0 || c[a] + 1 == dims[a]) return true;
    return false;
}

}  // namespace

Components label_components(const BitField& mask, bool full) {
    const auto& dims = mask.shape.dims();
    const int nd = mask.shape.ndim();
    const auto strides = mask.shape.strides();
    const auto steps = neighbour_steps(nd, full);
    const std::size_t n = mask.bits.size();

    Components out;
    out.labels.assign(n, 0);
    std::deque<std::size_t> queue;
    for (std::size_t seed = 0; seed < n; ++seed) {
        if (!mask.bits[seed] || out.labels[seed] != 0) continue;
        const int id = ++out.count;
        std::size_t size = 0;
        out.labels[seed] = id;
        queue.push_back(seed);
        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            ++size;
            const auto c = unravel(p, dims);
            for (const auto& d : steps) {
                std::size_t q = 0;
                bool inside = true;
                for (int a = 0; a < nd && inside; ++a) {
                    const long long v = static_cast<long long>(c[a]) + d[a];
                    if (v < 0 || v >= static_cast<long long>(dims[a])) inside = false;
                    else q += static_cast<std::size_t>(v) * strides[a];
                }
                if (inside && mask.bits[q] && out.labels[q] == 0) {
                    out.labels[q] = id;
                    queue.push_back(q);
                }
            }
        }
        out.sizes.push_back(size);
    }
    return out;
}

long long euler_characteristic(const BitField& mask, Construction construction) {
    const auto& dims = mask.shape.dims();
    const int nd = mask.shape.ndim();
    const auto strides = mask.shape.strides();
    const bool v = construction == Construction::V;

    std::vector<std::size_t> ext(nd);
    std::size_t cells = 1;
    for (int a = 0; a < nd; ++a) {
        ext[a] = v ? 2 * dims[a] - 1 : 2 * dims[a] + 1;
        cells *= ext[a];
    }

    long long chi = 0;
    std::vector<std::size_t> c(nd, 0);
    // Candidate grid coordinates per axis for the current cell.
    std::vector<std::vector<std::size_t>> cand(nd);
    for (std::size_t id = 0; id < cells; ++id) {
        std::size_t rest = id;
        int dim = 0;
        for (int a = nd - 1; a >= 0; --a) {
            c[a] = rest % ext[a];
            rest /= ext[a];
            cand[a].clear();
            if (v) {
                if (c[a] % 2 == 0) {
                    cand[a].push_back(c[a] / 2);
                } else {
                    ++dim;
                    cand[a].push_back((c[a] - 1) / 2);
                    cand[a].push_back((c[a] + 1) / 2);
                }
            } else {
                if (c[a] % 2 == 1) {
                    ++dim;
                    cand[a].push_back((c[a] - 1) / 2);
                } else {
                    if (c[a] >= 2) cand[a].push_back(c[a] / 2 - 1);
                    if (c[a] / 2 < dims[a]) cand[a].push_back(c[a] / 2);
                }
            }
        }
        // V: all listed points in the mask. T: any listed point in the mask.
        bool all = true, any = false;
        std::vector<std::size_t> pick(nd, 0);
        while (true) {
            std::size_t p = 0;
            for (int a = 0; a < nd; ++a) p += cand[a][pick[a]] * strides[a];
            if (mask.bits[p]) any = true;
            else all = false;
            int a = nd - 1;
            while (a >= 0 && ++pick[a] == cand[a].size()) pick[a--] = 0;
            if (a < 0) break;
        }
        if (v ? all : any) chi += (dim % 2 == 0) ? 1 : -1;
    }
    return chi;
}

std::vector<int> betti_oracle(const BitField& mask, Construction construction) {
    const int nd = mask.shape.ndim();
    if (nd != 2 && nd != 3) throw std::invalid_argument("betti_oracle: expected a 2D or 3D mask");
    const bool v = construction == Construction::V;
    std::vector<int> betti(nd, 0);
    betti[0] = label_components(mask, !v).count;
    const long long chi = euler_characteristic(mask, construction);
    if (nd == 2) {
        betti[1] = static_cast<int>(betti[0] - chi);
        return betti;
    }
    BitField background{mask.shape, std::vector<std::uint8_t>(mask.bits.size())};
    for (std::size_t i = 0; i < mask.bits.size(); ++i) background.bits[i] = !mask.bits[i];
    const Components bg = label_components(background, v);
    std::vector<std::uint8_t> touches(bg.count + 1, 0);
    for (std::size_t i = 0; i < bg.labels.size(); ++i)
        if (bg.labels[i] && !touches[bg.labels[i]] && on_border(unravel(i, mask.shape.dims()), mask.shape.dims()))
            touches[bg.labels[i]] = 1;
    int enclosed = 0;
    for (int c = 1; c <= bg.count; ++c) enclosed += !touches[c];
    betti[2] = enclosed;
    betti[1] = static_cast<int>(betti[0] + betti[2] - chi);
    return betti;
}

std::vector<ClassSubset> required_subsets(int num_classes, int ndim) {
    std::vector<ClassSubset> out;
    for (int i = 2; i <= num_classes; ++i) {
        out.push_back({i});
        for (int j = i + 1; j <= num_classes; ++j) {
            out.push_back({i, j});
            if (ndim == 3)
                for (int k = j + 1; k <= num_classes; ++k) out.push_back({i, j, k});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

BettiError betti_error(const LabelMap& pred, const BettiPrior& prior, Construction construction) {
    if (pred.num_classes() != prior.num_classes())
        throw std::invalid_argument("prediction has " + std::to_string(pred.num_classes()) +
                                    " classes but the prior has " + std::to_string(prior.num_classes()));
    if (pred.shape().ndim() != prior.ndim())
        throw std::invalid_argument("prediction dimensionality does not match the prior");
    BettiError out;
    for (const auto& subset : required_subsets(prior.num_classes(), prior.ndim())) {
        const auto* target = prior.find(subset);
        if (!target)
            throw std::invalid_argument("prior is missing subset '" + prior.subset_key(subset) + "'");
        SubsetBetti s{subset, betti_oracle(pred.mask(subset), construction), *target, 0};
        for (std::size_t d = 0; d < s.target.size(); ++d) s.error += std::abs(s.predicted[d] - s.target[d]);
        out.total += s.error;
        out.subsets.push_back(std::move(s));
    }
    return out;
}

double dice(const LabelMap& pred, const LabelMap& gt, int cls) {
    require_same_shape(pred, gt);
    std::size_t inter = 0, sum = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == cls, g = gt[i] == cls;
        inter += p && g;
        sum += p + g;
    }
    return sum == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(sum);
}

double gdice(const LabelMap& pred, const LabelMap& gt) {
    require_same_shape(pred, gt);
    std::size_t inter = 0, sum = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] >= 2, g = gt[i] >= 2;
        inter += p && g && pred[i] == gt[i];
        sum += p + g;
    }
    return sum == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(sum);
}

namespace {

BitField boundary_of(const BitField& mask) {
    const auto& dims = mask.shape.dims();
    const int nd = mask.shape.ndim();
    const auto strides = mask.shape.strides();
    BitField out{mask.shape, std::vector<std::uint8_t>(mask.bits.size(), 0)};
    for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        if (!mask.bits[i]) continue;
        const auto c = unravel(i, dims);
        bool edge = false;
        for (int a = 0; a < nd && !edge; ++a) {
            if (c[a] == 0 || c[a] + 1 == dims[a]) edge = true;
            else if (!mask.bits[i - strides[a]] || !mask.bits[i + strides[a]]) edge = true;
        }
        out.bits[i] = edge;
    }
    return out;
}

double directed(const BitField& from, const std::vector<double>& dist_to) {
    double worst = 0.0;
    for (std::size_t i = 0; i < from.bits.size(); ++i)
        if (from.bits[i]) worst = std::max(worst, dist_to[i]);
    return worst;
}

}  // namespace

std::optional<double> hausdorff(const LabelMap& pred, const LabelMap& gt, int cls) {
    require_same_shape(pred, gt);
    const BitField a = boundary_of(pred.mask(cls));
    const BitField b = boundary_of(gt.mask(cls));
    if (a.count() == 0 || b.count() == 0) return std::nullopt;
    return std::max(directed(a, distance_to(b)), directed(b, distance_to(a)));
}

LabelMap cca_baseline(const LabelMap& labels) {
    std::vector<std::uint16_t> out(labels.labels().begin(), labels.labels().end());
    for (int cls = 2; cls <= labels.num_classes(); ++cls) {
        const Components comps = label_components(labels.mask(cls), false);
        if (comps.count <= 1) continue;
        int keep = 1;
        for (int c = 2; c <= comps.count; ++c)
            if (comps.sizes[c - 1] > comps.sizes[keep - 1]) keep = c;
        for (std::size_t i = 0; i < out.size(); ++i)
            if (comps.labels[i] != 0 && comps.labels[i] != keep) out[i] = 1;
    }
    return LabelMap(labels.shape(), labels.num_classes(), std::move(out));
}

LabelMap cca_baseline(const ProbSegmentation& seg) { return cca_baseline(argmax_labels(seg)); }

TopoReport evaluate(const LabelMap& pred, const LabelMap& gt, const BettiPrior& prior, Construction construction,
                    std::string case_id) {
    require_same_shape(pred, gt);
    TopoReport r;
    r.case_id = std::move(case_id);
    BettiError be = betti_error(pred, prior, construction);
    r.be = be.total;
    r.ts = be.total == 0 ? 1 : 0;
    r.subsets = std::move(be.subsets);
    for (int cls = 2; cls <= pred.num_classes(); ++cls) {
        r.dice.push_back(dice(pred, gt, cls));
        r.hausdorff.push_back(hausdorff(pred, gt, cls));
    }
    r.gdice = gdice(pred, gt);
    return r;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of an empty list");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

Quartiles quartiles(const std::vector<double>& v) {
    return {percentile(v, 25), percentile(v, 50), percentile(v, 75)};
}

}  // namespace

Summary aggregate(const std::vector<TopoReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate: no reports");
    Summary s;
    s.n = reports.size();
    std::vector<double> be, gd;
    double ts = 0.0;
    for (const auto& r : reports) {
        be.push_back(r.be);
        gd.push_back(r.gdice);
        ts += r.ts;
    }
    s.be = quartiles(be);
    s.be_p98 = percentile(be, 98);
    s.be_p99 = percentile(be, 99);
    s.be_p100 = percentile(be, 100);
    s.gdice = quartiles(gd);
    const std::size_t classes = reports.front().dice.size();
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<double> d, h;
        for (const auto& r : reports) {
            if (c < r.dice.size()) d.push_back(r.dice[c]);
            if (c < r.hausdorff.size() && r.hausdorff[c]) h.push_back(*r.hausdorff[c]);
        }
        s.dice.push_back(quartiles(d));
        s.hausdorff.push_back(h.empty() ? std::nullopt : std::optional<Quartiles>(quartiles(h)));
    }
    const double rate = ts / static_cast<double>(reports.size());
    s.rho = 100.0 * rate;
    s.sigma_rho = 100.0 * std::sqrt(rate * (1.0 - rate));
    return s;
}

namespace {

nlohmann::ordered_json quartiles_json(const Quartiles& q) {
    return {{"P25", q.p25}, {"P50", q.p50}, {"P75", q.p75}};
}

std::string class_name(const std::vector<std::string>& names, std::size_t fg_index) {
    const std::size_t idx = fg_index + 1;
    return idx < names.size() ? names[idx] : "class" + std::to_string(idx + 1);
}

std::string subset_name(const std::vector<std::string>& names, const ClassSubset& subset) {
    std::string out;
    for (int c : subset) {
        if (!out.empty()) out += '|';
        out += static_cast<std::size_t>(c - 1) < names.size() ? names[c - 1] : "class" + std::to_string(c);
    }
    return out;
}

}  // namespace

std::string report_json(const std::vector<TopoReport>& reports, const Summary& summary,
                        const std::vector<std::string>& class_names) {
    using json = nlohmann::ordered_json;
    json cases = json::array();
    for (const auto& r : reports) {
        json c;
        c["case"] = r.case_id;
        c["BE"] = r.be;
        c["TS"] = r.ts;
        c["gDSC"] = r.gdice;
        json d = json::object(), h = json::object(), b = json::object();
        for (std::size_t k = 0; k < r.dice.size(); ++k) {
            d[class_name(class_names, k)] = r.dice[k];
            h[class_name(class_names, k)] = r.hausdorff[k] ? json(*r.hausdorff[k]) : json(nullptr);
        }
        for (const auto& s : r.subsets)
            b[subset_name(class_names, s.subset)] = {{"predicted", s.predicted}, {"prior", s.target}};
        c["DSC"] = d;
        c["HDD"] = h;
        c["betti"] = b;
        cases.push_back(c);
    }
    json s;
    s["n"] = summary.n;
    json be = quartiles_json(summary.be);
    be["P98"] = summary.be_p98;
    be["P99"] = summary.be_p99;
    be["P100"] = summary.be_p100;
    s["BE"] = be;
    s["gDSC"] = quartiles_json(summary.gdice);
    json d = json::object(), h = json::object();
    for (std::size_t k = 0; k < summary.dice.size(); ++k) {
        d[class_name(class_names, k)] = quartiles_json(summary.dice[k]);
        h[class_name(class_names, k)] =
            summary.hausdorff[k] ? quartiles_json(*summary.hausdorff[k]) : json(nullptr);
    }
    s["DSC"] = d;
    s["HDD"] = h;
    s["rho"] = summary.rho;
    s["sigma_rho"] = summary.sigma_rho;
    json out;
    out["cases"] = cases;
    out["summary"] = s;
    return out.dump(2) + "\n";
}

void write_report_csv(std::ostream& out, const std::vector<TopoReport>& reports,
                      const std::vector<std::string>& class_names) {
    const std::size_t classes = reports.empty() ? 0 : reports.front().dice.size();
    out << "case,BE,TS,gDSC";
    for (std::size_t k = 0; k < classes; ++k) out << ",DSC_" << class_name(class_names, k);
    for (std::size_t k = 0; k < classes; ++k) out << ",HDD_" << class_name(class_names, k);
    out << '\n';
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const auto& r : reports) {
        out << r.case_id << ',' << r.be << ',' << r.ts << ',' << num(r.gdice);
        for (double d : r.dice) out << ',' << num(d);
        for (const auto& h : r.hausdorff) out << ',' << (h ? num(*h) : std::string());
        out << '\n';
    }
}

}  // namespace cubitopo
