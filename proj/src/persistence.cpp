#include "cubitopo/persistence.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <limits>
#include <utility>

#include "cubitopo/parallel.hpp"

namespace cubitopo {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
constexpr std::uint64_t kInfinity = std::numeric_limits<std::uint64_t>::max();

class BitSet {
public:
    explicit BitSet(std::uint64_t n = 0) : words_((n + 63) / 64, 0) {}
    void set(std::uint64_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
    bool test(std::uint64_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }

private:
    std::vector<std::uint64_t> words_;
};

std::uint32_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

// Symmetric difference of two columns sorted in descending order.
void add_column(std::vector<std::uint64_t>& work, const std::uint64_t* other, std::size_t len,
                std::vector<std::uint64_t>& scratch) {
    scratch.clear();
    std::size_t i = 0, j = 0;
    while (i < work.size() && j < len) {
        if (work[i] > other[j]) {
            scratch.push_back(work[i++]);
        } else if (work[i] < other[j]) {
            scratch.push_back(other[j++]);
        } else {
            ++i;
            ++j;
        }
    }
    scratch.insert(scratch.end(), work.begin() + static_cast<std::ptrdiff_t>(i), work.end());
    scratch.insert(scratch.end(), other + j, other + len);
    work.swap(scratch);
}

template <int D>
class Engine {
public:
    using Coords = std::array<std::uint32_t, D>;

    explicit Engine(const FilteredComplex& cx)
        : cx_(cx),
          vcon_(cx.construction() == Construction::V),
          rank_(cx.ranks()),
          order_(cx.order()),
          values_(cx.values()) {
        const auto ps = cx.shape().strides();
        for (int a = 0; a < D; ++a) {
            n_[a] = static_cast<long>(cx.shape().extent(a));
            ps_[a] = ps[a];
            cs_[a] = cx.cell_stride(a);
            cn_[a] = cx.cell_extents()[a];
        }
    }

    Barcode run(int max_dim) {
        Barcode bc;
        bc.ndim = D;
        max_dim = std::min(max_dim, D - 1);
        if (max_dim < 0) return bc;
        const bool need_reduction = D == 3 && max_dim >= 1;
        if (need_reduction) {
            negative_edges_ = BitSet(cx_.num_cells());
            positive_faces_ = BitSet(cx_.num_cells());
        }
        if (vcon_)
            dim0_vertices(bc.bars, need_reduction);
        else
            dim0_tops(bc.bars, need_reduction);
        if (max_dim >= D - 1 || need_reduction) top_dimension(bc.bars, max_dim >= D - 1);
        if (need_reduction) {
            std::vector<Bar> dim1;
            reduce_dim1(dim1);
            // Keep bars grouped by ascending dimension.
            auto it = std::find_if(bc.bars.begin(), bc.bars.end(), [](const Bar& b) { return b.dim > 1; });
            bc.bars.insert(it, dim1.begin(), dim1.end());
        }
        return bc;
    }

private:
    Coords point_coords(std::size_t p) const {
        Coords x{};
        for (int a = 0; a < D; ++a) {
            x[a] = static_cast<std::uint32_t>(p / ps_[a]);
            p %= ps_[a];
        }
        return x;
    }

    std::uint64_t cell_id(const Coords& c) const {
        std::uint64_t id = 0;
        for (int a = 0; a < D; ++a) id += c[a] * cs_[a];
        return id;
    }

    Coords cell_coords(std::uint64_t id) const {
        Coords c{};
        for (int a = 0; a < D; ++a) {
            c[a] = static_cast<std::uint32_t>(id / cs_[a]);
            id %= cs_[a];
        }
        return c;
    }

    // Entry rank of the cell with doubled coordinates `c`.
    std::uint32_t key(const Coords& c) const {
        std::array<std::array<std::size_t, 2>, D> cand{};
        std::array<int, D> nc{};
        for (int a = 0; a < D; ++a) {
            if (vcon_) {
                cand[a][nc[a]++] = (c[a] >> 1) * ps_[a];
                if (c[a] & 1u) cand[a][nc[a]++] = ((c[a] + 1) >> 1) * ps_[a];
            } else if (c[a] & 1u) {
                cand[a][nc[a]++] = (c[a] >> 1) * ps_[a];
            } else {
                const long hi = c[a] >> 1;
                if (hi >= 1) cand[a][nc[a]++] = (hi - 1) * ps_[a];
                if (hi < n_[a]) cand[a][nc[a]++] = hi * ps_[a];
            }
        }
        std::uint32_t best = vcon_ ? 0 : kNone;
        std::array<int, D> idx{};
        for (;;) {
            std::size_t p = 0;
            for (int a = 0; a < D; ++a) p += cand[a][idx[a]];
            best = vcon_ ? std::max(best, rank_[p]) : std::min(best, rank_[p]);
            int a = D - 1;
            while (a >= 0 && ++idx[a] == nc[a]) idx[a--] = 0;
            if (a < 0) break;
        }
        return best;
    }

    void emit(std::vector<Bar>& out, int dim, std::uint32_t birth_key, std::uint64_t birth_cell,
              std::uint32_t death_key, std::uint64_t death_cell) const {
        Bar b;
        b.dim = dim;
        b.birth_point = order_[birth_key];
        b.birth = values_[b.birth_point];
        b.birth_cell = Cell{birth_cell, dim};
        b.death_point = order_[death_key];
        b.death = values_[*b.death_point];
        b.death_cell = Cell{death_cell, dim + 1};
        out.push_back(b);
    }

    void emit_essential(std::vector<Bar>& out, std::uint32_t birth_key, std::uint64_t birth_cell) const {
        Bar b;
        b.dim = 0;
        b.birth_point = order_[birth_key];
        b.birth = values_[b.birth_point];
        b.birth_cell = Cell{birth_cell, 0};
        b.death = kEssentialDeath;
        out.push_back(b);
    }

    // V: vertices are grid points; an edge enters with its later endpoint.
    void dim0_vertices(std::vector<Bar>& out, bool mark) {
        const std::size_t np = rank_.size();
        std::vector<std::uint32_t> parent(np);
        for (std::uint32_t r = 0; r < np; ++r) {
            const std::uint32_t v = order_[r];
            parent[v] = v;
            const Coords x = point_coords(v);
            std::uint64_t vcell = 0;
            for (int a = 0; a < D; ++a) vcell += 2ull * x[a] * cs_[a];
            // Edge ids ascending: -axis0 ... -axis(D-1), +axis(D-1) ... +axis0.
            for (int k = 0; k < 2 * D; ++k) {
                const int a = k < D ? k : 2 * D - 1 - k;
                const int s = k < D ? -1 : 1;
                if (s < 0 ? x[a] == 0 : static_cast<long>(x[a]) + 1 >= n_[a]) continue;
                const std::uint32_t u = s < 0 ? v - static_cast<std::uint32_t>(ps_[a])
                                              : v + static_cast<std::uint32_t>(ps_[a]);
                if (rank_[u] > r) continue;
                const std::uint32_t rv = find_root(parent, v);
                const std::uint32_t ru = find_root(parent, u);
                if (rv == ru) continue;
                const bool v_younger = rank_[rv] > rank_[ru];
                const std::uint32_t young = v_younger ? rv : ru;
                const std::uint32_t old = v_younger ? ru : rv;
                parent[young] = old;
                const std::uint64_t edge = s < 0 ? vcell - cs_[a] : vcell + cs_[a];
                if (mark) negative_edges_.set(edge);
                if (rank_[young] != r) emit(out, 0, rank_[young], cx_.point_cell(young), r, edge);
            }
        }
        if (np > 0) emit_essential(out, 0, cx_.point_cell(order_[0]));
    }

    // T: vertices are the corners of pixels; a face enters with its first
    // incident pixel.
    void dim0_tops(std::vector<Bar>& out, bool mark) {
        std::array<std::size_t, D> vs{};  // vertex-grid strides, extents n+1
        vs[D - 1] = 1;
        for (int a = D - 2; a >= 0; --a) vs[a] = vs[a + 1] * static_cast<std::size_t>(n_[a + 1] + 1);
        const std::size_t nv = vs[0] * static_cast<std::size_t>(n_[0] + 1);
        std::vector<std::uint32_t> parent(nv);
        std::vector<std::uint32_t> vrank(nv, kNone);

        auto vertex_cell = [&](std::size_t w) {
            std::uint64_t id = 0;
            for (int a = 0; a < D; ++a) {
                id += 2ull * (w / vs[a]) * cs_[a];
                w %= vs[a];
            }
            return id;
        };
        auto elder = [&](std::uint32_t a, std::uint32_t b) {
            return vrank[a] < vrank[b] || (vrank[a] == vrank[b] && a < b);
        };

        std::array<std::pair<std::uint64_t, std::array<std::uint32_t, 2>>, D * (1 << (D - 1))> edges{};
        for (std::uint32_t r = 0; r < rank_.size(); ++r) {
            const std::uint32_t p = order_[r];
            const Coords x = point_coords(p);
            std::size_t base = 0;
            for (int a = 0; a < D; ++a) base += x[a] * vs[a];

            for (int m = 0; m < (1 << D); ++m) {  // corners in ascending id order
                std::size_t w = base;
                for (int a = 0; a < D; ++a)
                    if (m & (1 << (D - 1 - a))) w += vs[a];
                if (vrank[w] == kNone) {
                    vrank[w] = r;
                    parent[w] = static_cast<std::uint32_t>(w);
                }
            }

            int ne = 0;
            for (int a = 0; a < D; ++a) {
                for (int m = 0; m < (1 << (D - 1)); ++m) {
                    Coords c{};
                    std::size_t w0 = base;
                    int bit = 0;
                    for (int b = 0; b < D; ++b) {
                        if (b == a) {
                            c[b] = 2 * x[b] + 1;
                            continue;
                        }
                        const std::uint32_t off = (m >> bit++) & 1u;
                        c[b] = 2 * (x[b] + off);
                        w0 += off * vs[b];
                    }
                    if (key(c) != r) continue;
                    edges[ne++] = {cell_id(c), {static_cast<std::uint32_t>(w0), static_cast<std::uint32_t>(w0 + vs[a])}};
                }
            }
            std::sort(edges.begin(), edges.begin() + ne);
            for (int e = 0; e < ne; ++e) {
                const std::uint32_t r1 = find_root(parent, edges[e].second[0]);
                const std::uint32_t r2 = find_root(parent, edges[e].second[1]);
                if (r1 == r2) continue;
                const std::uint32_t young = elder(r1, r2) ? r2 : r1;
                const std::uint32_t old = young == r1 ? r2 : r1;
                parent[young] = old;
                if (mark) negative_edges_.set(edges[e].first);
                if (vrank[young] != r) emit(out, 0, vrank[young], vertex_cell(young), r, edges[e].first);
            }
        }
        if (!rank_.empty()) emit_essential(out, 0, cx_.point_cell(order_[0]));
    }

    // Codimension-1 cells entering with grid point of rank r, ascending by id.
    int codim1_cells(std::uint32_t r, std::array<std::uint64_t, 2 * D * (1 << (D - 1))>& out) const {
        const std::uint32_t p = order_[r];
        const Coords x = point_coords(p);
        int count = 0;
        if (vcon_) {
            // Star of vertex x: one even axis e, offsets +-1 on the others.
            for (int e = 0; e < D; ++e) {
                for (int m = 0; m < (1 << (D - 1)); ++m) {
                    Coords c{};
                    bool ok = true;
                    int bit = 0;
                    for (int b = 0; b < D && ok; ++b) {
                        if (b == e) {
                            c[b] = 2 * x[b];
                            continue;
                        }
                        const bool up = (m >> bit++) & 1;
                        if (up ? static_cast<long>(x[b]) + 1 >= n_[b] : x[b] == 0) ok = false;
                        else c[b] = up ? 2 * x[b] + 1 : 2 * x[b] - 1;
                    }
                    if (ok && key(c) == r) out[count++] = cell_id(c);
                }
            }
        } else {
            for (int e = 0; e < D; ++e) {
                for (int s = 0; s < 2; ++s) {
                    Coords c{};
                    for (int b = 0; b < D; ++b) c[b] = 2 * x[b] + 1;
                    c[e] = s ? 2 * x[e] + 2 : 2 * x[e];
                    if (key(c) == r) out[count++] = cell_id(c);
                }
            }
        }
        std::sort(out.begin(), out.begin() + count);
        return count;
    }

    // Dual union-find for dimension D-1: faces in reverse filtration order
    // merge their top-dimensional cofaces; the outside is the eldest node.
    void top_dimension(std::vector<Bar>& out, bool emit_bars) {
        std::array<long, D> te{};
        for (int a = 0; a < D; ++a) te[a] = vcon_ ? n_[a] - 1 : n_[a];
        std::array<std::size_t, D> ts{};
        ts[D - 1] = 1;
        for (int a = D - 2; a >= 0; --a) ts[a] = ts[a + 1] * static_cast<std::size_t>(std::max<long>(te[a + 1], 0));
        const std::size_t nt = ts[0] * static_cast<std::size_t>(std::max<long>(te[0], 0));
        const auto outside = static_cast<std::uint32_t>(nt);

        std::vector<std::uint32_t> parent(nt + 1);
        std::vector<std::uint64_t> latest(nt + 1);  // (entry rank << 32 | top index) of the component's last cell
        for (std::size_t t = 0; t < nt; ++t) {
            parent[t] = static_cast<std::uint32_t>(t);
            Coords c{};
            std::size_t rem = t;
            for (int a = 0; a < D; ++a) {
                c[a] = static_cast<std::uint32_t>(2 * (rem / ts[a]) + 1);
                rem %= ts[a];
            }
            latest[t] = (std::uint64_t{key(c)} << 32) | t;
        }
        parent[nt] = outside;
        latest[nt] = kInfinity;

        auto top_index = [&](const Coords& c) -> std::uint32_t {
            std::size_t t = 0;
            for (int a = 0; a < D; ++a) {
                if (c[a] >= cn_[a]) return outside;  // wrapped below zero or past the end
                t += (c[a] >> 1) * ts[a];
            }
            return static_cast<std::uint32_t>(t);
        };
        auto top_cell_id = [&](std::size_t t) {
            Coords c{};
            for (int a = 0; a < D; ++a) {
                c[a] = static_cast<std::uint32_t>(2 * (t / ts[a]) + 1);
                t %= ts[a];
            }
            return cell_id(c);
        };

        std::array<std::uint64_t, 2 * D * (1 << (D - 1))> faces{};
        for (std::uint32_t r = static_cast<std::uint32_t>(rank_.size()); r-- > 0;) {
            const int nf = codim1_cells(r, faces);
            for (int f = nf - 1; f >= 0; --f) {
                const Coords c = cell_coords(faces[f]);
                int e = 0;
                while (c[e] & 1u) ++e;
                Coords lo = c, hi = c;
                lo[e] -= 1;  // wraps to UINT32_MAX at the lower border
                hi[e] += 1;
                const std::uint32_t ra = find_root(parent, top_index(lo));
                const std::uint32_t rb = find_root(parent, top_index(hi));
                if (ra == rb) continue;
                const std::uint32_t young = latest[ra] < latest[rb] ? ra : rb;
                const std::uint32_t old = young == ra ? rb : ra;
                parent[young] = old;
                if (D == 3) positive_faces_.set(faces[f]);
                const auto death_key = static_cast<std::uint32_t>(latest[young] >> 32);
                if (emit_bars && death_key != r)
                    emit(out, D - 1, r, faces[f], death_key, top_cell_id(latest[young] & 0xffffffffu));
            }
        }
    }

    // Standard Z/2 reduction of the 2-cell boundary columns (3D only).
    void reduce_dim1(std::vector<Bar>& out) {
        std::vector<std::uint32_t> pivot_slot(cx_.num_cells(), kNone);
        std::vector<std::uint64_t> pool;
        std::vector<std::uint64_t> offsets{0};
        std::vector<std::uint64_t> work, scratch;
        std::array<std::uint64_t, 2 * D * (1 << (D - 1))> faces{};

        for (std::uint32_t r = 0; r < rank_.size(); ++r) {
            const int nf = codim1_cells(r, faces);
            for (int f = 0; f < nf; ++f) {
                const std::uint64_t sq = faces[f];
                if (positive_faces_.test(sq)) continue;
                const Coords c = cell_coords(sq);
                work.clear();
                for (int a = 0; a < D; ++a) {
                    if (!(c[a] & 1u)) continue;
                    for (int s = -1; s <= 1; s += 2) {
                        const std::uint64_t edge = s < 0 ? sq - cs_[a] : sq + cs_[a];
                        if (negative_edges_.test(edge)) continue;
                        Coords ec = c;
                        ec[a] = s < 0 ? c[a] - 1 : c[a] + 1;
                        work.push_back((std::uint64_t{key(ec)} << 32) | edge);
                    }
                }
                std::sort(work.begin(), work.end(), std::greater<>());
                while (!work.empty()) {
                    const std::uint32_t slot = pivot_slot[work.front() & 0xffffffffu];
                    if (slot == kNone) break;
                    add_column(work, pool.data() + offsets[slot], offsets[slot + 1] - offsets[slot], scratch);
                }
                if (work.empty()) continue;  // cleared by construction; cannot happen for a full box
                const std::uint64_t pivot = work.front();
                pivot_slot[pivot & 0xffffffffu] = static_cast<std::uint32_t>(offsets.size() - 1);
                pool.insert(pool.end(), work.begin(), work.end());
                offsets.push_back(pool.size());
                const auto birth_key = static_cast<std::uint32_t>(pivot >> 32);
                if (birth_key != r) emit(out, 1, birth_key, pivot & 0xffffffffu, r, sq);
            }
        }
    }

    const FilteredComplex& cx_;
    bool vcon_;
    std::span<const std::uint32_t> rank_;
    std::span<const std::uint32_t> order_;
    std::span<const double> values_;
    std::array<long, D> n_{};
    std::array<std::size_t, D> ps_{};
    std::array<std::uint64_t, D> cs_{};
    std::array<std::uint32_t, D> cn_{};
    BitSet negative_edges_;
    BitSet positive_faces_;
};

std::string format_real(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, end);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

}  // namespace

std::size_t Barcode::count(int dim) const {
    return static_cast<std::size_t>(
        std::count_if(bars.begin(), bars.end(), [dim](const Bar& b) { return b.dim == dim; }));
}

int Barcode::betti_at(int dim, double p) const {
    int n = 0;
    for (const Bar& b : bars)
        if (b.dim == dim && b.birth >= p && p > b.death) ++n;
    return n;
}

std::vector<int> Barcode::betti_at(double p) const {
    std::vector<int> out(ndim, 0);
    for (int d = 0; d < ndim; ++d) out[d] = betti_at(d, p);
    return out;
}

Barcode compute_barcode(const FilteredComplex& complex, int max_dim) {
    if (max_dim < 0 || max_dim > complex.ndim() - 1)
        throw std::invalid_argument("max_dim must lie in [0, " + std::to_string(complex.ndim() - 1) + "]");
    if (complex.ndim() == 2) return Engine<2>(complex).run(max_dim);
    return Engine<3>(complex).run(max_dim);
}

Barcode compute_barcode(const ScalarField& field, Construction construction, int max_dim) {
    return compute_barcode(build_complex(field, construction), max_dim);
}

std::vector<Bar> rank_bars(const Barcode& barcode, int dim) {
    std::vector<Bar> out;
    for (const Bar& b : barcode.bars)
        if (b.dim == dim) out.push_back(b);
    std::stable_sort(out.begin(), out.end(), [](const Bar& a, const Bar& b) {
        if (a.persistence() != b.persistence()) return a.persistence() > b.persistence();
        if (a.birth != b.birth) return a.birth > b.birth;
        return a.birth_cell.id < b.birth_cell.id;
    });
    return out;
}

FieldError::FieldError(std::size_t index, const std::string& what)
    : std::runtime_error("field " + std::to_string(index) + ": " + what), index_(index) {}

std::vector<Barcode> barcodes_parallel(const std::vector<ScalarField>& fields, Construction construction,
                                       int max_dim, std::size_t threads) {
    if (fields.empty()) throw std::invalid_argument("barcodes_parallel: empty field list");
    std::vector<Barcode> out(fields.size());
    std::vector<std::string> errors(fields.size());
    parallel_for(fields.size(), threads, [&](std::size_t i) {
        try {
            out[i] = compute_barcode(fields[i], construction, max_dim);
        } catch (const std::exception& e) {
            errors[i] = e.what();
            if (errors[i].empty()) errors[i] = "unknown error";
        }
    });
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty()) throw FieldError(i, errors[i]);
    return out;
}

void write_barcode_csv(std::ostream& out, const Barcode& barcode, const FilteredComplex& complex) {
    auto tuple = [&](std::uint64_t id) {
        const auto c = complex.coords(id);
        std::string s = "(";
        for (int a = 0; a < complex.ndim(); ++a) {
            if (a) s += ' ';
            s += std::to_string(c[a]);
        }
        return s + ")";
    };
    out << "dim,birth,death,persistence,birth_cell,death_cell\n";
    for (int d = 0; d < barcode.ndim; ++d) {
        for (const Bar& b : rank_bars(barcode, d)) {
            if (!(b.persistence() > 0.0)) continue;
            out << b.dim << ',' << format_real(b.birth) << ',' << format_real(b.death) << ','
                << format_real(b.persistence()) << ',' << tuple(b.birth_cell.id) << ','
                << (b.death_cell ? tuple(b.death_cell->id) : std::string()) << '\n';
        }
    }
}

}  // namespace cubitopo
