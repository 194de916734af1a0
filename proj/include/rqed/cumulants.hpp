#pragma once
#include <algorithm>
#include <map>
#include <numeric>

#include "grid.hpp"

namespace rqed {

// Grid points carrying cumulant tensor indices: (site, time sample) with quadrature weight w_x dt.
struct PointSet {
    TimeGrid grid;
    SiteSet sites;
    std::vector<int> site;
    std::vector<int> k;

    int size() const { return static_cast<int>(k.size()); }
    double weight(int p) const { return sites.weights[site[p]] * grid.dt; }
    double time(int p) const { return grid.time(k[p]); }

    static PointSet window(const TimeGrid& g, const SiteSet& s, int k_begin, int count)
    {
        PointSet P{g, s, {}, {}};
        for (int x = 0; x < s.size(); ++x)
            for (int j = 0; j < count; ++j) {
                P.site.push_back(x);
                P.k.push_back(k_begin + j);
            }
        return P;
    }
    static PointSet full(const TimeGrid& g, const SiteSet& s) { return window(g, s, 0, g.n); }

    cvec sample(const Signal& f) const
    {
        cvec v(size());
        for (int p = 0; p < size(); ++p) v[p] = f(site[p], k[p]);
        return v;
    }
    Signal embed(const cvec& v) const
    {
        Signal out(grid, sites);
        for (int p = 0; p < size(); ++p) out(site[p], grid.wrap(k[p])) += v[p];
        return out;
    }
};

// K[q][p] = kernel(x_q, x_p, t_q - t_p), the kernel restricted to a point set.
inline std::vector<cvec> kernel_matrix(const StationaryKernel& K, const PointSet& P)
{
    std::vector<cvec> M(P.size(), cvec(P.size()));
    for (int q = 0; q < P.size(); ++q)
        for (int p = 0; p < P.size(); ++p) M[q][p] = K(P.site[q], P.site[p], P.k[q] - P.k[p]);
    return M;
}

struct FieldSchema {
    std::vector<std::string> names;
    std::vector<bool> response; // response fields carry a factor i in the cumulant normalisation

    int size() const { return static_cast<int>(names.size()); }
    int index(const std::string& name) const
    {
        for (int i = 0; i < size(); ++i)
            if (names[i] == name) return i;
        throw config_error("unknown field " + name);
    }
    static FieldSchema broad() { return {{"zeta", "a"}, {true, false}}; }
    static FieldSchema narrow() { return {{"nu", "nubar", "e", "ebar"}, {true, true, false, false}}; }
    static FieldSchema merged()
    {
        return {{"zeta", "nu", "nubar", "a", "e", "ebar"}, {true, true, true, false, false, false}};
    }
    bool operator==(const FieldSchema& o) const { return names == o.names && response == o.response; }
};

enum class CumulantKind { bare, dressed, moment };

// log Phi = sum over blocks c of i^{#response}/prod(c!) * sum Q_c(points) prod(w * field).
struct CumulantSet {
    FieldSchema schema = FieldSchema::broad();
    PointSet points;
    CumulantKind kind = CumulantKind::bare;
    std::map<std::vector<int>, cvec> blocks;

    int P() const { return points.size(); }
    static size_t block_size(const std::vector<int>& counts, int P)
    {
        size_t s = 1;
        for (int c : counts)
            for (int i = 0; i < c; ++i) s *= static_cast<size_t>(P);
        return s;
    }
    cvec& block(const std::vector<int>& counts)
    {
        auto it = blocks.find(counts);
        if (it == blocks.end()) it = blocks.emplace(counts, cvec(block_size(counts, P()), 0.0)).first;
        return it->second;
    }
    const cvec* find(const std::vector<int>& counts) const
    {
        auto it = blocks.find(counts);
        return it == blocks.end() ? nullptr : &it->second;
    }
    cvec& block(int m, int n) { return block(std::vector<int>{m, n}); }
    const cvec* find(int m, int n) const { return find(std::vector<int>{m, n}); }

    size_t flat(const std::vector<int>& idx) const
    {
        size_t f = 0;
        for (int i : idx) f = f * P() + i;
        return f;
    }
};

inline int total_degree(const std::vector<int>& c) { return std::accumulate(c.begin(), c.end(), 0); }

inline double max_abs_diff(const CumulantSet& a, const CumulantSet& b)
{
    double m = 0.0;
    auto cmp = [&](const CumulantSet& x, const CumulantSet& y) {
        for (auto& [key, v] : x.blocks) {
            const cvec* w = y.find(key);
            for (size_t i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v[i] - (w ? (*w)[i] : cplx(0.0))));
        }
    };
    cmp(a, b);
    cmp(b, a);
    return m;
}

// Symmetrises a block separately within each field's index group.
inline void symmetrize_block(cvec& t, const std::vector<int>& counts, int P)
{
    const int D = total_degree(counts);
    if (D < 2) return;
    std::vector<int> offs;
    int o = 0;
    for (int c : counts) {
        offs.push_back(o);
        o += c;
    }
    std::vector<int> base(D);
    std::iota(base.begin(), base.end(), 0);
    std::vector<std::vector<int>> all{base};
    for (size_t f = 0; f < counts.size(); ++f) {
        std::vector<std::vector<int>> next;
        for (auto& p : all) {
            std::vector<int> seg(p.begin() + offs[f], p.begin() + offs[f] + counts[f]);
            std::sort(seg.begin(), seg.end());
            do {
                auto q = p;
                std::copy(seg.begin(), seg.end(), q.begin() + offs[f]);
                next.push_back(q);
            } while (std::next_permutation(seg.begin(), seg.end()));
        }
        all = std::move(next);
    }
    cvec out(t.size(), 0.0);
    std::vector<int> idx(D);
    for (size_t flat = 0; flat < t.size(); ++flat) {
        size_t r = flat;
        for (int d = D - 1; d >= 0; --d) {
            idx[d] = static_cast<int>(r % P);
            r /= P;
        }
        cplx acc = 0.0;
        for (auto& p : all) {
            size_t f2 = 0;
            for (int d = 0; d < D; ++d) f2 = f2 * P + idx[p[d]];
            acc += t[f2];
        }
        out[flat] = acc / static_cast<double>(all.size());
    }
    t = std::move(out);
}

} // namespace rqed
