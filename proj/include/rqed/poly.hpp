#pragma once
#include <array>
#include <cstdint>
#include <functional>
#include <unordered_map>

#include "cumulants.hpp"

namespace rqed {

// Truncated polynomial in variables v = field * P + point. Monomials are sorted variable ids
// padded with 0xFF, so the degree is bounded by the key length.
class FunctionalPoly {
public:
    static constexpr int max_degree = 16;
    static constexpr std::uint8_t pad = 0xFF;
    using Key = std::array<std::uint8_t, max_degree>;

    struct KeyHash {
        size_t operator()(const Key& k) const noexcept
        {
            std::uint64_t h = 1469598103934665603ull;
            for (auto b : k) {
                h ^= b;
                h *= 1099511628211ull;
            }
            return static_cast<size_t>(h);
        }
    };
    using Map = std::unordered_map<Key, cplx, KeyHash>;

    FunctionalPoly() = default;
    FunctionalPoly(int fields, int P) : fields_(fields), P_(P)
    {
        if (fields * P > 255) throw config_error("polynomial variable budget exceeded (fields * points > 255)");
        if (fields > 8) throw config_error("at most 8 fields per polynomial");
    }

    int fields() const { return fields_; }
    int points() const { return P_; }
    const Map& terms() const { return terms_; }
    size_t size() const { return terms_.size(); }

    static Key empty_key()
    {
        Key k;
        k.fill(pad);
        return k;
    }
    static int degree(const Key& k)
    {
        int d = 0;
        while (d < max_degree && k[d] != pad) ++d;
        return d;
    }
    int var(int field, int point) const { return field * P_ + point; }
    int field_of(int v) const { return v / P_; }
    int point_of(int v) const { return v % P_; }

    // Builds a key from unsorted variable ids.
    static Key make_key(std::vector<int> vars)
    {
        if (static_cast<int>(vars.size()) > max_degree) throw config_error("monomial degree exceeds the key length");
        std::sort(vars.begin(), vars.end());
        Key k = empty_key();
        for (size_t i = 0; i < vars.size(); ++i) k[i] = static_cast<std::uint8_t>(vars[i]);
        return k;
    }

    std::array<int, 8> signature(const Key& k) const
    {
        std::array<int, 8> s{};
        for (int i = 0; i < max_degree && k[i] != pad; ++i) ++s[field_of(k[i])];
        return s;
    }
    bool within(const Key& k, const std::vector<int>& caps) const
    {
        if (caps.empty()) return true;
        auto s = signature(k);
        for (int f = 0; f < fields_; ++f)
            if (s[f] > caps[f]) return false;
        return true;
    }

    void add(const Key& k, cplx c)
    {
        if (c == cplx(0.0)) return;
        terms_[k] += c;
    }
    cplx coefficient(const Key& k) const
    {
        auto it = terms_.find(k);
        return it == terms_.end() ? cplx(0.0) : it->second;
    }
    cplx constant() const { return coefficient(empty_key()); }

    FunctionalPoly& operator+=(const FunctionalPoly& o)
    {
        for (auto& [k, c] : o.terms_) terms_[k] += c;
        return *this;
    }
    FunctionalPoly& operator*=(cplx s)
    {
        for (auto& kv : terms_) kv.second *= s;
        return *this;
    }
    friend FunctionalPoly operator+(FunctionalPoly a, const FunctionalPoly& b) { return a += b; }
    friend FunctionalPoly operator-(FunctionalPoly a, FunctionalPoly b) { return a += (b *= -1.0); }
    friend FunctionalPoly operator*(cplx s, FunctionalPoly a) { return a *= s; }

    FunctionalPoly truncated(const std::vector<int>& caps, int max_total = max_degree) const
    {
        FunctionalPoly out(fields_, P_);
        for (auto& [k, c] : terms_)
            if (degree(k) <= max_total && within(k, caps)) out.terms_.emplace(k, c);
        return out;
    }
    void prune(double tol = 0.0)
    {
        for (auto it = terms_.begin(); it != terms_.end();)
            it = std::abs(it->second) <= tol ? terms_.erase(it) : std::next(it);
    }

    // Product truncated to per-field degree caps (empty caps: no per-field cap).
    static FunctionalPoly multiply(const FunctionalPoly& a, const FunctionalPoly& b, const std::vector<int>& caps,
                                   int max_total = max_degree)
    {
        FunctionalPoly out(a.fields_, a.P_);
        struct Entry {
            Key k;
            int deg;
            std::array<int, 8> sig;
            cplx c;
        };
        auto flatten = [](const FunctionalPoly& p) {
            std::vector<Entry> v;
            v.reserve(p.terms_.size());
            for (auto& [k, c] : p.terms_) v.push_back({k, degree(k), p.signature(k), c});
            return v;
        };
        const auto ea = flatten(a), eb = flatten(b);
        for (auto& x : ea)
            for (auto& y : eb) {
                if (x.deg + y.deg > std::min(max_total, max_degree)) continue;
                bool ok = true;
                for (int f = 0; f < a.fields_ && ok && !caps.empty(); ++f) ok = x.sig[f] + y.sig[f] <= caps[f];
                if (!ok) continue;
                Key k = empty_key();
                std::merge(x.k.begin(), x.k.begin() + x.deg, y.k.begin(), y.k.begin() + y.deg, k.begin());
                out.terms_[k] += x.c * y.c;
            }
        return out;
    }

    // exp(S) truncated to the caps; S must have no constant term.
    static FunctionalPoly exp(const FunctionalPoly& S, const std::vector<int>& caps, int max_total = max_degree)
    {
        if (std::abs(S.constant()) > 0) throw config_error("exp of a polynomial with a constant term");
        FunctionalPoly one(S.fields_, S.P_);
        one.add(empty_key(), 1.0);
        int min_deg = max_degree;
        for (auto& [k, c] : S.terms_) min_deg = std::min(min_deg, degree(k));
        if (S.terms_.empty()) return one;
        const int top = std::min(max_total, max_degree) / min_deg;
        // Horner: 1 + S(1 + S/2(1 + ... (1 + S/top)))
        FunctionalPoly acc = one;
        for (int j = top; j >= 1; --j) acc = one + (1.0 / j) * multiply(S, acc, caps, max_total);
        return acc;
    }

    // d/d(var v) of the polynomial.
    FunctionalPoly derivative(int v) const
    {
        FunctionalPoly out(fields_, P_);
        for (auto& [k, c] : terms_) {
            const int d = degree(k);
            int mult = 0, pos = -1;
            for (int i = 0; i < d; ++i)
                if (k[i] == v) {
                    if (pos < 0) pos = i;
                    ++mult;
                }
            if (!mult) continue;
            Key r = empty_key();
            std::copy(k.begin(), k.begin() + pos, r.begin());
            std::copy(k.begin() + pos + 1, k.begin() + d, r.begin() + pos);
            out.terms_[r] += c * static_cast<double>(mult);
        }
        return out;
    }

    // sum_v c_v d/d(var v), c indexed by variable id.
    FunctionalPoly first_order(const std::vector<cplx>& c) const
    {
        FunctionalPoly out(fields_, P_);
        for (auto& [k, a] : terms_) {
            const int d = degree(k);
            for (int i = 0; i < d; ++i) {
                if (i > 0 && k[i] == k[i - 1]) continue;
                const cplx cv = k[i] < c.size() ? c[k[i]] : cplx(0.0);
                if (cv == cplx(0.0)) continue;
                int mult = 1;
                while (i + mult < d && k[i + mult] == k[i]) ++mult;
                Key r = empty_key();
                std::copy(k.begin(), k.begin() + i, r.begin());
                std::copy(k.begin() + i + 1, k.begin() + d, r.begin() + i);
                out.terms_[r] += a * cv * static_cast<double>(mult);
            }
        }
        return out;
    }

    // sum_{q,p} coef K[q][p] d/d(fa, q) d/d(fb, p) with fa != fb.
    FunctionalPoly second_order(cplx coef, int fa, int fb, const std::vector<cvec>& K) const
    {
        if (fa == fb) throw config_error("second-order operator needs two distinct fields");
        FunctionalPoly out(fields_, P_);
        for (auto& [k, a] : terms_) {
            const int d = degree(k);
            for (int i = 0; i < d; ++i) {
                if (field_of(k[i]) != fa || (i > 0 && k[i] == k[i - 1])) continue;
                int mi = 1;
                while (i + mi < d && k[i + mi] == k[i]) ++mi;
                for (int j = 0; j < d; ++j) {
                    if (field_of(k[j]) != fb || (j > 0 && k[j] == k[j - 1])) continue;
                    int mj = 1;
                    while (j + mj < d && k[j + mj] == k[j]) ++mj;
                    const cplx kv = K[point_of(k[i])][point_of(k[j])];
                    if (kv == cplx(0.0)) continue;
                    Key r = empty_key();
                    int o = 0;
                    for (int s = 0; s < d; ++s)
                        if (s != i && s != j) r[o++] = k[s];
                    out.terms_[r] += coef * kv * a * static_cast<double>(mi * mj);
                }
            }
        }
        return out;
    }

    // Value at a point: x indexed by variable id.
    cplx evaluate(const std::vector<cplx>& x) const
    {
        cplx s = 0.0;
        for (auto& [k, c] : terms_) {
            cplx t = c;
            for (int i = 0; i < max_degree && k[i] != pad; ++i) t *= x[k[i]];
            s += t;
        }
        return s;
    }

    double max_abs_diff(const FunctionalPoly& o) const
    {
        double m = 0.0;
        for (auto& [k, c] : terms_) m = std::max(m, std::abs(c - o.coefficient(k)));
        for (auto& [k, c] : o.terms_)
            if (!terms_.count(k)) m = std::max(m, std::abs(c));
        return m;
    }

private:
    int fields_ = 0, P_ = 0;
    Map terms_;
};

// log Phi as a polynomial: sum_c i^{#resp}/prod(c!) sum Q_c(points) prod(w field).
inline FunctionalPoly cumulants_to_poly(const CumulantSet& Q)
{
    const int P = Q.P(), F = Q.schema.size();
    FunctionalPoly S(F, P);
    for (auto& [counts, t] : Q.blocks) {
        if (static_cast<int>(counts.size()) != F) throw shape_error("block arity does not match the schema");
        const int D = total_degree(counts);
        if (D == 0) continue;
        cplx pref = 1.0;
        for (int f = 0; f < F; ++f) {
            if (Q.schema.response[f]) pref *= std::pow(I, counts[f]);
            for (int i = 2; i <= counts[f]; ++i) pref /= static_cast<double>(i);
        }
        std::vector<int> field_of_slot;
        for (int f = 0; f < F; ++f)
            for (int i = 0; i < counts[f]; ++i) field_of_slot.push_back(f);
        std::vector<int> idx(D), vars(D);
        for (size_t flat = 0; flat < t.size(); ++flat) {
            if (t[flat] == cplx(0.0)) continue;
            size_t r = flat;
            double w = 1.0;
            for (int d = D - 1; d >= 0; --d) {
                idx[d] = static_cast<int>(r % P);
                r /= P;
            }
            for (int d = 0; d < D; ++d) {
                vars[d] = S.var(field_of_slot[d], idx[d]);
                w *= Q.points.weight(idx[d]);
            }
            S.add(FunctionalPoly::make_key(vars), pref * w * t[flat]);
        }
    }
    return S;
}

// Inverse of cumulants_to_poly for the blocks within the caps (symmetric tensors).
inline CumulantSet poly_to_cumulants(const FunctionalPoly& S, const FieldSchema& schema, const PointSet& points,
                                     const std::vector<int>& caps, CumulantKind kind)
{
    CumulantSet out{schema, points, kind, {}};
    const int P = points.size(), F = schema.size();
    std::vector<int> counts(F, 0);
    std::function<void(int)> rec = [&](int f) {
        if (f == F) {
            const int D = total_degree(counts);
            if (D == 0) return;
            std::vector<int> field_of_slot;
            cplx pref = 1.0;
            for (int g = 0; g < F; ++g) {
                if (schema.response[g]) pref *= std::pow(I, counts[g]);
                for (int i = 0; i < counts[g]; ++i) field_of_slot.push_back(g);
            }
            cvec t(CumulantSet::block_size(counts, P), 0.0);
            bool any = false;
            std::vector<int> vars(D);
            for (size_t flat = 0; flat < t.size(); ++flat) {
                size_t r = flat;
                double w = 1.0;
                for (int d = D - 1; d >= 0; --d) {
                    const int p = static_cast<int>(r % P);
                    r /= P;
                    vars[d] = S.var(field_of_slot[d], p);
                    w *= points.weight(p);
                }
                const auto key = FunctionalPoly::make_key(vars);
                const cplx c = S.coefficient(key);
                if (c == cplx(0.0)) continue;
                double mult = 1.0;
                for (int i = 0, run = 1; i < D; ++i) {
                    run = (i > 0 && key[i] == key[i - 1]) ? run + 1 : 1;
                    mult *= run;
                }
                t[flat] = c * mult / (pref * w);
                any = true;
            }
            if (any) out.blocks[counts] = std::move(t);
            return;
        }
        for (int c = 0; c <= caps[f]; ++c) {
            counts[f] = c;
            rec(f + 1);
        }
        counts[f] = 0;
    };
    rec(0);
    return out;
}

} // namespace rqed
