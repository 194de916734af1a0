#pragma once
#include <functional>

#include "fock.hpp"

namespace rqed {

struct WickKernels {
    const KernelFamily* broad = nullptr;
    const KernelFamily* narrow = nullptr;
    double hbar = 1.0;
};

// Value of a single pairing. For mixed-branch broad pairs the minus-branch factor is the first
// kernel argument; for narrow pairs E is the first argument and only (E, E^dag) pairs survive.
inline cplx pair_value(const OrderedFactor& a, const OrderedFactor& b, const WickKernels& kern)
{
    const double hb = kern.hbar;
    const bool na = a.op == Op::E || a.op == Op::Edag, nb = b.op == Op::E || b.op == Op::Edag;
    if (a.op == Op::A && b.op == Op::A) {
        if (!kern.broad) throw config_error("broad field factors need a broad kernel family");
        const KernelFamily& f = *kern.broad;
        if (a.branch == Branch::plus && b.branch == Branch::plus) return -I * hb * f.feynman(a.site, b.site, a.k - b.k);
        if (a.branch == Branch::minus && b.branch == Branch::minus)
            return I * hb * std::conj(f.feynman(a.site, b.site, a.k - b.k));
        const OrderedFactor& m = a.branch == Branch::minus ? a : b;
        const OrderedFactor& p = a.branch == Branch::minus ? b : a;
        return -I * hb * f.plus(m.site, p.site, m.k - p.k);
    }
    if (na && nb) {
        if (!kern.narrow) throw config_error("narrow field factors need a narrow kernel family");
        if (a.op == b.op) return 0.0;
        const KernelFamily& f = *kern.narrow;
        const OrderedFactor& e = a.op == Op::E ? a : b;
        const OrderedFactor& d = a.op == Op::E ? b : a;
        if (e.branch == Branch::plus && d.branch == Branch::plus) return -I * hb * f.feynman(e.site, d.site, e.k - d.k);
        if (e.branch == Branch::minus && d.branch == Branch::minus)
            return I * hb * std::conj(f.feynman(d.site, e.site, d.k - e.k));
        if (e.branch == Branch::minus) return -I * hb * f.plus(e.site, d.site, e.k - d.k);
        return 0.0;
    }
    if ((a.op == Op::A && nb) || (na && b.op == Op::A)) return 0.0;
    throw config_error("Wick pairing is defined for free-field factors only");
}

// Calls visit(pairs) for every perfect matching of {0..n-1}.
inline void for_each_matching(int n, const std::function<void(const std::vector<std::pair<int, int>>&)>& visit)
{
    if (n % 2) return;
    std::vector<std::pair<int, int>> cur;
    std::vector<bool> used(n, false);
    std::function<void()> rec = [&]() {
        int first = -1;
        for (int i = 0; i < n; ++i)
            if (!used[i]) {
                first = i;
                break;
            }
        if (first < 0) {
            visit(cur);
            return;
        }
        used[first] = true;
        for (int j = first + 1; j < n; ++j) {
            if (used[j]) continue;
            used[j] = true;
            cur.emplace_back(first, j);
            rec();
            cur.pop_back();
            used[j] = false;
        }
        used[first] = false;
    };
    rec();
}

inline cplx wick_pairing_vev(const std::vector<OrderedFactor>& factors, const WickKernels& kern, int max_factors = 8)
{
    const int n = static_cast<int>(factors.size());
    if (n > max_factors) throw config_error("factor count exceeds budget");
    if (n % 2) return 0.0;
    cplx total = 0.0;
    for_each_matching(n, [&](const std::vector<std::pair<int, int>>& pairs) {
        cplx term = 1.0;
        for (auto [i, j] : pairs) {
            term *= pair_value(factors[i], factors[j], kern);
            if (term == cplx(0.0)) return;
        }
        total += term;
    });
    return total;
}

// Z_C(f+, f-) = -(i hbar/2) f+ D_F f+ + (i hbar/2) f- D_F* f- - i hbar f- D+ f+
inline cplx broad_reordering_form(const KernelFamily& f, const Signal& fp, const Signal& fm, double hbar = 1.0)
{
    return -0.5 * I * hbar * contract_kernel(fp, f.feynman, fp) + 0.5 * I * hbar * contract_kernel(fm, conj(f.feynman), fm) -
           I * hbar * contract_kernel(fm, f.plus, fp);
}

// Z_C(a+, b+, a-, b-): a couples to E and b to E^dag.
//   -i hbar a+ G_F b+ + i hbar b- G_F* a- - i hbar a- G+ b+
inline cplx narrow_reordering_form(const KernelFamily& f, const Signal& ap, const Signal& bp, const Signal& am,
                                   const Signal& bm, double hbar = 1.0)
{
    return -I * hbar * contract_kernel(ap, f.feynman, bp) + I * hbar * contract_kernel(bm, conj(f.feynman), am) -
           I * hbar * contract_kernel(am, f.plus, bp);
}

// Broad vacuum functional in causal variables: exp(i eta D_R j_e).
inline cplx vacuum_broad_causal(const KernelFamily& f, const Signal& eta, const Signal& j_e)
{
    return std::exp(I * contract_kernel(eta, f.retarded, j_e));
}
// Skeleton form exp Z_C(i eta+, -i eta-).
inline cplx vacuum_broad_skeleton(const KernelFamily& f, const Signal& eta_p, const Signal& eta_m, double hbar = 1.0)
{
    return std::exp(broad_reordering_form(f, I * eta_p, -I * eta_m, hbar));
}
// Narrow skeleton exp Z_C(i mubar+, i mu+, -i mubar-, -i mu-).
inline cplx vacuum_narrow_skeleton(const KernelFamily& f, const Signal& mubar_p, const Signal& mu_p, const Signal& mubar_m,
                                   const Signal& mu_m, double hbar = 1.0)
{
    return std::exp(narrow_reordering_form(f, I * mubar_p, I * mu_p, -I * mubar_m, -I * mu_m, hbar));
}
// Narrow causal form exp(i mubar G_R d - i mu G_R* dbar).
inline cplx vacuum_narrow_causal(const KernelFamily& f, const Signal& mu, const Signal& mubar, const Signal& d,
                                 const Signal& dbar)
{
    return std::exp(I * contract_kernel(mubar, f.retarded, d) - I * contract_kernel(mu, conj(f.retarded), dbar));
}

// Enumerates factor lists over the given slots and branch patterns and compares pairing sums with the oracle.
inline Report verify_wick(const FockSpace& fs, const TimeGrid& g, const WickKernels& kern,
                          const std::vector<std::vector<OrderedFactor>>& cases, double tol = 1e-11)
{
    double dev = 0.0;
    for (auto& c : cases) dev = std::max(dev, std::abs(wick_pairing_vev(c, kern) - tc_ordered_vev(fs, g, c)));
    Report r;
    r.add("pairing sum vs oracle (" + std::to_string(cases.size()) + " factor lists)", dev, tol);
    return r;
}

} // namespace rqed
