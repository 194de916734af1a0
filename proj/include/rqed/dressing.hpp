#pragma once
#include <functional>
#include <optional>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "kernels.hpp"
#include "poly.hpp"
#include "report.hpp"

namespace rqed {

using Mat = Eigen::MatrixXcd;

// One second-order term coef * sum_{q,p} d/d(source, q) K[q][p] d/d(response, p).
struct DressingTerm {
    cplx coef;
    int source_field;
    int response_field;
    std::vector<cvec> K;
};

struct DressingOperator {
    std::vector<DressingTerm> terms;

    FunctionalPoly apply(const FunctionalPoly& F) const
    {
        FunctionalPoly out(F.fields(), F.points());
        for (auto& t : terms) out += F.second_order(t.coef, t.source_field, t.response_field, t.K);
        return out;
    }

    // -i d/da D_R d/dzeta
    static DressingOperator broad(const FieldSchema& s, const std::vector<cvec>& D_R)
    {
        return {{{-I, s.index("a"), s.index("zeta"), D_R}}};
    }
    // -i d/de G_R d/dnubar + i d/debar G_R* d/dnu
    static DressingOperator narrow(const FieldSchema& s, const std::vector<cvec>& G_R)
    {
        std::vector<cvec> Gc = G_R;
        for (auto& row : Gc)
            for (auto& v : row) v = std::conj(v);
        return {{{-I, s.index("e"), s.index("nubar"), G_R}, {I, s.index("ebar"), s.index("nu"), Gc}}};
    }
    static DressingOperator merged(const FieldSchema& s, const std::vector<cvec>& D_R, const std::vector<cvec>& G_R)
    {
        auto b = broad(s, D_R), n = narrow(s, G_R);
        b.terms.insert(b.terms.end(), n.terms.begin(), n.terms.end());
        return b;
    }
};

struct DressingResult {
    CumulantSet total;
    std::vector<CumulantSet> orders; // orders[j]: the part of order j in the kernels
};

// Truncated functional-expansion dressing: exp(S), then sum_j L^j/j! tracked by order, then log.
// With moments = true the log is skipped and the blocks are moment tensors in the same normalisation.
inline DressingResult dress_functional_oracle(const CumulantSet& bare, const DressingOperator& op, int order,
                                              const std::vector<int>& out_caps, bool moments = false)
{
    const int F = bare.schema.size();
    if (static_cast<int>(out_caps.size()) != F) throw config_error("output caps must list one cap per field");
    if (order < 0) throw config_error("dressing order must be non-negative");
    std::vector<int> inner = out_caps;
    for (auto& c : inner) c += order;
    const int out_total = total_degree(out_caps);
    const int inner_total = std::min(total_degree(inner), out_total + 2 * order);
    if (inner_total > FunctionalPoly::max_degree) throw config_error("functional degree budget exceeded");

    const FunctionalPoly S = cumulants_to_poly(bare);
    std::vector<FunctionalPoly> phi;
    phi.push_back(FunctionalPoly::exp(S, inner, inner_total));
    for (int j = 1; j <= order; ++j) {
        std::vector<int> caps = out_caps;
        for (auto& c : caps) c += order - j;
        phi.push_back(((1.0 / j) * op.apply(phi.back())).truncated(caps, out_total + 2 * (order - j)));
    }

    std::vector<FunctionalPoly> parts(order + 1);
    if (moments) {
        for (int j = 0; j <= order; ++j) parts[j] = phi[j].truncated(out_caps);
    } else {
        parts[0] = S.truncated(out_caps);
        if (order > 0) {
            FunctionalPoly minus_S = -1.0 * S;
            const FunctionalPoly E = FunctionalPoly::exp(minus_S, out_caps, out_total);
            std::vector<FunctionalPoly> R(order + 1, FunctionalPoly(F, bare.P()));
            for (int j = 1; j <= order; ++j) R[j] = FunctionalPoly::multiply(E, phi[j], out_caps, out_total);
            // log(1 + R) graded by order
            std::vector<FunctionalPoly> cur = R, acc(order + 1, FunctionalPoly(F, bare.P()));
            for (int r = 1; r <= order; ++r) {
                const double c = (r % 2 ? 1.0 : -1.0) / r;
                for (int j = r; j <= order; ++j) acc[j] += c * cur[j];
                if (r == order) break;
                std::vector<FunctionalPoly> next(order + 1, FunctionalPoly(F, bare.P()));
                for (int a = r; a <= order; ++a)
                    for (int b = 1; a + b <= order; ++b)
                        next[a + b] += FunctionalPoly::multiply(cur[a], R[b], out_caps, out_total);
                cur = std::move(next);
            }
            for (int j = 1; j <= order; ++j) parts[j] = std::move(acc[j]);
        }
    }

    const CumulantKind kind = moments ? CumulantKind::moment : CumulantKind::dressed;
    DressingResult res;
    FunctionalPoly sum(F, bare.P());
    for (int j = 0; j <= order; ++j) {
        res.orders.push_back(poly_to_cumulants(parts[j], bare.schema, bare.points, out_caps, kind));
        sum += parts[j];
    }
    res.total = poly_to_cumulants(sum, bare.schema, bare.points, out_caps, kind);
    return res;
}

// ---------------------------------------------------------------------------------------------
// Diagrams over (m, n) vertices: m response slots, n source slots. An edge runs from a source slot
// of u to a response slot of v and carries K[q][p], q on u and p on v.

struct VertexType {
    int m = 0, n = 0;
    auto operator<=>(const VertexType&) const = default;
};

struct Diagram {
    std::vector<VertexType> vertices;
    std::vector<std::vector<int>> edges; // edges[u][v]
    int ext_m = 0, ext_n = 0;
    long automorphisms = 1;              // full |Aut|, legs and multi-edges included
    double factor = 1.0;                 // ext_m! ext_n! / |Aut|

    int order() const
    {
        int e = 0;
        for (auto& r : edges)
            for (int c : r) e += c;
        return e;
    }
    int in_degree(int v) const
    {
        int s = 0;
        for (size_t u = 0; u < edges.size(); ++u) s += edges[u][v];
        return s;
    }
    int out_degree(int u) const
    {
        int s = 0;
        for (int c : edges[u]) s += c;
        return s;
    }
    bool connected() const
    {
        const int V = static_cast<int>(vertices.size());
        std::vector<int> parent(V);
        std::iota(parent.begin(), parent.end(), 0);
        std::function<int(int)> root = [&](int x) { return parent[x] == x ? x : parent[x] = root(parent[x]); };
        for (int u = 0; u < V; ++u)
            for (int v = 0; v < V; ++v)
                if (edges[u][v]) parent[root(u)] = root(v);
        for (int v = 0; v < V; ++v)
            if (root(v) != root(0)) return false;
        return true;
    }
    std::string describe() const
    {
        std::ostringstream os;
        os << "external (" << ext_m << "," << ext_n << ") order " << order() << " factor " << factor << " |Aut| "
           << automorphisms << "\n";
        for (size_t v = 0; v < vertices.size(); ++v)
            os << "  v" << v << " Q(" << vertices[v].m << "," << vertices[v].n << ")\n";
        for (size_t u = 0; u < edges.size(); ++u)
            for (size_t v = 0; v < edges.size(); ++v)
                if (edges[u][v]) os << "  v" << u << " -> v" << v << " x" << edges[u][v] << "\n";
        return os.str();
    }
};

inline double factorial(int n)
{
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

inline std::vector<Diagram> enumerate_diagrams(std::vector<VertexType> types, int ext_m, int ext_n, int order,
                                               bool connected_only = true)
{
    if (order < 0 || order > 3) throw config_error("diagram order must lie in 0..3");
    std::sort(types.begin(), types.end());
    types.erase(std::unique(types.begin(), types.end()), types.end());
    std::vector<Diagram> out;
    const int max_v = connected_only ? order + 1 : (2 * order + ext_m + ext_n) / 2;
    for (int V = 1; V <= max_v; ++V) {
        // vertex multisets as non-decreasing type indices
        std::vector<int> pick(V, 0);
        std::function<void(int, int)> choose = [&](int pos, int from) {
            if (pos < V) {
                for (int t = from; t < static_cast<int>(types.size()); ++t) {
                    pick[pos] = t;
                    choose(pos + 1, t);
                }
                return;
            }
            std::vector<VertexType> vs;
            int sm = 0, sn = 0;
            for (int t : pick) {
                vs.push_back(types[t]);
                sm += types[t].m;
                sn += types[t].n;
            }
            if (sm != order + ext_m || sn != order + ext_n) return;
            // type-preserving permutations
            std::vector<std::vector<int>> perms;
            std::vector<int> pi(V);
            std::iota(pi.begin(), pi.end(), 0);
            do {
                bool ok = true;
                for (int i = 0; i < V && ok; ++i) ok = vs[pi[i]] == vs[i];
                if (ok) perms.push_back(pi);
            } while (std::next_permutation(pi.begin(), pi.end()));

            std::vector<std::vector<int>> E(V, std::vector<int>(V, 0));
            std::vector<int> row_left(V), col_left(V);
            for (int v = 0; v < V; ++v) {
                row_left[v] = vs[v].n;
                col_left[v] = vs[v].m;
            }
            std::function<void(int, int)> fill = [&](int cell, int left) {
                if (cell == V * V) {
                    if (left) return;
                    Diagram d{vs, E, ext_m, ext_n, 1, 1.0};
                    if (connected_only && !d.connected()) return;
                    auto flatten = [&](const std::vector<int>& p) {
                        std::vector<int> f(V * V);
                        for (int u = 0; u < V; ++u)
                            for (int v = 0; v < V; ++v) f[p[u] * V + p[v]] = E[u][v];
                        return f;
                    };
                    const auto self = flatten(perms[0]);
                    long aut = 0;
                    for (auto& p : perms) {
                        const auto f = flatten(p);
                        if (f < self) return; // not the canonical representative
                        if (f == self) ++aut;
                    }
                    double legs = 1.0;
                    for (int v = 0; v < V; ++v)
                        legs *= factorial(vs[v].m - d.in_degree(v)) * factorial(vs[v].n - d.out_degree(v));
                    for (int u = 0; u < V; ++u)
                        for (int v = 0; v < V; ++v) legs *= factorial(E[u][v]);
                    d.automorphisms = aut * static_cast<long>(legs);
                    d.factor = factorial(ext_m) * factorial(ext_n) / static_cast<double>(d.automorphisms);
                    out.push_back(std::move(d));
                    return;
                }
                const int u = cell / V, v = cell % V;
                const int top = std::min({left, row_left[u], col_left[v]});
                for (int c = 0; c <= top; ++c) {
                    E[u][v] = c;
                    row_left[u] -= c;
                    col_left[v] -= c;
                    fill(cell + 1, left - c);
                    row_left[u] += c;
                    col_left[v] += c;
                }
                E[u][v] = 0;
            };
            fill(0, order);
        };
        choose(0, 0);
    }
    return out;
}

// factor * Sym[T_D], the diagram's contribution to the (ext_m, ext_n) block.
inline cvec evaluate_diagram(const Diagram& d, const CumulantSet& bare, const std::vector<cvec>& K)
{
    const int P = bare.P(), V = static_cast<int>(d.vertices.size());
    std::vector<const cvec*> Q(V);
    for (int v = 0; v < V; ++v) {
        Q[v] = bare.find(d.vertices[v].m, d.vertices[v].n);
        if (!Q[v]) throw config_error("bare cumulants lack vertex type (" + std::to_string(d.vertices[v].m) + "," +
                                      std::to_string(d.vertices[v].n) + ")");
    }
    // slot -> variable: variables 0..2e-1 are internal (edge i: 2i on the source side, 2i+1 on the
    // response side), then ext_m response legs, then ext_n source legs.
    std::vector<std::vector<int>> zeta_var(V), a_var(V);
    int e = 0;
    for (int u = 0; u < V; ++u)
        for (int v = 0; v < V; ++v)
            for (int c = 0; c < d.edges[u][v]; ++c, ++e) {
                a_var[u].push_back(2 * e);
                zeta_var[v].push_back(2 * e + 1);
            }
    int next = 2 * e;
    for (int v = 0; v < V; ++v)
        while (static_cast<int>(zeta_var[v].size()) < d.vertices[v].m) zeta_var[v].push_back(next++);
    for (int v = 0; v < V; ++v)
        while (static_cast<int>(a_var[v].size()) < d.vertices[v].n) a_var[v].push_back(next++);
    const int nvar = next, ext = d.ext_m + d.ext_n;

    const size_t out_size = CumulantSet::block_size({d.ext_m, d.ext_n}, P);
    cvec T(out_size, 0.0);
    std::vector<int> x(nvar, 0);
    size_t internal_count = 1;
    for (int i = 0; i < 2 * e; ++i) internal_count *= P;
    for (size_t ic = 0; ic < internal_count; ++ic) {
        size_t r = ic;
        cplx wk = 1.0;
        for (int i = 2 * e - 1; i >= 0; --i) {
            x[i] = static_cast<int>(r % P);
            r /= P;
        }
        for (int i = 0; i < e && wk != cplx(0.0); ++i)
            wk *= K[x[2 * i]][x[2 * i + 1]] * bare.points.weight(x[2 * i]) * bare.points.weight(x[2 * i + 1]);
        if (wk == cplx(0.0)) continue;
        for (size_t oc = 0; oc < out_size; ++oc) {
            size_t s = oc;
            for (int i = ext - 1; i >= 0; --i) {
                x[2 * e + i] = static_cast<int>(s % P);
                s /= P;
            }
            cplx val = wk;
            for (int v = 0; v < V && val != cplx(0.0); ++v) {
                size_t f = 0;
                for (int z : zeta_var[v]) f = f * P + x[z];
                for (int a : a_var[v]) f = f * P + x[a];
                val *= (*Q[v])[f];
            }
            T[oc] += val;
        }
    }
    symmetrize_block(T, {d.ext_m, d.ext_n}, P);
    for (auto& v : T) v *= d.factor;
    return T;
}

// Sum over diagrams of the given external type and order.
inline cvec diagram_sum(const CumulantSet& bare, const std::vector<cvec>& K, const std::vector<VertexType>& types,
                        int ext_m, int ext_n, int order, bool connected_only = true)
{
    cvec acc(CumulantSet::block_size({ext_m, ext_n}, bare.P()), 0.0);
    for (auto& d : enumerate_diagrams(types, ext_m, ext_n, order, connected_only)) {
        const cvec t = evaluate_diagram(d, bare, K);
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += t[i];
    }
    return acc;
}

// Largest |K[q][p]| with t_q < t_p: a retarded edge must vanish there.
inline double edge_causality_defect(const std::vector<cvec>& K, const PointSet& P)
{
    double m = 0.0;
    for (int q = 0; q < P.size(); ++q)
        for (int p = 0; p < P.size(); ++p)
            if (P.k[q] < P.k[p]) m = std::max(m, std::abs(K[q][p]));
    return m;
}

// ---------------------------------------------------------------------------------------------
// Chains of (1,1) vertices.

inline Mat block_matrix(const cvec& block, int P)
{
    Mat M(P, P);
    for (int i = 0; i < P; ++i)
        for (int j = 0; j < P; ++j) M(i, j) = block[static_cast<size_t>(i) * P + j];
    return M;
}
inline Mat to_matrix(const std::vector<cvec>& K)
{
    const int n = static_cast<int>(K.size());
    Mat M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = K[i][j];
    return M;
}
inline Eigen::VectorXd weight_vector(const PointSet& P)
{
    Eigen::VectorXd w(P.size());
    for (int p = 0; p < P.size(); ++p) w(p) = P.weight(p);
    return w;
}

// Q + Q W K W Q + ... up to the given number of propagators.
inline Mat chain_partial(const Mat& Q, const Mat& K, const PointSet& P, int order)
{
    const Eigen::VectorXd w = weight_vector(P);
    const Mat step = w.asDiagonal() * K * w.asDiagonal() * Q;
    Mat term = Q, acc = Q;
    for (int j = 1; j <= order; ++j) {
        term = term * step;
        acc += term;
    }
    return acc;
}
// Summed chain Q (1 - W K W Q)^{-1}.
inline Mat chain_resummed(const Mat& Q, const Mat& K, const PointSet& P)
{
    const Eigen::VectorXd w = weight_vector(P);
    const Mat A = Mat::Identity(P.size(), P.size()) - w.asDiagonal() * K * w.asDiagonal() * Q;
    return A.transpose().partialPivLu().solve(Q.transpose()).transpose();
}

// ---------------------------------------------------------------------------------------------
// Solution in terms of dressed cumulants.

// Phi_dev at sampled field values: exp(sum_c i^{#resp}/prod(c!) sum Q prod(w f)).
inline cplx dev_functional(const CumulantSet& dressed, const std::vector<cvec>& fields)
{
    const FunctionalPoly S = cumulants_to_poly(dressed);
    std::vector<cplx> x(static_cast<size_t>(S.fields()) * S.points(), 0.0);
    for (int f = 0; f < S.fields(); ++f)
        for (int p = 0; p < S.points(); ++p) x[S.var(f, p)] = fields[f][p];
    return std::exp(S.evaluate(x));
}

// Causal arguments; absent entries are zero.
struct SolutionArgs {
    std::optional<Signal> eta, zeta, j_e, a_e, J_e, A_e;
    std::optional<Signal> mu, mubar, nu, nubar, d_e, dbar_e, e_e, ebar_e, D_e, Dbar_e, E_e, Ebar_e;
};

// Phi = exp(i eta D_R (j+J) + i mubar G_R (d+D) - i mu G_R* (dbar+Dbar))
//     * Phi_dev(zeta + eta D_R, nu + mu G_R*, nubar + mubar G_R | A_tot, E_tot, Ebar_tot)
inline cplx solution_functional(const CumulantSet& dressed, const KernelFamily* broad, const KernelFamily* narrow,
                                const SolutionArgs& s)
{
    const PointSet& P = dressed.points;
    const Signal zero(P.grid, P.sites);
    auto get = [&](const std::optional<Signal>& x) -> const Signal& { return x ? *x : zero; };
    cplx exponent = 0.0;
    std::map<std::string, Signal> shifted;
    if (broad) {
        const Signal src = get(s.j_e) + get(s.J_e);
        exponent += I * contract_kernel(get(s.eta), broad->retarded, src);
        shifted["zeta"] = get(s.zeta) + apply_kernel_right(get(s.eta), broad->retarded);
        shifted["a"] = get(s.a_e) + get(s.A_e) + apply_kernel_left(broad->retarded, src);
    }
    if (narrow) {
        const StationaryKernel Gc = conj(narrow->retarded);
        const Signal d = get(s.d_e) + get(s.D_e), db = get(s.dbar_e) + get(s.Dbar_e);
        exponent += I * contract_kernel(get(s.mubar), narrow->retarded, d) - I * contract_kernel(get(s.mu), Gc, db);
        shifted["nu"] = get(s.nu) + apply_kernel_right(get(s.mu), Gc);
        shifted["nubar"] = get(s.nubar) + apply_kernel_right(get(s.mubar), narrow->retarded);
        shifted["e"] = get(s.e_e) + get(s.E_e) + apply_kernel_left(narrow->retarded, d);
        shifted["ebar"] = get(s.ebar_e) + get(s.Ebar_e) + apply_kernel_left(Gc, db);
    }
    std::vector<cvec> fields;
    for (auto& name : dressed.schema.names) {
        auto it = shifted.find(name);
        if (it == shifted.end()) throw config_error("no kernel family supplied for field " + name);
        fields.push_back(P.sample(it->second));
    }
    return std::exp(exponent) * dev_functional(dressed, fields);
}

struct MeanFieldSolution {
    Signal field;   // <A>
    Signal current; // <J>
    Signal a_total; // a_e + A_e + D_R (j_e + J_e)
};

// <J>(p) = sum_n 1/n! sum Q^(1,n)(p|q..) prod w a_tot(q); <A> = D_R (j_e + J_e) + D_R <J>.
inline MeanFieldSolution solution_from_dressed(const CumulantSet& dressed, const KernelFamily& broad,
                                               const Signal& j_e, const Signal& J_e, const Signal& a_e,
                                               const Signal& A_e, int max_n = 3)
{
    if (!(dressed.schema == FieldSchema::broad())) throw config_error("mean field needs broad cumulants");
    const PointSet& P = dressed.points;
    const Signal src = j_e + J_e;
    MeanFieldSolution out{Signal(P.grid, P.sites), Signal(P.grid, P.sites),
                          a_e + A_e + apply_kernel_left(broad.retarded, src)};
    const cvec a = P.sample(out.a_total);
    cvec wa(P.size());
    for (int p = 0; p < P.size(); ++p) wa[p] = P.weight(p) * a[p];
    cvec J(P.size(), 0.0);
    for (int n = 0; n <= max_n; ++n) {
        const cvec* Q = dressed.find(1, n);
        if (!Q) continue;
        const double inv = 1.0 / factorial(n);
        const size_t inner = CumulantSet::block_size({0, n}, P.size());
        for (int p = 0; p < P.size(); ++p)
            for (size_t f = 0; f < inner; ++f) {
                cplx prod = 1.0;
                size_t r = f;
                for (int i = 0; i < n; ++i) {
                    prod *= wa[r % P.size()];
                    r /= P.size();
                }
                J[p] += inv * (*Q)[p * inner + f] * prod;
            }
    }
    out.current = P.embed(J);
    out.field = apply_kernel_left(broad.retarded, src + out.current);
    return out;
}

// ---------------------------------------------------------------------------------------------
// exp(f d/dg) exp(igh) F = exp(igh) exp(f(d/dg + ih)) F on a random degree-D polynomial F(g).

inline Report shift_identity_check(const Signal& f, const Signal& g, const Signal& h, int D, std::uint64_t seed = 1,
                                   int extra = 10, double tol = 1e-12)
{
    require_same(f.grid, h.grid, f.sites, h.sites);
    require_same(f.grid, g.grid, f.sites, g.sites);
    const PointSet P = PointSet::full(f.grid, f.sites);
    const int n = P.size(), top = D + extra;
    if (top > FunctionalPoly::max_degree) throw config_error("shift check degree budget exceeded");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    FunctionalPoly F(1, n);
    for (int d = 0; d <= D; ++d)
        for (int t = 0; t < 2 * n; ++t) {
            std::vector<int> vars;
            for (int i = 0; i < d; ++i) vars.push_back(static_cast<int>(rng() % n));
            F.add(FunctionalPoly::make_key(vars), cplx(nd(rng), nd(rng)));
        }
    const cvec fs = P.sample(f), hs = P.sample(h);
    FunctionalPoly S(1, n);
    std::vector<cplx> fc(n);
    cplx fh = 0.0;
    for (int p = 0; p < n; ++p) {
        S.add(FunctionalPoly::make_key({p}), I * P.weight(p) * hs[p]);
        fc[p] = fs[p]; // f d/dg = sum_p f_p d/dg_p in the w dt measure
        fh += P.weight(p) * fs[p] * hs[p];
    }
    auto shift = [&](const FunctionalPoly& G) {
        FunctionalPoly acc = G, term = G;
        for (int j = 1; j <= top && term.size(); ++j) {
            term = (1.0 / j) * term.first_order(fc);
            acc += term;
        }
        return acc;
    };
    const std::vector<int> caps{top};
    const FunctionalPoly E = FunctionalPoly::exp(S, caps, top);
    const FunctionalPoly lhs = shift(FunctionalPoly::multiply(E, F, caps, top)).truncated({D});
    const FunctionalPoly rhs = (std::exp(I * fh) * FunctionalPoly::multiply(E, shift(F), caps, top)).truncated({D});
    Report r;
    r.add("shift identity on degree-" + std::to_string(D) + " polynomials", lhs.max_abs_diff(rhs), tol);
    std::vector<cplx> x = P.sample(g);
    r.add("shift identity evaluated at g", std::abs(lhs.evaluate(x) - rhs.evaluate(x)), tol * 10);
    return r;
}

} // namespace rqed
