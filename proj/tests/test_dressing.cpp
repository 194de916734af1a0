#include <gtest/gtest.h>

#include <random>

#include "rqed/dressing.hpp"
#include "rqed/fock.hpp"
#include "rqed/normal_modes.hpp"
#include "rqed/wick.hpp"

using namespace rqed;

namespace {

PointSet small_points(int P, double dt = 0.4)
{
    TimeGrid g{0.0, dt, 16};
    return PointSet::window(g, SiteSet::uniform(1), 2, P);
}

cvec random_block(const std::vector<int>& counts, int P, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> nd;
    cvec t(CumulantSet::block_size(counts, P));
    for (auto& v : t) v = scale * cplx(nd(rng), nd(rng));
    symmetrize_block(t, counts, P);
    return t;
}

CumulantSet synthetic_bare(const PointSet& pts, std::uint64_t seed, double s11 = 1.0, double s13 = 0.7, double s22 = 0.5)
{
    std::mt19937_64 rng(seed);
    CumulantSet Q{FieldSchema::broad(), pts, CumulantKind::bare, {}};
    Q.block(1, 1) = random_block({1, 1}, pts.size(), rng, s11);
    Q.block(1, 3) = random_block({1, 3}, pts.size(), rng, s13);
    Q.block(2, 2) = random_block({2, 2}, pts.size(), rng, s22);
    return Q;
}

std::vector<cvec> random_matrix(int P, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<cvec> K(P, cvec(P));
    for (auto& r : K)
        for (auto& v : r) v = cplx(nd(rng), nd(rng));
    return K;
}

std::vector<cvec> retarded_matrix(const PointSet& pts)
{
    ModeSet m;
    m.band = Band::broad;
    m.omega = {0.9, 1.4};
    m.u = {{1.0}, {0.6}};
    return kernel_matrix(build_kernel_family(m, pts.grid, pts.sites).retarded, pts);
}

double block_diff(const cvec& a, const cvec* b)
{
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - (b ? (*b)[i] : cplx(0.0))));
    return m;
}

const std::vector<VertexType> kVertices{{1, 1}, {1, 3}, {2, 2}};

} // namespace

TEST(Poly, DerivativeAndProduct)
{
    FunctionalPoly x(1, 3);
    x.add(FunctionalPoly::make_key({0, 0, 1}), 2.0);
    auto d = x.derivative(0);
    EXPECT_NEAR(std::abs(d.coefficient(FunctionalPoly::make_key({0, 1})) - 4.0), 0.0, 1e-15);
    auto sq = FunctionalPoly::multiply(x, x, {});
    EXPECT_NEAR(std::abs(sq.coefficient(FunctionalPoly::make_key({0, 0, 0, 0, 1, 1})) - 4.0), 0.0, 1e-15);
}

TEST(Poly, ExpOfLinearMatchesTaylor)
{
    FunctionalPoly S(1, 2);
    S.add(FunctionalPoly::make_key({0}), 0.3);
    auto E = FunctionalPoly::exp(S, {6}, 6);
    for (int d = 0; d <= 6; ++d) {
        std::vector<int> v(d, 0);
        EXPECT_NEAR(std::abs(E.coefficient(FunctionalPoly::make_key(v)) - std::pow(0.3, d) / factorial(d)), 0.0, 1e-15);
    }
}

TEST(Poly, CumulantRoundTrip)
{
    auto pts = small_points(4);
    auto Q = synthetic_bare(pts, 3);
    auto back = poly_to_cumulants(cumulants_to_poly(Q), Q.schema, pts, {2, 3}, CumulantKind::bare);
    EXPECT_LT(max_abs_diff(Q, back), 1e-13);
}

TEST(Poly, SecondOrderAgainstDerivatives)
{
    auto pts = small_points(3);
    auto Q = synthetic_bare(pts, 5);
    auto S = cumulants_to_poly(Q);
    auto K = random_matrix(3, 9);
    auto L = S.second_order(-I, 1, 0, K);
    FunctionalPoly ref(2, 3);
    for (int q = 0; q < 3; ++q)
        for (int p = 0; p < 3; ++p) ref += (-I * K[q][p]) * S.derivative(S.var(1, q)).derivative(S.var(0, p));
    EXPECT_LT(L.max_abs_diff(ref), 1e-13);
}

TEST(Oracle, ZerothOrderIsBare)
{
    auto pts = small_points(4);
    auto Q = synthetic_bare(pts, 11);
    auto r = dress_functional_oracle(Q, DressingOperator::broad(Q.schema, random_matrix(4, 2)), 0, {2, 3});
    EXPECT_LT(max_abs_diff(r.total, Q), 1e-13);
}

TEST(Oracle, ChainOnlyQ11)
{
    auto pts = small_points(5);
    std::mt19937_64 rng(4);
    CumulantSet Q{FieldSchema::broad(), pts, CumulantKind::bare, {}};
    Q.block(1, 1) = random_block({1, 1}, 5, rng);
    auto K = random_matrix(5, 7);
    auto r = dress_functional_oracle(Q, DressingOperator::broad(Q.schema, K), 2, {1, 1});
    const Mat ref = chain_partial(block_matrix(Q.block(1, 1), 5), to_matrix(K), pts, 2);
    const Mat got = block_matrix(*r.total.find(1, 1), 5);
    EXPECT_LT((got - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Diagrams, SingleChainAtFirstOrder)
{
    auto ds = enumerate_diagrams({{1, 1}}, 1, 1, 1);
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_DOUBLE_EQ(ds[0].factor, 1.0);
    auto d0 = enumerate_diagrams({{1, 1}}, 1, 1, 0);
    ASSERT_EQ(d0.size(), 1u);
    EXPECT_EQ(d0[0].vertices.size(), 1u);
}

TEST(Diagrams, SpikeChain)
{
    auto pts = small_points(5);
    CumulantSet Q{FieldSchema::broad(), pts, CumulantKind::bare, {}};
    auto& b = Q.block(1, 1);
    b[3 * 5 + 1] = 2.0; // Q(3|1)
    auto K = retarded_matrix(pts);
    auto ds = enumerate_diagrams({{1, 1}}, 1, 1, 1);
    auto T = evaluate_diagram(ds[0], Q, K);
    const double w = pts.weight(0);
    EXPECT_NEAR(std::abs(T[3 * 5 + 1] - 4.0 * w * w * K[1][3]), 0.0, 1e-15);
    double other = 0.0;
    for (size_t i = 0; i < T.size(); ++i)
        if (i != 3 * 5 + 1) other = std::max(other, std::abs(T[i]));
    EXPECT_EQ(other, 0.0);
}

// Two-edge (1,3) diagram: Q13 with two source slots feeding the response slots of a Q22.
TEST(Diagrams, ParallelPairIntoQ22HasHalfWeight)
{
    const int P = 4;
    auto pts = small_points(P);
    auto Q = synthetic_bare(pts, 21);
    auto K = random_matrix(P, 22);
    auto ds = enumerate_diagrams(kVertices, 1, 3, 2);
    const Diagram* pair = nullptr;
    for (auto& d : ds)
        if (d.vertices == std::vector<VertexType>{{1, 3}, {2, 2}} && d.edges[0][1] == 2) pair = &d;
    ASSERT_NE(pair, nullptr);
    auto T = evaluate_diagram(*pair, Q, K);
    const auto& q13 = Q.block(1, 3);
    const auto& q22 = Q.block(2, 2);
    auto w = [&](int p) { return pts.weight(p); };
    double dev = 0.0;
    for (int t = 0; t < P; ++t)
        for (int a1 = 0; a1 < P; ++a1)
            for (int a2 = 0; a2 < P; ++a2)
                for (int a3 = 0; a3 < P; ++a3) {
                    const int ext[3] = {a1, a2, a3};
                    cplx ref = 0.0;
                    for (int c = 0; c < 3; ++c) {
                        const int lone = ext[c], o1 = ext[(c + 1) % 3], o2 = ext[(c + 2) % 3];
                        for (int b1 = 0; b1 < P; ++b1)
                            for (int b2 = 0; b2 < P; ++b2)
                                for (int b3 = 0; b3 < P; ++b3)
                                    for (int b4 = 0; b4 < P; ++b4)
                                        ref += 0.5 * q13[((t * P + lone) * P + b1) * P + b2] * K[b1][b3] *
                                               K[b2][b4] * q22[((b3 * P + b4) * P + o1) * P + o2] * w(b1) * w(b2) *
                                               w(b3) * w(b4);
                    }
                    dev = std::max(dev, std::abs(T[((t * P + a1) * P + a2) * P + a3] - ref));
                }
    EXPECT_LT(dev, 1e-12);
}

TEST(Diagrams, DoubleBridgeBetweenQ22)
{
    const int P = 4;
    auto pts = small_points(P);
    auto Q = synthetic_bare(pts, 31);
    auto K = random_matrix(P, 32);
    const Diagram* bridge = nullptr;
    auto ds = enumerate_diagrams(kVertices, 2, 2, 2);
    for (auto& d : ds)
        if (d.vertices == std::vector<VertexType>{{2, 2}, {2, 2}} && (d.edges[0][1] == 2 || d.edges[1][0] == 2))
            bridge = &d;
    ASSERT_NE(bridge, nullptr);
    EXPECT_DOUBLE_EQ(bridge->factor, 0.5);
    auto T = evaluate_diagram(*bridge, Q, K);
    const auto& q = Q.block(2, 2);
    double dev = 0.0;
    for (int t1 = 0; t1 < P; ++t1)
        for (int t2 = 0; t2 < P; ++t2)
            for (int s1 = 0; s1 < P; ++s1)
                for (int s2 = 0; s2 < P; ++s2) {
                    cplx ref = 0.0;
                    for (int b1 = 0; b1 < P; ++b1)
                        for (int b2 = 0; b2 < P; ++b2)
                            for (int b3 = 0; b3 < P; ++b3)
                                for (int b4 = 0; b4 < P; ++b4)
                                    ref += 0.5 * q[((t1 * P + t2) * P + b1) * P + b2] * K[b1][b3] * K[b2][b4] *
                                           q[((b3 * P + b4) * P + s1) * P + s2] * pts.weight(b1) * pts.weight(b2) *
                                           pts.weight(b3) * pts.weight(b4);
                    dev = std::max(dev, std::abs(T[((t1 * P + t2) * P + s1) * P + s2] - ref));
                }
    EXPECT_LT(dev, 1e-12);
}

TEST(Diagrams, ThreeEdgeLoopFactor)
{
    auto ds = enumerate_diagrams({{2, 2}}, 1, 1, 3);
    bool found = false;
    for (auto& d : ds)
        if (d.vertices.size() == 2 && ((d.edges[0][1] == 2 && d.edges[1][0] == 1) || (d.edges[1][0] == 2 && d.edges[0][1] == 1))) {
            found = true;
            EXPECT_DOUBLE_EQ(d.factor, 0.5);
        }
    EXPECT_TRUE(found);
}

TEST(Diagrams, ZeroCumulantsGiveZero)
{
    auto pts = small_points(3);
    CumulantSet Q{FieldSchema::broad(), pts, CumulantKind::bare, {}};
    Q.block(1, 1);
    Q.block(1, 3);
    Q.block(2, 2);
    auto t = diagram_sum(Q, random_matrix(3, 1), kVertices, 1, 3, 2);
    EXPECT_EQ(max_abs(t), 0.0);
}

TEST(Diagrams, MissingVertexThrows)
{
    auto pts = small_points(3);
    CumulantSet Q{FieldSchema::broad(), pts, CumulantKind::bare, {}};
    Q.block(1, 1);
    auto ds = enumerate_diagrams(kVertices, 1, 3, 0);
    ASSERT_FALSE(ds.empty());
    EXPECT_THROW(evaluate_diagram(ds[0], Q, random_matrix(3, 1)), config_error);
}

struct CrossCase {
    bool retarded;
    std::uint64_t seed;
};
class OracleVsDiagrams : public ::testing::TestWithParam<CrossCase> {};

TEST_P(OracleVsDiagrams, OrderByOrder)
{
    const int P = 4;
    auto pts = small_points(P);
    auto Q = synthetic_bare(pts, GetParam().seed);
    auto K = GetParam().retarded ? retarded_matrix(pts) : random_matrix(P, GetParam().seed + 100);
    auto r = dress_functional_oracle(Q, DressingOperator::broad(Q.schema, K), 2, {2, 3});
    for (auto [m, n] : std::vector<std::pair<int, int>>{{1, 1}, {1, 3}, {2, 2}})
        for (int k = 0; k <= 2; ++k) {
            const cvec t = diagram_sum(Q, K, kVertices, m, n, k);
            EXPECT_LT(block_diff(t, r.orders[k].find(m, n)), 1e-10) << "block (" << m << "," << n << ") order " << k;
        }
}

INSTANTIATE_TEST_SUITE_P(Kernels, OracleVsDiagrams,
                         ::testing::Values(CrossCase{false, 1}, CrossCase{false, 2}, CrossCase{true, 3}));

TEST(Mayer, DisconnectedPartsLiveInMoments)
{
    const int P = 3;
    auto pts = small_points(P);
    auto Q = synthetic_bare(pts, 41);
    auto K = random_matrix(P, 42);
    auto op = DressingOperator::broad(Q.schema, K);
    auto mom = dress_functional_oracle(Q, op, 2, {2, 3}, true);
    auto cum = dress_functional_oracle(Q, op, 2, {2, 3});
    for (auto [m, n] : std::vector<std::pair<int, int>>{{1, 1}, {2, 2}, {1, 3}, {2, 3}})
        for (int k = 0; k <= 2; ++k) {
            const cvec all = diagram_sum(Q, K, kVertices, m, n, k, false);
            const cvec conn = diagram_sum(Q, K, kVertices, m, n, k, true);
            EXPECT_LT(block_diff(all, mom.orders[k].find(m, n)), 1e-10) << m << n << k;
            EXPECT_LT(block_diff(conn, cum.orders[k].find(m, n)), 1e-10) << m << n << k;
        }
    // (2,2) moments contain Q11 x Q11 at order 0, absent from the cumulant
    const cvec disc = diagram_sum(Q, K, kVertices, 2, 2, 0, false);
    const cvec conn = diagram_sum(Q, K, kVertices, 2, 2, 0, true);
    EXPECT_GT(block_diff(disc, &conn), 1e-2);
}

TEST(Dressing, FirstOrderLinearInKernel)
{
    const int P = 4;
    auto pts = small_points(P);
    auto Q = synthetic_bare(pts, 51);
    auto K1 = random_matrix(P, 52), K2 = random_matrix(P, 53), K12 = K1;
    for (int i = 0; i < P; ++i)
        for (int j = 0; j < P; ++j) K12[i][j] += K2[i][j];
    auto d = [&](const std::vector<cvec>& K) {
        return dress_functional_oracle(Q, DressingOperator::broad(Q.schema, K), 1, {2, 3}).orders[1];
    };
    auto a = d(K1), b = d(K2), c = d(K12);
    double dev = 0.0;
    for (auto& [key, v] : c.blocks) {
        const cvec* x = a.find(key);
        const cvec* y = b.find(key);
        for (size_t i = 0; i < v.size(); ++i)
            dev = std::max(dev, std::abs(v[i] - (x ? (*x)[i] : cplx(0.0)) - (y ? (*y)[i] : cplx(0.0))));
    }
    EXPECT_LT(dev, 1e-12);
}

TEST(Dressing, RetardedEdgesVanishAgainstTimeOrder)
{
    auto pts = small_points(6);
    EXPECT_EQ(edge_causality_defect(retarded_matrix(pts), pts), 0.0);
    EXPECT_GT(edge_causality_defect(random_matrix(6, 1), pts), 0.0);
}

TEST(Dressing, NarrowChainsBothConjugateForms)
{
    const int P = 4;
    auto pts = small_points(P);
    std::mt19937_64 rng(61);
    CumulantSet Q{FieldSchema::narrow(), pts, CumulantKind::bare, {}};
    Q.block({0, 1, 1, 0}) = random_block({0, 1, 1, 0}, P, rng); // (nubar | e)
    Q.block({1, 0, 0, 1}) = random_block({1, 0, 0, 1}, P, rng); // (nu | ebar)
    auto G = random_matrix(P, 62);
    auto r = dress_functional_oracle(Q, DressingOperator::narrow(Q.schema, G), 1, {1, 1, 1, 1});
    Mat Gm = to_matrix(G);
    const Mat a = chain_partial(block_matrix(Q.block({0, 1, 1, 0}), P), Gm, pts, 1);
    const Mat b = block_matrix(Q.block({1, 0, 0, 1}), P) -
                  (chain_partial(block_matrix(Q.block({1, 0, 0, 1}), P), Gm.conjugate(), pts, 1) -
                   block_matrix(Q.block({1, 0, 0, 1}), P));
    EXPECT_LT((block_matrix(*r.total.find({0, 1, 1, 0}), P) - a).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((block_matrix(*r.total.find({1, 0, 0, 1}), P) - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Dressing, MergedOperatorOrderIndependent)
{
    const int P = 3;
    auto pts = small_points(P);
    std::mt19937_64 rng(71);
    auto schema = FieldSchema::merged();
    CumulantSet Q{schema, pts, CumulantKind::bare, {}};
    Q.block({1, 0, 0, 1, 0, 0}) = random_block({1, 0, 0, 1, 0, 0}, P, rng);
    Q.block({0, 0, 1, 0, 1, 0}) = random_block({0, 0, 1, 0, 1, 0}, P, rng);
    Q.block({1, 1, 0, 0, 0, 1}) = random_block({1, 1, 0, 0, 0, 1}, P, rng);
    Q.block({1, 0, 1, 1, 1, 0}) = random_block({1, 0, 1, 1, 1, 0}, P, rng);
    auto op = DressingOperator::merged(schema, random_matrix(P, 72), random_matrix(P, 73));
    auto rev = op;
    std::reverse(rev.terms.begin(), rev.terms.end());
    const std::vector<int> caps{1, 1, 1, 1, 1, 1};
    auto a = dress_functional_oracle(Q, op, 2, caps).total;
    auto b = dress_functional_oracle(Q, rev, 2, caps).total;
    EXPECT_LT(max_abs_diff(a, b), 1e-12);
    // broad and narrow operators commute on polynomials
    auto S = FunctionalPoly::exp(cumulants_to_poly(Q), {3, 3, 3, 3, 3, 3}, 8);
    DressingOperator br{{op.terms[0]}}, nr{{op.terms[1], op.terms[2]}};
    EXPECT_LT(br.apply(nr.apply(S)).max_abs_diff(nr.apply(br.apply(S))), 1e-12);
}

TEST(Shift, RandomSignalsDegreeThree)
{
    TimeGrid g{0.0, 0.5, 5};
    auto s = SiteSet::uniform(1);
    auto f = 0.3 * random_signal(g, s, 1, Spectrum::full);
    auto gg = random_signal(g, s, 2, Spectrum::full);
    auto h = 0.3 * random_signal(g, s, 3, Spectrum::full);
    auto r = shift_identity_check(f, gg, h, 3);
    EXPECT_TRUE(r.pass()) << r.max_deviation();
    EXPECT_TRUE(shift_identity_check(Signal(g, s), gg, h, 3).pass());
    EXPECT_TRUE(shift_identity_check(f, gg, Signal(g, s), 3).pass());
}

TEST(Solution, NoDeviceRecoversVacuum)
{
    TimeGrid g{0.0, 0.25, 32};
    auto s = SiteSet::uniform(1);
    ModeSet m;
    m.band = Band::broad;
    m.omega = {1.0};
    m.u = {{1.0}};
    auto fam = build_kernel_family(m, g, s);
    CumulantSet dressed{FieldSchema::broad(), PointSet::full(g, s), CumulantKind::dressed, {}};
    SolutionArgs a;
    a.eta = random_signal(g, s, 4, Spectrum::full, true);
    a.j_e = random_signal(g, s, 5, Spectrum::full, true);
    const cplx v = solution_functional(dressed, &fam, nullptr, a);
    EXPECT_LT(std::abs(v - vacuum_broad_causal(fam, *a.eta, *a.j_e)), 1e-12);
}

TEST(Solution, ConsistencyUnderResplitting)
{
    const int P = 4;
    TimeGrid g{0.0, 0.3, 16};
    auto s = SiteSet::uniform(1);
    auto pts = PointSet::window(g, s, 0, P);
    auto Q = synthetic_bare(pts, 81, 0.3, 0.2, 0.1);
    ModeSet m;
    m.band = Band::broad;
    m.omega = {1.0};
    m.u = {{1.0}};
    auto fam = build_kernel_family(m, g, s);
    auto sig = [&](int seed) { return 0.2 * random_signal(g, s, seed, Spectrum::full, true); };
    SolutionArgs a;
    a.eta = sig(1);
    a.zeta = sig(2);
    a.j_e = sig(3);
    a.J_e = sig(4);
    a.a_e = sig(5);
    a.A_e = sig(6);
    SolutionArgs b = a;
    const Signal dj = sig(7), da = sig(8);
    b.j_e = *a.j_e + dj;
    b.J_e = *a.J_e - dj;
    b.a_e = *a.a_e - da;
    b.A_e = *a.A_e + da;
    const cplx va = solution_functional(Q, &fam, nullptr, a), vb = solution_functional(Q, &fam, nullptr, b);
    EXPECT_LT(std::abs(va - vb), 1e-12 * std::max(1.0, std::abs(va)));
    auto ma = solution_from_dressed(Q, fam, *a.j_e, *a.J_e, *a.a_e, *a.A_e);
    auto mb = solution_from_dressed(Q, fam, *b.j_e, *b.J_e, *b.a_e, *b.A_e);
    EXPECT_LT(max_abs_diff(ma.field, mb.field), 1e-12);
    EXPECT_LT(max_abs_diff(ma.current, mb.current), 1e-12);
}

TEST(Chain, ResummedEqualsLongPartialSum)
{
    const int P = 6;
    auto pts = small_points(P, 0.2);
    std::mt19937_64 rng(91);
    const Mat Q = block_matrix(random_block({1, 1}, P, rng, 0.3), P);
    const Mat K = to_matrix(retarded_matrix(pts));
    EXPECT_LT((chain_resummed(Q, K, pts) - chain_partial(Q, K, pts, 40)).cwiseAbs().maxCoeff(), 1e-12);
}
