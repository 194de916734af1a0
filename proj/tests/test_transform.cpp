#include <gtest/gtest.h>

#include <rqed/transform.hpp>

using namespace rqed;

namespace {
const double pi = std::numbers::pi;
TimeGrid grid() { return TimeGrid::periodic(8 * pi, 64, 0.1); }

std::vector<Signal> battery(const TimeGrid& g, const SiteSet& s, int count, std::uint64_t seed)
{
    std::vector<Signal> b;
    for (int i = 0; i < count; ++i) b.push_back(random_signal(g, s, seed + i, Spectrum::full));
    for (int i = 0; i < count; ++i) b.push_back(Signal::spike(g, s, i % s.size(), 3 + 5 * i, 1.0 / g.dt));
    return b;
}
} // namespace

TEST(BroadSubstitute, ZeroResponseVariable)
{
    auto g = grid();
    SiteSet s;
    Signal j = random_signal(g, s, 1), z(g, s);
    auto sk = broad_substitute(z, j, 0.5);
    EXPECT_LT(max_abs_diff(sk.plus, 2.0 * j), 1e-15);
    EXPECT_LT(max_abs_diff(sk.minus, 2.0 * j), 1e-15);
}

TEST(BroadSubstitute, PositiveToneSelectsMinusBranch)
{
    auto g = grid();
    SiteSet s;
    Signal eta = Signal::from_function(g, s, [](int, double t) { return std::exp(-I * t); });
    auto sk = broad_substitute(eta, Signal(g, s));
    EXPECT_LT(max_abs(sk.plus.values), 1e-14);
    EXPECT_LT(max_abs_diff(sk.minus, -1.0 * eta), 1e-14);
}

TEST(BroadInvert, EqualBranchesGiveSource)
{
    auto g = grid();
    SiteSet s;
    Signal c = Signal::from_function(g, s, [](int, double) { return cplx(0.7, 0.2); });
    auto cv = broad_invert({c, c}, 2.0);
    EXPECT_LT(max_abs(cv.response.values), 1e-15);
    EXPECT_LT(max_abs_diff(cv.source, 2.0 * c), 1e-14);
    auto zero = broad_invert({Signal(g, s), Signal(g, s)});
    EXPECT_EQ(max_abs(zero.source.values), 0.0);
}

TEST(BroadSubstitute, MutualInverseOnFullSpectra)
{
    auto g = grid();
    SiteSet s({"a", "b"}, {0.3, 1.0});
    for (double hbar : {1.0, 0.5})
        for (int seed = 0; seed < 10; ++seed) {
            Signal eta = random_signal(g, s, 10 + seed, Spectrum::full), j = random_signal(g, s, 50 + seed, Spectrum::full);
            auto back = broad_invert(broad_substitute(eta, j, hbar), hbar);
            EXPECT_LT(max_abs_diff(back.response, eta), 1e-12);
            EXPECT_LT(max_abs_diff(back.source, j), 1e-12);
            BroadSkeleton sk{random_signal(g, s, 90 + seed, Spectrum::full), random_signal(g, s, 95 + seed, Spectrum::full)};
            auto cv = broad_invert(sk, hbar);
            auto again = broad_substitute(cv.response, cv.source, hbar);
            EXPECT_LT(max_abs_diff(again.plus, sk.plus), 1e-12);
            EXPECT_LT(max_abs_diff(again.minus, sk.minus), 1e-12);
        }
}

TEST(BroadSubstitute, ToneAndConstantRoundTrip)
{
    auto g = grid();
    SiteSet s;
    Signal eta = Signal::from_function(g, s, [](int, double t) { return std::exp(-I * t); });
    Signal one = Signal::from_function(g, s, [](int, double) { return cplx(1.0); });
    auto back = broad_invert(broad_substitute(eta, one));
    EXPECT_LT(max_abs_diff(back.response, eta), 1e-13);
    EXPECT_LT(max_abs_diff(back.source, one), 1e-13);
}

TEST(LinearExponent, SkeletonEqualsCausal)
{
    auto g = grid();
    SiteSet s({"a", "b"}, {0.3, 1.0});
    const double hbar = 0.5;
    for (int seed = 0; seed < 5; ++seed) {
        Signal eta = random_signal(g, s, seed, Spectrum::full), j = random_signal(g, s, seed + 10, Spectrum::full);
        Signal J = random_signal(g, s, seed + 20, Spectrum::full, true);
        Signal zp = random_signal(g, s, seed + 30, Spectrum::full), ap = random_signal(g, s, seed + 40, Spectrum::full);
        const cplx lhs = linear_exponent_skeleton(broad_substitute(eta, j, hbar), J, field_substitute(zp, ap, hbar), hbar);
        const cplx rhs = linear_exponent_causal(eta, j, J, ap, zp);
        EXPECT_LT(std::abs(lhs - rhs), 1e-12 * std::abs(rhs));
    }
}

TEST(NarrowSubstitute, ZeroDipoleArguments)
{
    auto g = grid();
    SiteSet s;
    Signal z(g, s), e = random_signal(g, s, 4);
    auto sk = narrow_substitute(NarrowCausal::plain(z, z, e, e, e, e));
    EXPECT_EQ(max_abs(sk.mu_p.values), 0.0);
    EXPECT_EQ(max_abs(sk.mubar_p.values), 0.0);
    EXPECT_EQ(max_abs(sk.mu_m.values), 0.0);
    EXPECT_EQ(max_abs(sk.mubar_m.values), 0.0);
}

TEST(NarrowSubstitute, ConstantDipolePassesWhole)
{
    auto g = grid();
    SiteSet s;
    const cplx c(0.4, -1.1);
    Signal d = Signal::from_function(g, s, [&](int, double) { return c; }), z(g, s);
    auto sk = narrow_substitute(NarrowCausal::plain(z, d, z, z, z, z), 0.5);
    EXPECT_LT(max_abs_diff(sk.mu_p, 2.0 * d), 1e-15);
    EXPECT_LT(max_abs_diff(sk.mubar_m, 2.0 * conj(d)), 1e-15);
}

TEST(NarrowSubstitute, RoundTripAndConstraints)
{
    auto g = grid();
    SiteSet s({"a", "b"}, {0.3, 1.0});
    for (double hbar : {1.0, 0.5}) {
        auto r = [&](int k) { return random_signal(g, s, 200 + k, Spectrum::full); };
        auto c = NarrowCausal::plain(r(0), r(1), r(2), r(3), r(4), r(5));
        auto sk = narrow_substitute(c, hbar);
        EXPECT_LT(sk.plain_defect(), 1e-15);
        auto back = narrow_invert(sk, hbar);
        EXPECT_LT(max_abs_diff(back.mu, c.mu), 1e-12);
        EXPECT_LT(max_abs_diff(back.d, c.d), 1e-12);
        EXPECT_LT(max_abs_diff(back.nu, c.nu), 1e-12);
        EXPECT_LT(max_abs_diff(back.e, c.e), 1e-12);
        EXPECT_LT(max_abs_diff(back.nu_p, c.nu_p), 1e-12);
        EXPECT_LT(max_abs_diff(back.e_p, c.e_p), 1e-12);
        EXPECT_LT(back.plain_defect(), 1e-12);
    }
}

TEST(NarrowSubstitute, RejectsInconsistentConjugates)
{
    auto g = grid();
    SiteSet s;
    auto c = NarrowCausal::plain(random_signal(g, s, 1), random_signal(g, s, 2), random_signal(g, s, 3),
                                 random_signal(g, s, 4), random_signal(g, s, 5), random_signal(g, s, 6));
    c.dbar = random_signal(g, s, 7);
    EXPECT_THROW(narrow_substitute(c), config_error);
    EXPECT_NO_THROW(narrow_substitute(c, 1.0, false));
}

TEST(ReorderingForm, BroadSingleModeSpikes)
{
    auto g = grid();
    SiteSet s;
    auto f = build_kernel_family(ModeSet::single(Band::broad, 1.0), g, s);
    for (double hbar : {1.0, 0.5}) {
        auto r = transform_reordering_form(f, battery(g, s, 4, 1), hbar);
        EXPECT_TRUE(r.pass()) << r.first_failure()->name << " " << r.max_deviation();
    }
}

TEST(ReorderingForm, BroadMultimodeTwoSites)
{
    auto g = grid();
    SiteSet s({"a", "b"}, {0.3, 1.0});
    ModeSet m;
    m.band = Band::broad;
    m.omega = {0.5, 1.0, 2.25};
    m.u = {{1.0, 0.2}, {0.3 * I, 1.0}, {0.7, -0.4}};
    auto r = transform_reordering_form(build_kernel_family(m, g, s), battery(g, s, 4, 11));
    EXPECT_TRUE(r.pass()) << r.first_failure()->name << " " << r.max_deviation();
}

TEST(ReorderingForm, NarrowSingleMode)
{
    auto g = grid();
    SiteSet s;
    auto f = build_kernel_family(ModeSet::single(Band::narrow, 3.25, 1, 3.0), g, s);
    auto r = transform_reordering_form(f, battery(g, s, 4, 21), 0.5);
    EXPECT_TRUE(r.pass()) << r.first_failure()->name << " " << r.max_deviation();
}

TEST(ReorderingForm, ZeroSignals)
{
    auto g = grid();
    SiteSet s;
    auto f = build_kernel_family(ModeSet::single(Band::broad, 1.0), g, s);
    auto r = transform_reordering_form(f, {Signal(g, s), Signal(g, s)});
    EXPECT_EQ(r.max_deviation(), 0.0);
}

TEST(EmitRetardedField, SpikeZeroAndSuperposition)
{
    auto g = grid();
    SiteSet s;
    auto f = build_kernel_family(ModeSet::single(Band::narrow, 3.25, 1, 3.0), g, s);
    Signal spike = Signal::spike(g, s, 0, 10, 1.0 / g.dt);
    Signal E = emit_retarded_field(spike, f);
    for (int k = 0; k < g.n; ++k) EXPECT_LT(std::abs(E(0, k) - f.retarded(0, 0, k - 10)), 1e-14);
    EXPECT_EQ(max_abs(emit_retarded_field(Signal(g, s), f).values), 0.0);
    Signal d1 = random_signal(g, s, 1), d2 = random_signal(g, s, 2);
    EXPECT_LT(max_abs_diff(emit_retarded_field(d1 + d2, f, true),
                           emit_retarded_field(d1, f, true) + emit_retarded_field(d2, f, true)),
              1e-13);
}
