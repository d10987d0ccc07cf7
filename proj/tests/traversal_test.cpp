#include "tunneltime/traversal.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace tunneltime;

namespace
{
    const BarrierStack two_step({{1.0, 1.0}, {2.0, 1.0}}, 1.0);

    double gaussian(double k, double sigma, double k0)
    {
        const double d = k - k0;
        return sigma * std::sqrt(2.0 / std::numbers::pi) * std::exp(-2.0 * sigma * sigma * d * d);
    }

    // Brute-force int_lo^hi rho(k) / sqrt(k^2 - kappa^2) dk with k = kappa cosh(u)
    // and composite Simpson in u (lo >= kappa > 0).
    template <class F>
    double brute_k_integral(F rho, double kappa, double lo, double hi, int n = 20000)
    {
        const double ua = std::acosh(lo / kappa), ub = std::acosh(hi / kappa);
        const double h = (ub - ua) / n;
        double s = rho(kappa * std::cosh(ua)) + rho(kappa * std::cosh(ub));
        for (int i = 1; i < n; ++i)
            s += (i % 2 ? 4.0 : 2.0) * rho(kappa * std::cosh(ua + i * h));
        return s * h / 3.0;
    }

    MomentumDensity narrow(double k0, double sigma = 10.0)
    {
        return MomentumDensity::from_packet(GaussianPacket(-200.0, sigma, k0));
    }
}

TEST(DwellTime, SymmetricDensityGivesZero)
{
    const MomentumDensity sym([](double k) { return 0.5 * (gaussian(k, 1.0, 3.0) + gaussian(k, 1.0, -3.0)); },
                              {-9.0, 9.0}, 3.0);
    const auto r = dwell_time(sym, two_step);
    EXPECT_NEAR(r.value, 0.0, 1e-14);
}

TEST(DwellTime, FreeSegmentIsMeanInverseWavenumber)
{
    const BarrierStack free({{0.0, 1.0}}, 1.0);
    const auto d = MomentumDensity::from_packet(GaussianPacket(-40.0, 2.0, 5.0));
    const auto r = dwell_time(d, free);
    // w / v0 <k0 / k>, by direct quadrature over the (positive) support.
    const double oracle = integrate_adaptive([](double k) { return gaussian(k, 2.0, 5.0) / k; }, d.support().lo,
                                             d.support().hi, QuadSpec{}).value;
    EXPECT_NEAR(r.value, oracle, 1e-9);
    EXPECT_NEAR(r.value, 0.2, 0.002);
}

TEST(DwellTime, MatchesTraversalForRightMovingPacket)
{
    const BarrierStack stack({{8.0, 1.0}}, 1.0); // kappa = 4
    const auto d = MomentumDensity::from_packet(GaussianPacket(-60.0, 4.0, 5.0));
    const auto r = traversal_time(d, stack);
    EXPECT_GT(r.tau_dwell, 0.0);
    EXPECT_NEAR(r.tau_dwell, r.tau_trav, 1e-10 * r.tau_trav);
}

TEST(Traversal, FullTunnelingIsInstantaneous)
{
    const auto base = MomentumDensity::from_packet(GaussianPacket(-60.0, 1.0, 1.0));
    const double kmin = two_step.kappa_min();
    const auto t = truncate(base, {0.1 * kmin, 0.9 * kmin});
    const auto r = traversal_time(t, two_step);
    EXPECT_EQ(r.regime, Regime::full_tunneling);
    EXPECT_EQ(r.tau_trav, 0.0);
    EXPECT_EQ(r.tau_part, 0.0);
    EXPECT_EQ(r.tau_non, 0.0);
    EXPECT_EQ(r.tau_tun, 0.0);
}

TEST(Traversal, HighEnergyTwoStepMatchesClassicalTime)
{
    const auto r = traversal_time(narrow(10.0), two_step);
    EXPECT_EQ(r.regime, Regime::non_tunneling);
    EXPECT_NEAR(r.tau_trav, 1.0 / std::sqrt(98.0) + 1.0 / std::sqrt(96.0), 1e-3 * r.tau_trav);
    EXPECT_NEAR(r.tau_trav, 0.20308, 5e-4);
    EXPECT_EQ(r.tau_part, 0.0);
    EXPECT_EQ(r.tau_tun, 0.0);
}

TEST(Traversal, PartialBandMatchesBruteForce)
{
    const double k1 = std::sqrt(2.0), k2 = 2.0;
    const auto base = MomentumDensity::from_packet(GaussianPacket(-80.0, 3.0, 1.7));
    const auto t = truncate(base, {k1, k2});
    const auto r = traversal_time(t, two_step);
    EXPECT_EQ(r.regime, Regime::partial_tunneling);
    EXPECT_EQ(r.tau_non, 0.0);
    EXPECT_GT(r.tau_part, 0.0);
    EXPECT_NEAR(r.tau_trav, r.tau_part, 1e-12 * r.tau_trav);
    const double oracle = brute_k_integral([&](double k) { return t.renorm * gaussian(k, 3.0, 1.7); }, k1, k1, k2);
    EXPECT_NEAR(r.tau_part, oracle, 1e-8 * oracle);
}

TEST(Traversal, SquareBarrierHasNoPartialTime)
{
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10; ++i) {
        const double v = 0.2 + 3.0 * u(rng);
        const BarrierStack single({{v, 0.3 + u(rng)}}, 0.5 + u(rng));
        const BarrierStack equal({{v, 0.5}, {v, 0.7}}, 1.0);
        const auto d = MomentumDensity::from_packet(GaussianPacket(-100.0, 0.5 + 3.0 * u(rng), 0.5 + 3.0 * u(rng)));
        EXPECT_EQ(traversal_time(d, single).tau_part, 0.0);
        EXPECT_EQ(traversal_time(d, equal).tau_part, 0.0);
    }
}

TEST(Traversal, AdditivityAcrossRegimes)
{
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int seen[4] = {0, 0, 0, 0};
    for (int i = 0; i < 40; ++i) {
        std::vector<Segment> segs;
        const int n = 1 + static_cast<int>(3 * u(rng));
        for (int j = 0; j < n; ++j)
            segs.push_back({0.1 + 4.0 * u(rng), 0.2 + 1.5 * u(rng)});
        const BarrierStack stack(segs, 0.5 + u(rng));
        const auto d = MomentumDensity::from_packet(GaussianPacket(-100.0, 0.5 + 4.0 * u(rng), 0.3 + 4.0 * u(rng)));
        const auto r = traversal_time(d, stack);
        ++seen[static_cast<int>(r.regime)];
        const auto &g = r.diagnostics;
        EXPECT_LE(std::abs(r.tau_trav - (r.tau_part + r.tau_non)), g.err_trav + g.err_part + g.err_non + 1e-15)
            << "case " << i;
        EXPECT_GE(r.tau_trav, 0.0);
        EXPECT_GE(r.tau_part, 0.0);
        EXPECT_GE(r.tau_non, 0.0);
        EXPECT_EQ(r.tau_tun, 0.0);
        EXPECT_NEAR(r.r_part(), r.tau_part * r.v0 / r.L, 1e-15);
    }
    EXPECT_GT(seen[static_cast<int>(Regime::non_tunneling)] + seen[static_cast<int>(Regime::mixed)], 0);
}

TEST(Traversal, MassBelowKappaMinDoesNotContribute)
{
    const double kmin = two_step.kappa_min();
    auto above = [kmin](double k) { return k >= kmin ? gaussian(k, 2.0, 2.2) : 0.0; };
    auto extra = [kmin](double k) { return k < kmin ? gaussian(k, 2.0, 2.2) + 3.0 * gaussian(k, 1.5, 0.8) : 0.0; };
    const MomentumDensity a(above, {0.0, 6.0}, 2.2);
    const MomentumDensity b([&](double k) { return above(k) + extra(k); }, {0.0, 6.0}, 2.2);
    const auto ra = traversal_time(a, two_step);
    const auto rb = traversal_time(b, two_step);
    EXPECT_NEAR(ra.tau_trav, rb.tau_trav, 1e-9 * ra.tau_trav);
    EXPECT_NEAR(ra.tau_part, rb.tau_part, 1e-9 * ra.tau_part);
    EXPECT_NEAR(ra.tau_non, rb.tau_non, 1e-9 * ra.tau_non);
}

TEST(Traversal, ClassicalLimitRates)
{
    const double kmax = two_step.kappa_max();
    for (auto [ratio, tol] : {std::pair{5.0, 0.02}, {20.0, 0.002}}) {
        const double k0 = ratio * kmax;
        const auto r = traversal_time(narrow(k0, 20.0), two_step);
        EXPECT_NEAR(r.tau_trav / classical_traversal(two_step, k0), 1.0, tol) << ratio;
    }
}

TEST(Traversal, RaisingHeightsSlowsAboveBarrierDensities)
{
    // For densities supported above every kappa, 1/sqrt(k^2 - kappa^2) grows with kappa.
    const auto d = narrow(6.0, 3.0);
    double prev = 0.0;
    for (double v2 = 0.0; v2 <= 8.0; v2 += 1.0) {
        const BarrierStack s({{1.0, 1.0}, {v2, 1.0}}, 1.0);
        ASSERT_GT(d.support().lo, s.kappa_max());
        const double t = traversal_time(d, s).tau_trav;
        EXPECT_GE(t, prev);
        prev = t;
    }
}

TEST(Traversal, ReportsNegativeMomentumWarning)
{
    const auto d = MomentumDensity::from_packet(GaussianPacket(-50.0, 0.5, 0.5));
    const auto r = traversal_time(d, two_step);
    EXPECT_FALSE(r.diagnostics.warnings.empty());
}

TEST(ClassicalTraversal, Examples)
{
    const BarrierStack free({{0.0, 2.0}}, 1.0);
    EXPECT_DOUBLE_EQ(classical_traversal(free, 4.0), 0.5);
    EXPECT_NEAR(classical_traversal(two_step, 10.0), 0.20308, 1e-5);
    EXPECT_THROW(classical_traversal(two_step, 2.0), Error);
    EXPECT_THROW(classical_traversal(two_step, 1.0), Error);
}

TEST(ClassicalNonForm, NarrowDensityLimitAndConsistency)
{
    const auto d = narrow(10.0);
    const auto c = tau_non_classical_form(d, two_step);
    EXPECT_NEAR(c.tau_non.value / classical_traversal(two_step, 10.0), 1.0, 0.01);
    const auto r = traversal_time(d, two_step);
    EXPECT_NEAR(c.tau_non.value, r.tau_non, 1e-8 * r.tau_non);
    EXPECT_GT(c.relative_discrepancy, 0.0);

    const BarrierStack free({{0.0, 1.0}, {0.0, 2.0}}, 1.0);
    const auto cf = tau_non_classical_form(d, free);
    EXPECT_NEAR(cf.tau_non.value, 3.0 / 10.0, 3e-3);
}

TEST(Smooth, ConstantProfileEqualsSingleSegment)
{
    const Interval sup{1.0, 2.5};
    const SmoothBarrier smooth(profiles::constant(2.0), sup);
    const BarrierStack single({{2.0, 1.5}}, 1.0);
    for (double k0 : {1.0, 2.5, 4.0}) {
        const auto d = MomentumDensity::from_packet(GaussianPacket(-80.0, 2.0, k0));
        const auto a = traversal_time_smooth(d, smooth);
        const auto b = traversal_time(d, single);
        EXPECT_NEAR(a.tau_trav, b.tau_trav, 1e-8 * std::max(1e-12, b.tau_trav)) << k0;
        EXPECT_NEAR(a.tau_non, b.tau_non, 1e-8 * std::max(1e-12, b.tau_non)) << k0;
        EXPECT_EQ(a.tau_part, 0.0);
    }
}

TEST(Smooth, ZeroProfileHasNoPartialTime)
{
    const SmoothBarrier zero(profiles::constant(0.0), {1.0, 3.0});
    const auto d = MomentumDensity::from_packet(GaussianPacket(-80.0, 2.0, 3.0));
    const auto r = traversal_time_smooth(d, zero);
    EXPECT_EQ(r.tau_part, 0.0);
    EXPECT_NEAR(r.tau_trav, 2.0 * integrate_adaptive([](double k) { return gaussian(k, 2.0, 3.0) / k; },
                                                     d.support().lo, d.support().hi, QuadSpec{}).value,
                1e-8);
}

TEST(Smooth, GaussianBumpMatchesFineStack)
{
    const Interval sup{1.0, 4.0};
    const SmoothBarrier bump(profiles::gaussian_bump(2.0, sup, 0.6), sup);
    const auto d = MomentumDensity::from_packet(GaussianPacket(-80.0, 2.0, 2.2));
    const auto smooth = traversal_time_smooth(d, bump);
    const auto stack = traversal_time(d, discretize(bump, 1024));
    EXPECT_NEAR(stack.tau_trav / smooth.tau_trav, 1.0, 1e-4);
    EXPECT_LE(std::abs(smooth.tau_trav - smooth.tau_part - smooth.tau_non),
              smooth.diagnostics.err_trav + smooth.diagnostics.err_part + smooth.diagnostics.err_non + 1e-15);
}

TEST(Smooth, DiscretizationConverges)
{
    const Interval sup{1.0, 4.0};
    const SmoothBarrier bump(profiles::gaussian_bump(2.0, sup, 0.6), sup);
    const auto d = MomentumDensity::from_packet(GaussianPacket(-80.0, 2.0, 2.5));
    const double ref = traversal_time_smooth(d, bump).tau_trav;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t n : {16u, 32u, 64u, 128u, 256u, 512u, 1024u}) {
        const double diff = std::abs(traversal_time(d, discretize(bump, n)).tau_trav - ref);
        EXPECT_LT(diff, prev) << n;
        prev = diff;
    }
    EXPECT_LT(prev / ref, 1e-3);
}

TEST(Smooth, PartialTimePositiveBelowMaximum)
{
    const Interval sup{1.0, 4.0};
    const SmoothBarrier bump(profiles::cosine_bump(3.0, sup), sup);
    const auto base = MomentumDensity::from_packet(GaussianPacket(-80.0, 1.0, 1.2));
    const auto t = truncate(base, {0.2, 2.0});
    ASSERT_LT(t.density.support().hi, bump.kappa_max());
    const auto r = traversal_time_smooth(t, bump);
    EXPECT_GT(r.tau_part, 0.0);
    EXPECT_EQ(r.regime, Regime::partial_tunneling);
}

TEST(AttoclockScan, DecreasingAndVanishingNearThreshold)
{
    const AttoclockBarrier helium{1.6875, 0.90357, 0.05};
    const auto d = MomentumDensity::from_packet(GaussianPacket(-200.0, 5.0, 0.5));
    std::vector<double> fields;
    for (int i = 0; i < 9; ++i)
        fields.push_back(0.02 + 0.01 * i);
    fields.push_back(0.999 * helium.threshold_field());
    fields.push_back(0.2);
    const auto s = attoclock_scan(helium, fields, d);
    ASSERT_EQ(s.points.size(), fields.size());
    EXPECT_TRUE(s.tau_part_strictly_decreasing);
    EXPECT_FALSE(s.points.back().report.has_value());
    EXPECT_EQ(s.warnings.size(), 1u);
    const double first = s.points[0].report->tau_part;
    const double near = s.points[9].report->tau_part;
    EXPECT_LT(near, 1e-4 * first);
}

TEST(AttoclockScan, LowFieldDensityBelowMaximumIsPartial)
{
    const AttoclockBarrier helium{1.6875, 0.90357, 0.02};
    const auto d = MomentumDensity::from_packet(GaussianPacket(-200.0, 10.0, 0.5));
    const auto smooth = attoclock_to_smooth(helium);
    ASSERT_LT(d.support().hi, smooth.kappa_max());
    const auto r = traversal_time_smooth(d, smooth);
    EXPECT_EQ(r.regime, Regime::partial_tunneling);
    EXPECT_GT(r.tau_part, 0.0);
    EXPECT_EQ(r.tau_non, 0.0);
}

TEST(AttoclockScan, TrendDependsOnMomentumWidth)
{
    // A momentum density narrower than the kappa_max sweep produces a local rise
    // of tau_part while kappa_max passes through its peak.
    const AttoclockBarrier helium{1.6875, 0.90357, 0.05};
    const auto d = MomentumDensity::from_packet(GaussianPacket(-200.0, 10.0, 0.5));
    std::vector<double> fields;
    for (int i = 0; i < 9; ++i)
        fields.push_back(0.02 + 0.01 * i);
    const auto s = attoclock_scan(helium, fields, d);
    EXPECT_FALSE(s.tau_part_strictly_decreasing);
    EXPECT_GT(s.points[0].report->tau_part, s.points[8].report->tau_part);
}
