#include "tunneltime/toa_kernel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace tunneltime;

namespace
{
    // Near segment narrower than b, so no piece can match by a coincidence of widths.
    const BarrierStack stack({{1.0, 1.3}, {2.5, 0.7}}, 1.6);

    double gaussian(double k, double sigma, double k0)
    {
        const double d = k - k0;
        return sigma * std::sqrt(2.0 / std::numbers::pi) * std::exp(-2.0 * sigma * sigma * d * d);
    }
}

TEST(WeylKernel, FreeKernelIsHalfEta)
{
    auto zero = [](double) { return 0.0; };
    for (double eta : {-1000.0, -37.5, -1.0, 0.0, 0.25, 12.0, 1000.0})
        for (double zeta : {0.0, 0.5, 7.0})
            EXPECT_NEAR(weyl_tkf_numeric(zero, eta, zeta, UnitSystem{}).value, 0.5 * eta, 1e-12);
}

TEST(WeylKernel, ZeroZetaIsHalfEtaForAnyPotential)
{
    for (double eta : {-6.0, -3.5, -2.0, -1.0, 0.5})
        EXPECT_NEAR(weyl_tkf_numeric(stack, eta, 0.0).value, 0.5 * eta, 1e-13);
}

TEST(WeylKernel, EvenInZeta)
{
    for (double eta : {-5.0, -3.0, -2.0, -0.5})
        for (double zeta : {0.3, 1.7})
            EXPECT_DOUBLE_EQ(weyl_tkf_numeric(stack, eta, zeta).value, weyl_tkf_numeric(stack, eta, -zeta).value);
}

TEST(WeylKernel, FarLeftMatchesBesselForm)
{
    const double L = stack.total_width();
    for (double eta : {-9.0, -5.0, -3.61})
        for (double zeta : {0.0, 0.8, 2.9}) {
            double expect = 0.5 * (eta + L);
            for (std::size_t n = 0; n < 2; ++n)
                expect -= 0.5 * stack.segments()[n].width * std::cyl_bessel_j(0.0, stack.kappa(n) * zeta);
            EXPECT_NEAR(weyl_tkf_numeric(stack, eta, zeta).value, expect, 1e-8 * (1.0 + std::abs(expect)));
        }
}

TEST(KernelPiece, ElementaryLimits)
{
    const auto one = make_piece(stack, KernelRegion::I, PieceForm::reference);
    EXPECT_EQ(one.eval(-0.7, 5.0), -0.35);
    const auto four = make_piece(stack, KernelRegion::IV, PieceForm::reference);
    // zeta = 0 gives (eta + L)/2 - sum w/2 = eta/2 with L = sum w.
    EXPECT_NEAR(four.eval(-8.0, 0.0), -4.0, 1e-15);
    const BarrierStack flat({{0.0, 1.3}, {0.0, 0.7}}, 1.6);
    const auto four_flat = make_piece(flat, KernelRegion::IV, PieceForm::reference);
    EXPECT_NEAR(four_flat.eval(-8.0, 3.0), 0.5 * (-8.0 + 2.0) - 0.5 * 2.0, 1e-15);
    for (auto region : {KernelRegion::I, KernelRegion::II, KernelRegion::III, KernelRegion::IV})
        for (auto form : {PieceForm::reference, PieceForm::derived}) {
            const auto p = make_piece(stack, region, form);
            EXPECT_EQ(p.eval(-2.5, 1.1), p.eval(-2.5, -1.1));
            EXPECT_EQ(contiguous_tkf(p, -2.5, 1.1), p.eval(-2.5, 1.1));
        }
    EXPECT_THROW(make_piece(BarrierStack({{1.0, 1.0}}, 1.0), KernelRegion::I, PieceForm::reference), Error);
}

TEST(RegionMap, CalibrationAssignsEveryInterval)
{
    const auto map = region_map_calibration(stack);
    ASSERT_EQ(map.rows.size(), 4u);
    // Far left: the Bessel-J piece, and right of the barrier: eta/2, both in reference form.
    EXPECT_TRUE(map.rows[0].reference_match);
    EXPECT_EQ(map.rows[0].best.region, KernelRegion::IV);
    EXPECT_TRUE(map.rows[3].reference_match);
    EXPECT_EQ(map.rows[3].best.region, KernelRegion::I);
    // Inside the far segment the reference III matches once segment "1" means the near one.
    EXPECT_TRUE(map.rows[1].reference_match);
    EXPECT_EQ(map.rows[1].best.region, KernelRegion::III);
    EXPECT_EQ(map.rows[1].best.labeling, Labeling::swapped);
    // Inside the near segment no reference form fits (it carries a width where b belongs).
    EXPECT_FALSE(map.rows[2].reference_match);
    EXPECT_EQ(map.rows[2].best.form, PieceForm::derived);
    EXPECT_EQ(map.rows[2].best.region, KernelRegion::II);
    for (const auto &row : map.rows) {
        EXPECT_FALSE(row.ambiguous) << row.interval;
        EXPECT_LE(row.best_deviation, 1e-9) << row.interval;
    }
}

TEST(RegionMap, LatticeFidelity)
{
    const auto map = region_map_calibration(stack);
    const double lo = -stack.left_edge() - 2.0;
    for (int i = 0; i < 25; ++i) {
        const double eta = lo + (i + 0.5) / 25.0 * (0.5 - lo);
        for (int j = 0; j < 25; ++j) {
            const double zeta = 3.0 * j / 24.0;
            const double num = weyl_tkf_numeric(stack, eta, zeta).value;
            EXPECT_NEAR(map.eval(eta, zeta), num, 1e-8 * (1.0 + std::abs(num))) << eta << " " << zeta;
        }
    }
}

TEST(RegionMap, RequiresTwoSegments)
{
    EXPECT_THROW(region_map_calibration(BarrierStack({{1.0, 1.0}}, 1.0)), Error);
}

TEST(DeltaTau, ZeroBarrierGivesEqualIntegrals)
{
    const BarrierStack flat({{0.0, 1.3}, {0.0, 0.7}}, 1.6);
    const GaussianPacket p(-60.0, 2.0, 5.0);
    const auto dt = delta_tau_zeta(p, flat);
    for (const auto &r : dt.r_star)
        EXPECT_EQ(r, dt.q_star);
    EXPECT_NEAR(dt.delta_tau, 0.0, 1e-14);
    EXPECT_NEAR(dt.delta_tau, dt.tau_free_part - dt.tau_barrier_part, 1e-15);
}

TEST(DeltaTau, ClassicalLimitRatios)
{
    const GaussianPacket p(-200.0, 10.0, 20.0 * stack.kappa_max());
    const auto dt = delta_tau_zeta(p, stack);
    const double k0 = p.k0();
    EXPECT_NEAR(dt.q_star.imag(), 1.0, 0.01);
    for (std::size_t n = 0; n < stack.size(); ++n) {
        const double kn = stack.kappa(n);
        EXPECT_NEAR(dt.r_star[n].imag(), k0 / std::sqrt(k0 * k0 - kn * kn), 0.01);
    }
    EXPECT_TRUE(dt.converged);
    EXPECT_TRUE(dt.warnings.empty());
}

TEST(DeltaTau, BarrierTermEqualsDwellTime)
{
    for (auto [sigma, k0] : {std::pair{1.0, 5.0}, {2.0, 3.0}, {5.0, 2.0}, {3.0, 4.0}}) {
        const GaussianPacket p(-150.0, sigma, k0);
        const auto dt = delta_tau_zeta(p, stack);
        const auto dwell = dwell_time(MomentumDensity::from_packet(p), stack);
        EXPECT_NEAR(dt.tau_barrier_part / dwell.value, 1.0, 1e-6) << sigma << " " << k0;
    }
}

TEST(DeltaTau, WarnsWhenPacketOverlapsBarrier)
{
    const GaussianPacket p(-4.0, 1.0, 5.0);
    EXPECT_FALSE(delta_tau_zeta(p, stack).warnings.empty());
}

TEST(FreeToa, MatchesClassicalArrivalTime)
{
    const GaussianPacket p(-50.0, 2.0, 10.0);
    const auto r = free_toa_expectation(p);
    EXPECT_NEAR(r.value, 5.0, 0.05);
    EXPECT_NEAR(r.value, free_toa_zeta(p), 1e-5);
    EXPECT_LT(std::abs(r.imag_residual), 1e-8);
}

TEST(FreeToa, ScalesInverselyWithK0)
{
    // Exact halving at fixed k0 sigma; at fixed sigma only up to the finite-width correction.
    const double t1 = free_toa_expectation(GaussianPacket(-50.0, 2.0, 10.0)).value;
    const double t2 = free_toa_expectation(GaussianPacket(-50.0, 1.0, 20.0)).value;
    const double t3 = free_toa_expectation(GaussianPacket(-50.0, 2.0, 20.0)).value;
    EXPECT_NEAR(t2 / t1, 0.5, 1e-6);
    EXPECT_NEAR(t3 / t1, 0.5, 1e-3);
}

TEST(FreeToa, CorrectionDependsOnlyOnK0Sigma)
{
    // Relative deviation from |q0|/v0 for fixed k0 sigma is the same at every sigma,
    // and it shrinks as k0 sigma grows.
    auto rel = [](double sigma, double k0) {
        const GaussianPacket p(-100.0, sigma, k0);
        return free_toa_zeta(p) / (100.0 / k0) - 1.0;
    };
    EXPECT_NEAR(rel(1.0, 2.0), rel(4.0, 0.5), 1e-9);
    double prev = std::abs(rel(1.0, 1.0));
    for (double k0s : {2.0, 4.0, 8.0}) {
        const double r = std::abs(rel(1.0, k0s));
        EXPECT_LT(r, prev) << k0s;
        prev = r;
    }
    const GaussianPacket p(-100.0, 1.0, 2.0);
    EXPECT_NEAR(free_toa_expectation(p).value, free_toa_zeta(p), 1e-4 * free_toa_zeta(p));
}

TEST(FreeToa, RequiresPacketLeftOfOrigin)
{
    EXPECT_THROW(free_toa_expectation(GaussianPacket(5.0, 1.0, 1.0)), Error);
}

TEST(FreeToa, ZetaFormMatchesMomentumAverage)
{
    // -q0 (mass/hbar) int (rho(k) - rho(-k)) / k dk over k > 0.
    const double q0 = -40.0, sigma = 1.0, k0 = 3.0;
    const auto r = integrate_adaptive([&](double k) { return (gaussian(k, sigma, k0) - gaussian(-k, sigma, k0)) / k; },
                                      1e-12, 20.0, QuadSpec{});
    EXPECT_NEAR(free_toa_zeta(GaussianPacket(q0, sigma, k0)), -q0 * r.value, 1e-8);
}
