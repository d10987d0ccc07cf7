#pragma once

// Independent route to the barrier traversal time: the Weyl-quantized time
// kernel factor evaluated by direct s-quadrature, its closed-form pieces for
// a two-segment barrier, and the zeta-space arrival-time difference.

#include "tunneltime/barriers.hpp"
#include "tunneltime/quadrature.hpp"
#include "tunneltime/special_functions.hpp"
#include "tunneltime/traversal.hpp"
#include "tunneltime/wavepacket.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace tunneltime
{
    /// T~(eta, zeta) = 1/2 int_0^eta ds 0F1(;1; mass (V(eta) - V(s)) zeta^2 / (2 hbar^2)).
    /// For eta < 0 the s-integral runs backwards (signed). breaks lists the
    /// discontinuities of V so no panel straddles a jump.
    template <class Potential>
    QuadResult weyl_tkf_numeric(Potential &&potential, double eta, double zeta, const UnitSystem &units,
                                const QuadSpec &spec = {}, std::span<const double> breaks = {})
    {
        const double c = units.mass * zeta * zeta / (2.0 * units.hbar * units.hbar);
        const double v_eta = potential(eta);
        const auto pts = detail::make_breaks(std::min(0.0, eta), std::max(0.0, eta), breaks);
        QuadResult r = integrate_adaptive([&](double s) { return hyp0f1_1(c * (v_eta - potential(s))); },
                                          std::span<const double>(pts), spec);
        return r.scaled(eta < 0.0 ? -0.5 : 0.5);
    }

    inline QuadResult weyl_tkf_numeric(const BarrierStack &stack, double eta, double zeta, const QuadSpec &spec = {})
    {
        const auto edges = stack.edges();
        return weyl_tkf_numeric([&stack](double q) { return stack.potential(q); }, eta, zeta, stack.units(), spec,
                                std::span<const double>(edges));
    }

    enum class KernelRegion { I, II, III, IV };

    /// Reference closed forms, or forms re-derived from the s-integral for the
    /// stack's actual geometry.
    enum class PieceForm { reference, derived };

    /// Which segment the reference formulas call "1": the far one on (-a, -l)
    /// (the geometric reading) or the near one.
    enum class Labeling { as_written, swapped };

    struct KernelParams
    {
        double kappa1 = 0.0;
        double kappa2 = 0.0;
        /// 2 mass (V2 - V1) / hbar^2, signed.
        double kappa21_sq = 0.0;
        double w1 = 0.0;
        double w2 = 0.0;
        double b = 0.0;
        double L = 0.0;
    };

    inline KernelParams kernel_params(const BarrierStack &stack, Labeling labeling)
    {
        if (stack.size() != 2)
            throw Error("contiguous kernel pieces need a two-segment stack");
        const std::size_t one = labeling == Labeling::as_written ? 0 : 1;
        const std::size_t two = 1 - one;
        const auto &u = stack.units();
        KernelParams p;
        p.kappa1 = stack.kappa(one);
        p.kappa2 = stack.kappa(two);
        p.kappa21_sq = 2.0 * u.mass * (stack.segments()[two].height - stack.segments()[one].height) / (u.hbar * u.hbar);
        p.w1 = stack.segments()[one].width;
        p.w2 = stack.segments()[two].width;
        p.b = stack.right_edge();
        p.L = stack.comparison_length();
        return p;
    }

    struct KernelPiece
    {
        KernelRegion region = KernelRegion::I;
        PieceForm form = PieceForm::derived;
        Labeling labeling = Labeling::as_written;
        KernelParams params;

        double eval(double eta, double zeta) const
        {
            const auto &p = params;
            const double z = std::abs(zeta);
            switch (region) {
            case KernelRegion::I:
                return 0.5 * eta;
            case KernelRegion::IV:
                return 0.5 * (eta + p.L) - 0.5 * p.w1 * bessel_j0(p.kappa1 * z) - 0.5 * p.w2 * bessel_j0(p.kappa2 * z);
            case KernelRegion::II:
                if (form == PieceForm::reference)
                    return 0.5 * (eta + p.b) - 0.5 * p.w1 * bessel_i0(p.kappa1 * z);
                // eta inside the near segment (kappa2 under as_written labels).
                return 0.5 * (eta + p.b) - 0.5 * p.b * bessel_i0(p.kappa2 * z);
            case KernelRegion::III:
                if (form == PieceForm::reference)
                    return 0.5 * (eta + p.b + p.w1) - 0.5 * p.b * bessel_i0(p.kappa2 * z)
                        - 0.5 * p.w1 * hyp0f1_1(0.25 * p.kappa21_sq * z * z);
                // eta inside the far segment.
                return 0.5 * (eta + p.b + p.w2) - 0.5 * p.w2 * hyp0f1_1(-0.25 * p.kappa21_sq * z * z)
                    - 0.5 * p.b * bessel_i0(p.kappa1 * z);
            }
            return std::numeric_limits<double>::quiet_NaN();
        }

        std::string label() const
        {
            static constexpr std::array<const char *, 4> names{"I", "II", "III", "IV"};
            std::string s = std::string(form == PieceForm::reference ? "reference " : "derived ")
                + names[static_cast<int>(region)];
            if (form == PieceForm::reference)
                s += labeling == Labeling::as_written ? " (1=far)" : " (1=near)";
            return s;
        }
    };

    inline KernelPiece make_piece(const BarrierStack &stack, KernelRegion region, PieceForm form,
                                  Labeling labeling = Labeling::as_written)
    {
        if (form == PieceForm::derived)
            labeling = Labeling::as_written;
        return {region, form, labeling, kernel_params(stack, labeling)};
    }

    inline double contiguous_tkf(const KernelPiece &piece, double eta, double zeta) { return piece.eval(eta, zeta); }

    struct RegionAssignment
    {
        std::string interval;
        /// Sampled eta range.
        Interval eta_range;
        /// Lookup range (the outer intervals extend to infinity).
        Interval lookup_range;
        KernelPiece best;
        double best_deviation = 0.0;
        /// Deviation of every reference candidate on this interval.
        std::vector<std::pair<std::string, double>> reference_deviations;
        bool reference_match = false;
        bool ambiguous = false;
    };

    struct RegionMap
    {
        std::vector<RegionAssignment> rows;
        double tolerance = 1e-9;

        const RegionAssignment &lookup(double eta) const
        {
            for (const auto &r : rows)
                if (eta >= r.lookup_range.lo && eta < r.lookup_range.hi)
                    return r;
            return rows.back();
        }

        double eval(double eta, double zeta) const { return lookup(eta).best.eval(eta, zeta); }
    };

    /// Compares the numeric kernel with every candidate closed form on each
    /// of the four eta intervals of a two-segment stack and keeps the best.
    /// A reference piece wins whenever it matches to tolerance; otherwise the
    /// re-derived piece is used and the interval is reported.
    inline RegionMap region_map_calibration(const BarrierStack &stack, const QuadSpec &spec = {},
                                            double tolerance = 1e-9)
    {
        if (stack.size() != 2)
            throw Error("region_map_calibration needs a two-segment stack");
        const double a = stack.left_edge();
        const double b = stack.right_edge();
        const double l = b + stack.segments()[1].width;
        const double inf = std::numeric_limits<double>::infinity();
        const double pad = std::max(1.0, stack.total_width());

        struct Span
        {
            const char *name;
            Interval sample;
            Interval lookup;
        };
        const std::array<Span, 4> spans{{
            {"eta < -a", {-a - pad, -a}, {-inf, -a}},
            {"-a < eta < -l", {-a, -l}, {-a, -l}},
            {"-l < eta < -b", {-l, -b}, {-l, -b}},
            {"-b < eta", {-b, 0.0}, {-b, inf}},
        }};

        std::vector<KernelPiece> candidates;
        for (auto region : {KernelRegion::I, KernelRegion::II, KernelRegion::III, KernelRegion::IV}) {
            candidates.push_back(make_piece(stack, region, PieceForm::reference, Labeling::as_written));
            candidates.push_back(make_piece(stack, region, PieceForm::reference, Labeling::swapped));
        }
        for (auto region : {KernelRegion::I, KernelRegion::II, KernelRegion::III, KernelRegion::IV})
            candidates.push_back(make_piece(stack, region, PieceForm::derived));

        constexpr int n_eta = 7;
        constexpr int n_zeta = 9;
        const double zeta_top = 3.0;

        RegionMap map;
        map.tolerance = tolerance;
        for (const auto &span : spans) {
            std::vector<std::array<double, 3>> samples;
            for (int i = 0; i < n_eta; ++i) {
                const double eta = span.sample.lo + (i + 0.5) / n_eta * span.sample.width();
                for (int j = 0; j < n_zeta; ++j) {
                    const double zeta = zeta_top * j / (n_zeta - 1);
                    samples.push_back({eta, zeta, weyl_tkf_numeric(stack, eta, zeta, spec).value});
                }
            }
            RegionAssignment row;
            row.interval = span.name;
            row.eta_range = span.sample;
            row.lookup_range = span.lookup;
            double best_reference = inf;
            double best_derived = inf;
            KernelPiece reference_piece, derived_piece;
            for (const auto &c : candidates) {
                double dev = 0.0;
                for (const auto &[eta, zeta, num] : samples)
                    dev = std::max(dev, std::abs(num - c.eval(eta, zeta)) / (1.0 + std::abs(num)));
                if (c.form == PieceForm::reference) {
                    row.reference_deviations.emplace_back(c.label(), dev);
                    if (dev < best_reference) {
                        best_reference = dev;
                        reference_piece = c;
                    }
                } else if (dev < best_derived) {
                    best_derived = dev;
                    derived_piece = c;
                }
            }
            if (best_reference <= tolerance) {
                row.best = reference_piece;
                row.best_deviation = best_reference;
                row.reference_match = true;
            } else if (best_derived <= tolerance) {
                row.best = derived_piece;
                row.best_deviation = best_derived;
            } else {
                row.ambiguous = true;
                row.best = best_reference < best_derived ? reference_piece : derived_piece;
                row.best_deviation = std::min(best_reference, best_derived);
            }
            map.rows.push_back(std::move(row));
        }
        return map;
    }

    /// Zeta-space arrival-time difference and its free and barrier terms.
    struct DeltaTauBreakdown
    {
        std::complex<double> q_star;
        std::vector<std::complex<double>> r_star;
        /// (L / v0) Im Q* - sum_n (w_n / v0) Im R_n*.
        double delta_tau = 0.0;
        double tau_free_part = 0.0;
        double tau_barrier_part = 0.0;
        double error_estimate = 0.0;
        bool converged = true;
        std::vector<std::string> warnings;
    };

    /// Q* = k0 int_0^inf Phi e^{i k0 zeta}, R_n* = k0 int_0^inf Phi J0(kappa_n zeta) e^{i k0 zeta}.
    inline DeltaTauBreakdown delta_tau_zeta(const GaussianPacket &packet, const BarrierStack &stack,
                                            const QuadSpec &spec = {}, double n_sigmas = 8.0)
    {
        const auto &u = stack.units();
        const double k0 = packet.k0();
        const double v0 = u.speed(k0);
        auto phi = [&packet](double zeta) { return packet.autocorrelation(zeta); };

        DeltaTauBreakdown out;
        if (!packet.left_of(stack.left_edge(), n_sigmas))
            out.warnings.push_back("packet overlaps the barrier region (q0 + n_sigmas sigma >= -a)");

        const ComplexQuadResult q = integrate_oscillatory_damped(phi, OscillatoryKernel::plain(), k0, spec);
        out.q_star = q.value;
        out.error_estimate += stack.comparison_length() / v0 * q.error_estimate;
        out.converged = q.converged;
        out.tau_free_part = stack.comparison_length() / v0 * q.value.imag();

        std::map<double, ComplexQuadResult> cache;
        for (std::size_t n = 0; n < stack.size(); ++n) {
            const double kn = stack.kappa(n);
            auto it = cache.find(kn);
            if (it == cache.end())
                it = cache.emplace(kn, integrate_oscillatory_damped(phi, OscillatoryKernel::bessel(kn), k0, spec)).first;
            const ComplexQuadResult &r = it->second;
            const double w = stack.segments()[n].width;
            out.r_star.push_back(r.value);
            out.tau_barrier_part += w / v0 * r.value.imag();
            out.error_estimate += w / v0 * r.error_estimate;
            out.converged = out.converged && r.converged;
        }
        out.delta_tau = out.tau_free_part - out.tau_barrier_part;
        if (!out.converged)
            out.warnings.push_back("zeta quadrature did not converge");
        return out;
    }

    struct FreeToaOptions
    {
        /// Grid half-width in units of sigma.
        double n_sigmas = 12.0;
        /// Coarse-grid nodes per carrier period 2 pi / k0.
        double points_per_period = 32.0;
    };

    struct FreeToaResult
    {
        /// Richardson-extrapolated expectation.
        double value = 0.0;
        double coarse = 0.0;
        double fine = 0.0;
        double error_estimate = 0.0;
        /// Imaginary part left over on the fine grid; zero for an exact Hermitian evaluation.
        double imag_residual = 0.0;
        std::size_t grid_points = 0;
    };

    namespace detail
    {
        // <psi|T_F|psi> on a uniform grid of n intervals. The q' integral is
        // split at each node q_j via cumulative trapezoid sums, so the sgn jump
        // never sits inside a panel.
        inline std::complex<double> free_toa_grid(const GaussianPacket &packet, const UnitSystem &units, double lo,
                                                  double hi, std::size_t n)
        {
            const double h = (hi - lo) / static_cast<double>(n);
            std::vector<std::complex<double>> psi(n + 1), cum_a(n + 1), cum_b(n + 1);
            for (std::size_t j = 0; j <= n; ++j)
                psi[j] = packet.psi(lo + static_cast<double>(j) * h);
            for (std::size_t j = 1; j <= n; ++j) {
                const double q_prev = lo + static_cast<double>(j - 1) * h;
                const double q = lo + static_cast<double>(j) * h;
                cum_a[j] = cum_a[j - 1] + 0.5 * h * (psi[j - 1] + psi[j]);
                cum_b[j] = cum_b[j - 1] + 0.5 * h * (q_prev * psi[j - 1] + q * psi[j]);
            }
            std::complex<double> sum = 0.0;
            for (std::size_t j = 0; j <= n; ++j) {
                const double q = lo + static_cast<double>(j) * h;
                const std::complex<double> inner =
                    0.25 * q * (2.0 * cum_a[j] - cum_a[n]) + 0.25 * (2.0 * cum_b[j] - cum_b[n]);
                const double weight = (j == 0 || j == n) ? 0.5 * h : h;
                sum += weight * std::conj(psi[j]) * inner;
            }
            // (mass / (i hbar)) * sum
            return std::complex<double>(0.0, -units.mass / units.hbar) * sum;
        }
    }

    /// Grid expectation of the free time-of-arrival operator with kernel
    /// (mass / i hbar) (q + q') / 4 sgn(q - q'). Two grids (h, h/2) are
    /// combined by Richardson extrapolation.
    inline FreeToaResult free_toa_expectation(const GaussianPacket &packet, const UnitSystem &units = {},
                                              const FreeToaOptions &options = {})
    {
        units.validate();
        if (!(packet.q0() < 0.0))
            throw Error("free_toa_expectation: packet must start left of the origin (q0 < 0)");
        const double lo = packet.q0() - options.n_sigmas * packet.sigma();
        const double hi = packet.q0() + options.n_sigmas * packet.sigma();
        const double h = std::min(packet.sigma() / 16.0,
                                  2.0 * std::numbers::pi / (packet.k0() * options.points_per_period));
        const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / h));
        const auto coarse = detail::free_toa_grid(packet, units, lo, hi, n);
        const auto fine = detail::free_toa_grid(packet, units, lo, hi, 2 * n);
        FreeToaResult out;
        out.coarse = coarse.real();
        out.fine = fine.real();
        out.value = (4.0 * out.fine - out.coarse) / 3.0;
        out.error_estimate = std::abs(out.fine - out.coarse) / 3.0;
        out.imag_residual = fine.imag();
        out.grid_points = 2 * n + 1;
        return out;
    }

    /// Zeta-space value of the same expectation, -(mass q0 / (hbar k0)) Im Q*,
    /// exact for the symmetric Gaussian envelope.
    inline double free_toa_zeta(const GaussianPacket &packet, const UnitSystem &units = {}, const QuadSpec &spec = {})
    {
        const auto q = integrate_oscillatory_damped([&packet](double z) { return packet.autocorrelation(z); },
                                                    OscillatoryKernel::plain(), packet.k0(), spec);
        return -units.mass * packet.q0() / (units.hbar * packet.k0()) * q.value.imag();
    }
}
