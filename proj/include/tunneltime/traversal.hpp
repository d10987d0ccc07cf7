#pragma once

#include "tunneltime/barriers.hpp"
#include "tunneltime/quadrature.hpp"
#include "tunneltime/wavepacket.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tunneltime
{
    struct QuadDiagnostics
    {
        double err_trav = 0.0;
        double err_part = 0.0;
        double err_non = 0.0;
        double err_dwell = 0.0;
        std::size_t evaluations = 0;
        bool converged = true;
        std::vector<std::string> warnings;

        double combined_error() const { return err_trav + err_part + err_non; }
    };

    /// Traversal-time decomposition for one density/barrier pair.
    /// tau_trav = tau_tun + tau_part + tau_non with tau_tun identically zero.
    struct TraversalReport
    {
        double tau_trav = 0.0;
        double tau_part = 0.0;
        double tau_non = 0.0;
        double tau_tun = 0.0;
        double tau_dwell = 0.0;
        Regime regime = Regime::full_tunneling;
        double v0 = 0.0;
        double L = 0.0;
        QuadDiagnostics diagnostics;

        double r_part() const { return tau_part * v0 / L; }
        double r_non() const { return tau_non * v0 / L; }
    };

    namespace detail
    {
        // int over [max(lo, kappa), hi] cap support of rho(k) / sqrt(k^2 - kappa^2).
        inline QuadResult density_k_integral(const MomentumDensity &density, double kappa, double lo, double hi,
                                             const QuadSpec &spec)
        {
            const Interval range = Interval{std::max(lo, kappa), hi}.intersect(density.support());
            if (range.empty())
                return {};
            return integrate_sqrt_singular([&density](double k) { return density.raw(k); }, kappa, range.lo,
                                           range.hi, spec);
        }

        // Same measure applied to rho(k) - rho(-k) over k >= kappa.
        inline QuadResult signed_k_integral(const MomentumDensity &density, double kappa, const QuadSpec &spec)
        {
            const Interval s = density.support();
            const double inf = std::numeric_limits<double>::infinity();
            // Positive-k occupancy of rho(k) and of rho(-k).
            const double pos_lo = s.hi > 0.0 ? std::max(s.lo, 0.0) : inf;
            const double neg_lo = s.lo < 0.0 ? std::max(-s.hi, 0.0) : inf;
            const double hi = std::max(s.hi, -s.lo);
            const double lo = std::max(kappa, std::min(pos_lo, neg_lo));
            if (!(hi > lo))
                return {};
            const double breaks[4] = {s.lo, s.hi, -s.lo, -s.hi};
            return integrate_sqrt_singular([&density](double k) { return density(k) - density(-k); }, kappa, lo, hi,
                                           spec, std::span<const double>(breaks));
        }

        inline void note_convergence(QuadDiagnostics &diag, const QuadResult &r, std::string_view what)
        {
            diag.evaluations += r.evaluations;
            if (!r.converged && diag.converged) {
                diag.converged = false;
                diag.warnings.push_back(std::string(what) + ": quadrature did not converge");
            }
        }
    }

    /// Mean time spent in the barrier region, counting reflected (negative-k)
    /// components with negative weight:
    /// tau_B = (mass / hbar) sum_n w_n int_{kappa_n}^inf [rho(k) - rho(-k)] / sqrt(k^2 - kappa_n^2) dk.
    inline QuadResult dwell_time(const MomentumDensity &density, const BarrierStack &stack, const QuadSpec &spec = {})
    {
        const double scale = stack.units().time_scale();
        QuadResult total;
        std::map<double, QuadResult> cache;
        for (std::size_t n = 0; n < stack.size(); ++n) {
            const double kn = stack.kappa(n);
            auto it = cache.find(kn);
            if (it == cache.end())
                it = cache.emplace(kn, detail::signed_k_integral(density, kn, spec)).first;
            total += it->second.scaled(scale * stack.segments()[n].width);
        }
        return total;
    }

    /// Traversal time of the positive-momentum components across a stack and
    /// its split into partial (k between kappa_n and kappa_max) and
    /// above-barrier (k > kappa_max) parts. tau_trav is integrated separately
    /// from the split so additivity is a genuine check.
    inline TraversalReport traversal_time(const MomentumDensity &density, const BarrierStack &stack,
                                          const QuadSpec &spec = {})
    {
        spec.validate();
        const UnitSystem &units = stack.units();
        const double scale = units.time_scale();
        const double kmax = stack.kappa_max();
        const double inf = std::numeric_limits<double>::infinity();

        TraversalReport report;
        report.v0 = units.speed(density.carrier_k0());
        report.L = stack.comparison_length();
        report.regime = classify_regime(density, stack.kappa_min(), kmax);
        auto &diag = report.diagnostics;
        if (density.support().lo < 0.0 && density.raw(0.0) > density.norm_tail_eps() * density.raw(density.carrier_k0()))
            diag.warnings.push_back("density has non-negligible mass at k <= 0; excluded from tau_trav");

        struct Parts
        {
            QuadResult full, part, non;
        };
        std::map<double, Parts> cache;
        for (std::size_t n = 0; n < stack.size(); ++n) {
            const double kn = stack.kappa(n);
            auto it = cache.find(kn);
            if (it == cache.end()) {
                Parts p;
                p.full = detail::density_k_integral(density, kn, kn, inf, spec);
                if (kn < kmax)
                    p.part = detail::density_k_integral(density, kn, kn, kmax, spec);
                p.non = detail::density_k_integral(density, kn, kmax, inf, spec);
                detail::note_convergence(diag, p.full, "tau_trav");
                detail::note_convergence(diag, p.part, "tau_part");
                detail::note_convergence(diag, p.non, "tau_non");
                it = cache.emplace(kn, p).first;
            }
            const double w = scale * stack.segments()[n].width;
            report.tau_trav += w * it->second.full.value;
            report.tau_part += w * it->second.part.value;
            report.tau_non += w * it->second.non.value;
            diag.err_trav += w * it->second.full.error_estimate;
            diag.err_part += w * it->second.part.error_estimate;
            diag.err_non += w * it->second.non.error_estimate;
        }

        const QuadResult dwell = dwell_time(density, stack, spec);
        detail::note_convergence(diag, dwell, "tau_dwell");
        report.tau_dwell = dwell.value;
        diag.err_dwell = dwell.error_estimate;
        return report;
    }

    /// Which k range the inner integral of the continuous-barrier form covers.
    enum class InnerRange
    {
        below_max, ///< [kappa(x), kappa_max]: partial traversal
        above_max, ///< [kappa_max, inf): above-barrier traversal
        full,      ///< [kappa(x), inf): total traversal
        signed_full ///< [kappa(x), inf) of rho(k) - rho(-k): dwell
    };

    namespace detail
    {
        // x positions where kappa(x) crosses target, by scan plus bisection.
        inline std::vector<double> kappa_crossings(const SmoothBarrier &smooth, double target)
        {
            std::vector<double> out;
            if (!(target > 0.0))
                return out;
            constexpr int samples = 1024;
            const Interval s = smooth.support();
            const double h = s.width() / samples;
            double x_prev = s.lo;
            double f_prev = smooth.kappa(x_prev) - target;
            for (int i = 1; i <= samples; ++i) {
                const double x = (i == samples) ? s.hi : s.lo + i * h;
                const double f = smooth.kappa(x) - target;
                if ((f_prev < 0.0) != (f < 0.0)) {
                    double lo = x_prev, hi = x;
                    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::abs(hi); ++it) {
                        const double mid = 0.5 * (lo + hi);
                        ((smooth.kappa(mid) - target < 0.0) == (f_prev < 0.0) ? lo : hi) = mid;
                    }
                    out.push_back(0.5 * (lo + hi));
                }
                x_prev = x;
                f_prev = f;
            }
            return out;
        }
    }

    /// Double integral int_b^a dx int dk rho(k) / sqrt(k^2 - kappa(x)^2) over the
    /// chosen inner range. The outer x panels are split at the barrier maximum
    /// and wherever kappa(x) meets a density support edge; each inner integral
    /// uses the cosh substitution with kappa = kappa(x).
    inline QuadResult integrate_2d_xk(const SmoothBarrier &smooth, const MomentumDensity &density, InnerRange range,
                                      const QuadSpec &spec = {})
    {
        const double kmax = smooth.kappa_max();
        const double inf = std::numeric_limits<double>::infinity();
        const Interval s = smooth.support();
        if (range == InnerRange::below_max && !(kmax > 0.0))
            return {};

        std::vector<double> interior{smooth.argmax()};
        for (double target : {density.support().lo, density.support().hi}) {
            const auto xs = detail::kappa_crossings(smooth, target);
            interior.insert(interior.end(), xs.begin(), xs.end());
        }
        const auto pts = detail::make_breaks(s.lo, s.hi, interior);

        const QuadSpec inner_spec = spec.tightened(1e-2);
        double inner_err_max = 0.0;
        std::size_t inner_evals = 0;
        bool inner_ok = true;
        auto inner = [&](double x) {
            const double kx = std::min(smooth.kappa(x), kmax);
            QuadResult r;
            switch (range) {
            case InnerRange::below_max: r = detail::density_k_integral(density, kx, kx, kmax, inner_spec); break;
            case InnerRange::above_max: r = detail::density_k_integral(density, kx, kmax, inf, inner_spec); break;
            case InnerRange::full: r = detail::density_k_integral(density, kx, kx, inf, inner_spec); break;
            case InnerRange::signed_full: r = detail::signed_k_integral(density, kx, inner_spec); break;
            }
            inner_err_max = std::max(inner_err_max, r.error_estimate);
            inner_evals += r.evaluations;
            inner_ok = inner_ok && r.converged;
            return r.value;
        };
        QuadResult out = integrate_adaptive(inner, std::span<const double>(pts), spec);
        out.error_estimate += inner_err_max * s.width();
        out.evaluations += inner_evals;
        out.converged = out.converged && inner_ok;
        return out;
    }

    /// Continuous-barrier traversal time: tau = (mass / hbar) int dx int dk ...,
    /// equivalently (L / v0) (R_part + R_non).
    inline TraversalReport traversal_time_smooth(const MomentumDensity &density, const SmoothBarrier &smooth,
                                                 const QuadSpec &spec = {})
    {
        spec.validate();
        const UnitSystem &units = smooth.units();
        const double scale = units.time_scale();
        TraversalReport report;
        report.v0 = units.speed(density.carrier_k0());
        report.L = smooth.comparison_length();
        report.regime = classify_regime(density, smooth.kappa_min(), smooth.kappa_max());
        auto &diag = report.diagnostics;

        const QuadResult full = integrate_2d_xk(smooth, density, InnerRange::full, spec);
        const QuadResult part = integrate_2d_xk(smooth, density, InnerRange::below_max, spec);
        const QuadResult non = integrate_2d_xk(smooth, density, InnerRange::above_max, spec);
        const QuadResult dwell = integrate_2d_xk(smooth, density, InnerRange::signed_full, spec);
        detail::note_convergence(diag, full, "tau_trav");
        detail::note_convergence(diag, part, "tau_part");
        detail::note_convergence(diag, non, "tau_non");
        detail::note_convergence(diag, dwell, "tau_dwell");

        report.tau_trav = scale * full.value;
        report.tau_part = scale * part.value;
        report.tau_non = scale * non.value;
        report.tau_dwell = scale * dwell.value;
        diag.err_trav = scale * full.error_estimate;
        diag.err_part = scale * part.error_estimate;
        diag.err_non = scale * non.error_estimate;
        diag.err_dwell = scale * dwell.error_estimate;
        return report;
    }

    /// Classical crossing time of a stack at wavenumber k:
    /// sum_n w_n mass / (hbar sqrt(k^2 - kappa_n^2)).
    inline double classical_traversal(const BarrierStack &stack, double k)
    {
        if (!(k > stack.kappa_max()))
            throw Error("classically forbidden: energy at or below a segment height");
        const UnitSystem &u = stack.units();
        double t = 0.0;
        for (std::size_t n = 0; n < stack.size(); ++n) {
            const double kn = stack.kappa(n);
            t += stack.segments()[n].width * u.mass / (u.hbar * std::sqrt((k - kn) * (k + kn)));
        }
        return t;
    }

    struct ClassicalNonReport
    {
        /// int_{kappa_max}^inf rho(k) t_classical(k) dk, with t_classical the
        /// stack's classical crossing time.
        QuadResult tau_non;
        /// The alternative form weighting rho(k) by hbar sqrt(k^2 - kappa_n^2) / mass
        /// (a speed, not a time) with prefactor mass w_n / (hbar k0).
        double speed_weighted_variant = 0.0;
        double relative_discrepancy = 0.0;
    };

    /// Above-barrier traversal time as the density-averaged classical crossing
    /// time over k > kappa_max. Mass below kappa_max is ignored.
    inline ClassicalNonReport tau_non_classical_form(const MomentumDensity &density, const BarrierStack &stack,
                                                     const QuadSpec &spec = {})
    {
        const UnitSystem &u = stack.units();
        const double kmax = stack.kappa_max();
        const Interval range = Interval{kmax, std::numeric_limits<double>::infinity()}.intersect(density.support());
        ClassicalNonReport out;
        if (range.empty())
            return out;

        // rho(k) t_classical(k) sqrt(k^2 - kmax^2); finite at k = kmax.
        auto regular = [&](double k) {
            const double root_max = std::sqrt((k - kmax) * (k + kmax));
            double sum = 0.0;
            for (std::size_t n = 0; n < stack.size(); ++n) {
                const double kn = stack.kappa(n);
                const double ratio = (kn == kmax) ? 1.0 : root_max / std::sqrt((k - kn) * (k + kn));
                sum += stack.segments()[n].width * ratio;
            }
            return density.raw(k) * sum * u.mass / u.hbar;
        };
        out.tau_non = integrate_sqrt_singular(regular, kmax, range.lo, range.hi, spec);

        double variant = 0.0;
        const double k0 = density.carrier_k0();
        for (std::size_t n = 0; n < stack.size(); ++n) {
            const double kn = stack.kappa(n);
            const QuadResult r = integrate_adaptive(
                [&](double k) { return density.raw(k) * u.hbar * std::sqrt((k - kn) * (k + kn)) / u.mass; },
                range.lo, range.hi, spec);
            variant += u.mass * stack.segments()[n].width / (u.hbar * k0) * r.value;
        }
        out.speed_weighted_variant = variant;
        out.relative_discrepancy = out.tau_non.value != 0.0
            ? std::abs(variant - out.tau_non.value) / std::abs(out.tau_non.value)
            : 0.0;
        return out;
    }

    struct ScanPoint
    {
        double field = 0.0;
        std::optional<AttoclockGeometry> geometry;
        std::optional<TraversalReport> report;
        std::string warning;
    };

    struct ScanResult
    {
        std::vector<ScanPoint> points;
        /// tau_part strictly decreasing over the successfully evaluated fields
        /// (taken in increasing field order).
        bool tau_part_strictly_decreasing = true;
        std::vector<std::string> warnings;
    };

    /// Partial traversal time of the shifted attoclock barrier across field
    /// strengths. Over-barrier fields are skipped with a warning; points are
    /// evaluated concurrently and returned in input order.
    inline ScanResult attoclock_scan(const AttoclockBarrier &bar_template, const std::vector<double> &fields,
                                     const MomentumDensity &density, const UnitSystem &units = {},
                                     const QuadSpec &spec = {})
    {
        std::vector<std::future<ScanPoint>> jobs;
        jobs.reserve(fields.size());
        for (double e : fields) {
            jobs.push_back(std::async(std::launch::async, [&, e] {
                ScanPoint p;
                p.field = e;
                AttoclockBarrier bar = bar_template;
                bar.field = e;
                try {
                    p.geometry = attoclock_geometry(bar);
                    p.report = traversal_time_smooth(density, attoclock_to_smooth(bar, units), spec);
                } catch (const Error &err) {
                    p.geometry.reset();
                    p.report.reset();
                    p.warning = "field " + std::to_string(e) + " skipped: " + err.what();
                }
                return p;
            }));
        }
        ScanResult result;
        for (auto &j : jobs) {
            result.points.push_back(j.get());
            if (!result.points.back().warning.empty())
                result.warnings.push_back(result.points.back().warning);
        }

        std::vector<std::pair<double, double>> series;
        for (const auto &p : result.points)
            if (p.report)
                series.emplace_back(p.field, p.report->tau_part);
        std::sort(series.begin(), series.end());
        for (std::size_t i = 1; i < series.size(); ++i)
            if (!(series[i].second < series[i - 1].second))
                result.tau_part_strictly_decreasing = false;
        if (!result.tau_part_strictly_decreasing)
            result.warnings.push_back("tau_part is not strictly decreasing in field strength");
        return result;
    }
}
