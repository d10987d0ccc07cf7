#pragma once

#include "tunneltime/special_functions.hpp"
#include "tunneltime/units.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <type_traits>
#include <vector>

namespace tunneltime
{
    /// Tolerances shared by every integration routine.
    struct QuadSpec
    {
        double rel_tol = 1e-9;
        double abs_tol = 1e-12;
        int max_subdivisions = 2000;
        /// Semi-infinite ranges are cut where the integrand (or damping
        /// envelope) falls below tail_eps times its running maximum.
        double tail_eps = 1e-16;

        void validate() const
        {
            if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
                throw Error("quad tolerances must be positive");
            if (max_subdivisions < 1)
                throw Error("quad.max_subdivisions must be >= 1");
            if (!(tail_eps > 0.0) || tail_eps >= 1.0)
                throw Error("quad.tail_eps must lie in (0, 1)");
        }

        /// Copy with both tolerances scaled, used for nested inner integrals.
        QuadSpec tightened(double factor) const
        {
            QuadSpec inner = *this;
            inner.rel_tol *= factor;
            inner.abs_tol *= factor;
            return inner;
        }

        bool operator==(const QuadSpec &) const = default;
    };

    template <class T>
    struct BasicQuadResult
    {
        T value{};
        double error_estimate = 0.0;
        std::size_t evaluations = 0;
        bool converged = true;

        BasicQuadResult &operator+=(const BasicQuadResult &other)
        {
            value += other.value;
            error_estimate += other.error_estimate;
            evaluations += other.evaluations;
            converged = converged && other.converged;
            return *this;
        }

        BasicQuadResult scaled(double factor) const
        {
            BasicQuadResult out = *this;
            out.value *= factor;
            out.error_estimate *= std::abs(factor);
            return out;
        }
    };

    using QuadResult = BasicQuadResult<double>;
    using ComplexQuadResult = BasicQuadResult<std::complex<double>>;

    namespace detail
    {
        inline constexpr double gk21_nodes[11] = {
            0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
            0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
            0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
            0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
            0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
            0.0};
        inline constexpr double gk21_kronrod_weights[11] = {
            0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
            0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
            0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
            0.123491976262065851077600525636400, 0.134709217311473325928054001771707,
            0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
            0.149445554002916905664936468389821};
        inline constexpr double g10_weights[5] = {
            0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
            0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
            0.295524224714752870173892994651338};

        template <class T>
        struct Panel
        {
            double a;
            double b;
            T value;
            double error;
        };

        // One Gauss-Kronrod 21-point panel with the QUADPACK error heuristic.
        template <class T, class F>
        Panel<T> gk21(F &f, double a, double b)
        {
            constexpr double eps = std::numeric_limits<double>::epsilon();
            const double center = 0.5 * (a + b);
            const double half = 0.5 * (b - a);
            const double abs_half = std::abs(half);

            T fv1[10], fv2[10];
            const T fc = static_cast<T>(f(center));
            T res_k = fc * gk21_kronrod_weights[10];
            T res_g{};
            double res_abs = gk21_kronrod_weights[10] * std::abs(fc);
            for (int j = 0; j < 10; ++j) {
                const double dx = half * gk21_nodes[j];
                const T f1 = static_cast<T>(f(center - dx));
                const T f2 = static_cast<T>(f(center + dx));
                fv1[j] = f1;
                fv2[j] = f2;
                res_k += gk21_kronrod_weights[j] * (f1 + f2);
                res_abs += gk21_kronrod_weights[j] * (std::abs(f1) + std::abs(f2));
                if (j % 2 == 1)
                    res_g += g10_weights[j / 2] * (f1 + f2);
            }
            const T mean = res_k * 0.5;
            double res_asc = gk21_kronrod_weights[10] * std::abs(fc - mean);
            for (int j = 0; j < 10; ++j)
                res_asc += gk21_kronrod_weights[j] * (std::abs(fv1[j] - mean) + std::abs(fv2[j] - mean));

            const T result = res_k * half;
            res_abs *= abs_half;
            res_asc *= abs_half;
            double err = std::abs((res_k - res_g) * half);
            if (res_asc != 0.0 && err != 0.0)
                err = res_asc * std::min(1.0, std::pow(200.0 * err / res_asc, 1.5));
            if (res_abs > std::numeric_limits<double>::min() / (50.0 * eps))
                err = std::max(50.0 * eps * res_abs, err);
            return {a, b, result, err};
        }
    }

    /// Globally adaptive Gauss-Kronrod (21-point) integration of f over the
    /// sorted break list [p0, p1, ..., pn]. Each consecutive pair seeds one
    /// panel; the panel with the largest error is bisected until the total
    /// error meets max(rel_tol |I|, abs_tol) or max_subdivisions is spent.
    template <class F>
    auto integrate_adaptive(F &&f, std::span<const double> breaks, const QuadSpec &spec)
    {
        using T = std::decay_t<std::invoke_result_t<F &, double>>;
        using Panel = detail::Panel<T>;
        BasicQuadResult<T> out;
        std::vector<Panel> heap;
        auto by_error = [](const Panel &x, const Panel &y) { return x.error < y.error; };

        for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
            if (!(breaks[i + 1] > breaks[i]))
                continue;
            heap.push_back(detail::gk21<T>(f, breaks[i], breaks[i + 1]));
            out.evaluations += 21;
        }
        if (heap.empty())
            return out;
        std::make_heap(heap.begin(), heap.end(), by_error);

        auto totals = [&heap] {
            T value{};
            double error = 0.0;
            for (const auto &p : heap) {
                value += p.value;
                error += p.error;
            }
            return std::pair<T, double>{value, error};
        };

        auto [value, error] = totals();
        const std::size_t limit = heap.size() + static_cast<std::size_t>(spec.max_subdivisions);
        bool converged = error <= std::max(spec.rel_tol * std::abs(value), spec.abs_tol);
        bool roundoff_limited = false;
        while (!converged && heap.size() < limit) {
            std::pop_heap(heap.begin(), heap.end(), by_error);
            const Panel worst = heap.back();
            heap.pop_back();
            const double mid = 0.5 * (worst.a + worst.b);
            if (!(mid > worst.a && mid < worst.b)
                || (worst.b - worst.a) < 1e-14 * std::max(std::abs(worst.a), std::abs(worst.b))) {
                heap.push_back(worst);
                std::push_heap(heap.begin(), heap.end(), by_error);
                roundoff_limited = true;
                break;
            }
            const Panel left = detail::gk21<T>(f, worst.a, mid);
            const Panel right = detail::gk21<T>(f, mid, worst.b);
            out.evaluations += 42;
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            heap.push_back(left);
            std::push_heap(heap.begin(), heap.end(), by_error);
            heap.push_back(right);
            std::push_heap(heap.begin(), heap.end(), by_error);
            converged = error <= std::max(spec.rel_tol * std::abs(value), spec.abs_tol);
        }

        // Sum in break order for a result independent of heap layout.
        std::sort(heap.begin(), heap.end(), [](const Panel &x, const Panel &y) { return x.a < y.a; });
        std::tie(value, error) = totals();
        out.value = value;
        out.error_estimate = error;
        out.converged = !roundoff_limited
            && error <= std::max(spec.rel_tol * std::abs(value), spec.abs_tol) * (1.0 + 1e-12);
        return out;
    }

    template <class F>
    auto integrate_adaptive(F &&f, double a, double b, const QuadSpec &spec)
    {
        if (b < a) {
            const double pts[2] = {b, a};
            auto r = integrate_adaptive(std::forward<F>(f), std::span<const double>(pts), spec);
            r.value = -r.value;
            return r;
        }
        const double pts[2] = {a, b};
        return integrate_adaptive(std::forward<F>(f), std::span<const double>(pts), spec);
    }

    namespace detail
    {
        // Sorted break list over [lo, hi] with interior points kept only when
        // strictly inside.
        inline std::vector<double> make_breaks(double lo, double hi, std::span<const double> interior)
        {
            std::vector<double> pts{lo};
            for (double p : interior)
                if (p > lo && p < hi)
                    pts.push_back(p);
            pts.push_back(hi);
            std::sort(pts.begin(), pts.end());
            pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
            return pts;
        }

        // acosh(k / kappa) evaluated without cancellation near k = kappa.
        inline double acosh_ratio(double k, double kappa)
        {
            if (k <= kappa)
                return 0.0;
            return std::asinh(std::sqrt((k - kappa) * (k + kappa)) / kappa);
        }

        // Marches outward from start until |f| drops below tail_eps times the
        // running maximum, doubling the stride every 512 steps.
        template <class F>
        double find_tail_cutoff(F &f, double start, double scale, double tail_eps)
        {
            double step = std::max(scale, 1e-3) / 64.0;
            double k = start;
            double fmax = std::abs(f(start + 1e-12 * std::max(1.0, std::abs(start))));
            int below = 0;
            for (int i = 1; i < (1 << 22); ++i) {
                k += step;
                const double v = std::abs(f(k));
                fmax = std::max(fmax, v);
                if (fmax > 0.0 && v < tail_eps * fmax) {
                    if (++below >= 8)
                        return k;
                } else {
                    below = 0;
                }
                if (i % 512 == 0)
                    step *= 2.0;
            }
            return k;
        }
    }

    /// Integral of f(k) / sqrt(k^2 - kappa^2) over [lower, upper], lower >= kappa.
    ///
    /// Near the branch point (k < 2 kappa) the substitution k = kappa cosh u
    /// turns the measure into du and removes the inverse square root exactly;
    /// the remainder is integrated directly in k. kappa = 0 degenerates to
    /// f(k)/k, which needs f(0) = 0 or lower > 0; a mesh graded toward zero is
    /// used when lower == 0. An infinite upper limit is cut where |f| falls
    /// below spec.tail_eps of its maximum. Breaks (in k) mark kinks or jumps
    /// of f.
    template <class F>
    QuadResult integrate_sqrt_singular(F &&f, double kappa, double lower, double upper, const QuadSpec &spec,
                                       std::span<const double> breaks = {})
    {
        if (!(kappa >= 0.0))
            throw Error("integrate_sqrt_singular: kappa must be non-negative");
        lower = std::max(lower, kappa);
        if (std::isinf(upper))
            upper = detail::find_tail_cutoff(f, lower, std::max({1.0, kappa, std::abs(lower)}), spec.tail_eps);
        QuadResult out;
        if (!(upper > lower))
            return out;

        double split = lower;
        if (kappa > 0.0) {
            split = std::min(upper, std::max(lower, 2.0 * kappa));
            if (split > lower) {
                std::vector<double> ubreaks;
                for (double p : breaks)
                    if (p > lower && p < split)
                        ubreaks.push_back(detail::acosh_ratio(p, kappa));
                const auto pts = detail::make_breaks(detail::acosh_ratio(lower, kappa),
                                                     detail::acosh_ratio(split, kappa), ubreaks);
                out += integrate_adaptive([&](double u) { return static_cast<double>(f(kappa * std::cosh(u))); },
                                          std::span<const double>(pts), spec);
            }
        }
        if (upper > split) {
            std::vector<double> kbreaks(breaks.begin(), breaks.end());
            if (kappa == 0.0 && split == 0.0) {
                for (int j = 1; j <= 40; ++j)
                    kbreaks.push_back(upper * std::ldexp(1.0, -j));
            }
            const auto pts = detail::make_breaks(split, upper, kbreaks);
            out += integrate_adaptive(
                [&](double k) { return static_cast<double>(f(k)) / std::sqrt((k - kappa) * (k + kappa)); },
                std::span<const double>(pts), spec);
        }
        return out;
    }

    /// Integral of f(k) / sqrt(k^2 - kappa^2) from kappa to upper.
    template <class F>
    QuadResult integrate_sqrt_singular(F &&f, double kappa, double upper, const QuadSpec &spec)
    {
        return integrate_sqrt_singular(std::forward<F>(f), kappa, kappa, upper, spec);
    }

    /// Kernel multiplying the damped envelope in the zeta integrals.
    struct OscillatoryKernel
    {
        enum class Kind { plain, bessel_j0 };
        Kind kind = Kind::plain;
        double kappa = 0.0;

        static OscillatoryKernel plain() { return {}; }
        static OscillatoryKernel bessel(double kappa) { return {Kind::bessel_j0, kappa}; }

        double operator()(double zeta) const
        {
            return kind == Kind::plain ? 1.0 : bessel_j0(kappa * zeta);
        }
    };

    /// k0 * integral_0^inf phi(zeta) kernel(zeta) exp(i k0 zeta) dzeta for a
    /// monotonically decaying envelope phi.
    ///
    /// The range is cut where phi < tail_eps phi(0) and split into panels of
    /// one period 2 pi / (k0 + kappa), so every period carries at least one
    /// 21-node Kronrod panel before adaptive refinement.
    template <class Phi>
    ComplexQuadResult integrate_oscillatory_damped(Phi &&phi, OscillatoryKernel kernel, double k0,
                                                   const QuadSpec &spec)
    {
        if (!(k0 > 0.0))
            throw Error("integrate_oscillatory_damped: k0 must be positive");
        const double phi0 = std::abs(phi(0.0));
        ComplexQuadResult out;
        if (phi0 == 0.0)
            return out;
        const double period = 2.0 * std::numbers::pi / (k0 + std::abs(kernel.kappa));

        double hi = period;
        double lo = 0.0;
        while (std::abs(phi(hi)) >= spec.tail_eps * phi0) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e12)
                throw Error("integrate_oscillatory_damped: envelope does not decay");
        }
        for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
            const double mid = 0.5 * (lo + hi);
            (std::abs(phi(mid)) >= spec.tail_eps * phi0 ? lo : hi) = mid;
        }
        const double zeta_max = hi;

        const auto panels = static_cast<std::size_t>(std::ceil(zeta_max / period));
        std::vector<double> pts(panels + 1);
        for (std::size_t i = 0; i <= panels; ++i)
            pts[i] = std::min(zeta_max, static_cast<double>(i) * period);
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

        QuadSpec local = spec;
        local.max_subdivisions = spec.max_subdivisions + static_cast<int>(panels);
        out = integrate_adaptive(
            [&](double zeta) {
                return std::complex<double>(std::cos(k0 * zeta), std::sin(k0 * zeta)) * (phi(zeta) * kernel(zeta));
            },
            std::span<const double>(pts), local);
        return out.scaled(k0);
    }
}
