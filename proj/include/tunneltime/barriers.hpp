#pragma once

#include "tunneltime/units.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

namespace tunneltime
{
    /// kappa = sqrt(2 mass V) / hbar; the barrier height as a wavenumber.
    inline double kappa_from_height(double height, const UnitSystem &units)
    {
        if (!(height >= 0.0))
            throw Error("barrier height must be non-negative");
        return std::sqrt(2.0 * units.mass * height) / units.hbar;
    }

    struct Segment
    {
        double height = 0.0;
        double width = 0.0;

        bool operator==(const Segment &) const = default;
    };

    /// Contiguous piecewise-constant barriers occupying [-a, -b], listed from
    /// the far (left, starting at -a) segment to the near one ending at -b.
    /// The arrival point is the origin.
    class BarrierStack
    {
    public:
        BarrierStack(std::vector<Segment> segments, double right_edge, UnitSystem units = {})
            : segments_(std::move(segments)), right_edge_(right_edge), units_(units)
        {
            units_.validate();
            if (segments_.empty())
                throw Error("barrier stack needs at least one segment");
            if (!(right_edge_ > 0.0) || !std::isfinite(right_edge_))
                throw Error("barrier.b must be positive");
            kappas_.reserve(segments_.size());
            for (const auto &s : segments_) {
                if (!(s.width > 0.0) || !std::isfinite(s.width))
                    throw Error("barrier segment widths must be positive");
                if (!(s.height >= 0.0) || !std::isfinite(s.height))
                    throw Error("barrier segment heights must be non-negative");
                kappas_.push_back(kappa_from_height(s.height, units_));
                total_width_ += s.width;
            }
        }

        const std::vector<Segment> &segments() const { return segments_; }
        std::size_t size() const { return segments_.size(); }
        const UnitSystem &units() const { return units_; }

        double kappa(std::size_t n) const { return kappas_.at(n); }
        const std::vector<double> &kappas() const { return kappas_; }
        double kappa_max() const { return *std::max_element(kappas_.begin(), kappas_.end()); }
        double kappa_min() const { return *std::min_element(kappas_.begin(), kappas_.end()); }

        /// b: distance from the near edge to the arrival point.
        double right_edge() const { return right_edge_; }
        /// a = b + sum w_n.
        double left_edge() const { return right_edge_ + total_width_; }
        double total_width() const { return total_width_; }
        /// Free-flight comparison length L, the extent of the barrier region.
        double comparison_length() const { return total_width_; }

        /// Position (q) of the left edge of segment n.
        double segment_start(std::size_t n) const
        {
            double q = -left_edge();
            for (std::size_t i = 0; i < n; ++i)
                q += segments_[i].width;
            return q;
        }

        /// V(q), zero outside [-a, -b].
        double potential(double q) const
        {
            double edge = -left_edge();
            if (q < edge)
                return 0.0;
            for (const auto &s : segments_) {
                edge += s.width;
                if (q < edge)
                    return s.height;
            }
            return 0.0;
        }

        /// Segment edges in q, left to right (-a ... -b).
        std::vector<double> edges() const
        {
            std::vector<double> out{-left_edge()};
            for (const auto &s : segments_)
                out.push_back(out.back() + s.width);
            out.back() = -right_edge_;
            return out;
        }

        /// 2 mass (V2 - V1) / hbar^2 for a two-segment stack (1 = far, 2 = near).
        double kappa21_squared() const
        {
            if (segments_.size() != 2)
                throw Error("kappa21 requires a two-segment stack");
            return 2.0 * units_.mass * (segments_[1].height - segments_[0].height) / (units_.hbar * units_.hbar);
        }

    private:
        std::vector<Segment> segments_;
        double right_edge_;
        UnitSystem units_;
        std::vector<double> kappas_;
        double total_width_ = 0.0;
    };

    inline double kappa(const BarrierStack &stack, std::size_t n) { return stack.kappa(n); }

    /// Continuous barrier V(x) >= 0 on x in [b, a], where x is the distance
    /// to the left of the arrival point (q = -x). V is zero outside.
    class SmoothBarrier
    {
    public:
        SmoothBarrier(std::function<double(double)> profile, Interval support, UnitSystem units = {})
            : profile_(std::move(profile)), support_(support), units_(units)
        {
            units_.validate();
            if (!(support_.lo > 0.0) || support_.empty() || !std::isfinite(support_.hi))
                throw Error("smooth barrier support must satisfy 0 < b < a");
            scan();
        }

        double potential(double x) const
        {
            if (!support_.contains(x))
                return 0.0;
            return std::max(0.0, profile_(x));
        }

        double kappa(double x) const
        {
            return std::sqrt(2.0 * units_.mass * potential(x)) / units_.hbar;
        }

        const Interval &support() const { return support_; }
        const UnitSystem &units() const { return units_; }
        double v_max() const { return v_max_; }
        double argmax() const { return x_max_; }
        double v_min() const { return v_min_; }
        double kappa_max() const { return kappa_from_height(v_max_, units_); }
        /// Smallest kappa over the closed support; zero for profiles vanishing at an edge.
        double kappa_min() const { return kappa_from_height(v_min_, units_); }
        /// L = a - b.
        double comparison_length() const { return support_.width(); }

    private:
        void scan()
        {
            constexpr int samples = 4096;
            const double h = support_.width() / samples;
            double best = -1.0;
            int best_i = 0;
            v_min_ = std::numeric_limits<double>::infinity();
            for (int i = 0; i <= samples; ++i) {
                const double x = support_.lo + i * h;
                const double v = profile_(x);
                if (!std::isfinite(v) || v < -1e-12 * std::max(1.0, std::abs(best)))
                    throw Error("smooth barrier profile must be finite and non-negative on its support");
                if (v > best) {
                    best = v;
                    best_i = i;
                }
                v_min_ = std::min(v_min_, std::max(0.0, v));
            }
            // Golden-section refinement around the sampled maximum.
            double lo = support_.lo + std::max(0, best_i - 1) * h;
            double hi = support_.lo + std::min(samples, best_i + 1) * h;
            const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
            for (int it = 0; it < 100 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
                const double m1 = hi - ratio * (hi - lo);
                const double m2 = lo + ratio * (hi - lo);
                if (profile_(m1) < profile_(m2))
                    lo = m1;
                else
                    hi = m2;
            }
            const double x = 0.5 * (lo + hi);
            const double refined = profile_(x);
            if (refined >= best) {
                x_max_ = x;
                v_max_ = refined;
            } else {
                x_max_ = support_.lo + best_i * h;
                v_max_ = best;
            }
            v_max_ = std::max(0.0, v_max_);
        }

        std::function<double(double)> profile_;
        Interval support_;
        UnitSystem units_;
        double v_max_ = 0.0;
        double x_max_ = 0.0;
        double v_min_ = 0.0;
    };

    namespace profiles
    {
        /// Gaussian centred on the support, shifted and rescaled so it vanishes
        /// at both edges and peaks at height.
        inline std::function<double(double)> gaussian_bump(double height, Interval support, double width)
        {
            if (!(width > 0.0))
                throw Error("gaussian profile width must be positive");
            const double centre = 0.5 * (support.lo + support.hi);
            const double half = 0.5 * support.width();
            const double floor = std::exp(-half * half / (2.0 * width * width));
            return [=](double x) {
                const double d = x - centre;
                const double g = std::exp(-d * d / (2.0 * width * width));
                return height * std::max(0.0, g - floor) / (1.0 - floor);
            };
        }

        /// height * cos^2 bump, zero at both edges.
        inline std::function<double(double)> cosine_bump(double height, Interval support)
        {
            const double centre = 0.5 * (support.lo + support.hi);
            const double half = 0.5 * support.width();
            return [=](double x) {
                const double c = std::cos(0.5 * std::numbers::pi * (x - centre) / half);
                return height * c * c;
            };
        }

        inline std::function<double(double)> constant(double height)
        {
            return [=](double) { return height; };
        }

        /// Piecewise-linear interpolation through (x, V) samples sorted by x.
        inline std::function<double(double)> sampled(std::vector<std::pair<double, double>> samples)
        {
            if (samples.size() < 2)
                throw Error("sampled profile needs at least two points");
            std::sort(samples.begin(), samples.end());
            return [s = std::move(samples)](double x) {
                if (x <= s.front().first)
                    return s.front().second;
                if (x >= s.back().first)
                    return s.back().second;
                auto it = std::upper_bound(s.begin(), s.end(), std::pair<double, double>{x, -1e300},
                                           [](const auto &l, const auto &r) { return l.first < r.first; });
                const auto &[x1, v1] = *it;
                const auto &[x0, v0] = *(it - 1);
                return v0 + (v1 - v0) * (x - x0) / (x1 - x0);
            };
        }
    }

    /// Midpoint-sampled stack of n equal-width segments (far edge first).
    inline BarrierStack discretize(const SmoothBarrier &smooth, std::size_t n_segments)
    {
        if (n_segments < 1)
            throw Error("discretize: n_segments must be >= 1");
        const Interval s = smooth.support();
        const double h = s.width() / static_cast<double>(n_segments);
        std::vector<Segment> segments;
        segments.reserve(n_segments);
        for (std::size_t i = 0; i < n_segments; ++i) {
            const double x_mid = s.hi - (static_cast<double>(i) + 0.5) * h;
            segments.push_back({smooth.potential(x_mid), h});
        }
        return BarrierStack(std::move(segments), s.lo, smooth.units());
    }

    /// Field-tilted Coulomb barrier V_eff(q) = -z_eff / q - field q (atomic units).
    struct AttoclockBarrier
    {
        double z_eff = 1.6875;
        double i_p = 0.90357;
        double field = 0.05;

        double v_eff(double q) const { return -z_eff / q - field * q; }
        /// Field at which the barrier top drops to the bound level -i_p.
        double threshold_field() const { return i_p * i_p / (4.0 * z_eff); }

        void validate() const
        {
            if (!(z_eff > 0.0) || !(i_p > 0.0) || !(field > 0.0))
                throw Error("attoclock z_eff, i_p and field must be positive");
        }

        bool operator==(const AttoclockBarrier &) const = default;
    };

    struct AttoclockGeometry
    {
        double d_minus;
        double d_plus;
        /// Classical exit d = i_p / field.
        double d_exit;
    };

    /// Turning points d-+ = [i_p -+ sqrt(i_p^2 - 4 E z)] / (2E), the roots of
    /// E q^2 - i_p q + z = 0. d- uses the cancellation-free form 2z / (i_p + root).
    inline AttoclockGeometry attoclock_geometry(const AttoclockBarrier &bar)
    {
        bar.validate();
        double disc = bar.i_p * bar.i_p - 4.0 * bar.field * bar.z_eff;
        if (disc < 0.0) {
            if (disc < -1e-14 * bar.i_p * bar.i_p)
                throw Error("over-barrier field; no tunneling geometry");
            disc = 0.0;
        }
        const double root = std::sqrt(disc);
        const double d_plus = (bar.i_p + root) / (2.0 * bar.field);
        const double d_minus = 2.0 * bar.z_eff / (bar.i_p + root);
        return {d_minus, d_plus, bar.i_p / bar.field};
    }

    /// Barrier on [d-, d+] with energies measured from the bound level:
    /// V(x) = V_eff(x) + i_p, clamped at zero.
    inline SmoothBarrier attoclock_to_smooth(const AttoclockBarrier &bar, UnitSystem units = {})
    {
        const auto geo = attoclock_geometry(bar);
        if (!(geo.d_plus > geo.d_minus))
            throw Error("over-barrier field; barrier has zero width");
        return SmoothBarrier([bar](double x) { return std::max(0.0, bar.v_eff(x) + bar.i_p); },
                             {geo.d_minus, geo.d_plus}, units);
    }
}
