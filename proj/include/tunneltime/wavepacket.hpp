#pragma once

#include "tunneltime/quadrature.hpp"
#include "tunneltime/units.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <string_view>
#include <utility>

namespace tunneltime
{
    /// Incident state psi(q) = exp(i k0 q) phi(q) with the unit-norm envelope
    /// phi(q) = (2 pi sigma^2)^(-1/4) exp(-(q - q0)^2 / (4 sigma^2)).
    /// k0 is a wavenumber, so it compares directly with barrier kappas.
    class GaussianPacket
    {
    public:
        GaussianPacket(double q0, double sigma, double k0) : q0_(q0), sigma_(sigma), k0_(k0)
        {
            if (!std::isfinite(q0))
                throw Error("packet.q0 must be finite");
            if (!(sigma > 0.0) || !std::isfinite(sigma))
                throw Error("packet.sigma must be positive");
            if (!(k0 > 0.0) || !std::isfinite(k0))
                throw Error("packet.k0 must be positive");
        }

        double q0() const { return q0_; }
        double sigma() const { return sigma_; }
        double k0() const { return k0_; }
        /// Standard deviation of |psi~(k)|^2.
        double momentum_width() const { return 0.5 / sigma_; }

        double envelope(double q) const
        {
            const double d = q - q0_;
            return std::pow(2.0 * std::numbers::pi * sigma_ * sigma_, -0.25) * std::exp(-d * d / (4.0 * sigma_ * sigma_));
        }

        std::complex<double> psi(double q) const
        {
            return std::polar(envelope(q), k0_ * q);
        }

        /// |psi~(k)|^2 with psi~(k) = (2 pi)^(-1/2) int exp(-ikq) psi(q) dq.
        double momentum_density(double k) const
        {
            const double d = k - k0_;
            return sigma_ * std::sqrt(2.0 / std::numbers::pi) * std::exp(-2.0 * sigma_ * sigma_ * d * d);
        }

        /// Phi(zeta) = int phi(eta - zeta/2) phi(eta + zeta/2) d eta.
        double autocorrelation(double zeta) const
        {
            return std::exp(-zeta * zeta / (8.0 * sigma_ * sigma_));
        }

        /// True when q0 + n_sigmas sigma lies left of the barrier's far edge -a.
        bool left_of(double far_edge_distance, double n_sigmas = 8.0) const
        {
            return q0_ + n_sigmas * sigma_ < -far_edge_distance;
        }

        bool operator==(const GaussianPacket &) const = default;

    private:
        double q0_;
        double sigma_;
        double k0_;
    };

    inline double momentum_density(const GaussianPacket &packet, double k) { return packet.momentum_density(k); }
    inline double autocorrelation(const GaussianPacket &packet, double zeta) { return packet.autocorrelation(zeta); }

    /// Momentum density k -> |psi~(k)|^2 with a finite support.
    ///
    /// Outside support() the density is treated as exactly zero. For smooth
    /// (Gaussian) densities the support is where the density exceeds
    /// norm_tail_eps times its maximum; hard-edged densities come from
    /// truncate(). carrier_k0 is the wavenumber entering v0 = hbar k0 / mass.
    class MomentumDensity
    {
    public:
        MomentumDensity(std::function<double(double)> fn, Interval support, double carrier_k0,
                        double norm_tail_eps = 1e-12, bool hard_edges = false)
            : fn_(std::move(fn)), support_(support), carrier_k0_(carrier_k0), norm_tail_eps_(norm_tail_eps),
              hard_edges_(hard_edges)
        {
            if (support_.empty())
                throw Error("momentum density support is empty");
            if (!(carrier_k0 > 0.0))
                throw Error("momentum density carrier k0 must be positive");
        }

        static MomentumDensity from_packet(const GaussianPacket &packet, double norm_tail_eps = 1e-12)
        {
            if (!(norm_tail_eps > 0.0 && norm_tail_eps < 1.0))
                throw Error("packet.norm_tail_eps must lie in (0, 1)");
            const double half = std::sqrt(std::log(1.0 / norm_tail_eps) / 2.0) / packet.sigma();
            return MomentumDensity([packet](double k) { return packet.momentum_density(k); },
                                   {packet.k0() - half, packet.k0() + half}, packet.k0(), norm_tail_eps);
        }

        double operator()(double k) const { return support_.contains(k) ? fn_(k) : 0.0; }
        /// Underlying function, ignoring the support cut.
        double raw(double k) const { return fn_(k); }

        const Interval &support() const { return support_; }
        double carrier_k0() const { return carrier_k0_; }
        double norm_tail_eps() const { return norm_tail_eps_; }
        bool hard_edges() const { return hard_edges_; }

        /// Integral over the support; 1 for a normalized density.
        QuadResult norm(const QuadSpec &spec = {}) const
        {
            return integrate_adaptive([this](double k) { return fn_(k); }, support_.lo, support_.hi, spec);
        }

    private:
        std::function<double(double)> fn_;
        Interval support_;
        double carrier_k0_;
        double norm_tail_eps_;
        bool hard_edges_;
    };

    /// Hard-truncated, renormalized density: identically zero outside band.
    struct TruncatedMomentumDensity
    {
        MomentumDensity base;
        Interval band;
        double renorm;
        MomentumDensity density;

        operator const MomentumDensity &() const { return density; }
    };

    /// Restricts a density to band (intersected with its support) and
    /// rescales it to unit integral. renorm is the applied scale factor.
    inline TruncatedMomentumDensity truncate(const MomentumDensity &base, Interval band, const QuadSpec &spec = {})
    {
        if (band.empty())
            throw Error("empty truncation: band has zero measure");
        if (band.lo < 0.0)
            throw Error("truncation band must lie in k >= 0");
        const Interval kept = band.intersect(base.support());
        if (kept.empty())
            throw Error("empty truncation: band lies outside the density support");
        const QuadResult mass = integrate_adaptive([&base](double k) { return base.raw(k); }, kept.lo, kept.hi, spec);
        if (!(mass.value > 0.0))
            throw Error("empty truncation: no probability mass in band");
        const double renorm = 1.0 / mass.value;
        MomentumDensity density([base, renorm](double k) { return renorm * base.raw(k); }, kept, base.carrier_k0(),
                                base.norm_tail_eps(), true);
        return {base, band, renorm, std::move(density)};
    }

    enum class Regime { non_tunneling, partial_tunneling, full_tunneling, mixed };

    inline std::string_view to_string(Regime r)
    {
        switch (r) {
        case Regime::non_tunneling: return "NonTunneling";
        case Regime::partial_tunneling: return "PartialTunneling";
        case Regime::full_tunneling: return "FullTunneling";
        case Regime::mixed: return "Mixed";
        }
        return "Unknown";
    }

    /// Classifies the positive-k part of the density support against the
    /// barrier's kappa range. Only the support endpoints matter, so any
    /// rescaling of the density leaves the result unchanged.
    inline Regime classify_regime(const Interval &support, double kappa_min, double kappa_max)
    {
        if (!(kappa_min >= 0.0) || !(kappa_max >= kappa_min))
            throw Error("classify_regime: requires 0 <= kappa_min <= kappa_max");
        const Interval s{std::max(support.lo, 0.0), support.hi};
        if (s.empty())
            return Regime::full_tunneling;
        const bool below = s.lo < kappa_min;
        const bool between = std::max(s.lo, kappa_min) < std::min(s.hi, kappa_max);
        const bool above = s.hi > kappa_max;
        if (!between && !above)
            return Regime::full_tunneling;
        if (!below && !between)
            return Regime::non_tunneling;
        if (between && !above)
            return Regime::partial_tunneling;
        return Regime::mixed;
    }

    inline Regime classify_regime(const MomentumDensity &density, double kappa_min, double kappa_max)
    {
        return classify_regime(density.support(), kappa_min, kappa_max);
    }
}
