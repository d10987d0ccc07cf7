#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tunneltime
{
    /// Raised for invalid physical parameters or impossible geometries.
    class Error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Action and mass scales. Defaults are natural units (hbar = mass = 1).
    struct UnitSystem
    {
        double hbar = 1.0;
        double mass = 1.0;

        void validate() const
        {
            if (!(hbar > 0.0) || !std::isfinite(hbar))
                throw Error("units.hbar must be positive");
            if (!(mass > 0.0) || !std::isfinite(mass))
                throw Error("units.mass must be positive");
        }

        /// mass / hbar, the factor turning (length x length) into time.
        double time_scale() const { return mass / hbar; }
        double speed(double k) const { return hbar * k / mass; }

        bool operator==(const UnitSystem &) const = default;
    };

    /// Closed interval [lo, hi]; empty when hi <= lo.
    struct Interval
    {
        double lo = 0.0;
        double hi = 0.0;

        double width() const { return hi - lo; }
        bool empty() const { return !(hi > lo); }
        bool contains(double x) const { return x >= lo && x <= hi; }

        Interval intersect(const Interval &other) const
        {
            return {std::max(lo, other.lo), std::min(hi, other.hi)};
        }

        bool operator==(const Interval &) const = default;
    };
}
