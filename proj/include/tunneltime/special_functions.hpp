#pragma once

#include <cmath>
#include <numbers>

namespace tunneltime
{
    namespace detail
    {
        // Hankel asymptotic expansion coefficients a_k(0) = prod_{j<=k} (2j-1)^2 / (k! 8^k).
        // Terms are summed until they stop decreasing, which for x >= 25 leaves
        // a remainder far below double precision.
        inline void bessel_asymptotic_pq(double x, double &p, double &q)
        {
            p = 1.0;
            q = 0.0;
            double term = 1.0;
            double previous = 1.0;
            for (int k = 1; k < 200; ++k) {
                const double odd = 2.0 * k - 1.0;
                term *= odd * odd / (k * 8.0 * x);
                if (term > previous)
                    break;
                previous = term;
                // k odd contributes to Q (leading -1/(8x)), k even to P; signs
                // alternate in pairs.
                const int pair = k / 2;
                const double sign = (pair % 2 == 0) ? 1.0 : -1.0;
                if (k % 2 == 1)
                    q -= sign * term;
                else
                    p += sign * term;
                if (term < 1e-17)
                    break;
            }
        }

        inline double bessel_j0_series(double x)
        {
            const double z = -0.25 * x * x;
            double term = 1.0;
            double sum = 1.0;
            for (int k = 1; k < 200; ++k) {
                term *= z / (static_cast<double>(k) * k);
                sum += term;
                if (std::abs(term) < 1e-18 * std::abs(sum))
                    break;
            }
            return sum;
        }

        // Miller backward recurrence normalized by J0 + 2 sum J_{2k} = 1.
        inline double bessel_j0_miller(double x)
        {
            int start = static_cast<int>(x) + 40;
            if (start % 2 == 1)
                ++start;
            double j_next = 0.0;
            double j_curr = 1e-300;
            double norm = 0.0;
            double j0 = 0.0;
            for (int n = start; n >= 1; --n) {
                const double j_prev = 2.0 * n / x * j_curr - j_next;
                j_next = j_curr;
                j_curr = j_prev;
                if ((n - 1) % 2 == 0 && n - 1 > 0)
                    norm += 2.0 * j_curr;
                if (std::abs(j_curr) > 1e250) {
                    j_curr *= 1e-250;
                    j_next *= 1e-250;
                    norm *= 1e-250;
                }
            }
            j0 = j_curr;
            norm += j0;
            return j0 / norm;
        }
    }

    /// Bessel function of the first kind, order zero.
    inline double bessel_j0(double x)
    {
        x = std::abs(x);
        if (x <= 8.0)
            return detail::bessel_j0_series(x);
        if (x < 25.0)
            return detail::bessel_j0_miller(x);
        double p, q;
        detail::bessel_asymptotic_pq(x, p, q);
        const double chi = x - 0.25 * std::numbers::pi;
        return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
    }

    /// Modified Bessel function of the first kind, order zero.
    inline double bessel_i0(double x)
    {
        x = std::abs(x);
        if (x <= 30.0) {
            const double z = 0.25 * x * x;
            double term = 1.0;
            double sum = 1.0;
            for (int k = 1; k < 300; ++k) {
                term *= z / (static_cast<double>(k) * k);
                sum += term;
                if (term < 1e-17 * sum)
                    break;
            }
            return sum;
        }
        // All asymptotic terms are positive for I0.
        double sum = 1.0;
        double term = 1.0;
        for (int k = 1; k < 200; ++k) {
            const double odd = 2.0 * k - 1.0;
            const double next = term * odd * odd / (k * 8.0 * x);
            if (next > term)
                break;
            term = next;
            sum += term;
            if (term < 1e-17 * sum)
                break;
        }
        return std::exp(x) / std::sqrt(2.0 * std::numbers::pi * x) * sum;
    }

    /// Confluent limit 0F1(;1;z), mapped to I0(2 sqrt z) for z > 0 and
    /// J0(2 sqrt |z|) for z < 0.
    inline double hyp0f1_1(double z)
    {
        if (z > 0.0)
            return bessel_i0(2.0 * std::sqrt(z));
        if (z < 0.0)
            return bessel_j0(2.0 * std::sqrt(-z));
        return 1.0;
    }

    /// Direct power series sum z^k / (k!)^2. Only accurate for moderate |z|;
    /// kept as an independent check on hyp0f1_1.
    inline double hyp0f1_1_series(double z)
    {
        double term = 1.0;
        double sum = 1.0;
        for (int k = 1; k < 400; ++k) {
            term *= z / (static_cast<double>(k) * k);
            sum += term;
            if (std::abs(term) < 1e-18 * std::abs(sum) && k > 2)
                break;
        }
        return sum;
    }
}
