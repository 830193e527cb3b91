#pragma once

#include <cstdint>
#include <numeric>

namespace s3kit {

/// Exact non-negative rational, always kept in lowest terms.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Rational reduced(std::int64_t n, std::int64_t d) {
        std::int64_t g = std::gcd(n, d);
        if (g == 0) return {0, 1};
        return {n / g, d / g};
    }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    friend bool operator==(const Rational&, const Rational&) = default;
    friend auto operator<=>(const Rational& a, const Rational& b) {
        return a.num * b.den <=> b.num * a.den;
    }
};

}  // namespace s3kit
