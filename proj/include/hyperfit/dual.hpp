#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace hyperfit {

// Forward-mode dual number carrying N partial derivatives alongside the
// value. Nesting Dual<Dual<double, N>, N> propagates exact second
// derivatives. All operations are allocation-free.
template <typename S, std::size_t N>
struct Dual {
    S val{};
    std::array<S, N> dot{};

    Dual() = default;
    Dual(S v) : val(v) {} // NOLINT: implicit promotion of constants is intended
    Dual(S v, const std::array<S, N>& d) : val(v), dot(d) {}

    /// Independent variable: value v with unit derivative in slot k.
    static Dual seeded(S v, std::size_t k)
    {
        Dual d(v);
        d.dot[k] = S(1);
        return d;
    }

    Dual& operator+=(const Dual& o)
    {
        val += o.val;
        for (std::size_t i = 0; i < N; ++i) dot[i] += o.dot[i];
        return *this;
    }
    Dual& operator-=(const Dual& o)
    {
        val -= o.val;
        for (std::size_t i = 0; i < N; ++i) dot[i] -= o.dot[i];
        return *this;
    }
    Dual& operator*=(const Dual& o) { return *this = *this * o; }
    Dual& operator/=(const Dual& o) { return *this = *this / o; }

    friend Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
    friend Dual operator-(const Dual& a)
    {
        Dual r(-a.val);
        for (std::size_t i = 0; i < N; ++i) r.dot[i] = -a.dot[i];
        return r;
    }

    friend Dual operator*(const Dual& a, const Dual& b)
    {
        Dual r(a.val * b.val);
        for (std::size_t i = 0; i < N; ++i) r.dot[i] = a.dot[i] * b.val + a.val * b.dot[i];
        return r;
    }

    friend Dual operator/(const Dual& a, const Dual& b)
    {
        const S q = a.val / b.val;
        Dual r(q);
        for (std::size_t i = 0; i < N; ++i) r.dot[i] = (a.dot[i] - q * b.dot[i]) / b.val;
        return r;
    }

    friend bool operator>(const Dual& a, const Dual& b) { return a.val > b.val; }
    friend bool operator<(const Dual& a, const Dual& b) { return a.val < b.val; }
    friend bool operator==(const Dual& a, const Dual& b) { return a.val == b.val; }

    // Mixed arithmetic with plain doubles. Needed explicitly because nested
    // duals would otherwise require two user-defined conversions.
    friend Dual operator+(Dual a, double b) { a.val += S(b); return a; }
    friend Dual operator+(double a, Dual b) { b.val += S(a); return b; }
    friend Dual operator-(Dual a, double b) { a.val -= S(b); return a; }
    friend Dual operator-(double a, const Dual& b) { return Dual(S(a)) - b; }
    friend Dual operator*(const Dual& a, double b)
    {
        Dual r(a.val * S(b));
        for (std::size_t i = 0; i < N; ++i) r.dot[i] = a.dot[i] * S(b);
        return r;
    }
    friend Dual operator*(double a, const Dual& b) { return b * a; }
    friend Dual operator/(const Dual& a, double b) { return a * (1.0 / b); }
    friend Dual operator/(double a, const Dual& b) { return Dual(S(a)) / b; }

    friend bool operator>(const Dual& a, double b) { return scalar_of(a.val) > b; }
    friend bool operator<(const Dual& a, double b) { return scalar_of(a.val) < b; }

private:
    static double scalar_of(double x) { return x; }
    template <typename T, std::size_t M>
    static double scalar_of(const Dual<T, M>& x) { return scalar_of(x.val); }
};

template <typename S, std::size_t N>
Dual<S, N> sqrt(const Dual<S, N>& a)
{
    using std::sqrt;
    const S s = sqrt(a.val);
    Dual<S, N> r(s);
    const S half_inv = S(0.5) / s;
    for (std::size_t i = 0; i < N; ++i) r.dot[i] = half_inv * a.dot[i];
    return r;
}

template <typename S, std::size_t N>
Dual<S, N> log(const Dual<S, N>& a)
{
    using std::log;
    Dual<S, N> r(log(a.val));
    for (std::size_t i = 0; i < N; ++i) r.dot[i] = a.dot[i] / a.val;
    return r;
}

template <typename S, std::size_t N>
Dual<S, N> exp(const Dual<S, N>& a)
{
    using std::exp;
    const S e = exp(a.val);
    Dual<S, N> r(e);
    for (std::size_t i = 0; i < N; ++i) r.dot[i] = e * a.dot[i];
    return r;
}

/// Real power of a positive dual base: d(a^p) = p a^{p-1} da.
template <typename S, std::size_t N>
Dual<S, N> pow(const Dual<S, N>& a, double p)
{
    using std::pow;
    Dual<S, N> r(pow(a.val, p));
    const S f = S(p) * pow(a.val, p - 1.0);
    for (std::size_t i = 0; i < N; ++i) r.dot[i] = f * a.dot[i];
    return r;
}

/// Strips all derivative structure, returning the underlying double.
inline double scalar_value(double x) { return x; }
template <typename S, std::size_t N>
double scalar_value(const Dual<S, N>& x)
{
    return scalar_value(x.val);
}

} // namespace hyperfit
