#pragma once

#include <array>

namespace imflow {

// Second-order forward-mode value in three barycentric variables.
struct Jet {
    double v = 0.0;
    std::array<double, 3> g{};
    std::array<std::array<double, 3>, 3> H{};

    static Jet variable(int k, double value)
    {
        Jet j;
        j.v = value;
        j.g[k] = 1.0;
        return j;
    }
    static Jet constant(double value)
    {
        Jet j;
        j.v = value;
        return j;
    }
};

inline Jet operator+(const Jet& a, const Jet& b)
{
    Jet r;
    r.v = a.v + b.v;
    for (int i = 0; i < 3; ++i) {
        r.g[i] = a.g[i] + b.g[i];
        for (int k = 0; k < 3; ++k)
            r.H[i][k] = a.H[i][k] + b.H[i][k];
    }
    return r;
}

inline Jet operator*(const Jet& a, const Jet& b)
{
    Jet r;
    r.v = a.v * b.v;
    for (int i = 0; i < 3; ++i) {
        r.g[i] = a.g[i] * b.v + a.v * b.g[i];
        for (int k = 0; k < 3; ++k)
            r.H[i][k] = a.H[i][k] * b.v + a.g[i] * b.g[k] + a.g[k] * b.g[i] + a.v * b.H[i][k];
    }
    return r;
}

// 1/a
inline Jet reciprocal(const Jet& a)
{
    Jet r;
    const double inv = 1.0 / a.v;
    r.v = inv;
    for (int i = 0; i < 3; ++i) {
        r.g[i] = -a.g[i] * inv * inv;
        for (int k = 0; k < 3; ++k)
            r.H[i][k] = 2.0 * a.g[i] * a.g[k] * inv * inv * inv - a.H[i][k] * inv * inv;
    }
    return r;
}

inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

} // namespace imflow
