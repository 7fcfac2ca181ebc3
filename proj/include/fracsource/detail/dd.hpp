#pragma once

// Double-double arithmetic: an unevaluated sum of two doubles giving ~31
// significant digits.  Used by the Mittag-Leffler power series, whose
// alternating terms can cancel ~14 digits before the sum settles.
//
// Requires round-to-nearest IEEE doubles; do not compile with -ffast-math.

#include <cmath>
#include <limits>

namespace fracsource::detail {

struct dd {
    double hi = 0.0;
    double lo = 0.0;
};

inline dd quick_two_sum(double a, double b) {
    // assumes |a| >= |b|
    double s = a + b;
    return {s, b - (s - a)};
}

inline dd two_sum(double a, double b) {
    double s = a + b;
    double bb = s - a;
    return {s, (a - (s - bb)) + (b - bb)};
}

inline dd two_prod(double a, double b) {
    double p = a * b;
    return {p, std::fma(a, b, -p)};
}

inline dd dd_add(dd a, dd b) {
    dd s = two_sum(a.hi, b.hi);
    dd t = two_sum(a.lo, b.lo);
    s.lo += t.hi;
    s = quick_two_sum(s.hi, s.lo);
    s.lo += t.lo;
    return quick_two_sum(s.hi, s.lo);
}

inline dd dd_add(dd a, double b) {
    dd s = two_sum(a.hi, b);
    s.lo += a.lo;
    return quick_two_sum(s.hi, s.lo);
}

inline dd dd_neg(dd a) { return {-a.hi, -a.lo}; }
inline dd dd_sub(dd a, dd b) { return dd_add(a, dd_neg(b)); }
inline dd dd_sub(dd a, double b) { return dd_add(a, -b); }

inline dd dd_mul(dd a, dd b) {
    dd p = two_prod(a.hi, b.hi);
    p.lo += a.hi * b.lo + a.lo * b.hi;
    return quick_two_sum(p.hi, p.lo);
}

inline dd dd_mul(dd a, double b) {
    dd p = two_prod(a.hi, b);
    p.lo += a.lo * b;
    return quick_two_sum(p.hi, p.lo);
}

inline dd dd_div(dd a, dd b) {
    double q1 = a.hi / b.hi;
    dd r = dd_sub(a, dd_mul(b, q1));
    double q2 = r.hi / b.hi;
    r = dd_sub(r, dd_mul(b, q2));
    double q3 = r.hi / b.hi;
    dd q = quick_two_sum(q1, q2);
    return dd_add(q, q3);
}

inline dd dd_div(dd a, double b) { return dd_div(a, dd{b, 0.0}); }

inline double to_double(dd a) { return a.hi + a.lo; }
inline double dd_abs_hi(dd a) { return std::fabs(a.hi); }

inline constexpr dd kDDLn2{0.6931471805599453, 2.3190468138462996e-17};
inline constexpr dd kDDHalfLn2Pi{0.9189385332046728, -3.8782941580672414e-17};

// exp for |a| within the double range; relative error ~1e-31
inline dd dd_exp(dd a) {
    if (a.hi > 709.0) return {std::numeric_limits<double>::infinity(), 0.0};
    if (a.hi < -745.0) return {0.0, 0.0};
    double m = std::nearbyint(a.hi / kDDLn2.hi);
    dd r = dd_sub(a, dd_mul(kDDLn2, m));
    dd sum{1.0, 0.0};
    dd term{1.0, 0.0};
    for (int k = 1; k <= 32; ++k) {
        term = dd_mul(term, r);
        term = dd_div(term, static_cast<double>(k));
        sum = dd_add(sum, term);
        if (std::fabs(term.hi) < 1e-35 * std::fabs(sum.hi)) break;
    }
    int im = static_cast<int>(m);
    return {std::ldexp(sum.hi, im), std::ldexp(sum.lo, im)};
}

// natural log via one Newton correction of the double-precision estimate
inline dd dd_log(dd a) {
    double y = std::log(to_double(a));
    dd e = dd_exp(dd{-y, 0.0});
    dd u = dd_mul(a, e);                       // u = a * exp(-y) = 1 + delta
    dd delta = dd_add(u, -1.0);
    dd corr = dd_sub(delta, dd_mul(dd_mul(delta, delta), 0.5));
    return dd_add(corr, y);
}

namespace stirling {
// B_{2j} / (2j (2j-1)), j = 1..20; enough for ~1e-33 at x >= 25
inline constexpr dd kCoeff[] = {
    {0.08333333333333333, 4.625929269271485e-18},
    {-0.002777777777777778, 1.0601087908747154e-19},
    {0.0007936507936507937, 6.883823317368282e-22},
    {-0.0005952380952380953, 5.36938218754726e-20},
    {0.0008417508417508417, 3.6870174889237694e-20},
    {-0.0019175269175269176, 1.0675702776872475e-19},
    {0.00641025641025641, 2.2240044563805217e-19},
    {-0.029550653594771242, 4.861760957508855e-19},
    {0.17964437236883057, -6.401600482710946e-19},
    {-1.3924322169059011, 1.5837056989230303e-17},
    {13.402864044168393, -6.154114101993966e-16},
    {-156.84828462600203, 9.391823141715389e-15},
    {2193.1033333333335, -1.3339255626002948e-13},
    {-36108.77125372499, 5.897583353514365e-13},
    {691472.268851313, 2.5585296305158e-11},
    {-15238221.539407415, -8.76774522490625e-10},
    {382900751.39141417, -2.4082684757733585e-08},
    {-10882266035.784391, 3.141830930219749e-07},
    {347320283765.00226, -6.048528997747748e-06},
    {-12369602142269.275, 0.0009363732896507286},
};
}  // namespace stirling

// log Gamma for positive arguments; shifts below 25 up by the recurrence
inline dd dd_lgamma(dd x) {
    dd prod{1.0, 0.0};
    dd z = x;
    bool shifted = false;
    while (z.hi < 25.0) {
        prod = dd_mul(prod, z);
        z = dd_add(z, 1.0);
        shifted = true;
    }
    dd invz = dd_div(dd{1.0, 0.0}, z);
    dd invz2 = dd_mul(invz, invz);
    dd s{0.0, 0.0};
    for (int j = 19; j >= 0; --j) s = dd_add(dd_mul(s, invz2), stirling::kCoeff[j]);
    s = dd_mul(s, invz);
    dd res = dd_mul(dd_sub(z, 0.5), dd_log(z));
    res = dd_sub(res, z);
    res = dd_add(res, kDDHalfLn2Pi);
    res = dd_add(res, s);
    if (shifted) res = dd_sub(res, dd_log(prod));
    return res;
}

}  // namespace fracsource::detail
