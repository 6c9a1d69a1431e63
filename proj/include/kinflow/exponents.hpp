#pragma once

#include <cmath>
#include <limits>
#include <string>

namespace kinflow {

/// Exponent tuple (q, r, p, a); infinity is encoded as
/// std::numeric_limits<double>::infinity().
struct NormSpec {
    double q = 1.0;
    double r = 1.0;
    double p = 1.0;
    double a = 1.0;
};

struct AdmissibilityReport {
    bool admissible = false;
    std::string violated_clause;  // empty when admissible
};

namespace detail {
inline double recip(double e) { return std::isinf(e) ? 0.0 : 1.0 / e; }
}  // namespace detail

/// Conjugate exponent: 1/e + 1/e' = 1 (conj(1) = inf, conj(inf) = 1).
inline double conjugate_exponent(double e) {
    if (e == 1.0) return std::numeric_limits<double>::infinity();
    if (std::isinf(e)) return 1.0;
    return e / (e - 1.0);
}

/// Full admissibility predicate: scaling relation, mean relation, the
/// piecewise ranges q*(a) <= q <= a <= p <= p*(a) split at a = (d+1)/d, and
/// the d = 1 exclusion (r,p,q) = (a, inf, a/2). Comparisons are made in
/// reciprocal space with a relative tolerance so boundary tuples pass.
inline AdmissibilityReport check_admissible(const NormSpec& s, std::size_t d,
                                            double tol = 1e-9) {
    using detail::recip;
    AdmissibilityReport rep;
    const double dd = static_cast<double>(d);
    const double iq = recip(s.q), ir = recip(s.r), ip = recip(s.p), ia = recip(s.a);

    const auto fail = [&rep](const std::string& clause) {
        rep.admissible = false;
        rep.violated_clause = clause;
        return rep;
    };

    for (double e : {s.q, s.r, s.p, s.a})
        if (!(e >= 1.0) || std::isnan(e)) return fail("exponents must lie in [1, inf]");

    if (std::abs(2.0 * ir - dd * (iq - ip)) > tol)
        return fail("scaling relation 2/r = d(1/q - 1/p)");
    if (std::abs(ia - 0.5 * (ip + iq)) > tol)
        return fail("mean relation 1/a = (1/p + 1/q)/2");

    // Piecewise thresholds, expressed through reciprocals.
    double iq_star, ip_star;
    const double a_split = (dd + 1.0) / dd;
    if (s.a >= a_split - tol) {
        iq_star = (dd + 1.0) / dd * ia;                   // q* = d a/(d+1)
        ip_star = d > 1 ? (dd - 1.0) / dd * ia : 0.0;     // p* = d a/(d-1), inf for d=1
    } else {
        iq_star = 1.0;            // q* = 1
        ip_star = 2.0 * ia - 1.0;  // p* = a/(2-a)
    }
    if (iq > iq_star + tol) return fail("q below q*(a)");
    if (iq < ia - tol) return fail("q above a");
    if (ip > ia + tol) return fail("p below a");
    if (ip < ip_star - tol) return fail("p above p*(a)");

    if (d == 1) {
        const bool excluded = std::abs(ir - ia) <= tol && ip <= tol &&
                              std::abs(iq - 2.0 * ia) <= tol;
        if (excluded) return fail("d = 1 exclusion (r,p,q) = (a, inf, a/2)");
    }

    rep.admissible = true;
    return rep;
}

/// Two admissible tuples are jointly admissible when the second one's a is
/// the conjugate of the first one's.
inline bool jointly_admissible(const NormSpec& s1, const NormSpec& s2, std::size_t d,
                               double tol = 1e-9) {
    if (!check_admissible(s1, d, tol).admissible) return false;
    if (!check_admissible(s2, d, tol).admissible) return false;
    using detail::recip;
    return std::abs(recip(s2.a) - (1.0 - recip(s1.a))) <= tol;
}

/// The scaling parameter map: given a and r, derive
/// 1/p = 1/a - 1/(rd) and 1/q = 1/a + 1/(rd).
inline NormSpec scaling_tuple(double a, double r, std::size_t d) {
    using detail::recip;
    const double dd = static_cast<double>(d);
    NormSpec s;
    s.a = a;
    s.r = r;
    const double ip = recip(a) - 1.0 / (r * dd);
    const double iq = recip(a) + 1.0 / (r * dd);
    s.p = ip <= 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / ip;
    s.q = 1.0 / iq;
    return s;
}

/// The dual tuple paired with scaling_tuple(a, r, d) in the a-priori
/// estimate: 1/q~ = 1/a' + 1/d - 2/(rd), 1/p~ = 1/a' - 1/d + 2/(rd),
/// 1/r~ = 1 - 2/r.
inline NormSpec dual_tuple(double a, double r, std::size_t d) {
    using detail::recip;
    const double dd = static_cast<double>(d);
    const double iap = 1.0 - recip(a);
    NormSpec s;
    s.a = iap <= 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / iap;
    const double irt = 1.0 - 2.0 / r;
    const double iqt = iap + 1.0 / dd - 2.0 / (r * dd);
    const double ipt = iap - 1.0 / dd + 2.0 / (r * dd);
    s.r = irt <= 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / irt;
    s.q = iqt <= 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / iqt;
    s.p = ipt <= 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / ipt;
    return s;
}

}  // namespace kinflow
