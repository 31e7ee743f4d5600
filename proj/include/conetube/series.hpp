#ifndef CONETUBE_SERIES_HPP
#define CONETUBE_SERIES_HPP

#include <optional>
#include <string_view>
#include <vector>

#include "conetube/common.hpp"

namespace conetube {

/// Truncated Laurent series around r = 0 with integer leading power.
/// Coefficient c[m] multiplies r^(lead+m); powers above `top` are unknown.
/// Arithmetic tracks `top` so results never pretend to more accuracy than
/// their inputs deliver.
class TruncatedSeries {
public:
    TruncatedSeries() = default;

    TruncatedSeries(int lead, int top, std::vector<cplx> coeffs)
        : lead_(lead), top_(top), c_(std::move(coeffs)) {
        if (top_ < lead_)
            throw validation_error("series order underflow: top < lead");
        c_.resize(static_cast<size_t>(top_ - lead_ + 1), cplx(0.0));
    }

    static TruncatedSeries zero(int top) {
        return TruncatedSeries(0, top, {});
    }

    static TruncatedSeries constant(cplx value, int top) {
        TruncatedSeries s(0, top, {value});
        return s;
    }

    static TruncatedSeries monomial(cplx value, int power, int top) {
        TruncatedSeries s(power, top, {value});
        return s;
    }

    int lead() const { return lead_; }
    int top() const { return top_; }

    /// Coefficient of r^power. Zero below the stored window, error above
    /// `top` (those coefficients were lost to truncation).
    cplx coeff(int power) const {
        if (power > top_)
            throw internal_error("series coefficient requested beyond truncation order");
        if (power < lead_) return cplx(0.0);
        return c_[static_cast<size_t>(power - lead_)];
    }

    void set_coeff(int power, cplx value) {
        if (power > top_ || power < lead_)
            throw internal_error("series coefficient set outside stored window");
        c_[static_cast<size_t>(power - lead_)] = value;
    }

    /// First power with a nonzero coefficient, if any coefficient is
    /// nonzero at all. Comparison is exact; callers that need a tolerance
    /// scan the coefficients themselves.
    std::optional<int> leading_power() const {
        for (size_t m = 0; m < c_.size(); ++m)
            if (c_[m] != cplx(0.0)) return lead_ + static_cast<int>(m);
        return std::nullopt;
    }

    TruncatedSeries truncated(int new_top) const {
        if (new_top < lead_)
            throw validation_error("series order underflow in truncation");
        TruncatedSeries s(lead_, std::min(new_top, top_), {});
        for (int p = s.lead_; p <= s.top_; ++p) s.set_coeff(p, coeff(p));
        return s;
    }

    TruncatedSeries shifted(int power) const {
        TruncatedSeries s = *this;
        s.lead_ += power;
        s.top_ += power;
        return s;
    }

    TruncatedSeries scaled(cplx factor) const {
        TruncatedSeries s = *this;
        for (auto& v : s.c_) v *= factor;
        return s;
    }

    TruncatedSeries derivative() const {
        if (top_ - 1 < lead_ - 1)
            throw validation_error("series order underflow in derivative");
        TruncatedSeries s(lead_ - 1, top_ - 1, {});
        for (int p = lead_; p <= top_; ++p)
            s.set_coeff(p - 1, coeff(p) * cplx(static_cast<double>(p)));
        return s;
    }

    friend TruncatedSeries operator+(const TruncatedSeries& a, const TruncatedSeries& b) {
        int lead = std::min(a.lead_, b.lead_);
        int top = std::min(a.top_, b.top_);
        if (top < lead)
            throw validation_error("series order underflow in addition");
        TruncatedSeries s(lead, top, {});
        for (int p = lead; p <= top; ++p) s.set_coeff(p, a.coeff(p) + b.coeff(p));
        return s;
    }

    friend TruncatedSeries operator-(const TruncatedSeries& a, const TruncatedSeries& b) {
        return a + b.scaled(cplx(-1.0));
    }

    friend TruncatedSeries operator*(const TruncatedSeries& a, const TruncatedSeries& b) {
        int lead = a.lead_ + b.lead_;
        int top = std::min(a.top_ + b.lead_, b.top_ + a.lead_);
        if (top < lead)
            throw validation_error("series order underflow in multiplication");
        TruncatedSeries s(lead, top, {});
        for (int pa = a.lead_; pa <= a.top_; ++pa) {
            cplx ca = a.coeff(pa);
            if (ca == cplx(0.0)) continue;
            int pb_hi = std::min(b.top_, top - pa);
            for (int pb = b.lead_; pb <= pb_hi; ++pb)
                s.set_coeff(pa + pb, s.coeff(pa + pb) + ca * b.coeff(pb));
        }
        return s;
    }

    /// Multiplicative inverse; requires a nonzero leading coefficient.
    TruncatedSeries inverse() const {
        auto L = leading_power();
        if (!L)
            throw validation_error("series inverse of (numerically) zero series");
        int new_top = top_ - 2 * (*L);
        if (new_top < -*L)
            throw validation_error("series order underflow in inverse");
        int nterms = new_top + *L + 1;
        std::vector<cplx> d(static_cast<size_t>(nterms));
        cplx b0 = coeff(*L);
        d[0] = 1.0 / b0;
        for (int m = 1; m < nterms; ++m) {
            cplx acc(0.0);
            for (int j = 1; j <= m; ++j)
                acc += coeff(*L + j) * d[static_cast<size_t>(m - j)];
            d[static_cast<size_t>(m)] = -acc / b0;
        }
        return TruncatedSeries(-*L, new_top, std::move(d));
    }

    friend TruncatedSeries operator/(const TruncatedSeries& a, const TruncatedSeries& b) {
        return a * b.inverse();
    }

    /// Evaluate at r > 0 (Laurent leads allowed). Horner on the stored
    /// window times r^lead.
    cplx evaluate(double r) const {
        cplx acc(0.0);
        for (size_t m = c_.size(); m-- > 0;) acc = acc * r + c_[m];
        return acc * std::pow(r, lead_);
    }

private:
    int lead_ = 0;
    int top_ = -1;
    std::vector<cplx> c_;
};

namespace detail {

inline TruncatedSeries sinh_series(int top) {
    TruncatedSeries s(1, top, {});
    double fact = 1.0;
    for (int p = 1; p <= top; ++p) {
        fact *= p;
        if (p % 2 == 1) s.set_coeff(p, cplx(1.0 / fact));
    }
    return s;
}

inline TruncatedSeries cosh_series(int top) {
    TruncatedSeries s(0, top, {});
    double fact = 1.0;
    s.set_coeff(0, cplx(1.0));
    for (int p = 1; p <= top; ++p) {
        fact *= p;
        if (p % 2 == 0) s.set_coeff(p, cplx(1.0 / fact));
    }
    return s;
}

} // namespace detail

/// Taylor/Laurent data for the coefficient functions that appear in the
/// radial operators. Supported names: coth, tanh, csch2, sech2, inv_sinh,
/// sech, tanh_sech. The result is reliable through order N.
inline TruncatedSeries coefficient_expansion(std::string_view name, int N = 20) {
    if (N < 1) throw validation_error("coefficient_expansion: order must be >= 1");
    int T = N + 4;
    const TruncatedSeries sh = detail::sinh_series(T);
    const TruncatedSeries ch = detail::cosh_series(T);
    TruncatedSeries out;
    if (name == "coth")
        out = ch / sh;
    else if (name == "tanh")
        out = sh / ch;
    else if (name == "csch2")
        out = (sh * sh).inverse();
    else if (name == "sech2")
        out = (ch * ch).inverse();
    else if (name == "inv_sinh")
        out = sh.inverse();
    else if (name == "sech")
        out = ch.inverse();
    else if (name == "tanh_sech")
        out = sh / (ch * ch);
    else
        throw validation_error("coefficient_expansion: unknown name '" + std::string(name) + "'");
    return out.truncated(N);
}

} // namespace conetube

#endif
