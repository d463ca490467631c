#pragma once

#include <vector>

#include "aronsson/types.hpp"

namespace aronsson {

/// One term c * x1^e1 * ... * xn^en of a multivariate polynomial.
struct Monomial {
    double coeff = 0.0;
    std::vector<int> exponents;
};

/// Dense-in-terms multivariate polynomial: a list of monomials over n
/// variables. Differentiation is exact (symbolic on the monomial table);
/// nothing here is ever approximated by finite differences.
class Polynomial {
public:
    explicit Polynomial(int nvars) : nvars_(nvars) {
        if (nvars < 1) throw std::invalid_argument("Polynomial: nvars must be >= 1");
    }

    static Polynomial constant(int nvars, double c) {
        Polynomial p(nvars);
        if (c != 0.0) p.add_term(c, std::vector<int>(nvars, 0));
        return p;
    }

    static Polynomial variable(int nvars, int axis, double coeff = 1.0) {
        Polynomial p(nvars);
        std::vector<int> e(nvars, 0);
        e[axis] = 1;
        p.add_term(coeff, e);
        return p;
    }

    void add_term(double coeff, std::vector<int> exponents);

    int nvars() const { return nvars_; }
    const std::vector<Monomial>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    int degree() const;

    double operator()(const Vec& x) const;

    /// Exact partial derivative with respect to the given variable.
    Polynomial derivative(int axis) const;

private:
    int nvars_;
    std::vector<Monomial> terms_;
};

}  // namespace aronsson
