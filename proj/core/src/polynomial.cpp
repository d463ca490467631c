#include "aronsson/polynomial.hpp"

#include <cmath>

namespace aronsson {

namespace {

double ipow(double x, int e) {
    double r = 1.0;
    while (e > 0) {
        if (e & 1) r *= x;
        x *= x;
        e >>= 1;
    }
    return r;
}

}  // namespace

void Polynomial::add_term(double coeff, std::vector<int> exponents) {
    if (static_cast<int>(exponents.size()) != nvars_) {
        throw std::invalid_argument("Polynomial: exponent vector has wrong length");
    }
    for (int e : exponents) {
        if (e < 0) throw std::invalid_argument("Polynomial: negative exponent");
    }
    if (!std::isfinite(coeff)) {
        throw std::invalid_argument("Polynomial: non-finite coefficient");
    }
    if (coeff == 0.0) return;
    // Merge with an existing term of the same exponent vector, if any.
    for (auto& t : terms_) {
        if (t.exponents == exponents) {
            t.coeff += coeff;
            return;
        }
    }
    terms_.push_back({coeff, std::move(exponents)});
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& t : terms_) {
        int td = 0;
        for (int e : t.exponents) td += e;
        d = std::max(d, td);
    }
    return d;
}

double Polynomial::operator()(const Vec& x) const {
    if (x.size() != nvars_) {
        throw std::invalid_argument("Polynomial: evaluation point has wrong dimension");
    }
    double acc = 0.0;
    for (const auto& t : terms_) {
        double v = t.coeff;
        for (int i = 0; i < nvars_; ++i) {
            if (t.exponents[i] != 0) v *= ipow(x[i], t.exponents[i]);
        }
        acc += v;
    }
    return acc;
}

Polynomial Polynomial::derivative(int axis) const {
    if (axis < 0 || axis >= nvars_) {
        throw std::invalid_argument("Polynomial: derivative axis out of range");
    }
    Polynomial d(nvars_);
    for (const auto& t : terms_) {
        int e = t.exponents[axis];
        if (e == 0) continue;
        std::vector<int> de = t.exponents;
        de[axis] = e - 1;
        d.add_term(t.coeff * e, std::move(de));
    }
    return d;
}

}  // namespace aronsson
