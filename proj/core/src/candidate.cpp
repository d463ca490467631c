#include "aronsson/candidate.hpp"

#include <cmath>

namespace aronsson {

std::string to_string(CandidateKind kind) {
    switch (kind) {
        case CandidateKind::gauge: return "gauge";
        case CandidateKind::abspower: return "abspower";
        case CandidateKind::quadratic: return "quadratic";
        case CandidateKind::polynomial: return "polynomial";
    }
    return "unknown";
}

Candidate Candidate::gauge(int m) {
    if (m < 1) throw ConfigError("gauge: m must be >= 1");
    Candidate c;
    c.kind_ = CandidateKind::gauge;
    c.gauge_m_ = m;
    c.n_ = m + 1;
    return c;
}

Candidate Candidate::abspower(Vec alphas, Vec signs) {
    if (alphas.size() != signs.size() || alphas.size() == 0) {
        throw ConfigError("abspower: alphas/signs must have equal positive length");
    }
    for (Eigen::Index i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] > 1.0)) throw ConfigError("abspower: exponents must be > 1");
        if (signs[i] != 1.0 && signs[i] != -1.0) throw ConfigError("abspower: signs must be +-1");
    }
    Candidate c;
    c.kind_ = CandidateKind::abspower;
    c.n_ = static_cast<int>(alphas.size());
    c.alphas_ = std::move(alphas);
    c.signs_ = std::move(signs);
    return c;
}

Candidate Candidate::quadratic(Mat Q) {
    if (Q.rows() != Q.cols() || Q.rows() == 0) throw ConfigError("quadratic: Q must be square");
    Candidate c;
    c.kind_ = CandidateKind::quadratic;
    c.n_ = static_cast<int>(Q.rows());
    c.Q_ = 0.5 * (Q + Q.transpose());
    return c;
}

Candidate Candidate::polynomial(Polynomial p) {
    Candidate c;
    c.kind_ = CandidateKind::polynomial;
    c.n_ = p.nvars();
    const int n = c.n_;
    c.poly_.reserve(1 + n + static_cast<std::size_t>(n) * n);
    c.poly_.push_back(std::move(p));
    for (int i = 0; i < n; ++i) c.poly_.push_back(c.poly_[0].derivative(i));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            c.poly_.push_back(c.poly_[1 + i].derivative(j));
        }
    }
    return c;
}

Candidate Candidate::negated() const {
    Candidate c = *this;
    c.scale_ = -c.scale_;
    return c;
}

bool Candidate::in_c1_domain(const Vec& x) const {
    if (x.size() != n_) throw std::invalid_argument("Candidate: point has wrong dimension");
    if (kind_ == CandidateKind::gauge) return x.norm() > 0.0;
    return true;
}

bool Candidate::hessian_available(const Vec& x) const {
    if (!in_c1_domain(x)) return false;
    if (kind_ == CandidateKind::abspower) {
        for (int i = 0; i < n_; ++i) {
            if (alphas_[i] < 2.0 && x[i] == 0.0) return false;
        }
    }
    return true;
}

Evaluation Candidate::evaluate(const Vec& x, bool want_hess) const {
    if (!in_c1_domain(x)) {
        throw EvalOutsideDomainError("candidate " + to_string(kind_) +
                                     ": point outside C1 domain");
    }
    if (want_hess && !hessian_available(x)) {
        throw HessianUnavailableError("candidate " + to_string(kind_) +
                                      ": hessian unavailable at this point");
    }
    Evaluation ev;
    switch (kind_) {
        case CandidateKind::gauge: {
            const int m = gauge_m_;
            const Vec xh = x.head(m);
            const double xv = x[m];
            const double r2 = xh.squaredNorm();
            const double u = r2 * r2 + 4.0 * xv * xv;
            const double U = std::pow(u, 0.25);
            Vec gu(n_);
            gu.head(m) = 4.0 * r2 * xh;
            gu[m] = 8.0 * xv;
            const double u34 = std::pow(u, 0.75);
            ev.U = U;
            ev.grad = gu / (4.0 * u34);
            if (want_hess) {
                Mat huu = Mat::Zero(n_, n_);
                huu.topLeftCorner(m, m) =
                    4.0 * r2 * Mat::Identity(m, m) + 8.0 * xh * xh.transpose();
                huu(m, m) = 8.0;
                ev.hess = huu / (4.0 * u34) -
                          (3.0 / 16.0) * std::pow(u, -1.75) * gu * gu.transpose();
            }
            break;
        }
        case CandidateKind::abspower: {
            double U = 0.0;
            Vec g(n_);
            Mat h = Mat::Zero(n_, n_);
            for (int i = 0; i < n_; ++i) {
                const double a = alphas_[i];
                const double s = signs_[i];
                const double ax = std::abs(x[i]);
                U += s * std::pow(ax, a);
                g[i] = ax == 0.0 ? 0.0 : s * a * std::pow(ax, a - 1.0) * (x[i] > 0 ? 1.0 : -1.0);
                if (want_hess) {
                    h(i, i) = ax == 0.0 ? 0.0 : s * a * (a - 1.0) * std::pow(ax, a - 2.0);
                }
            }
            ev.U = U;
            ev.grad = std::move(g);
            if (want_hess) ev.hess = std::move(h);
            break;
        }
        case CandidateKind::quadratic: {
            ev.U = 0.5 * x.dot(Q_ * x);
            ev.grad = Q_ * x;
            if (want_hess) ev.hess = Q_;
            break;
        }
        case CandidateKind::polynomial: {
            ev.U = poly_[0](x);
            Vec g(n_);
            for (int i = 0; i < n_; ++i) g[i] = poly_[1 + i](x);
            ev.grad = std::move(g);
            if (want_hess) {
                Mat h(n_, n_);
                for (int i = 0; i < n_; ++i) {
                    for (int j = 0; j < n_; ++j) {
                        h(i, j) = poly_[1 + n_ + static_cast<std::size_t>(i) * n_ + j](x);
                    }
                }
                ev.hess = std::move(h);
            }
            break;
        }
    }
    if (scale_ != 1.0) {
        ev.U *= scale_;
        ev.grad *= scale_;
        if (ev.hess) *ev.hess *= scale_;
    }
    return ev;
}

std::vector<int> Candidate::non_lipschitz_coords(const Vec& x, double threshold) const {
    std::vector<int> coords;
    if (kind_ == CandidateKind::abspower) {
        for (int i = 0; i < n_; ++i) {
            if (alphas_[i] < 2.0 && std::abs(x[i]) <= threshold) coords.push_back(i);
        }
    }
    return coords;
}

ValueAlongGradient value_V(const Candidate& candidate, const PolyMatrixField& field, const Vec& x,
                           double tol_H) {
    const Evaluation ev = candidate.evaluate(x);
    const double h = hamiltonian(field, x, ev.grad);
    return {x, ev.U, ev.grad, h, h <= tol_H};
}

}  // namespace aronsson
