#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aronsson/polynomial.hpp"
#include "aronsson/sysmodel.hpp"
#include "aronsson/types.hpp"

namespace aronsson {

enum class CandidateKind { gauge, abspower, quadratic, polynomial };

std::string to_string(CandidateKind kind);

struct Evaluation {
    double U = 0.0;
    Vec grad;
    std::optional<Mat> hess;
};

/// A candidate value function U with exact first derivatives everywhere in
/// its C^1 domain and exact second derivatives where they exist.
///
///  - gauge(m):  U = (|x_h|^4 + 4 x_v^2)^{1/4} on R^{m+1} minus the origin.
///  - abspower:  U = sum_i s_i |x_i|^{alpha_i}, alpha_i > 1; the hessian is
///               unavailable on coordinate axes where alpha_i < 2.
///  - quadratic: U = x' Q x / 2.
///  - polynomial: U given by a monomial table.
///
/// All evaluations are closed form; finite differences appear only in tests
/// as independent oracles.
class Candidate {
public:
    static Candidate gauge(int m);
    static Candidate abspower(Vec alphas, Vec signs);
    static Candidate quadratic(Mat Q);
    static Candidate polynomial(Polynomial p);

    /// Same candidate scaled by -1 (gradient and hessian flip with it).
    Candidate negated() const;

    CandidateKind kind() const { return kind_; }
    int dim() const { return n_; }
    double scale() const { return scale_; }

    bool in_c1_domain(const Vec& x) const;
    bool hessian_available(const Vec& x) const;

    /// Throws EvalOutsideDomainError outside the C^1 domain; throws
    /// HessianUnavailableError if want_hess and no hessian exists at x.
    Evaluation evaluate(const Vec& x, bool want_hess = false) const;

    double value(const Vec& x) const { return evaluate(x).U; }

    /// Coordinates along which the closed-loop field fails to be Lipschitz
    /// near x (from the hessian-unavailable set); branch seeding perturbs
    /// exactly these.
    std::vector<int> non_lipschitz_coords(const Vec& x, double threshold = 1e-9) const;

private:
    Candidate() = default;

    CandidateKind kind_ = CandidateKind::quadratic;
    int n_ = 0;
    double scale_ = 1.0;
    int gauge_m_ = 0;
    Vec alphas_, signs_;
    Mat Q_;
    std::vector<Polynomial> poly_;        // [0] value; then n gradients; then n*n hessian
};

/// V(x) = H(x, grad U(x)) bundled with the data it was computed from.
struct ValueAlongGradient {
    Vec x;
    double U = 0.0;
    Vec gradU;
    double H = 0.0;
    bool singular = false;
};

ValueAlongGradient value_V(const Candidate& candidate, const PolyMatrixField& field, const Vec& x,
                           double tol_H = kDefaultTolH);

}  // namespace aronsson
