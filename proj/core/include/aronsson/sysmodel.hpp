#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aronsson/polynomial.hpp"
#include "aronsson/rng.hpp"
#include "aronsson/types.hpp"

namespace aronsson {

/// Default classification threshold for H(x, grad U) = 0. The feedback law
/// divides by H, so points with H below this are treated as singular.
inline constexpr double kDefaultTolH = 1e-12;

/// sigma(x) as an n x m matrix of multivariate polynomials in x. Defines the
/// symmetric control system xdot = sigma(x) a with a in the closed unit ball
/// of R^m, and carries a Lipschitz bound for x -> sigma(x) on the experiment
/// box (user supplied or estimated by sampling).
class PolyMatrixField {
public:
    /// entries are row-major: entries[i*m + j] = sigma_{ij}.
    PolyMatrixField(int n, int m, std::vector<Polynomial> entries, double lipschitz_bound = 0.0);

    int state_dim() const { return n_; }
    int control_dim() const { return m_; }

    const Polynomial& entry(int i, int j) const { return entries_[i * m_ + j]; }

    Mat sigma(const Vec& x) const;

    /// Jacobian D sigma_j of column j: (i,k) entry is d sigma_{ij} / d x_k.
    /// Computed from the exact monomial derivatives cached at construction.
    Mat column_jacobian(int j, const Vec& x) const;

    double lipschitz_bound() const { return lipschitz_bound_; }
    void set_lipschitz_bound(double value) { lipschitz_bound_ = value; }

    /// Largest sampled operator-norm difference quotient of x -> sigma(x)
    /// over the box; used to validate a user-supplied bound.
    double sample_lipschitz(const Box& box, int samples, Rng& rng) const;

private:
    int n_;
    int m_;
    std::vector<Polynomial> entries_;
    std::vector<Polynomial> entry_grads_;  // n*m*n, exact derivatives
    double lipschitz_bound_;
};

enum class SystemKind { isotropic, hormander, grushin, custom };

std::string to_string(SystemKind kind);

/// A named system from the built-in catalog plus its derived sigma-field.
/// For hormander/grushin the state splits as x = (x_h, x_v) with x_h the
/// first m coordinates; for isotropic/custom the whole state is horizontal.
struct SystemCatalogEntry {
    SystemKind kind = SystemKind::custom;
    int m = 0;             // catalog parameter (not the control dimension for grushin)
    Mat B;                 // hormander only
    PolyMatrixField field;

    /// sigma = I_n.
    static SystemCatalogEntry isotropic(int n);

    /// sigma stacks I_m above the row t(B x_h); requires m even and
    /// tB = -B = B^{-1} (checked numerically to 1e-12).
    static SystemCatalogEntry hormander(int m, const Mat& B);

    /// sigma = [[I_m, 0_m], [0, t(x_h)]], an (m+1) x 2m matrix.
    static SystemCatalogEntry grushin(int m);

    static SystemCatalogEntry custom(PolyMatrixField field);

    /// Number of leading coordinates forming the horizontal block x_h.
    int horizontal_dim() const;
};

/// Homogeneity mode of the Hamiltonian: H = |p sigma(x)| (degree 1) or
/// scale * |p sigma(x)|^2 (degree 2). The scale only applies in squared mode;
/// it exists so scenarios can match alternative conventions such as
/// H^2 = |p|^2 / 2 exactly.
struct HamiltonianKind {
    enum class Mode { degree1, squared };
    Mode mode = Mode::degree1;
    double scale = 1.0;

    int homogeneity() const { return mode == Mode::degree1 ? 1 : 2; }

    static HamiltonianKind degree1() { return {Mode::degree1, 1.0}; }
    static HamiltonianKind squared(double scale = 1.0) { return {Mode::squared, scale}; }
};

/// H(x, p) = |p sigma(x)|, always the degree-1 value.
double hamiltonian(const PolyMatrixField& field, const Vec& x, const Vec& p);

/// H or scale * H^2 according to the kind.
double hamiltonian_value(const PolyMatrixField& field, const HamiltonianKind& kind, const Vec& x,
                         const Vec& p);

/// H_p = sigma w / H (degree 1, requires H > tol_H) or 2 scale sigma w
/// (squared mode, defined everywhere), with w = t(sigma) t(p). Satisfies the
/// Euler identity p . H_p = r H (resp. r scale H^2).
Vec hamiltonian_gradient_p(const PolyMatrixField& field, const HamiltonianKind& kind, const Vec& x,
                           const Vec& p, double tol_H = kDefaultTolH);

/// Feedback a_x = - t(sigma) gradU / H(x, gradU); unit norm, and
/// sigma a_x = -H_p(x, gradU) in degree-1 mode. Throws SingularPointError
/// when H <= tol_H.
Vec feedback(const PolyMatrixField& field, const Vec& x, const Vec& grad_u,
             double tol_H = kDefaultTolH);

struct SingularIndicator {
    bool singular = false;
    double H = 0.0;
};

SingularIndicator singular_indicator(const PolyMatrixField& field, const Vec& x, const Vec& grad_u,
                                     double tol_H = kDefaultTolH);

/// Deterministic, antipodally symmetric samples of the unit sphere in R^dim.
/// dim 1: {+1, -1}; dim 2: equally spaced angles; dim 3: latitude rings plus
/// the two poles. Symmetric sampling preserves -A in A.
std::vector<Vec> sample_unit_sphere(int dim, int count);

/// Default control-sample counts: 2 for dim 1, 64 for dim 2, 266 for dim 3.
int default_sphere_count(int dim);

/// At a point of the built-in singular manifold {x_h = 0}, the largest norm
/// of the x_h-component of f(x, a) over sampled controls. A positive value
/// witnesses f(x, A) not contained in the tangent space of the manifold.
double evasion_check(const SystemCatalogEntry& entry, const Vec& x, int sphere_count = 0);

}  // namespace aronsson
