#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aronsson/candidate.hpp"
#include "aronsson/dynamics.hpp"
#include "aronsson/sysmodel.hpp"
#include "aronsson/types.hpp"

namespace aronsson {

/// The matrix S = t(sigma) D^2U sigma + (D sigma_j sigma_i . grad U)_{i,j},
/// its symmetric part S* and the pointwise residual of the equation for H^2,
///     residual = -grad(H^2(., grad U)) . (H^2)_p = -4 (S* w) . w,
/// with w = t(sigma) grad U. residual >= 0 is the supersolution inequality;
/// S* negative semidefinite is the sigma-concavity sufficient condition.
struct SMatrixReport {
    Vec x;
    Mat S;
    Mat Sstar;
    Vec w;
    double residual = 0.0;
    Vec eig_Sstar;
};

/// Requires the hessian at x (throws HessianUnavailableError otherwise).
SMatrixReport smatrix(const Candidate& candidate, const PolyMatrixField& field, const Vec& x);

/// Central-difference value of -grad(H^2(., grad U(.))) . G along
/// G = (H^2)_p(x, grad U(x)); the independent oracle for smatrix().residual,
/// with O(h^2) agreement at C^2 points.
double residual_fd(const Candidate& candidate, const PolyMatrixField& field, const Vec& x,
                   double h);

/// Residual for the degree-1 Hamiltonian, obtained from the H^2 residual by
/// dividing by 2H; requires H > tol_H.
double residual_degree1(const SMatrixReport& report, double tol_H = kDefaultTolH);

enum class BranchClass { nondecreasing, nonincreasing, constant, nonmonotone };

std::string to_string(BranchClass cls);

struct BranchReport {
    int id = 0;
    Direction direction = Direction::forward;
    double seed_eta = 0.0;
    BranchClass classification = BranchClass::nonmonotone;
    double max_violation = 0.0;      // worst slack-adjusted monotonicity defect
    Event event;
    bool failed = false;
    std::string error;
    Trajectory trajectory;
};

/// Trajectory-based certificate for the C1-super/subsolution property:
/// verdict_supersolution passes iff some forward branch has V nondecreasing
/// within the slack; verdict_subsolution iff some forward branch has V
/// nonincreasing. Branch seeding escapes measure-zero non-Lipschitz sets.
struct MonotonicityCertificate {
    Vec start;
    std::vector<BranchReport> branches;
    bool verdict_supersolution = false;
    bool verdict_subsolution = false;
};

struct CertificateOptions {
    IntegrateOptions integrate;
    double tol_mono_rel = 1e-6;   // slack per step: rel * (1 + |V0|) * dt
    std::vector<double> seed_etas = {0.0, 1e-8, -1e-8, 1e-6, -1e-6};
    bool run_backward = true;
};

MonotonicityCertificate monotonicity_certificate(const Candidate& candidate,
                                                 const PolyMatrixField& field, const Vec& x0,
                                                 const CertificateOptions& opts);

/// Classify a V sequence sampled at increasing times with per-step slack.
BranchClass classify_monotonicity(const std::vector<double>& times,
                                  const std::vector<double>& values, double tol_rel,
                                  double* max_violation = nullptr);

struct AmfTrial {
    double beta = 0.0;
    double sup_W = 0.0;
    bool pass = true;
};

/// Perturbation test of the absolutely-minimizing necessary condition.
/// k_star is the sampled sup of H(x, grad U) over the box; each trial
/// perturbs U by beta times a tensor-product quartic bump (vanishing with
/// its gradient on the box boundary) and checks that the sampled sup of
/// H(x, grad W) does not drop below k_star - tol. A failing trial exhibits a
/// competitor with strictly smaller sup, refuting absolute minimality.
struct AmfReport {
    double k_star = 0.0;
    double tol = 1e-3;
    int trials = 0;
    int sample_count = 0;
    std::vector<AmfTrial> trial_results;
    std::vector<AmfTrial> failures;
    bool pass = true;
};

struct AmfOptions {
    int samples_per_axis = 61;
    double tol_amf = 1e-3;
    std::uint64_t seed = 0;
};

AmfReport amf_necessary_test(const Candidate& candidate, const PolyMatrixField& field,
                             const Box& box, int trials, double amplitude,
                             const AmfOptions& opts = {});

/// The implicit boundary-value representation along a constant-V branch:
/// lhs = U(x0), rhs = t2/(t2-t1) U(x_{t1}) - t1/(t2-t1) U(x_{t2}), where t1
/// and t2 are the backward and forward exit times from the box.
struct RepresentationReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double t1 = 0.0;
    double t2 = 0.0;
    Vec x_t1, x_t2;
};

struct RepresentationOptions {
    double horizon = 50.0;
    HamiltonianKind kind = HamiltonianKind::degree1();
    double tol_H = kDefaultTolH;
};

/// Throws NoExitError if either direction fails to leave the box within the
/// horizon.
RepresentationReport representation_check(const Candidate& candidate, const PolyMatrixField& field,
                                          const Box& box, const Vec& x0,
                                          const RepresentationOptions& opts = {});

}  // namespace aronsson
