#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aronsson/candidate.hpp"
#include "aronsson/dynamics.hpp"
#include "aronsson/sysmodel.hpp"
#include "aronsson/types.hpp"

namespace aronsson {

/// Kruzhkov-transformed minimum-time values v = 1 - exp(-T) on a rectangular
/// grid: v = 0 exactly on nodes inside the target ball, v in [0,1]
/// everywhere, and T = -log(1 - v) recovered for reporting (infinite at
/// v = 1). Produced by monotone Jacobi value iteration from v == 1.
struct MinTimeGrid {
    Box box;
    std::vector<int> shape;
    Vec spacing;
    std::vector<double> values;     // flattened row-major, last axis contiguous
    double target_radius = 0.0;
    int control_count = 0;
    double dt = 0.0;
    long iterations = 0;
    double sup_change = 0.0;

    int dim() const { return static_cast<int>(shape.size()); }
    long node_count() const;
    Vec node_coord(long flat) const;
    double v_at(long flat) const { return values[static_cast<std::size_t>(flat)]; }
    double t_at(long flat) const;

    /// Multilinear interpolation of v (clamped to the box).
    double v_interp(const Vec& x) const;
    /// T at an arbitrary point, +infinity where the interpolated v reaches 1.
    double t_interp(const Vec& x) const;
};

struct SolveGridOptions {
    double tol = 1e-9;
    long max_iterations = 100000;
    int threads = 1;
    std::size_t stencil_memory_budget = 512ull << 20;
};

/// Value iteration v <- min_a {1 - e^{-dt} + e^{-dt} Interp[v](x + dt f(x,a))}
/// with multilinear interpolation; feet leaving the box read v = 1. Sweeps
/// until sup_change < tol or the iteration cap. Controls are the symmetric
/// sphere samples of the field's control space. Throws CflViolationError if
/// dt exceeds min spacing / max sampled speed, NonConvergenceError at the cap.
MinTimeGrid solve_grid(const PolyMatrixField& field, const Box& box, std::vector<int> shape,
                       double target_radius, int control_count, double dt,
                       const SolveGridOptions& opts = {});

/// U(x) / H(x, grad U(x)), the reach-time upper bound at a regular point.
double analytic_bound(const Candidate& candidate, const PolyMatrixField& field, const Vec& x,
                      double tol_H = kDefaultTolH);

/// Hit time of the closed-loop trajectory onto the rho-ball; nullopt when
/// capture, exit or the horizon occurs first.
std::optional<double> feedback_reach_time(const Candidate& candidate, const PolyMatrixField& field,
                                          const Vec& x, double target_radius,
                                          const IntegrateOptions& opts);

struct ExcondReport {
    double c_hat = 0.0;
    Vec witness;
    int qualifying = 0;
    int sampled = 0;
};

/// Scan of the excess-decay condition: c_hat = max U(x)/|x| over sampled
/// points with H(x, grad U(x)) >= eps and |x| < delta. Throws
/// EmptyRegionError when no sample qualifies.
ExcondReport excond_scan(const Candidate& candidate, const PolyMatrixField& field, double eps,
                         double delta, int samples, std::uint64_t seed = 0,
                         double tol_H = kDefaultTolH);

/// Least-squares log-log fit of |T(base + s dir) - T(base)| against s.
struct ModulusReport {
    Vec base;
    Vec dir;
    std::vector<double> radii;
    double exponent = 0.0;
    double r2 = 0.0;
    std::vector<std::pair<double, double>> pairs;  // (|dx|, |dT|)
};

/// Probes must lie inside the grid box with finite T; pairs with |dT| below
/// resolution are dropped from the fit. Throws InsufficientPointsError when
/// fewer than three usable pairs remain.
ModulusReport modulus_estimate(const MinTimeGrid& grid, const Vec& base, const Vec& dir,
                               const std::vector<double>& radii);

/// CSV (x1..xn, v, T) and a JSON metadata sidecar.
void write_grid_csv(const MinTimeGrid& grid, const std::string& path);
void write_grid_meta(const MinTimeGrid& grid, const std::string& path);

}  // namespace aronsson
