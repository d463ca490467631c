#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aronsson/candidate.hpp"
#include "aronsson/sysmodel.hpp"
#include "aronsson/types.hpp"

namespace aronsson {

enum class Direction { forward, backward };

enum class EventType { target_hit, domain_exit, singular_capture, horizon, step_failure };

std::string to_string(EventType type);

struct Event {
    EventType type = EventType::horizon;
    double t = 0.0;
};

struct TrajectorySample {
    double t = 0.0;
    Vec x;
    double U = 0.0;
    double V = 0.0;            // H(x, grad U), scaled per the Hamiltonian kind
    std::optional<Vec> a;      // feedback control when defined
};

/// A closed-loop path of xdot = -H_p(x, grad U(x)) sampled at the
/// integrator's accepted steps. Times are strictly increasing on forward
/// runs and strictly decreasing on backward runs.
struct Trajectory {
    std::vector<TrajectorySample> samples;
    Event event;
    Direction direction = Direction::forward;
    Vec seed_offset;

    const TrajectorySample& front() const { return samples.front(); }
    const TrajectorySample& back() const { return samples.back(); }
};

struct IntegrateOptions {
    double horizon = 1.0;
    double target_radius = 1e-3;           // <= 0 disables the target event
    std::optional<Box> box;
    HamiltonianKind kind = HamiltonianKind::degree1();
    Vec seed_offset;                       // empty means zero
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double tol_H = kDefaultTolH;
    double safety = 0.9;
    double max_step_fraction = 0.01;       // max step = horizon / 100
    double floor_step = 1e-14;
    long max_steps = 5'000'000;
};

/// Integrates the Hamiltonian dynamics from x0 (plus seed offset) until the
/// first event: |x| <= target_radius, exit from the box, V <= tol_H, the
/// horizon, or a step-size failure. Backward runs integrate the negated
/// field; identical inputs produce bitwise-identical trajectories.
Trajectory integrate(const Candidate& candidate, const PolyMatrixField& field, const Vec& x0,
                     Direction direction, const IntegrateOptions& opts);

/// Event time for target_hit trajectories, nullopt otherwise.
std::optional<double> hit_time(const Trajectory& trajectory);

/// CSV serialization: t, x1..xn, U, V, a1..am, event.
void write_trajectory_csv(const Trajectory& trajectory, const std::string& path);

}  // namespace aronsson
