#include "aronsson/dynamics.hpp"

#include <cmath>
#include <fstream>

namespace aronsson {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187, kA53 = 64448.0 / 6561,
                 kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192, kB5 = -2187.0 / 6784,
                 kB6 = 11.0 / 84;
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                 kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;

struct PointEval {
    Vec f;          // closed-loop field, direction applied
    double U = 0.0;
    double V = 0.0;
    double H = 0.0;  // degree-1 Hamiltonian value
    Vec w;           // t(sigma) grad U
};

class ClosedLoopField {
public:
    ClosedLoopField(const Candidate& candidate, const PolyMatrixField& field,
                    const IntegrateOptions& opts, Direction direction)
        : candidate_(candidate), field_(field), opts_(opts),
          sign_(direction == Direction::forward ? 1.0 : -1.0) {}

    /// Throws EvalOutsideDomainError or SingularPointError where the
    /// closed-loop field is undefined.
    PointEval eval(const Vec& x) const {
        PointEval pe;
        const Evaluation ev = candidate_.evaluate(x);
        const Mat s = field_.sigma(x);
        pe.w = s.transpose() * ev.grad;
        pe.H = pe.w.norm();
        pe.U = ev.U;
        if (opts_.kind.mode == HamiltonianKind::Mode::degree1) {
            pe.V = pe.H;
            if (pe.H <= opts_.tol_H) {
                throw SingularPointError("closed-loop field undefined: H <= tol_H");
            }
            pe.f = -sign_ * (s * (pe.w / pe.H));
        } else {
            pe.V = std::sqrt(std::max(0.0, opts_.kind.scale)) * pe.H;
            pe.f = -sign_ * (2.0 * opts_.kind.scale * (s * pe.w));
        }
        return pe;
    }

    std::optional<Vec> control(const PointEval& pe) const {
        if (pe.H <= opts_.tol_H) return std::nullopt;
        return Vec(-pe.w / pe.H);
    }

private:
    const Candidate& candidate_;
    const PolyMatrixField& field_;
    const IntegrateOptions& opts_;
    double sign_;
};

struct StepResult {
    bool ok = false;   // RHS evaluations all succeeded
    Vec x_new;
    Vec err;
};

StepResult rk45_step(const ClosedLoopField& F, const Vec& x, const Vec& k1, double h) {
    StepResult r;
    try {
        const Vec k2 = F.eval(x + h * (kA21 * k1)).f;
        const Vec k3 = F.eval(x + h * (kA31 * k1 + kA32 * k2)).f;
        const Vec k4 = F.eval(x + h * (kA41 * k1 + kA42 * k2 + kA43 * k3)).f;
        const Vec k5 = F.eval(x + h * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4)).f;
        const Vec k6 = F.eval(x + h * (kA61 * k1 + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5)).f;
        r.x_new = x + h * (kB1 * k1 + kB3 * k3 + kB4 * k4 + kB5 * k5 + kB6 * k6);
        const Vec k7 = F.eval(r.x_new).f;
        r.err = h * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 + kE7 * k7);
        r.ok = true;
    } catch (const EvalOutsideDomainError&) {
    } catch (const SingularPointError&) {
    }
    return r;
}

double min_distance_to_origin(const Vec& a, const Vec& b) {
    const Vec d = b - a;
    const double dd = d.squaredNorm();
    if (dd == 0.0) return a.norm();
    const double t = std::clamp(-a.dot(d) / dd, 0.0, 1.0);
    return (a + t * d).norm();
}

}  // namespace

std::string to_string(EventType type) {
    switch (type) {
        case EventType::target_hit: return "target_hit";
        case EventType::domain_exit: return "domain_exit";
        case EventType::singular_capture: return "singular_capture";
        case EventType::horizon: return "horizon";
        case EventType::step_failure: return "step_failure";
    }
    return "unknown";
}

Trajectory integrate(const Candidate& candidate, const PolyMatrixField& field, const Vec& x0,
                     Direction direction, const IntegrateOptions& opts) {
    if (x0.size() != candidate.dim() || x0.size() != field.state_dim()) {
        throw std::invalid_argument("integrate: dimension mismatch");
    }
    Trajectory traj;
    traj.direction = direction;
    traj.seed_offset = opts.seed_offset.size() ? opts.seed_offset : Vec(Vec::Zero(x0.size()));
    if (traj.seed_offset.size() != x0.size()) {
        throw std::invalid_argument("integrate: seed offset has wrong dimension");
    }

    const ClosedLoopField F(candidate, field, opts, direction);
    const double tsign = direction == Direction::forward ? 1.0 : -1.0;
    const double rho = opts.target_radius;

    Vec x = x0 + traj.seed_offset;

    auto record = [&](double tau, const Vec& xs, const PointEval& pe) {
        traj.samples.push_back({tsign * tau, xs, pe.U, pe.V, F.control(pe)});
    };

    // Immediate target hit takes precedence over the regularity precondition.
    if (rho > 0.0 && x.norm() <= rho) {
        PointEval pe;
        if (candidate.in_c1_domain(x)) {
            const Evaluation ev = candidate.evaluate(x);
            pe.U = ev.U;
            pe.w = field.sigma(x).transpose() * ev.grad;
            pe.H = pe.w.norm();
            pe.V = opts.kind.mode == HamiltonianKind::Mode::degree1
                       ? pe.H
                       : std::sqrt(std::max(0.0, opts.kind.scale)) * pe.H;
        } else {
            pe.w = Vec::Zero(field.control_dim());
        }
        record(0.0, x, pe);
        traj.event = {EventType::target_hit, 0.0};
        return traj;
    }

    PointEval pe0 = F.eval(x);  // throws if x0 is singular or outside the C1 domain
    if (pe0.V <= opts.tol_H) {
        throw SingularPointError("integrate: start point is singular");
    }
    record(0.0, x, pe0);

    if (opts.box && !opts.box->contains(x)) {
        traj.event = {EventType::domain_exit, 0.0};
        return traj;
    }

    const double max_step = opts.horizon * opts.max_step_fraction;
    double h = max_step / 100.0;
    double tau = 0.0;
    Vec k1 = pe0.f;

    // Bisect an event crossing inside an accepted step, using fixed-size
    // RK sub-steps from the step's start state.
    auto bisect = [&](const Vec& xs, const Vec& k1s, double h_hi,
                      auto&& triggered) -> std::pair<double, Vec> {
        double lo = 0.0, hi = h_hi;
        Vec x_hi = rk45_step(F, xs, k1s, h_hi).x_new;
        for (int it = 0; it < 80 && (hi - lo) > 1e-16 * h_hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            StepResult sr = rk45_step(F, xs, k1s, mid);
            if (!sr.ok || triggered(xs, sr.x_new)) {
                hi = mid;
                if (sr.ok) x_hi = sr.x_new;
            } else {
                lo = mid;
            }
        }
        return {hi, x_hi};
    };

    for (long step = 0; step < opts.max_steps; ++step) {
        bool final_step = false;
        if (tau + h >= opts.horizon) {
            h = opts.horizon - tau;
            final_step = true;
        }
        if (h < opts.floor_step) {
            traj.event = {EventType::step_failure, tsign * tau};
            return traj;
        }

        StepResult sr = rk45_step(F, x, k1, h);
        if (!sr.ok) {
            h *= 0.5;
            continue;
        }
        double err_norm = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double sc = opts.abs_tol +
                              opts.rel_tol * std::max(std::abs(x[i]), std::abs(sr.x_new[i]));
            const double e = sr.err[i] / sc;
            err_norm += e * e;
        }
        err_norm = std::sqrt(err_norm / static_cast<double>(x.size()));
        const double factor =
            std::clamp(opts.safety * std::pow(std::max(err_norm, 1e-300), -0.2), 0.2, 5.0);

        if (err_norm > 1.0) {
            h *= factor;
            continue;
        }

        // Accepted. Look for events between x and x_new.
        const bool hit_target =
            rho > 0.0 && (sr.x_new.norm() <= rho || min_distance_to_origin(x, sr.x_new) <= rho);
        const bool exited = opts.box && !opts.box->contains(sr.x_new);

        PointEval pe_new;
        bool pe_new_ok = true;
        try {
            pe_new = F.eval(sr.x_new);
        } catch (const std::runtime_error&) {
            pe_new_ok = false;
        }
        const bool captured = pe_new_ok && pe_new.V <= opts.tol_H;

        if (hit_target || exited || (!pe_new_ok) || captured) {
            EventType type;
            double t_ev;
            Vec x_ev;
            if (hit_target) {
                auto [s, xe] = bisect(x, k1, h, [&](const Vec& xa, const Vec& xb) {
                    return xb.norm() <= rho || min_distance_to_origin(xa, xb) <= rho;
                });
                type = EventType::target_hit;
                t_ev = tau + s;
                x_ev = xe;
            } else if (exited) {
                auto [s, xe] = bisect(x, k1, h, [&](const Vec&, const Vec& xb) {
                    return !opts.box->contains(xb);
                });
                type = EventType::domain_exit;
                t_ev = tau + s;
                x_ev = xe;
            } else {
                // Singular capture (or loss of the C1 domain, which for the
                // built-in candidates only happens at the singular minimum).
                type = EventType::singular_capture;
                t_ev = tau + h;
                x_ev = sr.x_new;
            }
            PointEval pe_ev;
            try {
                pe_ev = F.eval(x_ev);
            } catch (const std::runtime_error&) {
                const Evaluation ev = candidate.in_c1_domain(x_ev)
                                          ? candidate.evaluate(x_ev)
                                          : Evaluation{0.0, Vec::Zero(x.size()), std::nullopt};
                pe_ev.U = ev.U;
                pe_ev.w = Vec::Zero(field.control_dim());
                pe_ev.H = 0.0;
                pe_ev.V = 0.0;
            }
            record(t_ev, x_ev, pe_ev);
            traj.event = {type, tsign * t_ev};
            return traj;
        }

        tau += h;
        x = sr.x_new;
        k1 = pe_new.f;
        record(tau, x, pe_new);

        if (final_step || tau >= opts.horizon) {
            traj.event = {EventType::horizon, tsign * tau};
            return traj;
        }
        h = std::min(h * factor, max_step);
    }
    traj.event = {EventType::step_failure, tsign * tau};
    return traj;
}

std::optional<double> hit_time(const Trajectory& trajectory) {
    if (trajectory.event.type != EventType::target_hit) return std::nullopt;
    return std::abs(trajectory.event.t);
}

void write_trajectory_csv(const Trajectory& trajectory, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    const int n = trajectory.samples.empty() ? 0 : static_cast<int>(trajectory.samples[0].x.size());
    int m = 0;
    for (const auto& s : trajectory.samples) {
        if (s.a) { m = static_cast<int>(s.a->size()); break; }
    }
    out << "t";
    for (int i = 1; i <= n; ++i) out << ",x" << i;
    out << ",U,V";
    for (int j = 1; j <= m; ++j) out << ",a" << j;
    out << ",event\n";
    out.precision(17);
    for (std::size_t i = 0; i < trajectory.samples.size(); ++i) {
        const auto& s = trajectory.samples[i];
        out << s.t;
        for (int k = 0; k < n; ++k) out << ',' << s.x[k];
        out << ',' << s.U << ',' << s.V;
        for (int j = 0; j < m; ++j) {
            out << ',';
            if (s.a) out << (*s.a)[j];
        }
        out << ',';
        if (i + 1 == trajectory.samples.size()) out << to_string(trajectory.event.type);
        out << '\n';
    }
}

}  // namespace aronsson
