#include "aronsson/aronsson_check.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

#include "aronsson/rng.hpp"

namespace aronsson {

SMatrixReport smatrix(const Candidate& candidate, const PolyMatrixField& field, const Vec& x) {
    const Evaluation ev = candidate.evaluate(x, /*want_hess=*/true);
    const Mat sig = field.sigma(x);
    const int m = field.control_dim();

    SMatrixReport rep;
    rep.x = x;
    rep.w = sig.transpose() * ev.grad;
    rep.S = sig.transpose() * (*ev.hess) * sig;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            // bracket term: grad U . (D sigma_j sigma_i)
            rep.S(i, j) += ev.grad.dot(field.column_jacobian(j, x) * sig.col(i));
        }
    }
    rep.Sstar = 0.5 * (rep.S + rep.S.transpose());
    rep.residual = -4.0 * rep.w.dot(rep.Sstar * rep.w);
    Eigen::SelfAdjointEigenSolver<Mat> es(rep.Sstar);
    rep.eig_Sstar = es.eigenvalues();
    return rep;
}

double residual_fd(const Candidate& candidate, const PolyMatrixField& field, const Vec& x,
                   double h) {
    if (!(h > 0.0)) throw std::invalid_argument("residual_fd: step must be positive");
    const Evaluation ev = candidate.evaluate(x);
    const Vec w = field.sigma(x).transpose() * ev.grad;
    const Vec G = 2.0 * (field.sigma(x) * w);  // (H^2)_p at (x, grad U(x))

    auto phi = [&](const Vec& y) {
        const Evaluation e = candidate.evaluate(y);
        return (field.sigma(y).transpose() * e.grad).squaredNorm();
    };
    return -(phi(x + h * G) - phi(x - h * G)) / (2.0 * h);
}

double residual_degree1(const SMatrixReport& report, double tol_H) {
    const double H = report.w.norm();
    if (H <= tol_H) throw SingularPointError("residual_degree1: H <= tol_H");
    return report.residual / (2.0 * H);
}

std::string to_string(BranchClass cls) {
    switch (cls) {
        case BranchClass::nondecreasing: return "nondecreasing";
        case BranchClass::nonincreasing: return "nonincreasing";
        case BranchClass::constant: return "constant";
        case BranchClass::nonmonotone: return "nonmonotone";
    }
    return "unknown";
}

BranchClass classify_monotonicity(const std::vector<double>& times,
                                  const std::vector<double>& values, double tol_rel,
                                  double* max_violation) {
    if (times.size() != values.size() || times.size() < 2) {
        if (max_violation) *max_violation = 0.0;
        return BranchClass::constant;
    }
    const double v0 = values.front();
    double worst_drop = 0.0;  // violation of nondecreasing
    double worst_rise = 0.0;  // violation of nonincreasing
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        const double dt = std::abs(times[k + 1] - times[k]);
        const double slack = tol_rel * (1.0 + std::abs(v0)) * dt;
        worst_drop = std::max(worst_drop, values[k] - values[k + 1] - slack);
        worst_rise = std::max(worst_rise, values[k + 1] - values[k] - slack);
    }
    const bool nondec = worst_drop <= 0.0;
    const bool noninc = worst_rise <= 0.0;
    if (max_violation) *max_violation = std::max(0.0, std::min(worst_drop, worst_rise));
    if (nondec && noninc) return BranchClass::constant;
    if (nondec) return BranchClass::nondecreasing;
    if (noninc) return BranchClass::nonincreasing;
    return BranchClass::nonmonotone;
}

MonotonicityCertificate monotonicity_certificate(const Candidate& candidate,
                                                 const PolyMatrixField& field, const Vec& x0,
                                                 const CertificateOptions& opts) {
    MonotonicityCertificate cert;
    cert.start = x0;
    const std::vector<int> seeded = candidate.non_lipschitz_coords(x0);

    int id = 0;
    std::vector<Direction> dirs = {Direction::forward};
    if (opts.run_backward) dirs.push_back(Direction::backward);

    for (Direction dir : dirs) {
        for (double eta : opts.seed_etas) {
            BranchReport br;
            br.id = id++;
            br.direction = dir;
            br.seed_eta = eta;
            IntegrateOptions io = opts.integrate;
            Vec offset = Vec::Zero(x0.size());
            for (int c : seeded) offset[c] = eta;
            io.seed_offset = offset;
            try {
                br.trajectory = integrate(candidate, field, x0, dir, io);
                br.event = br.trajectory.event;
                std::vector<double> ts, vs;
                ts.reserve(br.trajectory.samples.size());
                vs.reserve(br.trajectory.samples.size());
                // Classify in ascending time order regardless of direction.
                if (dir == Direction::forward) {
                    for (const auto& s : br.trajectory.samples) {
                        ts.push_back(s.t);
                        vs.push_back(s.V);
                    }
                } else {
                    for (auto it = br.trajectory.samples.rbegin();
                         it != br.trajectory.samples.rend(); ++it) {
                        ts.push_back(it->t);
                        vs.push_back(it->V);
                    }
                }
                br.classification =
                    classify_monotonicity(ts, vs, opts.tol_mono_rel, &br.max_violation);
            } catch (const std::runtime_error& e) {
                br.failed = true;
                br.error = e.what();
            }
            cert.branches.push_back(std::move(br));
            // Without non-Lipschitz coordinates all seeds coincide.
            if (seeded.empty()) break;
        }
    }

    for (const auto& br : cert.branches) {
        if (br.failed || br.direction != Direction::forward) continue;
        if (br.classification == BranchClass::nondecreasing ||
            br.classification == BranchClass::constant) {
            cert.verdict_supersolution = true;
        }
        if (br.classification == BranchClass::nonincreasing ||
            br.classification == BranchClass::constant) {
            cert.verdict_subsolution = true;
        }
    }
    return cert;
}

namespace {

/// q(t) = 16 t^2 (1-t)^2 on [0,1]: unit height, q = q' = 0 at both ends.
double quartic_bump(double t) {
    const double s = t * (1.0 - t);
    return 16.0 * s * s;
}

double quartic_bump_deriv(double t) {
    return 32.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
}

}  // namespace

AmfReport amf_necessary_test(const Candidate& candidate, const PolyMatrixField& field,
                             const Box& box, int trials, double amplitude,
                             const AmfOptions& opts) {
    const int n = box.dim();
    if (n != candidate.dim()) throw std::invalid_argument("amf: box/candidate dimension mismatch");
    const int mpa = std::max(2, opts.samples_per_axis);

    // Tensor sample grid over the closed box.
    std::vector<Vec> samples;
    samples.reserve(static_cast<std::size_t>(std::pow(mpa, n)));
    std::vector<int> idx(n, 0);
    while (true) {
        Vec x(n);
        for (int i = 0; i < n; ++i) {
            x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * idx[i] / (mpa - 1);
        }
        if (candidate.in_c1_domain(x)) samples.push_back(std::move(x));
        int axis = 0;
        while (axis < n && ++idx[axis] == mpa) idx[axis++] = 0;
        if (axis == n) break;
    }

    const Vec widths = box.widths();
    auto bump_grad = [&](const Vec& x) {
        Vec t(n), q(n), dq(n);
        for (int i = 0; i < n; ++i) {
            t[i] = (x[i] - box.lo[i]) / widths[i];
            q[i] = quartic_bump(t[i]);
            dq[i] = quartic_bump_deriv(t[i]) / widths[i];
        }
        Vec g(n);
        for (int i = 0; i < n; ++i) {
            double prod = dq[i];
            for (int j = 0; j < n; ++j) {
                if (j != i) prod *= q[j];
            }
            g[i] = prod;
        }
        return g;
    };

    AmfReport rep;
    rep.tol = opts.tol_amf;
    rep.trials = trials;
    rep.sample_count = static_cast<int>(samples.size());

    std::vector<Vec> grads, bgrads;
    grads.reserve(samples.size());
    bgrads.reserve(samples.size());
    double k_star = -std::numeric_limits<double>::infinity();
    for (const Vec& x : samples) {
        const Evaluation ev = candidate.evaluate(x);
        grads.push_back(ev.grad);
        bgrads.push_back(bump_grad(x));
        k_star = std::max(k_star, hamiltonian(field, x, ev.grad));
    }
    rep.k_star = k_star;

    Rng rng(opts.seed);
    rep.trial_results.reserve(trials);
    for (int tr = 0; tr < trials; ++tr) {
        const double beta = rng.uniform(-amplitude, amplitude);
        double sup_w = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < samples.size(); ++s) {
            sup_w = std::max(sup_w, hamiltonian(field, samples[s], grads[s] + beta * bgrads[s]));
        }
        AmfTrial t{beta, sup_w, sup_w >= k_star - opts.tol_amf};
        if (!t.pass) {
            rep.failures.push_back(t);
            rep.pass = false;
        }
        rep.trial_results.push_back(t);
    }
    return rep;
}

RepresentationReport representation_check(const Candidate& candidate, const PolyMatrixField& field,
                                          const Box& box, const Vec& x0,
                                          const RepresentationOptions& opts) {
    RepresentationReport rep;
    rep.lhs = candidate.evaluate(x0).U;

    auto run = [&](Direction dir) -> std::pair<double, Vec> {
        if (box.margin(x0) >= 0.0) return {0.0, x0};  // already on the boundary
        IntegrateOptions io;
        io.horizon = opts.horizon;
        io.target_radius = 0.0;
        io.box = box;
        io.kind = opts.kind;
        io.tol_H = opts.tol_H;
        Trajectory traj = integrate(candidate, field, x0, dir, io);
        if (traj.event.type != EventType::domain_exit) {
            throw NoExitError("representation_check: trajectory did not exit the box (" +
                              to_string(traj.event.type) + ")");
        }
        return {traj.event.t, traj.back().x};
    };

    auto [t2, x2] = run(Direction::forward);
    auto [t1, x1] = run(Direction::backward);
    rep.t1 = t1;
    rep.t2 = t2;
    rep.x_t1 = x1;
    rep.x_t2 = x2;
    if (t2 == t1) {
        rep.rhs = rep.lhs;  // degenerate zero-length excursion
        return rep;
    }
    const double u1 = candidate.evaluate(x1).U;
    const double u2 = candidate.evaluate(x2).U;
    rep.rhs = (t2 * u1 - t1 * u2) / (t2 - t1);
    return rep;
}

}  // namespace aronsson
