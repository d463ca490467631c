#include "aronsson/mintime.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "aronsson/rng.hpp"

namespace aronsson {

long MinTimeGrid::node_count() const {
    long n = 1;
    for (int s : shape) n *= s;
    return n;
}

Vec MinTimeGrid::node_coord(long flat) const {
    const int n = dim();
    Vec x(n);
    for (int axis = n - 1; axis >= 0; --axis) {
        const long i = flat % shape[axis];
        flat /= shape[axis];
        x[axis] = box.lo[axis] + spacing[axis] * static_cast<double>(i);
    }
    return x;
}

double MinTimeGrid::t_at(long flat) const {
    const double v = values[static_cast<std::size_t>(flat)];
    return v < 1.0 ? -std::log1p(-v) : std::numeric_limits<double>::infinity();
}

double MinTimeGrid::v_interp(const Vec& x) const {
    const int n = dim();
    if (x.size() != n) throw std::invalid_argument("v_interp: wrong dimension");
    std::vector<long> base(n);
    std::vector<double> frac(n);
    for (int axis = 0; axis < n; ++axis) {
        double g = (x[axis] - box.lo[axis]) / spacing[axis];
        g = std::clamp(g, 0.0, static_cast<double>(shape[axis] - 1));
        long i = static_cast<long>(std::floor(g));
        i = std::min<long>(i, shape[axis] - 2);
        base[axis] = i;
        frac[axis] = g - static_cast<double>(i);
    }
    std::vector<long> stride(n, 1);
    for (int axis = n - 2; axis >= 0; --axis) stride[axis] = stride[axis + 1] * shape[axis + 1];
    double acc = 0.0;
    for (int corner = 0; corner < (1 << n); ++corner) {
        double w = 1.0;
        long idx = 0;
        for (int axis = 0; axis < n; ++axis) {
            const bool hi = corner & (1 << axis);
            w *= hi ? frac[axis] : 1.0 - frac[axis];
            idx += (base[axis] + (hi ? 1 : 0)) * stride[axis];
        }
        acc += w * values[static_cast<std::size_t>(idx)];
    }
    return acc;
}

double MinTimeGrid::t_interp(const Vec& x) const {
    const double v = v_interp(x);
    return v < 1.0 - 1e-15 ? -std::log1p(-v) : std::numeric_limits<double>::infinity();
}

namespace {

struct Stencils {
    // Per control: per node, base flat index (or -1 when the foot leaves the
    // box) and 2^n multilinear corner weights.
    std::vector<std::vector<std::int64_t>> base;
    std::vector<std::vector<double>> weights;
    std::vector<long> corner_offset;
};

}  // namespace

MinTimeGrid solve_grid(const PolyMatrixField& field, const Box& box, std::vector<int> shape,
                       double target_radius, int control_count, double dt,
                       const SolveGridOptions& opts) {
    const int n = field.state_dim();
    if (box.dim() != n) throw std::invalid_argument("solve_grid: box/field dimension mismatch");
    if (n > 3) throw std::invalid_argument("solve_grid: grids with n > 3 are not supported");
    if (static_cast<int>(shape.size()) != n) {
        throw std::invalid_argument("solve_grid: shape/field dimension mismatch");
    }
    for (int s : shape) {
        if (s < 2) throw std::invalid_argument("solve_grid: need >= 2 nodes per axis");
    }
    if (!(dt > 0.0)) throw std::invalid_argument("solve_grid: dt must be positive");
    if (!(target_radius > 0.0)) throw std::invalid_argument("solve_grid: target radius must be positive");

    MinTimeGrid grid;
    grid.box = box;
    grid.shape = shape;
    grid.target_radius = target_radius;
    grid.dt = dt;
    grid.spacing = Vec(n);
    for (int axis = 0; axis < n; ++axis) {
        grid.spacing[axis] = (box.hi[axis] - box.lo[axis]) / (shape[axis] - 1);
    }
    const long N = grid.node_count();
    const std::vector<Vec> controls = sample_unit_sphere(field.control_dim(), control_count);
    grid.control_count = static_cast<int>(controls.size());

    std::vector<long> stride(n, 1);
    for (int axis = n - 2; axis >= 0; --axis) stride[axis] = stride[axis + 1] * shape[axis + 1];

    const int corners = 1 << n;
    const std::size_t stencil_bytes = static_cast<std::size_t>(N) * controls.size() *
                                      (sizeof(std::int64_t) + sizeof(double) * corners);
    if (stencil_bytes > opts.stencil_memory_budget) {
        throw std::invalid_argument(
            "solve_grid: stencil tables exceed the memory budget; use a smaller grid");
    }

    // Feet, CFL check and stencil tables.
    double max_speed = 0.0;
    Stencils st;
    st.corner_offset.resize(corners);
    for (int corner = 0; corner < corners; ++corner) {
        long off = 0;
        for (int axis = 0; axis < n; ++axis) {
            if (corner & (1 << axis)) off += stride[axis];
        }
        st.corner_offset[corner] = off;
    }
    st.base.resize(controls.size());
    st.weights.resize(controls.size());

    std::vector<Vec> coords(static_cast<std::size_t>(N));
    for (long i = 0; i < N; ++i) coords[static_cast<std::size_t>(i)] = grid.node_coord(i);

    for (std::size_t k = 0; k < controls.size(); ++k) {
        auto& bases = st.base[k];
        auto& wts = st.weights[k];
        bases.resize(static_cast<std::size_t>(N));
        wts.resize(static_cast<std::size_t>(N) * corners);
        for (long i = 0; i < N; ++i) {
            const Vec& x = coords[static_cast<std::size_t>(i)];
            const Vec f = field.sigma(x) * controls[k];
            max_speed = std::max(max_speed, f.norm());
            const Vec foot = x + dt * f;
            bool out = false;
            long base_idx = 0;
            double w[8];
            for (int c = 0; c < corners; ++c) w[c] = 1.0;
            for (int axis = 0; axis < n && !out; ++axis) {
                const double g = (foot[axis] - box.lo[axis]) / grid.spacing[axis];
                if (g < 0.0 || g > static_cast<double>(shape[axis] - 1)) {
                    out = true;
                    break;
                }
                long b = static_cast<long>(std::floor(g));
                b = std::min<long>(b, shape[axis] - 2);
                const double frac = g - static_cast<double>(b);
                base_idx += b * stride[axis];
                for (int c = 0; c < corners; ++c) {
                    w[c] *= (c & (1 << axis)) ? frac : 1.0 - frac;
                }
            }
            if (out) {
                bases[static_cast<std::size_t>(i)] = -1;
            } else {
                bases[static_cast<std::size_t>(i)] = base_idx;
                for (int c = 0; c < corners; ++c) {
                    wts[static_cast<std::size_t>(i) * corners + c] = w[c];
                }
            }
        }
    }

    const double min_h = grid.spacing.minCoeff();
    if (dt * max_speed > min_h) {
        std::ostringstream msg;
        msg << "solve_grid: CFL guard failed: dt * max|f| = " << dt * max_speed
            << " exceeds min spacing " << min_h;
        throw CflViolationError(msg.str());
    }

    std::vector<std::uint8_t> target(static_cast<std::size_t>(N), 0);
    for (long i = 0; i < N; ++i) {
        if (coords[static_cast<std::size_t>(i)].norm() <= target_radius) {
            target[static_cast<std::size_t>(i)] = 1;
        }
    }

    std::vector<double> v(static_cast<std::size_t>(N), 1.0);
    std::vector<double> v_new(static_cast<std::size_t>(N), 1.0);
    for (long i = 0; i < N; ++i) {
        if (target[static_cast<std::size_t>(i)]) v[static_cast<std::size_t>(i)] = 0.0;
    }

    const double c2 = std::exp(-dt);
    const double c1 = 1.0 - c2;
    const int nthreads = std::max(1, opts.threads);
    std::vector<double> best(static_cast<std::size_t>(N));

    auto sweep_range = [&](long lo, long hi, double* local_sup) {
        const double* vp = v.data();
        for (long i = lo; i < hi; ++i) best[static_cast<std::size_t>(i)] = 1.0;  // out-of-box feet
        for (std::size_t k = 0; k < st.base.size(); ++k) {
            const std::int64_t* bs = st.base[k].data();
            const double* ws = st.weights[k].data();
            if (corners == 4) {
                const long o1 = st.corner_offset[1], o2 = st.corner_offset[2],
                           o3 = st.corner_offset[3];
                for (long i = lo; i < hi; ++i) {
                    const std::int64_t b = bs[i];
                    if (b < 0) continue;
                    const double* w = ws + static_cast<std::size_t>(i) * 4;
                    const double acc = w[0] * vp[b] + w[1] * vp[b + o1] + w[2] * vp[b + o2] +
                                       w[3] * vp[b + o3];
                    best[static_cast<std::size_t>(i)] =
                        std::min(best[static_cast<std::size_t>(i)], acc);
                }
            } else {
                for (long i = lo; i < hi; ++i) {
                    const std::int64_t b = bs[i];
                    if (b < 0) continue;
                    const double* w = ws + static_cast<std::size_t>(i) * corners;
                    double acc = 0.0;
                    for (int c = 0; c < corners; ++c) {
                        acc += w[c] * vp[b + st.corner_offset[c]];
                    }
                    best[static_cast<std::size_t>(i)] =
                        std::min(best[static_cast<std::size_t>(i)], acc);
                }
            }
        }
        double sup = 0.0;
        for (long i = lo; i < hi; ++i) {
            const std::size_t ui = static_cast<std::size_t>(i);
            if (target[ui]) {
                v_new[ui] = 0.0;
                continue;
            }
            double nv = c1 + c2 * best[ui];
            nv = std::min(nv, v[ui]);  // monotone from v == 1
            v_new[ui] = nv;
            sup = std::max(sup, v[ui] - nv);
        }
        *local_sup = sup;
    };

    long it = 0;
    double sup_change = std::numeric_limits<double>::infinity();
    while (it < opts.max_iterations) {
        ++it;
        if (nthreads == 1) {
            sweep_range(0, N, &sup_change);
        } else {
            std::vector<double> sups(nthreads, 0.0);
            std::vector<std::thread> workers;
            const long chunk = (N + nthreads - 1) / nthreads;
            for (int t = 0; t < nthreads; ++t) {
                const long lo = t * chunk;
                const long hi = std::min(N, lo + chunk);
                if (lo >= hi) break;
                workers.emplace_back(sweep_range, lo, hi, &sups[static_cast<std::size_t>(t)]);
            }
            for (auto& w : workers) w.join();
            sup_change = *std::max_element(sups.begin(), sups.end());
        }
        v.swap(v_new);
        if (sup_change < opts.tol) break;
    }
    grid.iterations = it;
    grid.sup_change = sup_change;
    if (sup_change >= opts.tol) {
        std::ostringstream msg;
        msg << "solve_grid: iteration cap " << opts.max_iterations
            << " reached with residual " << sup_change;
        throw NonConvergenceError(msg.str());
    }
    grid.values = std::move(v);
    return grid;
}

double analytic_bound(const Candidate& candidate, const PolyMatrixField& field, const Vec& x,
                      double tol_H) {
    const ValueAlongGradient val = value_V(candidate, field, x, tol_H);
    if (val.singular) throw SingularPointError("analytic_bound: singular point");
    return val.U / val.H;
}

std::optional<double> feedback_reach_time(const Candidate& candidate, const PolyMatrixField& field,
                                          const Vec& x, double target_radius,
                                          const IntegrateOptions& opts) {
    IntegrateOptions io = opts;
    io.target_radius = target_radius;
    return hit_time(integrate(candidate, field, x, Direction::forward, io));
}

ExcondReport excond_scan(const Candidate& candidate, const PolyMatrixField& field, double eps,
                         double delta, int samples, std::uint64_t seed, double tol_H) {
    if (!(eps > 0.0) || !(delta > 0.0)) {
        throw std::invalid_argument("excond_scan: eps and delta must be positive");
    }
    const int n = field.state_dim();
    const Box cube = Box::cube(n, delta);
    Rng rng(seed);
    ExcondReport rep;
    for (int s = 0; s < samples; ++s) {
        const Vec x = rng.point_in(cube);
        rep.sampled++;
        const double r = x.norm();
        if (r >= delta || r == 0.0) continue;
        if (!candidate.in_c1_domain(x)) continue;
        const ValueAlongGradient val = value_V(candidate, field, x, tol_H);
        if (val.H < eps) continue;
        rep.qualifying++;
        const double ratio = val.U / r;
        if (ratio > rep.c_hat) {
            rep.c_hat = ratio;
            rep.witness = x;
        }
    }
    if (rep.qualifying == 0) {
        throw EmptyRegionError("excond_scan: no sampled point satisfies H >= eps and |x| < delta");
    }
    return rep;
}

ModulusReport modulus_estimate(const MinTimeGrid& grid, const Vec& base, const Vec& dir,
                               const std::vector<double>& radii) {
    if (dir.norm() == 0.0) throw std::invalid_argument("modulus_estimate: zero direction");
    const Vec d = dir / dir.norm();
    ModulusReport rep;
    rep.base = base;
    rep.dir = d;
    rep.radii = radii;
    if (!grid.box.contains(base)) {
        throw InsufficientPointsError("modulus_estimate: base point outside the grid box");
    }
    const double t_base = grid.t_interp(base);
    if (!std::isfinite(t_base)) {
        throw InsufficientPointsError("modulus_estimate: T(base) is not finite");
    }
    std::vector<double> ls, ld;
    for (double s : radii) {
        const Vec p = base + s * d;
        if (!grid.box.contains(p)) {
            throw InsufficientPointsError("modulus_estimate: probe point outside the grid box");
        }
        const double t = grid.t_interp(p);
        if (!std::isfinite(t)) {
            throw InsufficientPointsError("modulus_estimate: probe point has infinite T");
        }
        const double dT = std::abs(t - t_base);
        rep.pairs.emplace_back(s, dT);
        if (dT > 1e-12 && s > 0.0) {
            ls.push_back(std::log(s));
            ld.push_back(std::log(dT));
        }
    }
    if (ls.size() < 3) {
        throw InsufficientPointsError("modulus_estimate: fewer than 3 usable pairs for the fit");
    }
    const double nn = static_cast<double>(ls.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < ls.size(); ++i) {
        mx += ls[i];
        my += ld[i];
    }
    mx /= nn;
    my /= nn;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < ls.size(); ++i) {
        const double dx = ls[i] - mx;
        const double dy = ld[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    rep.exponent = sxy / sxx;
    rep.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return rep;
}

void write_grid_csv(const MinTimeGrid& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    const int n = grid.dim();
    for (int i = 1; i <= n; ++i) out << 'x' << i << ',';
    out << "v,T\n";
    out.precision(17);
    const long N = grid.node_count();
    for (long i = 0; i < N; ++i) {
        const Vec x = grid.node_coord(i);
        for (int axis = 0; axis < n; ++axis) out << x[axis] << ',';
        const double v = grid.v_at(i);
        out << v << ',';
        if (v < 1.0) {
            out << grid.t_at(i);
        } else {
            out << "inf";
        }
        out << '\n';
    }
}

void write_grid_meta(const MinTimeGrid& grid, const std::string& path) {
    nlohmann::json meta;
    meta["shape"] = grid.shape;
    meta["box_lo"] = std::vector<double>(grid.box.lo.begin(), grid.box.lo.end());
    meta["box_hi"] = std::vector<double>(grid.box.hi.begin(), grid.box.hi.end());
    meta["target_radius"] = grid.target_radius;
    meta["dt"] = grid.dt;
    meta["controls"] = grid.control_count;
    meta["iterations"] = grid.iterations;
    meta["sup_change"] = grid.sup_change;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << meta.dump(2) << '\n';
}

}  // namespace aronsson
