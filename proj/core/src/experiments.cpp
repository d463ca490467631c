#include "aronsson/experiments.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "aronsson/rng.hpp"

namespace aronsson {

namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError(context + ": unknown key \"" + key + "\"");
        }
    }
}

Vec vec_from(const json& j, const std::string& context) {
    if (!j.is_array() || j.empty()) throw ConfigError(context + ": expected a number array");
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(context + ": expected numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

Mat mat_from(const json& j, const std::string& context) {
    if (!j.is_array() || j.empty()) throw ConfigError(context + ": expected a matrix (array of rows)");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    if (cols == 0) throw ConfigError(context + ": expected a matrix (array of rows)");
    Mat m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols) {
            throw ConfigError(context + ": ragged matrix rows");
        }
        for (std::size_t k = 0; k < cols; ++k) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
        }
    }
    return m;
}

Box box_from(const json& j, const std::string& context) {
    check_keys(j, {"lo", "hi"}, context);
    if (!j.contains("lo") || !j.contains("hi")) {
        throw ConfigError(context + ": box needs \"lo\" and \"hi\"");
    }
    return Box(vec_from(j["lo"], context + ".lo"), vec_from(j["hi"], context + ".hi"));
}

json box_to_json(const Box& b) {
    return json{{"lo", std::vector<double>(b.lo.begin(), b.lo.end())},
                {"hi", std::vector<double>(b.hi.begin(), b.hi.end())}};
}

/// Merge user params over defaults; user keys must be a subset of defaults.
json merge_params(const json& defaults, const json& user, const std::string& context) {
    json out = defaults;
    if (user.is_null()) return out;
    if (!user.is_object()) throw ConfigError(context + ": expected an object");
    for (const auto& [key, value] : user.items()) {
        if (!defaults.contains(key)) {
            throw ConfigError(context + ": unknown key \"" + key + "\"");
        }
        out[key] = value;
    }
    return out;
}

const std::vector<std::string> kExperimentNames = {
    "check-aronsson", "certify", "simulate", "amf-test", "representation",
    "mintime-grid", "bound-compare", "modulus", "excond", "counterexample"};

json default_params(const std::string& name) {
    if (name == "check-aronsson") {
        return json{{"box", nullptr},       {"points", 200},   {"fd_step", 1e-4},
                    {"tol_smatrix", 1e-8},  {"tol_fd", 1e-6},  {"min_H", 0.05},
                    {"min_radius", 0.5}};
    }
    if (name == "certify") {
        return json{{"x0", nullptr},
                    {"horizon", 1.0},
                    {"target_radius", 1e-3},
                    {"tol_mono_rel", 1e-6},
                    {"expect_supersolution", nullptr},
                    {"expect_subsolution", nullptr},
                    {"write_trajectories", true}};
    }
    if (name == "simulate") {
        return json{{"x0", nullptr},       {"direction", "forward"}, {"horizon", 1.0},
                    {"target_radius", 1e-3}, {"seed_offset", nullptr}, {"box", nullptr},
                    {"expect_event", nullptr}};
    }
    if (name == "amf-test") {
        return json{{"box", nullptr},   {"trials", 200},          {"amplitude", 0.2},
                    {"tol_amf", 1e-3},  {"samples_per_axis", 61}, {"expect", "pass"}};
    }
    if (name == "representation") {
        return json{{"box", nullptr}, {"x0", nullptr}, {"horizon", 50.0}, {"tol", 1e-4}};
    }
    if (name == "mintime-grid") {
        return json{{"box", nullptr},          {"shape", nullptr},
                    {"target_radius", 0.1},    {"controls", 64},
                    {"dt", 0.005},             {"tol", 1e-9},
                    {"max_iterations", 100000},{"write_grid", true},
                    {"probes", json::array()}, {"dominance_slack", nullptr},
                    {"eikonal_cells", nullptr}};
    }
    if (name == "bound-compare") {
        return json{{"sample_box", nullptr}, {"starts", 50},      {"target_radius", 1e-3},
                    {"tol_abs", 5e-3},       {"min_H", 0.2},      {"constant_v_band", true},
                    {"horizon_factor", 1.5}};
    }
    if (name == "modulus") {
        return json{{"grid", nullptr}, {"lines", json::array()}};
    }
    if (name == "excond") {
        return json{{"eps", 0.5}, {"delta", 0.5}, {"samples", 4096}, {"c_max", nullptr}};
    }
    if (name == "counterexample") {
        return json{{"horizon", 1.0}, {"eta", 1e-6}, {"tol_match", 1e-6}, {"tol_drift", 1e-6}};
    }
    throw ConfigError("unknown experiment \"" + name + "\"");
}

SystemCatalogEntry parse_system(const json& j, json& resolved) {
    if (!j.is_object() || !j.contains("name")) throw ConfigError("system: needs a \"name\"");
    const std::string name = j["name"].get<std::string>();
    if (name == "isotropic") {
        check_keys(j, {"name", "n"}, "system");
        const int n = j.value("n", 2);
        resolved = json{{"name", name}, {"n", n}};
        return SystemCatalogEntry::isotropic(n);
    }
    if (name == "hormander") {
        check_keys(j, {"name", "m", "B"}, "system");
        const int m = j.value("m", 2);
        Mat B;
        if (j.contains("B")) {
            B = mat_from(j["B"], "system.B");
        } else if (m == 2) {
            B = Mat(2, 2);
            B << 0, -1, 1, 0;
        } else {
            throw ConfigError("system: hormander with m != 2 requires an explicit B");
        }
        json bj = json::array();
        for (Eigen::Index r = 0; r < B.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < B.cols(); ++c) row.push_back(B(r, c));
            bj.push_back(row);
        }
        resolved = json{{"name", name}, {"m", m}, {"B", bj}};
        return SystemCatalogEntry::hormander(m, B);
    }
    if (name == "grushin") {
        check_keys(j, {"name", "m"}, "system");
        const int m = j.value("m", 1);
        resolved = json{{"name", name}, {"m", m}};
        return SystemCatalogEntry::grushin(m);
    }
    if (name == "custom") {
        check_keys(j, {"name", "n", "control_dim", "entries", "lipschitz_bound"}, "system");
        if (!j.contains("n") || !j.contains("control_dim") || !j.contains("entries")) {
            throw ConfigError("system: custom needs n, control_dim and entries");
        }
        const int n = j["n"].get<int>();
        const int m = j["control_dim"].get<int>();
        const json& ej = j["entries"];
        if (!ej.is_array() || static_cast<int>(ej.size()) != n * m) {
            throw ConfigError("system.entries: expected n*control_dim monomial tables");
        }
        std::vector<Polynomial> entries;
        entries.reserve(ej.size());
        for (const auto& tbl : ej) {
            Polynomial p(n);
            if (!tbl.is_array()) throw ConfigError("system.entries: each entry is a monomial array");
            for (const auto& mono : tbl) {
                check_keys(mono, {"coeff", "exponents"}, "system.entries monomial");
                std::vector<int> e = mono.at("exponents").get<std::vector<int>>();
                p.add_term(mono.at("coeff").get<double>(), std::move(e));
            }
            entries.push_back(std::move(p));
        }
        const double lip = j.value("lipschitz_bound", 0.0);
        resolved = j;
        resolved["lipschitz_bound"] = lip;
        return SystemCatalogEntry::custom(PolyMatrixField(n, m, std::move(entries), lip));
    }
    throw ConfigError("system: unknown name \"" + name + "\"");
}

Candidate parse_candidate(const json& j, json& resolved) {
    if (!j.is_object() || !j.contains("kind")) throw ConfigError("candidate: needs a \"kind\"");
    const std::string kind = j["kind"].get<std::string>();
    const bool negate = j.value("negate", false);
    Candidate c = Candidate::quadratic(Mat::Identity(1, 1));
    if (kind == "gauge") {
        check_keys(j, {"kind", "m", "negate"}, "candidate");
        const int m = j.value("m", 1);
        c = Candidate::gauge(m);
        resolved = json{{"kind", kind}, {"m", m}, {"negate", negate}};
    } else if (kind == "abspower") {
        check_keys(j, {"kind", "alphas", "signs", "negate"}, "candidate");
        if (!j.contains("alphas") || !j.contains("signs")) {
            throw ConfigError("candidate: abspower needs alphas and signs");
        }
        c = Candidate::abspower(vec_from(j["alphas"], "candidate.alphas"),
                                vec_from(j["signs"], "candidate.signs"));
        resolved = j;
        resolved["negate"] = negate;
    } else if (kind == "quadratic") {
        check_keys(j, {"kind", "Q", "negate"}, "candidate");
        if (!j.contains("Q")) throw ConfigError("candidate: quadratic needs Q");
        c = Candidate::quadratic(mat_from(j["Q"], "candidate.Q"));
        resolved = j;
        resolved["negate"] = negate;
    } else if (kind == "polynomial") {
        check_keys(j, {"kind", "nvars", "monomials", "negate"}, "candidate");
        if (!j.contains("nvars") || !j.contains("monomials")) {
            throw ConfigError("candidate: polynomial needs nvars and monomials");
        }
        Polynomial p(j["nvars"].get<int>());
        for (const auto& mono : j["monomials"]) {
            check_keys(mono, {"coeff", "exponents"}, "candidate.monomials");
            p.add_term(mono.at("coeff").get<double>(), mono.at("exponents").get<std::vector<int>>());
        }
        c = Candidate::polynomial(std::move(p));
        resolved = j;
        resolved["negate"] = negate;
    } else {
        throw ConfigError("candidate: unknown kind \"" + kind + "\"");
    }
    return negate ? c.negated() : c;
}

HamiltonianKind parse_kind(const json& j, json& resolved) {
    if (j.is_null()) {
        resolved = json{{"mode", "degree1"}, {"scale", 1.0}};
        return HamiltonianKind::degree1();
    }
    check_keys(j, {"mode", "scale"}, "hamiltonian");
    const std::string mode = j.value("mode", "degree1");
    const double scale = j.value("scale", 1.0);
    resolved = json{{"mode", mode}, {"scale", scale}};
    if (mode == "degree1") return HamiltonianKind::degree1();
    if (mode == "squared") return HamiltonianKind::squared(scale);
    throw ConfigError("hamiltonian: mode must be degree1 or squared");
}

json assertion(const std::string& name, bool pass, const json& detail = json::object()) {
    json a = detail;
    a["name"] = name;
    a["pass"] = pass;
    return a;
}

bool all_pass(const json& assertions) {
    for (const auto& a : assertions) {
        if (!a["pass"].get<bool>()) return false;
    }
    return true;
}

struct RunContext {
    const ExperimentConfig& cfg;
    fs::path outdir;
    std::optional<MinTimeGrid> grid;

    const MinTimeGrid& require_grid(const json& gp, const std::string& context) {
        if (grid) return *grid;
        if (gp.is_null() || gp["box"].is_null() || gp["shape"].is_null()) {
            throw ConfigError(context + ": no grid parameters available (configure mintime-grid)");
        }
        SolveGridOptions opts;
        opts.tol = gp["tol"].get<double>();
        opts.max_iterations = gp["max_iterations"].get<long>();
        opts.threads = cfg.threads;
        grid = solve_grid(cfg.system.field, box_from(gp["box"], context + ".box"),
                          gp["shape"].get<std::vector<int>>(), gp["target_radius"].get<double>(),
                          gp["controls"].get<int>(), gp["dt"].get<double>(), opts);
        return *grid;
    }
};

json run_check_aronsson(RunContext& ctx, const json& p) {
    const auto& cfg = ctx.cfg;
    if (p["box"].is_null()) throw ConfigError("check-aronsson: params.box is required");
    const Box box = box_from(p["box"], "check-aronsson.box");
    const int points = p["points"].get<int>();
    const double h = p["fd_step"].get<double>();
    const double min_H = p["min_H"].get<double>();
    const double min_r = p["min_radius"].get<double>();

    Rng rng(cfg.seed);
    double worst_sm = 0.0, worst_fd = 0.0;
    std::ofstream csv(ctx.outdir / "check-aronsson.csv");
    csv.precision(17);
    for (int i = 1; i <= box.dim(); ++i) csv << 'x' << i << ',';
    csv << "residual,residual_fd\n";
    int got = 0;
    long attempts = 0;
    while (got < points && attempts < 1000L * points) {
        ++attempts;
        const Vec x = rng.point_in(box);
        if (x.norm() < min_r) continue;
        if (!cfg.candidate.in_c1_domain(x) || !cfg.candidate.hessian_available(x)) continue;
        const ValueAlongGradient val = value_V(cfg.candidate, cfg.system.field, x);
        if (val.H < min_H) continue;
        const SMatrixReport rep = smatrix(cfg.candidate, cfg.system.field, x);
        const double rfd = residual_fd(cfg.candidate, cfg.system.field, x, h);
        worst_sm = std::max(worst_sm, std::abs(rep.residual));
        worst_fd = std::max(worst_fd, std::abs(rfd));
        for (int k = 0; k < box.dim(); ++k) csv << x[k] << ',';
        csv << rep.residual << ',' << rfd << '\n';
        ++got;
    }
    json assertions = json::array();
    assertions.push_back(assertion("sampled_enough_points", got == points,
                                   {{"observed", got}, {"required", points}}));
    assertions.push_back(assertion("smatrix_residual_zero", worst_sm <= p["tol_smatrix"].get<double>(),
                                   {{"observed", worst_sm}, {"limit", p["tol_smatrix"]}}));
    assertions.push_back(assertion("fd_residual_zero", worst_fd <= p["tol_fd"].get<double>(),
                                   {{"observed", worst_fd}, {"limit", p["tol_fd"]}}));
    return json{{"name", "check-aronsson"},
                {"anchor", "gauge-solution-residuals"},
                {"points", got},
                {"max_abs_residual", worst_sm},
                {"max_abs_residual_fd", worst_fd},
                {"assertions", assertions}};
}

json branch_to_json(const BranchReport& br) {
    json b{{"id", br.id},
           {"direction", br.direction == Direction::forward ? "forward" : "backward"},
           {"seed_eta", br.seed_eta},
           {"failed", br.failed}};
    if (br.failed) {
        b["error"] = br.error;
    } else {
        b["classification"] = to_string(br.classification);
        b["max_violation"] = br.max_violation;
        b["event"] = to_string(br.event.type);
        b["event_t"] = br.event.t;
    }
    return b;
}

json run_certify(RunContext& ctx, const json& p) {
    const auto& cfg = ctx.cfg;
    if (p["x0"].is_null()) throw ConfigError("certify: params.x0 is required");
    const Vec x0 = vec_from(p["x0"], "certify.x0");
    CertificateOptions opts;
    opts.integrate.horizon = p["horizon"].get<double>();
    opts.integrate.target_radius = p["target_radius"].get<double>();
    opts.integrate.kind = cfg.kind;
    opts.tol_mono_rel = p["tol_mono_rel"].get<double>();
    const MonotonicityCertificate cert =
        monotonicity_certificate(cfg.candidate, cfg.system.field, x0, opts);

    json branches = json::array();
    for (const auto& br : cert.branches) {
        branches.push_back(branch_to_json(br));
        if (p["write_trajectories"].get<bool>() && !br.failed) {
            std::ostringstream name;
            name << "certify-branch-" << br.id << ".csv";
            write_trajectory_csv(br.trajectory, (ctx.outdir / name.str()).string());
        }
    }
    json assertions = json::array();
    if (!p["expect_supersolution"].is_null()) {
        const bool want = p["expect_supersolution"].get<bool>();
        assertions.push_back(assertion("supersolution_verdict", cert.verdict_supersolution == want,
                                       {{"observed", cert.verdict_supersolution}, {"expected", want}}));
    }
    if (!p["expect_subsolution"].is_null()) {
        const bool want = p["expect_subsolution"].get<bool>();
        assertions.push_back(assertion("subsolution_verdict", cert.verdict_subsolution == want,
                                       {{"observed", cert.verdict_subsolution}, {"expected", want}}));
    }
    return json{{"name", "certify"},
                {"anchor", "hamiltonian-monotonicity-certificate"},
                {"verdict_supersolution", cert.verdict_supersolution},
                {"verdict_subsolution", cert.verdict_subsolution},
                {"branches", branches},
                {"assertions", assertions},
                {"note", "empirical trajectory-based certificate"}};
}

json run_simulate(RunContext& ctx, const json& p) {
    const auto& cfg = ctx.cfg;
    if (p["x0"].is_null()) throw ConfigError("simulate: params.x0 is required");
    const Vec x0 = vec_from(p["x0"], "simulate.x0");
    IntegrateOptions io;
    io.horizon = p["horizon"].get<double>();
    io.target_radius = p["target_radius"].get<double>();
    io.kind = cfg.kind;
    if (!p["box"].is_null()) io.box = box_from(p["box"], "simulate.box");
    if (!p["seed_offset"].is_null()) io.seed_offset = vec_from(p["seed_offset"], "simulate.seed_offset");
    const std::string dir = p["direction"].get<std::string>();
    if (dir != "forward" && dir != "backward") {
        throw ConfigError("simulate: direction must be forward or backward");
    }
    const Trajectory traj = integrate(cfg.candidate, cfg.system.field, x0,
                                      dir == "forward" ? Direction::forward : Direction::backward, io);
    write_trajectory_csv(traj, (ctx.outdir / "simulate-trajectory.csv").string());
    json assertions = json::array();
    if (!p["expect_event"].is_null()) {
        const std::string want = p["expect_event"].get<std::string>();
        assertions.push_back(assertion("event", to_string(traj.event.type) == want,
                                       {{"observed", to_string(traj.event.type)}, {"expected", want}}));
    }
    json rep{{"name", "simulate"},
             {"anchor", "closed-loop-hamiltonian-dynamics"},
             {"event", to_string(traj.event.type)},
             {"event_t", traj.event.t},
             {"samples", traj.samples.size()},
             {"assertions", assertions}};
    const auto ht = hit_time(traj);
    if (ht) rep["hit_time"] = *ht;
    return rep;
}

json run_amf(RunContext& ctx, const json& p) {
    const auto& cfg = ctx.cfg;
    if (p["box"].is_null()) throw ConfigError("amf-test: params.box is required");
    AmfOptions opts;
    opts.samples_per_axis = p["samples_per_axis"].get<int>();
    opts.tol_amf = p["tol_amf"].get<double>();
    opts.seed = cfg.seed;
    const AmfReport rep = amf_necessary_test(cfg.candidate, cfg.system.field,
                                             box_from(p["box"], "amf-test.box"),
                                             p["trials"].get<int>(), p["amplitude"].get<double>(), opts);
    std::ofstream csv(ctx.outdir / "amf-trials.csv");
    csv.precision(17);
    csv << "beta,sup_W,pass\n";
    for (const auto& t : rep.trial_results) {
        csv << t.beta << ',' << t.sup_W << ',' << (t.pass ? 1 : 0) << '\n';
    }
    const std::string expect = p["expect"].get<std::string>();
    if (expect != "pass" && expect != "fail") throw ConfigError("amf-test: expect must be pass or fail");
    json assertions = json::array();
    assertions.push_back(assertion("necessary_condition", rep.pass == (expect == "pass"),
                                   {{"observed", rep.pass ? "pass" : "fail"}, {"expected", expect}}));
    json out{{"name", "amf-test"},
             {"anchor", "absolutely-minimizing-necessary-condition"},
             {"k_star", rep.k_star},
             {"trials", rep.trials},
             {"sample_count", rep.sample_count},
             {"failures", rep.failures.size()},
             {"pass", rep.pass},
             {"assertions", assertions}};
    if (!rep.failures.empty()) {
        json f = json::array();
        for (const auto& t : rep.failures) {
            f.push_back(json{{"beta", t.beta}, {"sup_W", t.sup_W}});
        }
        out["competitors"] = f;
    }
    return out;
}

json run_representation(RunContext& ctx, const json& p) {
    const auto& cfg = ctx.cfg;
    if (p["box"].is_null() || p["x0"].is_null()) {
        throw ConfigError("representation: params.box and params.x0 are required");
    }
    RepresentationOptions opts;
    opts.horizon = p["horizon"].get<double>();
    opts.kind = cfg.kind;
    const RepresentationReport rep =
        representation_check(cfg.candidate, cfg.system.field, box_from(p["box"], "representation.box"),
                             vec_from(p["x0"], "representation.x0"), opts);
    const double gap = std::abs(rep.lhs - rep.rhs);
    json assertions = json::array();
    assertions.push_back(assertion("boundary_representation", gap <= p["tol"].get<double>(),
                                   {{"observed", gap}, {"limit", p["tol"]}}));
    return json{{"name", "representation"},
                {"anchor", "implicit-boundary-representation"},
                {"lhs", rep.lhs},
                {"rhs", rep.rhs},
                {"t1", rep.t1},
                {"t2", rep.t2},
                {"assertions", assertions}};
}

json run_mintime_grid(RunContext& ctx, const json& p) {
    const auto& cfg = ctx.cfg;
    const MinTimeGrid& grid = ctx.require_grid(p, "mintime-grid");
    if (p["write_grid"].get<bool>()) {
        write_grid_csv(grid, (ctx.outdir / "mintime-grid.csv").string());
        write_grid_meta(grid, (ctx.outdir / "mintime-grid-meta.json").string());
    }
    json assertions = json::array();
    assertions.push_back(assertion("converged", grid.sup_change < p["tol"].get<double>(),
                                   {{"observed", grid.sup_change}, {"limit", p["tol"]}}));
    for (const auto& probe : p["probes"]) {
        check_keys(probe, {"x", "t_min", "t_max"}, "mintime-grid.probes");
        const Vec x = vec_from(probe.at("x"), "mintime-grid.probes.x");
        const double t = grid.t_interp(x);
        const double lo = probe.at("t_min").get<double>();
        const double hi = probe.at("t_max").get<double>();
        assertions.push_back(assertion("probe_T_band", t >= lo && t <= hi,
                                       {{"x", probe.at("x")}, {"observed", t},
                                        {"t_min", lo}, {"t_max", hi}}));
    }
    if (!p["dominance_slack"].is_null()) {
        const double slack = p["dominance_slack"].get<double>();
        double worst = -std::numeric_limits<double>::infinity();
        const long N = grid.node_count();
        for (long i = 0; i < N; ++i) {
            const Vec x = grid.node_coord(i);
            if (!cfg.candidate.in_c1_domain(x)) continue;
            const ValueAlongGradient val = value_V(cfg.candidate, cfg.system.field, x);
            if (val.singular) continue;
            worst = std::max(worst, grid.t_at(i) - val.U / val.H);
        }
        assertions.push_back(assertion("grid_dominated_by_analytic_bound", worst <= slack,
                                       {{"observed", worst}, {"limit", slack}}));
    }
    if (!p["eikonal_cells"].is_null()) {
        const double cells = p["eikonal_cells"].get<double>();
        const double limit = cells * grid.spacing.maxCoeff();
        double worst = 0.0;
        const long N = grid.node_count();
        for (long i = 0; i < N; ++i) {
            const Vec x = grid.node_coord(i);
            const double exact = std::max(x.norm() - grid.target_radius, 0.0);
            worst = std::max(worst, std::abs(grid.t_at(i) - exact));
        }
        assertions.push_back(assertion("eikonal_ground_truth", worst <= limit,
                                       {{"observed", worst}, {"limit", limit}}));
    }
    return json{{"name", "mintime-grid"},
                {"anchor", "kruzhkov-value-iteration"},
                {"iterations", grid.iterations},
                {"sup_change", grid.sup_change},
                {"controls", grid.control_count},
                {"assertions", assertions}};
}

json run_bound_compare(RunContext& ctx, const json& p) {
    const auto& cfg = ctx.cfg;
    if (p["sample_box"].is_null()) throw ConfigError("bound-compare: params.sample_box is required");
    const Box sample_box = box_from(p["sample_box"], "bound-compare.sample_box");
    const int starts = p["starts"].get<int>();
    const double rho = p["target_radius"].get<double>();
    const double tol_abs = p["tol_abs"].get<double>();
    const double min_H = p["min_H"].get<double>();
    const bool band = p["constant_v_band"].get<bool>();

    Rng rng(cfg.seed);
    std::ofstream csv(ctx.outdir / "bound-compare.csv");
    csv.precision(17);
    for (int i = 1; i <= sample_box.dim(); ++i) csv << 'x' << i << ',';
    csv << "H,analytic_bound,reach_time,gap\n";

    int got = 0;
    long attempts = 0;
    bool all_hit = true, all_le = true, all_band = true;
    double worst_gap = 0.0, worst_excess = -std::numeric_limits<double>::infinity();
    while (got < starts && attempts < 1000L * starts) {
        ++attempts;
        const Vec x = rng.point_in(sample_box);
        if (!cfg.candidate.in_c1_domain(x)) continue;
        const ValueAlongGradient val = value_V(cfg.candidate, cfg.system.field, x);
        if (val.H < min_H) continue;
        const double bound = val.U / val.H;
        IntegrateOptions io;
        io.kind = cfg.kind;
        io.horizon = p["horizon_factor"].get<double>() * bound + 1.0;
        const auto rt = feedback_reach_time(cfg.candidate, cfg.system.field, x, rho, io);
        ++got;
        for (int k = 0; k < sample_box.dim(); ++k) csv << x[k] << ',';
        if (!rt) {
            all_hit = false;
            csv << val.H << ',' << bound << ",,\n";
            continue;
        }
        const double gap = std::abs(*rt - bound);
        csv << val.H << ',' << bound << ',' << *rt << ',' << gap << '\n';
        worst_excess = std::max(worst_excess, *rt - bound);
        if (*rt > bound + tol_abs) all_le = false;
        if (band) {
            const double allowed = tol_abs + rho * (1.0 + 1.0 / val.H);
            worst_gap = std::max(worst_gap, gap - allowed);
            if (gap > allowed) all_band = false;
        }
    }
    json assertions = json::array();
    assertions.push_back(assertion("sampled_enough_starts", got == starts,
                                   {{"observed", got}, {"required", starts}}));
    assertions.push_back(assertion("all_starts_reach_target", all_hit, {}));
    assertions.push_back(assertion("reach_time_below_analytic_bound", all_le,
                                   {{"worst_excess", worst_excess}, {"limit", tol_abs}}));
    if (band) {
        assertions.push_back(assertion("constant_V_band", all_band,
                                       {{"worst_band_excess", worst_gap}}));
    }
    return json{{"name", "bound-compare"},
                {"anchor", "reach-time-bound"},
                {"starts", got},
                {"assertions", assertions}};
}

json run_modulus(RunContext& ctx, const json& p) {
    const auto& cfg = ctx.cfg;
    json gp = p["grid"];
    if (gp.is_null() && cfg.params.contains("mintime-grid")) gp = cfg.params["mintime-grid"];
    const MinTimeGrid& grid = ctx.require_grid(gp, "modulus");

    std::ofstream csv(ctx.outdir / "modulus-lines.csv");
    csv.precision(17);
    csv << "line,s,dT\n";
    json assertions = json::array();
    json lines = json::array();
    int idx = 0;
    for (const auto& line : p["lines"]) {
        check_keys(line, {"base", "dir", "radii", "band"}, "modulus.lines");
        const Vec base = vec_from(line.at("base"), "modulus.lines.base");
        const Vec dir = vec_from(line.at("dir"), "modulus.lines.dir");
        std::vector<double> radii;
        const json& rj = line.at("radii");
        if (rj.is_array()) {
            radii = rj.get<std::vector<double>>();
        } else {
            check_keys(rj, {"min", "max", "count"}, "modulus.lines.radii");
            const double lo = rj.at("min").get<double>();
            const double hi = rj.at("max").get<double>();
            const int count = rj.at("count").get<int>();
            for (int i = 0; i < count; ++i) {
                radii.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
            }
        }
        const ModulusReport rep = modulus_estimate(grid, base, dir, radii);
        for (const auto& [s, dT] : rep.pairs) csv << idx << ',' << s << ',' << dT << '\n';
        json lj{{"base", line.at("base")},
                {"dir", line.at("dir")},
                {"exponent", rep.exponent},
                {"fit_r2", rep.r2}};
        if (!line.at("band").is_null()) {
            const double lo = line.at("band")[0].get<double>();
            const double hi = line.at("band")[1].get<double>();
            assertions.push_back(assertion("exponent_band", rep.exponent >= lo && rep.exponent <= hi,
                                           {{"line", idx}, {"observed", rep.exponent},
                                            {"band", line.at("band")}}));
        }
        lines.push_back(lj);
        ++idx;
    }
    return json{{"name", "modulus"},
                {"anchor", "mintime-regularity-moduli"},
                {"lines", lines},
                {"assertions", assertions}};
}

json run_excond(RunContext& ctx, const json& p) {
    const auto& cfg = ctx.cfg;
    const double eps = p["eps"].get<double>();
    const ExcondReport rep = excond_scan(cfg.candidate, cfg.system.field, eps,
                                         p["delta"].get<double>(), p["samples"].get<int>(), cfg.seed);
    const double c_max =
        p["c_max"].is_null() ? 1.0 / eps + 1e-9 : p["c_max"].get<double>();
    json assertions = json::array();
    assertions.push_back(assertion("excess_decay_constant", rep.c_hat <= c_max,
                                   {{"observed", rep.c_hat}, {"limit", c_max}}));
    return json{{"name", "excond"},
                {"anchor", "excess-decay-condition"},
                {"c_hat", rep.c_hat},
                {"qualifying", rep.qualifying},
                {"sampled", rep.sampled},
                {"witness", std::vector<double>(rep.witness.begin(), rep.witness.end())},
                {"assertions", assertions}};
}

json run_counterexample(RunContext& ctx, const json& p) {
    const auto& cfg = ctx.cfg;
    if (cfg.system.field.state_dim() != 2 || cfg.candidate.kind() != CandidateKind::abspower ||
        cfg.kind.mode != HamiltonianKind::Mode::squared) {
        throw ConfigError(
            "counterexample: requires isotropic(2), the abspower candidate and squared mode");
    }
    const double horizon = p["horizon"].get<double>();
    const double eta = p["eta"].get<double>();
    const double tol_match = p["tol_match"].get<double>();
    const double tol_drift = p["tol_drift"].get<double>();

    IntegrateOptions io;
    io.horizon = horizon;
    io.target_radius = 0.0;
    io.kind = cfg.kind;

    const double v0 = 2.0 * std::numbers::sqrt2 / 3.0;
    json assertions = json::array();
    json classifications = json::object();

    // Branch 1: on-axis decay from (1, 0).
    Vec x0(2);
    x0 << 1.0, 0.0;
    const Trajectory tr1 = integrate(cfg.candidate, cfg.system.field, x0, Direction::forward, io);
    write_trajectory_csv(tr1, (ctx.outdir / "counterexample-branch1.csv").string());
    double err_state = 0.0, err_v = 0.0;
    std::vector<double> ts, vs;
    for (const auto& s : tr1.samples) {
        const double base = 1.0 - 8.0 * s.t / 9.0;
        err_state = std::max(err_state, std::abs(s.x[0] - std::pow(base, 1.5)));
        err_state = std::max(err_state, std::abs(s.x[1]));
        err_v = std::max(err_v, std::abs(s.V - v0 * std::sqrt(base)));
        ts.push_back(s.t);
        vs.push_back(s.V);
    }
    const BranchClass cls1 = classify_monotonicity(ts, vs, 1e-6, nullptr);
    classifications["on_axis_decay"] = to_string(cls1);
    assertions.push_back(assertion("on_axis_state_match", err_state <= tol_match,
                                   {{"observed", err_state}, {"limit", tol_match}}));
    assertions.push_back(assertion("on_axis_V_match", err_v <= tol_match,
                                   {{"observed", err_v}, {"limit", tol_match}}));
    assertions.push_back(assertion("on_axis_classified_nonincreasing",
                                   cls1 == BranchClass::nonincreasing,
                                   {{"observed", to_string(cls1)}}));

    // Branch 2: seeded off the axis; V is constant along it.
    IntegrateOptions io2 = io;
    Vec offset = Vec::Zero(2);
    offset[1] = eta;
    io2.seed_offset = offset;
    const Trajectory tr2 = integrate(cfg.candidate, cfg.system.field, x0, Direction::forward, io2);
    write_trajectory_csv(tr2, (ctx.outdir / "counterexample-branch2.csv").string());
    double drift = 0.0;
    ts.clear();
    vs.clear();
    for (const auto& s : tr2.samples) {
        drift = std::max(drift, std::abs(s.V - tr2.samples.front().V));
        ts.push_back(s.t);
        vs.push_back(s.V);
    }
    const BranchClass cls2 = classify_monotonicity(ts, vs, 1e-6, nullptr);
    classifications["seeded_escape"] = to_string(cls2);
    assertions.push_back(assertion("seeded_branch_constant_V", drift <= tol_drift,
                                   {{"observed", drift}, {"limit", tol_drift}}));

    // Branch 3: growth along the other axis from (0, 1).
    Vec y0(2);
    y0 << 0.0, 1.0;
    const Trajectory tr3 = integrate(cfg.candidate, cfg.system.field, y0, Direction::forward, io);
    write_trajectory_csv(tr3, (ctx.outdir / "counterexample-branch3.csv").string());
    double err_v3 = 0.0;
    ts.clear();
    vs.clear();
    for (const auto& s : tr3.samples) {
        err_v3 = std::max(err_v3, std::abs(s.V - v0 * std::sqrt(1.0 + 8.0 * s.t / 9.0)));
        ts.push_back(s.t);
        vs.push_back(s.V);
    }
    const BranchClass cls3 = classify_monotonicity(ts, vs, 1e-6, nullptr);
    classifications["on_axis_growth"] = to_string(cls3);
    assertions.push_back(assertion("growth_V_match", err_v3 <= tol_match,
                                   {{"observed", err_v3}, {"limit", tol_match}}));
    assertions.push_back(assertion("growth_classified_nondecreasing",
                                   cls3 == BranchClass::nondecreasing,
                                   {{"observed", to_string(cls3)}}));

    CertificateOptions copts;
    copts.integrate = io;
    const MonotonicityCertificate cert =
        monotonicity_certificate(cfg.candidate, cfg.system.field, x0, copts);
    assertions.push_back(assertion("supersolution_via_seeded_branch", cert.verdict_supersolution,
                                   {{"observed", cert.verdict_supersolution}}));

    return json{{"name", "counterexample"},
                {"anchor", "infinity-laplace-counterexample"},
                {"classifications", classifications},
                {"assertions", assertions}};
}

json run_one(RunContext& ctx, const std::string& name, const json& p) {
    if (name == "check-aronsson") return run_check_aronsson(ctx, p);
    if (name == "certify") return run_certify(ctx, p);
    if (name == "simulate") return run_simulate(ctx, p);
    if (name == "amf-test") return run_amf(ctx, p);
    if (name == "representation") return run_representation(ctx, p);
    if (name == "mintime-grid") return run_mintime_grid(ctx, p);
    if (name == "bound-compare") return run_bound_compare(ctx, p);
    if (name == "modulus") return run_modulus(ctx, p);
    if (name == "excond") return run_excond(ctx, p);
    if (name == "counterexample") return run_counterexample(ctx, p);
    throw ConfigError("unknown experiment \"" + name + "\"");
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    check_keys(j, {"system", "candidate", "hamiltonian", "experiment", "experiments", "params",
                   "output", "seed", "threads"},
               "config");
    if (!j.contains("system")) throw ConfigError("config: missing \"system\"");
    if (!j.contains("candidate")) throw ConfigError("config: missing \"candidate\"");

    ExperimentConfig cfg;
    json rs, rc, rk;
    cfg.system = parse_system(j["system"], rs);
    cfg.candidate = parse_candidate(j["candidate"], rc);
    cfg.kind = parse_kind(j.contains("hamiltonian") ? j["hamiltonian"] : json(), rk);

    if (cfg.candidate.dim() != cfg.system.field.state_dim()) {
        throw ConfigError("config: candidate dimension " + std::to_string(cfg.candidate.dim()) +
                          " does not match the system state dimension " +
                          std::to_string(cfg.system.field.state_dim()));
    }

    if (j.contains("experiment") && j.contains("experiments")) {
        throw ConfigError("config: give either \"experiment\" or \"experiments\", not both");
    }
    if (j.contains("experiment")) {
        cfg.experiments = {j["experiment"].get<std::string>()};
    } else if (j.contains("experiments")) {
        cfg.experiments = j["experiments"].get<std::vector<std::string>>();
    } else {
        throw ConfigError("config: missing \"experiment\"");
    }
    if (cfg.experiments.empty()) throw ConfigError("config: experiment list is empty");
    for (const auto& name : cfg.experiments) {
        if (std::find(kExperimentNames.begin(), kExperimentNames.end(), name) ==
            kExperimentNames.end()) {
            throw ConfigError("config: unknown experiment \"" + name + "\"");
        }
    }

    const json user_params = j.value("params", json::object());
    if (!user_params.is_object()) throw ConfigError("config.params: expected an object");
    for (const auto& [key, _] : user_params.items()) {
        if (std::find(cfg.experiments.begin(), cfg.experiments.end(), key) ==
            cfg.experiments.end()) {
            throw ConfigError("config.params: unknown key \"" + key +
                              "\" (no such experiment in this run)");
        }
    }
    cfg.params = json::object();
    for (const auto& name : cfg.experiments) {
        cfg.params[name] = merge_params(default_params(name),
                                        user_params.value(name, json(nullptr)), "params." + name);
    }

    cfg.output_dir = j.value("output", std::string("out"));
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.threads = j.value("threads", 1);
    if (cfg.threads < 1) throw ConfigError("config: threads must be >= 1");

    cfg.resolved = json{{"system", rs},
                        {"candidate", rc},
                        {"hamiltonian", rk},
                        {"experiments", cfg.experiments},
                        {"params", cfg.params},
                        {"output", cfg.output_dir},
                        {"seed", cfg.seed},
                        {"threads", cfg.threads}};
    return cfg;
}

std::vector<std::pair<std::string, std::string>> list_presets() {
    return {
        {"hormander-gauge",
         "gauge candidate on the Hormander system: residual checks, certificate, excess decay"},
        {"grushin-gauge",
         "gauge candidate on the Grushin system: residual checks, certificate, excess decay"},
        {"counterexample-infinity",
         "infinity-Laplace counterexample: branch classifications and certificate"},
        {"grushin-regularity",
         "Grushin minimum-time grid: bound dominance, probe bands, regularity moduli"},
        {"hormander-feedback",
         "Hormander feedback trajectories against the analytic reach-time bound"},
    };
}

json preset_config(const std::string& name) {
    const json hormander_sys = {{"name", "hormander"}, {"m", 2}, {"B", {{0, -1}, {1, 0}}}};
    const json grushin_sys = {{"name", "grushin"}, {"m", 1}};
    if (name == "hormander-gauge") {
        return json{
            {"system", hormander_sys},
            {"candidate", {{"kind", "gauge"}, {"m", 2}}},
            {"hamiltonian", {{"mode", "degree1"}}},
            {"experiments", {"check-aronsson", "certify", "excond"}},
            {"params",
             {{"check-aronsson",
               {{"box", {{"lo", {-1.5, -1.5, -1.5}}, {"hi", {1.5, 1.5, 1.5}}}},
                {"min_radius", 0.6}}},
              {"certify", {{"x0", {1.0, 0.0, 0.5}},
                           {"expect_supersolution", true},
                           {"expect_subsolution", true}}},
              {"excond", {{"eps", 0.5}, {"delta", 0.5}}}}},
            {"output", "out/hormander-gauge"},
            {"seed", 0}};
    }
    if (name == "grushin-gauge") {
        return json{
            {"system", grushin_sys},
            {"candidate", {{"kind", "gauge"}, {"m", 1}}},
            {"hamiltonian", {{"mode", "degree1"}}},
            {"experiments", {"check-aronsson", "certify", "excond"}},
            {"params",
             {{"check-aronsson",
               {{"box", {{"lo", {-1.5, -1.5}}, {"hi", {1.5, 1.5}}}}, {"min_radius", 0.6}}},
              {"certify", {{"x0", {1.0, 0.5}},
                           {"expect_supersolution", true},
                           {"expect_subsolution", true}}},
              {"excond", {{"eps", 0.5}, {"delta", 0.5}}}}},
            {"output", "out/grushin-gauge"},
            {"seed", 0}};
    }
    if (name == "counterexample-infinity") {
        return json{
            {"system", {{"name", "isotropic"}, {"n", 2}}},
            {"candidate",
             {{"kind", "abspower"},
              {"alphas", {4.0 / 3.0, 4.0 / 3.0}},
              {"signs", {1, -1}}}},
            {"hamiltonian", {{"mode", "squared"}, {"scale", 0.5}}},
            {"experiments", {"counterexample"}},
            {"output", "out/counterexample-infinity"},
            {"seed", 0}};
    }
    if (name == "grushin-regularity") {
        return json{
            {"system", grushin_sys},
            {"candidate", {{"kind", "gauge"}, {"m", 1}}},
            {"hamiltonian", {{"mode", "degree1"}}},
            {"experiments", {"mintime-grid", "modulus", "bound-compare"}},
            {"params",
             {{"mintime-grid",
               {{"box", {{"lo", {-1.5, -1.5}}, {"hi", {1.5, 1.5}}}},
                {"shape", {151, 151}},
                {"target_radius", 0.1},
                {"controls", 64},
                {"dt", 0.005},
                {"probes", {{{"x", {1.0, 0.0}}, {"t_min", 0.85}, {"t_max", 0.95}}}},
                {"dominance_slack", 0.15}}},
              {"modulus",
               {{"lines",
                 {{{"base", {0.0, 0.0}},
                   {"dir", {0.0, 1.0}},
                   {"radii", {{"min", 0.3}, {"max", 1.4}, {"count", 10}}},
                   {"band", {0.35, 0.65}}},
                  {{"base", {0.0, 0.0}},
                   {"dir", {1.0, 0.0}},
                   {"radii", {{"min", 0.55}, {"max", 1.4}, {"count", 10}}},
                   {"band", {0.85, 1.15}}},
                  {{"base", {0.8, 0.2}},
                   {"dir", {1.0, 0.0}},
                   {"radii", {{"min", 0.1}, {"max", 0.6}, {"count", 10}}},
                   {"band", {0.85, 1.15}}}}}}},
              {"bound-compare",
               {{"sample_box", {{"lo", {0.5, -0.5}}, {"hi", {1.5, 0.5}}}}, {"starts", 50}}}}},
            {"output", "out/grushin-regularity"},
            {"seed", 0}};
    }
    if (name == "hormander-feedback") {
        return json{
            {"system", hormander_sys},
            {"candidate", {{"kind", "gauge"}, {"m", 2}}},
            {"hamiltonian", {{"mode", "degree1"}}},
            {"experiments", {"bound-compare", "simulate"}},
            {"params",
             {{"bound-compare",
               {{"sample_box", {{"lo", {0.5, -0.5, -0.5}}, {"hi", {1.5, 0.5, 0.5}}}},
                {"starts", 50}}},
              {"simulate",
               {{"x0", {1.0, 0.0, 0.0}}, {"horizon", 2.0}, {"expect_event", "target_hit"}}}}},
            {"output", "out/hormander-feedback"},
            {"seed", 0}};
    }
    throw ConfigError("unknown preset \"" + name + "\"");
}

RunResult run_experiments(const ExperimentConfig& config) {
    RunResult result;
    RunContext ctx{config, fs::path(config.output_dir), std::nullopt};
    fs::create_directories(ctx.outdir);

    {
        std::ofstream out(ctx.outdir / "resolved-config.json");
        out << config.resolved.dump(2) << '\n';
    }
    {
        const auto now = std::chrono::system_clock::now();
        json info{{"unix_time",
                   std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()}};
        std::ofstream out(ctx.outdir / "run-info.json");
        out << info.dump(2) << '\n';
    }

    json experiments = json::array();
    bool pass = true;
    for (const auto& name : config.experiments) {
        json rep;
        try {
            rep = run_one(ctx, name, config.params[name]);
        } catch (const std::exception& e) {
            rep = json{{"name", name}, {"error", e.what()},
                       {"assertions", json::array({assertion("completed", false,
                                                             {{"error", e.what()}})})}};
        }
        if (!all_pass(rep["assertions"])) pass = false;
        experiments.push_back(std::move(rep));
    }
    result.report = json{{"experiments", experiments}, {"pass", pass}};
    {
        std::ofstream out(ctx.outdir / "report.json");
        out << result.report.dump(2) << '\n';
    }
    result.exit_code = pass ? 0 : 2;
    return result;
}

}  // namespace aronsson
