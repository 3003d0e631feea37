#pragma once

#include "imflow/harness/config.hpp"
#include "imflow/harness/field_file.hpp"
#include "imflow/harness/manufactured.hpp"
#include "imflow/lipschitz/truncation.hpp"
#include "imflow/system/infsup.hpp"

#include <boost/version.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>

namespace imflow {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct StudyRow {
    int level = 0;
    double h = 0.0;
    int dofs = 0;
    double err_u = kNaN; // |u - U|_{1,r}
    double err_p = kNaN; // |p - P|_{r~}
    double beta = kNaN;
    double norm_u = kNaN; // |U|_{1,r}
    double norm_S = kNaN; // |S^n(DU)|_{r'}
    bool ok = true;
    int n = 0, iterations = 0;
    double constraint = 0.0, seconds = 0.0;
};

struct StudyReport {
    StudyConfig config;
    double r_tilde = 0.0;
    std::vector<StudyRow> rows;
    std::vector<double> rate_u, rate_p; // log2 of consecutive error ratios
    bool converged = true;
    bool u_decreasing = true, p_decreasing = true;
    double min_rate_u = kNaN;
    double norm_growth = 0.0; // max_l max(norm_u, norm_S)_l / (same)_0 - 1
    std::vector<std::pair<int, AnReport>> an;
    std::vector<std::pair<int, BnReport>> bn;
    std::optional<TruncationReport> truncation;
    std::string reference_note;
    std::string failure;
    double seconds = 0.0;

    bool passed() const { return converged && failure.empty() && u_decreasing; }
    int exit_code() const { return passed() ? 0 : 3; }
};

inline double max_diameter(const Triangulation<2>& t)
{
    double h = 0;
    for (int c = 0; c < t.num_cells(); ++c)
        h = std::max(h, t.diameter(c));
    return h;
}

// Velocity at vertices (from the first cell containing each vertex), and
// pressure, |DU|, |S^n(DU)| at cell centroids.
inline void export_fields(const SpacePair& sp, const StressModel& model, const VectorXd& U, const VectorXd& P,
    std::ostream& out)
{
    const auto& t = sp.mesh();
    std::vector<double> vel(2 * std::size_t(t.num_vertices()), 0.0);
    std::vector<char> seen(t.num_vertices(), 0);
    std::vector<double> pres(t.num_cells()), du(t.num_cells()), su(t.num_cells());
    for (int c = 0; c < t.num_cells(); ++c) {
        const auto& cv = t.cell(c);
        for (int k = 0; k < 3; ++k) {
            if (seen[cv[k]])
                continue;
            seen[cv[k]] = 1;
            double l[3] = {0, 0, 0};
            l[k] = 1;
            Vec2 v;
            fe_velocity(sp, U, c, l, &v, nullptr);
            vel[2 * cv[k]] = v[0];
            vel[2 * cv[k] + 1] = v[1];
        }
        const double m[3] = {1.0 / 3, 1.0 / 3, 1.0 / 3};
        Mat2 g;
        fe_velocity(sp, U, c, m, nullptr, &g);
        const Mat2 d = sym<2>(g);
        pres[c] = fe_pressure(sp, P, c, m);
        du[c] = frobenius<2>(d);
        su[c] = frobenius<2>(model.stress(d));
    }
    write_vtk(t, out, {{"velocity", 2, std::move(vel)}},
        {{"pressure", 1, std::move(pres)}, {"sym_grad_norm", 1, std::move(du)}, {"stress_norm", 1, std::move(su)}});
}

inline void export_fields(const SpacePair& sp, const StressModel& model, const VectorXd& U, const VectorXd& P,
    const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path);
    export_fields(sp, model, U, P, out);
}

inline std::string csv_number(double x)
{
    if (std::isnan(x))
        return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10e", x);
    return buf;
}

// Header `level,h,dofs,err_u,err_p,beta,norm_u,norm_S`; no timings, so the
// file is reproducible.
inline std::string study_csv(const StudyReport& r)
{
    std::string s = "level,h,dofs,err_u,err_p,beta,norm_u,norm_S\n";
    for (const auto& row : r.rows)
        s += std::to_string(row.level) + "," + csv_number(row.h) + "," + std::to_string(row.dofs) + "," +
            csv_number(row.err_u) + "," + csv_number(row.err_p) + "," + csv_number(row.beta) + "," +
            csv_number(row.norm_u) + "," + csv_number(row.norm_S) + "\n";
    return s;
}

// Long format `level,quantity,parameter,value` for the a_n (and b_n) sweeps.
inline std::string diagnostic_csv(const StudyReport& r)
{
    std::string s = "level,quantity,parameter,value\n";
    auto put = [&s](int l, const char* q, double p, double v) {
        s += std::to_string(l) + "," + q + "," + csv_number(p) + "," + csv_number(v) + "\n";
    };
    for (const auto& [l, a] : r.an) {
        for (std::size_t k = 0; k < a.eps.size(); ++k)
            put(l, "an_measure", a.eps[k], a.measure[k]);
        for (std::size_t k = 0; k < a.theta.size(); ++k)
            put(l, "an_integral", a.theta[k], a.integral[k]);
        put(l, "an_min", 0, a.min_value);
        put(l, "an_max", 0, a.max_value);
    }
    for (const auto& [l, b] : r.bn) {
        for (std::size_t k = 0; k < b.eps.size(); ++k)
            put(l, "bn_measure", b.eps[k], b.measure[k]);
        for (std::size_t k = 0; k < b.theta.size(); ++k)
            put(l, "bn_integral", b.theta[k], b.integral[k]);
        put(l, "bn_min", 0, b.min_value);
        put(l, "bn_an_gap", 0, b.an_gap);
    }
    return s;
}

inline nlohmann::ordered_json config_json(const StudyConfig& c)
{
    return {{"domain", {{"kind", c.domain.kind}, {"n", c.domain.n}, {"file", c.domain.file}}}, {"pair", to_string(c.pair)},
        {"law", {{"kind", to_string(c.law_kind)}, {"mu", c.law.mu}, {"r", c.law.r}, {"tau_y", c.law.tau_y}, {"alpha", c.law.alpha}}},
        {"levels", c.levels}, {"convection", to_string(c.solver.convection)}, {"n_mollify", c.solver.n_mollify},
        {"newton_tol", c.solver.newton_tol}, {"reference", c.reference}, {"amplitude", c.amplitude},
        {"seed", c.seed}, {"threads", c.solver.threads}};
}

// Build and environment data, timings included.
inline nlohmann::ordered_json study_json(const StudyReport& r)
{
    nlohmann::ordered_json j;
    j["config"] = config_json(r.config);
    j["r_tilde"] = r.r_tilde;
    j["reference_note"] = r.reference_note;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"level", row.level}, {"h", row.h}, {"dofs", row.dofs}, {"ok", row.ok}, {"n", row.n},
            {"iterations", row.iterations}, {"constraint_residual", row.constraint}, {"seconds", row.seconds}});
    j["levels"] = rows;
    j["rate_u"] = r.rate_u;
    j["rate_p"] = r.rate_p;
    j["flags"] = {{"converged", r.converged}, {"u_decreasing", r.u_decreasing}, {"p_decreasing", r.p_decreasing},
        {"min_rate_u", std::isnan(r.min_rate_u) ? nlohmann::ordered_json() : nlohmann::ordered_json(r.min_rate_u)},
        {"norm_growth", r.norm_growth}, {"passed", r.passed()}};
    if (r.truncation) {
        const TruncationReport& t = *r.truncation;
        j["truncation"] = {{"lambda", t.lambda}, {"u_measure", t.u_measure}, {"cubes", t.cubes},
            {"whitney", t.whitney.all()}, {"equality_defect", t.equality_defect}, {"grad_sup_u", t.grad_sup_u},
            {"gradient_bound", t.gradient_bound()}, {"weak_type", t.weak_type}};
    }
    if (!r.failure.empty())
        j["failure"] = r.failure;
    j["fingerprint"] = {{"compiler", __VERSION__}, {"cplusplus", long(__cplusplus)},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                std::to_string(EIGEN_MINOR_VERSION)},
        {"boost", BOOST_LIB_VERSION},
#ifdef NDEBUG
        {"assertions", false},
#else
        {"assertions", true},
#endif
        {"threads", r.config.solver.threads}, {"seed", r.config.seed}, {"seconds", r.seconds}};
    return j;
}

inline void write_text(const std::filesystem::path& p, const std::string& s)
{
    std::ofstream out(p, std::ios::binary);
    if (!out || !(out << s))
        throw IoError("cannot write " + p.string());
}

namespace detail {

// Reference solution from a finer discrete one (nested meshes).
inline ExactSolution discrete_reference(const SpacePair& sp, const VectorXd& U, const VectorXd& P)
{
    auto at = [&sp](const Vec2& x) { return sp.mesh().locate_or_throw(x); };
    return {[&sp, U, at](const Vec2& x) {
                const Located l = at(x);
                Vec2 v;
                fe_velocity(sp, U, l.cell, l.bary.data(), &v, nullptr);
                return v;
            },
        [&sp, U, at](const Vec2& x) {
            const Located l = at(x);
            Mat2 g;
            fe_velocity(sp, U, l.cell, l.bary.data(), nullptr, &g);
            return g;
        },
        [&sp, P, at](const Vec2& x) {
            const Located l = at(x);
            return fe_pressure(sp, P, l.cell, l.bary.data());
        }};
}

inline void summarize(StudyReport& rep)
{
    const auto& rows = rep.rows;
    for (std::size_t l = 1; l < rows.size(); ++l) {
        rep.rate_u.push_back(std::log2(rows[l - 1].err_u / rows[l].err_u));
        rep.rate_p.push_back(std::log2(rows[l - 1].err_p / rows[l].err_p));
        if (!(rows[l].err_u < rows[l - 1].err_u))
            rep.u_decreasing = false;
        if (!(rows[l].err_p < rows[l - 1].err_p))
            rep.p_decreasing = false;
        rep.norm_growth = std::max({rep.norm_growth, rows[l].norm_u / rows[0].norm_u - 1.0,
            rows[l].norm_S / rows[0].norm_S - 1.0});
    }
    if (!rep.rate_u.empty())
        rep.min_rate_u = *std::min_element(rep.rate_u.begin(), rep.rate_u.end());
}

} // namespace detail

// Manufactured load, or the swirling body force (fx cos(pi y), fy cos(pi x)).
// A constant force would be a pure pressure gradient with zero velocity.
inline Load study_load(const StudyConfig& c)
{
    if (c.reference == "manufactured")
        return Manufactured{c.amplitude}.load(c.graph_law(), c.convective());
    Load load;
    load.f0 = [f = c.force](const Vec2& x) { return Vec2(f[0] * std::cos(kPi * x[1]), f[1] * std::cos(kPi * x[0])); };
    return load;
}

// Solves on `levels` nested uniform refinements (each warm-started from the
// previous one) and measures errors against the manufactured solution or
// against one further refinement. Output files go to config.out when write
// is set.
inline StudyReport run_study(const StudyConfig& cfg, bool write = true)
{
    validate(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    StudyReport rep;
    rep.config = cfg;
    const GraphLaw law = cfg.graph_law();
    rep.r_tilde = pressure_exponent(cfg.domain.dim, law.r());
    const double r = law.r(), rc = conjugate_exponent(r);
    const bool manufactured = cfg.reference == "manufactured";
    const Manufactured mf{cfg.amplitude};
    const Load load = study_load(cfg);
    if (manufactured) {
        rep.reference_note = "manufactured solution";
    } else {
        rep.reference_note = "discrete solution one refinement finer than the last level; errors of the last level "
                             "are not asymptotic";
    }
    const std::filesystem::path out(cfg.out);
    if (write)
        std::filesystem::create_directories(out);

    // meshes 0..levels-1, plus the reference level when needed
    const int nmesh = cfg.levels + (manufactured ? 0 : 1);
    std::vector<std::shared_ptr<const Triangulation<2>>> meshes{std::make_shared<const Triangulation<2>>(build_domain(cfg.domain))};
    for (int l = 1; l < nmesh; ++l)
        meshes.push_back(std::make_shared<const Triangulation<2>>(refine_uniform(*meshes.back())));
    std::vector<std::unique_ptr<SpacePair>> pairs;
    std::vector<DiscreteSolution> sols;

    for (int l = 0; l < nmesh; ++l) {
        pairs.push_back(std::make_unique<SpacePair>(meshes[l], cfg.pair));
        const SpacePair& sp = *pairs.back();
        const Assembler as(sp, cfg.solver.quadrature_degree, cfg.solver.threads);
        DiscreteSolution init;
        if (l > 0 && sols.back().converged)
            init = prolong(*pairs[l - 1], sols.back(), sp);
        DiscreteSolution s;
        try {
            s = NonlinearSolver(as, cfg.solver).solve(law, load, std::move(init));
        } catch (const Error& e) {
            s.converged = false;
            s.message = e.what();
        }
        sols.push_back(std::move(s));
        if (!sols.back().converged) {
            rep.converged = false;
            rep.failure = "level " + std::to_string(l) + ": " + sols.back().message;
            if (l < cfg.levels) {
                StudyRow row;
                row.level = l;
                row.h = max_diameter(*meshes[l]);
                row.dofs = sp.velocity_dim() + sp.pressure_dim();
                row.ok = false;
                rep.rows.push_back(row);
            }
            break;
        }
    }

    if (rep.converged) {
        const ExactSolution ex = manufactured
            ? mf.exact()
            : detail::discrete_reference(*pairs.back(), sols.back().U, sols.back().P);
        for (int l = 0; l < cfg.levels; ++l) {
            const SpacePair& sp = *pairs[l];
            const DiscreteSolution& s = sols[l];
            const StressModel model(law, s.n);
            StudyRow row;
            row.level = l;
            row.h = max_diameter(sp.mesh());
            row.dofs = sp.velocity_dim() + sp.pressure_dim();
            row.n = s.n;
            row.iterations = s.iterations;
            row.constraint = s.constraint_residual;
            row.seconds = s.seconds;
            const ErrorNorms e = error_norms(sp, s.U, s.P, ex, r, rep.r_tilde);
            row.err_u = e.u_full();
            row.err_p = e.p;
            row.norm_u = velocity_norms(sp, s.U, r).full();
            row.norm_S = stress_norm(sp, model, s.U, rc);
            if (cfg.infsup)
                row.beta = inf_sup_constant(Assembler(sp, 0, cfg.solver.threads)).beta;
            if (cfg.an) {
                AnReport a = an_diagnostic(sp, model, s.U, ex.grad, cfg.an_eps, cfg.an_theta);
                a.values.clear();
                rep.an.emplace_back(l, std::move(a));
            }
            if (cfg.bn)
                rep.bn.emplace_back(l, bn_diagnostic(sp, model, s.U, ex.grad, cfg.an_eps, cfg.an_theta));
            rep.rows.push_back(row);
            if (write && cfg.vtk)
                export_fields(sp, model, s.U, s.P, (out / ("level_" + std::to_string(l) + ".vtk")).string());
        }
        detail::summarize(rep);
        const int last = cfg.levels - 1;
        if (cfg.truncation) {
            const MeshField v = mesh_field(*pairs[last], sols[last].U);
            const LatticeMaximal lm = lattice_maximal(v, cfg.solver.threads);
            rep.truncation = lipschitz_truncate(v, lm, cfg.truncation_lambda).report;
        }
        if (write)
            write_field(*pairs[last], sols[last].U, (out / "solution.field").string());
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (write) {
        write_text(out / "study.csv", study_csv(rep));
        if (!rep.an.empty() || !rep.bn.empty())
            write_text(out / "diagnostics.csv", diagnostic_csv(rep));
        write_text(out / "report.json", study_json(rep).dump(2) + "\n");
    }
    return rep;
}

} // namespace imflow
