// imflow command line: solve, study, truncate, graph-check, infsup, mesh.
// Exit codes: 0 pass, 2 invalid input, 3 numerical failure or failed check.

#include "imflow/harness/graph_check.hpp"
#include "imflow/harness/truncation_demo.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace imflow;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out;
};

StudyConfig study_config(const std::string& path, const Globals& g)
{
    StudyConfig c = load_config(path);
    if (g.seed)
        c.seed = *g.seed;
    if (g.threads)
        c.solver.threads = *g.threads;
    if (g.out)
        c.out = *g.out;
    validate(c);
    return c;
}

std::string out_dir(const Globals& g, const std::string& def)
{
    const std::string d = g.out.value_or(def);
    fs::create_directories(d);
    return d;
}

int cmd_solve(const std::string& config, const Globals& g)
{
    const StudyConfig c = study_config(config, g);
    auto mesh = std::make_shared<const Triangulation<2>>(build_domain(c.domain));
    for (int l = 1; l < c.levels; ++l)
        mesh = std::make_shared<const Triangulation<2>>(refine_uniform(*mesh));
    const SpacePair sp(mesh, c.pair);
    const Assembler as(sp, c.solver.quadrature_degree, c.solver.threads);
    const GraphLaw law = c.graph_law();
    const Load load = study_load(c);
    const Manufactured mf{c.amplitude};
    const DiscreteSolution s = NonlinearSolver(as, c.solver).solve(law, load);
    const fs::path out = out_dir(g, c.out);
    const StressModel model(law, s.n);
    export_fields(sp, model, s.U, s.P, (out / "solution.vtk").string());
    write_field(sp, s.U, (out / "solution.field").string());
    nlohmann::ordered_json j;
    j["config"] = config_json(c);
    j["cells"] = mesh->num_cells();
    j["dofs"] = sp.velocity_dim() + sp.pressure_dim();
    j["converged"] = s.converged;
    j["message"] = s.message;
    j["n"] = s.n;
    j["iterations"] = s.iterations;
    j["constraint_residual"] = s.constraint_residual;
    j["norm_u"] = velocity_norms(sp, s.U, law.r()).full();
    j["norm_S"] = stress_norm(sp, model, s.U, conjugate_exponent(law.r()));
    if (c.reference == "manufactured") {
        const ErrorNorms e = error_norms(sp, s.U, s.P, mf.exact(), law.r(), pressure_exponent(2, law.r()));
        j["err_u"] = e.u_full();
        j["err_p"] = e.p;
    }
    j["seconds"] = s.seconds;
    write_text(out / "solve.json", j.dump(2) + "\n");
    std::cout << sp.name() << " " << to_string(law.kind()) << " r=" << law.r() << " cells=" << mesh->num_cells()
              << " dofs=" << j["dofs"] << (s.converged ? " converged" : " FAILED: " + s.message) << " iterations="
              << s.iterations << "\n";
    return s.converged ? 0 : 3;
}

int cmd_study(const std::string& config, const Globals& g)
{
    const StudyConfig c = study_config(config, g);
    const StudyReport r = run_study(c);
    std::cout << study_csv(r);
    std::cout << "r_tilde " << r.r_tilde << "\n";
    for (std::size_t l = 0; l < r.rate_u.size(); ++l)
        std::cout << "rate " << l + 1 << " u " << r.rate_u[l] << " p " << r.rate_p[l] << "\n";
    std::cout << "u_decreasing " << r.u_decreasing << " p_decreasing " << r.p_decreasing << " norm_growth "
              << r.norm_growth << "\n";
    if (!r.failure.empty())
        std::cout << "failure: " << r.failure << "\n";
    std::cout << (r.passed() ? "PASS" : "FAIL") << " study written to " << c.out << "\n";
    return r.exit_code();
}

struct TruncateOptions {
    std::string field;
    std::vector<double> lambdas;
    int j_max = 0;
    double s = 2.0;
    bool discrete = false;
    bool demo = false;
    double amplitude = 128.0;
    std::vector<int> ns{1, 2, 3, 4, 5, 6};
    bool zero = false;
    int mesh_n = 8;
    int extra_depth = 5;
};

int cmd_truncate_demo(const TruncateOptions& o, const Globals& g)
{
    TruncationDemoConfig c;
    c.mesh_n = o.mesh_n;
    c.ns = o.ns;
    c.j_max = o.j_max > 0 ? o.j_max : 4;
    c.s = o.s;
    c.amplitude = o.amplitude;
    c.zero = o.zero;
    c.extra_depth = o.extra_depth;
    c.threads = g.threads.value_or(1);
    const TruncationDemoReport r = run_truncation_demo(c);
    const fs::path out = out_dir(g, "out");
    write_text(out / "levels.csv", truncation_demo_csv(r));
    std::cout << truncation_demo_csv(r);
    std::cout << "bracket_ok " << r.table.bracket_ok << " max_ratio " << r.table.max_ratio << "\n";
    for (std::size_t j = 0; j < r.sup_decay.size(); ++j)
        std::cout << "j=" << j + 1 << " sup(E^{n,j}) last/first " << r.sup_decay[j] << "\n";
    return r.table.bracket_ok && std::isfinite(r.table.max_ratio) ? 0 : 3;
}

int cmd_truncate(const TruncateOptions& o, const Globals& g)
{
    if (o.demo)
        return cmd_truncate_demo(o, g);
    if (o.lambdas.empty() && o.j_max == 0)
        throw InvalidArgument("truncate needs --lambda, --j-max or --demo");
    std::shared_ptr<const Triangulation<2>> mesh;
    PairKind pair = PairKind::p2_p0;
    VectorXd V;
    if (!o.field.empty()) {
        FieldFile f = read_field(o.field);
        mesh = f.mesh;
        pair = f.pair;
        V = std::move(f.U);
    } else {
        mesh = std::make_shared<const Triangulation<2>>(build_unit_square(o.mesh_n));
    }
    const SpacePair sp(mesh, pair);
    if (o.field.empty())
        V = rough_field(sp);
    if (V.size() != sp.velocity_dim())
        throw IoError("field coefficients do not match the " + sp.name() + " space on its mesh");
    const MeshField v = mesh_field(sp, V);
    const LatticeMaximal lm = lattice_maximal(v, g.threads.value_or(1));
    const fs::path out = out_dir(g, "out");

    std::vector<double> lambdas = o.lambdas;
    if (o.j_max > 0) {
        const double s = o.s;
        const LevelTable tab = select_levels({{lm.M.value, lm.frame.cell_area(), velocity_norms(sp, V, s).grad}}, s, o.j_max);
        std::string csv = "j,m,lambda,measure,ratio\n";
        for (const auto& row : tab.rows) {
            csv += std::to_string(row.j) + "," + std::to_string(row.m) + "," + csv_number(row.lambda) + "," +
                csv_number(row.measure) + "," + csv_number(row.ratio) + "\n";
            lambdas.push_back(row.lambda);
        }
        write_text(out / "levels.csv", csv);
        std::cout << csv;
    }

    std::vector<TruncationReport> reps;
    bool ok = true;
    const VelocityProjector* proj = nullptr;
    std::unique_ptr<VelocityProjector> own;
    if (o.discrete) {
        own = std::make_unique<VelocityProjector>(sp);
        proj = own.get();
    }
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        const Truncation tr = lipschitz_truncate(v, lm, lambdas[i], o.extra_depth);
        reps.push_back(tr.report);
        const std::string tag = std::to_string(i);
        {
            std::ofstream f(out / ("truncation_" + tag + ".vtk"));
            write_truncation_vtk(*tr.field, f);
        }
        {
            std::ofstream f(out / ("whitney_" + tag + ".vtk"));
            write_whitney_vtk(tr.field->cover(), f);
        }
        if (proj) {
            const DiscreteTruncation d = discrete_truncate(sp, *proj, V, lm, lambdas[i], o.extra_depth);
            write_field(sp, d.V, (out / ("truncated_" + tag + ".field")).string());
        }
        const TruncationReport& r = tr.report;
        const bool good = r.whitney.all() && r.equality_defect <= 1e-12;
        ok = ok && good;
        std::cout << "lambda " << r.lambda << " |U| " << r.u_measure << " cubes " << r.cubes << " whitney "
                  << r.whitney.all() << " equality_defect " << r.equality_defect << " grad_sup_u " << r.grad_sup_u
                  << " weak_type " << r.weak_type << (good ? "" : "  FAIL") << "\n";
    }
    write_text(out / "truncation.csv", truncation_csv(reps));
    return ok ? 0 : 3;
}

struct LawOptions {
    std::string law = "all";
    LawParams p;
    std::size_t samples = 10000;
};

int cmd_graph_check(const LawOptions& o, const Globals& g)
{
    std::vector<GraphLaw> laws;
    if (o.law == "all")
        laws = builtin_laws();
    else
        laws.emplace_back(parse_law_kind(o.law), o.p);
    GraphCheckOptions opt;
    opt.samples = opt.mollified_samples = o.samples;
    opt.seed = g.seed.value_or(0);
    std::vector<GraphCheckReport> reps;
    bool ok = true;
    for (const auto& law : laws) {
        reps.push_back(run_graph_check(law, opt));
        const auto& r = reps.back();
        ok = ok && r.passed();
        std::cout << (r.passed() ? "PASS " : "FAIL ") << to_string(r.kind) << " r=" << r.params.r
                  << " min_monotonicity=" << r.axioms.min_monotonicity << " c2=" << r.axioms.bounds.c2
                  << " growth_exponent=" << r.growth_exponent << " phi_lipschitz=" << r.phi_lipschitz
                  << " stable=" << r.stable << "\n";
        for (const auto& v : r.axioms.violations)
            std::cout << "  " << v << "\n";
    }
    const fs::path out = out_dir(g, "out");
    write_text(out / "graph_check.csv", graph_check_csv(reps));
    return ok ? 0 : 3;
}

int cmd_infsup(const std::vector<std::string>& pairs, int n, int levels, const Globals& g)
{
    if (n < 1 || levels < 1)
        throw InvalidArgument("infsup needs --n >= 1 and --levels >= 1");
    std::vector<PairKind> kinds;
    for (const auto& p : pairs) {
        if (p == "all")
            kinds.insert(kinds.end(), {PairKind::mini, PairKind::p2_p0, PairKind::cr_conforming, PairKind::guzman_neilan});
        else
            kinds.push_back(parse_pair_kind(p));
    }
    std::string csv = "pair,level,h,beta,iterations\n";
    bool ok = true;
    for (PairKind k : kinds) {
        auto mesh = std::make_shared<const Triangulation<2>>(build_unit_square(n));
        for (int l = 0; l < levels; ++l) {
            if (l > 0)
                mesh = std::make_shared<const Triangulation<2>>(refine_uniform(*mesh));
            const SpacePair sp(mesh, k);
            const InfSupResult r = inf_sup_constant(Assembler(sp, 0, g.threads.value_or(1)));
            ok = ok && r.beta > 0;
            const std::string line = to_string(k) + "," + std::to_string(l) + "," + csv_number(max_diameter(*mesh)) +
                "," + csv_number(r.beta) + "," + std::to_string(r.iterations) + "\n";
            csv += line;
            std::cout << line;
        }
    }
    write_text(fs::path(out_dir(g, "out")) / "infsup.csv", csv);
    return ok ? 0 : 3;
}

bool is_vtk(const std::string& p) { return fs::path(p).extension() == ".vtk"; }

Triangulation<2> read_any_mesh(const std::string& path)
{
    if (is_vtk(path)) {
        std::ifstream in(path);
        if (!in)
            throw IoError("cannot read " + path);
        return read_vtk_mesh(in);
    }
    return to_triangulation<2>(read_mesh_data(path));
}

void write_any_mesh(const Triangulation<2>& t, const std::string& path)
{
    if (is_vtk(path))
        write_vtk(t, path);
    else
        write_mesh(t, path);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"imflow: implicitly constituted incompressible flow solver and verification harness"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out;
    auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides run.seed)");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads (overrides run.threads)")->check(CLI::PositiveNumber);
    auto* out_opt = app.add_option("--out", out, "output directory (mesh: output file)");

    std::string config;
    auto* solve = app.add_subcommand("solve", "solve once on the finest configured level");
    solve->add_option("--config", config, "study configuration (INI)")->required()->check(CLI::ExistingFile);
    auto* study = app.add_subcommand("study", "convergence study over nested refinements");
    study->add_option("--config", config, "study configuration (INI)")->required()->check(CLI::ExistingFile);

    TruncateOptions to;
    auto* trunc = app.add_subcommand("truncate", "Lipschitz truncation of a discrete field");
    trunc->add_option("--field", to.field, "field file written by solve (default: built-in rough field)");
    trunc->add_option("--lambda", to.lambdas, "truncation levels");
    trunc->add_option("--j-max", to.j_max, "choose levels j = 1..j_max by the level selection")->check(CLI::Range(1, 4));
    trunc->add_option("--s", to.s, "integrability exponent of the level selection");
    trunc->add_flag("--discrete", to.discrete, "also write the discrete truncations as field files");
    trunc->add_flag("--demo", to.demo, "run the weak-null sequence demonstration");
    trunc->add_option("--amplitude", to.amplitude, "demo: gradient amplitude of E^n");
    trunc->add_option("--ns", to.ns, "demo: sequence indices");
    trunc->add_flag("--zero", to.zero, "demo: constant-zero sequence");
    trunc->add_option("--mesh-n", to.mesh_n, "unit-square subdivisions for built-in fields")->check(CLI::PositiveNumber);
    trunc->add_option("--extra-depth", to.extra_depth, "Whitney levels below the lattice")->check(CLI::Range(0, 8));

    LawOptions lo;
    auto* graph = app.add_subcommand("graph-check", "axioms, mollified bounds and representation identities of a law");
    graph->add_option("--law", lo.law, "law name or 'all'");
    graph->add_option("--mu", lo.p.mu);
    graph->add_option("--r", lo.p.r);
    graph->add_option("--tau-y", lo.p.tau_y);
    graph->add_option("--alpha", lo.p.alpha);
    graph->add_option("--samples", lo.samples)->check(CLI::PositiveNumber);

    std::vector<std::string> pairs{"mini", "p2-p0"};
    int is_n = 4, is_levels = 3;
    auto* infsup = app.add_subcommand("infsup", "discrete inf-sup constants over refinements");
    infsup->add_option("--pair", pairs, "element pairs or 'all'");
    infsup->add_option("--n", is_n, "coarsest unit-square subdivision");
    infsup->add_option("--levels", is_levels, "number of meshes");

    auto* mesh = app.add_subcommand("mesh", "build, refine or convert meshes");
    mesh->require_subcommand(1);
    std::string kind = "unit-square", in;
    int mn = 4, times = 1;
    std::vector<double> box{0, 0, 1, 1};
    auto* build = mesh->add_subcommand("build", "generate a mesh");
    build->add_option("--kind", kind, "unit-square | rectangle | l-shape");
    build->add_option("--n", mn, "subdivisions")->check(CLI::PositiveNumber);
    build->add_option("--box", box, "rectangle x0 y0 x1 y1")->expected(4);
    auto* refine = mesh->add_subcommand("refine", "uniform red refinement");
    refine->add_option("--in", in, "input mesh")->required()->check(CLI::ExistingFile);
    refine->add_option("--times", times, "refinement steps")->check(CLI::NonNegativeNumber);
    auto* convert = mesh->add_subcommand("convert", "convert between the mesh format and VTK (by extension)");
    convert->add_option("--in", in, "input mesh")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    if (*seed_opt)
        g.seed = seed;
    if (*threads_opt)
        g.threads = threads;
    if (*out_opt)
        g.out = out;

    try {
        if (*solve)
            return cmd_solve(config, g);
        if (*study)
            return cmd_study(config, g);
        if (*trunc)
            return cmd_truncate(to, g);
        if (*graph)
            return cmd_graph_check(lo, g);
        if (*infsup)
            return cmd_infsup(pairs, is_n, is_levels, g);
        if (*mesh) {
            if (!g.out)
                throw InvalidArgument("mesh commands need --out FILE");
            Triangulation<2> t = [&] {
                if (*build) {
                    DomainSpec d;
                    d.kind = kind;
                    d.n = mn;
                    d.box = {Vec2(box[0], box[1]), Vec2(box[2], box[3])};
                    return build_domain(d);
                }
                return read_any_mesh(in);
            }();
            if (*refine)
                for (int k = 0; k < times; ++k)
                    t = refine_uniform(t);
            write_any_mesh(t, *g.out);
            std::cout << "vertices " << t.num_vertices() << " cells " << t.num_cells() << " -> " << *g.out << "\n";
            return 0;
        }
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
