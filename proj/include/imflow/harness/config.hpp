#pragma once

#include "imflow/mesh/generators.hpp"
#include "imflow/mesh/io.hpp"
#include "imflow/system/solver.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <set>

namespace imflow {

// Rejected configuration; the command line maps it to exit code 2.
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct DomainSpec {
    std::string kind = "unit-square"; // unit-square | rectangle | l-shape | file
    int dim = 2;
    int n = 4;           // subdivisions per side on the coarsest level (l-shape: per half side)
    Box<2> box{Vec2(0, 0), Vec2(1, 1)};
    std::string file;    // mesh file for kind = file
};

struct StudyConfig {
    DomainSpec domain;
    PairKind pair = PairKind::mini;
    LawKind law_kind = LawKind::newtonian;
    LawParams law;
    int levels = 3;
    SolverOptions solver;
    std::string reference = "manufactured"; // manufactured | surrogate
    double amplitude = 1.0;                 // manufactured velocity scale
    Vec2 force = Vec2(1.0, 0.0);            // amplitudes of the surrogate body force
    bool an = false, bn = false, infsup = false, truncation = false;
    std::vector<double> an_eps{1e-2, 1e-3};
    std::vector<double> an_theta{0.5, 0.9};
    double truncation_lambda = 4.0;
    std::string out = "out";
    bool vtk = true;
    std::uint64_t seed = 0;

    GraphLaw graph_law() const { return GraphLaw(law_kind, law); }
    bool convective() const { return solver.convection != ConvectionForm::none; }
};

inline std::vector<double> parse_list(const std::string& s, const std::string& key)
{
    std::vector<double> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size())
                throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': malformed number '" + tok + "'");
        }
    }
    return out;
}

// Throws ConfigError when the configuration breaks a constraint the solver
// relies on: the convection thresholds r > 2d/(d+1) (skew form) and
// r > 2d/(d+2) (divergence-free form on an exactly divergence-free pair).
inline void validate(const StudyConfig& c)
{
    if (c.domain.dim != 2)
        throw ConfigError("only two-dimensional studies are supported (domain.dim = " + std::to_string(c.domain.dim) + ")");
    if (c.levels < 1)
        throw ConfigError("study.levels must be at least 1");
    if (c.domain.n < 1)
        throw ConfigError("domain.n must be positive");
    if (c.reference != "manufactured" && c.reference != "surrogate")
        throw ConfigError("reference.kind must be manufactured or surrogate, got '" + c.reference + "'");
    if (c.reference == "manufactured" && c.domain.kind != "unit-square")
        throw ConfigError("the manufactured reference lives on the unit square");
    if (!(c.law.r > 1.0) || !(c.law.mu > 0.0) || c.law.tau_y < 0.0 || !(c.law.alpha > 0.0))
        throw ConfigError("law parameters need r > 1, mu > 0, tau_y >= 0, alpha > 0");
    const bool divfree = c.pair == PairKind::guzman_neilan;
    if (c.solver.convection == ConvectionForm::divfree && !divfree)
        throw ConfigError("convection = divfree needs an exactly divergence-free pair, not " + to_string(c.pair));
    if (c.convective()) {
        const bool strong = c.solver.convection == ConvectionForm::divfree;
        const double rmin = convection_threshold(c.domain.dim, strong);
        if (!(c.law.r > rmin))
            throw ConfigError("r = " + std::to_string(c.law.r) + " is not above " + std::to_string(rmin) +
                              " required with " + to_string(c.solver.convection) + " convection on " + to_string(c.pair));
    }
    if (c.solver.newton_tol <= 0 || c.solver.max_iter < 1)
        throw ConfigError("solver.newton_tol must be positive and solver.max_iter at least 1");
    if (c.solver.threads < 1)
        throw ConfigError("threads must be at least 1");
    if (c.bn && c.graph_law().single_valued() && c.solver.n_mollify == 0)
        throw ConfigError("diagnostics.bn needs a mollified law (solver.n_mollify > 0 or a multivalued law)");
    if (!(c.truncation_lambda > 0))
        throw ConfigError("diagnostics.lambda must be positive");
    for (double e : c.an_eps)
        if (!(e > 0))
            throw ConfigError("diagnostics.an_eps entries must be positive");
}

inline const std::set<std::string>& config_keys()
{
    static const std::set<std::string> keys{"domain.kind", "domain.dim", "domain.n", "domain.x0", "domain.y0",
        "domain.x1", "domain.y1", "domain.file", "pair.kind", "law.kind", "law.mu", "law.r", "law.tau_y", "law.alpha",
        "study.levels", "solver.newton_tol", "solver.max_iter", "solver.n_mollify", "solver.continuation", "solver.n0",
        "solver.n_max", "solver.convection", "solver.quadrature_degree", "reference.kind", "reference.amplitude",
        "reference.fx", "reference.fy", "diagnostics.an", "diagnostics.bn", "diagnostics.infsup",
        "diagnostics.truncation", "diagnostics.an_eps", "diagnostics.an_theta", "diagnostics.lambda", "output.dir",
        "output.vtk", "run.seed", "run.threads"};
    return keys;
}

inline StudyConfig parse_config(std::istream& in)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty())
            throw ConfigError("config: key '" + section + "' outside a section");
        for (const auto& kv : body)
            if (!config_keys().count(section + "." + kv.first))
                throw ConfigError("config: unknown key '" + section + "." + kv.first + "'");
    }
    // the defaulted ptree getter would swallow malformed values
    auto get = [&tree]<class T>(const std::string& key, T def) {
        if (!tree.get_optional<std::string>(key))
            return def;
        try {
            return tree.get<T>(key);
        } catch (const pt::ptree_bad_data&) {
            throw ConfigError("config: bad value for '" + key + "': '" + tree.get<std::string>(key) + "'");
        }
    };
    StudyConfig c;
    try {
        c.domain.kind = get("domain.kind", c.domain.kind);
        c.domain.dim = get("domain.dim", c.domain.dim);
        c.domain.n = get("domain.n", c.domain.n);
        c.domain.box = {Vec2(get("domain.x0", 0.0), get("domain.y0", 0.0)), Vec2(get("domain.x1", 1.0), get("domain.y1", 1.0))};
        c.domain.file = get("domain.file", std::string());
        c.pair = parse_pair_kind(get("pair.kind", to_string(c.pair)));
        c.law_kind = parse_law_kind(get("law.kind", to_string(c.law_kind)));
        c.law.mu = get("law.mu", c.law.mu);
        c.law.r = get("law.r", c.law.r);
        c.law.tau_y = get("law.tau_y", c.law.tau_y);
        c.law.alpha = get("law.alpha", c.law.alpha);
        c.levels = get("study.levels", c.levels);
        auto& s = c.solver;
        s.newton_tol = get("solver.newton_tol", s.newton_tol);
        s.max_iter = get("solver.max_iter", s.max_iter);
        s.n_mollify = get("solver.n_mollify", s.n_mollify);
        s.continuation = get("solver.continuation", s.continuation);
        s.n0 = get("solver.n0", s.n0);
        s.n_max = get("solver.n_max", s.n_max);
        s.convection = parse_convection(get("solver.convection", to_string(s.convection)));
        s.quadrature_degree = get("solver.quadrature_degree", s.quadrature_degree);
        s.threads = get("run.threads", s.threads);
        c.reference = get("reference.kind", c.reference);
        c.amplitude = get("reference.amplitude", c.amplitude);
        c.force = Vec2(get("reference.fx", c.force[0]), get("reference.fy", c.force[1]));
        c.an = get("diagnostics.an", c.an);
        c.bn = get("diagnostics.bn", c.bn);
        c.infsup = get("diagnostics.infsup", c.infsup);
        c.truncation = get("diagnostics.truncation", c.truncation);
        if (auto v = tree.get_optional<std::string>("diagnostics.an_eps"))
            c.an_eps = parse_list(*v, "diagnostics.an_eps");
        if (auto v = tree.get_optional<std::string>("diagnostics.an_theta"))
            c.an_theta = parse_list(*v, "diagnostics.an_theta");
        c.truncation_lambda = get("diagnostics.lambda", c.truncation_lambda);
        c.out = get("output.dir", c.out);
        c.vtk = get("output.vtk", c.vtk);
        c.seed = get("run.seed", c.seed);
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

inline StudyConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config " + path);
    return parse_config(in);
}

inline Triangulation<2> build_domain(const DomainSpec& d)
{
    if (d.kind == "unit-square")
        return build_unit_square(d.n);
    if (d.kind == "rectangle")
        return build_uniform(d.box, d.n);
    if (d.kind == "l-shape")
        return build_rectangle_union({Box<2>{Vec2(0, 0), Vec2(1, 0.5)}, Box<2>{Vec2(0, 0.5), Vec2(0.5, 1)}}, 0.5 / d.n);
    if (d.kind == "file")
        return to_triangulation<2>(read_mesh_data(d.file));
    throw ConfigError("unknown domain.kind '" + d.kind + "'");
}

} // namespace imflow
