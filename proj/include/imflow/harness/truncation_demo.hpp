#pragma once

#include "imflow/harness/study.hpp"

namespace imflow {

// Zero-trace oscillating bubble on the unit square, V = (phi, -phi/2) with
// phi = 48 x(1-x) y(1-y) sin(3 pi x) sin(3 pi y); its gradient maximal
// function spans the levels 2..16 on an 8 x 8 mesh.
inline VectorXd rough_field(const SpacePair& sp)
{
    return interpolate(sp, analytic_field([](const Vec2& x) {
        const double p = 48.0 * x[0] * (1 - x[0]) * x[1] * (1 - x[1]) * std::sin(3 * kPi * x[0]) * std::sin(3 * kPi * x[1]);
        return Vec2(p, -0.5 * p);
    }));
}

// One row per level with every measured constant of the truncation.
inline std::string truncation_csv(const std::vector<TruncationReport>& reps)
{
    std::string s = "lambda,u_measure,cubes,whitney_ok,disjoint,contained,covering,w2,w3,w4,theta,max_neighbors,"
                    "min_side_ratio,max_side_ratio,min_distance,max_distance,uncovered_measure,equality_defect,"
                    "grad_outside_defect,outside_value,grad_sup_u,grad_sup_layer,grad_sup,gradient_bound,max_overlap,"
                    "value_ratio_1,value_ratio_2,value_ratio_inf,grad_ratio_1,grad_ratio_2,grad_ratio_inf,grad_l1,"
                    "weak_type,psi_gradient,partition_defect,neighbor_mean,uncovered_fraction\n";
    for (const auto& r : reps) {
        const WhitneyChecks& w = r.whitney;
        auto b = [](bool x) { return std::string(x ? "1" : "0"); };
        s += csv_number(r.lambda) + "," + csv_number(r.u_measure) + "," + std::to_string(r.cubes) + "," + b(w.all()) +
            "," + b(w.disjoint) + "," + b(w.contained) + "," + b(w.covering) + "," + b(w.w2) + "," + b(w.w3) + "," +
            b(w.w4) + "," + b(w.theta) + "," + std::to_string(w.max_neighbors) + "," + csv_number(w.min_ratio) + "," +
            csv_number(w.max_ratio) + "," + csv_number(w.min_distance) + "," + csv_number(w.max_distance) + "," +
            csv_number(w.uncovered_measure) + "," + csv_number(r.equality_defect) + "," +
            csv_number(r.grad_outside_defect) + "," + csv_number(r.outside_value) + "," + csv_number(r.grad_sup_u) +
            "," + csv_number(r.grad_sup_layer) + "," + csv_number(r.grad_sup) + "," + csv_number(r.gradient_bound()) +
            "," + std::to_string(r.max_overlap);
        for (double x : r.value_ratio)
            s += "," + csv_number(x);
        for (double x : r.grad_ratio)
            s += "," + csv_number(x);
        s += "," + csv_number(r.grad_l1) + "," + csv_number(r.weak_type) + "," + csv_number(r.psi_gradient) + "," +
            csv_number(r.partition_defect) + "," + csv_number(r.neighbor_mean) + "," + csv_number(r.uncovered_fraction) +
            "\n";
    }
    return s;
}

// Mesh with v and v_lambda at the vertices and the indicator of cells
// meeting U_lambda.
inline void write_truncation_vtk(const LipschitzTruncation& tr, std::ostream& out)
{
    const Triangulation<2>& t = *tr.field().mesh;
    std::vector<double> v(2 * std::size_t(t.num_vertices())), vl(v.size());
    for (int i = 0; i < t.num_vertices(); ++i) {
        Vec2 a;
        tr.field().at(t.vertex(i), &a, nullptr);
        const Vec2 b = tr.eval(t.vertex(i)).value;
        v[2 * i] = a[0], v[2 * i + 1] = a[1];
        vl[2 * i] = b[0], vl[2 * i + 1] = b[1];
    }
    std::vector<double> in(t.num_cells());
    for (int c = 0; c < t.num_cells(); ++c)
        in[c] = detail::cell_meets(tr.level(), t, c) ? 1.0 : 0.0;
    write_vtk(t, out, {{"v", 2, std::move(v)}, {"v_lambda", 2, std::move(vl)}}, {{"in_u_lambda", 1, std::move(in)}});
}

inline void write_whitney_vtk(const WhitneyCover& W, std::ostream& out)
{
    std::vector<Box<2>> boxes;
    std::vector<double> sides;
    for (int k = 0; k < W.size(); ++k) {
        boxes.push_back({W.lo(k), W.lo(k) + Vec2(W.side(k), W.side(k))});
        sides.push_back(W.side(k));
    }
    write_vtk_squares(out, boxes, sides);
}

struct TruncationDemoConfig {
    PairKind pair = PairKind::p2_p0;
    int mesh_n = 8;
    std::vector<int> ns{1, 2, 3, 4, 5, 6};
    int j_max = 4;
    double s = 2.0;
    double amplitude = 128.0; // level sets of M are partial at j = 2
    double kappa = 1.0;
    int extra_depth = 5;
    bool zero = false;     // constant-zero sequence
    bool truncate = true;  // run the discrete truncation for every row
    int threads = 1;
};

// E^n = A/(k pi) sin(k pi x) sin(k pi y) (1, 1), k = n + 1: |grad E^n| stays
// of size A while |E^n| decays like 1/k, so E^n -> 0 weakly.
inline Vec2 oscillation(double A, int n, const Vec2& x)
{
    const double k = n + 1, w = k * kPi;
    const double v = A / w * std::sin(w * x[0]) * std::sin(w * x[1]);
    return Vec2(v, v);
}

struct TruncationDemoRow {
    LevelChoice choice;
    bool trivial = true;
    double truncated_sup = 0.0; // |E^{n,j}|_inf
    double h1_ratio = 1.0;
    double grad_sup = 0.0;
    int region_cells = 0;
};

struct TruncationDemoReport {
    TruncationDemoConfig config;
    LevelTable table;
    std::vector<TruncationDemoRow> rows;
    std::vector<double> grad_norm; // |grad E^n|_s per n
    std::vector<double> field_sup; // |E^n|_inf per n (quadrature points)
    // per j: |E^{n,j}|_inf at the last n over the first n
    std::vector<double> sup_decay;
    double seconds = 0.0;
};

inline TruncationDemoReport run_truncation_demo(const TruncationDemoConfig& c)
{
    if (c.ns.empty() || c.mesh_n < 1)
        throw ConfigError("truncation demo needs a nonempty n list and a positive mesh size");
    if (c.j_max < 1 || c.j_max > 4)
        throw ConfigError("j_max must lie in [1, 4]");
    if (!(c.s > 1.0))
        throw ConfigError("s must exceed 1");
    const auto t0 = std::chrono::steady_clock::now();
    TruncationDemoReport rep;
    rep.config = c;
    const SpacePair sp(std::make_shared<const Triangulation<2>>(build_unit_square(c.mesh_n)), c.pair);
    const VelocityProjector proj(sp);
    std::vector<VectorXd> E;
    std::vector<LatticeMaximal> lms;
    std::vector<LevelInput> seq;
    for (int n : c.ns) {
        VectorXd V = VectorXd::Zero(sp.velocity_dim());
        if (!c.zero)
            V = interpolate(sp, analytic_field([A = c.amplitude, n](const Vec2& x) { return oscillation(A, n, x); }));
        lms.push_back(lattice_maximal(mesh_field(sp, V), c.threads));
        const VelocityNorms nv = velocity_norms(sp, V, c.s);
        rep.grad_norm.push_back(nv.grad);
        double sup = 0;
        detail::sweep(sp, V, nullptr, sp.default_degree(), [&sup](double, const Vec2&, const Vec2& v, const Mat2&, double) {
            sup = std::max(sup, v.norm());
        });
        rep.field_sup.push_back(sup);
        seq.push_back({lms.back().M.value, lms.back().frame.cell_area(), nv.grad});
        E.push_back(std::move(V));
    }
    rep.table = select_levels(seq, c.s, c.j_max, c.kappa);
    for (const LevelChoice& ch : rep.table.rows) {
        TruncationDemoRow row;
        row.choice = ch;
        if (c.truncate) {
            const DiscreteTruncation d = discrete_truncate(sp, proj, E[ch.n], lms[ch.n], ch.lambda, c.extra_depth);
            row.trivial = d.report.trivial;
            row.truncated_sup = d.report.value_sup;
            row.h1_ratio = d.report.h1_ratio;
            row.grad_sup = d.report.grad_sup;
            row.region_cells = d.report.region_cells;
        } else {
            row.trivial = ch.measure == 0.0;
            row.truncated_sup = rep.field_sup[ch.n];
        }
        rep.rows.push_back(row);
    }
    const std::size_t N = c.ns.size();
    for (int j = 1; j <= c.j_max; ++j) {
        const double first = rep.rows[j - 1].truncated_sup, last = rep.rows[(N - 1) * c.j_max + j - 1].truncated_sup;
        rep.sup_decay.push_back(first > 0 ? last / first : 0.0);
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// Header `n,j,m,lambda,measure,ratio,trivial,truncated_sup,field_sup,grad_norm,region_cells,h1_ratio`;
// n is the sequence index from the configuration.
inline std::string truncation_demo_csv(const TruncationDemoReport& r)
{
    std::string s = "n,j,m,lambda,measure,ratio,trivial,truncated_sup,field_sup,grad_norm,region_cells,h1_ratio\n";
    for (const auto& row : r.rows) {
        const auto& ch = row.choice;
        s += std::to_string(r.config.ns[ch.n]) + "," + std::to_string(ch.j) + "," + std::to_string(ch.m) + "," +
            csv_number(ch.lambda) + "," + csv_number(ch.measure) + "," + csv_number(ch.ratio) + "," +
            (row.trivial ? "1" : "0") + "," + csv_number(row.truncated_sup) + "," + csv_number(r.field_sup[ch.n]) + "," +
            csv_number(r.grad_norm[ch.n]) + "," + std::to_string(row.region_cells) + "," + csv_number(row.h1_ratio) + "\n";
    }
    return s;
}

} // namespace imflow
