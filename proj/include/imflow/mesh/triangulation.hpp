#pragma once

#include "imflow/core.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>

namespace imflow {

template <int D> struct Box {
    Vec<D> lo, hi;
    bool overlaps(const Box& o) const
    {
        for (int i = 0; i < D; ++i)
            if (lo[i] > o.hi[i] || o.lo[i] > hi[i])
                return false;
        return true;
    }
    bool contains(const Vec<D>& x, double tol = 0.0) const
    {
        for (int i = 0; i < D; ++i)
            if (x[i] < lo[i] - tol || x[i] > hi[i] + tol)
                return false;
        return true;
    }
    double diameter() const { return (hi - lo).norm(); }
    double measure() const { return (hi - lo).prod(); }
};

struct Located {
    int cell = -1;
    std::array<double, 4> bary{}; // first D+1 entries used
};

// Conforming simplicial mesh with affine cell maps x = x_0 + A (xi).
// Cell vertex order is kept as given (refinement rules depend on it).
// Immutable after construction.
template <int D> class Triangulation {
public:
    static constexpr int kVerts = D + 1;
    using Point = Vec<D>;
    using Cell = std::array<int, D + 1>;
    using Facet = std::array<int, D>;
    using Tagger = std::function<int(const Point& facet_centroid)>;

    Triangulation() = default;

    Triangulation(std::vector<Point> vertices, std::vector<Cell> cells, const Tagger& tagger = {})
        : vertices_(std::move(vertices)), cells_(std::move(cells)), tagger_(tagger)
    {
        if (cells_.empty())
            throw InvalidArgument("triangulation needs at least one cell");
        for (auto& c : cells_)
            for (int v : c)
                if (v < 0 || v >= static_cast<int>(vertices_.size()))
                    throw InvalidArgument("cell references vertex " + std::to_string(v) + " out of range");
        build_geometry();
        build_facets(tagger);
        build_vertex_cells();
        build_bins();
    }

    static constexpr int dimension() { return D; }
    const Tagger& tagger() const { return tagger_; }
    int num_vertices() const { return static_cast<int>(vertices_.size()); }
    int num_cells() const { return static_cast<int>(cells_.size()); }
    int num_facets() const { return static_cast<int>(facets_.size()); }

    const Point& vertex(int i) const { return vertices_[i]; }
    const std::vector<Point>& vertices() const { return vertices_; }
    const Cell& cell(int c) const { return cells_[c]; }
    const std::vector<Cell>& cells() const { return cells_; }

    const Mat<D>& jacobian(int c) const { return jac_[c]; }
    const Mat<D>& inverse_jacobian(int c) const { return jinv_[c]; }
    double measure(int c) const { return measure_[c]; }
    double mesh_size(int c) const { return std::pow(measure_[c], 1.0 / D); }
    double diameter(int c) const { return diam_[c]; }
    double inradius(int c) const { return inradius_[c]; }
    double shape_ratio(int c) const { return diam_[c] / (2.0 * inradius_[c]); }
    double max_mesh_size() const { return max_h_; }
    double min_mesh_size() const { return min_h_; }
    double total_measure() const { return total_measure_; }
    const Box<D>& bounding_box() const { return bbox_; }
    double max_shape_ratio() const
    {
        double s = 0.0;
        for (int c = 0; c < num_cells(); ++c)
            s = std::max(s, shape_ratio(c));
        return s;
    }

    // Gradients of the barycentric coordinates on cell c (rows = vertices).
    Eigen::Matrix<double, D + 1, D> bary_gradients(int c) const
    {
        Eigen::Matrix<double, D + 1, D> g;
        const Mat<D>& Ai = jinv_[c];
        for (int k = 0; k < D; ++k)
            g.row(k + 1) = Ai.row(k);
        g.row(0) = -Ai.colwise().sum();
        return g;
    }

    Point map(int c, const double* bary) const
    {
        Point x = Point::Zero();
        for (int k = 0; k <= D; ++k)
            x += bary[k] * vertices_[cells_[c][k]];
        return x;
    }
    template <std::size_t N> Point map(int c, const std::array<double, N>& b) const { return map(c, b.data()); }

    std::array<double, 4> barycentric(int c, const Point& x) const
    {
        const Point xi = jinv_[c] * (x - vertices_[cells_[c][0]]);
        std::array<double, 4> b{};
        double s = 0.0;
        for (int k = 0; k < D; ++k) {
            b[k + 1] = xi[k];
            s += xi[k];
        }
        b[0] = 1.0 - s;
        return b;
    }

    Point centroid(int c) const
    {
        Point x = Point::Zero();
        for (int v : cells_[c])
            x += vertices_[v];
        return x / double(D + 1);
    }

    Box<D> cell_box(int c) const
    {
        Box<D> b{vertices_[cells_[c][0]], vertices_[cells_[c][0]]};
        for (int v : cells_[c]) {
            b.lo = b.lo.cwiseMin(vertices_[v]);
            b.hi = b.hi.cwiseMax(vertices_[v]);
        }
        return b;
    }

    // Facets: sorted vertex tuples, adjacent cells (second = -1 on the
    // boundary), boundary tag (0 for interior facets).
    const Facet& facet(int f) const { return facets_[f]; }
    std::array<int, 2> facet_cells(int f) const { return facet_cells_[f]; }
    int boundary_tag(int f) const { return facet_tags_[f]; }
    bool is_boundary_facet(int f) const { return facet_cells_[f][1] < 0; }
    // Facet opposite local vertex i of cell c.
    int cell_facet(int c, int i) const { return cell_facets_[c][i]; }
    int neighbor(int c, int i) const
    {
        const auto fc = facet_cells_[cell_facets_[c][i]];
        return fc[0] == c ? fc[1] : fc[0];
    }
    bool is_boundary_vertex(int v) const { return boundary_vertex_[v]; }
    double facet_measure(int f) const { return facet_measure_[f]; }
    // Outward unit normal of facet f seen from its first cell.
    Point facet_normal(int f) const { return facet_normal_[f]; }

    const std::vector<int>& vertex_cells(int v) const { return vertex_cells_[v]; }

    // Patch of cell c: all cells sharing at least one vertex with c.
    std::vector<int> patch(int c) const
    {
        std::vector<int> p;
        for (int v : cells_[c])
            p.insert(p.end(), vertex_cells_[v].begin(), vertex_cells_[v].end());
        std::sort(p.begin(), p.end());
        p.erase(std::unique(p.begin(), p.end()), p.end());
        return p;
    }

    // Candidate cells whose bounding boxes may meet b (sorted, unique).
    std::vector<int> cells_near(const Box<D>& b) const
    {
        std::array<int, D> lo{}, hi{};
        for (int i = 0; i < D; ++i) {
            lo[i] = std::clamp(int(std::floor((b.lo[i] - bbox_.lo[i]) / bin_size_[i])), 0, nbins_[i] - 1);
            hi[i] = std::clamp(int(std::floor((b.hi[i] - bbox_.lo[i]) / bin_size_[i])), 0, nbins_[i] - 1);
        }
        std::vector<int> out;
        if (!b.overlaps(bbox_))
            return out;
        std::array<int, D> idx = lo;
        while (true) {
            const auto& bin = bins_[flat_bin(idx)];
            out.insert(out.end(), bin.begin(), bin.end());
            int k = 0;
            for (; k < D; ++k) {
                if (++idx[k] <= hi[k])
                    break;
                idx[k] = lo[k];
            }
            if (k == D)
                break;
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    // Containing cell; ties on shared facets go to the lowest cell id.
    // Barycentrics within tol of the boundary are clamped and renormalized.
    Located locate(const Point& x, double tol = 1e-12) const
    {
        Box<D> b{x, x};
        for (int c : cells_near(b)) {
            auto bc = barycentric(c, x);
            double mn = 1.0;
            for (int k = 0; k <= D; ++k)
                mn = std::min(mn, bc[k]);
            if (mn >= -tol) {
                double s = 0.0;
                for (int k = 0; k <= D; ++k) {
                    bc[k] = std::max(bc[k], 0.0);
                    s += bc[k];
                }
                for (int k = 0; k <= D; ++k)
                    bc[k] /= s;
                return {c, bc};
            }
        }
        return {};
    }

    Located locate_or_throw(const Point& x) const
    {
        Located l = locate(x);
        if (l.cell < 0)
            throw NotFound("point outside the mesh");
        return l;
    }

    int num_boundary_facets() const
    {
        int n = 0;
        for (int f = 0; f < num_facets(); ++f)
            n += is_boundary_facet(f);
        return n;
    }

private:
    void build_geometry()
    {
        const int nc = num_cells();
        jac_.resize(nc);
        jinv_.resize(nc);
        measure_.resize(nc);
        diam_.resize(nc);
        inradius_.resize(nc);
        double fact = 1.0;
        for (int k = 2; k <= D; ++k)
            fact *= k;
        total_measure_ = 0.0;
        max_h_ = 0.0;
        min_h_ = kInf;
        for (int c = 0; c < nc; ++c) {
            Mat<D> A;
            for (int k = 0; k < D; ++k)
                A.col(k) = vertices_[cells_[c][k + 1]] - vertices_[cells_[c][0]];
            const double det = std::abs(A.determinant());
            double scale = 0.0;
            for (int k = 0; k < D; ++k)
                scale = std::max(scale, A.col(k).norm());
            if (!(det > 1e-14 * std::pow(scale, D)))
                throw InvalidArgument("degenerate cell " + std::to_string(c));
            jac_[c] = A;
            jinv_[c] = A.inverse();
            measure_[c] = det / fact;
            total_measure_ += measure_[c];
            double dm = 0.0;
            for (int a = 0; a <= D; ++a)
                for (int b = a + 1; b <= D; ++b)
                    dm = std::max(dm, (vertices_[cells_[c][a]] - vertices_[cells_[c][b]]).norm());
            diam_[c] = dm;
            double fsum = 0.0;
            for (int i = 0; i <= D; ++i)
                fsum += local_facet_measure(c, i);
            inradius_[c] = D * measure_[c] / fsum;
            const double h = mesh_size(c);
            max_h_ = std::max(max_h_, h);
            min_h_ = std::min(min_h_, h);
        }
    }

    double local_facet_measure(int c, int i) const
    {
        std::array<Point, D> p;
        int n = 0;
        for (int k = 0; k <= D; ++k)
            if (k != i)
                p[n++] = vertices_[cells_[c][k]];
        if constexpr (D == 2) {
            return (p[1] - p[0]).norm();
        } else {
            const Eigen::Vector3d a = p[1] - p[0], b = p[2] - p[0];
            return 0.5 * a.cross(b).norm();
        }
    }

    void build_facets(const Tagger& tagger)
    {
        std::map<Facet, int> index;
        cell_facets_.assign(num_cells(), {});
        for (int c = 0; c < num_cells(); ++c) {
            for (int i = 0; i <= D; ++i) {
                Facet f;
                int n = 0;
                for (int k = 0; k <= D; ++k)
                    if (k != i)
                        f[n++] = cells_[c][k];
                std::sort(f.begin(), f.end());
                auto [it, fresh] = index.emplace(f, num_facets());
                if (fresh) {
                    facets_.push_back(f);
                    facet_cells_.push_back({c, -1});
                } else {
                    auto& fc = facet_cells_[it->second];
                    if (fc[1] >= 0)
                        throw InvalidArgument("non-manifold facet shared by more than two cells");
                    fc[1] = c;
                }
                cell_facets_[c][i] = it->second;
            }
        }
        facet_tags_.assign(num_facets(), 0);
        facet_measure_.resize(num_facets());
        facet_normal_.resize(num_facets());
        boundary_vertex_.assign(num_vertices(), false);
        for (int f = 0; f < num_facets(); ++f) {
            const int c = facet_cells_[f][0];
            int i = 0;
            while (cell_facets_[c][i] != f)
                ++i;
            facet_measure_[f] = local_facet_measure(c, i);
            Point n = -bary_gradients(c).row(i).transpose();
            facet_normal_[f] = n.normalized();
            if (facet_cells_[f][1] < 0) {
                Point xc = Point::Zero();
                for (int v : facets_[f]) {
                    xc += vertices_[v];
                    boundary_vertex_[v] = true;
                }
                xc /= double(D);
                facet_tags_[f] = tagger ? tagger(xc) : 1;
            }
        }
    }

    void build_vertex_cells()
    {
        vertex_cells_.assign(num_vertices(), {});
        for (int c = 0; c < num_cells(); ++c)
            for (int v : cells_[c])
                vertex_cells_[v].push_back(c);
    }

    int flat_bin(const std::array<int, D>& idx) const
    {
        int f = 0;
        for (int k = D - 1; k >= 0; --k)
            f = f * nbins_[k] + idx[k];
        return f;
    }

    void build_bins()
    {
        bbox_ = cell_box(0);
        for (const auto& v : vertices_) {
            bbox_.lo = bbox_.lo.cwiseMin(v);
            bbox_.hi = bbox_.hi.cwiseMax(v);
        }
        const double target = std::max(1.0, std::pow(double(num_cells()) / 2.0, 1.0 / D));
        const Point ext = bbox_.hi - bbox_.lo;
        const double emax = ext.maxCoeff();
        int total = 1;
        for (int i = 0; i < D; ++i) {
            nbins_[i] = std::max(1, int(std::ceil(target * ext[i] / emax)));
            bin_size_[i] = ext[i] > 0 ? ext[i] / nbins_[i] : 1.0;
            total *= nbins_[i];
        }
        bins_.assign(total, {});
        for (int c = 0; c < num_cells(); ++c) {
            const Box<D> b = cell_box(c);
            std::array<int, D> lo{}, hi{};
            for (int i = 0; i < D; ++i) {
                lo[i] = std::clamp(int(std::floor((b.lo[i] - bbox_.lo[i]) / bin_size_[i] - 1e-9)), 0, nbins_[i] - 1);
                hi[i] = std::clamp(int(std::floor((b.hi[i] - bbox_.lo[i]) / bin_size_[i] + 1e-9)), 0, nbins_[i] - 1);
            }
            std::array<int, D> idx = lo;
            while (true) {
                bins_[flat_bin(idx)].push_back(c);
                int k = 0;
                for (; k < D; ++k) {
                    if (++idx[k] <= hi[k])
                        break;
                    idx[k] = lo[k];
                }
                if (k == D)
                    break;
            }
        }
    }

    std::vector<Point> vertices_;
    std::vector<Cell> cells_;
    Tagger tagger_;
    std::vector<Mat<D>> jac_, jinv_;
    std::vector<double> measure_, diam_, inradius_;
    double total_measure_ = 0, max_h_ = 0, min_h_ = 0;
    std::vector<Facet> facets_;
    std::vector<std::array<int, 2>> facet_cells_;
    std::vector<int> facet_tags_;
    std::vector<double> facet_measure_;
    std::vector<Point> facet_normal_;
    std::vector<std::array<int, D + 1>> cell_facets_;
    std::vector<char> boundary_vertex_;
    std::vector<std::vector<int>> vertex_cells_;
    Box<D> bbox_{};
    std::array<int, D> nbins_{};
    Point bin_size_ = Point::Ones();
    std::vector<std::vector<int>> bins_;
};

// Structural checks: invertibility is enforced at construction; this
// verifies tiling of the expected measure and conformity.
struct MeshCheck {
    bool ok = true;
    double measure_defect = 0.0;
    int hanging_vertices = 0;
    double max_shape_ratio = 0.0;
    std::string message;
};

template <int D> MeshCheck validate(const Triangulation<D>& t, double expected_measure = -1.0)
{
    MeshCheck r;
    r.max_shape_ratio = t.max_shape_ratio();
    if (expected_measure > 0) {
        r.measure_defect = std::abs(t.total_measure() - expected_measure) / expected_measure;
        if (r.measure_defect > 1e-12) {
            r.ok = false;
            r.message += "cells do not tile the domain; ";
        }
    }
    for (int v = 0; v < t.num_vertices(); ++v) {
        const auto& x = t.vertex(v);
        Box<D> b{x, x};
        for (int c : t.cells_near(b)) {
            const auto& cv = t.cell(c);
            if (std::find(cv.begin(), cv.end(), v) != cv.end())
                continue;
            const auto bc = t.barycentric(c, x);
            double mn = 1.0;
            for (int k = 0; k <= D; ++k)
                mn = std::min(mn, bc[k]);
            if (mn > -1e-12) {
                ++r.hanging_vertices;
                break;
            }
        }
    }
    if (r.hanging_vertices > 0) {
        r.ok = false;
        r.message += std::to_string(r.hanging_vertices) + " hanging vertices; ";
    }
    return r;
}

} // namespace imflow
