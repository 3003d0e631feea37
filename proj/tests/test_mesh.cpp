#include "imflow/mesh/generators.hpp"
#include "imflow/mesh/io.hpp"
#include "imflow/quadrature.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace imflow;

TEST(Quadrature, GaussExactForPolynomials)
{
    for (int n = 1; n <= 12; ++n) {
        const auto g = gauss_legendre(n);
        for (int p = 0; p <= 2 * n - 1; ++p) {
            double s = 0;
            for (int i = 0; i < n; ++i)
                s += g.w[i] * std::pow(g.x[i], p);
            EXPECT_NEAR(s, 1.0 / (p + 1), 1e-14) << "n=" << n << " p=" << p;
        }
    }
}

// Integral of l0^a l1^b l2^c over the reference triangle, as a fraction of its area.
static double monomial_fraction(int a, int b, int c)
{
    auto f = [](int k) { return std::tgamma(k + 1.0); };
    return 2.0 * f(a) * f(b) * f(c) / f(a + b + c + 2);
}

TEST(Quadrature, TriangleRulesExact)
{
    for (int deg = 0; deg <= 10; ++deg) {
        for (int apex = 0; apex < 3; ++apex) {
            const auto r = collapsed_rule(deg, apex);
            for (int a = 0; a <= deg; ++a)
                for (int b = 0; a + b <= deg; ++b) {
                    const int c = deg - a - b;
                    double s = 0;
                    for (std::size_t q = 0; q < r.size(); ++q)
                        s += r.w[q] * std::pow(r.bary[q][0], a) * std::pow(r.bary[q][1], b) * std::pow(r.bary[q][2], c);
                    EXPECT_NEAR(s, monomial_fraction(a, b, c), 1e-14);
                }
        }
        const auto r = vertex_star_rule(deg);
        for (int a = 0; a <= deg; ++a) {
            double s = 0;
            for (std::size_t q = 0; q < r.size(); ++q)
                s += r.w[q] * std::pow(r.bary[q][0], a) * std::pow(r.bary[q][1], deg - a);
            EXPECT_NEAR(s, monomial_fraction(a, deg - a, 0), 1e-14);
        }
    }
}

TEST(Quadrature, StarRuleAvoidsVertices)
{
    const auto r = vertex_star_rule(8);
    for (const auto& b : r.bary)
        for (double x : b)
            EXPECT_LT(x, 1.0 - 1e-3);
}

TEST(Mesh, UniformSquareCountsAndShape)
{
    for (int n : {1, 2, 5, 16}) {
        const auto t = build_unit_square(n);
        EXPECT_EQ(t.num_cells(), 2 * n * n);
        EXPECT_EQ(t.num_vertices(), (n + 1) * (n + 1));
        EXPECT_EQ(t.num_facets(), 3 * n * n + 2 * n);
        EXPECT_EQ(t.num_boundary_facets(), 4 * n);
        EXPECT_NEAR(t.total_measure(), 1.0, 1e-14);
        EXPECT_NEAR(t.max_shape_ratio(), 1.0 + std::sqrt(2.0), 1e-12);
        EXPECT_NEAR(t.max_mesh_size(), std::sqrt(0.5) / n, 1e-14);
        const auto chk = validate(t, 1.0);
        EXPECT_TRUE(chk.ok) << chk.message;
    }
}

TEST(Mesh, BoundaryTagsBySide)
{
    const auto t = build_unit_square(4);
    std::array<int, 6> count{};
    for (int f = 0; f < t.num_facets(); ++f)
        ++count[t.boundary_tag(f)];
    EXPECT_EQ(count[1], 4);
    EXPECT_EQ(count[2], 4);
    EXPECT_EQ(count[3], 4);
    EXPECT_EQ(count[4], 4);
    EXPECT_EQ(count[5], 0);
}

TEST(Mesh, RefinementKeepsShapeAndTiles)
{
    auto t = build_unit_square(2);
    const double s0 = t.max_shape_ratio();
    for (int l = 0; l < 3; ++l) {
        auto r = refine_uniform(t);
        EXPECT_EQ(r.num_cells(), 4 * t.num_cells());
        EXPECT_NEAR(r.total_measure(), 1.0, 1e-13);
        EXPECT_NEAR(r.max_shape_ratio(), s0, 1e-10);
        EXPECT_TRUE(validate(r, 1.0).ok);
        EXPECT_NEAR(r.max_mesh_size(), 0.5 * t.max_mesh_size(), 1e-14);
        t = std::move(r);
    }
    EXPECT_EQ(t.num_boundary_facets(), 2 * 4 * 8);
}

TEST(Mesh, KuhnBoxAndBeyRefinement)
{
    Box<3> b{Vec<3>::Zero(), Vec<3>::Ones()};
    auto t = build_box(b, 2);
    EXPECT_EQ(t.num_cells(), 48);
    EXPECT_NEAR(t.total_measure(), 1.0, 1e-14);
    EXPECT_TRUE(validate(t, 1.0).ok);
    const double s0 = t.max_shape_ratio();
    double s = s0;
    for (int l = 0; l < 2; ++l) {
        t = refine_uniform(t);
        EXPECT_NEAR(t.total_measure(), 1.0, 1e-12);
        EXPECT_TRUE(validate(t, 1.0).ok);
        s = std::max(s, t.max_shape_ratio());
    }
    EXPECT_EQ(t.num_cells(), 48 * 64);
    EXPECT_LT(s, 2.0 * s0);
}

TEST(Mesh, LocateAgreesWithGeometry)
{
    const auto t = build_unit_square(7);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 2000; ++k) {
        Vec2 x(u(rng), u(rng));
        const auto l = t.locate(x);
        ASSERT_GE(l.cell, 0);
        const Vec2 y = t.map(l.cell, l.bary.data());
        EXPECT_NEAR((x - y).norm(), 0.0, 1e-14);
        for (int c = 0; c < l.cell; ++c) {
            const auto b = t.barycentric(c, x);
            EXPECT_LT(std::min({b[0], b[1], b[2]}), -1e-12);
        }
    }
    // shared vertex: lowest cell id wins
    const auto l = t.locate(Vec2(3.0 / 7, 2.0 / 7));
    EXPECT_EQ(l.cell, t.vertex_cells(2 * 8 + 3).front());
    EXPECT_LT(t.locate(Vec2(1.5, 0.5)).cell, 0);
    EXPECT_THROW(t.locate_or_throw(Vec2(-0.1, 0.5)), NotFound);
}

TEST(Mesh, PatchIsVertexNeighbourhood)
{
    const auto t = build_unit_square(4);
    for (int c = 0; c < t.num_cells(); ++c) {
        const auto p = t.patch(c);
        EXPECT_TRUE(std::binary_search(p.begin(), p.end(), c));
        for (int e = 0; e < t.num_cells(); ++e) {
            bool share = false;
            for (int a : t.cell(c))
                for (int b : t.cell(e))
                    share = share || a == b;
            EXPECT_EQ(share, std::binary_search(p.begin(), p.end(), e));
        }
    }
}

TEST(Mesh, DetectsDegenerateAndHanging)
{
    std::vector<Vec2> v{{0, 0}, {1, 0}, {2, 0}};
    EXPECT_THROW(Triangulation<2>(v, {{0, 1, 2}}), InvalidArgument);
    // hanging node: one big triangle next to two small ones
    std::vector<Vec2> w{{0, 0}, {1, 0}, {0, 1}, {1, 1}, {0.5, 0.5}};
    Triangulation<2> h(w, {{0, 1, 2}, {1, 3, 4}, {4, 3, 2}});
    const auto chk = validate(h, 1.0);
    EXPECT_FALSE(chk.ok);
    EXPECT_EQ(chk.hanging_vertices, 1);
}

TEST(Mesh, RectangleUnionLShape)
{
    std::vector<Box<2>> r{{Vec2(0, 0), Vec2(1, 0.5)}, {Vec2(0, 0.5), Vec2(0.5, 1)}};
    const auto t = build_rectangle_union(r, 0.125);
    EXPECT_NEAR(t.total_measure(), 0.75, 1e-14);
    EXPECT_TRUE(validate(t, 0.75).ok);
    EXPECT_THROW(build_rectangle_union(r, 0.3), InvalidArgument);
}

TEST(MeshIo, RoundTripAndErrors)
{
    const auto t = refine_uniform(build_unit_square(3));
    std::stringstream s;
    write_mesh(t, s);
    const auto d = read_mesh_data(s);
    const auto u = to_triangulation<2>(d);
    EXPECT_EQ(u.num_cells(), t.num_cells());
    for (int i = 0; i < t.num_vertices(); ++i)
        EXPECT_EQ((u.vertex(i) - t.vertex(i)).norm(), 0.0);
    for (int c = 0; c < t.num_cells(); ++c)
        EXPECT_EQ(u.cell(c), t.cell(c));

    std::stringstream bad("DIM 2\nVERTICES 3\nCELLS 1\n0 0\n1 0\n0 1\n0 1 5\n");
    EXPECT_THROW(read_mesh_data(bad), IoError);
    std::stringstream trunc("DIM 2\nVERTICES 3\nCELLS 1\n0 0\n1 0\n");
    EXPECT_THROW(read_mesh_data(trunc), IoError);
    std::stringstream word("DIM 2\nVERTICES 3\nCELLS 1\n0 0\n1 x\n0 1\n0 1 2\n");
    EXPECT_THROW(read_mesh_data(word), IoError);
    std::stringstream dim("DIM 4\nVERTICES 3\nCELLS 1\n");
    EXPECT_THROW(read_mesh_data(dim), IoError);
}

TEST(MeshIo, VtkHasExpectedBlocks)
{
    const auto t = build_unit_square(2);
    std::stringstream s;
    write_vtk(t, s, {{"p", 1, std::vector<double>(9, 1.0)}}, {{"c", 2, std::vector<double>(16, 0.0)}});
    const std::string out = s.str();
    EXPECT_NE(out.find("POINTS 9 double"), std::string::npos);
    EXPECT_NE(out.find("CELLS 8 32"), std::string::npos);
    EXPECT_NE(out.find("POINT_DATA 9"), std::string::npos);
    EXPECT_NE(out.find("VECTORS c double"), std::string::npos);
    std::stringstream e;
    EXPECT_THROW(write_vtk(t, e, {{"p", 1, std::vector<double>(3, 1.0)}}), InvalidArgument);
}
