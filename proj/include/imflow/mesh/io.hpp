#pragma once

#include "imflow/mesh/triangulation.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <variant>

namespace imflow {

// Raw contents of a mesh file before the dimension is fixed.
struct MeshData {
    int dim = 0;
    std::vector<std::vector<double>> coords;
    std::vector<std::vector<int>> cells;
};

namespace detail {
inline std::string next_token(std::istream& in, const std::string& what)
{
    std::string tok;
    while (in >> tok) {
        if (tok[0] == '#') {
            std::string rest;
            std::getline(in, rest);
            continue;
        }
        return tok;
    }
    throw IoError("mesh file truncated while reading " + what);
}

template <typename T> T parse_number(const std::string& tok, const std::string& what)
{
    std::istringstream s(tok);
    T v{};
    s >> v;
    if (s.fail() || !s.eof())
        throw IoError("malformed " + what + ": '" + tok + "'");
    return v;
}
} // namespace detail

// ASCII format: header lines `DIM d`, `VERTICES k`, `CELLS m`, then k
// coordinate rows and m rows of d+1 zero-based vertex indices. With
// to_end = false the stream is left after the cell block (embedded meshes).
inline MeshData read_mesh_data(std::istream& in, bool to_end = true)
{
    MeshData m;
    int nv = -1, nc = -1;
    for (int i = 0; i < 3; ++i) {
        const std::string key = detail::next_token(in, "header");
        const int val = detail::parse_number<int>(detail::next_token(in, key), key);
        if (key == "DIM")
            m.dim = val;
        else if (key == "VERTICES")
            nv = val;
        else if (key == "CELLS")
            nc = val;
        else
            throw IoError("unknown header keyword '" + key + "'");
    }
    if (m.dim != 2 && m.dim != 3)
        throw IoError("DIM must be 2 or 3");
    if (nv <= 0 || nc <= 0)
        throw IoError("VERTICES and CELLS must be positive");
    m.coords.assign(nv, std::vector<double>(m.dim));
    for (auto& row : m.coords)
        for (auto& x : row)
            x = detail::parse_number<double>(detail::next_token(in, "coordinates"), "coordinate");
    m.cells.assign(nc, std::vector<int>(m.dim + 1));
    for (auto& row : m.cells)
        for (auto& v : row) {
            v = detail::parse_number<int>(detail::next_token(in, "cells"), "vertex index");
            if (v < 0 || v >= nv)
                throw IoError("vertex index " + std::to_string(v) + " out of range");
        }
    std::string extra;
    while (to_end && in >> extra)
        if (extra[0] != '#')
            throw IoError("trailing data after cell block");
    return m;
}

inline MeshData read_mesh_data(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open mesh file " + path);
    return read_mesh_data(in);
}

template <int D> Triangulation<D> to_triangulation(const MeshData& m)
{
    if (m.dim != D)
        throw InvalidArgument("mesh dimension " + std::to_string(m.dim) + " does not match " + std::to_string(D));
    std::vector<Vec<D>> v(m.coords.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        for (int k = 0; k < D; ++k)
            v[i][k] = m.coords[i][k];
    std::vector<std::array<int, D + 1>> c(m.cells.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        for (int k = 0; k <= D; ++k)
            c[i][k] = m.cells[i][k];
    return Triangulation<D>(std::move(v), std::move(c));
}

template <int D> void write_mesh(const Triangulation<D>& t, std::ostream& out)
{
    out << "DIM " << D << "\nVERTICES " << t.num_vertices() << "\nCELLS " << t.num_cells() << "\n";
    out << std::setprecision(17);
    for (const auto& v : t.vertices()) {
        for (int k = 0; k < D; ++k)
            out << (k ? " " : "") << v[k];
        out << "\n";
    }
    for (const auto& c : t.cells()) {
        for (int k = 0; k <= D; ++k)
            out << (k ? " " : "") << c[k];
        out << "\n";
    }
}

template <int D> void write_mesh(const Triangulation<D>& t, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path);
    write_mesh(t, out);
}

// Legacy ASCII VTK unstructured grid with optional point and cell data.
struct VtkField {
    std::string name;
    int components = 1;
    std::vector<double> values; // size = entities * components
};

template <int D>
void write_vtk(const Triangulation<D>& t, std::ostream& out, const std::vector<VtkField>& point_data = {},
    const std::vector<VtkField>& cell_data = {})
{
    out << "# vtk DataFile Version 3.0\nimflow\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << std::setprecision(17);
    out << "POINTS " << t.num_vertices() << " double\n";
    for (const auto& v : t.vertices())
        out << v[0] << " " << v[1] << " " << (D == 3 ? v[D - 1] : 0.0) << "\n";
    out << "CELLS " << t.num_cells() << " " << t.num_cells() * (D + 2) << "\n";
    for (const auto& c : t.cells()) {
        out << D + 1;
        for (int k = 0; k <= D; ++k)
            out << " " << c[k];
        out << "\n";
    }
    out << "CELL_TYPES " << t.num_cells() << "\n";
    for (int c = 0; c < t.num_cells(); ++c)
        out << (D == 2 ? 5 : 10) << "\n";
    auto emit = [&out](const std::vector<VtkField>& fields, std::size_t n) {
        for (const auto& f : fields) {
            if (f.values.size() != n * f.components)
                throw InvalidArgument("VTK field '" + f.name + "' has wrong size");
            if (f.components == 1) {
                out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
                for (double x : f.values)
                    out << x << "\n";
            } else {
                out << "VECTORS " << f.name << " double\n";
                for (std::size_t i = 0; i < n; ++i) {
                    for (int k = 0; k < 3; ++k)
                        out << (k ? " " : "") << (k < f.components ? f.values[i * f.components + k] : 0.0);
                    out << "\n";
                }
            }
        }
    };
    if (!point_data.empty()) {
        out << "POINT_DATA " << t.num_vertices() << "\n";
        emit(point_data, t.num_vertices());
    }
    if (!cell_data.empty()) {
        out << "CELL_DATA " << t.num_cells() << "\n";
        emit(cell_data, t.num_cells());
    }
}

template <int D>
void write_vtk(const Triangulation<D>& t, const std::string& path, const std::vector<VtkField>& point_data = {},
    const std::vector<VtkField>& cell_data = {})
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path);
    write_vtk(t, out, point_data, cell_data);
}

// Triangle mesh of a legacy ASCII VTK unstructured grid (data blocks ignored).
inline Triangulation<2> read_vtk_mesh(std::istream& in)
{
    std::vector<Vec2> v;
    std::vector<std::array<int, 3>> c;
    bool points = false, cells = false;
    std::string tok;
    while (in >> tok) {
        if (tok == "POINTS") {
            const int n = detail::parse_number<int>(detail::next_token(in, "POINTS"), "point count");
            detail::next_token(in, "POINTS type");
            v.resize(n);
            for (auto& x : v) {
                x[0] = detail::parse_number<double>(detail::next_token(in, "points"), "coordinate");
                x[1] = detail::parse_number<double>(detail::next_token(in, "points"), "coordinate");
                detail::next_token(in, "points");
            }
            points = true;
        } else if (tok == "CELLS") {
            const int m = detail::parse_number<int>(detail::next_token(in, "CELLS"), "cell count");
            detail::next_token(in, "CELLS size");
            c.resize(m);
            for (auto& cell : c) {
                if (detail::parse_number<int>(detail::next_token(in, "cells"), "cell size") != 3)
                    throw IoError("VTK reader handles triangles only");
                for (int& k : cell) {
                    k = detail::parse_number<int>(detail::next_token(in, "cells"), "vertex index");
                    if (k < 0 || k >= int(v.size()))
                        throw IoError("VTK vertex index " + std::to_string(k) + " out of range");
                }
            }
            cells = true;
            break;
        }
    }
    if (!points || !cells)
        throw IoError("VTK file lacks POINTS or CELLS");
    return Triangulation<2>(std::move(v), std::move(c));
}

// Axis-aligned squares as VTK polydata quads.
inline void write_vtk_squares(std::ostream& out, const std::vector<Box<2>>& squares, const std::vector<double>& side)
{
    out << "# vtk DataFile Version 3.0\nimflow squares\nASCII\nDATASET POLYDATA\n";
    out << std::setprecision(12);
    out << "POINTS " << 4 * squares.size() << " double\n";
    for (const auto& s : squares) {
        out << s.lo[0] << " " << s.lo[1] << " 0\n" << s.hi[0] << " " << s.lo[1] << " 0\n";
        out << s.hi[0] << " " << s.hi[1] << " 0\n" << s.lo[0] << " " << s.hi[1] << " 0\n";
    }
    out << "POLYGONS " << squares.size() << " " << 5 * squares.size() << "\n";
    for (std::size_t i = 0; i < squares.size(); ++i)
        out << "4 " << 4 * i << " " << 4 * i + 1 << " " << 4 * i + 2 << " " << 4 * i + 3 << "\n";
    out << "CELL_DATA " << squares.size() << "\nSCALARS side double 1\nLOOKUP_TABLE default\n";
    for (double l : side)
        out << l << "\n";
}

} // namespace imflow
