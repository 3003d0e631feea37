#pragma once

#include "imflow/elements/space_pair.hpp"
#include "imflow/mesh/io.hpp"

namespace imflow {

// Discrete velocity with its mesh and element pair, for handing solutions
// from `solve` to `truncate`:
//   FIELD 1
//   PAIR <name>
//   <mesh block as written by write_mesh>
//   COEFFICIENTS k
//   k values
struct FieldFile {
    std::shared_ptr<const Triangulation<2>> mesh;
    PairKind pair = PairKind::mini;
    VectorXd U;
};

inline void write_field(const SpacePair& sp, const VectorXd& U, std::ostream& out)
{
    if (U.size() != sp.velocity_dim())
        throw InvalidArgument("coefficients do not match the velocity space");
    out << "FIELD 1\nPAIR " << sp.name() << "\n";
    write_mesh(sp.mesh(), out);
    out << "COEFFICIENTS " << U.size() << "\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < U.size(); ++i)
        out << U[i] << "\n";
}

inline void write_field(const SpacePair& sp, const VectorXd& U, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path);
    write_field(sp, U, out);
}

inline FieldFile read_field(std::istream& in)
{
    auto expect = [&in](const std::string& key) {
        const std::string tok = detail::next_token(in, key);
        if (tok != key)
            throw IoError("field file: expected " + key + ", found '" + tok + "'");
    };
    expect("FIELD");
    if (detail::parse_number<int>(detail::next_token(in, "version"), "version") != 1)
        throw IoError("field file: unsupported version");
    expect("PAIR");
    FieldFile f;
    try {
        f.pair = parse_pair_kind(detail::next_token(in, "pair"));
    } catch (const InvalidArgument& e) {
        throw IoError(std::string("field file: ") + e.what());
    }
    f.mesh = std::make_shared<const Triangulation<2>>(to_triangulation<2>(read_mesh_data(in, false)));
    expect("COEFFICIENTS");
    const long k = detail::parse_number<long>(detail::next_token(in, "count"), "count");
    if (k < 0)
        throw IoError("field file: negative coefficient count");
    f.U.resize(k);
    for (long i = 0; i < k; ++i)
        f.U[i] = detail::parse_number<double>(detail::next_token(in, "coefficient"), "coefficient");
    return f;
}

inline FieldFile read_field(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read " + path);
    return read_field(in);
}

} // namespace imflow
