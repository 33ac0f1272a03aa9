#pragma once

// Workspace ingestion: STL meshes (ASCII and binary), voxelization of mesh
// interiors, CSV point lists, and conversion into reachability targets.

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "continuum/core.hpp"
#include "continuum/parallel.hpp"

namespace continuum {

struct Triangle {
    Vec3 v0, v1, v2;
    Vec3 normal = Vec3::Zero();
};

struct TriangleMesh {
    std::vector<Triangle> triangles;

    std::size_t size() const { return triangles.size(); }

    void bounds(Vec3& lo, Vec3& hi) const {
        lo = Vec3::Constant(std::numeric_limits<double>::infinity());
        hi = -lo;
        for (const auto& t : triangles) {
            for (const Vec3* v : {&t.v0, &t.v1, &t.v2}) {
                lo = lo.cwiseMin(*v);
                hi = hi.cwiseMax(*v);
            }
        }
    }

    /// Enclosed volume by the divergence theorem (closed, outward-wound mesh).
    double volume() const {
        double six_v = 0.0;
        for (const auto& t : triangles) six_v += t.v0.dot(t.v1.cross(t.v2));
        return six_v / 6.0;
    }

    TriangleMesh translated(const Vec3& offset) const {
        TriangleMesh out = *this;
        for (auto& t : out.triangles) {
            t.v0 += offset;
            t.v1 += offset;
            t.v2 += offset;
        }
        return out;
    }
};

/// Axis-aligned lattice of cubic voxels. Cell (i, j, k) spans
/// origin + size * [i, i+1) x [j, j+1) x [k, k+1).
struct VoxelLattice {
    Vec3 origin = Vec3::Zero();
    double voxel_size = 1.0;
    std::array<int, 3> dims{0, 0, 0};

    std::size_t cell_count() const {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
               static_cast<std::size_t>(dims[2]);
    }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) +
                                                    static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
    }
    Vec3 center(int i, int j, int k) const {
        return origin + voxel_size * Vec3(i + 0.5, j + 0.5, k + 0.5);
    }
    /// Linear index of the cell containing p, or nullopt outside the lattice.
    std::optional<std::size_t> locate(const Vec3& p) const {
        const Vec3 rel = (p - origin) / voxel_size;
        const double fi = std::floor(rel.x()), fj = std::floor(rel.y()), fk = std::floor(rel.z());
        if (fi < 0 || fj < 0 || fk < 0 || fi >= dims[0] || fj >= dims[1] || fk >= dims[2]) return std::nullopt;
        return index(static_cast<int>(fi), static_cast<int>(fj), static_cast<int>(fk));
    }
};

struct VoxelGrid {
    VoxelLattice lattice;
    std::vector<std::uint8_t> occupied; // one flag per cell, lattice.index order

    std::size_t occupied_count() const {
        return static_cast<std::size_t>(std::count(occupied.begin(), occupied.end(), std::uint8_t{1}));
    }
    bool at(int i, int j, int k) const { return occupied[lattice.index(i, j, k)] != 0; }
};

/// Points the end-effector must reach. When the targets come from a voxel
/// grid, `lattice` and `cells` are set and FK sampling counts a target as
/// reached when the end-effector lands inside its voxel; otherwise the
/// `tolerance` ball is used.
struct TargetSet {
    std::vector<Vec3> points;
    double tolerance = 1.0;         // cm
    double required_fraction = 1.0; // alpha
    std::optional<VoxelLattice> lattice;
    std::vector<std::size_t> cells; // lattice cell of each point, grid targets only

    std::size_t size() const { return points.size(); }
    bool from_grid() const { return lattice.has_value(); }

    void validate() const {
        if (points.empty()) throw ConfigurationError("target set is empty");
        if (!(tolerance > 0.0)) throw ConfigurationError("target tolerance must be positive");
        if (!(required_fraction > 0.0 && required_fraction <= 1.0)) {
            throw ConfigurationError("required fraction must be in (0, 1]");
        }
        if (from_grid() && cells.size() != points.size()) {
            throw ConfigurationError("grid targets need one cell per point");
        }
    }
};

// ---------------------------------------------------------------------------
// STL

namespace detail {

inline float read_f32(const char* p) {
    std::uint32_t bits;
    std::memcpy(&bits, p, 4);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    float value;
    std::memcpy(&value, &bits, 4);
    return value;
}

inline std::uint32_t read_u32(const char* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
    return v;
}

inline void write_f32(std::string& out, float value) {
    std::uint32_t bits;
    std::memcpy(&bits, &value, 4);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
    char buf[4];
    std::memcpy(buf, &bits, 4);
    out.append(buf, 4);
}

inline void write_u32(std::string& out, std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}

inline bool starts_with_solid(std::string_view bytes) {
    std::size_t i = 0;
    while (i < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[i]))) ++i;
    return bytes.substr(i, 5) == "solid";
}

inline TriangleMesh parse_binary_stl(std::string_view bytes) {
    const std::uint32_t count = read_u32(bytes.data() + 80);
    TriangleMesh mesh;
    mesh.triangles.reserve(count);
    for (std::uint32_t f = 0; f < count; ++f) {
        const std::size_t offset = 84 + 50 * static_cast<std::size_t>(f);
        const char* rec = bytes.data() + offset;
        Vec3 v[4];
        for (int k = 0; k < 4; ++k) {
            v[k] = Vec3(read_f32(rec + 12 * k), read_f32(rec + 12 * k + 4), read_f32(rec + 12 * k + 8));
        }
        for (int k = 1; k < 4; ++k) {
            if (!v[k].allFinite()) throw ParseError("non-finite vertex in facet " + std::to_string(f), offset + 12 * k);
        }
        mesh.triangles.push_back({v[1], v[2], v[3], v[0].allFinite() ? v[0] : Vec3::Zero()});
    }
    return mesh;
}

class AsciiStlReader {
public:
    explicit AsciiStlReader(std::string_view text) : text_(text) {}

    TriangleMesh parse() {
        TriangleMesh mesh;
        expect("solid");
        skip_line();
        for (;;) {
            const auto word = next_word();
            if (word.empty()) throw ParseError("missing endsolid", pos_);
            if (word == "endsolid") break;
            if (word != "facet") throw ParseError("expected 'facet', found '" + std::string(word) + "'", word_start_);
            expect("normal");
            Triangle tri;
            tri.normal = read_vec(false);
            expect("outer");
            expect("loop");
            expect("vertex");
            tri.v0 = read_vec(true);
            expect("vertex");
            tri.v1 = read_vec(true);
            expect("vertex");
            tri.v2 = read_vec(true);
            expect("endloop");
            expect("endfacet");
            mesh.triangles.push_back(tri);
        }
        return mesh;
    }

private:
    std::string_view next_word() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        word_start_ = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        return text_.substr(word_start_, pos_ - word_start_);
    }
    void skip_line() {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
    }
    void expect(std::string_view keyword) {
        const auto word = next_word();
        if (word != keyword) {
            if (word.empty()) throw ParseError("truncated ASCII STL, expected '" + std::string(keyword) + "'", pos_);
            throw ParseError("expected '" + std::string(keyword) + "', found '" + std::string(word) + "'", word_start_);
        }
    }
    double read_number(bool must_be_finite) {
        const auto word = next_word();
        if (word.empty()) throw ParseError("truncated ASCII STL, expected a number", pos_);
        const std::string token(word);
        char* end = nullptr;
        const double value = std::strtod(token.c_str(), &end);
        if (end != token.c_str() + token.size()) throw ParseError("invalid number '" + token + "'", word_start_);
        if (must_be_finite && !std::isfinite(value)) throw ParseError("non-finite vertex coordinate", word_start_);
        return value;
    }
    Vec3 read_vec(bool must_be_finite) {
        const double x = read_number(must_be_finite);
        const double y = read_number(must_be_finite);
        const double z = read_number(must_be_finite);
        return {x, y, z};
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t word_start_ = 0;
};

} // namespace detail

/// Parse an STL file held in memory. Binary is recognized when the byte count
/// equals 84 + 50 * (triangle count field); otherwise text starting with
/// "solid" is read as ASCII.
inline TriangleMesh parse_stl(std::string_view bytes) {
    TriangleMesh mesh;
    if (bytes.size() >= 84 && 84 + 50 * static_cast<std::uint64_t>(detail::read_u32(bytes.data() + 80)) == bytes.size()) {
        mesh = detail::parse_binary_stl(bytes);
    } else if (detail::starts_with_solid(bytes)) {
        mesh = detail::AsciiStlReader(bytes).parse();
    } else if (bytes.size() < 84) {
        throw ParseError("truncated STL: binary header needs 84 bytes, file has " + std::to_string(bytes.size()),
                         bytes.size());
    } else {
        const auto count = detail::read_u32(bytes.data() + 80);
        throw ParseError("binary STL declares " + std::to_string(count) + " triangles but holds " +
                             std::to_string(bytes.size() - 84) + " bytes of facet data",
                         80);
    }
    if (mesh.triangles.empty()) throw ParseError("STL contains no triangles", bytes.size());
    return mesh;
}

inline TriangleMesh load_stl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open STL file " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_stl(bytes);
}

inline std::string encode_stl_binary(const TriangleMesh& mesh) {
    std::string out(80, '\0');
    const char header[] = "binary STL";
    std::memcpy(out.data(), header, sizeof(header) - 1);
    detail::write_u32(out, static_cast<std::uint32_t>(mesh.triangles.size()));
    for (const auto& t : mesh.triangles) {
        for (const Vec3* v : {&t.normal, &t.v0, &t.v1, &t.v2}) {
            for (int k = 0; k < 3; ++k) detail::write_f32(out, static_cast<float>((*v)[k]));
        }
        out.append(2, '\0');
    }
    return out;
}

inline std::string encode_stl_ascii(const TriangleMesh& mesh, std::string_view name = "mesh") {
    std::string out = "solid " + std::string(name) + "\n";
    char buf[128];
    auto vec = [&](const char* prefix, const Vec3& v) {
        std::snprintf(buf, sizeof(buf), "%s %.17g %.17g %.17g\n", prefix, v.x(), v.y(), v.z());
        out += buf;
    };
    for (const auto& t : mesh.triangles) {
        vec("  facet normal", t.normal);
        out += "    outer loop\n";
        vec("      vertex", t.v0);
        vec("      vertex", t.v1);
        vec("      vertex", t.v2);
        out += "    endloop\n  endfacet\n";
    }
    out += "endsolid " + std::string(name) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Voxelization

namespace detail {

/// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

enum class RayHit { Miss, Hit, Degenerate };

/// Intersection of the line {(x, y, z) : x free} with a triangle.
inline RayHit cast_x_line(const Triangle& t, double y, double z, double edge_tol, double* x_hit) {
    const double ay = t.v0.y() - y, az = t.v0.z() - z;
    const double by = t.v1.y() - y, bz = t.v1.z() - z;
    const double cy = t.v2.y() - y, cz = t.v2.z() - z;
    // Signed doubled areas of the sub-triangles in the yz projection.
    const double w0 = by * cz - bz * cy;
    const double w1 = cy * az - cz * ay;
    const double w2 = ay * bz - az * by;
    const double area = w0 + w1 + w2;
    const double scale = std::abs(area);
    if (scale <= edge_tol * edge_tol) {
        // Triangle seen edge-on; a line passing through its projection grazes it.
        const bool near = std::min({std::abs(w0), std::abs(w1), std::abs(w2)}) <= edge_tol * edge_tol &&
                          std::min({ay, by, cy}) <= edge_tol && std::max({ay, by, cy}) >= -edge_tol &&
                          std::min({az, bz, cz}) <= edge_tol && std::max({az, bz, cz}) >= -edge_tol;
        return near ? RayHit::Degenerate : RayHit::Miss;
    }
    const double sign = area > 0 ? 1.0 : -1.0;
    const double b0 = sign * w0, b1 = sign * w1, b2 = sign * w2;
    const double tol = edge_tol * std::sqrt(scale);
    if (b0 < -tol || b1 < -tol || b2 < -tol) return RayHit::Miss;
    if (b0 <= tol || b1 <= tol || b2 <= tol) return RayHit::Degenerate;
    *x_hit = (b0 * t.v0.x() + b1 * t.v1.x() + b2 * t.v2.x()) / (b0 + b1 + b2);
    return RayHit::Hit;
}

} // namespace detail

/// Voxelize the interior of a closed mesh. The lattice is anchored on the
/// global grid of pitch `voxel_size` (origin at the largest multiple of the
/// pitch not above the mesh minimum). A cell is occupied when its center is
/// inside the mesh, decided by the parity of crossings of a +x ray, or lies on
/// the surface.
inline VoxelGrid voxelize_mesh(const TriangleMesh& mesh, double voxel_size) {
    if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) throw ParameterError("voxel size must be positive");
    if (mesh.triangles.empty()) throw IngestionError("mesh has no triangles");
    Vec3 lo, hi;
    mesh.bounds(lo, hi);
    VoxelGrid grid;
    grid.lattice.voxel_size = voxel_size;
    for (int a = 0; a < 3; ++a) {
        grid.lattice.origin[a] = std::floor(lo[a] / voxel_size) * voxel_size;
        const double span = (hi[a] - grid.lattice.origin[a]) / voxel_size;
        grid.lattice.dims[a] = std::max(1, static_cast<int>(std::ceil(span - 1e-9)));
    }
    const auto& L = grid.lattice;
    grid.occupied.assign(L.cell_count(), 0);
    const double edge_tol = 1e-9 * voxel_size;
    const int rows = L.dims[1] * L.dims[2];
    std::vector<std::size_t> inconsistent_per_row(static_cast<std::size_t>(rows), 0);

    parallel_for(static_cast<std::size_t>(rows), [&](std::size_t row) {
        const int j = static_cast<int>(row) % L.dims[1];
        const int k = static_cast<int>(row) / L.dims[1];
        const Vec3 c0 = L.center(0, j, k);
        std::vector<double> crossings;
        for (int attempt = 0; attempt < 16; ++attempt) {
            // Deterministic jitter off edges and vertices.
            const double y = c0.y() + voxel_size * 1e-4 * attempt * 0.7548776662466927;
            const double z = c0.z() + voxel_size * 1e-4 * attempt * 0.5698402909980532;
            crossings.clear();
            bool degenerate = false;
            for (const auto& tri : mesh.triangles) {
                double x;
                const auto hit = detail::cast_x_line(tri, y, z, edge_tol, &x);
                if (hit == detail::RayHit::Degenerate) {
                    degenerate = true;
                    break;
                }
                if (hit == detail::RayHit::Hit) crossings.push_back(x);
            }
            if (!degenerate) break;
        }
        std::sort(crossings.begin(), crossings.end());
        const bool odd_total = crossings.size() % 2 == 1;
        for (int i = 0; i < L.dims[0]; ++i) {
            const double x = L.center(i, j, k).x();
            const auto after = static_cast<std::size_t>(
                crossings.end() - std::upper_bound(crossings.begin(), crossings.end(), x));
            if (after % 2 == 1) grid.occupied[L.index(i, j, k)] = 1;
            if (odd_total) ++inconsistent_per_row[row];
        }
    });

    std::size_t inconsistent = 0;
    for (auto n : inconsistent_per_row) inconsistent += n;
    if (static_cast<double>(inconsistent) >= 0.01 * static_cast<double>(L.cell_count())) {
        throw IngestionError("mesh is not closed: +x and -x ray parity disagree on " + std::to_string(inconsistent) +
                             " of " + std::to_string(L.cell_count()) + " cells");
    }

    // Centers lying on the surface count as occupied.
    const double surface_tol = 1e-6 * voxel_size;
    for (const auto& tri : mesh.triangles) {
        Vec3 tlo = tri.v0.cwiseMin(tri.v1).cwiseMin(tri.v2).array() - surface_tol;
        Vec3 thi = tri.v0.cwiseMax(tri.v1).cwiseMax(tri.v2).array() + surface_tol;
        std::array<int, 3> from{}, to{};
        for (int a = 0; a < 3; ++a) {
            from[a] = std::max(0, static_cast<int>(std::ceil((tlo[a] - L.origin[a]) / voxel_size - 0.5)));
            to[a] = std::min(L.dims[a] - 1, static_cast<int>(std::floor((thi[a] - L.origin[a]) / voxel_size - 0.5)));
        }
        for (int k = from[2]; k <= to[2]; ++k) {
            for (int j = from[1]; j <= to[1]; ++j) {
                for (int i = from[0]; i <= to[0]; ++i) {
                    const Vec3 c = L.center(i, j, k);
                    if ((detail::closest_point_on_triangle(c, tri.v0, tri.v1, tri.v2) - c).norm() <= surface_tol) {
                        grid.occupied[L.index(i, j, k)] = 1;
                    }
                }
            }
        }
    }
    return grid;
}

/// One target per occupied voxel, at the voxel center.
inline TargetSet grid_to_targets(const VoxelGrid& grid, double tolerance, double required_fraction) {
    TargetSet targets;
    targets.tolerance = tolerance;
    targets.required_fraction = required_fraction;
    targets.lattice = grid.lattice;
    const auto& L = grid.lattice;
    for (int k = 0; k < L.dims[2]; ++k) {
        for (int j = 0; j < L.dims[1]; ++j) {
            for (int i = 0; i < L.dims[0]; ++i) {
                if (!grid.at(i, j, k)) continue;
                targets.points.push_back(L.center(i, j, k));
                targets.cells.push_back(L.index(i, j, k));
            }
        }
    }
    if (targets.points.empty()) throw IngestionError("voxel grid has no occupied cells");
    return targets;
}

/// Targets given as an explicit point list; reached within the tolerance ball.
inline TargetSet points_to_targets(std::vector<Vec3> points, double tolerance, double required_fraction) {
    TargetSet targets;
    targets.points = std::move(points);
    targets.tolerance = tolerance;
    targets.required_fraction = required_fraction;
    targets.validate();
    return targets;
}

// ---------------------------------------------------------------------------
// Closed, outward-wound primitive meshes

namespace detail {

inline void add_triangle(TriangleMesh& mesh, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 n = (b - a).cross(c - a);
    const double len = n.norm();
    if (len > 0) n /= len;
    mesh.triangles.push_back({a, b, c, n});
}

inline void add_quad(TriangleMesh& mesh, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    add_triangle(mesh, a, b, c);
    add_triangle(mesh, a, c, d);
}

} // namespace detail

inline TriangleMesh make_box_mesh(const Vec3& lo, const Vec3& hi) {
    if (!(lo.array() < hi.array()).all()) throw ParameterError("box corners must satisfy lo < hi");
    auto corner = [&](int i) { return Vec3(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z()); };
    TriangleMesh mesh;
    detail::add_quad(mesh, corner(0), corner(2), corner(3), corner(1)); // z = lo
    detail::add_quad(mesh, corner(4), corner(5), corner(7), corner(6)); // z = hi
    detail::add_quad(mesh, corner(0), corner(1), corner(5), corner(4)); // y = lo
    detail::add_quad(mesh, corner(2), corner(6), corner(7), corner(3)); // y = hi
    detail::add_quad(mesh, corner(0), corner(4), corner(6), corner(2)); // x = lo
    detail::add_quad(mesh, corner(1), corner(3), corner(7), corner(5)); // x = hi
    return mesh;
}

/// Cylinder with its bottom cap centered at `base`, extending `height` along `axis`.
inline TriangleMesh make_cylinder_mesh(const Vec3& base, const Vec3& axis, double radius, double height,
                                       int segments = 64) {
    if (!(radius > 0 && height > 0) || segments < 3) throw ParameterError("invalid cylinder dimensions");
    const Vec3 a = axis.normalized();
    const Vec3 u = a.unitOrthogonal();
    const Vec3 v = a.cross(u);
    const Vec3 top = base + height * a;
    TriangleMesh mesh;
    for (int s = 0; s < segments; ++s) {
        const double p0 = kTwoPi * s / segments, p1 = kTwoPi * (s + 1) / segments;
        const Vec3 d0 = radius * (std::cos(p0) * u + std::sin(p0) * v);
        const Vec3 d1 = radius * (std::cos(p1) * u + std::sin(p1) * v);
        detail::add_quad(mesh, base + d0, base + d1, top + d1, top + d0);
        detail::add_triangle(mesh, base, base + d1, base + d0);
        detail::add_triangle(mesh, top, top + d0, top + d1);
    }
    return mesh;
}

/// Latitude-longitude sphere; vertices lie on the sphere.
inline TriangleMesh make_sphere_mesh(const Vec3& center, double radius, int slices = 64, int stacks = 32) {
    if (!(radius > 0) || slices < 3 || stacks < 2) throw ParameterError("invalid sphere dimensions");
    auto vertex = [&](int i, int j) {
        const double polar = kPi * j / stacks, azimuth = kTwoPi * i / slices;
        return Vec3(center + radius * Vec3(std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth),
                                           std::cos(polar)));
    };
    TriangleMesh mesh;
    for (int j = 0; j < stacks; ++j) {
        for (int i = 0; i < slices; ++i) {
            const Vec3 a = vertex(i, j), b = vertex(i + 1, j), c = vertex(i + 1, j + 1), d = vertex(i, j + 1);
            if (j == 0) {
                detail::add_triangle(mesh, a, d, c);
            } else if (j == stacks - 1) {
                detail::add_triangle(mesh, a, d, b);
            } else {
                detail::add_quad(mesh, a, d, c, b);
            }
        }
    }
    return mesh;
}

inline TriangleMesh merge_meshes(const TriangleMesh& a, const TriangleMesh& b) {
    TriangleMesh out = a;
    out.triangles.insert(out.triangles.end(), b.triangles.begin(), b.triangles.end());
    return out;
}

// ---------------------------------------------------------------------------
// CSV point lists (header "x,y,z", cm)

inline std::vector<Vec3> parse_points_csv(std::string_view text) {
    std::vector<Vec3> points;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    std::size_t offset = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t line_offset = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (!header_seen) {
            std::string compact;
            for (char ch : line) {
                if (!std::isspace(static_cast<unsigned char>(ch))) compact += static_cast<char>(std::tolower(ch));
            }
            if (compact != "x,y,z") throw ParseError("point list must start with header 'x,y,z'", line_offset);
            header_seen = true;
            continue;
        }
        double v[3];
        const char* p = line.c_str();
        for (int a = 0; a < 3; ++a) {
            char* end = nullptr;
            v[a] = std::strtod(p, &end);
            if (end == p || !std::isfinite(v[a])) {
                throw ParseError("line " + std::to_string(line_no) + ": expected three finite numbers",
                                 line_offset + static_cast<std::size_t>(p - line.c_str()));
            }
            p = end;
            while (*p == ' ' || *p == '\t') ++p;
            if (a < 2) {
                if (*p != ',') throw ParseError("line " + std::to_string(line_no) + ": expected ','",
                                                line_offset + static_cast<std::size_t>(p - line.c_str()));
                ++p;
            }
        }
        if (*p != '\0') throw ParseError("line " + std::to_string(line_no) + ": trailing characters",
                                         line_offset + static_cast<std::size_t>(p - line.c_str()));
        points.emplace_back(v[0], v[1], v[2]);
    }
    if (!header_seen) throw ParseError("point list is empty", 0);
    return points;
}

inline std::vector<Vec3> load_points_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open point list " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_points_csv(text);
}

inline std::string encode_points_csv(const std::vector<Vec3>& points) {
    std::string out = "x,y,z\n";
    char buf[96];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.x(), p.y(), p.z());
        out += buf;
    }
    return out;
}

} // namespace continuum
