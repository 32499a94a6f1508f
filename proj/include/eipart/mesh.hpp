// mesh.hpp -- triangle mesh container plus the operations every other module
// builds on: AABBs, unit-cube normalization, connectivity splitting and
// area-weighted surface sampling.
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "eipart/geom.hpp"
#include "eipart/rng.hpp"

namespace eipart {

struct EmptyMesh : Error {
    explicit EmptyMesh(const std::string& what = "mesh has no triangles") : Error(what) {}
};
struct EmptyInput : Error {
    explicit EmptyInput(const std::string& what = "empty input") : Error(what) {}
};
struct DegenerateExtent : Error {
    explicit DegenerateExtent(const std::string& what = "all vertices coincide") : Error(what) {}
};
struct ZeroArea : Error {
    explicit ZeroArea(const std::string& what = "mesh has zero surface area") : Error(what) {}
};

// Indexed triangle mesh. `tri_object` optionally tags each triangle with the
// index of the authored sub-object it came from (OBJ o/g group, glTF node);
// it is either empty or triangles.size() long. Degenerate triangles (two
// equal indices) are rejected by the loaders, so none exist in a valid mesh.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> tri_object;
    std::vector<std::string> object_names;

    bool empty() const { return triangles.empty(); }
    int object_of(std::size_t tri) const {
        return tri < tri_object.size() ? tri_object[tri] : 0;
    }
};

// A part is a mesh with a stable id; a PartSet is the ordered collection the
// curation / voxelization stages operate on.
struct MeshPart {
    int id = 0;
    TriMesh mesh;
};
using PartSet = std::vector<MeshPart>;

struct PointSample {
    Vec3 position;
    int triangle = 0;
    int part_id = 0;
};

inline Aabb compute_aabb(const std::vector<Vec3>& points) {
    if (points.empty()) throw EmptyInput("compute_aabb: no points");
    Aabb box;
    for (const Vec3& p : points) box.extend(p);
    return box;
}

inline Aabb compute_aabb(const TriMesh& mesh) {
    // only vertices referenced by triangles count; stray vertices are ignored
    if (mesh.empty()) throw EmptyInput("compute_aabb: empty mesh");
    Aabb box;
    for (const auto& t : mesh.triangles)
        for (int i : t) box.extend(mesh.vertices[i]);
    return box;
}

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * norm(cross(b - a, c - a));
}

inline double surface_area(const TriMesh& mesh) {
    double total = 0.0;
    for (const auto& t : mesh.triangles)
        total += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    return total;
}

// Uniform (aspect-preserving) rescale about the AABB center so the longest
// axis spans exactly [-1,1]. Returns the mesh plus the transform that maps
// input coordinates to output coordinates.
inline std::pair<TriMesh, SimilarityTransform> normalize_to_unit_cube(const TriMesh& mesh) {
    if (mesh.empty()) throw EmptyMesh("normalize_to_unit_cube: empty mesh");
    const Aabb box = compute_aabb(mesh);
    const double longest = box.longest_extent();
    if (longest <= 0.0) throw DegenerateExtent();
    SimilarityTransform xf;
    xf.scale = 2.0 / longest;
    xf.translation = box.center() * -xf.scale;
    TriMesh out = mesh;
    for (Vec3& v : out.vertices) v = xf.apply(v);
    return {std::move(out), xf};
}

namespace detail {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }
    int find(int a) {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]];
            a = parent_[a];
        }
        return a;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<int> parent_;
};

// Welds vertices whose positions are within `tol` of each other and returns
// a representative id per vertex. Spatial hash over tol-sized cells with a
// 27-neighborhood probe so near-boundary pairs are not missed.
inline std::vector<int> weld_vertices(const std::vector<Vec3>& verts, double tol) {
    UnionFind uf(verts.size());
    const double inv = 1.0 / tol;
    auto key = [inv](const Vec3& p, int dx, int dy, int dz) {
        const auto cx = static_cast<std::int64_t>(std::floor(p.x * inv)) + dx;
        const auto cy = static_cast<std::int64_t>(std::floor(p.y * inv)) + dy;
        const auto cz = static_cast<std::int64_t>(std::floor(p.z * inv)) + dz;
        std::uint64_t h = 1469598103934665603ull;
        for (std::int64_t c : {cx, cy, cz}) {
            h ^= static_cast<std::uint64_t>(c);
            h *= 1099511628211ull;
        }
        return h;
    };
    std::unordered_multimap<std::uint64_t, int> grid;
    grid.reserve(verts.size() * 2);
    const double tol2 = tol * tol;
    for (int i = 0; i < static_cast<int>(verts.size()); ++i) {
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    auto [lo, hi] = grid.equal_range(key(verts[i], dx, dy, dz));
                    for (auto it = lo; it != hi; ++it) {
                        const Vec3 d = verts[i] - verts[it->second];
                        if (dot(d, d) <= tol2) uf.unite(i, it->second);
                    }
                }
        grid.emplace(key(verts[i], 0, 0, 0), i);
    }
    std::vector<int> rep(verts.size());
    for (int i = 0; i < static_cast<int>(verts.size()); ++i) rep[i] = uf.find(i);
    return rep;
}

}  // namespace detail

// Default weld tolerance for connectivity on normalized meshes. GLB exports
// routinely duplicate vertices across primitives, so exact-position equality
// would over-split.
inline constexpr double kWeldTolerance = 1e-6;

// Partitions the triangles into connected components; triangles connect iff
// they share a welded vertex position. Part ids are assigned in decreasing
// triangle-count order (ties: component with the lowest triangle index first).
inline PartSet split_connected_components(const TriMesh& mesh, double weld_tol = kWeldTolerance) {
    if (mesh.empty()) throw EmptyMesh("split_connected_components: empty mesh");
    const std::vector<int> rep = detail::weld_vertices(mesh.vertices, weld_tol);
    detail::UnionFind uf(mesh.vertices.size());
    for (std::size_t i = 0; i < rep.size(); ++i) uf.unite(static_cast<int>(i), rep[i]);
    for (const auto& t : mesh.triangles) {
        uf.unite(t[0], t[1]);
        uf.unite(t[0], t[2]);
    }

    // group triangles by component root, keyed by first appearance
    std::unordered_map<int, int> root_to_group;
    std::vector<std::vector<int>> groups;  // triangle indices per group
    for (int ti = 0; ti < static_cast<int>(mesh.triangles.size()); ++ti) {
        const int root = uf.find(mesh.triangles[ti][0]);
        auto [it, inserted] = root_to_group.emplace(root, static_cast<int>(groups.size()));
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(ti);
    }

    std::vector<int> order(groups.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return groups[a].size() > groups[b].size();
    });

    PartSet parts;
    parts.reserve(groups.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::vector<int>& tris = groups[order[rank]];
        MeshPart part;
        part.id = static_cast<int>(rank);
        part.mesh.object_names = mesh.object_names;
        std::unordered_map<int, int> remap;
        for (int ti : tris) {
            std::array<int, 3> nt{};
            for (int c = 0; c < 3; ++c) {
                const int v = mesh.triangles[ti][c];
                auto [it, inserted] = remap.emplace(v, static_cast<int>(part.mesh.vertices.size()));
                if (inserted) part.mesh.vertices.push_back(mesh.vertices[v]);
                nt[c] = it->second;
            }
            part.mesh.triangles.push_back(nt);
            part.mesh.tri_object.push_back(mesh.object_of(ti));
        }
        parts.push_back(std::move(part));
    }
    return parts;
}

// Concatenates parts back into one mesh, preserving per-triangle tags.
inline TriMesh merge_parts(const PartSet& parts) {
    TriMesh out;
    for (const MeshPart& p : parts) {
        const int base = static_cast<int>(out.vertices.size());
        out.vertices.insert(out.vertices.end(), p.mesh.vertices.begin(), p.mesh.vertices.end());
        for (std::size_t ti = 0; ti < p.mesh.triangles.size(); ++ti) {
            const auto& t = p.mesh.triangles[ti];
            out.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
            out.tri_object.push_back(p.mesh.object_of(ti));
        }
        if (out.object_names.empty()) out.object_names = p.mesh.object_names;
    }
    return out;
}

// Exactly n points, triangle choice proportional to area, deterministic for a
// fixed seed. Barycentric placement uses the sqrt trick for uniformity.
inline std::vector<PointSample> sample_surface(const TriMesh& mesh, std::size_t n,
                                               std::uint64_t seed, int part_id = 0) {
    if (n < 1) throw EmptyInput("sample_surface: n must be >= 1");
    if (mesh.empty()) throw EmptyMesh("sample_surface: empty mesh");
    std::vector<double> cumulative(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        total += triangle_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
        cumulative[i] = total;
    }
    if (total <= 0.0) throw ZeroArea();

    RandomStream rng(seed);
    std::vector<PointSample> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = rng.uniform() * total;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), r);
        const auto ti = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                     static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
        const auto& t = mesh.triangles[ti];
        const double su = std::sqrt(rng.uniform());
        const double v = rng.uniform();
        const double b0 = 1.0 - su;
        const double b1 = su * (1.0 - v);
        const double b2 = su * v;
        const Vec3 p = mesh.vertices[t[0]] * b0 + mesh.vertices[t[1]] * b1 + mesh.vertices[t[2]] * b2;
        samples.push_back({p, static_cast<int>(ti), part_id});
    }
    return samples;
}

}  // namespace eipart
