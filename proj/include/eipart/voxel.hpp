// voxel.hpp -- sparse voxel occupancies over the normalized cube [-1,1]^3.
//
// A part occupancy stores its cells as packed (x,y,z) keys sorted ascending,
// which makes set intersection, dedup and the on-disk ordering one and the
// same thing. Voxelization is conservative: a cell is occupied iff its closed
// cube intersects a triangle (separating-axis test), so touching counts.
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>
#include <vector>

#include "eipart/mesh.hpp"

namespace eipart {

struct ResolutionMismatch : Error {
    explicit ResolutionMismatch(const std::string& what = "voxel resolution mismatch")
        : Error(what) {}
};
struct EmptyResult : Error {
    explicit EmptyResult(const std::string& what = "voxelization produced no cells")
        : Error(what) {}
};

constexpr int kDefaultResolution = 64;

inline double cell_size(int resolution) { return 2.0 / resolution; }

// 21 bits per coordinate, (x,y,z) lexicographic order == numeric key order.
using CellKey = std::uint64_t;

inline CellKey pack_cell(int x, int y, int z) {
    return (static_cast<CellKey>(x) << 42) | (static_cast<CellKey>(y) << 21) |
           static_cast<CellKey>(z);
}

struct CellIndex {
    int x = 0, y = 0, z = 0;
    bool operator==(const CellIndex&) const = default;
};

inline CellIndex unpack_cell(CellKey key) {
    return {static_cast<int>(key >> 42), static_cast<int>((key >> 21) & 0x1FFFFF),
            static_cast<int>(key & 0x1FFFFF)};
}

inline Vec3 cell_center(const CellIndex& c, int resolution) {
    const double s = cell_size(resolution);
    return {-1.0 + (c.x + 0.5) * s, -1.0 + (c.y + 0.5) * s, -1.0 + (c.z + 0.5) * s};
}

// Integer cell box, inclusive bounds.
struct CellBox {
    CellIndex lo{0, 0, 0};
    CellIndex hi{-1, -1, -1};

    bool valid() const { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }
    Vec3 world_center(int resolution) const {
        const double s = cell_size(resolution);
        return {-1.0 + (lo.x + hi.x + 1) * 0.5 * s, -1.0 + (lo.y + hi.y + 1) * 0.5 * s,
                -1.0 + (lo.z + hi.z + 1) * 0.5 * s};
    }
    bool overlaps(const CellBox& o) const {
        return lo.x <= o.hi.x && o.lo.x <= hi.x && lo.y <= o.hi.y && o.lo.y <= hi.y &&
               lo.z <= o.hi.z && o.lo.z <= hi.z;
    }
    // Widest empty-cell gap between the two boxes over the three axes;
    // negative when they overlap on every axis.
    int gap_cells(const CellBox& o) const {
        int best = std::numeric_limits<int>::min();
        const int axes_lo[3] = {lo.x, lo.y, lo.z};
        const int axes_hi[3] = {hi.x, hi.y, hi.z};
        const int other_lo[3] = {o.lo.x, o.lo.y, o.lo.z};
        const int other_hi[3] = {o.hi.x, o.hi.y, o.hi.z};
        for (int a = 0; a < 3; ++a) {
            const int gap = std::max(other_lo[a] - axes_hi[a] - 1, axes_lo[a] - other_hi[a] - 1);
            best = std::max(best, gap);
        }
        return best;
    }
};

struct PartOccupancy {
    int part_id = 0;
    int resolution = kDefaultResolution;
    std::vector<CellKey> cells;  // sorted ascending, unique
    CellBox aabb;                // tight integer bounds
    std::int64_t clipped = 0;    // cells dropped out of range by the last translate

    bool empty() const { return cells.empty(); }
    std::size_t size() const { return cells.size(); }
    bool contains(CellKey key) const {
        return std::binary_search(cells.begin(), cells.end(), key);
    }
    void recompute_aabb() {
        aabb = CellBox{};
        if (cells.empty()) return;
        CellIndex first = unpack_cell(cells.front());
        aabb.lo = aabb.hi = first;
        for (CellKey key : cells) {
            const CellIndex c = unpack_cell(key);
            aabb.lo.x = std::min(aabb.lo.x, c.x);
            aabb.lo.y = std::min(aabb.lo.y, c.y);
            aabb.lo.z = std::min(aabb.lo.z, c.z);
            aabb.hi.x = std::max(aabb.hi.x, c.x);
            aabb.hi.y = std::max(aabb.hi.y, c.y);
            aabb.hi.z = std::max(aabb.hi.z, c.z);
        }
    }
    void finalize() {
        std::sort(cells.begin(), cells.end());
        cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
        recompute_aabb();
    }
};

namespace detail {

// Closed triangle/box separating-axis test: 3 box axes, the triangle plane
// normal, and the 9 edge cross products. Touching intervals intersect.
inline bool triangle_box_intersects(const Vec3& a, const Vec3& b, const Vec3& c,
                                    const Vec3& box_center, double half) {
    const Vec3 v0 = a - box_center;
    const Vec3 v1 = b - box_center;
    const Vec3 v2 = c - box_center;

    auto axis_separates = [&](const Vec3& axis, double radius) {
        const double p0 = dot(v0, axis);
        const double p1 = dot(v1, axis);
        const double p2 = dot(v2, axis);
        const double lo = std::min(p0, std::min(p1, p2));
        const double hi = std::max(p0, std::max(p1, p2));
        return lo > radius || hi < -radius;
    };

    // box face normals
    if (std::min({v0.x, v1.x, v2.x}) > half || std::max({v0.x, v1.x, v2.x}) < -half) return false;
    if (std::min({v0.y, v1.y, v2.y}) > half || std::max({v0.y, v1.y, v2.y}) < -half) return false;
    if (std::min({v0.z, v1.z, v2.z}) > half || std::max({v0.z, v1.z, v2.z}) < -half) return false;

    const Vec3 e0 = v1 - v0;
    const Vec3 e1 = v2 - v1;
    const Vec3 e2 = v0 - v2;

    // triangle plane
    const Vec3 n = cross(e0, e1);
    const double plane_r = half * (std::abs(n.x) + std::abs(n.y) + std::abs(n.z));
    if (axis_separates(n, plane_r)) return false;

    // 9 cross-product axes: unit axis i x edge j
    const Vec3 edges[3] = {e0, e1, e2};
    for (const Vec3& e : edges) {
        const Vec3 ax{0.0, -e.z, e.y};
        if (axis_separates(ax, half * (std::abs(ax.y) + std::abs(ax.z)))) return false;
        const Vec3 ay{e.z, 0.0, -e.x};
        if (axis_separates(ay, half * (std::abs(ay.x) + std::abs(ay.z)))) return false;
        const Vec3 az{-e.y, e.x, 0.0};
        if (axis_separates(az, half * (std::abs(az.x) + std::abs(az.y)))) return false;
    }
    return true;
}

// Signed-coordinate packing for morphology intermediates that may step
// outside [0,R) before being clipped back.
constexpr int kSignedOffset = 1 << 20;

inline CellKey pack_signed(int x, int y, int z) {
    return pack_cell(x + kSignedOffset, y + kSignedOffset, z + kSignedOffset);
}

inline CellIndex unpack_signed(CellKey key) {
    CellIndex c = unpack_cell(key);
    return {c.x - kSignedOffset, c.y - kSignedOffset, c.z - kSignedOffset};
}

}  // namespace detail

// Conservative surface voxelization: a cell is occupied iff its closed cube
// intersects any triangle of the part. Candidate cells come from the
// triangle AABB padded by one layer; the exact test decides.
inline PartOccupancy voxelize(const TriMesh& part, int resolution, int part_id = 0) {
    if (resolution < 2) throw Error("voxelize: resolution must be >= 2");
    if (part.empty()) throw EmptyMesh("voxelize: empty mesh");
    const double s = cell_size(resolution);
    const double half = 0.5 * s;
    std::vector<CellKey> cells;
    for (const auto& t : part.triangles) {
        const Vec3& a = part.vertices[t[0]];
        const Vec3& b = part.vertices[t[1]];
        const Vec3& c = part.vertices[t[2]];
        const Vec3 lo = cwise_min(a, cwise_min(b, c));
        const Vec3 hi = cwise_max(a, cwise_max(b, c));
        auto cell_of = [&](double v) { return static_cast<int>(std::floor((v + 1.0) / s)); };
        const int x0 = std::max(0, cell_of(lo.x) - 1), x1 = std::min(resolution - 1, cell_of(hi.x) + 1);
        const int y0 = std::max(0, cell_of(lo.y) - 1), y1 = std::min(resolution - 1, cell_of(hi.y) + 1);
        const int z0 = std::max(0, cell_of(lo.z) - 1), z1 = std::min(resolution - 1, cell_of(hi.z) + 1);
        for (int x = x0; x <= x1; ++x)
            for (int y = y0; y <= y1; ++y)
                for (int z = z0; z <= z1; ++z) {
                    const Vec3 center = cell_center({x, y, z}, resolution);
                    if (detail::triangle_box_intersects(a, b, c, center, half))
                        cells.push_back(pack_cell(x, y, z));
                }
    }
    PartOccupancy occ;
    occ.part_id = part_id;
    occ.resolution = resolution;
    occ.cells = std::move(cells);
    occ.finalize();
    if (occ.empty()) throw EmptyResult("voxelize: part " + std::to_string(part_id) +
                                       " produced no cells");
    return occ;
}

// Exact set intersection of the two cell sets. The AABB pre-filter is an
// early-out only; it cannot change the result.
inline std::vector<CellKey> overlap(const PartOccupancy& a, const PartOccupancy& b) {
    if (a.resolution != b.resolution)
        throw ResolutionMismatch("overlap: resolutions " + std::to_string(a.resolution) +
                                 " vs " + std::to_string(b.resolution));
    if (a.empty() || b.empty() || !a.aabb.overlaps(b.aabb)) return {};
    std::vector<CellKey> shared;
    std::set_intersection(a.cells.begin(), a.cells.end(), b.cells.begin(), b.cells.end(),
                          std::back_inserter(shared));
    return shared;
}

inline bool overlaps(const PartOccupancy& a, const PartOccupancy& b) {
    if (a.resolution != b.resolution)
        throw ResolutionMismatch("overlaps: resolutions " + std::to_string(a.resolution) +
                                 " vs " + std::to_string(b.resolution));
    if (a.empty() || b.empty() || !a.aabb.overlaps(b.aabb)) return false;
    auto ia = a.cells.begin();
    auto ib = b.cells.begin();
    while (ia != a.cells.end() && ib != b.cells.end()) {
        if (*ia == *ib) return true;
        if (*ia < *ib) ++ia; else ++ib;
    }
    return false;
}

// World-space offset quantized to a whole-cell lattice shift (round to
// nearest). Cells leaving [0,R) are dropped and counted in `clipped`.
inline PartOccupancy translate_cells(const PartOccupancy& p, const Vec3& offset) {
    const double s = cell_size(p.resolution);
    const int dx = static_cast<int>(std::llround(offset.x / s));
    const int dy = static_cast<int>(std::llround(offset.y / s));
    const int dz = static_cast<int>(std::llround(offset.z / s));
    PartOccupancy out;
    out.part_id = p.part_id;
    out.resolution = p.resolution;
    out.cells.reserve(p.cells.size());
    for (CellKey key : p.cells) {
        const CellIndex c = unpack_cell(key);
        const int x = c.x + dx, y = c.y + dy, z = c.z + dz;
        if (x < 0 || y < 0 || z < 0 || x >= p.resolution || y >= p.resolution || z >= p.resolution) {
            ++out.clipped;
            continue;
        }
        out.cells.push_back(pack_cell(x, y, z));  // constant shift keeps the order
    }
    out.recompute_aabb();
    return out;
}

// k-step 6-connected dilation followed by k-step erosion. Intermediates live
// on the unbounded lattice so closing is not distorted at grid borders; the
// final result is clipped back to [0,R).
inline PartOccupancy morphological_close(const PartOccupancy& p, int k) {
    if (k < 0) throw Error("morphological_close: k must be >= 0");
    if (k == 0 || p.empty()) return p;

    std::unordered_set<CellKey> set;
    set.reserve(p.cells.size() * 4);
    for (CellKey key : p.cells) {
        const CellIndex c = unpack_cell(key);
        set.insert(detail::pack_signed(c.x, c.y, c.z));
    }
    static constexpr int kNeighbors[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                             {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int step = 0; step < k; ++step) {
        std::unordered_set<CellKey> next = set;
        for (CellKey key : set) {
            const CellIndex c = detail::unpack_signed(key);
            for (const auto& n : kNeighbors)
                next.insert(detail::pack_signed(c.x + n[0], c.y + n[1], c.z + n[2]));
        }
        set.swap(next);
    }
    for (int step = 0; step < k; ++step) {
        std::unordered_set<CellKey> next;
        next.reserve(set.size());
        for (CellKey key : set) {
            const CellIndex c = detail::unpack_signed(key);
            bool keep = true;
            for (const auto& n : kNeighbors) {
                if (!set.count(detail::pack_signed(c.x + n[0], c.y + n[1], c.z + n[2]))) {
                    keep = false;
                    break;
                }
            }
            if (keep) next.insert(key);
        }
        set.swap(next);
    }

    PartOccupancy out;
    out.part_id = p.part_id;
    out.resolution = p.resolution;
    out.cells.reserve(set.size());
    for (CellKey key : set) {
        const CellIndex c = detail::unpack_signed(key);
        if (c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < p.resolution && c.y < p.resolution &&
            c.z < p.resolution)
            out.cells.push_back(pack_cell(c.x, c.y, c.z));
    }
    out.finalize();
    return out;
}

// Multi-part occupancy sharing one grid. Part cells may overlap between
// parts only when `allow_shared_cells` is set (converged pre-explosion
// scenes, arbitrary completer outputs).
struct VoxelScene {
    int resolution = kDefaultResolution;
    std::vector<PartOccupancy> parts;
    bool allow_shared_cells = false;

    const PartOccupancy* find(int part_id) const {
        for (const PartOccupancy& p : parts)
            if (p.part_id == part_id) return &p;
        return nullptr;
    }

    std::size_t shared_cell_count() const {
        std::size_t shared = 0;
        for (std::size_t i = 0; i < parts.size(); ++i)
            for (std::size_t j = i + 1; j < parts.size(); ++j)
                shared += overlap(parts[i], parts[j]).size();
        return shared;
    }

    bool valid() const { return allow_shared_cells || shared_cell_count() == 0; }
};

inline void write_voxels(const VoxelScene& scene, std::ostream& out) {
    std::vector<std::pair<CellKey, int>> rows;
    for (const PartOccupancy& p : scene.parts)
        for (CellKey key : p.cells) rows.emplace_back(key, p.part_id);
    std::sort(rows.begin(), rows.end());
    out << "eipart-voxels v1 R=" << scene.resolution << "\n";
    for (const auto& [key, part_id] : rows) {
        const CellIndex c = unpack_cell(key);
        out << c.x << ' ' << c.y << ' ' << c.z << ' ' << part_id << '\n';
    }
}

inline void write_voxels(const VoxelScene& scene, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_voxels(scene, out);
}

inline VoxelScene read_voxels(std::istream& in, const std::string& origin = "<stream>") {
    auto bad = [&](const char* why) { return ParseError(std::string("voxels: ") + why + " in " + origin); };
    std::string header;
    if (!std::getline(in, header)) throw bad("missing header");
    int resolution = 0;
    if (std::sscanf(header.c_str(), "eipart-voxels v1 R=%d", &resolution) != 1 || resolution < 2)
        throw bad("bad header");
    std::map<int, std::vector<CellKey>> by_part;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        int x, y, z, id;
        if (std::sscanf(line.c_str(), "%d %d %d %d", &x, &y, &z, &id) != 4)
            throw bad("malformed cell line");
        if (x < 0 || y < 0 || z < 0 || x >= resolution || y >= resolution || z >= resolution)
            throw bad("cell index out of range");
        by_part[id].push_back(pack_cell(x, y, z));
    }
    VoxelScene scene;
    scene.resolution = resolution;
    for (auto& [id, cells] : by_part) {
        PartOccupancy p;
        p.part_id = id;
        p.resolution = resolution;
        p.cells = std::move(cells);
        const std::size_t before = p.cells.size();
        p.finalize();
        if (p.cells.size() != before) throw bad("duplicate cell tuple");
        scene.parts.push_back(std::move(p));
    }
    return scene;
}

inline VoxelScene read_voxels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return read_voxels(in, path.string());
}

}  // namespace eipart
