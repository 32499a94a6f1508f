// Independent brute-force oracles the implementation is checked against.
// These deliberately use different formulations than the library code: the
// triangle/box test projects all eight box corners per axis, voxelization
// scans every cell of the grid, nearest neighbors are a double loop, the
// renderer oracle casts a ray per pixel, and connectivity uses BFS over an
// O(V^2) weld.
#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "eipart/mesh.hpp"
#include "eipart/render.hpp"
#include "eipart/voxel.hpp"

namespace oracle {

using eipart::Aabb;
using eipart::CellIndex;
using eipart::TriMesh;
using eipart::Vec3;

// --- separating axis test via full interval projection ---

inline bool intervals_touch(double lo_a, double hi_a, double lo_b, double hi_b) {
    return lo_a <= hi_b && lo_b <= hi_a;
}

inline bool tri_box_overlap(const Vec3 tri[3], const Vec3& box_lo, const Vec3& box_hi) {
    Vec3 corners[8];
    for (int i = 0; i < 8; ++i)
        corners[i] = {i & 1 ? box_hi.x : box_lo.x, i & 2 ? box_hi.y : box_lo.y,
                      i & 4 ? box_hi.z : box_lo.z};

    auto separated_on = [&](const Vec3& axis) {
        if (dot(axis, axis) < 1e-24) return false;  // degenerate axis, skip
        double tlo = std::numeric_limits<double>::infinity(), thi = -tlo;
        for (int i = 0; i < 3; ++i) {
            const double p = dot(tri[i], axis);
            tlo = std::min(tlo, p);
            thi = std::max(thi, p);
        }
        double blo = std::numeric_limits<double>::infinity(), bhi = -blo;
        for (const Vec3& c : corners) {
            const double p = dot(c, axis);
            blo = std::min(blo, p);
            bhi = std::max(bhi, p);
        }
        return !intervals_touch(tlo, thi, blo, bhi);
    };

    const Vec3 box_axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (const Vec3& a : box_axes)
        if (separated_on(a)) return false;
    const Vec3 edges[3] = {tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2]};
    if (separated_on(cross(edges[0], edges[1]))) return false;
    for (const Vec3& box_axis : box_axes)
        for (const Vec3& edge : edges)
            if (separated_on(cross(box_axis, edge))) return false;
    return true;
}

// Exhaustive O(R^3 * T) surface voxelization.
inline std::set<std::array<int, 3>> voxelize_all_cells(const TriMesh& mesh, int resolution) {
    std::set<std::array<int, 3>> cells;
    const double s = 2.0 / resolution;
    for (int x = 0; x < resolution; ++x)
        for (int y = 0; y < resolution; ++y)
            for (int z = 0; z < resolution; ++z) {
                const Vec3 lo{-1.0 + x * s, -1.0 + y * s, -1.0 + z * s};
                const Vec3 hi{lo.x + s, lo.y + s, lo.z + s};
                for (const auto& t : mesh.triangles) {
                    const Vec3 tri[3] = {mesh.vertices[t[0]], mesh.vertices[t[1]],
                                         mesh.vertices[t[2]]};
                    if (tri_box_overlap(tri, lo, hi)) {
                        cells.insert({x, y, z});
                        break;
                    }
                }
            }
    return cells;
}

inline std::set<std::array<int, 3>> to_cell_set(const eipart::PartOccupancy& occ) {
    std::set<std::array<int, 3>> cells;
    for (eipart::CellKey key : occ.cells) {
        const CellIndex c = eipart::unpack_cell(key);
        cells.insert({c.x, c.y, c.z});
    }
    return cells;
}

// --- brute-force point-cloud metrics ---

inline double nearest_distance(const Vec3& q, const std::vector<Vec3>& pts) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& p : pts) best = std::min(best, norm(q - p));
    return best;
}

inline double chamfer_mean(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double sum_ab = 0.0, sum_ba = 0.0;
    for (const Vec3& p : a) sum_ab += nearest_distance(p, b);
    for (const Vec3& p : b) sum_ba += nearest_distance(p, a);
    return 0.5 * (sum_ab / a.size() + sum_ba / b.size());
}

inline double f_score(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double r) {
    std::size_t hits_a = 0, hits_b = 0;
    for (const Vec3& p : a)
        if (nearest_distance(p, b) <= r) ++hits_a;
    for (const Vec3& p : b)
        if (nearest_distance(p, a) <= r) ++hits_b;
    const double precision = static_cast<double>(hits_a) / a.size();
    const double recall = static_cast<double>(hits_b) / b.size();
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

// --- per-pixel ray casting (Moller-Trumbore) ---

struct RayHit {
    bool hit = false;
    double depth = std::numeric_limits<double>::infinity();
};

inline bool ray_triangle(const Vec3& origin, const Vec3& dir, const Vec3& v0, const Vec3& v1,
                         const Vec3& v2, double* t_out) {
    const Vec3 e1 = v1 - v0;
    const Vec3 e2 = v2 - v0;
    const Vec3 p = cross(dir, e2);
    const double det = dot(e1, p);
    if (std::abs(det) < 1e-14) return false;
    const double inv = 1.0 / det;
    const Vec3 s = origin - v0;
    const double u = dot(s, p) * inv;
    if (u < 0.0 || u > 1.0) return false;
    const Vec3 q = cross(s, e1);
    const double v = dot(dir, q) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    *t_out = dot(e2, q) * inv;
    return true;
}

// Orthographic ray per pixel center; depth is measured along the view
// forward axis so it is directly comparable with the rasterizer's buffer.
inline std::vector<RayHit> raycast_view(const TriMesh& mesh, const eipart::ViewSpec& view) {
    std::vector<RayHit> hits(static_cast<std::size_t>(view.width) * view.height);
    for (int py = 0; py < view.height; ++py)
        for (int px = 0; px < view.width; ++px) {
            const double sx = -1.0 + (px + 0.5) * 2.0 / view.width;
            const double sy = 1.0 - (py + 0.5) * 2.0 / view.height;
            // start 4 units behind the scene along -forward
            const Vec3 origin = view.right * sx + view.up * sy + view.forward * -4.0;
            RayHit& best = hits[static_cast<std::size_t>(py) * view.width + px];
            for (const auto& t : mesh.triangles) {
                double ray_t;
                if (ray_triangle(origin, view.forward, mesh.vertices[t[0]], mesh.vertices[t[1]],
                                 mesh.vertices[t[2]], &ray_t)) {
                    const double depth = ray_t - 4.0;  // forward-axis coordinate
                    if (depth < best.depth) {
                        best.hit = true;
                        best.depth = depth;
                    }
                }
            }
        }
    return hits;
}

// --- connectivity splitting via O(V^2) weld + BFS over triangles ---

inline std::vector<std::vector<int>> split_components(const TriMesh& mesh, double weld_tol) {
    const std::size_t nv = mesh.vertices.size();
    std::vector<int> rep(nv);
    for (std::size_t i = 0; i < nv; ++i) rep[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < nv; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (norm(mesh.vertices[i] - mesh.vertices[j]) <= weld_tol) {
                // join the two groups
                const int a = rep[i], b = rep[j];
                for (std::size_t k = 0; k < nv; ++k)
                    if (rep[k] == a) rep[k] = b;
            }

    std::vector<std::vector<int>> adjacency(mesh.triangles.size());
    std::map<int, std::vector<int>> group_to_tris;
    for (int ti = 0; ti < static_cast<int>(mesh.triangles.size()); ++ti)
        for (int c = 0; c < 3; ++c) group_to_tris[rep[mesh.triangles[ti][c]]].push_back(ti);
    for (const auto& [group, tris] : group_to_tris)
        for (std::size_t i = 1; i < tris.size(); ++i) {
            adjacency[tris[0]].push_back(tris[i]);
            adjacency[tris[i]].push_back(tris[0]);
        }

    std::vector<std::vector<int>> components;
    std::vector<bool> seen(mesh.triangles.size(), false);
    for (int ti = 0; ti < static_cast<int>(mesh.triangles.size()); ++ti) {
        if (seen[ti]) continue;
        std::vector<int> comp;
        std::deque<int> queue{ti};
        seen[ti] = true;
        while (!queue.empty()) {
            const int cur = queue.front();
            queue.pop_front();
            comp.push_back(cur);
            for (int next : adjacency[cur])
                if (!seen[next]) {
                    seen[next] = true;
                    queue.push_back(next);
                }
        }
        std::sort(comp.begin(), comp.end());
        components.push_back(std::move(comp));
    }
    return components;
}

// --- dense-array morphology on a small grid ---

class DenseGrid {
public:
    explicit DenseGrid(int extent) : extent_(extent), cells_(extent * extent * extent, false) {}

    static DenseGrid from(const eipart::PartOccupancy& occ, int extent) {
        DenseGrid g(extent);
        for (eipart::CellKey key : occ.cells) {
            const CellIndex c = eipart::unpack_cell(key);
            g.set(c.x, c.y, c.z, true);
        }
        return g;
    }

    bool get(int x, int y, int z) const {
        if (x < 0 || y < 0 || z < 0 || x >= extent_ || y >= extent_ || z >= extent_) return false;
        return cells_[(x * extent_ + y) * extent_ + z];
    }
    void set(int x, int y, int z, bool v) { cells_[(x * extent_ + y) * extent_ + z] = v; }

    DenseGrid dilate() const {
        DenseGrid out(extent_);
        for (int x = 0; x < extent_; ++x)
            for (int y = 0; y < extent_; ++y)
                for (int z = 0; z < extent_; ++z)
                    out.set(x, y, z, get(x, y, z) || get(x - 1, y, z) || get(x + 1, y, z) ||
                                         get(x, y - 1, z) || get(x, y + 1, z) ||
                                         get(x, y, z - 1) || get(x, y, z + 1));
        return out;
    }

    // erosion against an occupancy that extends beyond the stored window is
    // not needed by the fixtures (they stay 1 cell inside the border)
    DenseGrid erode() const {
        DenseGrid out(extent_);
        for (int x = 0; x < extent_; ++x)
            for (int y = 0; y < extent_; ++y)
                for (int z = 0; z < extent_; ++z)
                    out.set(x, y, z, get(x, y, z) && get(x - 1, y, z) && get(x + 1, y, z) &&
                                         get(x, y - 1, z) && get(x, y + 1, z) &&
                                         get(x, y, z - 1) && get(x, y, z + 1));
        return out;
    }

    std::set<std::array<int, 3>> to_set() const {
        std::set<std::array<int, 3>> cells;
        for (int x = 0; x < extent_; ++x)
            for (int y = 0; y < extent_; ++y)
                for (int z = 0; z < extent_; ++z)
                    if (get(x, y, z)) cells.insert({x, y, z});
        return cells;
    }

private:
    int extent_;
    std::vector<bool> cells_;
};

}  // namespace oracle
