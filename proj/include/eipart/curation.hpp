// curation.hpp -- dataset preparation: reject objects with too many authored
// sub-objects, split the rest by connectivity, and fold excess parts into
// their collision (or nearest-box) neighbors until at most max_parts remain.
#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eipart/voxel.hpp"

namespace eipart {

struct CurationConfig {
    int max_parts = 20;
    double w_faces = 1.0;
    double w_area = 1.0;
    double w_bbox = 1.0;  // weight of the AABB-volume term
    double collision_margin = 0.0;       // world units added to AABBs before the overlap test
    int collision_resolution = 32;       // voxel grid used for the collision probe

    void validate() const {
        if (max_parts < 1) throw Error("curation: max_parts must be >= 1");
        if (w_faces < 0 || w_area < 0 || w_bbox < 0 || (w_faces + w_area + w_bbox) == 0.0)
            throw Error("curation: weights must be non-negative and not all zero");
    }
};

enum class MergeReason { Collision, NearestBbox };

inline const char* to_string(MergeReason r) {
    return r == MergeReason::Collision ? "collision" : "nearest_bbox";
}

struct MergeEvent {
    int absorbed_id = 0;
    int target_id = 0;
    MergeReason reason = MergeReason::NearestBbox;
};

struct CurationReport {
    int input_parts = 0;
    int output_parts = 0;
    std::vector<MergeEvent> merges;
};

enum class FilterVerdict { Accept, Reject, EmptyObject };

// Part-count gate applied to authored sub-objects before any splitting.
inline FilterVerdict filter_by_part_count(int part_count, int max_parts) {
    if (part_count < 0) throw Error("filter_by_part_count: negative count");
    if (part_count == 0) return FilterVerdict::EmptyObject;
    return part_count <= max_parts ? FilterVerdict::Accept : FilterVerdict::Reject;
}

// Ascending combined score of normalized face count, surface area and AABB
// volume; each criterion is divided by its maximum over the set so no unit
// dominates. Ties break on part id.
inline std::vector<int> rank_parts(const PartSet& parts, double w_faces, double w_area,
                                   double w_bbox) {
    if (parts.empty()) throw EmptyInput("rank_parts: no parts");
    const std::size_t n = parts.size();
    std::vector<double> faces(n), area(n), volume(n);
    for (std::size_t i = 0; i < n; ++i) {
        faces[i] = static_cast<double>(parts[i].mesh.triangles.size());
        area[i] = surface_area(parts[i].mesh);
        volume[i] = compute_aabb(parts[i].mesh).volume();
    }
    auto normalize_by_max = [](std::vector<double>& v) {
        const double m = *std::max_element(v.begin(), v.end());
        if (m > 0.0)
            for (double& x : v) x /= m;
    };
    normalize_by_max(faces);
    normalize_by_max(area);
    normalize_by_max(volume);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i)
        score[i] = w_faces * faces[i] + w_area * area[i] + w_bbox * volume[i];
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (score[a] != score[b]) return score[a] < score[b];
        return parts[a].id < parts[b].id;
    });
    std::vector<int> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = parts[order[i]].id;
    return ids;
}

namespace detail {

// Collision probe between two parts: inflated AABBs must overlap AND their
// occupancies at the curation resolution must share a cell. Returns the
// shared-cell count (0 = no collision).
inline std::size_t collision_cells(const MeshPart& a, const MeshPart& b,
                                   const PartOccupancy& va, const PartOccupancy& vb,
                                   double margin) {
    const Aabb box_a = compute_aabb(a.mesh).inflated(margin);
    if (!box_a.overlaps(compute_aabb(b.mesh).inflated(margin))) return 0;
    return overlap(va, vb).size();
}

}  // namespace detail

// Sequentially absorbs the lowest-ranked part into its strongest collision
// partner (most shared probe cells; ties by center distance, then id), or
// into the part with the nearest AABB center when nothing collides. The
// ranking is recomputed after every merge since absorbing geometry changes
// part sizes.
inline std::pair<PartSet, CurationReport> merge_excess(PartSet parts,
                                                       const CurationConfig& config) {
    config.validate();
    if (parts.empty()) throw EmptyInput("merge_excess: no parts");
    CurationReport report;
    report.input_parts = static_cast<int>(parts.size());

    while (static_cast<int>(parts.size()) > config.max_parts) {
        const std::vector<int> ranking =
            rank_parts(parts, config.w_faces, config.w_area, config.w_bbox);
        const int absorbed_id = ranking.front();
        std::size_t absorbed_idx = 0;
        for (std::size_t i = 0; i < parts.size(); ++i)
            if (parts[i].id == absorbed_id) absorbed_idx = i;

        std::vector<PartOccupancy> probes(parts.size());
        for (std::size_t i = 0; i < parts.size(); ++i)
            probes[i] = voxelize(parts[i].mesh, config.collision_resolution, parts[i].id);

        const Vec3 absorbed_center = compute_aabb(parts[absorbed_idx].mesh).center();
        std::optional<std::size_t> target;
        MergeReason reason = MergeReason::NearestBbox;
        std::size_t best_shared = 0;
        double best_distance = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (i == absorbed_idx) continue;
            const std::size_t shared = detail::collision_cells(
                parts[absorbed_idx], parts[i], probes[absorbed_idx], probes[i],
                config.collision_margin);
            const double distance = norm(compute_aabb(parts[i].mesh).center() - absorbed_center);
            if (shared > 0) {
                if (reason != MergeReason::Collision || shared > best_shared ||
                    (shared == best_shared && distance < best_distance)) {
                    target = i;
                    reason = MergeReason::Collision;
                    best_shared = shared;
                    best_distance = distance;
                }
            } else if (reason == MergeReason::NearestBbox && distance < best_distance) {
                target = i;
                best_distance = distance;
            }
        }
        if (!target) break;  // single part, nothing to merge into

        // append the absorbed triangles to the target part, drop the absorbed part
        MeshPart& dst = parts[*target];
        const TriMesh& src = parts[absorbed_idx].mesh;
        const int base = static_cast<int>(dst.mesh.vertices.size());
        dst.mesh.vertices.insert(dst.mesh.vertices.end(), src.vertices.begin(), src.vertices.end());
        for (std::size_t ti = 0; ti < src.triangles.size(); ++ti) {
            const auto& t = src.triangles[ti];
            dst.mesh.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
            dst.mesh.tri_object.push_back(src.object_of(ti));
        }
        report.merges.push_back({absorbed_id, dst.id, reason});
        parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(absorbed_idx));
    }

    report.output_parts = static_cast<int>(parts.size());
    return {std::move(parts), std::move(report)};
}

inline nlohmann::json curation_report_to_json(const CurationReport& report) {
    nlohmann::json j;
    j["input_parts"] = report.input_parts;
    j["output_parts"] = report.output_parts;
    j["merges"] = nlohmann::json::array();
    for (const MergeEvent& m : report.merges)
        j["merges"].push_back({{"absorbed", m.absorbed_id},
                               {"target", m.target_id},
                               {"reason", to_string(m.reason)}});
    return j;
}

}  // namespace eipart
