// metrics.hpp -- the evaluation protocol: Chamfer distance, F-Score at
// radii {0.1, 0.05, 0.01}, voxel IoU, voxel F-Score at 0.01, the semantic
// L1 loss and the flow-matching loss as pure functions, and part/overall
// report assembly with greedy IoU part matching.
//
// Nearest-neighbor queries run on a uniform cube grid with an expanding ring
// search whose lower bound is exact, so results coincide with the O(n^2)
// scan to floating-point identity.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "eipart/voxel.hpp"

namespace eipart {

struct EmptyCloud : Error {
    explicit EmptyCloud(const std::string& what = "empty point cloud") : Error(what) {}
};
struct LengthMismatch : Error {
    explicit LengthMismatch(const std::string& what = "length mismatch") : Error(what) {}
};
struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& what = "dimension mismatch") : Error(what) {}
};

struct PointCloud {
    std::vector<Vec3> points;
    std::uint64_t seed = 0;  // provenance of the sampling stream, 0 = not sampled

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

inline PointCloud voxel_center_cloud(const PartOccupancy& occ) {
    PointCloud cloud;
    cloud.points.reserve(occ.cells.size());
    for (CellKey key : occ.cells)
        cloud.points.push_back(cell_center(unpack_cell(key), occ.resolution));
    return cloud;
}

// Exact nearest-neighbor structure over a fixed target set.
class NearestNeighborGrid {
public:
    explicit NearestNeighborGrid(const std::vector<Vec3>& points) : points_(points) {
        if (points.empty()) throw EmptyCloud("NearestNeighborGrid: no points");
        Aabb box;
        for (const Vec3& p : points) box.extend(p);
        origin_ = box.min;
        const double extent = std::max(box.longest_extent(), 1e-12);
        const int target = static_cast<int>(std::ceil(std::cbrt(static_cast<double>(points.size()))));
        cell_ = extent / std::clamp(target, 1, 64);
        for (int a = 0; a < 3; ++a)
            dims_[a] = std::max(1, static_cast<int>(std::floor(box.extent()[a] / cell_)) + 1);

        std::vector<int> counts(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2] + 1, 0);
        std::vector<int> cell_of(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            cell_of[i] = flat_index(cell_index(points[i]));
            ++counts[cell_of[i] + 1];
        }
        for (std::size_t i = 1; i < counts.size(); ++i) counts[i] += counts[i - 1];
        offsets_ = counts;
        order_.resize(points.size());
        std::vector<int> cursor(offsets_.begin(), offsets_.end() - 1);
        for (std::size_t i = 0; i < points.size(); ++i) order_[cursor[cell_of[i]]++] = static_cast<int>(i);
    }

    // Exact Euclidean distance to the nearest target point. A point in a
    // ring at Chebyshev cell-distance `ring` is at least (ring-1) cell edges
    // away, so once that bound exceeds the best hit the search is done.
    double nearest_distance(const Vec3& q) const {
        const std::array<int, 3> qc = cell_index(q);
        double best_sq = std::numeric_limits<double>::infinity();
        const int max_ring = dims_[0] + dims_[1] + dims_[2];
        for (int ring = 0; ring <= max_ring; ++ring) {
            if (best_sq < std::numeric_limits<double>::infinity()) {
                const double bound = (ring - 1) * cell_;
                if (bound > 0.0 && bound * bound > best_sq) break;
            }
            scan_ring(qc, ring, q, best_sq);
        }
        return std::sqrt(best_sq);
    }

private:
    std::array<int, 3> cell_index(const Vec3& p) const {
        std::array<int, 3> c{};
        for (int a = 0; a < 3; ++a) {
            const int i = static_cast<int>(std::floor((p[a] - origin_[a]) / cell_));
            c[a] = std::clamp(i, 0, dims_[a] - 1);
        }
        return c;
    }
    int flat_index(const std::array<int, 3>& c) const {
        return (c[0] * dims_[1] + c[1]) * dims_[2] + c[2];
    }

    // Visits every grid cell at Chebyshev distance exactly `ring` from qc.
    void scan_ring(const std::array<int, 3>& qc, int ring, const Vec3& q, double& best_sq) const {
        auto visit = [&](int x, int y, int z) {
            if (x < 0 || y < 0 || z < 0 || x >= dims_[0] || y >= dims_[1] || z >= dims_[2]) return;
            const int f = flat_index({x, y, z});
            for (int i = offsets_[f]; i < offsets_[f + 1]; ++i) {
                const Vec3 d = points_[order_[i]] - q;
                best_sq = std::min(best_sq, dot(d, d));
            }
        };
        if (ring == 0) {
            visit(qc[0], qc[1], qc[2]);
            return;
        }
        for (int dx = -ring; dx <= ring; ++dx)
            for (int dy = -ring; dy <= ring; ++dy) {
                if (std::abs(dx) == ring || std::abs(dy) == ring) {
                    for (int dz = -ring; dz <= ring; ++dz)
                        visit(qc[0] + dx, qc[1] + dy, qc[2] + dz);
                } else {
                    visit(qc[0] + dx, qc[1] + dy, qc[2] - ring);
                    visit(qc[0] + dx, qc[1] + dy, qc[2] + ring);
                }
            }
    }

    std::vector<Vec3> points_;
    Vec3 origin_;
    double cell_ = 1.0;
    std::array<int, 3> dims_{1, 1, 1};
    std::vector<int> offsets_;
    std::vector<int> order_;
};

enum class CdConvention { Mean, Sum, Squared };

inline CdConvention cd_convention_from_string(const std::string& s) {
    if (s == "mean") return CdConvention::Mean;
    if (s == "sum") return CdConvention::Sum;
    if (s == "squared") return CdConvention::Squared;
    throw Error("unknown CD convention: " + s);
}

// CD under the configured convention; the default "mean" is
// 0.5 * (mean_a min_b |a-b| + mean_b min_a |b-a|) with non-squared L2.
inline double chamfer_distance(const PointCloud& a, const PointCloud& b,
                               CdConvention convention = CdConvention::Mean) {
    if (a.empty() || b.empty()) throw EmptyCloud("chamfer_distance: empty cloud");
    const NearestNeighborGrid grid_b(b.points);
    const NearestNeighborGrid grid_a(a.points);
    double sum_ab = 0.0, sum_ba = 0.0;
    for (const Vec3& p : a.points) {
        const double d = grid_b.nearest_distance(p);
        sum_ab += convention == CdConvention::Squared ? d * d : d;
    }
    for (const Vec3& p : b.points) {
        const double d = grid_a.nearest_distance(p);
        sum_ba += convention == CdConvention::Squared ? d * d : d;
    }
    const double mean_ab = sum_ab / a.size();
    const double mean_ba = sum_ba / b.size();
    return convention == CdConvention::Sum ? mean_ab + mean_ba : 0.5 * (mean_ab + mean_ba);
}

// Precision = fraction of A within r of B, recall the reverse; harmonic mean.
inline double f_score(const PointCloud& a, const PointCloud& b, double radius) {
    if (a.empty() || b.empty()) throw EmptyCloud("f_score: empty cloud");
    if (radius <= 0.0) throw Error("f_score: radius must be > 0");
    const NearestNeighborGrid grid_b(b.points);
    const NearestNeighborGrid grid_a(a.points);
    std::size_t hits_a = 0, hits_b = 0;
    for (const Vec3& p : a.points)
        if (grid_b.nearest_distance(p) <= radius) ++hits_a;
    for (const Vec3& p : b.points)
        if (grid_a.nearest_distance(p) <= radius) ++hits_b;
    const double precision = static_cast<double>(hits_a) / a.size();
    const double recall = static_cast<double>(hits_b) / b.size();
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

// |A n B| / |A u B|; both-empty counts as full (vacuous) agreement.
inline double voxel_iou(const PartOccupancy& a, const PartOccupancy& b) {
    if (a.resolution != b.resolution)
        throw ResolutionMismatch("voxel_iou: resolutions differ");
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    auto ia = a.cells.begin(), ib = b.cells.begin();
    while (ia != a.cells.end() && ib != b.cells.end()) {
        if (*ia == *ib) { ++inter; ++ia; ++ib; }
        else if (*ia < *ib) ++ia;
        else ++ib;
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline double voxel_f_score(const PartOccupancy& a, const PartOccupancy& b, double radius = 0.01) {
    if (a.resolution != b.resolution)
        throw ResolutionMismatch("voxel_f_score: resolutions differ");
    return f_score(voxel_center_cloud(a), voxel_center_cloud(b), radius);
}

// Mean over samples of the L1 norm of the RGB residual.
inline double seg_l1_loss(const std::vector<Vec3>& pred, const std::vector<Vec3>& truth) {
    if (pred.size() != truth.size())
        throw LengthMismatch("seg_l1_loss: " + std::to_string(pred.size()) + " vs " +
                             std::to_string(truth.size()) + " samples");
    if (pred.empty()) throw EmptyInput("seg_l1_loss: no samples");
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Vec3 d = pred[i] - truth[i];
        total += std::abs(d.x) + std::abs(d.y) + std::abs(d.z);
    }
    return total / pred.size();
}

// Per-sample flow-matching loss: squared L2 norm of v - (eps - x0).
inline double cfm_loss(const std::vector<double>& v, const std::vector<double>& x0,
                       const std::vector<double>& eps) {
    if (v.size() != x0.size() || v.size() != eps.size())
        throw DimensionMismatch("cfm_loss: dimensions differ");
    if (v.empty()) throw EmptyInput("cfm_loss: empty vectors");
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double r = v[i] - (eps[i] - x0[i]);
        total += r * r;
    }
    return total;
}

// Batch mean of the per-sample losses.
inline double cfm_loss_batch(const std::vector<std::vector<double>>& v,
                             const std::vector<std::vector<double>>& x0,
                             const std::vector<std::vector<double>>& eps) {
    if (v.size() != x0.size() || v.size() != eps.size())
        throw DimensionMismatch("cfm_loss_batch: batch sizes differ");
    if (v.empty()) throw EmptyInput("cfm_loss_batch: empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) total += cfm_loss(v[i], x0[i], eps[i]);
    return total / v.size();
}

// ---- report assembly ----

struct MetricsReport {
    std::string level;  // "part" or "overall"
    double voxel_iou = 0.0;
    double cd = 0.0;
    double voxel_fscore_001 = 0.0;
    double fscore_01 = 0.0;
    double fscore_005 = 0.0;
    double fscore_001 = 0.0;
    bool vacuous_iou = false;  // both occupancies empty

    // part level only
    int matched = 0;
    int unmatched_pred = 0;
    int unmatched_gt = 0;
    nlohmann::json per_part = nlohmann::json::array();
    // aggregation over all GT parts, unmatched scoring zero (CD stays
    // matched-only; it has no meaningful zero)
    double penalized_voxel_iou = 0.0;
    double penalized_fscore_01 = 0.0;
    double penalized_fscore_005 = 0.0;
    double penalized_fscore_001 = 0.0;
    double penalized_voxel_fscore_001 = 0.0;
};

struct EvalOptions {
    std::size_t points = 100000;
    std::uint64_t seed = 7;
    int resolution = kDefaultResolution;
    CdConvention cd_convention = CdConvention::Mean;
};

// One evaluable part: a point cloud plus a voxel occupancy.
struct EvalPart {
    int part_id = 0;
    PointCloud cloud;
    PartOccupancy voxels;
};

inline std::vector<EvalPart> eval_parts_from_meshes(const PartSet& parts,
                                                    const EvalOptions& opt) {
    if (parts.empty()) throw EmptyInput("evaluate: empty part set");
    std::vector<EvalPart> out;
    out.reserve(parts.size());
    for (const MeshPart& p : parts) {
        EvalPart e;
        e.part_id = p.id;
        const auto samples = sample_surface(p.mesh, opt.points, opt.seed + p.id, p.id);
        e.cloud.seed = opt.seed + p.id;
        e.cloud.points.reserve(samples.size());
        for (const PointSample& s : samples) e.cloud.points.push_back(s.position);
        e.voxels = voxelize(p.mesh, opt.resolution, p.id);
        out.push_back(std::move(e));
    }
    return out;
}

inline std::vector<EvalPart> eval_parts_from_voxels(const VoxelScene& scene) {
    if (scene.parts.empty()) throw EmptyInput("evaluate: empty voxel scene");
    std::vector<EvalPart> out;
    out.reserve(scene.parts.size());
    for (const PartOccupancy& p : scene.parts) {
        EvalPart e;
        e.part_id = p.part_id;
        e.cloud = voxel_center_cloud(p);
        e.voxels = p;
        out.push_back(std::move(e));
    }
    return out;
}

namespace detail {

inline EvalPart merge_eval_parts(const std::vector<EvalPart>& parts) {
    EvalPart merged;
    merged.part_id = -1;
    merged.voxels.resolution = parts.front().voxels.resolution;
    for (const EvalPart& p : parts) {
        merged.cloud.points.insert(merged.cloud.points.end(), p.cloud.points.begin(),
                                   p.cloud.points.end());
        merged.voxels.cells.insert(merged.voxels.cells.end(), p.voxels.cells.begin(),
                                   p.voxels.cells.end());
    }
    merged.voxels.finalize();
    return merged;
}

inline void fill_pair_metrics(MetricsReport& report, const EvalPart& pred, const EvalPart& gt,
                              CdConvention convention) {
    report.voxel_iou = voxel_iou(pred.voxels, gt.voxels);
    report.vacuous_iou = pred.voxels.empty() && gt.voxels.empty();
    report.cd = chamfer_distance(pred.cloud, gt.cloud, convention);
    report.voxel_fscore_001 = voxel_f_score(pred.voxels, gt.voxels, 0.01);
    report.fscore_01 = f_score(pred.cloud, gt.cloud, 0.1);
    report.fscore_005 = f_score(pred.cloud, gt.cloud, 0.05);
    report.fscore_001 = f_score(pred.cloud, gt.cloud, 0.01);
}

}  // namespace detail

// Greedy highest-voxel-IoU matching between predicted and GT parts: pairs
// sorted by IoU descending (ties by ids) and taken while both ends are free.
// Pairs with zero IoU stay unmatched.
inline std::vector<std::pair<int, int>> match_parts_by_iou(const std::vector<EvalPart>& pred,
                                                           const std::vector<EvalPart>& gt) {
    struct Candidate {
        double iou;
        int pi, gi;
    };
    std::vector<Candidate> candidates;
    for (int pi = 0; pi < static_cast<int>(pred.size()); ++pi)
        for (int gi = 0; gi < static_cast<int>(gt.size()); ++gi) {
            const double iou = voxel_iou(pred[pi].voxels, gt[gi].voxels);
            if (iou > 0.0) candidates.push_back({iou, pi, gi});
        }
    std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (pred[a.pi].part_id != pred[b.pi].part_id)
            return pred[a.pi].part_id < pred[b.pi].part_id;
        return gt[a.gi].part_id < gt[b.gi].part_id;
    });
    std::vector<bool> pred_used(pred.size(), false), gt_used(gt.size(), false);
    std::vector<std::pair<int, int>> matches;
    for (const Candidate& c : candidates) {
        if (pred_used[c.pi] || gt_used[c.gi]) continue;
        pred_used[c.pi] = gt_used[c.gi] = true;
        matches.emplace_back(c.pi, c.gi);
    }
    return matches;
}

struct EvalResult {
    MetricsReport overall;
    MetricsReport part_level;
};

inline EvalResult evaluate(const std::vector<EvalPart>& pred, const std::vector<EvalPart>& gt,
                           const EvalOptions& opt = {}) {
    if (pred.empty() || gt.empty()) throw EmptyInput("evaluate: empty input");
    EvalResult result;

    result.overall.level = "overall";
    detail::fill_pair_metrics(result.overall, detail::merge_eval_parts(pred),
                              detail::merge_eval_parts(gt), opt.cd_convention);

    result.part_level.level = "part";
    const auto matches = match_parts_by_iou(pred, gt);
    result.part_level.matched = static_cast<int>(matches.size());
    result.part_level.unmatched_pred = static_cast<int>(pred.size() - matches.size());
    result.part_level.unmatched_gt = static_cast<int>(gt.size() - matches.size());
    double sums[6] = {};
    for (const auto& [pi, gi] : matches) {
        MetricsReport pair;
        detail::fill_pair_metrics(pair, pred[pi], gt[gi], opt.cd_convention);
        sums[0] += pair.voxel_iou;
        sums[1] += pair.cd;
        sums[2] += pair.voxel_fscore_001;
        sums[3] += pair.fscore_01;
        sums[4] += pair.fscore_005;
        sums[5] += pair.fscore_001;
        result.part_level.per_part.push_back({{"pred_id", pred[pi].part_id},
                                              {"gt_id", gt[gi].part_id},
                                              {"Voxel IOU", pair.voxel_iou},
                                              {"CD", pair.cd},
                                              {"Voxel F-Score 0.01", pair.voxel_fscore_001},
                                              {"F-Score 0.1", pair.fscore_01},
                                              {"F-Score 0.05", pair.fscore_005},
                                              {"F-Score 0.01", pair.fscore_001}});
    }
    if (!matches.empty()) {
        result.part_level.voxel_iou = sums[0] / matches.size();
        result.part_level.cd = sums[1] / matches.size();
        result.part_level.voxel_fscore_001 = sums[2] / matches.size();
        result.part_level.fscore_01 = sums[3] / matches.size();
        result.part_level.fscore_005 = sums[4] / matches.size();
        result.part_level.fscore_001 = sums[5] / matches.size();
        result.part_level.penalized_voxel_iou = sums[0] / gt.size();
        result.part_level.penalized_voxel_fscore_001 = sums[2] / gt.size();
        result.part_level.penalized_fscore_01 = sums[3] / gt.size();
        result.part_level.penalized_fscore_005 = sums[4] / gt.size();
        result.part_level.penalized_fscore_001 = sums[5] / gt.size();
    }
    return result;
}

inline EvalResult evaluate_meshes(const PartSet& pred, const PartSet& gt,
                                  const EvalOptions& opt = {}) {
    return evaluate(eval_parts_from_meshes(pred, opt), eval_parts_from_meshes(gt, opt), opt);
}

inline EvalResult evaluate_voxel_scenes(const VoxelScene& pred, const VoxelScene& gt,
                                        const EvalOptions& opt = {}) {
    if (pred.resolution != gt.resolution)
        throw ResolutionMismatch("evaluate: scene resolutions differ");
    return evaluate(eval_parts_from_voxels(pred), eval_parts_from_voxels(gt), opt);
}

// Report JSON mirrors the standard column names.
inline nlohmann::json report_to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["level"] = r.level;
    j["Voxel IOU"] = r.voxel_iou;
    j["CD"] = r.cd;
    j["Voxel F-Score 0.01"] = r.voxel_fscore_001;
    j["F-Score 0.1"] = r.fscore_01;
    j["F-Score 0.05"] = r.fscore_005;
    j["F-Score 0.01"] = r.fscore_001;
    if (r.vacuous_iou) j["vacuous_iou"] = true;
    if (r.level == "part") {
        j["matched"] = r.matched;
        j["unmatched_pred"] = r.unmatched_pred;
        j["unmatched_gt"] = r.unmatched_gt;
        j["per_part"] = r.per_part;
        j["penalized"] = {{"Voxel IOU", r.penalized_voxel_iou},
                          {"Voxel F-Score 0.01", r.penalized_voxel_fscore_001},
                          {"F-Score 0.1", r.penalized_fscore_01},
                          {"F-Score 0.05", r.penalized_fscore_005},
                          {"F-Score 0.01", r.penalized_fscore_001}};
    }
    return j;
}

inline nlohmann::json eval_result_to_json(const EvalResult& result, const EvalOptions& opt) {
    nlohmann::json j;
    j["points"] = opt.points;
    j["seed"] = opt.seed;
    j["resolution"] = opt.resolution;
    j["cd_convention"] = opt.cd_convention == CdConvention::Mean
                             ? "mean"
                             : (opt.cd_convention == CdConvention::Sum ? "sum" : "squared");
    j["overall"] = report_to_json(result.overall);
    j["part_level"] = report_to_json(result.part_level);
    return j;
}

}  // namespace eipart
