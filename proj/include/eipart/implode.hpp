// implode.hpp -- iterative inward stepping of completed parts: each round the
// parts move one step of size alpha back along their recorded directions,
// nearest-to-center first, and a part freezes on its first collision or when
// its travel reaches the recorded distance.
#pragma once

#include <cassert>
#include <string>
#include <vector>

#include "eipart/explode.hpp"

namespace eipart {

struct RecordMismatch : Error {
    explicit RecordMismatch(const std::string& what) : Error(what) {}
};
struct GridMismatch : Error {
    explicit GridMismatch(const std::string& what) : Error(what) {}
};

enum class StopReason { Collision, ReachedZero, MaxIterations };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::Collision: return "collision";
        case StopReason::ReachedZero: return "reached_zero";
        default: return "max_iterations";
    }
}

enum class CollisionGranularity { Voxel, Aabb };
enum class StopMode { PerPart, Global };

struct ImplodeConfig {
    double alpha = 0.0;        // step size in world units; <= 0 means one cell
    int max_iterations = 0;    // <= 0 means ceil(max d / alpha) + R
    CollisionGranularity granularity = CollisionGranularity::Voxel;
    StopMode stop_mode = StopMode::PerPart;
};

struct ImplodedPart {
    int part_id = 0;
    int steps = 0;        // full alpha steps; a final clamped advance onto d is not one
    double travel = 0.0;  // cumulative inward distance, <= recorded d
    StopReason reason = StopReason::ReachedZero;
};

struct ImplodedState {
    std::vector<PartOccupancy> parts;
    std::vector<ImplodedPart> log;
    int iterations = 0;
};

// Ascending distance from the union-AABB center of the given parts; ties by
// part id. Empty parts sort first (distance zero to themselves is moot but
// the order must stay total and deterministic).
inline std::vector<int> sort_by_center_distance(const std::vector<PartOccupancy>& parts) {
    if (parts.empty()) throw EmptyInput("sort_by_center_distance: no parts");
    const Vec3 global = union_world_aabb(parts).center();
    std::vector<std::size_t> order = detail::order_by_center_distance(parts, global);
    std::vector<int> ids;
    ids.reserve(order.size());
    for (std::size_t i : order) ids.push_back(parts[i].part_id);
    return ids;
}

namespace detail {

inline bool collides(const PartOccupancy& a, const PartOccupancy& b,
                     CollisionGranularity granularity) {
    if (a.empty() || b.empty()) return false;
    if (granularity == CollisionGranularity::Aabb) return a.aabb.overlaps(b.aabb);
    return overlaps(a, b);
}

}  // namespace detail

// `completed` are the (possibly grown) part occupancies at their exploded
// positions, one per record entry. Parts already overlapping at entry are
// frozen immediately: a rolled-back state must never be worse than the input.
inline ImplodedState implode(const ExplodedState& exploded,
                             const std::vector<PartOccupancy>& completed,
                             const ImplodeConfig& config = {}) {
    const ExplosionRecord& record = exploded.record;
    if (completed.size() != record.parts.size())
        throw RecordMismatch("implode: " + std::to_string(completed.size()) + " parts vs " +
                             std::to_string(record.parts.size()) + " record entries");
    const int resolution = record.resolution;
    std::vector<const ExplosionEntry*> entries;
    for (const PartOccupancy& p : completed) {
        if (p.resolution != resolution)
            throw GridMismatch("implode: part " + std::to_string(p.part_id) +
                               " resolution differs from record");
        if (p.empty())
            throw EmptyInput("implode: part " + std::to_string(p.part_id) + " has no cells");
        const ExplosionEntry* e = record.find(p.part_id);
        if (!e) throw RecordMismatch("implode: no record entry for part " +
                                     std::to_string(p.part_id));
        entries.push_back(e);
    }

    const double alpha = config.alpha > 0.0 ? config.alpha : cell_size(resolution);
    double max_distance = 0.0;
    for (const ExplosionEntry& e : record.parts) max_distance = std::max(max_distance, e.distance);
    const int max_iterations = config.max_iterations > 0
                                   ? config.max_iterations
                                   : static_cast<int>(std::ceil(max_distance / alpha)) + resolution;

    const std::size_t n = completed.size();
    std::vector<PartOccupancy> current = completed;
    std::vector<ImplodedPart> log(n);
    std::vector<bool> frozen(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        log[k].part_id = completed[k].part_id;
        if (entries[k]->distance <= 0.0) frozen[k] = true;  // never moved out
    }
    // pre-existing interpenetration freezes both parts on the spot
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (detail::collides(current[a], current[b], config.granularity)) {
                for (std::size_t k : {a, b})
                    if (!frozen[k]) {
                        frozen[k] = true;
                        log[k].reason = StopReason::Collision;
                    }
            }

    ImplodedState state;
    auto all_frozen = [&] {
        for (bool f : frozen)
            if (!f) return false;
        return true;
    };

    bool global_stop = false;
    while (!all_frozen() && state.iterations < max_iterations && !global_stop) {
        ++state.iterations;
        const Vec3 center = union_world_aabb(current).center();
        for (std::size_t k : detail::order_by_center_distance(current, center)) {
            if (frozen[k]) continue;
            const bool full_step = log[k].travel + alpha <= entries[k]->distance + 1e-15;
            const double travel = full_step ? log[k].travel + alpha : entries[k]->distance;
            PartOccupancy tentative =
                translate_cells(completed[k], entries[k]->direction * -travel);
            bool hit = false;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != k && detail::collides(tentative, current[j], config.granularity)) {
                    hit = true;
                    break;
                }
            }
            if (hit) {  // roll back the step, freeze where we stand
                frozen[k] = true;
                log[k].reason = StopReason::Collision;
                if (config.stop_mode == StopMode::Global) {
                    global_stop = true;
                    break;
                }
                continue;
            }
            current[k] = std::move(tentative);
            log[k].travel = travel;
            if (full_step) ++log[k].steps;
            if (travel >= entries[k]->distance) {
                frozen[k] = true;
                log[k].reason = StopReason::ReachedZero;
            }
        }
#ifndef NDEBUG
        // rollback semantics: only pairs that entered interpenetrating may
        // still overlap at a round boundary, and those are frozen
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b)
                assert(!overlaps(current[a], current[b]) ||
                       (frozen[a] && frozen[b] && log[a].reason == StopReason::Collision &&
                        log[b].reason == StopReason::Collision));
#endif
    }

    for (std::size_t k = 0; k < n; ++k)
        if (!frozen[k])
            log[k].reason = global_stop ? StopReason::Collision : StopReason::MaxIterations;
    state.parts = std::move(current);
    state.log = std::move(log);
    return state;
}

inline nlohmann::json implode_report_to_json(const ImplodedState& state) {
    nlohmann::json j;
    j["iterations"] = state.iterations;
    j["parts"] = nlohmann::json::array();
    for (const ImplodedPart& p : state.log)
        j["parts"].push_back({{"id", p.part_id},
                              {"steps", p.steps},
                              {"travel", p.travel},
                              {"reason", to_string(p.reason)}});
    return j;
}

}  // namespace eipart
