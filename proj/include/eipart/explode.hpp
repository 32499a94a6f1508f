// explode.hpp -- explosion vector optimization: push parts outward along
// per-part unit directions until every pair is separated, recording the
// (direction, distance) pair per part so the move is invertible.
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "eipart/voxel.hpp"

namespace eipart {

struct NoConvergence : Error {
    explicit NoConvergence(const std::string& what) : Error(what) {}
};
struct PartCountMismatch : Error {
    explicit PartCountMismatch(const std::string& what) : Error(what) {}
};

constexpr int kDefaultMarginCells = 2;

struct ExplosionEntry {
    int part_id = 0;
    Vec3 direction{1.0, 0.0, 0.0};  // unit
    double distance = 0.0;          // world units, a multiple of the step
};

struct ExplosionRecord {
    std::vector<ExplosionEntry> parts;
    int resolution = kDefaultResolution;
    int margin_cells = kDefaultMarginCells;
    double step = 0.0;  // world units

    const ExplosionEntry* find(int part_id) const {
        for (const ExplosionEntry& e : parts)
            if (e.part_id == part_id) return &e;
        return nullptr;
    }
};

struct ExplodedState {
    std::vector<PartOccupancy> parts;  // at exploded positions
    ExplosionRecord record;
};

// Deterministic unit direction for part index k when its center coincides
// with the global center: golden-angle sphere sequence, distinct per index.
inline Vec3 fallback_direction(int k) {
    if (k == 0) return {1.0, 0.0, 0.0};
    constexpr int kPeriod = 64;
    constexpr double kGoldenAngle = 2.39996322972865332;  // pi * (3 - sqrt(5))
    const double z = 1.0 - (2.0 * (k % kPeriod) + 1.0) / kPeriod;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = k * kGoldenAngle;
    return {r * std::cos(phi), r * std::sin(phi), z};
}

inline Vec3 part_world_center(const PartOccupancy& p) {
    return p.aabb.world_center(p.resolution);
}

inline Aabb union_world_aabb(const std::vector<PartOccupancy>& parts) {
    Aabb box;
    const double s = cell_size(parts.front().resolution);
    for (const PartOccupancy& p : parts) {
        if (p.empty()) continue;
        box.extend(Vec3{-1.0 + p.aabb.lo.x * s, -1.0 + p.aabb.lo.y * s, -1.0 + p.aabb.lo.z * s});
        box.extend(Vec3{-1.0 + (p.aabb.hi.x + 1) * s, -1.0 + (p.aabb.hi.y + 1) * s,
                        -1.0 + (p.aabb.hi.z + 1) * s});
    }
    return box;
}

// u_k = normalize(center_k - global_center); parts sitting on the global
// center get the per-index fallback so coincident parts still diverge.
inline std::vector<Vec3> explosion_directions(const std::vector<PartOccupancy>& parts) {
    if (parts.empty()) throw EmptyInput("explosion_directions: no parts");
    const Vec3 global = union_world_aabb(parts).center();
    std::vector<Vec3> dirs;
    dirs.reserve(parts.size());
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Vec3 delta = part_world_center(parts[k]) - global;
        const double len = norm(delta);
        dirs.push_back(len < 1e-6 ? fallback_direction(static_cast<int>(k)) : delta / len);
    }
    return dirs;
}

// Pairwise separation: no shared voxel, and the integer AABB gap reaches the
// margin on at least one axis. Empty (fully clipped) parts are vacuously
// separated.
inline bool separated(const PartOccupancy& a, const PartOccupancy& b, int margin_cells) {
    if (a.empty() || b.empty()) return true;
    if (a.aabb.gap_cells(b.aabb) < margin_cells) return false;
    return !overlaps(a, b);
}

namespace detail {

inline std::vector<std::size_t> order_by_center_distance(const std::vector<PartOccupancy>& parts,
                                                         const Vec3& global_center) {
    std::vector<std::size_t> order(parts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> dist(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i)
        dist[i] = norm(part_world_center(parts[i]) - global_center);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dist[a] != dist[b]) return dist[a] < dist[b];
        return parts[a].part_id < parts[b].part_id;
    });
    return order;
}

}  // namespace detail

// Greedy synchronized outward stepping. Each round walks the parts in
// increasing distance-from-center order; a part advances by one step along
// its direction when that motion strictly widens at least one pair it still
// violates (a part whose every conflict lies dead ahead on its own ray
// waits for the outer part to flee, which separates at full step rate
// instead of marching both into the grid wall). Occupancies are requantized
// from the original cells at every move, so the recorded distances replay
// exactly and come out as integer multiples of `step`.
inline ExplodedState optimize_explosion(const std::vector<PartOccupancy>& parts,
                                        int margin_cells, double step,
                                        int max_rounds = 0) {
    if (parts.empty()) throw EmptyInput("optimize_explosion: no parts");
    if (margin_cells < 0) throw Error("optimize_explosion: margin must be >= 0");
    if (step <= 0.0) throw Error("optimize_explosion: step must be > 0");
    const int resolution = parts.front().resolution;
    for (const PartOccupancy& p : parts) {
        if (p.resolution != resolution)
            throw ResolutionMismatch("optimize_explosion: mixed resolutions");
        if (p.empty())
            throw EmptyInput("optimize_explosion: part " + std::to_string(p.part_id) +
                             " has no cells");
    }
    if (max_rounds <= 0) max_rounds = 4 * resolution;

    const Vec3 global_center = union_world_aabb(parts).center();
    const std::vector<Vec3> directions = explosion_directions(parts);
    std::vector<double> distance(parts.size(), 0.0);
    std::vector<PartOccupancy> current = parts;

    bool any_violation = false;
    auto should_step = [&](std::size_t k) {
        bool widening_conflict = false;
        for (std::size_t j = 0; j < current.size(); ++j) {
            if (j == k || separated(current[k], current[j], margin_cells)) continue;
            any_violation = true;
            const Vec3 away = part_world_center(current[k]) - part_world_center(current[j]);
            if (dot(directions[k], away) > 0.0) widening_conflict = true;
        }
        return widening_conflict;
    };

    int rounds = 0;
    bool moved = true;
    while (moved) {
        if (++rounds > max_rounds)
            throw NoConvergence("optimize_explosion: no separation after " +
                                std::to_string(max_rounds) + " rounds");
        moved = false;
        any_violation = false;
        for (std::size_t k : detail::order_by_center_distance(current, global_center)) {
            if (should_step(k)) {
                distance[k] += step;
                current[k] = translate_cells(parts[k], directions[k] * distance[k]);
                moved = true;
            }
        }
        if (!moved && any_violation)
            throw NoConvergence(
                "optimize_explosion: stalled with violating pairs on coincident rays");
    }

    ExplodedState state;
    state.parts = std::move(current);
    state.record.resolution = resolution;
    state.record.margin_cells = margin_cells;
    state.record.step = step;
    for (std::size_t k = 0; k < parts.size(); ++k)
        state.record.parts.push_back({parts[k].part_id, directions[k], distance[k]});
    return state;
}

// Replays the record: sign=+1 re-creates the exploded placement, sign=-1
// undoes it (exact when the quantized shift is, as here, a lattice move).
inline std::vector<PartOccupancy> apply_record(const std::vector<PartOccupancy>& parts,
                                               const ExplosionRecord& record, int sign) {
    if (parts.size() != record.parts.size())
        throw PartCountMismatch("apply_record: " + std::to_string(parts.size()) + " parts vs " +
                                std::to_string(record.parts.size()) + " record entries");
    std::vector<PartOccupancy> out;
    out.reserve(parts.size());
    for (const PartOccupancy& p : parts) {
        const ExplosionEntry* entry = record.find(p.part_id);
        if (!entry)
            throw PartCountMismatch("apply_record: no record entry for part " +
                                    std::to_string(p.part_id));
        out.push_back(translate_cells(p, entry->direction * (sign * entry->distance)));
    }
    return out;
}

inline nlohmann::json record_to_json(const ExplosionRecord& record) {
    nlohmann::json j;
    j["resolution"] = record.resolution;
    j["margin"] = record.margin_cells;
    j["step"] = record.step;
    j["parts"] = nlohmann::json::array();
    for (const ExplosionEntry& e : record.parts)
        j["parts"].push_back({{"id", e.part_id},
                              {"u", {e.direction.x, e.direction.y, e.direction.z}},
                              {"d", e.distance}});
    return j;
}

inline ExplosionRecord record_from_json(const nlohmann::json& j) {
    ExplosionRecord record;
    try {
        record.resolution = j.at("resolution").get<int>();
        record.margin_cells = j.at("margin").get<int>();
        record.step = j.at("step").get<double>();
        for (const auto& e : j.at("parts")) {
            ExplosionEntry entry;
            entry.part_id = e.at("id").get<int>();
            const auto u = e.at("u").get<std::vector<double>>();
            entry.direction = {u.at(0), u.at(1), u.at(2)};
            entry.distance = e.at("d").get<double>();
            record.parts.push_back(entry);
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("record: ") + ex.what());
    }
    return record;
}

inline void save_record(const ExplosionRecord& record, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << record_to_json(record).dump(2) << '\n';
}

inline ExplosionRecord load_record(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError("record: malformed JSON in " + path.string());
    return record_from_json(j);
}

}  // namespace eipart
