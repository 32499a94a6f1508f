// Shared test fixtures: box meshes, temp directories, a programmatic GLB
// builder, and small utilities.
#pragma once

#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eipart/mesh.hpp"
#include "eipart/rng.hpp"
#include "eipart/voxel.hpp"

namespace testutil {

namespace fs = std::filesystem;
using eipart::TriMesh;
using eipart::Vec3;

struct TempDir {
    fs::path path;
    TempDir() {
        static std::atomic<unsigned> counter{0};
        path = fs::temp_directory_path() /
               ("eipart-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    fs::path operator/(const std::string& name) const { return path / name; }
};

// Axis-aligned box as 12 triangles over 8 shared vertices, outward winding.
inline TriMesh make_box(const Vec3& lo, const Vec3& hi, int object = 0) {
    TriMesh m;
    m.vertices = {{lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {hi.x, hi.y, lo.z}, {lo.x, hi.y, lo.z},
                  {lo.x, lo.y, hi.z}, {hi.x, lo.y, hi.z}, {hi.x, hi.y, hi.z}, {lo.x, hi.y, hi.z}};
    const int f[12][3] = {{0, 2, 1}, {0, 3, 2},   // z = lo
                          {4, 5, 6}, {4, 6, 7},   // z = hi
                          {0, 1, 5}, {0, 5, 4},   // y = lo
                          {3, 6, 2}, {3, 7, 6},   // y = hi
                          {0, 7, 3}, {0, 4, 7},   // x = lo
                          {1, 2, 6}, {1, 6, 5}};  // x = hi
    for (const auto& t : f) {
        m.triangles.push_back({t[0], t[1], t[2]});
        m.tri_object.push_back(object);
    }
    m.object_names.push_back("box" + std::to_string(object));
    return m;
}

inline TriMesh merge_meshes(const std::vector<TriMesh>& meshes) {
    TriMesh out;
    int object = 0;
    for (const TriMesh& m : meshes) {
        const int base = static_cast<int>(out.vertices.size());
        out.vertices.insert(out.vertices.end(), m.vertices.begin(), m.vertices.end());
        for (const auto& t : m.triangles) {
            out.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
            out.tri_object.push_back(object);
        }
        out.object_names.push_back("object" + std::to_string(object));
        ++object;
    }
    return out;
}

inline fs::path write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    return path;
}

// Builds a GLB with `nodes` instances of one 8-vertex cube mesh, each
// translated by the given offset. Little-endian host assumed.
inline std::vector<std::uint8_t> build_cube_glb(const std::vector<Vec3>& node_translations,
                                                double half_extent = 0.5) {
    const float h = static_cast<float>(half_extent);
    const float positions[8][3] = {{-h, -h, -h}, {h, -h, -h}, {h, h, -h}, {-h, h, -h},
                                   {-h, -h, h},  {h, -h, h},  {h, h, h},  {-h, h, h}};
    const std::uint16_t indices[36] = {0, 2, 1, 0, 3, 2, 4, 5, 6, 4, 6, 7, 0, 1, 5, 0, 5, 4,
                                       3, 6, 2, 3, 7, 6, 0, 7, 3, 0, 4, 7, 1, 2, 6, 1, 6, 5};

    std::vector<std::uint8_t> bin(sizeof(positions) + sizeof(indices));
    std::memcpy(bin.data(), positions, sizeof(positions));
    std::memcpy(bin.data() + sizeof(positions), indices, sizeof(indices));

    nlohmann::json gltf;
    gltf["asset"] = {{"version", "2.0"}};
    gltf["scene"] = 0;
    nlohmann::json scene_nodes = nlohmann::json::array();
    gltf["nodes"] = nlohmann::json::array();
    for (std::size_t i = 0; i < node_translations.size(); ++i) {
        scene_nodes.push_back(i);
        const Vec3& t = node_translations[i];
        nlohmann::json node{{"mesh", 0}, {"name", "cube" + std::to_string(i)}};
        if (t.x != 0.0 || t.y != 0.0 || t.z != 0.0) node["translation"] = {t.x, t.y, t.z};
        gltf["nodes"].push_back(node);
    }
    gltf["scenes"] = {{{"nodes", scene_nodes}}};
    gltf["meshes"] = {{{"primitives",
                        {{{"attributes", {{"POSITION", 0}}}, {"indices", 1}, {"mode", 4}}}}}};
    gltf["buffers"] = {{{"byteLength", bin.size()}}};
    gltf["bufferViews"] = {{{"buffer", 0}, {"byteOffset", 0}, {"byteLength", sizeof(positions)}},
                           {{"buffer", 0},
                            {"byteOffset", sizeof(positions)},
                            {"byteLength", sizeof(indices)}}};
    gltf["accessors"] = {{{"bufferView", 0},
                          {"componentType", 5126},
                          {"count", 8},
                          {"type", "VEC3"},
                          {"min", {-half_extent, -half_extent, -half_extent}},
                          {"max", {half_extent, half_extent, half_extent}}},
                         {{"bufferView", 1},
                          {"componentType", 5123},
                          {"count", 36},
                          {"type", "SCALAR"}}};

    std::string json_text = gltf.dump();
    while (json_text.size() % 4 != 0) json_text.push_back(' ');
    while (bin.size() % 4 != 0) bin.push_back(0);

    std::vector<std::uint8_t> out;
    auto put_u32 = [&](std::uint32_t v) {
        out.push_back(v & 0xFF);
        out.push_back((v >> 8) & 0xFF);
        out.push_back((v >> 16) & 0xFF);
        out.push_back((v >> 24) & 0xFF);
    };
    put_u32(0x46546C67u);  // 'glTF'
    put_u32(2);
    put_u32(static_cast<std::uint32_t>(12 + 8 + json_text.size() + 8 + bin.size()));
    put_u32(static_cast<std::uint32_t>(json_text.size()));
    put_u32(0x4E4F534Au);  // 'JSON'
    out.insert(out.end(), json_text.begin(), json_text.end());
    put_u32(static_cast<std::uint32_t>(bin.size()));
    put_u32(0x004E4942u);  // 'BIN'
    out.insert(out.end(), bin.begin(), bin.end());
    return out;
}

// Assembles a GLB container from arbitrary glTF JSON and a binary chunk.
inline std::vector<std::uint8_t> assemble_glb(nlohmann::json gltf, std::vector<std::uint8_t> bin) {
    std::string json_text = gltf.dump();
    while (json_text.size() % 4 != 0) json_text.push_back(' ');
    while (bin.size() % 4 != 0) bin.push_back(0);
    std::vector<std::uint8_t> out;
    auto put_u32 = [&](std::uint32_t v) {
        out.push_back(v & 0xFF);
        out.push_back((v >> 8) & 0xFF);
        out.push_back((v >> 16) & 0xFF);
        out.push_back((v >> 24) & 0xFF);
    };
    put_u32(0x46546C67u);
    put_u32(2);
    put_u32(static_cast<std::uint32_t>(12 + 8 + json_text.size() + 8 + bin.size()));
    put_u32(static_cast<std::uint32_t>(json_text.size()));
    put_u32(0x4E4F534Au);
    out.insert(out.end(), json_text.begin(), json_text.end());
    put_u32(static_cast<std::uint32_t>(bin.size()));
    put_u32(0x004E4942u);
    out.insert(out.end(), bin.begin(), bin.end());
    return out;
}

// Scene-graph fixture: a root with a matrix transform (uniform scale 2 then
// translate +x) whose child carries a unit cube rotated 90 degrees about +z
// and lifted one unit. Exercises matrix nodes, TRS nodes and parent*child
// composition.
inline std::vector<std::uint8_t> build_hierarchy_glb() {
    const float h = 0.5f;
    const float positions[8][3] = {{-h, -h, -h}, {h, -h, -h}, {h, h, -h}, {-h, h, -h},
                                   {-h, -h, h},  {h, -h, h},  {h, h, h},  {-h, h, h}};
    const std::uint16_t indices[36] = {0, 2, 1, 0, 3, 2, 4, 5, 6, 4, 6, 7, 0, 1, 5, 0, 5, 4,
                                       3, 6, 2, 3, 7, 6, 0, 7, 3, 0, 4, 7, 1, 2, 6, 1, 6, 5};
    std::vector<std::uint8_t> bin(sizeof(positions) + sizeof(indices));
    std::memcpy(bin.data(), positions, sizeof(positions));
    std::memcpy(bin.data() + sizeof(positions), indices, sizeof(indices));

    nlohmann::json gltf;
    gltf["asset"] = {{"version", "2.0"}};
    gltf["scene"] = 0;
    gltf["scenes"] = {{{"nodes", {0}}}};
    const double s = 0.7071067811865476;  // sin/cos of 45 degrees
    gltf["nodes"] = {{{"name", "root"},
                      {"children", {1}},
                      // column-major: scale 2 with translation (1,0,0)
                      {"matrix", {2, 0, 0, 0, 0, 2, 0, 0, 0, 0, 2, 0, 1, 0, 0, 1}}},
                     {{"name", "child"},
                      {"mesh", 0},
                      {"translation", {0, 1, 0}},
                      {"rotation", {0, 0, s, s}}}};
    gltf["meshes"] = {{{"primitives",
                        {{{"attributes", {{"POSITION", 0}}}, {"indices", 1}, {"mode", 4}}}}}};
    gltf["buffers"] = {{{"byteLength", bin.size()}}};
    gltf["bufferViews"] = {
        {{"buffer", 0}, {"byteOffset", 0}, {"byteLength", sizeof(positions)}},
        {{"buffer", 0}, {"byteOffset", sizeof(positions)}, {"byteLength", sizeof(indices)}}};
    gltf["accessors"] = {{{"bufferView", 0},
                          {"componentType", 5126},
                          {"count", 8},
                          {"type", "VEC3"}},
                         {{"bufferView", 1},
                          {"componentType", 5123},
                          {"count", 36},
                          {"type", "SCALAR"}}};
    return assemble_glb(gltf, bin);
}

// Non-indexed TRIANGLE_FAN primitive: 5 rim points around a center.
inline std::vector<std::uint8_t> build_fan_glb() {
    std::vector<float> positions = {0, 0, 0};
    for (int i = 0; i < 5; ++i) {
        const double a = i * 0.7;
        positions.push_back(static_cast<float>(std::cos(a)));
        positions.push_back(static_cast<float>(std::sin(a)));
        positions.push_back(0.0f);
    }
    std::vector<std::uint8_t> bin(positions.size() * 4);
    std::memcpy(bin.data(), positions.data(), bin.size());

    nlohmann::json gltf;
    gltf["asset"] = {{"version", "2.0"}};
    gltf["scene"] = 0;
    gltf["scenes"] = {{{"nodes", {0}}}};
    gltf["nodes"] = {{{"name", "fan"}, {"mesh", 0}}};
    gltf["meshes"] = {{{"primitives", {{{"attributes", {{"POSITION", 0}}}, {"mode", 6}}}}}};
    gltf["buffers"] = {{{"byteLength", bin.size()}}};
    gltf["bufferViews"] = {{{"buffer", 0}, {"byteOffset", 0}, {"byteLength", bin.size()}}};
    gltf["accessors"] = {
        {{"bufferView", 0}, {"componentType", 5126}, {"count", 6}, {"type", "VEC3"}}};
    return assemble_glb(gltf, bin);
}

inline fs::path write_glb(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    return path;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline eipart::PartOccupancy solid_box_cells(int resolution, eipart::CellIndex lo,
                                             eipart::CellIndex hi, int id) {
    eipart::PartOccupancy p;
    p.part_id = id;
    p.resolution = resolution;
    for (int x = lo.x; x <= hi.x; ++x)
        for (int y = lo.y; y <= hi.y; ++y)
            for (int z = lo.z; z <= hi.z; ++z) p.cells.push_back(eipart::pack_cell(x, y, z));
    p.finalize();
    return p;
}

// Randomized multi-part layout resembling a segmented object: disjoint solid
// boxes grown off one another along random axes with 0..2 cell gaps (0 =
// touching faces). The cluster stays close to the grid center so explosion
// has room to separate without clipping at the walls.
inline std::vector<eipart::PartOccupancy> random_box_layout(eipart::RandomStream& rng,
                                                            int resolution, int count,
                                                            int spread = 14) {
    using eipart::CellIndex;
    struct Box {
        CellIndex lo, hi;
        bool overlaps(const Box& o) const {
            return lo.x <= o.hi.x && o.lo.x <= hi.x && lo.y <= o.hi.y && o.lo.y <= hi.y &&
                   lo.z <= o.hi.z && o.lo.z <= hi.z;
        }
    };
    std::vector<Box> boxes;
    const int mid = resolution / 2;
    auto size = [&] { return 3 + static_cast<int>(rng.uniform_index(3)); };
    boxes.push_back({{mid - 2, mid - 2, mid - 2},
                     {mid - 2 + size(), mid - 2 + size(), mid - 2 + size()}});
    int attempts = 0;
    while (static_cast<int>(boxes.size()) < count) {
        if (++attempts > 10000) throw eipart::Error("random_box_layout: placement stuck");
        const Box& anchor = boxes[rng.uniform_index(boxes.size())];
        const int axis = static_cast<int>(rng.uniform_index(3));
        const bool positive = rng.uniform() < 0.5;
        const int gap = static_cast<int>(rng.uniform_index(3));
        const int w[3] = {size(), size(), size()};
        Box next;
        const int anchor_lo[3] = {anchor.lo.x, anchor.lo.y, anchor.lo.z};
        const int anchor_hi[3] = {anchor.hi.x, anchor.hi.y, anchor.hi.z};
        int lo[3], hi[3];
        for (int a = 0; a < 3; ++a) {
            if (a == axis) {
                lo[a] = positive ? anchor_hi[a] + 1 + gap : anchor_lo[a] - 1 - gap - w[a];
            } else {
                lo[a] = anchor_lo[a] + static_cast<int>(rng.uniform_index(3)) - 1;
            }
            hi[a] = lo[a] + w[a];
        }
        next.lo = {lo[0], lo[1], lo[2]};
        next.hi = {hi[0], hi[1], hi[2]};
        if (next.lo.x < mid - spread || next.lo.y < mid - spread || next.lo.z < mid - spread ||
            next.hi.x > mid + spread || next.hi.y > mid + spread || next.hi.z > mid + spread)
            continue;  // keep explosion room; try another anchor
        bool collides = false;
        for (const Box& b : boxes) collides |= next.overlaps(b);
        if (collides) continue;
        boxes.push_back(next);
    }
    std::vector<eipart::PartOccupancy> parts;
    for (int k = 0; k < count; ++k)
        parts.push_back(solid_box_cells(resolution, boxes[k].lo, boxes[k].hi, k));
    return parts;
}

}  // namespace testutil
