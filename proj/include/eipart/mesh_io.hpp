// mesh_io.hpp -- OBJ reader/writer, GLB reader with scene-graph flattening,
// and the JSON part manifest.
//
// GLB support is limited to static triangle geometry: TRIANGLES / STRIP / FAN
// primitives, float32 POSITION, u8/u16/u32 indices, node matrix or TRS
// transforms. No animation, no skinning, no materials.
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eipart/mesh.hpp"

namespace eipart {

namespace detail {

inline void push_triangle(TriMesh& mesh, int a, int b, int c, int object) {
    if (a == b || b == c || a == c) return;  // degenerate, rejected at load
    mesh.triangles.push_back({a, b, c});
    mesh.tri_object.push_back(object);
}

// Resolves an OBJ face index (1-based, or negative = relative) to 0-based.
inline int resolve_obj_index(long idx, std::size_t vertex_count, const std::string& line) {
    long v = idx > 0 ? idx - 1 : static_cast<long>(vertex_count) + idx;
    if (v < 0 || v >= static_cast<long>(vertex_count))
        throw ParseError("obj: face index out of range in '" + line + "'");
    return static_cast<int>(v);
}

}  // namespace detail

inline TriMesh load_obj(std::istream& in, const std::string& origin = "<stream>") {
    TriMesh mesh;
    int object = -1;
    auto ensure_object = [&] {
        if (object < 0) {
            object = 0;
            mesh.object_names.push_back("default");
        }
    };
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag.empty() || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p.x >> p.y >> p.z))
                throw ParseError("obj: malformed vertex line '" + line + "' in " + origin);
            mesh.vertices.push_back(p);
        } else if (tag == "o" || tag == "g") {
            std::string name;
            std::getline(ls, name);
            const auto start = name.find_first_not_of(' ');
            name = start == std::string::npos ? "" : name.substr(start);
            if (name.empty()) name = tag + std::to_string(mesh.object_names.size());
            mesh.object_names.push_back(name);
            object = static_cast<int>(mesh.object_names.size()) - 1;
        } else if (tag == "f") {
            ensure_object();
            std::vector<int> corners;
            std::string vert;
            while (ls >> vert) {
                // accept v, v/t, v//n, v/t/n
                const std::string first = vert.substr(0, vert.find('/'));
                long idx = 0;
                try {
                    idx = std::stol(first);
                } catch (const std::exception&) {
                    throw ParseError("obj: malformed face corner '" + vert + "' in " + origin);
                }
                corners.push_back(detail::resolve_obj_index(idx, mesh.vertices.size(), line));
            }
            if (corners.size() < 3)
                throw ParseError("obj: face with fewer than 3 corners in " + origin);
            for (std::size_t i = 1; i + 1 < corners.size(); ++i)  // fan triangulation
                detail::push_triangle(mesh, corners[0], corners[i], corners[i + 1], object);
        }
        // vn/vt/usemtl/mtllib/s are ignored
    }
    if (mesh.triangles.empty()) throw EmptyMesh("obj: no triangles in " + origin);
    return mesh;
}

inline TriMesh load_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("obj: cannot open " + path.string());
    return load_obj(in, path.string());
}

inline void save_obj(const TriMesh& mesh, std::ostream& out) {
    char buf[96];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
        out << buf;
    }
    for (const auto& t : mesh.triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

inline void save_obj(const TriMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    save_obj(mesh, out);
}

namespace detail {

struct GlbChunks {
    nlohmann::json json;
    std::vector<std::uint8_t> bin;
};

inline GlbChunks read_glb_chunks(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("glb: cannot open " + path.string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    auto u32 = [&](std::size_t off) -> std::uint32_t {
        if (off + 4 > data.size()) throw ParseError("glb: truncated file " + path.string());
        std::uint32_t v;
        std::memcpy(&v, data.data() + off, 4);
        return v;
    };
    if (data.size() < 12 || u32(0) != 0x46546C67u)
        throw ParseError("glb: bad magic in " + path.string());
    if (u32(4) != 2) throw ParseError("glb: unsupported version in " + path.string());
    GlbChunks chunks;
    std::size_t off = 12;
    while (off + 8 <= data.size()) {
        const std::uint32_t len = u32(off);
        const std::uint32_t type = u32(off + 4);
        off += 8;
        if (off + len > data.size()) throw ParseError("glb: truncated chunk in " + path.string());
        if (type == 0x4E4F534Au) {  // 'JSON'
            chunks.json = nlohmann::json::parse(data.begin() + off, data.begin() + off + len,
                                                nullptr, false);
            if (chunks.json.is_discarded())
                throw ParseError("glb: malformed JSON chunk in " + path.string());
        } else if (type == 0x004E4942u) {  // 'BIN'
            chunks.bin.assign(data.begin() + off, data.begin() + off + len);
        }
        off += len;
    }
    if (chunks.json.is_null()) throw ParseError("glb: missing JSON chunk in " + path.string());
    return chunks;
}

class GlbReader {
public:
    GlbReader(GlbChunks chunks, std::string origin)
        : gltf_(std::move(chunks.json)), bin_(std::move(chunks.bin)), origin_(std::move(origin)) {}

    TriMesh read() {
        int scene = gltf_.value("scene", 0);
        const auto& scenes = gltf_.value("scenes", nlohmann::json::array());
        if (scene >= static_cast<int>(scenes.size())) scene = 0;
        if (!scenes.empty()) {
            for (int node : scenes[scene].value("nodes", std::vector<int>{}))
                visit_node(node, Mat4::identity());
        } else {
            // no scene: flatten every root-less node
            const auto& nodes = gltf_.value("nodes", nlohmann::json::array());
            for (int i = 0; i < static_cast<int>(nodes.size()); ++i)
                visit_node(i, Mat4::identity());
        }
        if (mesh_.triangles.empty()) throw EmptyMesh("glb: no triangles in " + origin_);
        return std::move(mesh_);
    }

private:
    void visit_node(int index, const Mat4& parent, int depth = 0) {
        if (depth > 256) throw ParseError("glb: node graph too deep (cycle?) in " + origin_);
        const auto& nodes = gltf_.at("nodes");
        if (index < 0 || index >= static_cast<int>(nodes.size()))
            throw ParseError("glb: node index out of range in " + origin_);
        const auto& node = nodes[index];
        const Mat4 world = parent * node_transform(node);
        if (node.contains("mesh")) {
            const std::string name = node.value("name", "node" + std::to_string(index));
            read_mesh(node["mesh"].get<int>(), world, name);
        }
        for (int child : node.value("children", std::vector<int>{}))
            visit_node(child, world, depth + 1);
    }

    static Mat4 node_transform(const nlohmann::json& node) {
        if (node.contains("matrix")) {
            const auto vals = node["matrix"].get<std::vector<double>>();
            Mat4 m = Mat4::identity();
            for (std::size_t i = 0; i < vals.size() && i < 16; ++i) m.m[i] = vals[i];
            return m;
        }
        Vec3 t{}, s{1.0, 1.0, 1.0};
        std::array<double, 4> q{0.0, 0.0, 0.0, 1.0};
        if (node.contains("translation")) {
            const auto v = node["translation"].get<std::vector<double>>();
            t = {v[0], v[1], v[2]};
        }
        if (node.contains("rotation")) {
            const auto v = node["rotation"].get<std::vector<double>>();
            q = {v[0], v[1], v[2], v[3]};
        }
        if (node.contains("scale")) {
            const auto v = node["scale"].get<std::vector<double>>();
            s = {v[0], v[1], v[2]};
        }
        return Mat4::from_trs(t, q, s);
    }

    void read_mesh(int mesh_index, const Mat4& world, const std::string& node_name) {
        const auto& meshes = gltf_.value("meshes", nlohmann::json::array());
        if (mesh_index < 0 || mesh_index >= static_cast<int>(meshes.size()))
            throw ParseError("glb: mesh index out of range in " + origin_);
        for (const auto& prim : meshes[mesh_index].value("primitives", nlohmann::json::array())) {
            const int mode = prim.value("mode", 4);
            if (mode != 4 && mode != 5 && mode != 6) continue;  // triangles only
            if (!prim.contains("attributes") || !prim["attributes"].contains("POSITION"))
                continue;
            const std::vector<Vec3> positions = read_positions(prim["attributes"]["POSITION"]);
            std::vector<std::uint32_t> indices;
            if (prim.contains("indices")) {
                indices = read_indices(prim["indices"]);
            } else {
                indices.resize(positions.size());
                for (std::size_t i = 0; i < indices.size(); ++i)
                    indices[i] = static_cast<std::uint32_t>(i);
            }
            const int object = static_cast<int>(mesh_.object_names.size());
            mesh_.object_names.push_back(node_name);
            const int base = static_cast<int>(mesh_.vertices.size());
            for (const Vec3& p : positions) mesh_.vertices.push_back(world.transform_point(p));
            auto vert = [&](std::size_t i) {
                if (indices[i] >= positions.size())
                    throw ParseError("glb: index out of range in " + origin_);
                return base + static_cast<int>(indices[i]);
            };
            if (mode == 4) {
                for (std::size_t i = 0; i + 2 < indices.size(); i += 3)
                    push_triangle(mesh_, vert(i), vert(i + 1), vert(i + 2), object);
            } else if (mode == 5) {  // strip, alternate winding
                for (std::size_t i = 0; i + 2 < indices.size(); ++i) {
                    if (i % 2 == 0)
                        push_triangle(mesh_, vert(i), vert(i + 1), vert(i + 2), object);
                    else
                        push_triangle(mesh_, vert(i + 1), vert(i), vert(i + 2), object);
                }
            } else {  // fan
                for (std::size_t i = 1; i + 1 < indices.size(); ++i)
                    push_triangle(mesh_, vert(0), vert(i), vert(i + 1), object);
            }
        }
    }

    const std::uint8_t* accessor_base(const nlohmann::json& accessor, std::size_t elem_size,
                                      std::size_t count, std::size_t* stride) {
        const int view_index = accessor.value("bufferView", -1);
        if (view_index < 0) throw ParseError("glb: accessor without bufferView in " + origin_);
        const auto& view = gltf_.at("bufferViews").at(view_index);
        const std::size_t view_offset = view.value("byteOffset", 0u);
        const std::size_t acc_offset = accessor.value("byteOffset", 0u);
        *stride = view.value("byteStride", 0u);
        if (*stride == 0) *stride = elem_size;
        const std::size_t need = view_offset + acc_offset + (count ? (count - 1) * *stride + elem_size : 0);
        if (need > bin_.size()) throw ParseError("glb: accessor out of buffer range in " + origin_);
        return bin_.data() + view_offset + acc_offset;
    }

    std::vector<Vec3> read_positions(int accessor_index) {
        const auto& accessor = gltf_.at("accessors").at(accessor_index);
        if (accessor.value("componentType", 0) != 5126 || accessor.value("type", "") != "VEC3")
            throw ParseError("glb: POSITION accessor must be float VEC3 in " + origin_);
        const std::size_t count = accessor.value("count", 0u);
        std::size_t stride = 0;
        const std::uint8_t* base = accessor_base(accessor, 12, count, &stride);
        std::vector<Vec3> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            float xyz[3];
            std::memcpy(xyz, base + i * stride, 12);
            out[i] = {xyz[0], xyz[1], xyz[2]};
        }
        return out;
    }

    std::vector<std::uint32_t> read_indices(int accessor_index) {
        const auto& accessor = gltf_.at("accessors").at(accessor_index);
        const int ct = accessor.value("componentType", 0);
        const std::size_t count = accessor.value("count", 0u);
        const std::size_t elem = ct == 5125 ? 4 : (ct == 5123 ? 2 : 1);
        if (ct != 5121 && ct != 5123 && ct != 5125)
            throw ParseError("glb: unsupported index component type in " + origin_);
        std::size_t stride = 0;
        const std::uint8_t* base = accessor_base(accessor, elem, count, &stride);
        std::vector<std::uint32_t> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::uint8_t* p = base + i * stride;
            if (ct == 5125) {
                std::uint32_t v;
                std::memcpy(&v, p, 4);
                out[i] = v;
            } else if (ct == 5123) {
                std::uint16_t v;
                std::memcpy(&v, p, 2);
                out[i] = v;
            } else {
                out[i] = *p;
            }
        }
        return out;
    }

    nlohmann::json gltf_;
    std::vector<std::uint8_t> bin_;
    std::string origin_;
    TriMesh mesh_;
};

}  // namespace detail

inline TriMesh load_glb(const std::filesystem::path& path) {
    detail::GlbReader reader(detail::read_glb_chunks(path), path.string());
    return reader.read();
}

enum class MeshFormat { Obj, Glb };

inline MeshFormat mesh_format_from_path(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".obj") return MeshFormat::Obj;
    if (ext == ".glb" || ext == ".gltf") return MeshFormat::Glb;
    throw ParseError("unsupported mesh format: " + path.string());
}

inline TriMesh load_mesh(const std::filesystem::path& path) {
    return mesh_format_from_path(path) == MeshFormat::Obj ? load_obj(path) : load_glb(path);
}

inline TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
    return format == MeshFormat::Obj ? load_obj(path) : load_glb(path);
}

inline nlohmann::json aabb_to_json(const Aabb& box) {
    return {{"min", {box.min.x, box.min.y, box.min.z}},
            {"max", {box.max.x, box.max.y, box.max.z}}};
}

// Part manifest: part ids, triangle counts, AABBs and the normalization
// transform, plus the on-disk file each part was written to.
inline nlohmann::json make_part_manifest(const PartSet& parts, const SimilarityTransform& xf,
                                         const std::vector<std::string>& part_files = {}) {
    nlohmann::json j;
    j["normalization"] = {{"scale", xf.scale},
                          {"translation", {xf.translation.x, xf.translation.y, xf.translation.z}}};
    j["parts"] = nlohmann::json::array();
    for (std::size_t i = 0; i < parts.size(); ++i) {
        nlohmann::json p;
        p["id"] = parts[i].id;
        p["triangles"] = parts[i].mesh.triangles.size();
        p["aabb"] = aabb_to_json(compute_aabb(parts[i].mesh));
        if (i < part_files.size()) p["file"] = part_files[i];
        j["parts"].push_back(std::move(p));
    }
    return j;
}

}  // namespace eipart
