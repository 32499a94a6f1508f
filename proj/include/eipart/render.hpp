// render.hpp -- orthographic software rasterizer for the six-view normal
// maps and canonical coordinate maps (CCMs).
//
// Each view projects the full [-1,1]^2 plane of its camera onto WxH pixels
// with a depth buffer (nearest surface wins; the lower triangle index wins on
// exact depth ties). Normal pixels encode the world-space geometric face
// normal as (n+1)/2; CCM pixels encode the canonical-space hit point as
// (p+1)/2. Background pixels are (0,0,0) with mask=0.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "eipart/mesh.hpp"
#include "eipart/png_io.hpp"

namespace eipart {

constexpr int kViewCount = 6;

// View order is fixed: front(+Z), back(-Z), left(+X), right(-X), top(+Y),
// bottom(-Y); "axis" is the side the camera sits on, looking at the origin.
// Opposite views share the up vector and negate right, so a convex mask and
// its opposite view's mask are horizontal mirror images.
struct ViewSpec {
    int index = 0;  // 0..5
    Vec3 right{1.0, 0.0, 0.0};
    Vec3 up{0.0, 1.0, 0.0};
    Vec3 forward{0.0, 0.0, -1.0};  // from camera toward the scene
    int width = 512;
    int height = 512;
    std::string name = "front";
};

inline ViewSpec make_view(int index, int width = 512, int height = 512) {
    static const struct {
        const char* name;
        Vec3 right, up, forward;
    } kTable[kViewCount] = {
        {"front", {1, 0, 0}, {0, 1, 0}, {0, 0, -1}},
        {"back", {-1, 0, 0}, {0, 1, 0}, {0, 0, 1}},
        {"left", {0, 0, -1}, {0, 1, 0}, {-1, 0, 0}},
        {"right", {0, 0, 1}, {0, 1, 0}, {1, 0, 0}},
        {"top", {1, 0, 0}, {0, 0, -1}, {0, -1, 0}},
        {"bottom", {-1, 0, 0}, {0, 0, -1}, {0, 1, 0}},
    };
    if (index < 0 || index >= kViewCount) throw Error("make_view: view index out of range");
    ViewSpec v;
    v.index = index;
    v.right = kTable[index].right;
    v.up = kTable[index].up;
    v.forward = kTable[index].forward;
    v.width = width;
    v.height = height;
    v.name = kTable[index].name;
    return v;
}

struct GBuffer {
    int width = 0;
    int height = 0;
    std::vector<Vec3> normal;   // (n+1)/2, rgb in [0,1]
    std::vector<Vec3> ccm;      // (p+1)/2, rgb in [0,1]
    std::vector<std::uint8_t> mask;
    std::vector<double> depth;  // view-space depth, +inf where mask=0

    std::size_t pixel(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

namespace detail {

// Vertices snap to a 1/256-pixel integer grid and edge functions evaluate in
// int64, so on-edge classification is exact and seams between triangles
// sharing an edge cannot open or double-fill.
constexpr int kSubpixelScale = 256;

// Top-left fill rule in y-down screen coordinates for positive-area
// triangles: a pixel exactly on an edge is covered only when that edge is a
// top edge (horizontal, pointing +x) or a left edge (pointing -y), so a
// shared edge is drawn exactly once.
inline bool edge_accepts(std::int64_t value, std::int64_t edge_x, std::int64_t edge_y) {
    if (value != 0) return value > 0;
    return (edge_y == 0 && edge_x > 0) || edge_y < 0;
}

}  // namespace detail

inline GBuffer render_view(const TriMesh& mesh, const ViewSpec& view) {
    GBuffer gbuf;
    gbuf.width = view.width;
    gbuf.height = view.height;
    const std::size_t count = static_cast<std::size_t>(view.width) * view.height;
    gbuf.normal.assign(count, Vec3{});
    gbuf.ccm.assign(count, Vec3{});
    gbuf.mask.assign(count, 0);
    gbuf.depth.assign(count, std::numeric_limits<double>::infinity());

    const double half_w = view.width / 2.0;
    const double half_h = view.height / 2.0;

    for (std::size_t ti = 0; ti < mesh.triangles.size(); ++ti) {
        const auto& tri = mesh.triangles[ti];
        Vec3 world[3] = {mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]};
        const Vec3 face_n = normalized(cross(world[1] - world[0], world[2] - world[0]));
        if (face_n == Vec3{}) continue;  // zero area
        const Vec3 normal_color = (face_n + Vec3{1.0, 1.0, 1.0}) * 0.5;

        std::int64_t xi[3], yi[3];
        double sd[3];
        for (int i = 0; i < 3; ++i) {
            // +up maps to smaller y so row 0 is the top of the image
            xi[i] = std::llround((dot(world[i], view.right) + 1.0) * half_w *
                                 detail::kSubpixelScale);
            yi[i] = std::llround((1.0 - dot(world[i], view.up)) * half_h *
                                 detail::kSubpixelScale);
            sd[i] = dot(world[i], view.forward);
        }
        std::int64_t area =
            (xi[1] - xi[0]) * (yi[2] - yi[0]) - (yi[1] - yi[0]) * (xi[2] - xi[0]);
        if (area == 0) continue;  // edge-on after snapping
        if (area < 0) {  // both windings are drawn; reorient to positive area
            std::swap(xi[1], xi[2]);
            std::swap(yi[1], yi[2]);
            std::swap(sd[1], sd[2]);
            std::swap(world[1], world[2]);
            area = -area;
        }
        const double inv_area = 1.0 / static_cast<double>(area);

        // pixel centers sit at (px + 0.5) * scale in snapped coordinates
        auto floor_div = [](std::int64_t a, std::int64_t b) {
            return a >= 0 ? a / b : -((-a + b - 1) / b);
        };
        auto first_pixel = [&](std::int64_t lo) {  // ceil((lo - half) / scale)
            return static_cast<int>(
                floor_div(lo - detail::kSubpixelScale / 2 + detail::kSubpixelScale - 1,
                          detail::kSubpixelScale));
        };
        auto last_pixel = [&](std::int64_t hi) {  // floor((hi - half) / scale)
            return static_cast<int>(floor_div(hi - detail::kSubpixelScale / 2,
                                              detail::kSubpixelScale));
        };
        const int min_x = std::max(0, first_pixel(std::min({xi[0], xi[1], xi[2]})));
        const int max_x = std::min(view.width - 1, last_pixel(std::max({xi[0], xi[1], xi[2]})));
        const int min_y = std::max(0, first_pixel(std::min({yi[0], yi[1], yi[2]})));
        const int max_y = std::min(view.height - 1, last_pixel(std::max({yi[0], yi[1], yi[2]})));

        for (int py = min_y; py <= max_y; ++py) {
            const std::int64_t cy = static_cast<std::int64_t>(py) * detail::kSubpixelScale +
                                    detail::kSubpixelScale / 2;
            for (int px = min_x; px <= max_x; ++px) {
                const std::int64_t cx = static_cast<std::int64_t>(px) * detail::kSubpixelScale +
                                        detail::kSubpixelScale / 2;
                const std::int64_t e12 =
                    (xi[2] - xi[1]) * (cy - yi[1]) - (yi[2] - yi[1]) * (cx - xi[1]);
                const std::int64_t e20 =
                    (xi[0] - xi[2]) * (cy - yi[2]) - (yi[0] - yi[2]) * (cx - xi[2]);
                const std::int64_t e01 =
                    (xi[1] - xi[0]) * (cy - yi[0]) - (yi[1] - yi[0]) * (cx - xi[0]);
                if (!detail::edge_accepts(e12, xi[2] - xi[1], yi[2] - yi[1]) ||
                    !detail::edge_accepts(e20, xi[0] - xi[2], yi[0] - yi[2]) ||
                    !detail::edge_accepts(e01, xi[1] - xi[0], yi[1] - yi[0]))
                    continue;
                const double b0 = e12 * inv_area;  // weight of vertex i is the
                const double b1 = e20 * inv_area;  // edge function opposite it
                const double b2 = e01 * inv_area;
                const double depth = b0 * sd[0] + b1 * sd[1] + b2 * sd[2];
                const std::size_t idx = gbuf.pixel(px, py);
                if (depth < gbuf.depth[idx]) {
                    gbuf.depth[idx] = depth;
                    gbuf.mask[idx] = 1;
                    gbuf.normal[idx] = normal_color;
                    const Vec3 hit = world[0] * b0 + world[1] * b1 + world[2] * b2;
                    gbuf.ccm[idx] = (hit + Vec3{1.0, 1.0, 1.0}) * 0.5;
                }
            }
        }
    }
    return gbuf;
}

// Six views in the fixed order; per-view rendering is independent, so the
// result is bit-identical whether or not the loop runs on worker threads.
inline std::vector<GBuffer> render_six(const TriMesh& mesh, int width = 512, int height = 512,
                                       int jobs = 1) {
    std::vector<GBuffer> views(kViewCount);
    if (jobs > 1) {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        const int workers = std::min(jobs, kViewCount);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int i = next++; i < kViewCount; i = next++)
                    views[i] = render_view(mesh, make_view(i, width, height));
            });
        for (std::thread& t : pool) t.join();
    } else {
        for (int i = 0; i < kViewCount; ++i)
            views[i] = render_view(mesh, make_view(i, width, height));
    }
    return views;
}

inline Image gbuffer_channel_image(const GBuffer& gbuf, const std::vector<Vec3>& rgb,
                                   int bit_depth) {
    Image img;
    img.width = gbuf.width;
    img.height = gbuf.height;
    img.channels = 4;  // alpha carries the hit mask
    img.bit_depth = bit_depth;
    img.samples.resize(static_cast<std::size_t>(gbuf.width) * gbuf.height * 4);
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        img.samples[i * 4 + 0] = rgb[i].x;
        img.samples[i * 4 + 1] = rgb[i].y;
        img.samples[i * 4 + 2] = rgb[i].z;
        img.samples[i * 4 + 3] = gbuf.mask[i] ? 1.0 : 0.0;
    }
    return img;
}

inline Image gbuffer_mask_image(const GBuffer& gbuf) {
    Image img;
    img.width = gbuf.width;
    img.height = gbuf.height;
    img.channels = 1;
    img.bit_depth = 8;
    img.samples.resize(static_cast<std::size_t>(gbuf.width) * gbuf.height);
    for (std::size_t i = 0; i < gbuf.mask.size(); ++i) img.samples[i] = gbuf.mask[i] ? 1.0 : 0.0;
    return img;
}

// Writes normal_<view>.png, ccm_<view>.png, mask_<view>.png for each view.
// Normals are 8-bit; CCMs use `ccm_bit_depth` (16 preserves coordinates to
// ~3e-5 of the normalized range).
inline void write_view_pngs(const std::vector<GBuffer>& views, const std::filesystem::path& dir,
                            int ccm_bit_depth = 8) {
    std::filesystem::create_directories(dir);
    for (int i = 0; i < static_cast<int>(views.size()); ++i) {
        const std::string name = make_view(i).name;
        write_png(gbuffer_channel_image(views[i], views[i].normal, 8),
                  dir / ("normal_" + name + ".png"));
        write_png(gbuffer_channel_image(views[i], views[i].ccm, ccm_bit_depth),
                  dir / ("ccm_" + name + ".png"));
        write_png(gbuffer_mask_image(views[i]), dir / ("mask_" + name + ".png"));
    }
}

}  // namespace eipart
