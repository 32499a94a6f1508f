#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "eipart/rng.hpp"
#include "eipart/voxel.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace eipart;
using testutil::TempDir;
using testutil::make_box;

namespace {

PartOccupancy from_cells(std::initializer_list<std::array<int, 3>> cells, int resolution,
                         int part_id = 0) {
    PartOccupancy p;
    p.part_id = part_id;
    p.resolution = resolution;
    for (const auto& c : cells) p.cells.push_back(pack_cell(c[0], c[1], c[2]));
    p.finalize();
    return p;
}

TriMesh random_triangle_soup(RandomStream& rng, int triangles) {
    TriMesh mesh;
    for (int i = 0; i < triangles; ++i) {
        const int base = static_cast<int>(mesh.vertices.size());
        for (int v = 0; v < 3; ++v)
            mesh.vertices.push_back(
                {rng.uniform(-0.95, 0.95), rng.uniform(-0.95, 0.95), rng.uniform(-0.95, 0.95)});
        mesh.triangles.push_back({base, base + 1, base + 2});
    }
    return mesh;
}

}  // namespace

TEST_CASE("voxelize: full cube at R=4 occupies exactly the 56-cell shell") {
    const PartOccupancy occ = voxelize(make_box({-1, -1, -1}, {1, 1, 1}), 4);
    CHECK(occ.size() == 56);
    CHECK(oracle::to_cell_set(occ) == oracle::voxelize_all_cells(make_box({-1, -1, -1}, {1, 1, 1}), 4));
    // none of the 2^3 interior cells
    for (CellKey key : occ.cells) {
        const CellIndex c = unpack_cell(key);
        CHECK((c.x == 0 || c.x == 3 || c.y == 0 || c.y == 3 || c.z == 0 || c.z == 3));
    }
}

TEST_CASE("voxelize: point-like sliver occupies its single cell") {
    TriMesh sliver;
    sliver.vertices = {{0.1, 0.1, 0.1}, {0.12, 0.1, 0.1}, {0.1, 0.12, 0.1}};
    sliver.triangles = {{0, 1, 2}};
    const PartOccupancy occ = voxelize(sliver, 4);
    CHECK(occ.size() == 1);
    CHECK(unpack_cell(occ.cells[0]) == CellIndex{2, 2, 2});
}

TEST_CASE("voxelize: axis-aligned square in the z=0 plane matches the oracle") {
    TriMesh square;
    square.vertices = {{-0.5, -0.5, 0}, {0.5, -0.5, 0}, {0.5, 0.5, 0}, {-0.5, 0.5, 0}};
    square.triangles = {{0, 1, 2}, {0, 2, 3}};
    const PartOccupancy occ = voxelize(square, 4);
    CHECK(oracle::to_cell_set(occ) == oracle::voxelize_all_cells(square, 4));
    // z=0 sits on the boundary between layers 1 and 2; conservative
    // (touching counts) semantics occupies both
    for (CellKey key : occ.cells) {
        const CellIndex c = unpack_cell(key);
        CHECK((c.z == 1 || c.z == 2));
    }
}

TEST_CASE("voxelize: random soups equal the exhaustive oracle at R in {4,8,16}") {
    RandomStream rng(1234);
    for (int fixture = 0; fixture < 12; ++fixture) {
        const TriMesh mesh = random_triangle_soup(rng, 1 + fixture * 2);
        for (int resolution : {4, 8, 16}) {
            const PartOccupancy occ = voxelize(mesh, resolution);
            CHECK(oracle::to_cell_set(occ) == oracle::voxelize_all_cells(mesh, resolution));
        }
    }
}

TEST_CASE("voxelize: errors") {
    CHECK_THROWS_AS(voxelize(make_box({-1, -1, -1}, {1, 1, 1}), 1), Error);
    CHECK_THROWS_AS(voxelize(TriMesh{}, 8), EmptyMesh);
}

TEST_CASE("overlap: identity, disjoint AABBs, shifted cubes vs set oracle") {
    const PartOccupancy cube = voxelize(make_box({-0.6, -0.6, -0.6}, {0.2, 0.2, 0.2}), 8);
    CHECK(overlap(cube, cube) == cube.cells);
    CHECK(overlaps(cube, cube));

    const PartOccupancy far_cube = voxelize(make_box({0.6, 0.6, 0.6}, {0.9, 0.9, 0.9}), 8);
    CHECK(overlap(cube, far_cube).empty());

    const PartOccupancy shifted = translate_cells(cube, {2.0 / 8 * 2, 0, 0});
    std::set<CellKey> expected;
    for (CellKey k : cube.cells)
        if (std::binary_search(shifted.cells.begin(), shifted.cells.end(), k)) expected.insert(k);
    const auto got = overlap(cube, shifted);
    CHECK(std::set<CellKey>(got.begin(), got.end()) == expected);
    CHECK(!expected.empty());

    // symmetry
    CHECK(overlap(shifted, cube) == got);

    PartOccupancy other_res = cube;
    other_res.resolution = 16;
    CHECK_THROWS_AS(overlap(cube, other_res), ResolutionMismatch);
}

TEST_CASE("translate_cells: identity, lattice shift, round-to-nearest") {
    const PartOccupancy cube = voxelize(make_box({-0.4, -0.4, -0.4}, {0.4, 0.4, 0.4}), 8);
    const double cell = cell_size(8);

    const PartOccupancy same = translate_cells(cube, {0, 0, 0});
    CHECK(same.cells == cube.cells);
    CHECK(same.clipped == 0);

    const PartOccupancy one = translate_cells(cube, {cell, 0, 0});
    REQUIRE(one.size() == cube.size());
    for (std::size_t i = 0; i < cube.size(); ++i) {
        const CellIndex a = unpack_cell(cube.cells[i]);
        const CellIndex b = unpack_cell(one.cells[i]);
        CHECK(b.x == a.x + 1);
        CHECK(b.y == a.y);
        CHECK(b.z == a.z);
    }

    // 1.4 cells rounds to a single-cell shift
    const PartOccupancy frac = translate_cells(cube, {1.4 * cell, 0, 0});
    CHECK(frac.cells == one.cells);

    // +v then -v round-trips when v is whole cells and nothing clipped
    const Vec3 v{2 * cell, -1 * cell, 2 * cell};
    const PartOccupancy there = translate_cells(cube, v);
    REQUIRE(there.clipped == 0);
    const PartOccupancy back = translate_cells(there, -v);
    CHECK(back.cells == cube.cells);

    // clipping is tallied
    const PartOccupancy clipped = translate_cells(cube, {1.5, 0, 0});
    CHECK(clipped.clipped > 0);
    CHECK(clipped.size() + static_cast<std::size_t>(clipped.clipped) == cube.size());
}

TEST_CASE("morphological_close: k=0 identity, slit fill, solid cube fixed point") {
    // 5x5x3 plate with a 1-cell slit through the middle layer
    PartOccupancy plate;
    plate.resolution = 16;
    for (int x = 3; x <= 7; ++x)
        for (int y = 3; y <= 7; ++y)
            for (int z = 3; z <= 5; ++z)
                if (!(x == 5 && z == 4)) plate.cells.push_back(pack_cell(x, y, z));
    plate.finalize();
    CHECK(morphological_close(plate, 0).cells == plate.cells);

    // interior slit cells close with k=1 (the two end cells stay open: they
    // border free space); the dense-array oracle confirms the full set
    const PartOccupancy closed = morphological_close(plate, 1);
    for (int y = 4; y <= 6; ++y) CHECK(closed.contains(pack_cell(5, y, 4)));
    CHECK(!closed.contains(pack_cell(5, 3, 4)));
    CHECK(!closed.contains(pack_cell(5, 7, 4)));
    for (CellKey key : plate.cells) CHECK(closed.contains(key));
    auto plate_dense = oracle::DenseGrid::from(plate, 16).dilate().erode();
    CHECK(oracle::to_cell_set(closed) == plate_dense.to_set());

    // solid cube away from borders: dilation then erosion restores it exactly
    PartOccupancy solid;
    solid.resolution = 8;
    for (int x = 2; x <= 5; ++x)
        for (int y = 2; y <= 5; ++y)
            for (int z = 2; z <= 5; ++z) solid.cells.push_back(pack_cell(x, y, z));
    solid.finalize();
    const PartOccupancy closed_solid = morphological_close(solid, 1);
    CHECK(closed_solid.cells == solid.cells);

    // dense-array oracle agrees on the same fixture
    auto dense = oracle::DenseGrid::from(solid, 8).dilate().erode();
    CHECK(oracle::to_cell_set(closed_solid) == dense.to_set());
}

TEST_CASE("morphological_close: extensive on cavities, idempotent when closed") {
    // hollow box shell: 4x4x4 block missing its single interior cell
    PartOccupancy shell;
    shell.resolution = 16;
    for (int x = 4; x <= 6; ++x)
        for (int y = 4; y <= 6; ++y)
            for (int z = 4; z <= 6; ++z)
                if (!(x == 5 && y == 5 && z == 5)) shell.cells.push_back(pack_cell(x, y, z));
    shell.finalize();
    const PartOccupancy closed = morphological_close(shell, 1);
    CHECK(closed.size() >= shell.size());
    CHECK(closed.contains(pack_cell(5, 5, 5)));
    const PartOccupancy twice = morphological_close(closed, 1);
    CHECK(twice.cells == closed.cells);
}

TEST_CASE("voxels file: round trip, ordering, and parse errors") {
    TempDir tmp;
    VoxelScene scene;
    scene.resolution = 16;
    scene.parts.push_back(from_cells({{3, 2, 1}, {1, 2, 3}, {1, 2, 4}}, 16, 7));
    scene.parts.push_back(from_cells({{1, 2, 3}, {0, 0, 0}}, 16, 2));
    write_voxels(scene, tmp / "scene.voxels");

    const std::string text = testutil::read_file(tmp / "scene.voxels");
    CHECK(text.substr(0, 22) == "eipart-voxels v1 R=16\n");
    // lexicographic (x, y, z, part) ordering across parts
    CHECK(text.find("0 0 0 2\n") < text.find("1 2 3 2\n"));
    CHECK(text.find("1 2 3 2\n") < text.find("1 2 3 7\n"));
    CHECK(text.find("1 2 3 7\n") < text.find("1 2 4 7\n"));
    CHECK(text.find("1 2 4 7\n") < text.find("3 2 1 7\n"));

    const VoxelScene back = read_voxels(tmp / "scene.voxels");
    CHECK(back.resolution == 16);
    REQUIRE(back.parts.size() == 2);
    CHECK(back.parts[0].part_id == 2);  // grouped by ascending part id
    CHECK(back.parts[1].part_id == 7);
    CHECK(back.parts[1].cells == scene.parts[0].cells);

    // write -> read -> write is byte-stable
    std::ostringstream again;
    write_voxels(back, again);
    CHECK(again.str() == text);

    std::istringstream bad_header("whatever v9\n1 2 3 0\n");
    CHECK_THROWS_AS(read_voxels(bad_header), ParseError);
    std::istringstream out_of_range("eipart-voxels v1 R=4\n9 0 0 0\n");
    CHECK_THROWS_AS(read_voxels(out_of_range), ParseError);
    std::istringstream duplicate("eipart-voxels v1 R=4\n1 0 0 0\n1 0 0 0\n");
    CHECK_THROWS_AS(read_voxels(duplicate), ParseError);
}
