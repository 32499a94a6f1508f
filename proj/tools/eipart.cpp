// eipart CLI: part curation, six-view rendering, voxelization, explosion,
// completion, implosion and evaluation, plus the end-to-end pipeline with a
// resumable manifest.
//
// Exit codes: 0 success, 1 validation error, 2 stage failure, 3 external
// completer failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eipart/pipeline.hpp"

namespace fs = std::filesystem;
using namespace eipart;

namespace {

double parse_auto(const std::string& value, const char* name) {
    if (value == "auto" || value.empty()) return 0.0;
    try {
        const double v = std::stod(value);
        if (v <= 0.0) throw ValidationError(std::string(name) + " must be > 0 or 'auto'");
        return v;
    } catch (const std::invalid_argument&) {
        throw ValidationError(std::string("cannot parse ") + name + ": " + value);
    }
}

MirrorPlane parse_plane(const std::string& plane) {
    if (plane == "x") return MirrorPlane::X;
    if (plane == "y") return MirrorPlane::Y;
    if (plane == "z") return MirrorPlane::Z;
    throw ValidationError("plane must be one of x, y, z");
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::vector<fs::path> mesh_files_in(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".obj" || ext == ".glb" || ext == ".gltf") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

// Loads an evaluation side: a .voxels scene, a directory of mesh files (one
// part per file), or a single mesh file (one part).
struct EvalSide {
    bool is_voxels = false;
    VoxelScene scene;
    PartSet parts;
};

EvalSide load_eval_side(const fs::path& path) {
    EvalSide side;
    if (fs::is_regular_file(path) && path.extension() == ".voxels") {
        side.is_voxels = true;
        side.scene = read_voxels(path);
        return side;
    }
    std::vector<fs::path> files;
    if (fs::is_directory(path))
        files = mesh_files_in(path);
    else
        files.push_back(path);
    if (files.empty()) throw ValidationError("no mesh files under " + path.string());
    for (std::size_t i = 0; i < files.size(); ++i) {
        MeshPart part;
        part.id = static_cast<int>(i);
        part.mesh = load_mesh(files[i]);
        side.parts.push_back(std::move(part));
    }
    return side;
}

int cmd_curate(const fs::path& input, const fs::path& out, int max_parts) {
    CurationConfig config;
    config.max_parts = max_parts;
    fs::create_directories(out);
    std::ofstream rejected(out / "rejected.jsonl");

    std::vector<fs::path> files =
        fs::is_directory(input) ? mesh_files_in(input) : std::vector<fs::path>{input};
    if (files.empty()) throw ValidationError("no mesh files under " + input.string());

    int accepted = 0;
    for (const fs::path& file : files) {
        const std::string stem = file.stem().string();
        try {
            const TriMesh raw = load_mesh(file);
            const int authored = static_cast<int>(std::max<std::size_t>(raw.object_names.size(), 1));
            if (filter_by_part_count(authored, max_parts) != FilterVerdict::Accept) {
                rejected << nlohmann::json{{"file", file.string()},
                                           {"reason", "part_count"},
                                           {"parts", authored}}
                                .dump()
                         << '\n';
                continue;
            }
            auto [normalized, xf] = normalize_to_unit_cube(raw);
            auto [curated, report] = merge_excess(split_connected_components(normalized), config);
            const fs::path obj_dir = out / stem;
            fs::create_directories(obj_dir);
            std::vector<std::string> part_files;
            for (const MeshPart& p : curated) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "part_%03d.obj", p.id);
                save_obj(p.mesh, obj_dir / buf);
                part_files.emplace_back(buf);
            }
            write_json_file(obj_dir / "parts.json", make_part_manifest(curated, xf, part_files));
            write_json_file(obj_dir / "curation_report.json", curation_report_to_json(report));
            ++accepted;
        } catch (const ParseError& e) {
            rejected << nlohmann::json{{"file", file.string()},
                                       {"reason", "parse_error"},
                                       {"detail", e.what()}}
                            .dump()
                     << '\n';
        } catch (const EmptyMesh&) {
            rejected << nlohmann::json{{"file", file.string()}, {"reason", "empty"}}.dump()
                     << '\n';
        }
    }
    std::cout << "curated " << accepted << "/" << files.size() << " objects into "
              << out.string() << "\n";
    return 0;
}

int cmd_render(const fs::path& input, const fs::path& out, int size, int bits, int jobs) {
    auto [mesh, xf] = normalize_to_unit_cube(load_mesh(input));
    const auto views = render_six(mesh, size, size, jobs);
    write_view_pngs(views, out, bits);
    std::cout << "wrote 6 views (" << size << "x" << size << ") to " << out.string() << "\n";
    return 0;
}

int cmd_voxelize(const fs::path& input, const fs::path& out, int resolution, bool normalize) {
    VoxelScene scene;
    scene.resolution = resolution;
    scene.allow_shared_cells = true;
    if (fs::is_directory(input)) {  // curated directory: parts are pre-normalized
        std::ifstream in(input / "parts.json");
        const auto manifest = nlohmann::json::parse(in, nullptr, false);
        if (manifest.is_discarded())
            throw ValidationError("no readable parts.json under " + input.string());
        for (const auto& p : manifest.value("parts", nlohmann::json::array()))
            scene.parts.push_back(voxelize(load_obj(input / p.value("file", "")),
                                           resolution, p.value("id", 0)));
    } else {
        TriMesh mesh = load_mesh(input);
        if (normalize) mesh = normalize_to_unit_cube(mesh).first;
        scene.parts.push_back(voxelize(mesh, resolution, 0));
    }
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_voxels(scene, out);
    std::size_t cells = 0;
    for (const auto& p : scene.parts) cells += p.size();
    std::cout << "wrote " << cells << " cells / " << scene.parts.size() << " parts at R="
              << resolution << " to " << out.string() << "\n";
    return 0;
}

int cmd_explode(const fs::path& input, const fs::path& out, const fs::path& record_path,
                int margin, const std::string& step_text) {
    const double step = parse_auto(step_text, "step");
    if (margin < 0) throw ValidationError("margin must be >= 0");
    const VoxelScene scene = read_voxels(input);
    const ExplodedState state = optimize_explosion(
        scene.parts, margin, step > 0.0 ? step : cell_size(scene.resolution));
    VoxelScene exploded;
    exploded.resolution = scene.resolution;
    exploded.parts = state.parts;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_voxels(exploded, out);
    save_record(state.record, record_path);
    double total = 0.0;
    for (const auto& e : state.record.parts) total += e.distance;
    std::cout << "exploded " << state.parts.size() << " parts, total displacement " << total
              << " world units\n";
    return 0;
}

int cmd_complete(const fs::path& input, const fs::path& record_path, const fs::path& out,
                 const CompleterSpec& spec, const fs::path& normal_png,
                 const fs::path& imploded_path) {
    CompletionRequest req;
    const VoxelScene scene = read_voxels(input);
    req.record = load_record(record_path);
    req.normal_front_png = normal_png;
    if (!imploded_path.empty()) {  // refinement-stage request
        req.stage = CompletionStage::Refinement;
        req.parts = read_voxels(imploded_path).parts;
        req.aux_exploded = scene.parts;
    } else {
        req.parts = scene.parts;
    }
    const CompletionResult result = run_completer(spec, req);
    VoxelScene completed;
    completed.resolution = scene.resolution;
    completed.parts = result.parts;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_voxels(completed, out);
    std::size_t before = 0, after = 0;
    for (const auto& p : req.parts) before += p.size();
    for (const auto& p : result.parts) after += p.size();
    std::cout << "completer '" << result.completer_id << "' grew " << before << " -> " << after
              << " cells\n";
    return 0;
}

int cmd_implode(const fs::path& exploded_path, const fs::path& record_path, const fs::path& out,
                const fs::path& report_path, const std::string& alpha_text,
                const std::string& granularity, const std::string& stop_mode) {
    ExplodedState exploded;
    exploded.record = load_record(record_path);
    const VoxelScene completed = read_voxels(exploded_path);
    ImplodeConfig config;
    config.alpha = parse_auto(alpha_text, "alpha");
    config.granularity =
        granularity == "aabb" ? CollisionGranularity::Aabb : CollisionGranularity::Voxel;
    config.stop_mode = stop_mode == "global" ? StopMode::Global : StopMode::PerPart;
    const ImplodedState state = implode(exploded, completed.parts, config);
    VoxelScene scene;
    scene.resolution = completed.resolution;
    scene.parts = state.parts;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_voxels(scene, out);
    if (!report_path.empty()) write_json_file(report_path, implode_report_to_json(state));
    std::cout << "imploded in " << state.iterations << " iterations\n";
    return 0;
}

int cmd_evaluate(const fs::path& pred_path, const fs::path& gt_path, const fs::path& out,
                 EvalOptions opt, const std::string& norm_mode) {
    EvalSide pred = load_eval_side(pred_path);
    EvalSide gt = load_eval_side(gt_path);
    EvalResult result;
    if (pred.is_voxels != gt.is_voxels)
        throw ValidationError("pred and gt must both be meshes or both .voxels");
    if (pred.is_voxels) {
        result = evaluate_voxel_scenes(pred.scene, gt.scene, opt);
    } else {
        // shared: normalize GT and apply the same transform to the prediction
        const SimilarityTransform gt_xf = normalize_to_unit_cube(merge_parts(gt.parts)).second;
        const SimilarityTransform pred_xf =
            norm_mode == "per-object"
                ? normalize_to_unit_cube(merge_parts(pred.parts)).second
                : gt_xf;
        for (MeshPart& p : gt.parts)
            for (Vec3& v : p.mesh.vertices) v = gt_xf.apply(v);
        for (MeshPart& p : pred.parts)
            for (Vec3& v : p.mesh.vertices) v = pred_xf.apply(v);
        result = evaluate_meshes(pred.parts, gt.parts, opt);
    }
    const nlohmann::json j = eval_result_to_json(result, opt);
    if (!out.empty()) write_json_file(out, j);
    std::cout << "overall: Voxel IOU " << result.overall.voxel_iou << ", CD " << result.overall.cd
              << ", F-Score 0.1 " << result.overall.fscore_01 << "\n"
              << "part:    matched " << result.part_level.matched << ", Voxel IOU "
              << result.part_level.voxel_iou << ", CD " << result.part_level.cd << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"eipart: explode/implode part processing pipeline"};
    app.require_subcommand(1);

    // curate
    auto* curate = app.add_subcommand("curate", "filter, split and merge parts of mesh files");
    fs::path cur_in, cur_out;
    int cur_max_parts = 20;
    curate->add_option("--input", cur_in, "mesh file or directory")->required();
    curate->add_option("--out", cur_out, "output directory")->required();
    curate->add_option("--max-parts", cur_max_parts, "part-count threshold");

    // render
    auto* render = app.add_subcommand("render", "render six-view normal/CCM/mask maps");
    fs::path ren_in, ren_out;
    int ren_size = 512, ren_bits = 8, ren_jobs = 1;
    render->add_option("--input", ren_in, "mesh file")->required();
    render->add_option("--out", ren_out, "output directory")->required();
    render->add_option("--size", ren_size, "image size in pixels");
    render->add_option("--bits", ren_bits, "CCM bit depth (8 or 16)");
    render->add_option("--jobs", ren_jobs, "worker threads");

    // voxelize
    auto* voxelize = app.add_subcommand("voxelize", "surface-voxelize a mesh or curated parts");
    fs::path vox_in, vox_out;
    int vox_res = kDefaultResolution;
    bool vox_no_norm = false;
    voxelize->add_option("--input", vox_in, "mesh file or curated directory")->required();
    voxelize->add_option("--out", vox_out, "output .voxels path")->required();
    voxelize->add_option("--resolution", vox_res, "grid resolution");
    voxelize->add_flag("--no-normalize", vox_no_norm, "skip unit-cube normalization");

    // explode
    auto* explode = app.add_subcommand("explode", "optimize explosion vectors");
    fs::path exp_in, exp_out, exp_record;
    int exp_margin = kDefaultMarginCells;
    std::string exp_step = "auto";
    explode->add_option("--input", exp_in, "input .voxels")->required();
    explode->add_option("--out", exp_out, "exploded .voxels")->required();
    explode->add_option("--record", exp_record, "explosion record JSON")->required();
    explode->add_option("--margin", exp_margin, "separation margin in cells");
    explode->add_option("--step", exp_step, "step size in world units, or 'auto'");

    // complete
    auto* complete = app.add_subcommand("complete", "run a completer over exploded parts");
    fs::path com_in, com_record, com_out, com_normal, com_imploded;
    std::string com_method = "identity", com_cmd, com_plane = "x";
    int com_k = 1;
    double com_timeout = 120.0;
    complete->add_option("--input", com_in, "exploded .voxels")->required();
    complete->add_option("--record", com_record, "explosion record JSON")->required();
    complete->add_option("--out", com_out, "completed .voxels")->required();
    complete->add_option("--method", com_method, "identity | closing | mirror | external");
    complete->add_option("--cmd", com_cmd, "external completer command");
    complete->add_option("--k", com_k, "closing radius in cells");
    complete->add_option("--plane", com_plane, "mirror plane (x, y, z)");
    complete->add_option("--timeout", com_timeout, "external completer timeout in seconds");
    complete->add_option("--normal", com_normal, "frontal normal map PNG");
    complete->add_option("--imploded", com_imploded, "imploded .voxels (refinement stage)");

    // implode
    auto* implode_cmd = app.add_subcommand("implode", "collision-stopped implosion");
    fs::path imp_exploded, imp_record, imp_out, imp_report;
    std::string imp_alpha = "auto", imp_granularity = "voxel", imp_stop = "per-part";
    implode_cmd->add_option("--exploded", imp_exploded, "completed .voxels")->required();
    implode_cmd->add_option("--record", imp_record, "explosion record JSON")->required();
    implode_cmd->add_option("--out", imp_out, "imploded .voxels")->required();
    implode_cmd->add_option("--report", imp_report, "implosion report JSON");
    implode_cmd->add_option("--alpha", imp_alpha, "step size in world units, or 'auto'");
    implode_cmd->add_option("--granularity", imp_granularity, "collision test: voxel | aabb");
    implode_cmd->add_option("--stop-mode", imp_stop, "per-part | global");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "compare prediction against ground truth");
    fs::path eva_pred, eva_gt, eva_out;
    EvalOptions eva_opt;
    std::string eva_cd = "mean", eva_norm = "shared";
    evaluate->add_option("--pred", eva_pred, "predicted mesh dir / mesh / .voxels")->required();
    evaluate->add_option("--gt", eva_gt, "ground-truth mesh dir / mesh / .voxels")->required();
    evaluate->add_option("--out", eva_out, "report JSON path");
    evaluate->add_option("--points", eva_opt.points, "surface samples per cloud");
    evaluate->add_option("--seed", eva_opt.seed, "sampling seed");
    evaluate->add_option("--resolution", eva_opt.resolution, "voxel metric resolution");
    evaluate->add_option("--cd-convention", eva_cd, "mean | sum | squared");
    evaluate->add_option("--norm", eva_norm, "shared | per-object normalization");

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "run the full stage chain");
    fs::path pip_in, pip_out, pip_config;
    std::string pip_step = "", pip_alpha = "", pip_completer, pip_refiner, pip_cmd,
                pip_refiner_cmd, pip_cd;
    int pip_res = 0, pip_margin = -1, pip_max_parts = 0, pip_jobs = 0, pip_size = 0, pip_k = 0;
    std::uint64_t pip_seed = 0;
    bool pip_seed_set = false;
    pipeline->add_option("--input", pip_in, "input mesh (OBJ/GLB)")->required();
    pipeline->add_option("--out", pip_out, "working directory")->required();
    pipeline->add_option("--config", pip_config, "JSON config file");
    pipeline->add_option("--resolution", pip_res, "voxel resolution");
    pipeline->add_option("--margin", pip_margin, "explosion margin in cells");
    pipeline->add_option("--step", pip_step, "explosion step, world units or 'auto'");
    pipeline->add_option("--alpha", pip_alpha, "implosion step, world units or 'auto'");
    pipeline->add_option("--max-parts", pip_max_parts, "curation part threshold");
    pipeline->add_option("--completer", pip_completer, "identity | closing | mirror | external");
    pipeline->add_option("--completer-cmd", pip_cmd, "external completer command");
    pipeline->add_option("--closing-k", pip_k, "closing radius for the closing completer");
    pipeline->add_option("--refiner", pip_refiner, "refinement-stage completer method");
    pipeline->add_option("--refiner-cmd", pip_refiner_cmd, "external refiner command");
    pipeline->add_option("--cd-convention", pip_cd, "mean | sum | squared");
    pipeline->add_option("--jobs", pip_jobs, "worker thread cap");
    pipeline->add_option("--seed", pip_seed, "sampling seed")
        ->each([&](const std::string&) { pip_seed_set = true; });
    pipeline->add_option("--render-size", pip_size, "render image size");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "summarize a pipeline manifest");
    fs::path ins_manifest;
    inspect->add_option("manifest", ins_manifest, "manifest.json path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (curate->parsed()) return cmd_curate(cur_in, cur_out, cur_max_parts);
        if (render->parsed()) return cmd_render(ren_in, ren_out, ren_size, ren_bits, ren_jobs);
        if (voxelize->parsed()) return cmd_voxelize(vox_in, vox_out, vox_res, !vox_no_norm);
        if (explode->parsed())
            return cmd_explode(exp_in, exp_out, exp_record, exp_margin, exp_step);
        if (complete->parsed()) {
            CompleterSpec spec;
            spec.method = com_method;
            spec.closing_radius = com_k;
            spec.mirror_plane = parse_plane(com_plane);
            spec.command = com_cmd;
            spec.timeout_seconds = com_timeout;
            return cmd_complete(com_in, com_record, com_out, spec, com_normal, com_imploded);
        }
        if (implode_cmd->parsed())
            return cmd_implode(imp_exploded, imp_record, imp_out, imp_report, imp_alpha,
                               imp_granularity, imp_stop);
        if (evaluate->parsed()) {
            eva_opt.cd_convention = cd_convention_from_string(eva_cd);
            return cmd_evaluate(eva_pred, eva_gt, eva_out, eva_opt, eva_norm);
        }
        if (pipeline->parsed()) {
            PipelineConfig config;
            if (!pip_config.empty()) {
                std::ifstream in(pip_config);
                if (!in) throw ValidationError("cannot open config " + pip_config.string());
                const auto j = nlohmann::json::parse(in, nullptr, false);
                if (j.is_discarded())
                    throw ValidationError("malformed config " + pip_config.string());
                config = pipeline_config_from_json(j);
            }
            if (pip_res > 0) config.resolution = pip_res;
            if (pip_margin >= 0) config.margin_cells = pip_margin;
            if (!pip_step.empty()) config.step = parse_auto(pip_step, "step");
            if (!pip_alpha.empty()) config.alpha = parse_auto(pip_alpha, "alpha");
            if (pip_max_parts > 0) config.max_parts = pip_max_parts;
            if (!pip_completer.empty()) config.completer.method = pip_completer;
            if (!pip_cmd.empty()) config.completer.command = pip_cmd;
            if (pip_k > 0) config.completer.closing_radius = pip_k;
            if (!pip_refiner.empty()) config.refiner.method = pip_refiner;
            if (!pip_refiner_cmd.empty()) config.refiner.command = pip_refiner_cmd;
            if (!pip_cd.empty()) config.cd_convention = pip_cd;
            if (pip_jobs > 0) config.jobs = pip_jobs;
            if (pip_seed_set) config.seed = pip_seed;
            if (pip_size > 0) config.render_size = pip_size;
            const PipelineResult result = run_pipeline(pip_in, pip_out, config);
            if (result.evaluation.contains("overall"))
                std::cout << "pipeline done; overall Voxel IOU "
                          << result.evaluation["overall"].value("Voxel IOU", 0.0) << ", CD "
                          << result.evaluation["overall"].value("CD", 0.0) << "\n";
            return 0;
        }
        if (inspect->parsed()) {
            std::cout << inspect_manifest(ins_manifest);
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ExternalFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const StageFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
