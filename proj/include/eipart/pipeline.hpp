// pipeline.hpp -- wires curate -> render -> voxelize -> explode -> complete
// -> implode -> refine -> evaluate over a working directory, with an
// append-only manifest of content hashes so interrupted or tampered runs
// resume after the last hash-valid stage.
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "eipart/completion.hpp"
#include "eipart/curation.hpp"
#include "eipart/implode.hpp"
#include "eipart/mesh_io.hpp"
#include "eipart/metrics.hpp"
#include "eipart/render.hpp"

namespace eipart {

constexpr const char* kToolVersion = "0.1.0";

struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(what) {}
};
struct StageFailure : Error {
    StageFailure(const std::string& stage, const std::string& what)
        : Error("stage " + stage + ": " + what), stage(stage) {}
    std::string stage;
};
struct CorruptManifest : Error {
    explicit CorruptManifest(const std::string& what) : Error(what) {}
};

inline std::string sha256_hex(const void* data, std::size_t size) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

inline std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string() + " for hashing");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes.data(), bytes.size());
}

struct PipelineConfig {
    int resolution = kDefaultResolution;
    int margin_cells = kDefaultMarginCells;
    double step = 0.0;   // <= 0: one cell size
    double alpha = 0.0;  // <= 0: one cell size
    int max_parts = 20;
    CompleterSpec completer;            // completion stage
    CompleterSpec refiner;              // refinement stage
    std::size_t points = 100000;
    std::uint64_t seed = 7;
    int render_size = 512;
    int ccm_bit_depth = 8;
    std::string cd_convention = "mean";
    int jobs = 1;

    void validate() const {
        if (resolution < 2) throw ValidationError("resolution must be >= 2");
        if (margin_cells < 0) throw ValidationError("margin must be >= 0");
        if (max_parts < 1) throw ValidationError("max-parts must be >= 1");
        if (points < 1) throw ValidationError("points must be >= 1");
        if (render_size < 1) throw ValidationError("render size must be >= 1");
        if (ccm_bit_depth != 8 && ccm_bit_depth != 16)
            throw ValidationError("ccm bit depth must be 8 or 16");
        if (jobs < 1) throw ValidationError("jobs must be >= 1");
        if (step != 0.0 && step <= 0.0) throw ValidationError("step must be > 0 or auto");
        if (alpha != 0.0 && alpha <= 0.0) throw ValidationError("alpha must be > 0 or auto");
        cd_convention_from_string(cd_convention);
        for (const CompleterSpec* spec : {&completer, &refiner}) {
            if (spec->method != "identity" && spec->method != "closing" &&
                spec->method != "mirror" && spec->method != "external")
                throw ValidationError("unknown completer method: " + spec->method);
            if (spec->method == "external" && spec->command.empty())
                throw ValidationError("external completer requires a command");
            if (spec->method == "closing" && spec->closing_radius < 1)
                throw ValidationError("closing radius must be >= 1");
        }
    }

    double effective_step() const { return step > 0.0 ? step : cell_size(resolution); }
    double effective_alpha() const { return alpha > 0.0 ? alpha : cell_size(resolution); }
};

inline nlohmann::json completer_spec_to_json(const CompleterSpec& spec) {
    nlohmann::json j{{"method", spec.method}};
    if (spec.method == "closing") j["k"] = spec.closing_radius;
    if (spec.method == "mirror") j["plane"] = to_string(spec.mirror_plane);
    if (spec.method == "external") {
        j["command"] = spec.command;
        j["timeout"] = spec.timeout_seconds;
    }
    return j;
}

inline CompleterSpec completer_spec_from_json(const nlohmann::json& j) {
    CompleterSpec spec;
    spec.method = j.value("method", "identity");
    spec.closing_radius = j.value("k", 1);
    const std::string plane = j.value("plane", "x");
    spec.mirror_plane = plane == "y" ? MirrorPlane::Y
                                     : (plane == "z" ? MirrorPlane::Z : MirrorPlane::X);
    spec.command = j.value("command", "");
    spec.timeout_seconds = j.value("timeout", 120.0);
    return spec;
}

inline nlohmann::json pipeline_config_to_json(const PipelineConfig& c) {
    return {{"resolution", c.resolution},
            {"margin", c.margin_cells},
            {"step", c.step},
            {"alpha", c.alpha},
            {"max_parts", c.max_parts},
            {"completer", completer_spec_to_json(c.completer)},
            {"refiner", completer_spec_to_json(c.refiner)},
            {"points", c.points},
            {"seed", c.seed},
            {"render_size", c.render_size},
            {"ccm_bit_depth", c.ccm_bit_depth},
            {"cd_convention", c.cd_convention},
            {"jobs", c.jobs}};
}

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.resolution = j.value("resolution", c.resolution);
    c.margin_cells = j.value("margin", c.margin_cells);
    c.step = j.value("step", c.step);
    c.alpha = j.value("alpha", c.alpha);
    c.max_parts = j.value("max_parts", c.max_parts);
    if (j.contains("completer")) c.completer = completer_spec_from_json(j["completer"]);
    if (j.contains("refiner")) c.refiner = completer_spec_from_json(j["refiner"]);
    c.points = j.value("points", c.points);
    c.seed = j.value("seed", c.seed);
    c.render_size = j.value("render_size", c.render_size);
    c.ccm_bit_depth = j.value("ccm_bit_depth", c.ccm_bit_depth);
    c.cd_convention = j.value("cd_convention", c.cd_convention);
    c.jobs = j.value("jobs", c.jobs);
    return c;
}

class PipelineManifest {
public:
    explicit PipelineManifest(std::filesystem::path path) : path_(std::move(path)) {
        if (std::filesystem::exists(path_)) {
            std::ifstream in(path_);
            json_ = nlohmann::json::parse(in, nullptr, false);
            if (json_.is_discarded() || !json_.contains("entries") || !json_["entries"].is_array())
                throw CorruptManifest("manifest unreadable: " + path_.string());
        } else {
            json_ = {{"tool", "eipart"}, {"version", kToolVersion},
                     {"entries", nlohmann::json::array()}};
        }
    }

    const nlohmann::json& json() const { return json_; }

    // Latest completed entry for a stage, if any.
    const nlohmann::json* last_done(const std::string& stage) const {
        const auto& entries = json_["entries"];
        for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
            const std::string status = it->value("status", "");
            if (it->value("stage", "") == stage && (status == "done" || status == "resumed"))
                return &*it;
        }
        return nullptr;
    }

    void append(nlohmann::json entry) {
        json_["entries"].push_back(std::move(entry));
        save();
    }

private:
    void save() const {
        std::ofstream out(path_);
        if (!out) throw Error("cannot write " + path_.string());
        out << json_.dump(2) << '\n';
    }

    std::filesystem::path path_;
    nlohmann::json json_;
};

namespace detail {

inline nlohmann::json hash_files(const std::vector<std::filesystem::path>& paths) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : paths)
        arr.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
    return arr;
}

inline bool files_match(const nlohmann::json& recorded) {
    for (const auto& f : recorded) {
        const std::filesystem::path p = f.value("path", "");
        if (!std::filesystem::exists(p)) return false;
        if (sha256_file(p) != f.value("sha256", "")) return false;
    }
    return true;
}

}  // namespace detail

struct PipelineResult {
    std::filesystem::path out_dir;
    nlohmann::json manifest;
    nlohmann::json evaluation;
};

// Executes the stage chain over `out_dir`. Stages whose recorded inputs,
// config and outputs still hash-match are skipped; a failure is recorded in
// the manifest and rethrown, leaving prior outputs usable.
class PipelineRunner {
public:
    PipelineRunner(std::filesystem::path input, std::filesystem::path out_dir,
                   PipelineConfig config)
        : input_(std::move(input)),
          out_(std::move(out_dir)),
          config_(std::move(config)),
          manifest_((std::filesystem::create_directories(out_),
                     out_ / "manifest.json")) {
        config_.validate();
        if (!std::filesystem::exists(input_))
            throw ValidationError("input not found: " + input_.string());
    }

    PipelineResult run() {
        stage("curate", {{"max_parts", config_.max_parts}}, {input_}, curated_files(),
              [this] { run_curate(); });
        stage("render", {{"size", config_.render_size}, {"ccm_bit_depth", config_.ccm_bit_depth}},
              curated_files(), render_files(), [this] { run_render(); });
        stage("voxelize", {{"resolution", config_.resolution}}, curated_files(),
              {voxels_path()}, [this] { run_voxelize(); });
        stage("explode",
              {{"resolution", config_.resolution}, {"margin", config_.margin_cells},
               {"step", config_.effective_step()}},
              {voxels_path()}, {exploded_path(), record_path()}, [this] { run_explode(); });
        stage("complete", {{"completer", completer_spec_to_json(config_.completer)}},
              {exploded_path(), record_path(), normal_front_path()}, {completed_path()},
              [this] { run_complete(); });
        stage("implode", {{"alpha", config_.effective_alpha()}},
              {completed_path(), record_path()}, {imploded_path(), implode_report_path()},
              [this] { run_implode(); });
        stage("refine", {{"refiner", completer_spec_to_json(config_.refiner)}},
              {imploded_path(), completed_path(), record_path(), normal_front_path()},
              {refined_path()}, [this] { run_refine(); });
        stage("evaluate",
              {{"points", config_.points}, {"seed", config_.seed},
               {"cd_convention", config_.cd_convention}},
              {refined_path(), voxels_path()}, {eval_report_path()}, [this] { run_evaluate(); });

        PipelineResult result;
        result.out_dir = out_;
        result.manifest = manifest_.json();
        std::ifstream in(eval_report_path());
        result.evaluation = nlohmann::json::parse(in, nullptr, false);
        return result;
    }

    // Paths of the stage artifacts, shared with the CLI.
    std::filesystem::path curated_dir() const { return out_ / "curated"; }
    std::filesystem::path parts_manifest_path() const { return curated_dir() / "parts.json"; }
    std::filesystem::path voxels_path() const { return out_ / "voxels" / "parts.voxels"; }
    std::filesystem::path exploded_path() const { return out_ / "exploded" / "exploded.voxels"; }
    std::filesystem::path record_path() const { return out_ / "exploded" / "record.json"; }
    std::filesystem::path completed_path() const { return out_ / "completed" / "completed.voxels"; }
    std::filesystem::path imploded_path() const { return out_ / "imploded" / "imploded.voxels"; }
    std::filesystem::path implode_report_path() const {
        return out_ / "imploded" / "implode_report.json";
    }
    std::filesystem::path refined_path() const { return out_ / "refined" / "refined.voxels"; }
    std::filesystem::path eval_report_path() const { return out_ / "evaluation" / "report.json"; }
    std::filesystem::path render_dir() const { return out_ / "render"; }
    std::filesystem::path normal_front_path() const { return render_dir() / "normal_front.png"; }

private:
    std::vector<std::filesystem::path> curated_files() const {
        std::vector<std::filesystem::path> files;
        if (std::filesystem::exists(parts_manifest_path())) {
            std::ifstream in(parts_manifest_path());
            const auto j = nlohmann::json::parse(in, nullptr, false);
            if (!j.is_discarded())
                for (const auto& p : j.value("parts", nlohmann::json::array()))
                    files.push_back(curated_dir() / p.value("file", ""));
        }
        files.push_back(parts_manifest_path());
        files.push_back(curated_dir() / "curation_report.json");
        return files;
    }

    std::vector<std::filesystem::path> render_files() const {
        std::vector<std::filesystem::path> files;
        for (int i = 0; i < kViewCount; ++i) {
            const std::string name = make_view(i).name;
            for (const char* kind : {"normal_", "ccm_", "mask_"})
                files.push_back(render_dir() / (kind + name + ".png"));
        }
        return files;
    }

    void stage(const std::string& name, nlohmann::json stage_config,
               const std::vector<std::filesystem::path>& inputs,
               const std::vector<std::filesystem::path>& outputs,
               const std::function<void()>& body) {
        for (const auto& in : inputs)
            if (!std::filesystem::exists(in))
                throw StageFailure(name, "missing input " + in.string());
        const nlohmann::json input_hashes = detail::hash_files(inputs);

        if (const nlohmann::json* prev = manifest_.last_done(name)) {
            if ((*prev)["config"] == stage_config && (*prev)["inputs"] == input_hashes &&
                detail::files_match((*prev)["outputs"])) {
                manifest_.append({{"stage", name},
                                  {"status", "resumed"},
                                  {"wall_ms", 0},
                                  {"config", stage_config},
                                  {"inputs", input_hashes},
                                  {"outputs", (*prev)["outputs"]}});
                return;
            }
        }

        const auto start = std::chrono::steady_clock::now();
        try {
            body();
        } catch (const ExternalFailure&) {
            record_failure(name, stage_config, input_hashes, "external completer failed");
            throw;
        } catch (const std::exception& e) {
            record_failure(name, stage_config, input_hashes, e.what());
            throw StageFailure(name, e.what());
        }
        const auto wall =
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start).count();
        for (const auto& outp : outputs)
            if (!std::filesystem::exists(outp))
                throw StageFailure(name, "stage did not produce " + outp.string());
        manifest_.append({{"stage", name},
                          {"status", "done"},
                          {"wall_ms", wall},
                          {"config", stage_config},
                          {"inputs", input_hashes},
                          {"outputs", detail::hash_files(outputs)}});
    }

    void record_failure(const std::string& name, const nlohmann::json& stage_config,
                        const nlohmann::json& input_hashes, const std::string& error) {
        manifest_.append({{"stage", name},
                          {"status", "failed"},
                          {"config", stage_config},
                          {"inputs", input_hashes},
                          {"error", error}});
    }

    void run_curate() {
        const TriMesh raw = load_mesh(input_);
        const int authored = static_cast<int>(std::max<std::size_t>(raw.object_names.size(), 1));
        const FilterVerdict verdict = filter_by_part_count(authored, config_.max_parts);
        if (verdict != FilterVerdict::Accept)
            throw Error("input rejected: " + std::to_string(authored) +
                        " authored parts exceed max of " + std::to_string(config_.max_parts));
        auto [normalized, xf] = normalize_to_unit_cube(raw);
        PartSet parts = split_connected_components(normalized);
        CurationConfig cfg;
        cfg.max_parts = config_.max_parts;
        auto [curated, report] = merge_excess(std::move(parts), cfg);

        std::filesystem::create_directories(curated_dir());
        std::vector<std::string> files;
        for (const MeshPart& p : curated) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "part_%03d.obj", p.id);
            save_obj(p.mesh, curated_dir() / buf);
            files.emplace_back(buf);
        }
        write_json(parts_manifest_path(), make_part_manifest(curated, xf, files));
        write_json(curated_dir() / "curation_report.json", curation_report_to_json(report));
    }

    PartSet load_curated() const {
        std::ifstream in(parts_manifest_path());
        const auto j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw Error("curated manifest unreadable");
        PartSet parts;
        for (const auto& p : j.value("parts", nlohmann::json::array())) {
            MeshPart part;
            part.id = p.value("id", 0);
            part.mesh = load_obj(curated_dir() / p.value("file", ""));
            parts.push_back(std::move(part));
        }
        if (parts.empty()) throw Error("no curated parts");
        return parts;
    }

    void run_render() {
        const TriMesh merged = merge_parts(load_curated());
        const auto views = render_six(merged, config_.render_size, config_.render_size,
                                      config_.jobs);
        write_view_pngs(views, render_dir(), config_.ccm_bit_depth);
    }

    void run_voxelize() {
        const PartSet parts = load_curated();
        VoxelScene scene;
        scene.resolution = config_.resolution;
        scene.allow_shared_cells = true;  // converged state may share surface cells
        for (const MeshPart& p : parts)
            scene.parts.push_back(voxelize(p.mesh, config_.resolution, p.id));
        std::filesystem::create_directories(voxels_path().parent_path());
        write_voxels(scene, voxels_path());
    }

    void run_explode() {
        const VoxelScene scene = read_voxels(voxels_path());
        const ExplodedState state =
            optimize_explosion(scene.parts, config_.margin_cells, config_.effective_step());
        std::filesystem::create_directories(exploded_path().parent_path());
        VoxelScene exploded;
        exploded.resolution = scene.resolution;
        exploded.parts = state.parts;
        write_voxels(exploded, exploded_path());
        save_record(state.record, record_path());
    }

    void run_complete() {
        CompletionRequest req;
        req.parts = read_voxels(exploded_path()).parts;
        req.record = load_record(record_path());
        req.normal_front_png = normal_front_path();
        req.stage = CompletionStage::Completion;
        const CompletionResult result = run_completer(config_.completer, req);
        std::filesystem::create_directories(completed_path().parent_path());
        VoxelScene scene;
        scene.resolution = config_.resolution;
        scene.allow_shared_cells = true;  // completers may grow parts into contact
        scene.parts = result.parts;
        write_voxels(scene, completed_path());
    }

    void run_implode() {
        ExplodedState exploded;
        exploded.record = load_record(record_path());
        const VoxelScene completed = read_voxels(completed_path());
        ImplodeConfig cfg;
        cfg.alpha = config_.effective_alpha();
        const ImplodedState state = implode(exploded, completed.parts, cfg);
        std::filesystem::create_directories(imploded_path().parent_path());
        VoxelScene scene;
        scene.resolution = completed.resolution;
        scene.parts = state.parts;
        write_voxels(scene, imploded_path());
        write_json(implode_report_path(), implode_report_to_json(state));
    }

    void run_refine() {
        CompletionRequest req;
        req.parts = read_voxels(imploded_path()).parts;
        req.record = load_record(record_path());
        req.normal_front_png = normal_front_path();
        req.stage = CompletionStage::Refinement;
        req.aux_exploded = read_voxels(completed_path()).parts;
        const CompletionResult result = run_completer(config_.refiner, req);
        std::filesystem::create_directories(refined_path().parent_path());
        VoxelScene scene;
        scene.resolution = config_.resolution;
        scene.allow_shared_cells = true;
        scene.parts = result.parts;
        write_voxels(scene, refined_path());
    }

    void run_evaluate() {
        const VoxelScene pred = read_voxels(refined_path());
        const VoxelScene gt = read_voxels(voxels_path());
        EvalOptions opt;
        opt.points = config_.points;
        opt.seed = config_.seed;
        opt.resolution = config_.resolution;
        opt.cd_convention = cd_convention_from_string(config_.cd_convention);
        const EvalResult result = evaluate_voxel_scenes(pred, gt, opt);
        std::filesystem::create_directories(eval_report_path().parent_path());
        write_json(eval_report_path(), eval_result_to_json(result, opt));
    }

    static void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
        std::ofstream out(path);
        if (!out) throw Error("cannot write " + path.string());
        out << j.dump(2) << '\n';
    }

    std::filesystem::path input_;
    std::filesystem::path out_;
    PipelineConfig config_;
    PipelineManifest manifest_;
};

inline PipelineResult run_pipeline(const std::filesystem::path& input,
                                   const std::filesystem::path& out_dir,
                                   const PipelineConfig& config) {
    PipelineRunner runner(input, out_dir, config);
    return runner.run();
}

// Human-readable stage table for `inspect`: name, status, wall time, key
// config and output integrity.
inline std::string inspect_manifest(const std::filesystem::path& manifest_path) {
    if (!std::filesystem::exists(manifest_path))
        throw CorruptManifest("manifest not found: " + manifest_path.string());
    PipelineManifest manifest(manifest_path);
    std::string out;
    out += "stage      status   wall_ms  outputs   config\n";
    static const char* kStages[] = {"curate", "render", "voxelize", "explode",
                                    "complete", "implode", "refine", "evaluate"};
    for (const char* stage : kStages) {
        const nlohmann::json* entry = nullptr;
        std::string status = "pending";
        for (const auto& e : manifest.json()["entries"])
            if (e.value("stage", "") == stage) {
                entry = &e;
                status = e.value("status", "");
            }
        char line[384];
        if (!entry) {
            std::snprintf(line, sizeof(line), "%-10s %-8s %8s\n", stage, status.c_str(), "-");
            out += line;
            continue;
        }
        std::string config = entry->contains("config") ? (*entry)["config"].dump() : "";
        if (config.size() > 60) config = config.substr(0, 57) + "...";
        std::string note;
        if (status == "done" || status == "resumed") {
            for (const auto& f : (*entry)["outputs"]) {
                const std::filesystem::path p = f.value("path", "");
                if (!std::filesystem::exists(p) || sha256_file(p) != f.value("sha256", "")) {
                    note = "  HASH MISMATCH: " + p.string();
                    break;
                }
            }
        } else if (status == "failed") {
            note = "  error: " + entry->value("error", "");
        }
        std::snprintf(line, sizeof(line), "%-10s %-8s %8lld  %2zu files  %s%s\n", stage,
                      status.c_str(),
                      static_cast<long long>(entry->value("wall_ms", 0)),
                      entry->contains("outputs") ? (*entry)["outputs"].size() : 0,
                      config.c_str(), note.c_str());
        out += line;
    }
    return out;
}

}  // namespace eipart
