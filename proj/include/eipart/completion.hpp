// completion.hpp -- the plug-in boundary standing in for neural completion.
//
// A completer receives exploded (or, for the refinement stage, imploded)
// part voxels plus conditioning inputs and returns grown occupancies. Every
// completer obeys the observation-preserving contract: it may add cells but
// never drop an observed input cell, and part ids survive unchanged. That
// contract is what keeps the downstream implosion invariants checkable no
// matter what produced the completion.
#pragma once

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "eipart/explode.hpp"
#include "eipart/png_io.hpp"

namespace eipart {

struct ExternalFailure : Error {
    explicit ExternalFailure(const std::string& what) : Error(what) {}
};
struct ContractViolation : Error {
    explicit ContractViolation(const std::string& what, int part_id = -1)
        : Error(what), part_id(part_id) {}
    int part_id;
};

enum class CompletionStage { Completion, Refinement };

struct CompletionRequest {
    // The voxels being completed: exploded parts for the completion stage,
    // imploded parts for the refinement stage.
    std::vector<PartOccupancy> parts;
    ExplosionRecord record;
    std::filesystem::path normal_front_png;  // may be empty in tests
    CompletionStage stage = CompletionStage::Completion;
    // Refinement stage only: the completed exploded parts used as extra
    // conditioning in the exchange directory.
    std::vector<PartOccupancy> aux_exploded;
};

struct CompletionResult {
    std::vector<PartOccupancy> parts;
    std::string completer_id;
    nlohmann::json parameters;
};

inline void validate_request(const CompletionRequest& req) {
    if (req.parts.empty()) throw EmptyInput("completion: request has no parts");
    const int resolution = req.parts.front().resolution;
    for (const PartOccupancy& p : req.parts) {
        if (p.empty())
            throw EmptyInput("completion: part " + std::to_string(p.part_id) + " has no cells");
        if (p.resolution != resolution)
            throw ResolutionMismatch("completion: mixed resolutions in request");
    }
}

// Enforces the observation-preserving contract before a result is accepted.
inline CompletionResult make_result(const CompletionRequest& req,
                                    std::vector<PartOccupancy> completed,
                                    std::string completer_id, nlohmann::json parameters) {
    for (const PartOccupancy& in : req.parts) {
        const PartOccupancy* out = nullptr;
        for (const PartOccupancy& c : completed)
            if (c.part_id == in.part_id) { out = &c; break; }
        if (!out)
            throw ContractViolation("completion: output is missing part " +
                                    std::to_string(in.part_id), in.part_id);
        if (out->resolution != in.resolution)
            throw ContractViolation("completion: resolution changed for part " +
                                    std::to_string(in.part_id), in.part_id);
        if (!std::includes(out->cells.begin(), out->cells.end(),
                           in.cells.begin(), in.cells.end()))
            throw ContractViolation("completion: output drops input cells of part " +
                                    std::to_string(in.part_id), in.part_id);
    }
    if (completed.size() != req.parts.size())
        throw ContractViolation("completion: part count changed from " +
                                std::to_string(req.parts.size()) + " to " +
                                std::to_string(completed.size()));
    return {std::move(completed), std::move(completer_id), std::move(parameters)};
}

inline CompletionResult complete_identity(const CompletionRequest& req) {
    validate_request(req);
    return make_result(req, req.parts, "identity", nlohmann::json::object());
}

// Morphological closing per part; input cells are unioned back so the
// contract holds by construction. Parts are closed independently -- the
// operator never bridges across parts.
inline CompletionResult complete_closing(const CompletionRequest& req, int k) {
    validate_request(req);
    if (k < 1) throw Error("complete_closing: k must be >= 1");
    std::vector<PartOccupancy> completed;
    completed.reserve(req.parts.size());
    for (const PartOccupancy& p : req.parts) {
        PartOccupancy closed = morphological_close(p, k);
        std::vector<CellKey> merged;
        merged.reserve(closed.cells.size() + p.cells.size());
        std::set_union(closed.cells.begin(), closed.cells.end(), p.cells.begin(), p.cells.end(),
                       std::back_inserter(merged));
        closed.cells = std::move(merged);
        closed.finalize();
        completed.push_back(std::move(closed));
    }
    return make_result(req, std::move(completed), "closing", {{"k", k}});
}

enum class MirrorPlane { X, Y, Z };

inline const char* to_string(MirrorPlane p) {
    return p == MirrorPlane::X ? "x" : (p == MirrorPlane::Y ? "y" : "z");
}

// Unions each part with its reflection across the axis plane through the
// part's own voxel-AABB center. Reflections falling outside the grid are
// clipped; the original cells always remain.
inline CompletionResult complete_mirror(const CompletionRequest& req, MirrorPlane plane) {
    validate_request(req);
    const int axis = plane == MirrorPlane::X ? 0 : (plane == MirrorPlane::Y ? 1 : 2);
    std::vector<PartOccupancy> completed;
    completed.reserve(req.parts.size());
    for (const PartOccupancy& p : req.parts) {
        const int lo = axis == 0 ? p.aabb.lo.x : (axis == 1 ? p.aabb.lo.y : p.aabb.lo.z);
        const int hi = axis == 0 ? p.aabb.hi.x : (axis == 1 ? p.aabb.hi.y : p.aabb.hi.z);
        const int sum = lo + hi;  // reflected index = lo + hi - i, an exact involution
        PartOccupancy out = p;
        for (CellKey key : p.cells) {
            CellIndex c = unpack_cell(key);
            int* coord = axis == 0 ? &c.x : (axis == 1 ? &c.y : &c.z);
            *coord = sum - *coord;
            if (c.x < 0 || c.y < 0 || c.z < 0 || c.x >= p.resolution || c.y >= p.resolution ||
                c.z >= p.resolution)
                continue;
            out.cells.push_back(pack_cell(c.x, c.y, c.z));
        }
        out.finalize();
        completed.push_back(std::move(out));
    }
    return make_result(req, std::move(completed), "mirror", {{"plane", to_string(plane)}});
}

// ---- external completer: file exchange + subprocess ----

struct CommandOutcome {
    int exit_code = -1;
    bool timed_out = false;
    std::string stderr_tail;
};

// Runs `command <arg>` through /bin/sh with a kill-on-timeout deadline;
// stderr is captured to a file and its tail returned for error reporting.
inline CommandOutcome run_command(const std::string& command, const std::string& arg,
                                  double timeout_seconds,
                                  const std::filesystem::path& stderr_file) {
    const pid_t pid = fork();
    if (pid < 0) throw ExternalFailure("completion: fork failed: " + std::string(strerror(errno)));
    if (pid == 0) {
        setpgid(0, 0);
        const int fd = open(stderr_file.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd >= 0) {
            dup2(fd, STDERR_FILENO);
            close(fd);
        }
        // "$@" expansion appends the exchange directory safely
        execl("/bin/sh", "sh", "-c", (command + " \"$@\"").c_str(), "eipart-completer",
              arg.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }

    CommandOutcome outcome;
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
    int status = 0;
    for (;;) {
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) break;
        if (r < 0) throw ExternalFailure("completion: waitpid failed");
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            waitpid(pid, &status, 0);
            outcome.timed_out = true;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (WIFEXITED(status)) outcome.exit_code = WEXITSTATUS(status);

    std::ifstream err(stderr_file);
    if (err) {
        std::string text((std::istreambuf_iterator<char>(err)), std::istreambuf_iterator<char>());
        outcome.stderr_tail = text.size() > 2000 ? text.substr(text.size() - 2000) : text;
    }
    return outcome;
}

// Exchange directory layout consumed by external completers:
//   <dir>/request/exploded.voxels    completion subject (or conditioning, when refining)
//   <dir>/request/record.json
//   <dir>/request/normal_front.png
//   <dir>/request/imploded.voxels    refinement stage only: the voxels to refine
// and the expected reply <dir>/completed.voxels.
inline void write_exchange_request(const CompletionRequest& req,
                                   const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "request");
    VoxelScene exploded;
    exploded.resolution = req.parts.front().resolution;
    exploded.parts = req.stage == CompletionStage::Completion ? req.parts : req.aux_exploded;
    if (exploded.parts.empty()) exploded.parts = req.parts;
    write_voxels(exploded, dir / "request" / "exploded.voxels");
    save_record(req.record, dir / "request" / "record.json");
    if (!req.normal_front_png.empty() && fs::exists(req.normal_front_png)) {
        fs::copy_file(req.normal_front_png, dir / "request" / "normal_front.png",
                      fs::copy_options::overwrite_existing);
    } else {
        Image blank;
        blank.width = blank.height = 1;
        blank.channels = 4;
        blank.samples = {0.0, 0.0, 0.0, 0.0};
        write_png(blank, dir / "request" / "normal_front.png");
    }
    if (req.stage == CompletionStage::Refinement) {
        VoxelScene imploded;
        imploded.resolution = req.parts.front().resolution;
        imploded.parts = req.parts;
        write_voxels(imploded, dir / "request" / "imploded.voxels");
    }
}

inline CompletionResult complete_external(const CompletionRequest& req,
                                          const std::string& command, double timeout_seconds,
                                          std::filesystem::path exchange_dir = {}) {
    namespace fs = std::filesystem;
    validate_request(req);
    if (command.empty()) throw Error("complete_external: empty command");
    if (exchange_dir.empty()) {
        static std::atomic<unsigned> counter{0};
        exchange_dir = fs::temp_directory_path() /
                       ("eipart-exchange-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter++));
    }
    fs::create_directories(exchange_dir);
    write_exchange_request(req, exchange_dir);

    const CommandOutcome outcome =
        run_command(command, exchange_dir.string(), timeout_seconds, exchange_dir / "stderr.log");
    if (outcome.timed_out)
        throw ExternalFailure("completion: external command timed out after " +
                              std::to_string(timeout_seconds) + "s");
    if (outcome.exit_code != 0)
        throw ExternalFailure("completion: external command exited with " +
                              std::to_string(outcome.exit_code) +
                              (outcome.stderr_tail.empty() ? "" : "; stderr: " + outcome.stderr_tail));

    const fs::path reply = exchange_dir / "completed.voxels";
    if (!fs::exists(reply))
        throw ExternalFailure("completion: external command produced no completed.voxels");
    VoxelScene scene = read_voxels(reply);
    if (scene.resolution != req.parts.front().resolution)
        throw ContractViolation("completion: external output resolution " +
                                std::to_string(scene.resolution) + " differs from request");
    return make_result(req, std::move(scene.parts), "external",
                       {{"command", command}, {"timeout", timeout_seconds}});
}

// Parsed completer choice shared by the CLI and the pipeline.
struct CompleterSpec {
    std::string method = "identity";  // identity | closing | mirror | external
    int closing_radius = 1;
    MirrorPlane mirror_plane = MirrorPlane::X;
    std::string command;
    double timeout_seconds = 120.0;
};

inline CompletionResult run_completer(const CompleterSpec& spec, const CompletionRequest& req) {
    if (spec.method == "identity") return complete_identity(req);
    if (spec.method == "closing") return complete_closing(req, spec.closing_radius);
    if (spec.method == "mirror") return complete_mirror(req, spec.mirror_plane);
    if (spec.method == "external")
        return complete_external(req, spec.command, spec.timeout_seconds);
    throw Error("unknown completer method: " + spec.method);
}

}  // namespace eipart
