#include "app.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "gas/clients.hpp"
#include "gas/image.hpp"
#include "gas/metrics.hpp"
#include "gas/npy.hpp"
#include "gas/plan_io.hpp"
#include "gas/prep_pipeline.hpp"
#include "gas/remote_backend.hpp"
#include "gas/rng.hpp"
#include "gas/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gas::app {

namespace {

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::invalid_argument, "cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string file_sha256(const std::string& path) { return Sha256::hash_hex(read_file_bytes(path)); }

void write_text_file(const fs::path& path, const std::string& contents) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << contents;
    if (!out) throw Error(ErrorCode::invalid_argument, "cannot write file: " + path.string());
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool parse_bool(const std::string& value, const std::string& context) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw Error(ErrorCode::config, context + ": expected a boolean, got '" + value + "'");
}

std::vector<double> parse_double_list(const std::string& value, const std::string& context) {
    std::vector<double> out;
    std::istringstream in(value);
    std::string token;
    while (std::getline(in, token, ',')) {
        token = trim(token);
        if (token.empty()) continue;
        try {
            out.push_back(std::stod(token));
        } catch (const std::exception&) {
            throw Error(ErrorCode::config, context + ": expected numbers, got '" + token + "'");
        }
    }
    if (out.empty()) throw Error(ErrorCode::config, context + ": empty list");
    return out;
}

// Stage annotation so pipeline failures name where they happened.
template <class Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        std::cerr << "error [stage " << stage << ", " << error_code_name(e.code())
                  << "]: " << e.what() << "\n";
        throw;
    }
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace

void JobConfig::validate() const {
    gas.validate();
    opt.validate(make_schedule());
    if (backend != "analytic" && backend != "adapter") {
        throw Error(ErrorCode::config, "backend must be 'analytic' or 'adapter'");
    }
    if (backend == "adapter" && adapter_endpoint.empty()) {
        throw Error(ErrorCode::config, "backend 'adapter' needs adapter_endpoint");
    }
    if (!(analytic_variance >= 0.0)) {
        throw Error(ErrorCode::config, "analytic_variance must be >= 0");
    }
    if (!(detector_threshold >= 0.0 && detector_threshold <= 1.0)) {
        throw Error(ErrorCode::config, "detector_threshold must lie in [0, 1]");
    }
    if (latent_height < 0 || latent_width < 0 || latent_channels < 1 || latent_scale < 1) {
        throw Error(ErrorCode::config, "latent geometry values must be positive");
    }
    if (eval_dimension < 2) throw Error(ErrorCode::config, "eval_dimension must be >= 2");
    if (jobs < 1) throw Error(ErrorCode::config, "jobs must be >= 1");
}

DiffusionSchedule JobConfig::make_schedule() const {
    return DiffusionSchedule::linear_beta(schedule_timesteps, beta_start, beta_end);
}

void apply_config_line(JobConfig& config, const std::string& raw_line,
                       const std::string& context) {
    std::string line = raw_line;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) return;

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
        throw Error(ErrorCode::config, context + ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string where = context + " (" + key + ")";

    auto as_int = [&] {
        try {
            return std::stoi(value);
        } catch (const std::exception&) {
            throw Error(ErrorCode::config, where + ": expected an integer, got '" + value + "'");
        }
    };
    auto as_double = [&] {
        try {
            return std::stod(value);
        } catch (const std::exception&) {
            throw Error(ErrorCode::config, where + ": expected a number, got '" + value + "'");
        }
    };

    if (key == "omega") config.gas.omega = as_double();
    else if (key == "eta") config.gas.eta = as_double();
    else if (key == "alpha_bands") config.gas.alpha_values = parse_double_list(value, where);
    else if (key == "overlap_factor") config.gas.overlap_factor = as_double();
    else if (key == "area_threshold") config.gas.area_threshold = as_double();
    else if (key == "loss_weight") config.gas.loss_weight = as_double();
    else if (key == "max_steps") config.opt.max_steps = as_int();
    else if (key == "step_size") config.opt.step_size = as_double();
    else if (key == "t_min") config.opt.t_min = as_int();
    else if (key == "t_max") config.opt.t_max = as_int();
    else if (key == "seed") config.opt.seed = std::stoull(value);
    else if (key == "convergence_window") config.opt.convergence_window = as_int();
    else if (key == "convergence_tol") config.opt.convergence_tol = as_double();
    else if (key == "regularizer") config.opt.regularizer = value;
    else if (key == "checkpoint_every") config.opt.checkpoint_every = as_int();
    else if (key == "schedule_timesteps") config.schedule_timesteps = as_int();
    else if (key == "beta_start") config.beta_start = as_double();
    else if (key == "beta_end") config.beta_end = as_double();
    else if (key == "backend") config.backend = value;
    else if (key == "adapter_endpoint") config.adapter_endpoint = value;
    else if (key == "analytic_spec") config.analytic_spec_path = value;
    else if (key == "analytic_variance") config.analytic_variance = as_double();
    else if (key == "mock_clients") config.mock_clients = parse_bool(value, where);
    else if (key == "chat_endpoint") config.chat_endpoint = value;
    else if (key == "chat_model") config.chat_model = value;
    else if (key == "detector_endpoint") config.detector_endpoint = value;
    else if (key == "detector_threshold") config.detector_threshold = as_double();
    else if (key == "chat_fixture_dir") config.chat_fixture_dir = value;
    else if (key == "detector_fixture_dir") config.detector_fixture_dir = value;
    else if (key == "cache_dir") config.cache_dir = value;
    else if (key == "latent_height") config.latent_height = as_int();
    else if (key == "latent_width") config.latent_width = as_int();
    else if (key == "latent_channels") config.latent_channels = as_int();
    else if (key == "latent_scale") config.latent_scale = as_int();
    else if (key == "eval_dimension") config.eval_dimension = as_int();
    else if (key == "output_dir") config.output_dir = value;
    else if (key == "stable_manifest") config.stable_manifest = parse_bool(value, where);
    else if (key == "jobs") config.jobs = as_int();
    else throw Error(ErrorCode::config, context + ": unknown key '" + key + "'");
}

JobConfig load_config_file(const std::string& path, JobConfig base) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::config, "cannot open config file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        apply_config_line(base, line, path + ":" + std::to_string(line_no));
    }
    return base;
}

json config_snapshot(const JobConfig& config) {
    // Everything that affects results; run-location fields (output_dir,
    // review) are environmental and stay out so identical jobs hash alike.
    json snap;
    snap["omega"] = config.gas.omega;
    snap["eta"] = config.gas.eta;
    snap["alpha_bands"] = config.gas.alpha_values;
    snap["overlap_factor"] = config.gas.overlap_factor;
    snap["area_threshold"] = config.gas.area_threshold;
    snap["loss_weight"] = config.gas.loss_weight;
    snap["max_steps"] = config.opt.max_steps;
    snap["step_size"] = config.opt.step_size;
    snap["t_min"] = config.opt.t_min;
    snap["t_max"] = config.opt.t_max;
    snap["seed"] = config.opt.seed;
    snap["convergence_window"] = config.opt.convergence_window;
    snap["convergence_tol"] = config.opt.convergence_tol;
    snap["regularizer"] = config.opt.regularizer;
    snap["checkpoint_every"] = config.opt.checkpoint_every;
    snap["schedule_timesteps"] = config.schedule_timesteps;
    snap["beta_start"] = config.beta_start;
    snap["beta_end"] = config.beta_end;
    snap["backend"] = config.backend;
    snap["adapter_endpoint"] = config.adapter_endpoint;
    snap["analytic_spec"] = config.analytic_spec_path;
    snap["analytic_variance"] = config.analytic_variance;
    snap["mock_clients"] = config.mock_clients;
    snap["chat_endpoint"] = config.chat_endpoint;
    snap["chat_model"] = config.chat_model;
    snap["detector_endpoint"] = config.detector_endpoint;
    snap["detector_threshold"] = config.detector_threshold;
    snap["chat_fixture_dir"] = config.chat_fixture_dir;
    snap["detector_fixture_dir"] = config.detector_fixture_dir;
    snap["cache_dir"] = config.cache_dir;
    snap["latent_height"] = config.latent_height;
    snap["latent_width"] = config.latent_width;
    snap["latent_channels"] = config.latent_channels;
    snap["latent_scale"] = config.latent_scale;
    snap["eval_dimension"] = config.eval_dimension;
    snap["jobs"] = config.jobs;
    snap["stable_manifest"] = config.stable_manifest;
    return snap;
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::backend:
            return 3;
        case ErrorCode::diverged:
            return 4;
        case ErrorCode::parse:
        case ErrorCode::malformed_plan:
            return 5;
        default:
            return 2;
    }
}

double derived_condition_mean(const std::string& text) {
    const std::string hex = Sha256::hash_hex("condition-mean\n" + text);
    std::uint64_t v = 0;
    for (int i = 0; i < 16; ++i) {
        const char c = hex[i];
        v = (v << 4) | (c <= '9' ? std::uint64_t(c - '0') : std::uint64_t(c - 'a' + 10));
    }
    return double(v) / double(std::uint64_t(-1)) * 2.0 - 1.0;
}

namespace {

LatentGrid mean_from_json(const json& value, int channels, int height, int width,
                          const std::string& context) {
    if (value.is_number()) {
        return LatentGrid(channels, height, width, value.get<double>());
    }
    if (value.is_array()) {
        std::vector<double> values = value.get<std::vector<double>>();
        if (values.size() != std::size_t(channels) * height * width) {
            throw Error(ErrorCode::config,
                        context + ": flat mean array does not match latent shape");
        }
        return LatentGrid::from_values(channels, height, width, std::move(values));
    }
    throw Error(ErrorCode::config, context + ": mean must be a number or flat array");
}

}  // namespace

GaussianBackendSpec build_analytic_spec(const JobConfig& config, const EditPlan& plan,
                                        int channels, int height, int width) {
    GaussianBackendSpec spec;
    spec.variance = config.analytic_variance;
    spec.null_mean = LatentGrid(channels, height, width, 0.0);

    std::vector<std::string> texts = {plan.source_prompt, plan.target_prompt};
    for (const Subtask& sub : plan.subtasks) {
        texts.push_back(sub.source_phrase);
        texts.push_back(sub.target_phrase);
    }
    for (const std::string& text : texts) {
        spec.means.emplace(text,
                           LatentGrid(channels, height, width, derived_condition_mean(text)));
    }

    if (!config.analytic_spec_path.empty()) {
        json doc;
        try {
            doc = json::parse(read_file_bytes(config.analytic_spec_path));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::config,
                        "analytic spec is not valid JSON: " + std::string(e.what()));
        }
        if (doc.contains("variance")) spec.variance = doc["variance"].get<double>();
        if (doc.contains("null_mean")) {
            spec.null_mean = mean_from_json(doc["null_mean"], channels, height, width,
                                            "analytic spec null_mean");
        }
        if (doc.contains("means")) {
            for (const auto& [text, value] : doc["means"].items()) {
                spec.means.insert_or_assign(
                    text, mean_from_json(value, channels, height, width,
                                         "analytic spec mean for '" + text + "'"));
            }
        }
    }
    spec.validate();
    return spec;
}

std::string make_job_id(const std::string& command, const std::vector<std::string>& input_hashes,
                        const JobConfig& config) {
    Sha256 h;
    h.update(command + "\n");
    for (const std::string& hash : input_hashes) h.update(hash + "\n");
    h.update(config_snapshot(config).dump());
    return h.hex_digest().substr(0, 12);
}

namespace {

std::unique_ptr<ScoreBackend> make_backend(const JobConfig& config, const EditPlan& plan,
                                           int channels, int height, int width,
                                           const DiffusionSchedule& schedule) {
    if (config.backend == "adapter") {
        return std::make_unique<RemoteBackend>(config.adapter_endpoint);
    }
    return std::make_unique<AnalyticBackend>(
        build_analytic_spec(config, plan, channels, height, width), schedule);
}

std::shared_ptr<ChatClient> make_chat_client(const JobConfig& config) {
    if (config.mock_clients) {
        if (config.chat_fixture_dir.empty()) {
            throw Error(ErrorCode::config, "--mock-clients needs chat_fixture_dir");
        }
        return std::make_shared<ReplayChatClient>(config.chat_fixture_dir);
    }
    if (config.chat_endpoint.empty()) {
        throw Error(ErrorCode::config, "chat_endpoint is not configured (or use --mock-clients)");
    }
    std::shared_ptr<ChatClient> client =
        std::make_shared<HttpChatClient>(config.chat_endpoint, config.chat_model);
    if (!config.cache_dir.empty()) {
        client = std::make_shared<CachingChatClient>(config.cache_dir, client);
    }
    return client;
}

std::shared_ptr<DetectorClient> make_detector_client(const JobConfig& config) {
    if (config.mock_clients) {
        if (config.detector_fixture_dir.empty()) {
            throw Error(ErrorCode::config, "--mock-clients needs detector_fixture_dir");
        }
        return std::make_shared<ReplayDetectorClient>(config.detector_fixture_dir);
    }
    if (config.detector_endpoint.empty()) {
        throw Error(ErrorCode::config,
                    "detector_endpoint is not configured (or use --mock-clients)");
    }
    return std::make_shared<HttpDetectorClient>(config.detector_endpoint);
}

json report_to_json(const GradientReport& report) {
    json entry;
    entry["timestep"] = report.timestep;
    entry["alpha"] = report.alpha_used;
    entry["gamma"] = report.gamma;
    entry["grad_norm_inside"] = report.grad_norm_inside;
    entry["grad_norm_outside"] = report.grad_norm_outside;
    return entry;
}

json metrics_to_json(const MetricReport& report) {
    json doc;
    doc["clip_full"] = report.clip_full;
    doc["clip_masked"] = report.clip_masked;
    doc["lpips"] = report.lpips;
    json rows = json::array();
    for (const auto& [phrase, score] : report.per_subtask) {
        rows.push_back({{"phrase", phrase}, {"score", score}});
    }
    doc["per_subtask"] = rows;
    return doc;
}

// Writes manifest.json after verifying every artifact path exists relative to
// the run directory. Stable mode zeroes the wall-clock block.
void write_manifest(const fs::path& run_dir, json manifest, bool stable) {
    for (const auto& [name, rel] : manifest.at("artifacts").items()) {
        if (!fs::exists(run_dir / rel.get<std::string>())) {
            throw Error(ErrorCode::invalid_argument,
                        "manifest artifact missing on disk: " + rel.get<std::string>());
        }
    }
    if (stable) {
        for (auto& [key, value] : manifest.at("timings_ms").items()) value = 0.0;
    }
    write_text_file(run_dir / "manifest.json", manifest.dump(2) + "\n");
}

void print_subtask_table(const EditPlan& plan, std::ostream& out) {
    out << "  #  source phrase                 target phrase                 area  preserve  "
           "penalty\n";
    for (std::size_t k = 0; k < plan.subtasks.size(); ++k) {
        const Subtask& sub = plan.subtasks[k];
        char line[160];
        std::snprintf(line, sizeof(line), " %2zu  %-28.28s  %-28.28s  %4d  %8s  %7s\n", k + 1,
                      sub.source_phrase.c_str(), sub.target_phrase.c_str(), sub.mask.area(),
                      sub.preserve_form ? "yes" : "no", sub.penalty_eligible ? "yes" : "no");
        out << line;
    }
}

bool confirm_write(const EditPlan& plan) {
    print_subtask_table(plan, std::cout);
    std::cout << "Write this plan? [y/N]: " << std::flush;
    std::string line;
    std::getline(std::cin, line);
    return !line.empty() && (line[0] == 'y' || line[0] == 'Y');
}

struct PlanArgs {
    std::string image_path;
    std::string request_text;
    bool scenario = false;
};

EditPlan build_plan_for_request(const Image& image, const std::string& request_text,
                                const JobConfig& config, ChatClient& chat,
                                DetectorClient& detector) {
    UserRequest request{image, request_text};
    const PlanDraft draft =
        run_stage("decompose", [&] { return decompose_request(request, chat); });

    std::vector<std::string> phrases(draft.source_list.begin(), draft.source_list.end() - 1);
    const std::vector<GroundingBox> boxes = run_stage(
        "grounding", [&] { return ground_phrases(image, phrases, detector,
                                                 config.detector_threshold); });

    const int latent_h = config.latent_height > 0
                             ? config.latent_height
                             : std::max(1, image.height / config.latent_scale);
    const int latent_w = config.latent_width > 0 ? config.latent_width
                                                 : std::max(1, image.width / config.latent_scale);
    std::vector<Mask> masks;
    masks.reserve(boxes.size());
    for (const GroundingBox& box : boxes) {
        masks.push_back(run_stage("rasterize", [&] {
            return rasterize_mask(box, image.height, image.width, latent_h, latent_w);
        }));
    }
    return run_stage("assemble", [&] { return assemble_plan(draft, masks, config.gas, boxes); });
}

int cmd_plan(const PlanArgs& args, const JobConfig& config) {
    config.validate();
    const Stopwatch total;
    const Image image = load_ppm(args.image_path);
    auto chat = make_chat_client(config);
    auto detector = make_detector_client(config);

    const fs::path run_dir = config.output_dir;
    fs::create_directories(run_dir);

    std::vector<std::string> requests;
    if (args.scenario) {
        requests = run_stage("scenario", [&] { return generate_scenario(image, *chat); });
        std::string listing;
        for (const std::string& r : requests) listing += r + "\n";
        write_text_file(run_dir / "requests.txt", listing);
    } else {
        requests.push_back(args.request_text);
    }

    json artifacts;
    if (args.scenario) artifacts["requests"] = "requests.txt";
    std::vector<std::string> plan_files;
    for (std::size_t i = 0; i < requests.size(); ++i) {
        const EditPlan plan =
            build_plan_for_request(image, requests[i], config, *chat, *detector);
        if (config.review && !confirm_write(plan)) {
            std::cout << "aborted, nothing written\n";
            return 0;
        }
        const std::string name =
            args.scenario ? "plan_" + std::to_string(i + 1) + ".json" : "plan.json";
        save_plan((run_dir / name).string(), plan);
        plan_files.push_back(name);
        artifacts[args.scenario ? "plan_" + std::to_string(i + 1) : "plan"] = name;
        std::cout << "wrote " << (run_dir / name).string() << " (" << plan.subtasks.size()
                  << " subtasks)\n";
    }

    json manifest;
    manifest["command"] = "plan";
    manifest["inputs"] = {{"image", {{"path", args.image_path},
                                     {"sha256", image_sha256(image)}}},
                          {"request_text", args.request_text},
                          {"config_sha256", Sha256::hash_hex(config_snapshot(config).dump())}};
    manifest["job_id"] = make_job_id("plan", {image_sha256(image),
                                              Sha256::hash_hex(args.request_text)},
                                     config);
    manifest["seed"] = config.opt.seed;
    manifest["config"] = config_snapshot(config);
    manifest["artifacts"] = artifacts;
    manifest["timings_ms"] = {{"total", total.ms()}};
    write_manifest(run_dir, manifest, config.stable_manifest);
    return 0;
}

struct EditArgs {
    std::string latent_path;
    std::string image_path;
    std::vector<std::string> plan_paths;
};

int run_one_edit(const JobConfig& config, const std::string& plan_path,
                 const LatentGrid& z0, bool pixel_space, const std::string& input_hash,
                 const fs::path& run_dir, std::uint64_t job_seed) {
    const Stopwatch total;
    const EditPlan plan = load_plan(plan_path);
    if (plan.union_mask.height() != z0.height() || plan.union_mask.width() != z0.width()) {
        throw Error(ErrorCode::invalid_argument,
                    "plan latent_dims do not match the input latent shape");
    }
    const DiffusionSchedule schedule = config.make_schedule();
    const auto backend =
        make_backend(config, plan, z0.channels(), z0.height(), z0.width(), schedule);

    fs::create_directories(run_dir);
    OptimizerConfig opt = config.opt;
    opt.seed = job_seed;

    CheckpointFn checkpoint;
    if (opt.checkpoint_every > 0) {
        checkpoint = [&](int step, const LatentGrid& z,
                         const std::vector<GradientReport>& reports) {
            save_latent_npy((run_dir / ("checkpoint_" + std::to_string(step) + ".npy")).string(),
                            z);
            json step_reports = json::array();
            for (const GradientReport& r : reports) step_reports.push_back(report_to_json(r));
            write_text_file(run_dir / ("checkpoint_" + std::to_string(step) + "_reports.json"),
                            step_reports.dump(2) + "\n");
        };
    }

    json manifest;
    manifest["command"] = "edit";
    manifest["inputs"] = {{"latent_sha256", input_hash},
                          {"plan", {{"path", plan_path}, {"sha256", file_sha256(plan_path)}}},
                          {"config_sha256", Sha256::hash_hex(config_snapshot(config).dump())}};
    manifest["job_id"] = make_job_id("edit", {input_hash, file_sha256(plan_path)}, config);
    manifest["seed"] = job_seed;
    manifest["config"] = config_snapshot(config);

    try {
        const EditResult result =
            run_edit(z0, plan, *backend, schedule, config.gas, opt, checkpoint);

        save_latent_npy((run_dir / "final_latent.npy").string(), result.final_latent);
        json artifacts;
        artifacts["final_latent"] = "final_latent.npy";
        if (pixel_space) {
            save_ppm((run_dir / "output.ppm").string(), latent_to_image(result.final_latent));
            artifacts["output_image"] = "output.ppm";
        }
        json steps = json::array();
        for (const GradientReport& r : result.reports) steps.push_back(report_to_json(r));
        manifest["steps"] = std::move(steps);
        manifest["steps_run"] = result.steps_run;
        manifest["converged"] = result.converged;
        manifest["artifacts"] = std::move(artifacts);
        manifest["timings_ms"] = {{"total", total.ms()}};
        write_manifest(run_dir, manifest, config.stable_manifest);
        std::cout << "edit finished: steps=" << result.steps_run
                  << " converged=" << (result.converged ? "yes" : "no") << " -> "
                  << (run_dir / "final_latent.npy").string() << "\n";
        return 0;
    } catch (const DivergedError& e) {
        // Record the failure; checkpoints written so far stay on disk.
        manifest["diverged"] = true;
        manifest["diverged_step"] = e.step();
        manifest["artifacts"] = json::object();
        manifest["timings_ms"] = {{"total", total.ms()}};
        write_manifest(run_dir, manifest, config.stable_manifest);
        std::cerr << "error [stage optimize, diverged]: " << e.what() << " (step " << e.step()
                  << ")\n";
        return exit_code_for(ErrorCode::diverged);
    }
}

int cmd_edit(const EditArgs& args, const JobConfig& config) {
    config.validate();
    if (args.plan_paths.empty()) {
        throw Error(ErrorCode::invalid_argument, "edit needs at least one --plan");
    }
    if (args.latent_path.empty() == args.image_path.empty()) {
        throw Error(ErrorCode::invalid_argument, "edit needs exactly one of --latent or --image");
    }

    LatentGrid z0;
    bool pixel_space = false;
    std::string input_hash;
    if (!args.latent_path.empty()) {
        z0 = load_latent_npy(args.latent_path);
        input_hash = file_sha256(args.latent_path);
    } else {
        // Pixel-space operation: the RGB planes are the latent.
        const Image image = load_ppm(args.image_path);
        z0 = image_to_latent(image);
        pixel_space = true;
        input_hash = image_sha256(image);
    }

    const fs::path out_root = config.output_dir;
    if (args.plan_paths.size() == 1) {
        return run_one_edit(config, args.plan_paths[0], z0, pixel_space, input_hash, out_root,
                            config.opt.seed);
    }

    // Batch mode: one isolated run directory per plan, per-job RNG streams
    // derived from (seed, job id).
    std::vector<int> codes(args.plan_paths.size(), 0);
    std::atomic<std::size_t> next{0};
    const int workers = std::min<int>(config.jobs, int(args.plan_paths.size()));
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= args.plan_paths.size()) break;
            const std::string job_name =
                "job-" + std::to_string(i + 1) + "-" +
                fs::path(args.plan_paths[i]).stem().string();
            const std::uint64_t job_seed =
                SampleRng::for_job(config.opt.seed, job_name).next_u64();
            try {
                codes[i] = run_one_edit(config, args.plan_paths[i], z0, pixel_space, input_hash,
                                        out_root / job_name, job_seed);
            } catch (const Error& e) {
                std::cerr << "job " << job_name << " failed: " << e.what() << "\n";
                codes[i] = exit_code_for(e.code());
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    for (int code : codes) {
        if (code != 0) return code;
    }
    return 0;
}

struct EvalArgs {
    std::string source_path;
    std::string edited_path;
    std::string plan_path;
};

std::string format_metrics_table(const MetricReport& report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-24s %10.4f\n", "clip_full", report.clip_full);
    out << line;
    std::snprintf(line, sizeof(line), "%-24s %10.4f\n", "clip_masked", report.clip_masked);
    out << line;
    std::snprintf(line, sizeof(line), "%-24s %10.4f\n", "lpips", report.lpips);
    out << line;
    out << "per-subtask:\n";
    for (const auto& [phrase, score] : report.per_subtask) {
        std::snprintf(line, sizeof(line), "  %-30.30s %10.4f\n", phrase.c_str(), score);
        out << line;
    }
    return out.str();
}

int cmd_eval(const EvalArgs& args, const JobConfig& config) {
    config.validate();
    const Stopwatch total;
    const Image source = load_ppm(args.source_path);
    const Image edited = load_ppm(args.edited_path);
    if (!source.same_dims(edited)) {
        throw Error(ErrorCode::invalid_argument, "source and edited image dimensions differ");
    }
    const EditPlan plan = load_plan(args.plan_path);

    const HashEmbeddingBackend embedder(config.eval_dimension);
    const MeanAbsDiffPerceptual perceptual;
    const MetricReport report = evaluate_edit(edited, source, plan, embedder, perceptual);

    const fs::path run_dir = config.output_dir;
    fs::create_directories(run_dir);
    write_text_file(run_dir / "metrics.json", metrics_to_json(report).dump(2) + "\n");
    std::cout << format_metrics_table(report);

    json manifest;
    manifest["command"] = "eval";
    manifest["inputs"] = {{"source", {{"path", args.source_path},
                                      {"sha256", image_sha256(source)}}},
                          {"edited", {{"path", args.edited_path},
                                      {"sha256", image_sha256(edited)}}},
                          {"plan", {{"path", args.plan_path},
                                    {"sha256", file_sha256(args.plan_path)}}},
                          {"config_sha256", Sha256::hash_hex(config_snapshot(config).dump())}};
    manifest["job_id"] = make_job_id(
        "eval", {image_sha256(source), image_sha256(edited), file_sha256(args.plan_path)},
        config);
    manifest["seed"] = config.opt.seed;
    manifest["config"] = config_snapshot(config);
    manifest["metrics"] = metrics_to_json(report);
    manifest["artifacts"] = {{"metrics", "metrics.json"}};
    manifest["timings_ms"] = {{"total", total.ms()}};
    write_manifest(run_dir, manifest, config.stable_manifest);
    return 0;
}

// Built-in demo geometry for `gas synth`: 8x8 latent, two disjoint block
// subtasks pulling their regions toward +1 and -1.
struct SynthSetup {
    EditPlan plan;
    GaussianBackendSpec spec;

    SynthSetup(int channels, int height, int width) {
        const Mask m1 = Mask::rect(height, width, 0, 0, height / 2, width / 2);
        const Mask m2 = Mask::rect(height, width, height / 2, width / 2, height, width);
        Subtask s1{"the left object", "the bright left object", m1, false, false, std::nullopt};
        Subtask s2{"the right object", "the dark right object", m2, false, false, std::nullopt};
        plan = make_edit_plan("two flat objects", "one bright and one dark object", {s1, s2});

        spec.variance = 1.0;
        spec.null_mean = LatentGrid(channels, height, width, 0.0);
        const std::size_t plane = std::size_t(height) * width;
        LatentGrid target_field(channels, height, width, 0.0);
        LatentGrid bright(channels, height, width, 0.0);
        LatentGrid dark(channels, height, width, 0.0);
        for (int c = 0; c < channels; ++c) {
            for (std::size_t i = 0; i < plane; ++i) {
                if (m1.at_index(i)) {
                    bright[std::size_t(c) * plane + i] = 1.0;
                    target_field[std::size_t(c) * plane + i] = 1.0;
                }
                if (m2.at_index(i)) {
                    dark[std::size_t(c) * plane + i] = -1.0;
                    target_field[std::size_t(c) * plane + i] = -1.0;
                }
            }
        }
        spec.means.emplace("the left object", LatentGrid(channels, height, width, 0.0));
        spec.means.emplace("the right object", LatentGrid(channels, height, width, 0.0));
        spec.means.emplace("the bright left object", bright);
        spec.means.emplace("the dark right object", dark);
        spec.means.emplace("two flat objects", LatentGrid(channels, height, width, 0.0));
        spec.means.emplace("one bright and one dark object", target_field);
    }
};

json spec_to_json(const GaussianBackendSpec& spec) {
    json doc;
    doc["variance"] = spec.variance;
    doc["null_mean"] = std::vector<double>(spec.null_mean.values().begin(),
                                           spec.null_mean.values().end());
    json means;
    for (const auto& [text, grid] : spec.means) {
        means[text] = std::vector<double>(grid.values().begin(), grid.values().end());
    }
    doc["means"] = std::move(means);
    return doc;
}

int cmd_synth(const JobConfig& config) {
    config.validate();
    const Stopwatch total;
    const fs::path run_dir = config.output_dir;
    fs::create_directories(run_dir);

    const int channels = config.latent_channels;
    const int height = config.latent_height > 0 ? config.latent_height : 8;
    const int width = config.latent_width > 0 ? config.latent_width : 8;
    const DiffusionSchedule schedule = config.make_schedule();
    SynthSetup setup(channels, height, width);
    const AnalyticBackend backend(setup.spec, schedule);

    bool all_ok = true;
    const auto check = [&](const std::string& name, bool ok) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
        all_ok = all_ok && ok;
    };

    SampleRng rng(config.opt.seed + 1);
    {
        bool support_ok = true;
        for (int trial = 0; trial < 20 && support_ok; ++trial) {
            const int t = rng.uniform_int(config.opt.t_min, config.opt.t_max);
            LatentGrid z(channels, height, width), eps(channels, height, width);
            for (std::size_t i = 0; i < z.size(); ++i) {
                z[i] = rng.normal();
                eps[i] = rng.normal();
            }
            const auto [grad, report] = gas_gradient(backend, z, LatentGrid(channels, height,
                                                                            width, 0.0),
                                                     setup.plan, t, eps, schedule, config.gas);
            const std::size_t plane = grad.plane_size();
            for (int c = 0; c < channels && support_ok; ++c) {
                for (std::size_t i = 0; i < plane; ++i) {
                    if (!setup.plan.union_mask.at_index(i) &&
                        grad[std::size_t(c) * plane + i] != 0.0) {
                        support_ok = false;
                        break;
                    }
                }
            }
            support_ok = support_ok && report.grad_norm_outside == 0.0;
        }
        check("gradient support confined to the union mask", support_ok);
    }
    {
        // One full-mask subtask with the full-prompt weight off reduces to the
        // plain paired delta.
        Subtask sub{"the left object", "the bright left object", Mask(height, width, 1), false,
                    false, std::nullopt};
        const EditPlan single = make_edit_plan("two flat objects",
                                               "one bright and one dark object", {sub});
        GasConfig no_alpha = config.gas;
        no_alpha.alpha_values = {0.0};
        LatentGrid z(channels, height, width), z_ref(channels, height, width),
            eps(channels, height, width);
        for (std::size_t i = 0; i < z.size(); ++i) {
            z[i] = rng.normal();
            z_ref[i] = rng.normal();
            eps[i] = rng.normal();
        }
        const int t = rng.uniform_int(config.opt.t_min, config.opt.t_max);
        const auto [grad, report] =
            gas_gradient(backend, z, z_ref, single, t, eps, schedule, no_alpha);
        const LatentGrid delta = dds_gradient(backend, z, z_ref, t, eps,
                                              Condition::phrase("the bright left object"),
                                              Condition::phrase("the left object"), schedule,
                                              no_alpha);
        double max_diff = 0.0;
        for (std::size_t i = 0; i < grad.size(); ++i) {
            max_diff = std::max(max_diff, std::abs(grad[i] - delta[i]));
        }
        check("single full-mask subtask matches the paired delta", max_diff < 1e-12);
    }
    {
        LatentGrid z(channels, height, width), eps(channels, height, width);
        for (std::size_t i = 0; i < z.size(); ++i) {
            z[i] = rng.normal();
            eps[i] = rng.normal();
        }
        const int t = rng.uniform_int(config.opt.t_min, config.opt.t_max);
        const LatentGrid g =
            dds_gradient(backend, z, z, t, eps, Condition::phrase("the left object"),
                         Condition::phrase("the left object"), schedule, config.gas);
        check("matched source/target pair yields a zero gradient", g.max_abs() == 0.0);
    }
    {
        const Mask full(4, 4, 1);
        const LatentGrid zero(1, 4, 4, 0.0);
        const bool ok0 = null_text_penalty(zero, zero, full, config.gas.eta) == 0.0;
        const bool ok_half =
            std::abs(null_text_penalty(LatentGrid(1, 4, 4, 0.1), zero, full, 5.0) - 0.5) < 1e-12;
        const bool ok_clamp = null_text_penalty(LatentGrid(1, 4, 4, 0.5), zero, full, 5.0) == 1.0;
        check("null-text penalty spot values (0, 0.5, clamp at 1)", ok0 && ok_half && ok_clamp);
    }
    {
        bool banding_ok = true;
        const int bands = int(config.gas.alpha_values.size());
        for (int t = 0; t < schedule.num_timesteps(); t += 13) {
            const double alpha = alpha_for_timestep(t, schedule, config.gas);
            if (alpha != config.gas.alpha_values[snr_band(t, schedule, bands)]) {
                banding_ok = false;
                break;
            }
        }
        check("full-prompt weight follows the SNR band ladder", banding_ok);
    }

    // Demo optimization with per-step telemetry.
    const LatentGrid z0(channels, height, width, 0.0);
    const EditResult result =
        run_edit(z0, setup.plan, backend, schedule, config.gas, config.opt);

    std::ostringstream csv;
    csv << "step,timestep,alpha";
    for (std::size_t k = 0; k < setup.plan.subtasks.size(); ++k) csv << ",gamma_" << (k + 1);
    csv << ",grad_norm_inside,grad_norm_outside\n";
    for (std::size_t i = 0; i < result.reports.size(); ++i) {
        const GradientReport& r = result.reports[i];
        csv << i << "," << r.timestep << "," << r.alpha_used;
        for (double g : r.gamma) csv << "," << g;
        csv << "," << r.grad_norm_inside << "," << r.grad_norm_outside << "\n";
    }
    write_text_file(run_dir / "reports.csv", csv.str());
    save_latent_npy((run_dir / "final_latent.npy").string(), result.final_latent);
    save_latent_npy((run_dir / "demo_latent.npy").string(), z0);
    save_plan((run_dir / "demo_plan.json").string(), setup.plan);
    write_text_file(run_dir / "backend_spec.json", spec_to_json(setup.spec).dump() + "\n");

    // The analytic fixed point sits at omega * (target - source mean) inside
    // each mask; report how close the demo landed.
    const double expected = config.gas.omega;
    const std::size_t plane = std::size_t(height) * width;
    double mean1 = 0.0, mean2 = 0.0;
    const Mask& m1 = setup.plan.subtasks[0].mask;
    const Mask& m2 = setup.plan.subtasks[1].mask;
    for (int c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
            if (m1.at_index(i)) mean1 += result.final_latent[std::size_t(c) * plane + i];
            if (m2.at_index(i)) mean2 += result.final_latent[std::size_t(c) * plane + i];
        }
    }
    mean1 /= double(m1.area()) * channels;
    mean2 /= double(m2.area()) * channels;
    check("demo edit contracts onto the analytic fixed points",
          std::abs(mean1 - expected) < 0.1 && std::abs(mean2 + expected) < 0.1);
    std::cout << "demo region means: " << mean1 << " / " << mean2 << " (fixed points "
              << expected << " / " << -expected << "), steps=" << result.steps_run
              << ", converged=" << (result.converged ? "yes" : "no") << "\n";

    json manifest;
    manifest["command"] = "synth";
    manifest["inputs"] = {{"config_sha256", Sha256::hash_hex(config_snapshot(config).dump())}};
    manifest["job_id"] = make_job_id("synth", {}, config);
    manifest["seed"] = config.opt.seed;
    manifest["config"] = config_snapshot(config);
    manifest["steps_run"] = result.steps_run;
    manifest["converged"] = result.converged;
    manifest["artifacts"] = {{"reports_csv", "reports.csv"},
                             {"final_latent", "final_latent.npy"},
                             {"demo_latent", "demo_latent.npy"},
                             {"demo_plan", "demo_plan.json"},
                             {"backend_spec", "backend_spec.json"}};
    manifest["timings_ms"] = {{"total", total.ms()}};
    write_manifest(run_dir, manifest, config.stable_manifest);

    return all_ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App cli{"grounded multi-attribute image editing via masked score distillation"};
    cli.require_subcommand(1);

    std::string config_path;
    JobConfig flags;  // flag values land here, then overlay the file config
    std::uint64_t seed_flag = 0;
    int steps_flag = 0;
    double step_size_flag = 0.0, omega_flag = 0.0, eta_flag = 0.0;
    std::string alpha_bands_flag, backend_flag, out_dir_flag;
    std::string analytic_spec_flag, adapter_endpoint_flag;
    bool mock_flag = false, review_flag = false, stable_flag = false;
    int jobs_flag = 1;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key = value config file");
        cmd->add_option("--seed", seed_flag, "RNG seed");
        cmd->add_option("--steps", steps_flag, "optimization step budget");
        cmd->add_option("--step-size", step_size_flag, "SGD step size");
        cmd->add_option("--omega", omega_flag, "guidance weight");
        cmd->add_option("--eta", eta_flag, "null-text penalty range");
        cmd->add_option("--alpha-bands", alpha_bands_flag,
                        "comma-separated full-prompt weights per SNR band");
        cmd->add_option("--backend", backend_flag, "score backend: analytic | adapter");
        cmd->add_option("--analytic-spec", analytic_spec_flag,
                        "JSON file with per-condition means for the analytic backend");
        cmd->add_option("--adapter-endpoint", adapter_endpoint_flag,
                        "base URL of a remote predict_noise service");
        cmd->add_option("--out-dir", out_dir_flag, "run output directory");
        cmd->add_flag("--mock-clients", mock_flag, "replay chat/detector fixtures");
        cmd->add_flag("--review", review_flag, "confirm plans interactively before writing");
        cmd->add_flag("--stable-manifest", stable_flag,
                      "zero wall-clock timings for byte-stable manifests");
        cmd->add_option("--jobs", jobs_flag, "parallel jobs in batch mode");
    };

    // plan
    auto* plan_cmd = cli.add_subcommand("plan", "decompose a request and ground it into a plan");
    std::string plan_image;
    std::vector<std::string> plan_request_words;
    bool plan_scenario = false;
    plan_cmd->add_option("image", plan_image, "source image (binary PPM)")->required();
    plan_cmd->add_option("request", plan_request_words, "edit request text");
    plan_cmd->add_flag("--scenario", plan_scenario,
                       "generate three edit requests from the image instead");
    add_common(plan_cmd);

    // edit
    auto* edit_cmd = cli.add_subcommand("edit", "optimize a latent against a plan");
    std::string edit_latent, edit_image;
    std::vector<std::string> edit_plans;
    edit_cmd->add_option("--latent", edit_latent, "input latent (.npy, shape C,H,W)");
    edit_cmd->add_option("--image", edit_image, "input image (PPM) for pixel-space jobs");
    edit_cmd->add_option("--plan", edit_plans, "plan file(s); several run as a batch")
        ->required();
    add_common(edit_cmd);

    // eval
    auto* eval_cmd = cli.add_subcommand("eval", "score an edit against its plan");
    std::string eval_source, eval_edited, eval_plan;
    eval_cmd->add_option("source", eval_source, "source image (PPM)")->required();
    eval_cmd->add_option("edited", eval_edited, "edited image (PPM)")->required();
    eval_cmd->add_option("--plan", eval_plan, "plan file")->required();
    add_common(eval_cmd);

    // synth
    auto* synth_cmd =
        cli.add_subcommand("synth", "run the analytic self-checks and demo optimization");
    add_common(synth_cmd);

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        JobConfig config;
        if (cli.got_subcommand(synth_cmd)) {
            // Demo defaults chosen so the out-of-the-box run converges fast;
            // the config file and flags still override.
            config.gas.omega = 2.0;
            config.opt.step_size = 0.05;
            config.opt.seed = 7;
            config.latent_channels = 1;
        }
        if (!config_path.empty()) config = load_config_file(config_path, config);

        CLI::App* active = cli.get_subcommands().front();
        if (active->count("--seed")) config.opt.seed = seed_flag;
        if (active->count("--steps")) config.opt.max_steps = steps_flag;
        if (active->count("--step-size")) config.opt.step_size = step_size_flag;
        if (active->count("--omega")) config.gas.omega = omega_flag;
        if (active->count("--eta")) config.gas.eta = eta_flag;
        if (active->count("--alpha-bands")) {
            config.gas.alpha_values = parse_double_list(alpha_bands_flag, "--alpha-bands");
        }
        if (active->count("--backend")) config.backend = backend_flag;
        if (active->count("--analytic-spec")) config.analytic_spec_path = analytic_spec_flag;
        if (active->count("--adapter-endpoint")) config.adapter_endpoint = adapter_endpoint_flag;
        if (active->count("--out-dir")) config.output_dir = out_dir_flag;
        if (active->count("--mock-clients")) config.mock_clients = mock_flag;
        if (active->count("--review")) config.review = review_flag;
        if (active->count("--stable-manifest")) config.stable_manifest = stable_flag;
        if (active->count("--jobs")) config.jobs = jobs_flag;

        if (cli.got_subcommand(plan_cmd)) {
            PlanArgs args;
            args.image_path = plan_image;
            args.scenario = plan_scenario;
            for (const std::string& word : plan_request_words) {
                if (!args.request_text.empty()) args.request_text += " ";
                args.request_text += word;
            }
            if (!args.scenario && args.request_text.empty()) {
                throw Error(ErrorCode::invalid_argument,
                            "plan needs a request text or --scenario");
            }
            return cmd_plan(args, config);
        }
        if (cli.got_subcommand(edit_cmd)) {
            EditArgs args;
            args.latent_path = edit_latent;
            args.image_path = edit_image;
            args.plan_paths = edit_plans;
            return cmd_edit(args, config);
        }
        if (cli.got_subcommand(eval_cmd)) {
            EvalArgs args;
            args.source_path = eval_source;
            args.edited_path = eval_edited;
            args.plan_path = eval_plan;
            return cmd_eval(args, config);
        }
        return cmd_synth(config);
    } catch (const Error& e) {
        std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace gas::app
