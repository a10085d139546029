#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gas/error.hpp"
#include "gas/grad_engine.hpp"
#include "gas/optimizer.hpp"
#include "gas/score_backend.hpp"

namespace gas::app {

// Merged view of every knob a job needs. Flags override the config file,
// which overrides these defaults; the fully resolved snapshot lands in the
// run manifest.
struct JobConfig {
    GasConfig gas;
    OptimizerConfig opt;

    int schedule_timesteps = 1000;
    double beta_start = 8.5e-4;
    double beta_end = 1.2e-2;

    std::string backend = "analytic";  // analytic | adapter
    std::string adapter_endpoint;
    std::string analytic_spec_path;  // optional JSON with per-condition means
    double analytic_variance = 1.0;

    bool mock_clients = false;
    std::string chat_endpoint;
    std::string chat_model = "gpt-4-vision-preview";
    std::string detector_endpoint;
    double detector_threshold = 0.25;
    std::string chat_fixture_dir;
    std::string detector_fixture_dir;
    std::string cache_dir;

    int latent_height = 0;  // 0 = pixel dims / latent_scale
    int latent_width = 0;
    int latent_channels = 4;
    int latent_scale = 8;

    int eval_dimension = 32;

    std::string output_dir = "gas-runs";
    bool stable_manifest = false;
    int jobs = 1;
    bool review = false;

    void validate() const;
    DiffusionSchedule make_schedule() const;
};

// Parses the documented `key = value` text format into `base`. Unknown keys
// and malformed values are configuration errors.
JobConfig load_config_file(const std::string& path, JobConfig base = {});
void apply_config_line(JobConfig& config, const std::string& line, const std::string& context);

// Complete resolved snapshot (no unresolved defaults), alphabetical keys.
nlohmann::json config_snapshot(const JobConfig& config);

// Exit-code contract: 0 success, 2 validation, 3 client/transport,
// 4 diverged, 5 parse.
int exit_code_for(ErrorCode code);

// Gaussian oracle construction for CLI jobs: per-condition means come from
// the optional spec JSON (scalar or flat array per condition) and otherwise
// derive deterministically from the condition text hash.
GaussianBackendSpec build_analytic_spec(const JobConfig& config, const EditPlan& plan,
                                        int channels, int height, int width);
double derived_condition_mean(const std::string& text);

// Deterministic job id from the command, input hashes and resolved config.
std::string make_job_id(const std::string& command, const std::vector<std::string>& input_hashes,
                        const JobConfig& config);

// Full command-line entry point.
int run_cli(int argc, char** argv);

}  // namespace gas::app
