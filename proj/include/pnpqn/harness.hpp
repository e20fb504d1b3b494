#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pnpqn/config.hpp"
#include "pnpqn/fidelity.hpp"
#include "pnpqn/regularizer.hpp"
#include "pnpqn/solvers.hpp"

namespace pnpqn {

// One row of the named hyperparameter presets. sigma255 is the noise level on
// the 0..255 scale. lambda scales the data term. For the accelerated-PGD
// family lipschitz_target pins L_f instead, and the step/extrapolation pair
// is derived from alpha at build time.
struct PresetValues {
    double alpha = 0.5;
    double lambda = 1.0;
    double sigma_d_factor = 1.0;    // sigma_d = factor * sigma (0..255 scale)
    double lipschitz_target = -1.0; // <= 0: lambda used as given
    bool found = false;
};

// family: table_1 (quasi-Newton defaults), table_2 (accelerated PGD),
// section_4_4 (alternate super-resolution lambda sweep). task: deblur | sr.
PresetValues preset_values(const std::string& family, const std::string& task,
                           double sigma255);

// Deterministic piecewise-smooth scene in [0,1]; no RNG involved.
Image synthetic_image(int channels, int h, int w);

// Everything needed to run one solver on one restoration instance.
struct Problem {
    std::string name;
    std::string task;
    LinearOpPtr op;
    Image x_true;
    Image y;
    Image x0;
    std::shared_ptr<Fidelity> fid;
    std::shared_ptr<Regularizer> reg;
    SolverKind kind = SolverKind::pnp_lbfgs;
    SolverParams params;
    uint64_t seed = 0;
    double norm_ata = 0.0;
    std::string init_scheme;
    std::vector<std::string> warnings;
};

Problem build_problem(const Config& cfg);

// CSV schema; header below is load-bearing for downstream tooling.
extern const char* const kCsvHeader;
std::string csv_row(const IterRow& row);
void write_csv(const std::string& path, const RunRecord& rec);

struct RunSummary {
    std::string name;
    std::string solver;
    std::string task;
    std::string status;
    int iterations = 0;
    double final_psnr = 0.0;
    double wall_ms = 0.0;
    double final_phi = 0.0;
    double final_phi_gamma = 0.0;
    double final_r_norm = 0.0;
    double gamma_final = 0.0;
    double max_d_ratio = 0.0;
    uint64_t seed = 0;
    CallCounters total_calls;
    CallCounters bootstrap_calls;
    int n_backtracks = 0;
    int n_fallback_directions = 0;
    int n_subfloor_backtracks = 0;
    double norm_ata = 0.0;
    std::string init_scheme;
    std::string rng_algorithm;
    std::vector<std::string> warnings;

    // NaN-tolerant equality (NaN == NaN here) so serialization round-trips
    // can be asserted field-for-field.
    bool operator==(const RunSummary& other) const;
};

RunSummary summarize(const Problem& prob, const RunRecord& rec);
std::string summary_to_json(const RunSummary& s);
RunSummary summary_from_json(const std::string& text);
void save_summary(const std::string& path, const RunSummary& s);
RunSummary load_summary(const std::string& path);

struct ExperimentResult {
    RunSummary summary;
    std::string csv_path;
    std::string summary_path;
    bool failed = false; // solver raised; summary carries the error text
};

// Runs one configured experiment, streaming the CSV so rows survive solver
// errors, and writes <name>.csv / <name>.json under out_dir.
ExperimentResult run_experiment(const Config& cfg, const std::string& out_dir);

// Expands `sigmas` / `solvers` comma lists into a grid and runs it on a small
// worker pool (config key workers); writes per-run files plus summary.json.
std::vector<ExperimentResult> run_experiment_grid(const Config& cfg,
                                                  const std::string& out_dir);

} // namespace pnpqn
