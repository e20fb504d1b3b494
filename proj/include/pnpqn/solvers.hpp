#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pnpqn/envelope.hpp"
#include "pnpqn/lbfgs.hpp"

namespace pnpqn {

enum class SolverKind {
    pnp_lbfgs,
    minfbe,
    pnp_pgd,
    pnp_drsdiff,
    pnp_drs,
    pnp_alpha_pgd,
    pnp_fista,
    dpir_hqs,
};

std::string solver_name(SolverKind k);
SolverKind solver_from_name(const std::string& name);

enum class StopRule { envelope, relative_phi, residual_only };
std::string stop_rule_name(StopRule r);
StopRule stop_rule_from_name(const std::string& name);

// Extra search direction used inside the backtracking envelope driver.
enum class DirectionMode { none, steepest, lbfgs };

enum class RunStatus { converged, max_iters, fixed_point };
std::string status_name(RunStatus s);

struct StopThresholds {
    double envelope_diff = 1e-5; // |phi_gamma(x^{k+1}) - phi_gamma(x^k)| threshold
    double envelope_gap = 5e-5;  // phi(x) - phi_gamma(x) threshold
    int consecutive = 5;         // hits in a row before the envelope rule fires
    double rel_phi = 1e-8;       // |delta phi| / |phi| threshold
    double fixed_point = 1e-12;  // ||R|| <= fixed_point * (1 + ||x||)
};

struct SolverParams {
    double gamma0 = 1.0; // fixed step for pnp_lbfgs; initial step elsewhere
    double beta = 0.01;  // envelope descent fraction
    double xi = 0.5;     // step shrink factor on a triggered descent test
    int tau_max_halvings = 10;
    int max_iters = 100;
    int memory = 20;
    StopRule stop_rule = StopRule::envelope;
    StopThresholds stop;

    // pnp_alpha_pgd extrapolation weight; <= 0 means 1 / (gamma0 * L_f).
    double alpha_hat = -1.0;

    // dpir_hqs schedule: denoiser strength decays log-linearly from
    // dpir_sigma_start to dpir_sigma_final over dpir_schedule_len steps, then
    // stays at the final value. dpir_sigma_final <= 0 means "not configured"
    // and is a parameter error for that driver.
    double dpir_lambda_hat = 0.23;
    double dpir_sigma_start = 49.0 / 255.0;
    double dpir_sigma_final = -1.0;
    int dpir_schedule_len = 8;
    bool dpir_sequential = false; // true: denoise the freshly proxed iterate
};

// One completed iteration. phi/phi_gamma/psnr describe the newly produced
// estimate; fbe_residual is ||R_gamma(x^k)|| at the iterate the step started
// from (NaN for drivers that never form an envelope residual).
struct IterRow {
    int iter = 0;
    double phi = 0.0;
    double phi_gamma = 0.0;
    double residual_sq = 0.0; // ||x^{k+1} - x^k||^2 / ||x^0||^2
    double residual_prefix_min = 0.0;
    double fbe_residual = 0.0;
    double tau = 0.0;
    int tau_halvings = 0;
    double gamma = 0.0;
    double psnr = 0.0;
    double wall_ms = 0.0;

    // not serialized to CSV; consumed by property checks
    double r_w_norm = 0.0;  // ||R_gamma(w^k)||
    double d_ratio = 0.0;   // ||d^k|| / ||R_gamma(x^k)||
    CallCounters iter_calls;
};

struct RunRecord {
    SolverKind kind = SolverKind::pnp_lbfgs;
    RunStatus status = RunStatus::max_iters;
    std::vector<IterRow> rows;
    Image x_final;

    // state at the starting point (NaN when not trackable)
    double phi_x0 = 0.0;
    double phi_gamma_x0 = 0.0;
    double r_x0_norm = 0.0;

    // state at the terminal iterate (NaN where not trackable)
    double final_phi = 0.0;
    double final_phi_gamma = 0.0;
    double final_r_norm = 0.0;
    double final_x_norm = 0.0;
    double gamma_final = 0.0;

    int n_fallback_directions = 0;
    int n_backtracks = 0;
    int n_subfloor_backtracks = 0;
    double max_d_ratio = 0.0;
    bool phi_tracked = true;

    CallCounters bootstrap_calls; // consumed before the first iteration
    CallCounters total_calls;
    double wall_ms_total = 0.0;
    std::vector<std::string> notes;
};

struct TraceOptions {
    const Image* reference = nullptr; // PSNR target when known
    bool timing = true;               // false: wall_ms column written as 0
    // Streamed per-iteration rows (after prefix-min bookkeeping); lets the
    // harness flush partial CSVs even when a run aborts mid-way.
    std::function<void(const IterRow&)> on_row;
};

// Fixed-step quasi-Newton driver on the forward-backward envelope. Requires
// gamma0 strictly inside the admissibility gate (ParameterError otherwise).
// Per iteration, with T line-search trials, consumes exactly T+1 potential,
// 2 prox, T+1 gradient and 2 hvp calls (bootstrap_calls holds the one-off
// (1,1,1,1) start-up work plus one hvp).
RunRecord pnp_lbfgs(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                    const SolverParams& params, const TraceOptions& trace = {});

// Envelope driver with step backtracking: whenever the envelope descent test
// trips, gamma shrinks by xi and the iteration restarts at the same point.
// With direction == none this is forward-backward splitting with adaptive
// step. Note the regularizer is queried at changing gamma, so only
// regularizers with a genuine gamma-scaled prox family keep a fixed
// objective across backtracks.
RunRecord minfbe(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                 const SolverParams& params, DirectionMode direction,
                 const TraceOptions& trace = {});

RunRecord pnp_pgd(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                  const SolverParams& params, const TraceOptions& trace = {});
RunRecord pnp_drsdiff(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                      const SolverParams& params, const TraceOptions& trace = {});
RunRecord pnp_drs(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                  const SolverParams& params, const TraceOptions& trace = {});
RunRecord pnp_alpha_pgd(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                        const SolverParams& params, const TraceOptions& trace = {});
RunRecord pnp_fista(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                    const SolverParams& params, const TraceOptions& trace = {});
RunRecord dpir_hqs(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                   const SolverParams& params, const TraceOptions& trace = {});

RunRecord run_solver(SolverKind kind, const Image& x0, const Fidelity& fid,
                     const Regularizer& reg, const SolverParams& params,
                     const TraceOptions& trace = {});

// Momentum recursion t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2.
double fista_t_next(double t);

// min{gamma0, xi (1-beta)/L_f, 1/M}; the step-size floor certified for the
// backtracking driver (infinite branches dropped when L_f or M vanish).
double gamma_floor(double gamma0, double xi, double beta, double lipschitz_f,
                   double weak_convexity_m);

} // namespace pnpqn
