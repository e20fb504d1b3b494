#include "pnpqn/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "pnpqn/metrics.hpp"

namespace pnpqn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double psnr_or_nan(const Image& x, const TraceOptions& trace) {
    return trace.reference ? psnr(x, *trace.reference) : kNaN;
}

// Acceptance comparisons run at the roundoff floor once iterates sit on a
// fixed point; without slack, noise rejects every trial step and shrinks
// gamma forever after convergence.
double accept_slack(double scale) { return 1e-12 * (1.0 + std::fabs(scale)); }

// Appends rows while maintaining the running minimum of residual_sq and the
// record-level direction-ratio maximum; streams to trace.on_row when set.
class RowSink {
public:
    RowSink(RunRecord& rec, const TraceOptions& trace) : rec_(rec), trace_(trace) {}

    void add(IterRow row) {
        prefix_min_ = std::min(prefix_min_, row.residual_sq);
        row.residual_prefix_min = prefix_min_;
        if (std::isfinite(row.d_ratio))
            rec_.max_d_ratio = std::max(rec_.max_d_ratio, row.d_ratio);
        if (trace_.on_row) trace_.on_row(row);
        rec_.rows.push_back(std::move(row));
    }

private:
    RunRecord& rec_;
    const TraceOptions& trace_;
    double prefix_min_ = std::numeric_limits<double>::infinity();
};

void validate_common(const SolverParams& p) {
    if (p.max_iters <= 0) throw ParameterError("solver: max_iters must be positive");
    if (p.memory <= 0) throw ParameterError("solver: memory must be positive");
    if (p.tau_max_halvings <= 0)
        throw ParameterError("solver: tau_max_halvings must be positive");
    if (!(p.beta > 0.0 && p.beta < 1.0)) throw ParameterError("solver: beta outside (0,1)");
    if (!(p.xi > 0.0 && p.xi < 1.0)) throw ParameterError("solver: xi outside (0,1)");
    if (!(p.gamma0 > 0.0)) throw ParameterError("solver: gamma0 must be positive");
    if (p.stop.consecutive <= 0)
        throw ParameterError("solver: stop.consecutive must be positive");
}

double residual_scale(const Image& x0, RunRecord& rec) {
    const double s = x0.squared_norm();
    if (s > 0.0) return s;
    rec.notes.push_back("zero starting point; residual_sq reported unnormalized");
    return 1.0;
}

void note_once(RunRecord& rec, const std::string& msg) {
    for (const auto& n : rec.notes)
        if (n == msg) return;
    rec.notes.push_back(msg);
}

// Relative objective-change rule; NaN phi values never fire it.
bool rel_phi_hit(double phi_prev, double phi_next, double tol) {
    if (!std::isfinite(phi_prev) || !std::isfinite(phi_next)) return false;
    return std::fabs(phi_next - phi_prev) <
           tol * std::max(std::fabs(phi_prev), 1e-300);
}

// Objective bookkeeping for the splitting baselines: envelope identity when
// the regularizer cooperates, NaN forever after a remote decline.
class BaselinePhi {
public:
    BaselinePhi(EnvelopeEngine& eng, RunRecord& rec) : eng_(eng), rec_(rec) {}

    // phi(prox_out) where prox_out = prox_{s g}(v); f_at must be f(prox_out).
    double at_prox(const Image& v, const Image& prox_out, double s, double f_at) {
        if (!rec_.phi_tracked) return kNaN;
        try {
            const double env = eng_.envelope_term(v, s);
            Image d = prox_out - v;
            return f_at + env - d.squared_norm() / (2.0 * s);
        } catch (const RemoteDeclined&) {
            rec_.phi_tracked = false;
            note_once(rec_, "remote denoiser declined potential evaluation; phi untracked");
            return kNaN;
        }
    }

    double f_if_tracked(const Image& x) {
        return rec_.phi_tracked ? eng_.f_value(x) : kNaN;
    }

private:
    EnvelopeEngine& eng_;
    RunRecord& rec_;
};

} // namespace

std::string solver_name(SolverKind k) {
    switch (k) {
        case SolverKind::pnp_lbfgs: return "pnp_lbfgs";
        case SolverKind::minfbe: return "minfbe";
        case SolverKind::pnp_pgd: return "pnp_pgd";
        case SolverKind::pnp_drsdiff: return "pnp_drsdiff";
        case SolverKind::pnp_drs: return "pnp_drs";
        case SolverKind::pnp_alpha_pgd: return "pnp_alpha_pgd";
        case SolverKind::pnp_fista: return "pnp_fista";
        case SolverKind::dpir_hqs: return "dpir_hqs";
    }
    throw ParameterError("solver_name: bad enum");
}

SolverKind solver_from_name(const std::string& name) {
    for (SolverKind k :
         {SolverKind::pnp_lbfgs, SolverKind::minfbe, SolverKind::pnp_pgd,
          SolverKind::pnp_drsdiff, SolverKind::pnp_drs, SolverKind::pnp_alpha_pgd,
          SolverKind::pnp_fista, SolverKind::dpir_hqs})
        if (solver_name(k) == name) return k;
    throw ParameterError("unknown solver '" + name + "'");
}

std::string stop_rule_name(StopRule r) {
    switch (r) {
        case StopRule::envelope: return "envelope";
        case StopRule::relative_phi: return "relative_phi";
        case StopRule::residual_only: return "residual_only";
    }
    throw ParameterError("stop_rule_name: bad enum");
}

StopRule stop_rule_from_name(const std::string& name) {
    if (name == "envelope") return StopRule::envelope;
    if (name == "relative_phi") return StopRule::relative_phi;
    if (name == "residual_only") return StopRule::residual_only;
    throw ParameterError("unknown stop rule '" + name + "'");
}

std::string status_name(RunStatus s) {
    switch (s) {
        case RunStatus::converged: return "converged";
        case RunStatus::max_iters: return "max_iters";
        case RunStatus::fixed_point: return "fixed_point";
    }
    throw ParameterError("status_name: bad enum");
}

double fista_t_next(double t) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t)); }

double gamma_floor(double gamma0, double xi, double beta, double lipschitz_f,
                   double weak_convexity_m) {
    double floor = gamma0;
    if (lipschitz_f > 0.0) floor = std::min(floor, xi * (1.0 - beta) / lipschitz_f);
    if (weak_convexity_m > 0.0) floor = std::min(floor, 1.0 / weak_convexity_m);
    return floor;
}

RunRecord pnp_lbfgs(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                    const SolverParams& p, const TraceOptions& trace) {
    validate_common(p);
    EnvelopeEngine eng(fid, reg);
    const double gamma = p.gamma0;
    if (!eng.gamma_admissible(gamma, p.beta))
        throw ParameterError(
            "pnp_lbfgs: gamma0 = " + std::to_string(gamma) +
            " violates gamma < min{(1-beta)/L_f, 1/M} with (1-beta)/L_f = " +
            std::to_string(eng.gamma_smooth_cap(p.beta)));

    RunRecord rec;
    rec.kind = SolverKind::pnp_lbfgs;
    rec.gamma_final = gamma;
    const auto t_run = Clock::now();

    EnvelopeState st = eng.evaluate(x0, gamma);
    Image grad_x = eng.grad_phi_gamma(st);
    rec.phi_x0 = eng.phi_via_value(x0, gamma).value_or(kNaN);
    rec.phi_gamma_x0 = st.phi_gamma;
    rec.r_x0_norm = st.r_norm;
    rec.bootstrap_calls = eng.counters();

    SecantStore store(p.memory, gamma);
    const double x0_sq = residual_scale(x0, rec);
    RowSink sink(rec, trace);

    double phi_prev = rec.phi_x0;
    double phi_gamma_prev = st.phi_gamma;
    int env_hits = 0;

    for (int k = 0; k < p.max_iters; ++k) {
        if (st.r_norm <= p.stop.fixed_point * (1.0 + st.x.norm())) {
            rec.status = RunStatus::fixed_point;
            break;
        }
        const CallCounters before = eng.counters();
        const auto t0 = Clock::now();

        Image d = store.apply(grad_x);
        d *= -1.0;
        if (!(inner(d, grad_x) < 0.0)) {
            // degenerate model; fall back to the scaled steepest direction
            d = grad_x;
            d *= -gamma;
            rec.n_fallback_directions += 1;
        }
        const double d_ratio = d.norm() / st.r_norm;

        double tau = 1.0;
        int halvings = 0;
        bool accepted = false;
        PartialEval wp;
        for (int t = 0; t < p.tau_max_halvings; ++t) {
            Image w = st.x;
            w.axpy(tau, d);
            wp = eng.evaluate_partial(w, gamma);
            if (wp.phi_gamma <= st.phi_gamma + accept_slack(st.phi_gamma)) {
                accepted = true;
                halvings = t;
                break;
            }
            tau *= 0.5;
        }
        if (!accepted) {
            // all trials rejected: step from the unmoved iterate and drop the
            // curvature memory, which at this point models a different basin
            tau = 0.0;
            halvings = p.tau_max_halvings;
            wp = PartialEval{st.x, st.grad_f, st.fbs, st.f_x, st.env, st.phi_gamma, gamma};
            store.clear();
        }
        EnvelopeState ws = eng.complete(std::move(wp));
        Image grad_w = eng.grad_phi_gamma(ws);

        if (tau > 0.0) {
            Image s = ws.x - st.x;
            Image y = grad_w - grad_x;
            store.push(s, y); // curvature safeguard inside
        }

        EnvelopeState st_next = eng.evaluate(ws.T, gamma);
        Image grad_next = eng.grad_phi_gamma(st_next);
        const double phi_next = eng.phi_at_prox_output(ws, st_next.f_x);

        IterRow row;
        row.iter = k;
        row.phi = phi_next;
        row.phi_gamma = st_next.phi_gamma;
        Image dx = st_next.x - st.x;
        row.residual_sq = dx.squared_norm() / x0_sq;
        row.fbe_residual = st.r_norm;
        row.tau = tau;
        row.tau_halvings = halvings;
        row.gamma = gamma;
        row.psnr = psnr_or_nan(st_next.x, trace);
        row.wall_ms = trace.timing ? elapsed_ms(t0) : 0.0;
        row.r_w_norm = ws.r_norm;
        row.d_ratio = d_ratio;
        row.iter_calls = eng.counters() - before;
        sink.add(std::move(row));

        bool stop_now = false;
        switch (p.stop_rule) {
            case StopRule::envelope: {
                const bool hit =
                    std::fabs(st_next.phi_gamma - phi_gamma_prev) < p.stop.envelope_diff ||
                    (phi_next - st_next.phi_gamma) < p.stop.envelope_gap;
                env_hits = hit ? env_hits + 1 : 0;
                stop_now = env_hits >= p.stop.consecutive;
                break;
            }
            case StopRule::relative_phi:
                stop_now = rel_phi_hit(phi_prev, phi_next, p.stop.rel_phi);
                break;
            case StopRule::residual_only:
                break;
        }

        st = std::move(st_next);
        grad_x = std::move(grad_next);
        phi_gamma_prev = st.phi_gamma;
        phi_prev = phi_next;
        if (stop_now) {
            rec.status = RunStatus::converged;
            break;
        }
    }

    rec.final_phi = phi_prev;
    rec.final_phi_gamma = st.phi_gamma;
    rec.final_r_norm = st.r_norm;
    rec.final_x_norm = st.x.norm();
    rec.x_final = std::move(st.x);
    rec.total_calls = eng.counters();
    rec.wall_ms_total = elapsed_ms(t_run);
    return rec;
}

RunRecord minfbe(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                 const SolverParams& p, DirectionMode direction,
                 const TraceOptions& trace) {
    validate_common(p);
    EnvelopeEngine eng(fid, reg);
    double gamma = p.gamma0;

    RunRecord rec;
    rec.kind = SolverKind::minfbe;
    const auto t_run = Clock::now();

    EnvelopeState st = eng.evaluate(x0, gamma);
    Image grad_x = eng.grad_phi_gamma(st);
    rec.phi_x0 = eng.phi_via_value(x0, gamma).value_or(kNaN);
    rec.phi_gamma_x0 = st.phi_gamma;
    rec.r_x0_norm = st.r_norm;
    rec.bootstrap_calls = eng.counters();

    SecantStore store(p.memory, gamma);
    const double x0_sq = residual_scale(x0, rec);
    RowSink sink(rec, trace);

    double phi_prev = rec.phi_x0;
    double phi_gamma_prev = st.phi_gamma;
    int env_hits = 0;

    for (int k = 0; k < p.max_iters; ++k) {
        if (st.r_norm <= p.stop.fixed_point * (1.0 + st.x.norm())) {
            rec.status = RunStatus::fixed_point;
            break;
        }
        const Image xk = st.x; // survives gamma backtracks
        const CallCounters before = eng.counters();
        const auto t0 = Clock::now();

        bool row_emitted = false;
        while (!row_emitted) {
            Image d = Image::zeros_like(xk);
            if (direction == DirectionMode::steepest) {
                d = grad_x;
                d *= -gamma;
            } else if (direction == DirectionMode::lbfgs) {
                d = store.apply(grad_x);
                d *= -1.0;
                if (!(inner(d, grad_x) < 0.0)) {
                    d = grad_x;
                    d *= -gamma;
                    rec.n_fallback_directions += 1;
                }
            }

            double tau = 0.0;
            int halvings = 0;
            PartialEval wp{st.x, st.grad_f, st.fbs, st.f_x, st.env, st.phi_gamma, gamma};
            if (direction != DirectionMode::none) {
                tau = 1.0;
                bool accepted = false;
                for (int t = 0; t < p.tau_max_halvings; ++t) {
                    Image w = xk;
                    w.axpy(tau, d);
                    wp = eng.evaluate_partial(w, gamma);
                    if (wp.phi_gamma <= st.phi_gamma + accept_slack(st.phi_gamma)) {
                        accepted = true;
                        halvings = t;
                        break;
                    }
                    tau *= 0.5;
                }
                if (!accepted) {
                    tau = 0.0;
                    halvings = p.tau_max_halvings;
                    wp = PartialEval{st.x,  st.grad_f,     st.fbs, st.f_x,
                                     st.env, st.phi_gamma, gamma};
                    store.clear(); // stale curvature caused the failure
                }
            }
            EnvelopeState ws = eng.complete(std::move(wp));
            const double f_T = eng.f_value(ws.T);

            // Envelope descent test: once gamma is below min{(1-beta)/L_f,
            // 1/M} this can never trigger, which bounds the backtracking.
            const double quad_bound = ws.f_x - gamma * inner(ws.grad_f, ws.R) +
                                      0.5 * (1.0 - p.beta) * gamma * ws.r_norm * ws.r_norm;
            if (f_T > quad_bound + accept_slack(ws.f_x)) {
                rec.n_backtracks += 1;
                if (eng.gamma_admissible(gamma, p.beta)) rec.n_subfloor_backtracks += 1;
                gamma *= p.xi;
                if (gamma < 1e-12 * p.gamma0)
                    throw NumericalError("minfbe: step size collapsed during backtracking");
                st = eng.evaluate(xk, gamma);
                grad_x = eng.grad_phi_gamma(st);
                phi_gamma_prev = st.phi_gamma;
                store.clear(); // secant pairs describe the envelope at the old step
                continue;
            }

            Image grad_w = eng.grad_phi_gamma(ws);
            if (direction != DirectionMode::none && tau > 0.0) {
                Image s = ws.x - xk;
                Image y = grad_w - grad_x;
                store.push(s, y);
            }

            EnvelopeState st_next = eng.evaluate(ws.T, gamma);
            Image grad_next = eng.grad_phi_gamma(st_next);
            const double phi_next = eng.phi_at_prox_output(ws, st_next.f_x);

            IterRow row;
            row.iter = k;
            row.phi = phi_next;
            row.phi_gamma = st_next.phi_gamma;
            Image dx = st_next.x - xk;
            row.residual_sq = dx.squared_norm() / x0_sq;
            row.fbe_residual = st.r_norm;
            row.tau = tau;
            row.tau_halvings = halvings;
            row.gamma = gamma;
            row.psnr = psnr_or_nan(st_next.x, trace);
            row.wall_ms = trace.timing ? elapsed_ms(t0) : 0.0;
            row.r_w_norm = ws.r_norm;
            row.d_ratio = st.r_norm > 0.0 ? d.norm() / st.r_norm : kNaN;
            row.iter_calls = eng.counters() - before;
            sink.add(std::move(row));
            row_emitted = true;

            bool stop_now = false;
            switch (p.stop_rule) {
                case StopRule::envelope: {
                    const bool hit = std::fabs(st_next.phi_gamma - phi_gamma_prev) <
                                         p.stop.envelope_diff ||
                                     (phi_next - st_next.phi_gamma) < p.stop.envelope_gap;
                    env_hits = hit ? env_hits + 1 : 0;
                    stop_now = env_hits >= p.stop.consecutive;
                    break;
                }
                case StopRule::relative_phi:
                    stop_now = rel_phi_hit(phi_prev, phi_next, p.stop.rel_phi);
                    break;
                case StopRule::residual_only:
                    break;
            }

            st = std::move(st_next);
            grad_x = std::move(grad_next);
            phi_gamma_prev = st.phi_gamma;
            phi_prev = phi_next;
            if (stop_now) {
                rec.status = RunStatus::converged;
                k = p.max_iters; // unwind the outer loop as well
            }
        }
        if (rec.status == RunStatus::converged) break;
    }

    rec.final_phi = phi_prev;
    rec.final_phi_gamma = st.phi_gamma;
    rec.final_r_norm = st.r_norm;
    rec.final_x_norm = st.x.norm();
    rec.gamma_final = gamma;
    rec.x_final = std::move(st.x);
    rec.total_calls = eng.counters();
    rec.wall_ms_total = elapsed_ms(t_run);
    return rec;
}

RunRecord pnp_pgd(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                  const SolverParams& p, const TraceOptions& trace) {
    validate_common(p);
    EnvelopeEngine eng(fid, reg);
    const double s = p.gamma0;

    RunRecord rec;
    rec.kind = SolverKind::pnp_pgd;
    rec.gamma_final = s;
    const auto t_run = Clock::now();
    const double x0_sq = residual_scale(x0, rec);
    RowSink sink(rec, trace);
    BaselinePhi phi(eng, rec);

    rec.phi_x0 = eng.phi_via_value(x0, s).value_or(kNaN);
    rec.phi_gamma_x0 = kNaN;
    rec.r_x0_norm = kNaN;
    rec.bootstrap_calls = eng.counters();

    Image x = x0;
    double phi_prev = rec.phi_x0;
    double phi_gamma_prev = kNaN;
    int env_hits = 0;
    double last_phi_gamma = kNaN, last_r = kNaN;

    for (int k = 0; k < p.max_iters; ++k) {
        const CallCounters before = eng.counters();
        const auto t0 = Clock::now();

        // Full envelope state at x comes nearly free with the gradient, so
        // this driver tracks phi_gamma and the envelope residual as it goes;
        // if the regularizer cannot price the envelope it runs untracked.
        double phi_gamma_k = kNaN;
        double r_k = kNaN;
        Image x_next;
        double phi_next = kNaN;
        if (rec.phi_tracked) {
            try {
                EnvelopeState st = eng.evaluate(x, s);
                phi_gamma_k = st.phi_gamma;
                r_k = st.r_norm;
                x_next = st.T;
                const double f_next = eng.f_value(x_next);
                phi_next = eng.phi_at_prox_output(st, f_next);
            } catch (const RemoteDeclined&) {
                rec.phi_tracked = false;
                note_once(rec,
                          "remote denoiser declined potential evaluation; phi untracked");
            }
        }
        if (!rec.phi_tracked) {
            Image g(x.shape());
            eng.f_value_and_grad(x, g);
            Image v = x;
            v.axpy(-s, g);
            x_next = eng.prox_step(v, s);
            Image rr = x - x_next;
            r_k = rr.norm() / s;
        }
        last_phi_gamma = phi_gamma_k;
        last_r = r_k;
        if (r_k <= p.stop.fixed_point * (1.0 + x.norm())) {
            rec.status = RunStatus::fixed_point;
            break;
        }

        IterRow row;
        row.iter = k;
        row.phi = phi_next;
        row.phi_gamma = phi_gamma_k; // at the pre-step iterate
        Image dx = x_next - x;
        row.residual_sq = dx.squared_norm() / x0_sq;
        row.fbe_residual = r_k;
        row.tau = 0.0;
        row.tau_halvings = 0;
        row.gamma = s;
        row.psnr = psnr_or_nan(x_next, trace);
        row.wall_ms = trace.timing ? elapsed_ms(t0) : 0.0;
        row.d_ratio = kNaN;
        row.iter_calls = eng.counters() - before;
        sink.add(std::move(row));

        bool stop_now = false;
        switch (p.stop_rule) {
            case StopRule::envelope: {
                const bool hit =
                    (std::isfinite(phi_gamma_prev) &&
                     std::fabs(phi_gamma_k - phi_gamma_prev) < p.stop.envelope_diff) ||
                    (std::isfinite(phi_prev) && std::isfinite(phi_gamma_k) &&
                     (phi_prev - phi_gamma_k) < p.stop.envelope_gap);
                env_hits = hit ? env_hits + 1 : 0;
                stop_now = env_hits >= p.stop.consecutive;
                break;
            }
            case StopRule::relative_phi:
                stop_now = rel_phi_hit(phi_prev, phi_next, p.stop.rel_phi);
                break;
            case StopRule::residual_only:
                break;
        }

        phi_gamma_prev = phi_gamma_k;
        phi_prev = phi_next;
        x = std::move(x_next);
        if (stop_now) {
            rec.status = RunStatus::converged;
            break;
        }
    }

    rec.final_phi = phi_prev;
    rec.final_phi_gamma = last_phi_gamma;
    rec.final_r_norm = last_r;
    rec.final_x_norm = x.norm();
    rec.x_final = std::move(x);
    rec.total_calls = eng.counters();
    rec.wall_ms_total = elapsed_ms(t_run);
    return rec;
}

namespace {

// Shared scaffolding for the two Douglas-Rachford orderings. denoiser_first
// selects which prox meets the driver variable directly.
RunRecord drs_driver(bool denoiser_first, SolverKind kind, const Image& x0,
                     const Fidelity& fid, const Regularizer& reg,
                     const SolverParams& p, const TraceOptions& trace) {
    validate_common(p);
    EnvelopeEngine eng(fid, reg);
    const double s = p.gamma0;

    RunRecord rec;
    rec.kind = kind;
    rec.gamma_final = s;
    const auto t_run = Clock::now();
    const double x0_sq = residual_scale(x0, rec);
    RowSink sink(rec, trace);
    BaselinePhi phi(eng, rec);

    rec.phi_x0 = eng.phi_via_value(x0, s).value_or(kNaN);
    rec.phi_gamma_x0 = kNaN;
    rec.r_x0_norm = kNaN;
    rec.bootstrap_calls = eng.counters();
    if (p.stop_rule == StopRule::envelope)
        note_once(rec, "envelope stop rule unavailable for this driver; using relative_phi");

    Image x = x0;
    Image estimate = x0;
    double phi_prev = rec.phi_x0;

    for (int k = 0; k < p.max_iters; ++k) {
        const CallCounters before = eng.counters();
        const auto t0 = Clock::now();

        Image y, z, x_next;
        double phi_next = kNaN;
        if (denoiser_first) {
            y = eng.prox_step(x, s);
            const double f_y = phi.f_if_tracked(y);
            if (rec.phi_tracked) phi_next = phi.at_prox(x, y, s, f_y);
            Image v = y;
            v *= 2.0;
            v -= x;
            z = eng.prox_f(v, s);
            estimate = y;
        } else {
            y = eng.prox_f(x, s);
            Image v = y;
            v *= 2.0;
            v -= x;
            z = eng.prox_step(v, s);
            const double f_z = phi.f_if_tracked(z);
            if (rec.phi_tracked) phi_next = phi.at_prox(v, z, s, f_z);
            estimate = z;
        }
        x_next = x + z - y;

        IterRow row;
        row.iter = k;
        row.phi = phi_next;
        row.phi_gamma = kNaN;
        Image dx = x_next - x;
        row.residual_sq = dx.squared_norm() / x0_sq;
        row.fbe_residual = kNaN;
        row.gamma = s;
        row.psnr = psnr_or_nan(estimate, trace);
        row.wall_ms = trace.timing ? elapsed_ms(t0) : 0.0;
        row.d_ratio = kNaN;
        row.iter_calls = eng.counters() - before;
        sink.add(std::move(row));

        const bool at_fixed_point =
            dx.norm() <= p.stop.fixed_point * (1.0 + x.norm());
        bool stop_now = false;
        if (p.stop_rule != StopRule::residual_only)
            stop_now = rel_phi_hit(phi_prev, phi_next, p.stop.rel_phi);

        phi_prev = phi_next;
        x = std::move(x_next);
        if (at_fixed_point) {
            rec.status = RunStatus::fixed_point;
            break;
        }
        if (stop_now) {
            rec.status = RunStatus::converged;
            break;
        }
    }

    rec.final_phi = phi_prev;
    rec.final_phi_gamma = kNaN;
    rec.final_r_norm = kNaN;
    rec.final_x_norm = estimate.norm();
    rec.x_final = std::move(estimate);
    rec.total_calls = eng.counters();
    rec.wall_ms_total = elapsed_ms(t_run);
    return rec;
}

} // namespace

RunRecord pnp_drsdiff(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                      const SolverParams& p, const TraceOptions& trace) {
    return drs_driver(false, SolverKind::pnp_drsdiff, x0, fid, reg, p, trace);
}

RunRecord pnp_drs(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                  const SolverParams& p, const TraceOptions& trace) {
    return drs_driver(true, SolverKind::pnp_drs, x0, fid, reg, p, trace);
}

RunRecord pnp_alpha_pgd(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                        const SolverParams& p, const TraceOptions& trace) {
    validate_common(p);
    EnvelopeEngine eng(fid, reg);
    const double s = p.gamma0;
    double alpha_hat = p.alpha_hat;
    if (alpha_hat <= 0.0) {
        const double lf = s * fid.lipschitz();
        if (lf <= 0.0)
            throw ParameterError("pnp_alpha_pgd: cannot derive alpha_hat for L_f = 0");
        alpha_hat = 1.0 / lf;
    }
    if (alpha_hat > 1.0) alpha_hat = 1.0;

    RunRecord rec;
    rec.kind = SolverKind::pnp_alpha_pgd;
    rec.gamma_final = s;
    const auto t_run = Clock::now();
    const double x0_sq = residual_scale(x0, rec);
    RowSink sink(rec, trace);
    BaselinePhi phi(eng, rec);

    rec.phi_x0 = eng.phi_via_value(x0, s).value_or(kNaN);
    rec.phi_gamma_x0 = kNaN;
    rec.r_x0_norm = kNaN;
    rec.bootstrap_calls = eng.counters();
    if (p.stop_rule == StopRule::envelope)
        note_once(rec, "envelope stop rule unavailable for this driver; using relative_phi");

    Image x = x0;
    Image y = x0;
    double phi_prev = rec.phi_x0;

    for (int k = 0; k < p.max_iters; ++k) {
        const CallCounters before = eng.counters();
        const auto t0 = Clock::now();

        Image q = y;
        q *= 1.0 - alpha_hat;
        q.axpy(alpha_hat, x);
        Image v = x;
        v.axpy(-s, eng.f_grad(q));
        Image x_next = eng.prox_step(v, s);
        const double f_next = phi.f_if_tracked(x_next);
        double phi_next = kNaN;
        if (rec.phi_tracked) phi_next = phi.at_prox(v, x_next, s, f_next);
        Image y_next = y;
        y_next *= 1.0 - alpha_hat;
        y_next.axpy(alpha_hat, x_next);

        IterRow row;
        row.iter = k;
        row.phi = phi_next;
        row.phi_gamma = kNaN;
        Image dx = x_next - x;
        row.residual_sq = dx.squared_norm() / x0_sq;
        row.fbe_residual = kNaN;
        row.tau = alpha_hat; // records the extrapolation weight in use
        row.gamma = s;
        row.psnr = psnr_or_nan(x_next, trace);
        row.wall_ms = trace.timing ? elapsed_ms(t0) : 0.0;
        row.d_ratio = kNaN;
        row.iter_calls = eng.counters() - before;
        sink.add(std::move(row));

        const bool at_fixed_point = dx.norm() <= p.stop.fixed_point * (1.0 + x.norm());
        bool stop_now = false;
        if (p.stop_rule != StopRule::residual_only)
            stop_now = rel_phi_hit(phi_prev, phi_next, p.stop.rel_phi);

        phi_prev = phi_next;
        x = std::move(x_next);
        y = std::move(y_next);
        if (at_fixed_point) {
            rec.status = RunStatus::fixed_point;
            break;
        }
        if (stop_now) {
            rec.status = RunStatus::converged;
            break;
        }
    }

    rec.final_phi = phi_prev;
    rec.final_phi_gamma = kNaN;
    rec.final_r_norm = kNaN;
    rec.final_x_norm = x.norm();
    rec.x_final = std::move(x);
    rec.total_calls = eng.counters();
    rec.wall_ms_total = elapsed_ms(t_run);
    return rec;
}

RunRecord pnp_fista(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                    const SolverParams& p, const TraceOptions& trace) {
    validate_common(p);
    EnvelopeEngine eng(fid, reg);
    const double s = p.gamma0;

    RunRecord rec;
    rec.kind = SolverKind::pnp_fista;
    rec.gamma_final = s;
    const auto t_run = Clock::now();
    const double x0_sq = residual_scale(x0, rec);
    RowSink sink(rec, trace);
    BaselinePhi phi(eng, rec);

    rec.phi_x0 = eng.phi_via_value(x0, s).value_or(kNaN);
    rec.phi_gamma_x0 = kNaN;
    rec.r_x0_norm = kNaN;
    rec.bootstrap_calls = eng.counters();
    if (p.stop_rule == StopRule::envelope)
        note_once(rec, "envelope stop rule unavailable for this driver; using relative_phi");

    Image x = x0;
    Image x_prev = x0;
    Image y = x0;
    double t = 1.0;
    double phi_prev = rec.phi_x0;

    for (int k = 0; k < p.max_iters; ++k) {
        const CallCounters before = eng.counters();
        const auto t0 = Clock::now();

        Image v = y;
        v.axpy(-s, eng.f_grad(y));
        Image x_next = eng.prox_step(v, s);
        const double f_next = phi.f_if_tracked(x_next);
        double phi_next = kNaN;
        if (rec.phi_tracked) phi_next = phi.at_prox(v, x_next, s, f_next);

        const double t_next = fista_t_next(t);
        Image y_next = x_next;
        Image momentum = x_next - x;
        y_next.axpy((t - 1.0) / t_next, momentum);

        IterRow row;
        row.iter = k;
        row.phi = phi_next;
        row.phi_gamma = kNaN;
        Image dx = x_next - x;
        row.residual_sq = dx.squared_norm() / x0_sq;
        row.fbe_residual = kNaN;
        row.tau = t; // momentum parameter prior to the update
        row.gamma = s;
        row.psnr = psnr_or_nan(x_next, trace);
        row.wall_ms = trace.timing ? elapsed_ms(t0) : 0.0;
        row.d_ratio = kNaN;
        row.iter_calls = eng.counters() - before;
        sink.add(std::move(row));

        const bool at_fixed_point = dx.norm() <= p.stop.fixed_point * (1.0 + x.norm());
        bool stop_now = false;
        if (p.stop_rule != StopRule::residual_only)
            stop_now = rel_phi_hit(phi_prev, phi_next, p.stop.rel_phi);

        phi_prev = phi_next;
        x_prev = std::move(x);
        x = std::move(x_next);
        y = std::move(y_next);
        t = t_next;
        if (at_fixed_point) {
            rec.status = RunStatus::fixed_point;
            break;
        }
        if (stop_now) {
            rec.status = RunStatus::converged;
            break;
        }
    }

    rec.final_phi = phi_prev;
    rec.final_phi_gamma = kNaN;
    rec.final_r_norm = kNaN;
    rec.final_x_norm = x.norm();
    rec.x_final = std::move(x);
    rec.total_calls = eng.counters();
    rec.wall_ms_total = elapsed_ms(t_run);
    return rec;
}

RunRecord dpir_hqs(const Image& x0, const Fidelity& fid, const Regularizer& reg,
                   const SolverParams& p, const TraceOptions& trace) {
    validate_common(p);
    if (!(p.dpir_sigma_final > 0.0))
        throw ParameterError("dpir_hqs: dpir_sigma_final (noise level) must be positive");
    if (!(p.dpir_sigma_start > 0.0))
        throw ParameterError("dpir_hqs: dpir_sigma_start must be positive");
    if (p.dpir_schedule_len <= 0)
        throw ParameterError("dpir_hqs: dpir_schedule_len must be positive");
    if (!(p.dpir_lambda_hat > 0.0))
        throw ParameterError("dpir_hqs: dpir_lambda_hat must be positive");

    EnvelopeEngine eng(fid, reg);
    const double sigma = p.dpir_sigma_final;

    RunRecord rec;
    rec.kind = SolverKind::dpir_hqs;
    const auto t_run = Clock::now();
    const double x0_sq = residual_scale(x0, rec);
    RowSink sink(rec, trace);

    rec.phi_x0 = eng.phi_via_value(x0, p.gamma0).value_or(kNaN);
    rec.phi_gamma_x0 = kNaN;
    rec.r_x0_norm = kNaN;
    rec.bootstrap_calls = eng.counters();
    if (p.stop_rule == StopRule::envelope)
        note_once(rec, "envelope stop rule unavailable for this driver; using relative_phi");
    if (!reg.supports_strength() && p.dpir_schedule_len > 1 &&
        p.dpir_sigma_start != sigma)
        note_once(rec,
                  "denoiser has no strength control; the strength schedule is inert");

    const auto sigma_at = [&](int k) {
        if (k >= p.dpir_schedule_len - 1 || p.dpir_schedule_len == 1) return sigma;
        const double f = static_cast<double>(k) / (p.dpir_schedule_len - 1);
        return std::exp((1.0 - f) * std::log(p.dpir_sigma_start) +
                        f * std::log(sigma));
    };

    Image x = x0;
    Image z = x0;
    double phi_prev = rec.phi_x0;
    double s_last = p.gamma0;

    for (int k = 0; k < p.max_iters; ++k) {
        const CallCounters before = eng.counters();
        const auto t0 = Clock::now();

        const double sigma_k = sigma_at(k);
        const double alpha_k = p.dpir_lambda_hat * sigma * sigma / (sigma_k * sigma_k);
        const double s_k = 1.0 / (2.0 * alpha_k);
        s_last = s_k;

        Image x_next = eng.prox_f(z, s_k);
        // the displayed ordering denoises the iterate from before the prox
        Image z_next = eng.prox_step_at_strength(p.dpir_sequential ? x_next : x,
                                                 p.gamma0, sigma_k);

        double phi_next = kNaN;
        if (rec.phi_tracked) {
            if (auto v = eng.phi_via_value(x_next, p.gamma0)) phi_next = *v;
        }

        IterRow row;
        row.iter = k;
        row.phi = phi_next;
        row.phi_gamma = kNaN;
        Image dx = x_next - x;
        row.residual_sq = dx.squared_norm() / x0_sq;
        row.fbe_residual = kNaN;
        row.tau = sigma_k; // strength actually used this iteration
        row.gamma = s_k;
        row.psnr = psnr_or_nan(x_next, trace);
        row.wall_ms = trace.timing ? elapsed_ms(t0) : 0.0;
        row.d_ratio = kNaN;
        row.iter_calls = eng.counters() - before;
        sink.add(std::move(row));

        const bool at_fixed_point = dx.norm() <= p.stop.fixed_point * (1.0 + x.norm());
        bool stop_now = false;
        if (p.stop_rule != StopRule::residual_only)
            stop_now = rel_phi_hit(phi_prev, phi_next, p.stop.rel_phi);

        phi_prev = phi_next;
        x = std::move(x_next);
        z = std::move(z_next);
        if (at_fixed_point) {
            rec.status = RunStatus::fixed_point;
            break;
        }
        if (stop_now) {
            rec.status = RunStatus::converged;
            break;
        }
    }

    rec.final_phi = phi_prev;
    rec.final_phi_gamma = kNaN;
    rec.final_r_norm = kNaN;
    rec.final_x_norm = x.norm();
    rec.gamma_final = s_last;
    rec.x_final = std::move(x);
    rec.total_calls = eng.counters();
    rec.wall_ms_total = elapsed_ms(t_run);
    return rec;
}

RunRecord run_solver(SolverKind kind, const Image& x0, const Fidelity& fid,
                     const Regularizer& reg, const SolverParams& params,
                     const TraceOptions& trace) {
    switch (kind) {
        case SolverKind::pnp_lbfgs: return pnp_lbfgs(x0, fid, reg, params, trace);
        case SolverKind::minfbe:
            return minfbe(x0, fid, reg, params, DirectionMode::lbfgs, trace);
        case SolverKind::pnp_pgd: return pnp_pgd(x0, fid, reg, params, trace);
        case SolverKind::pnp_drsdiff: return pnp_drsdiff(x0, fid, reg, params, trace);
        case SolverKind::pnp_drs: return pnp_drs(x0, fid, reg, params, trace);
        case SolverKind::pnp_alpha_pgd: return pnp_alpha_pgd(x0, fid, reg, params, trace);
        case SolverKind::pnp_fista: return pnp_fista(x0, fid, reg, params, trace);
        case SolverKind::dpir_hqs: return dpir_hqs(x0, fid, reg, params, trace);
    }
    throw ParameterError("run_solver: bad solver kind");
}

} // namespace pnpqn
