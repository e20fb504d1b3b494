#include "pnpqn/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "pnpqn/external_denoiser.hpp"
#include "pnpqn/grad_step.hpp"
#include "pnpqn/kernel.hpp"
#include "pnpqn/linop.hpp"
#include "pnpqn/metrics.hpp"
#include "pnpqn/png_io.hpp"
#include "pnpqn/rng.hpp"
#include "pnpqn/soft_threshold.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pnpqn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool near(double a, double b) { return std::fabs(a - b) < 1e-9; }

std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_sigma(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == '/' || c == '\\' || c == ':' || c == ' ') c = '-';
    return s;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ' && c != '\t') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string stem_of(const std::string& spec) {
    std::string s = spec;
    if (s.rfind("builtin:", 0) == 0) s = s.substr(8);
    if (s.rfind("file:", 0) == 0) s = s.substr(5);
    const auto slash = s.find_last_of("/\\");
    if (slash != std::string::npos) s = s.substr(slash + 1);
    const auto dot = s.rfind('.');
    if (dot != std::string::npos && dot > 0) s = s.substr(0, dot);
    return sanitize(s);
}

// Nearest-neighbor upsample of the low-resolution measurement onto the full
// grid; each pixel copies the closest lattice sample.
Image nearest_upsample(const Image& y, Shape full, int scale) {
    Image out(full);
    for (int c = 0; c < full.c; ++c)
        for (int i = 0; i < full.h; ++i)
            for (int j = 0; j < full.w; ++j) {
                const int ii = std::min(i / scale, y.height() - 1);
                const int jj = std::min(j / scale, y.width() - 1);
                out(c, i, j) = y(c, ii, jj);
            }
    return out;
}

// JSON helpers tolerating non-finite doubles (stored as strings).
void jput(json& j, const char* key, double v) {
    if (std::isfinite(v))
        j[key] = v;
    else
        j[key] = fmt_double(v);
}

double jget_d(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "nan") return kNaN;
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw IoError("summary: bad numeric string '" + s + "'");
    }
    return v.get<double>();
}

json counters_to_json(const CallCounters& c) {
    return json{{"potential", c.potential}, {"prox", c.prox},
                {"gradient", c.gradient},   {"hvp", c.hvp},
                {"f_value", c.f_value},     {"prox_f", c.prox_f}};
}

CallCounters counters_from_json(const json& j) {
    CallCounters c;
    c.potential = j.at("potential").get<long>();
    c.prox = j.at("prox").get<long>();
    c.gradient = j.at("gradient").get<long>();
    c.hvp = j.at("hvp").get<long>();
    c.f_value = j.at("f_value").get<long>();
    c.prox_f = j.at("prox_f").get<long>();
    return c;
}

bool same_d(double a, double b) {
    if (std::isnan(a) && std::isnan(b)) return true;
    return a == b;
}

json summary_to_json_obj(const RunSummary& s) {
    json j;
    j["name"] = s.name;
    j["solver"] = s.solver;
    j["task"] = s.task;
    j["status"] = s.status;
    j["iterations"] = s.iterations;
    jput(j, "final_psnr", s.final_psnr);
    jput(j, "wall_ms", s.wall_ms);
    jput(j, "final_phi", s.final_phi);
    jput(j, "final_phi_gamma", s.final_phi_gamma);
    jput(j, "final_r_norm", s.final_r_norm);
    jput(j, "gamma_final", s.gamma_final);
    jput(j, "max_d_ratio", s.max_d_ratio);
    j["seed"] = s.seed;
    j["total_calls"] = counters_to_json(s.total_calls);
    j["bootstrap_calls"] = counters_to_json(s.bootstrap_calls);
    j["n_backtracks"] = s.n_backtracks;
    j["n_fallback_directions"] = s.n_fallback_directions;
    j["n_subfloor_backtracks"] = s.n_subfloor_backtracks;
    jput(j, "norm_ata", s.norm_ata);
    j["init_scheme"] = s.init_scheme;
    j["rng_algorithm"] = s.rng_algorithm;
    j["warnings"] = s.warnings;
    return j;
}

RunSummary summary_from_json_obj(const json& j) {
    RunSummary s;
    s.name = j.at("name").get<std::string>();
    s.solver = j.at("solver").get<std::string>();
    s.task = j.at("task").get<std::string>();
    s.status = j.at("status").get<std::string>();
    s.iterations = j.at("iterations").get<int>();
    s.final_psnr = jget_d(j, "final_psnr");
    s.wall_ms = jget_d(j, "wall_ms");
    s.final_phi = jget_d(j, "final_phi");
    s.final_phi_gamma = jget_d(j, "final_phi_gamma");
    s.final_r_norm = jget_d(j, "final_r_norm");
    s.gamma_final = jget_d(j, "gamma_final");
    s.max_d_ratio = jget_d(j, "max_d_ratio");
    s.seed = j.at("seed").get<uint64_t>();
    s.total_calls = counters_from_json(j.at("total_calls"));
    s.bootstrap_calls = counters_from_json(j.at("bootstrap_calls"));
    s.n_backtracks = j.at("n_backtracks").get<int>();
    s.n_fallback_directions = j.at("n_fallback_directions").get<int>();
    s.n_subfloor_backtracks = j.at("n_subfloor_backtracks").get<int>();
    s.norm_ata = jget_d(j, "norm_ata");
    s.init_scheme = j.at("init_scheme").get<std::string>();
    s.rng_algorithm = j.at("rng_algorithm").get<std::string>();
    s.warnings = j.at("warnings").get<std::vector<std::string>>();
    return s;
}

} // namespace

PresetValues preset_values(const std::string& family, const std::string& task,
                           double sigma255) {
    PresetValues p;
    if (family == "table_1" || family == "section_4_4") {
        if (task == "deblur") {
            if (near(sigma255, 2.55)) p = {0.5, 1.0, 1.0, -1.0, true};
            if (near(sigma255, 7.65)) p = {0.5, 1.0, 0.75, -1.0, true};
            if (near(sigma255, 12.75)) p = {0.7, 1.0, 0.75, -1.0, true};
        } else if (task == "sr") {
            const double lam255 = family == "section_4_4" ? 2.0 : 4.0;
            if (near(sigma255, 2.55)) p = {0.5, lam255, 2.0, -1.0, true};
            if (near(sigma255, 7.65)) p = {0.5, 1.5, 1.0, -1.0, true};
            if (near(sigma255, 12.75)) p = {0.5, 1.0, 0.75, -1.0, true};
        }
    } else if (family == "table_2") {
        if (task == "deblur") {
            if (near(sigma255, 2.55)) p = {0.6, 1.0, 1.5, 1.0, true};
            if (near(sigma255, 7.65)) p = {0.8, 1.0, 1.0, 1.0, true};
            if (near(sigma255, 12.75)) p = {0.85, 1.0, 1.0, 1.0, true};
        } else if (task == "sr") {
            if (near(sigma255, 2.55) || near(sigma255, 7.65) || near(sigma255, 12.75))
                p = {1.0, 1.0, 2.0, 0.25, true};
        }
    }
    return p;
}

Image synthetic_image(int channels, int h, int w) {
    if (channels <= 0 || h <= 0 || w <= 0)
        throw ParameterError("synthetic_image: extents must be positive");
    Image img(channels, h, w);
    const double pi = 3.14159265358979323846;
    for (int c = 0; c < channels; ++c)
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double v = 0.45;
                v += 0.22 * std::sin(2.0 * pi * (1.5 * i + 0.4 * c) / h) *
                     std::cos(2.0 * pi * 2.3 * j / w);
                v += 0.13 * std::sin(2.0 * pi * 3.0 * (i + j) / (h + w) + 0.7 * c);
                if (i >= h / 4 && i < h / 2 && j >= w / 3 && j < (2 * w) / 3) v += 0.28;
                if (j * h > i * w) v -= 0.08; // diagonal edge
                img(c, i, j) = std::min(1.0, std::max(0.0, v));
            }
    return img;
}

Problem build_problem(const Config& cfg) {
    Problem prob;
    prob.task = cfg.get_str("task", "deblur");
    if (prob.task != "deblur" && prob.task != "sr")
        throw ParameterError("build_problem: task must be deblur or sr, got '" +
                             prob.task + "'");
    prob.seed = cfg.get_u64("seed", 1234);
    prob.kind = solver_from_name(cfg.get_str("solver", "pnp_lbfgs"));

    // scene
    const std::string image = cfg.get_str("image", "synthetic");
    std::string image_stem;
    if (image == "synthetic") {
        const int size = cfg.get_int("image_size", 64);
        const int chans = cfg.get_int("channels", 3);
        prob.x_true = synthetic_image(chans, size, size);
        image_stem = "synthetic" + std::to_string(size);
    } else {
        prob.x_true = load_png(image);
        image_stem = stem_of(image);
    }

    // forward operator, rescaled so the blur gram norm hits operator_norm
    const std::string kernel_spec =
        cfg.get_str("kernel", prob.task == "sr" ? "builtin:gauss25_0.7"
                                                : "builtin:gauss25_1.6");
    const Kernel kern = resolve_kernel(kernel_spec);
    const double op_target = cfg.get_double("operator_norm", 0.96);
    if (!(op_target > 0.0))
        throw ParameterError("build_problem: operator_norm must be positive");
    const Shape full = prob.x_true.shape();
    auto unit_conv = std::make_shared<CircularConvOp>(full, kern, 1.0);
    const double n0 = unit_conv->exact_gram_norm();
    if (!(n0 > 0.0)) throw ParameterError("build_problem: kernel has zero response");
    const double gain = std::sqrt(op_target / n0);
    auto conv = std::make_shared<CircularConvOp>(full, kern, gain);

    int sr_scale = 1;
    if (prob.task == "deblur") {
        prob.op = conv;
        prob.norm_ata = conv->exact_gram_norm();
    } else {
        sr_scale = cfg.get_int("sr_scale", 2);
        if (sr_scale != 2 && sr_scale != 3)
            throw ParameterError("build_problem: sr_scale must be 2 or 3");
        auto down = std::make_shared<DownsampleOp>(full, sr_scale);
        prob.op = std::make_shared<ComposedOp>(
            std::vector<LinearOpPtr>{conv, down});
        prob.norm_ata = gram_norm(*prob.op);
    }

    // hyperparameters: preset row, then explicit keys override
    const double sigma255 = cfg.get_double("sigma", 7.65);
    if (sigma255 < 0.0) throw ParameterError("build_problem: sigma < 0");
    const std::string default_family =
        prob.kind == SolverKind::pnp_alpha_pgd ? "table_2" : "table_1";
    const std::string family = cfg.get_str("preset", default_family);
    PresetValues pv;
    if (family != "none") {
        pv = preset_values(family, prob.task, sigma255);
        if (!pv.found) {
            if (family != "table_1" && family != "table_2" && family != "section_4_4")
                throw ParameterError("build_problem: unknown preset '" + family + "'");
            prob.warnings.push_back("preset " + family + " has no row for sigma=" +
                                    fmt_sigma(sigma255) + "; using generic defaults");
            pv = PresetValues{};
        }
    }

    double lambda = cfg.get_double("lambda", pv.lambda);
    const double lip_target = cfg.get_double("lipschitz_target", pv.lipschitz_target);
    if (lip_target > 0.0 && !cfg.has("lambda")) lambda = lip_target / prob.norm_ata;
    if (prob.kind == SolverKind::dpir_hqs && !cfg.has("lambda") && lambda != 1.0) {
        prob.warnings.push_back("dpir uses unit data weight; overriding lambda to 1");
        lambda = 1.0;
    }
    const double alpha = cfg.get_double("alpha", pv.alpha);
    const double sigma_d255 =
        cfg.get_double("sigma_d", pv.sigma_d_factor * sigma255);
    const double sigma_d = sigma_d255 / 255.0;

    // measurement
    Rng noise_rng = Rng(prob.seed).child(0);
    Image clean = prob.op->apply(prob.x_true);
    prob.y = add_gaussian_noise(clean, sigma255 / 255.0, noise_rng);

    // initialization
    if (prob.task == "deblur") {
        prob.x0 = prob.y;
        prob.init_scheme = "y";
    } else {
        const std::string scheme = cfg.get_str("sr_init", "nearest");
        if (scheme == "nearest") {
            prob.x0 = nearest_upsample(prob.y, full, sr_scale);
        } else if (scheme == "atrans_y") {
            prob.x0 = prob.op->apply_adjoint(prob.y);
        } else {
            throw ParameterError("build_problem: sr_init must be nearest or atrans_y");
        }
        prob.init_scheme = scheme;
    }

    prob.fid = std::make_shared<Fidelity>(prob.op, prob.y, lambda, prob.norm_ata);

    // regularizer
    const std::string reg_kind = cfg.get_str("regularizer", "cosine");
    if (reg_kind == "cosine") {
        const double lip = cfg.get_double("reg_lipschitz", 0.5);
        const double omega = cfg.get_double("reg_omega", 8.0);
        prob.reg = std::make_shared<CosineGradStep>(lip / (omega * omega), omega,
                                                    alpha, sigma_d);
    } else if (reg_kind == "quadratic") {
        const double lip = cfg.get_double("reg_lipschitz", 0.5);
        prob.reg = std::make_shared<QuadraticGradStep>(lip, Image(full), alpha,
                                                       sigma_d);
    } else if (reg_kind == "soft_threshold") {
        prob.reg = std::make_shared<SoftThreshold>(cfg.get_double("reg_tau", 0.05));
    } else if (reg_kind == "external") {
        const double lip = cfg.get_double("external_lipschitz", 0.5);
        std::unique_ptr<Transport> tr;
        if (cfg.has("external_cmd")) {
            tr = spawn_process_transport(split_command(cfg.get_str("external_cmd")));
        } else if (cfg.has("external_tcp")) {
            const std::string addr = cfg.get_str("external_tcp");
            const auto colon = addr.rfind(':');
            if (colon == std::string::npos)
                throw ParameterError("build_problem: external_tcp must be host:port");
            tr = connect_tcp_transport(addr.substr(0, colon),
                                       std::stoi(addr.substr(colon + 1)));
        } else {
            throw ParameterError(
                "build_problem: external regularizer needs external_cmd or external_tcp");
        }
        prob.reg = std::make_shared<ExternalDenoiser>(std::move(tr), alpha, sigma_d,
                                                      lip);
    } else {
        throw ParameterError("build_problem: unknown regularizer '" + reg_kind + "'");
    }

    // solver parameters
    SolverParams& sp = prob.params;
    sp.beta = cfg.get_double("beta", 0.01);
    sp.xi = cfg.get_double("xi", 0.5);
    sp.memory = cfg.get_int("memory", 20);
    sp.tau_max_halvings = cfg.get_int("tau_max_halvings", 10);
    sp.stop_rule = stop_rule_from_name(cfg.get_str("stop_rule", "envelope"));
    sp.stop.envelope_diff = cfg.get_double("stop_envelope_diff", 1e-5);
    sp.stop.envelope_gap = cfg.get_double("stop_envelope_gap", 5e-5);
    sp.stop.consecutive = cfg.get_int("stop_consecutive", 5);
    sp.stop.rel_phi = cfg.get_double("stop_rel_phi", 1e-8);
    sp.stop.fixed_point = cfg.get_double("stop_fixed_point", 1e-12);
    if (prob.kind == SolverKind::pnp_alpha_pgd) {
        const double lf = prob.fid->lipschitz();
        if (!(lf > 0.0))
            throw ParameterError("build_problem: accelerated PGD needs L_f > 0");
        sp.gamma0 = cfg.get_double("gamma0", (alpha + 1.0) / (alpha * lf));
        sp.alpha_hat = cfg.get_double("alpha_hat", -1.0);
    } else {
        sp.gamma0 = cfg.get_double("gamma0", 1.0);
    }
    sp.dpir_lambda_hat = cfg.get_double("dpir_lambda_hat", 0.23);
    sp.dpir_sigma_start = cfg.get_double("dpir_sigma_start", 49.0) / 255.0;
    sp.dpir_sigma_final = sigma255 > 0.0 ? sigma255 / 255.0 : -1.0;
    sp.dpir_schedule_len =
        cfg.get_int("dpir_schedule_len", prob.task == "sr" ? 24 : 8);
    sp.dpir_sequential = cfg.get_bool("dpir_sequential", false);
    const int default_iters =
        prob.kind == SolverKind::dpir_hqs ? sp.dpir_schedule_len : 100;
    sp.max_iters = cfg.get_int("max_iters", default_iters);

    prob.name = prob.task + "_" + image_stem + "_" + stem_of(kernel_spec) +
                (prob.task == "sr" ? "_x" + std::to_string(sr_scale) : "") + "_s" +
                sanitize(fmt_sigma(sigma255)) + "_" + solver_name(prob.kind) +
                "_seed" + std::to_string(prob.seed);
    return prob;
}

const char* const kCsvHeader =
    "iter,phi,phi_gamma,residual_sq,residual_prefix_min,fbe_residual,tau,"
    "tau_halvings,gamma,psnr,wall_ms";

std::string csv_row(const IterRow& r) {
    std::string out = std::to_string(r.iter);
    out += ',';
    out += fmt_double(r.phi);
    out += ',';
    out += fmt_double(r.phi_gamma);
    out += ',';
    out += fmt_double(r.residual_sq);
    out += ',';
    out += fmt_double(r.residual_prefix_min);
    out += ',';
    out += fmt_double(r.fbe_residual);
    out += ',';
    out += fmt_double(r.tau);
    out += ',';
    out += std::to_string(r.tau_halvings);
    out += ',';
    out += fmt_double(r.gamma);
    out += ',';
    out += fmt_double(r.psnr);
    out += ',';
    out += fmt_double(r.wall_ms);
    return out;
}

void write_csv(const std::string& path, const RunRecord& rec) {
    std::ofstream out(path);
    if (!out) throw IoError("write_csv: cannot open '" + path + "'");
    out << kCsvHeader << '\n';
    for (const auto& row : rec.rows) out << csv_row(row) << '\n';
    if (!out) throw IoError("write_csv: write to '" + path + "' failed");
}

bool RunSummary::operator==(const RunSummary& other) const {
    return name == other.name && solver == other.solver && task == other.task &&
           status == other.status && iterations == other.iterations &&
           same_d(final_psnr, other.final_psnr) && same_d(wall_ms, other.wall_ms) &&
           same_d(final_phi, other.final_phi) &&
           same_d(final_phi_gamma, other.final_phi_gamma) &&
           same_d(final_r_norm, other.final_r_norm) &&
           same_d(gamma_final, other.gamma_final) &&
           same_d(max_d_ratio, other.max_d_ratio) && seed == other.seed &&
           total_calls == other.total_calls &&
           bootstrap_calls == other.bootstrap_calls &&
           n_backtracks == other.n_backtracks &&
           n_fallback_directions == other.n_fallback_directions &&
           n_subfloor_backtracks == other.n_subfloor_backtracks &&
           same_d(norm_ata, other.norm_ata) && init_scheme == other.init_scheme &&
           rng_algorithm == other.rng_algorithm && warnings == other.warnings;
}

RunSummary summarize(const Problem& prob, const RunRecord& rec) {
    RunSummary s;
    s.name = prob.name;
    s.solver = solver_name(rec.kind);
    s.task = prob.task;
    s.status = status_name(rec.status);
    s.iterations = static_cast<int>(rec.rows.size());
    s.final_psnr = rec.rows.empty() ? kNaN : rec.rows.back().psnr;
    s.wall_ms = rec.wall_ms_total;
    s.final_phi = rec.final_phi;
    s.final_phi_gamma = rec.final_phi_gamma;
    s.final_r_norm = rec.final_r_norm;
    s.gamma_final = rec.gamma_final;
    s.max_d_ratio = rec.max_d_ratio;
    s.seed = prob.seed;
    s.total_calls = rec.total_calls;
    s.bootstrap_calls = rec.bootstrap_calls;
    s.n_backtracks = rec.n_backtracks;
    s.n_fallback_directions = rec.n_fallback_directions;
    s.n_subfloor_backtracks = rec.n_subfloor_backtracks;
    s.norm_ata = prob.norm_ata;
    s.init_scheme = prob.init_scheme;
    s.rng_algorithm = Rng::algorithm_id;
    s.warnings = prob.warnings;
    s.warnings.insert(s.warnings.end(), rec.notes.begin(), rec.notes.end());
    return s;
}

std::string summary_to_json(const RunSummary& s) {
    return summary_to_json_obj(s).dump(2) + "\n";
}

RunSummary summary_from_json(const std::string& text) {
    try {
        return summary_from_json_obj(json::parse(text));
    } catch (const json::exception& e) {
        throw IoError(std::string("summary: JSON parse failed: ") + e.what());
    }
}

void save_summary(const std::string& path, const RunSummary& s) {
    std::ofstream out(path);
    if (!out) throw IoError("save_summary: cannot open '" + path + "'");
    out << summary_to_json(s);
    if (!out) throw IoError("save_summary: write failed");
}

RunSummary load_summary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_summary: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return summary_from_json(buf.str());
}

ExperimentResult run_experiment(const Config& cfg, const std::string& out_dir) {
    Problem prob = build_problem(cfg);
    const bool timing = cfg.get_bool("timing", true);
    const bool save_images = cfg.get_bool("save_images", false);
    fs::create_directories(out_dir);
    ExperimentResult result;
    result.csv_path = (fs::path(out_dir) / (prob.name + ".csv")).string();
    result.summary_path = (fs::path(out_dir) / (prob.name + ".json")).string();

    std::ofstream csv(result.csv_path);
    if (!csv) throw IoError("run_experiment: cannot open '" + result.csv_path + "'");
    csv << kCsvHeader << '\n';

    TraceOptions trace;
    trace.reference = &prob.x_true;
    trace.timing = timing;
    trace.on_row = [&csv](const IterRow& row) {
        csv << csv_row(row) << '\n';
        csv.flush(); // partial CSV must survive a mid-run abort
    };

    RunRecord rec;
    std::string error_text;
    try {
        rec = run_solver(prob.kind, prob.x0, *prob.fid, *prob.reg, prob.params, trace);
    } catch (const Error& e) {
        result.failed = true;
        error_text = e.what();
    }
    csv.flush();

    if (result.failed) {
        RunSummary s;
        s.name = prob.name;
        s.solver = solver_name(prob.kind);
        s.task = prob.task;
        s.status = "error";
        s.final_psnr = kNaN;
        s.final_phi = s.final_phi_gamma = s.final_r_norm = kNaN;
        s.seed = prob.seed;
        s.norm_ata = prob.norm_ata;
        s.init_scheme = prob.init_scheme;
        s.rng_algorithm = Rng::algorithm_id;
        s.warnings = prob.warnings;
        s.warnings.push_back("run failed: " + error_text);
        result.summary = s;
    } else {
        result.summary = summarize(prob, rec);
        if (save_images) {
            const fs::path base = fs::path(out_dir) / prob.name;
            save_png(base.string() + "_true.png", prob.x_true);
            save_png(base.string() + "_y.png", prob.y);
            save_png(base.string() + "_x0.png", prob.x0);
            save_png(base.string() + "_out.png", rec.x_final);
        }
    }
    for (const auto& k : cfg.unqueried_keys())
        result.summary.warnings.push_back("config key never used: " + k);
    save_summary(result.summary_path, result.summary);
    return result;
}

std::vector<ExperimentResult> run_experiment_grid(const Config& cfg,
                                                  const std::string& out_dir) {
    std::vector<std::string> sigmas =
        cfg.has("sigmas") ? split_list(cfg.get_str("sigmas")) : std::vector<std::string>{};
    std::vector<std::string> solvers =
        cfg.has("solvers") ? split_list(cfg.get_str("solvers")) : std::vector<std::string>{};
    if (sigmas.empty()) sigmas.push_back(cfg.get_str("sigma", "7.65"));
    if (solvers.empty()) solvers.push_back(cfg.get_str("solver", "pnp_lbfgs"));

    const uint64_t master_seed = cfg.get_u64("seed", 1234);
    const int requested_workers = cfg.get_int("workers", 1);

    // Every cell keeps the shared seed: at fixed sigma each solver then sees
    // the identical measurement, so cross-solver curves are comparable.
    std::vector<Config> jobs;
    for (const auto& sv : solvers)
        for (const auto& sg : sigmas) {
            Config job = cfg;
            job.set("solver", sv);
            job.set("sigma", sg);
            jobs.push_back(std::move(job));
        }

    std::vector<ExperimentResult> results(jobs.size());
    const int workers =
        std::max(1, std::min<int>(requested_workers, static_cast<int>(jobs.size())));
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::vector<std::string> errors;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                results[i] = run_experiment(jobs[i], out_dir);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(err_mutex);
                errors.push_back(e.what());
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (!errors.empty())
        throw Error("run_experiment_grid: " + std::to_string(errors.size()) +
                    " job(s) failed to build, first: " + errors.front());

    json agg = json::array();
    for (const auto& r : results) agg.push_back(summary_to_json_obj(r.summary));
    json top;
    top["runs"] = std::move(agg);
    top["rng_algorithm"] = Rng::algorithm_id;
    top["master_seed"] = master_seed;
    std::ofstream out(fs::path(out_dir) / "summary.json");
    if (!out) throw IoError("run_experiment_grid: cannot write summary.json");
    out << top.dump(2) << "\n";
    return results;
}

} // namespace pnpqn
