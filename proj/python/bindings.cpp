// Python face of the library: numpy in, numpy out, config text everywhere a
// run is described. Heavy lifting stays in the C++ core.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pnpqn/harness.hpp"
#include "pnpqn/kernel.hpp"
#include "pnpqn/linop.hpp"
#include "pnpqn/metrics.hpp"
#include "pnpqn/verify.hpp"

namespace py = pybind11;
using namespace pnpqn;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image image_from_array(const DArray& a) {
    const py::buffer_info info = a.request();
    int c = 1, h = 0, w = 0;
    if (info.ndim == 2) {
        h = static_cast<int>(info.shape[0]);
        w = static_cast<int>(info.shape[1]);
    } else if (info.ndim == 3) {
        c = static_cast<int>(info.shape[0]);
        h = static_cast<int>(info.shape[1]);
        w = static_cast<int>(info.shape[2]);
    } else {
        throw DimensionError("expected a (H, W) or (C, H, W) array");
    }
    Image img(c, h, w);
    const double* src = static_cast<const double*>(info.ptr);
    std::copy(src, src + img.size(), img.data());
    return img;
}

py::array_t<double> array_from_image(const Image& img) {
    const Shape s = img.shape();
    py::array_t<double> out({s.c, s.h, s.w});
    std::copy(img.data(), img.data() + img.size(), out.mutable_data());
    return out;
}

Kernel kernel_from_array(const DArray& a) {
    const py::buffer_info info = a.request();
    if (info.ndim != 2) throw DimensionError("kernel must be a 2-D array");
    Kernel k;
    k.h = static_cast<int>(info.shape[0]);
    k.w = static_cast<int>(info.shape[1]);
    const double* src = static_cast<const double*>(info.ptr);
    k.wts.assign(src, src + static_cast<std::size_t>(k.h) * k.w);
    return k;
}

py::array_t<double> array_from_kernel(const Kernel& k) {
    py::array_t<double> out({k.h, k.w});
    std::copy(k.wts.begin(), k.wts.end(), out.mutable_data());
    return out;
}

py::dict counters_to_dict(const CallCounters& c) {
    py::dict d;
    d["potential"] = c.potential;
    d["prox"] = c.prox;
    d["gradient"] = c.gradient;
    d["hvp"] = c.hvp;
    d["f_value"] = c.f_value;
    d["prox_f"] = c.prox_f;
    return d;
}

py::dict summary_to_dict(const RunSummary& s) {
    py::dict d;
    d["name"] = s.name;
    d["solver"] = s.solver;
    d["task"] = s.task;
    d["status"] = s.status;
    d["iterations"] = s.iterations;
    d["final_psnr"] = s.final_psnr;
    d["wall_ms"] = s.wall_ms;
    d["final_phi"] = s.final_phi;
    d["final_phi_gamma"] = s.final_phi_gamma;
    d["final_r_norm"] = s.final_r_norm;
    d["gamma_final"] = s.gamma_final;
    d["max_d_ratio"] = s.max_d_ratio;
    d["seed"] = s.seed;
    d["total_calls"] = counters_to_dict(s.total_calls);
    d["bootstrap_calls"] = counters_to_dict(s.bootstrap_calls);
    d["n_backtracks"] = s.n_backtracks;
    d["n_fallback_directions"] = s.n_fallback_directions;
    d["n_subfloor_backtracks"] = s.n_subfloor_backtracks;
    d["norm_ata"] = s.norm_ata;
    d["init_scheme"] = s.init_scheme;
    d["rng_algorithm"] = s.rng_algorithm;
    d["warnings"] = s.warnings;
    return d;
}

py::dict rows_to_dict(const std::vector<IterRow>& rows) {
    const std::size_t n = rows.size();
    auto col = [&](auto pick) {
        py::array_t<double> a(n);
        double* p = a.mutable_data();
        for (std::size_t i = 0; i < n; ++i) p[i] = pick(rows[i]);
        return a;
    };
    py::dict d;
    d["phi"] = col([](const IterRow& r) { return r.phi; });
    d["phi_gamma"] = col([](const IterRow& r) { return r.phi_gamma; });
    d["residual_sq"] = col([](const IterRow& r) { return r.residual_sq; });
    d["fbe_residual"] = col([](const IterRow& r) { return r.fbe_residual; });
    d["tau"] = col([](const IterRow& r) { return r.tau; });
    d["gamma"] = col([](const IterRow& r) { return r.gamma; });
    d["psnr"] = col([](const IterRow& r) { return r.psnr; });
    return d;
}

// build + run entirely in memory; artifacts on disk are the CLI's job
py::dict run_config(const std::string& text) {
    const Config cfg = Config::parse_string(text);
    Problem prob = build_problem(cfg);
    TraceOptions trace;
    trace.reference = &prob.x_true;
    trace.timing = cfg.get_bool("timing", true);
    const RunRecord rec =
        run_solver(prob.kind, prob.x0, *prob.fid, *prob.reg, prob.params, trace);
    RunSummary summary = summarize(prob, rec);
    for (const auto& key : cfg.unqueried_keys())
        summary.warnings.push_back("config key never used: " + key);

    py::dict out = summary_to_dict(summary);
    out["x"] = array_from_image(rec.x_final);
    out["y"] = array_from_image(prob.y);
    out["x_true"] = array_from_image(prob.x_true);
    out["rows"] = rows_to_dict(rec.rows);
    return out;
}

py::dict run_to_dir(const std::string& text, const std::string& out_dir) {
    const ExperimentResult res =
        run_experiment(Config::parse_string(text), out_dir);
    py::dict out = summary_to_dict(res.summary);
    out["csv_path"] = res.csv_path;
    out["summary_path"] = res.summary_path;
    out["failed"] = res.failed;
    return out;
}

py::list verify_suites(const std::string& suite) {
    py::list out;
    for (const SuiteReport& rep : run_verify(suite)) {
        py::dict d;
        d["suite"] = rep.suite;
        d["all_passed"] = rep.all_passed();
        py::list checks;
        for (const CheckResult& c : rep.checks) {
            py::dict cd;
            cd["name"] = c.name;
            cd["passed"] = c.passed;
            cd["detail"] = c.detail;
            checks.append(cd);
        }
        d["checks"] = checks;
        out.append(d);
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_pnpqn, m) {
    m.doc() = "image restoration by quasi-Newton steps on the forward-backward "
              "envelope";

    // base first: translators run newest-first, so the specific ones win
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("run", &run_config, py::arg("config"),
          "Run one configured restoration in memory. Returns the run summary "
          "plus the final estimate `x`, the observation `y`, the ground truth "
          "`x_true` and per-iteration columns under `rows`.");
    m.def("run_to_dir", &run_to_dir, py::arg("config"), py::arg("out_dir"),
          "Run one configured restoration and write the CSV trace and JSON "
          "summary into out_dir.");
    m.def("verify", &verify_suites, py::arg("suite") = "all",
          "Run the named self-check suite ('all' for every suite); returns one "
          "dict per suite with its individual checks.");

    m.def(
        "synthetic_image",
        [](int channels, int height, int width) {
            return array_from_image(synthetic_image(channels, height, width));
        },
        py::arg("channels") = 3, py::arg("height") = 64, py::arg("width") = 64,
        "Deterministic smooth test image in [0, 1].");
    m.def(
        "psnr",
        [](const DArray& a, const DArray& b) {
            return psnr(image_from_array(a), image_from_array(b));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "mse",
        [](const DArray& a, const DArray& b) {
            return mse(image_from_array(a), image_from_array(b));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "add_gaussian_noise",
        [](const DArray& a, double sigma, uint64_t seed) {
            Rng rng(seed);
            return array_from_image(add_gaussian_noise(image_from_array(a), sigma, rng));
        },
        py::arg("x"), py::arg("sigma"), py::arg("seed") = 0);

    m.def(
        "kernel",
        [](const std::string& spec) { return array_from_kernel(resolve_kernel(spec)); },
        py::arg("spec"),
        "Resolve a kernel spec ('builtin:<name>', a builtin name, 'file:<path>' "
        "or a path) to a 2-D array normalized to sum 1.");
    m.def("builtin_kernels", &builtin_kernel_names);
    m.def(
        "convolve",
        [](const DArray& x, const DArray& kern, double gain, bool adjoint) {
            const Image img = image_from_array(x);
            const CircularConvOp op(img.shape(), kernel_from_array(kern), gain);
            return array_from_image(adjoint ? op.apply_adjoint(img) : op.apply(img));
        },
        py::arg("x"), py::arg("kernel"), py::arg("gain") = 1.0,
        py::arg("adjoint") = false,
        "Circular convolution with a 2-D stencil, applied per channel.");
}
