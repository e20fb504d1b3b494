#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "pnpqn/config.hpp"
#include "pnpqn/external_denoiser.hpp"
#include "pnpqn/harness.hpp"
#include "pnpqn/kernel.hpp"
#include "pnpqn/metrics.hpp"
#include "pnpqn/rng.hpp"
#include "pnpqn/verify.hpp"

using namespace pnpqn;

namespace {

void apply_overrides(Config& cfg, const std::string& solver, const std::string& seed,
                     const std::vector<std::string>& sets) {
    if (!solver.empty()) cfg.set("solver", solver);
    if (!seed.empty()) cfg.set("seed", seed);
    for (const std::string& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ParameterError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
}

int cmd_run(const std::string& config_path, const std::string& solver,
            const std::string& seed, const std::string& out_dir,
            const std::vector<std::string>& sets) {
    Config cfg = Config::parse_file(config_path);
    apply_overrides(cfg, solver, seed, sets);

    std::vector<ExperimentResult> results;
    if (cfg.has("sigmas") || cfg.has("solvers")) {
        results = run_experiment_grid(cfg, out_dir);
    } else {
        results.push_back(run_experiment(cfg, out_dir));
    }

    int failures = 0;
    for (const ExperimentResult& res : results) {
        const RunSummary& s = res.summary;
        std::printf("%-44s %-12s iters=%-4d psnr=%7.3f wall_ms=%.1f\n",
                    s.name.c_str(), s.status.c_str(), s.iterations, s.final_psnr,
                    s.wall_ms);
        for (const std::string& w : s.warnings)
            std::printf("    warning: %s\n", w.c_str());
        failures += res.failed ? 1 : 0;
    }
    std::printf("%zu run(s), %d failed; outputs under %s\n", results.size(), failures,
                out_dir.c_str());
    return failures == 0 ? 0 : 1;
}

int cmd_verify(const std::string& suite) {
    const std::vector<SuiteReport> reports = run_verify(suite);
    std::fputs(format_reports(reports).c_str(), stdout);
    for (const SuiteReport& rep : reports)
        if (!rep.all_passed()) return 1;
    return 0;
}

int cmd_kernels_list() {
    for (const std::string& name : builtin_kernel_names()) {
        const Kernel k = builtin_kernel(name);
        std::printf("%-12s %dx%d\n", name.c_str(), k.h, k.w);
    }
    return 0;
}

int cmd_protocol_check(const std::string& cmd, const std::string& tcp) {
    std::unique_ptr<Transport> tr;
    if (!cmd.empty()) {
        tr = spawn_process_transport(split_command(cmd));
    } else {
        const auto colon = tcp.rfind(':');
        if (colon == std::string::npos)
            throw ParameterError("--tcp expects host:port");
        tr = connect_tcp_transport(tcp.substr(0, colon),
                                   std::stoi(tcp.substr(colon + 1)));
    }
    std::printf("transport: %s\n", tr->describe().c_str());
    const ExternalDenoiser remote(std::move(tr), 1.0, 0.1, 0.5);

    Rng rng(4242);
    const Image probe = random_uniform_image({3, 16, 16}, rng);
    const Image out = remote.raw_denoise(probe, 0.1);
    if (!out.all_finite()) {
        std::printf("denoise: FAIL (non-finite output)\n");
        return 1;
    }
    std::printf("denoise: ok (in->out max abs change %.4g)\n",
                (out - probe).max_abs());
    try {
        const double pot = remote.raw_potential(probe, 0.1);
        std::printf("potential: ok (value %.6g)\n", pot);
    } catch (const RemoteDeclined&) {
        std::printf("potential: declined by server (objective tracking will "
                    "degrade gracefully)\n");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"composite optimization bench: quasi-Newton forward-backward "
                 "solvers with plug-and-play denoisers"};
    app.require_subcommand(1);

    std::string config_path, solver, seed, out_dir = "runs";
    std::vector<std::string> sets;
    CLI::App* run = app.add_subcommand("run", "run experiments from a config file");
    run->add_option("--config", config_path, "config file path")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--solver", solver, "override the solver key");
    run->add_option("--seed", seed, "override the rng seed");
    run->add_option("--out", out_dir, "output directory (default runs)");
    run->add_option("--set", sets, "extra key=value overrides (repeatable)");

    std::string suite = "all";
    bool list_suites = false;
    CLI::App* verify = app.add_subcommand("verify", "run the property-check suites");
    verify->add_option("--suite", suite, "suite name or 'all'");
    verify->add_flag("--list", list_suites, "list suite names and exit");

    CLI::App* kernels = app.add_subcommand("kernels", "kernel utilities");
    CLI::App* kernels_list = kernels->add_subcommand("list", "list builtin kernels");
    kernels->require_subcommand(1);

    std::string proto_cmd, proto_tcp;
    CLI::App* proto = app.add_subcommand("protocol",
                                         "wire-protocol conformance utilities");
    CLI::App* proto_check =
        proto->add_subcommand("check", "handshake an external denoiser server");
    proto_check->add_option("--cmd", proto_cmd,
                            "denoiser command spawned over stdin/stdout");
    proto_check->add_option("--tcp", proto_tcp, "host:port of a running server");
    proto->require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(config_path, solver, seed, out_dir, sets);
        if (verify->parsed()) {
            if (list_suites) {
                for (const std::string& name : verify_suite_names())
                    std::printf("%s\n", name.c_str());
                return 0;
            }
            return cmd_verify(suite);
        }
        if (kernels->parsed() && kernels_list->parsed()) return cmd_kernels_list();
        if (proto->parsed() && proto_check->parsed()) {
            if (proto_cmd.empty() == proto_tcp.empty())
                throw ParameterError("protocol check needs exactly one of --cmd/--tcp");
            return cmd_protocol_check(proto_cmd, proto_tcp);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
