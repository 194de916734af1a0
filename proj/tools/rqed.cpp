// Command-line driver: one scenario per invocation.
// Exit codes: 0 all identities pass, 1 an identity failed, 2 configuration error.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rqed/commands.hpp"

namespace {

std::vector<std::pair<std::string, long>> parse_overrides(const std::vector<std::string>& items)
{
    std::vector<std::pair<std::string, long>> out;
    for (auto& s : items) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw rqed::config_error("budget override must be key=value: " + s);
        char* end = nullptr;
        const long v = std::strtol(s.c_str() + eq + 1, &end, 10);
        if (end == s.c_str() + eq + 1 || *end != '\0') throw rqed::config_error("budget override value must be an integer: " + s);
        out.emplace_back(s.substr(0, eq), v);
    }
    return out;
}

int thread_count()
{
    const char* env = std::getenv("RQED_THREADS");
    return env ? std::max(1, std::atoi(env)) : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Closed-time-path kernel, Wick, dressing and RWA verification runs"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string scenario_path, out_dir = ".", profile = "strict";
    std::vector<std::string> overrides;
    app.add_option("--scenario", scenario_path, "scenario file (JSON)")->required();
    app.add_option("--out", out_dir, "output directory for artifacts and the manifest");
    app.add_option("--tolerance-profile", profile, "strict, or leaky for tolerances scaled by 1e3")
        ->check(CLI::IsMember({"strict", "leaky"}));
    app.add_option("--budget-override", overrides, "budget override key=value (repeatable)");

    std::string command;
    app.add_subcommand("kernels", "build and persist kernel families")->callback([&] { command = "kernels"; });
    auto* verify = app.add_subcommand("verify", "identity suites");
    verify->require_subcommand(1);
    verify->add_subcommand("wick", "causal Wick theorem against the operator oracle")->callback([&] { command = "verify wick"; });
    verify->add_subcommand("transforms", "response round trips and reordering forms")->callback([&] {
        command = "verify transforms";
    });
    app.add_subcommand("dress", "diagram and functional-oracle dressing")->callback([&] { command = "dress"; });
    app.add_subcommand("moments", "mean field from dressed cumulants against the operator oracle")->callback([&] {
        command = "moments";
    });
    app.add_subcommand("rwa-scan", "narrow-band deviations against bandwidth")->callback([&] { command = "rwa-scan"; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        rqed::Scenario sc = rqed::load_scenario(scenario_path, parse_overrides(overrides));
        if (profile == "leaky") sc.tol.scale(1e3);
        rqed::RunOptions opt;
        opt.out_dir = out_dir;
        opt.threads = thread_count();
        std::filesystem::create_directories(opt.out_dir);

        rqed::RunResult res = rqed::run_command(command, sc, opt);
        sc.warnings.insert(sc.warnings.end(), res.warnings.begin(), res.warnings.end());
        for (auto& w : sc.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

        const auto manifest = opt.out_dir / "manifest.json";
        rqed::write_json(manifest, rqed::make_manifest(sc, command, profile, res.report, res.artifacts));
        for (auto& c : res.report.checks)
            std::printf("%-4s %-78s %.3e (tol %.1e)\n", c.pass() ? "ok" : "FAIL", c.name.c_str(), c.deviation, c.tolerance);
        std::printf("%s: %zu checks, max deviation %.3e, manifest %s\n", command.c_str(), res.report.checks.size(),
                    res.report.max_deviation(), manifest.string().c_str());
        if (const rqed::Check* f = res.report.first_failure()) {
            std::fprintf(stderr, "identity failure: %s: deviation %.3e exceeds tolerance %.1e\n", f->name.c_str(), f->deviation,
                         f->tolerance);
            return 1;
        }
        return 0;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    }
}
