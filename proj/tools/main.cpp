#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "stla/config.hpp"
#include "stla/report.hpp"

namespace {

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> tol;
    bool verbose = false;
};

void add_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "analysis configuration (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", f.out, "directory for report.json, report.txt and CSV artifacts");
    cmd->add_option("--seed", f.seed, "seed for the quasi-random sampling (overrides the config)");
    cmd->add_option("--tol", f.tol, "relative vanishing tolerance (overrides the config)")->check(CLI::PositiveNumber);
    cmd->add_flag("--verbose", f.verbose, "print the machine-readable report to stdout as well");
}

int execute(const Flags& f, std::optional<stla::cli::Task> only) {
    using namespace stla;
    cli::AnalysisConfig cfg;
    try {
        cfg = cli::load_config(f.config);
    } catch (const Error& e) {
        std::cerr << "stla: " << to_string(e.kind()) << ": " << e.what() << "\n";
        return 1;
    }
    if (f.seed) {
        cfg.seed = *f.seed;
        cfg.options.seed = *f.seed;
        cfg.holder.options.seed = *f.seed;
    }
    if (f.tol) cfg.options.tol_rel = *f.tol;

    std::vector<cli::Task> tasks = cfg.tasks;
    if (only) {
        if (*only == cli::Task::Reach && cfg.reach.starts.empty()) {
            std::cerr << "stla: config: the reach command needs analysis.reach.starts\n";
            return 1;
        }
        if (*only == cli::Task::Expansion && !cfg.expansion) {
            std::cerr << "stla: config: the expansion command needs an analysis.expansion block\n";
            return 1;
        }
        tasks = {*only};
    }
    const auto report = cli::run(cfg, tasks);
    std::cout << report.text;
    if (f.verbose) std::cout << report.json;
    if (!f.out.empty()) {
        try {
            cli::write_report(report, f.out);
        } catch (const Error& e) {
            std::cerr << "stla: " << to_string(e.kind()) << ": " << e.what() << "\n";
            return 1;
        }
    }
    return report.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Small-time local attainability analysis for nonlinear control systems"};
    app.require_subcommand(1);

    struct Entry {
        const char* name;
        const char* help;
        std::optional<stla::cli::Task> task;
    };
    const Entry entries[] = {
        {"run", "run every task listed in the config", std::nullopt},
        {"certify", "check the sufficient conditions at every configured point", stla::cli::Task::Certify},
        {"search", "enumerate switching groups with a usable rate of change", stla::cli::Task::Search},
        {"reach", "build target-reaching controls from the configured starts", stla::cli::Task::Reach},
        {"holder", "fit the exponent of the minimum time estimate", stla::cli::Task::Holder},
        {"identities", "run the operator identity suite on the configured fields", stla::cli::Task::Identities},
        {"expansion", "measure the remainder order of a trajectory expansion", stla::cli::Task::Expansion},
    };
    Flags flags;
    std::optional<stla::cli::Task> chosen;
    for (const auto& e : entries) {
        auto* cmd = app.add_subcommand(e.name, e.help);
        add_flags(cmd, flags);
        cmd->callback([&chosen, task = e.task] { chosen = task; });
    }
    CLI11_PARSE(app, argc, argv);
    return execute(flags, chosen);
}
