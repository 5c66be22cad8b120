#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "revode/commands.hpp"
#include "revode/errors.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "revode_out";
    std::int64_t seed = -1;
    std::string engine;
};

void add_common(CLI::App* sub, CommonOpts& opts, bool with_engine) {
    sub->add_option("--config", opts.config_path, "JSON config file")->required();
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--seed", opts.seed, "override the config seed");
    if (with_engine) {
        sub->add_option("--engine", opts.engine,
                        "override the gradient engine (reversible|full_tape|checkpointed)");
    }
}

nlohmann::json resolve_config(const CommonOpts& opts) {
    nlohmann::json cfg = revode::cmd::load_config_file(opts.config_path);
    if (opts.seed >= 0) cfg["seed"] = static_cast<std::uint64_t>(opts.seed);
    if (!opts.engine.empty()) cfg["engine"] = opts.engine;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reversible ODE solvers: experiments and analysis"};
    app.require_subcommand(1);

    CommonOpts convergence_opts, stability_opts, gradcheck_opts, bench_opts, train_opts;
    auto* sub_convergence = app.add_subcommand("convergence", "global error vs step size sweep");
    add_common(sub_convergence, convergence_opts, false);
    auto* sub_stability = app.add_subcommand("stability", "(h alpha, lambda) stability scans");
    add_common(sub_stability, stability_opts, false);
    auto* sub_gradcheck = app.add_subcommand("gradcheck", "cross-check all gradient engines");
    add_common(sub_gradcheck, gradcheck_opts, true);
    auto* sub_bench = app.add_subcommand("bench", "memory/work counter matrix");
    add_common(sub_bench, bench_opts, false);
    auto* sub_train = app.add_subcommand("train", "fit a neural vector field");
    add_common(sub_train, train_opts, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        revode::cmd::CmdResult result;
        if (sub_convergence->parsed()) {
            result = revode::cmd::convergence(resolve_config(convergence_opts),
                                              convergence_opts.out_dir);
        } else if (sub_stability->parsed()) {
            result = revode::cmd::stability(resolve_config(stability_opts), stability_opts.out_dir);
        } else if (sub_gradcheck->parsed()) {
            result = revode::cmd::gradcheck(resolve_config(gradcheck_opts), gradcheck_opts.out_dir);
        } else if (sub_bench->parsed()) {
            result = revode::cmd::bench(resolve_config(bench_opts), bench_opts.out_dir);
        } else if (sub_train->parsed()) {
            result = revode::cmd::train(resolve_config(train_opts), train_opts.out_dir);
        }
        if (!result.summary.is_null()) {
            std::printf("%s\n", result.summary.dump(2).c_str());
        }
        return result.exit_code;
    } catch (const revode::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const revode::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const revode::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
}
