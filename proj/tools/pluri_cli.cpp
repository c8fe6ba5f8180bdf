#include "pluri/cli_runner.hpp"
#include "pluri/common.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
    CLI::App app{"Experiments for a priori estimates of complex Monge-Ampere equations"};
    app.require_subcommand(1, 1);
    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    app.add_option("--config", config_path, "key = value file with optional [subcommand] sections");
    app.add_option("--out", out_dir, "output directory (default pluri_out)");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--threads", threads, "worker threads");
    for (const std::string& s : pluri::subcommands()) {
        const std::string what = s == "all" ? "run every experiment" : "run the " + s + " experiment";
        CLI::App* sub = app.add_subcommand(s, what + "; extra --key value pairs override the config");
        sub->allow_extras();
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    pluri::ExperimentConfig cfg;
    CLI::App* sub = app.get_subcommands().front();
    cfg.subcommand = sub->get_name();
    try {
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) {
                std::cerr << "cannot read " << config_path << "\n";
                return 2;
            }
            std::stringstream ss;
            ss << f.rdbuf();
            pluri::parse_config_text(ss.str(), cfg);
        }
        pluri::parse_flag_pairs(sub->remaining(), cfg);
    } catch (const pluri::Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    if (app.count("--out")) cfg.flags["out"] = out_dir;
    if (app.count("--seed")) cfg.flags["seed"] = std::to_string(seed);
    if (app.count("--threads")) cfg.flags["threads"] = std::to_string(threads);

    pluri::RunResult r;
    try {
        r = pluri::run_and_write(cfg);
    } catch (const pluri::Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    std::cout << cfg.subcommand << " " << (r.exit_code == 0 ? "passed" : "failed") << " -> " << cfg.output_dir() << "\n";
    for (const auto& f : r.failed) std::cout << "  " << f << "\n";
    return r.exit_code;
}
