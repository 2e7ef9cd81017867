// hetfl command-line front end: run, compare, sweep, verify.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hetfl/common.hpp"
#include "hetfl/sim.hpp"
#include "hetfl/verify.hpp"

namespace fs = std::filesystem;
using namespace hetfl;

namespace {

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config: return 1;
        case ErrorKind::Infeasible: return 2;
        case ErrorKind::Numeric: return 3;
    }
    return 3;
}

const char* code_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Infeasible: return "infeasible";
        case ErrorKind::Numeric: return "numeric";
    }
    return "numeric";
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct Common {
    std::string config;
    std::string out = "out";
    std::map<std::string, std::string> overrides;
};

// every config key becomes --key; only flags actually given override the file
void add_config_flags(CLI::App* app, Common& c) {
    for (const auto& f : sim::config_fields()) {
        const std::string key = f.key;
        app->add_option_function<std::string>(
               "--" + key, [&c, key](const std::string& v) { c.overrides[key] = v; }, "config key " + key)
            ->group("Config overrides");
    }
    app->add_option("--config", c.config, "key = value config file");
    app->add_option("--out", c.out, "output directory");
}

sim::SimConfig resolve(const Common& c) {
    sim::SimConfig cfg;
    if (const char* env = std::getenv("HETFL_SEED")) sim::set_key(cfg, "seed", env);
    if (!c.config.empty()) cfg = sim::load_config_file(c.config, cfg);
    for (const auto& [k, v] : c.overrides) sim::set_key(cfg, k, v);
    cfg.validate();
    return cfg;
}

std::ofstream open_out(const fs::path& dir, const char* name) {
    fs::create_directories(dir);
    std::ofstream f(dir / name);
    if (!f) fail(ErrorKind::Config, "cannot write " + (dir / name).string());
    return f;
}

std::vector<sim::Policy> parse_policies(const std::string& s) {
    std::vector<sim::Policy> out;
    for (const auto& p : split_list(s)) out.push_back(sim::parse_policy(p));
    if (out.empty()) fail(ErrorKind::Config, "no policies given");
    return out;
}

std::vector<double> parse_values(const std::string& s) {
    std::vector<double> out;
    for (const auto& v : split_list(s)) {
        try {
            out.push_back(std::stod(v));
        } catch (const std::exception&) {
            fail(ErrorKind::Config, "bad sweep value '" + v + "'");
        }
    }
    return out;
}

void write_compare(const fs::path& dir, const sim::Comparison& cmp) {
    std::vector<sim::SweepRow> rows;
    for (const auto& s : cmp.summary) rows.push_back({"", "", s.policy, s.mean_delta, s.std_delta, s.mean_accuracy});
    auto sum = open_out(dir, "summary.csv");
    sim::write_sweep_rows(sum, rows);
    auto runs = open_out(dir, "runs.csv");
    sim::write_run_rows(runs, cmp.runs);
    auto pol = open_out(dir, "policies.csv");
    sim::write_policy_summary(pol, cmp.summary);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical federated learning over a wireless HetNet: energy and association simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    Common run_c, cmp_c, sweep_c, verify_c;
    std::string cmp_policies = "h2rma,random", sweep_policies = "h2rma,random";
    std::size_t cmp_seeds = 10, sweep_seeds = 10;
    std::string sweep_param, sweep_values;

    auto* run = app.add_subcommand("run", "single experiment");
    add_config_flags(run, run_c);

    auto* cmp = app.add_subcommand("compare", "association policies on shared seeds");
    add_config_flags(cmp, cmp_c);
    cmp->add_option("--policies", cmp_policies, "comma-separated policies");
    cmp->add_option("--seeds", cmp_seeds, "replicates per policy");

    auto* sw = app.add_subcommand("sweep", "compare over a parameter grid");
    add_config_flags(sw, sweep_c);
    sw->add_option("--param", sweep_param, "K, M, E_th or B_0")->required();
    sw->add_option("--values", sweep_values, "comma-separated values")->required();
    sw->add_option("--policies", sweep_policies, "comma-separated policies");
    sw->add_option("--seeds", sweep_seeds, "replicates per policy and value");

    auto* ver = app.add_subcommand("verify", "numerical self-checks");
    std::uint64_t verify_seed = 1;
    std::string verify_out;
    ver->add_option("--seed", verify_seed, "check seed");
    ver->add_option("--out", verify_out, "optional directory for verify.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "ERROR:config:" << e.what() << '\n';
        return 1;
    }

    try {
        if (run->parsed()) {
            const auto cfg = resolve(run_c);
            const auto res = sim::run_experiment(cfg);
            sim::export_run(run_c.out, res, "run");
            std::cout << "delta " << fmt_double(res.delta()) << " accuracy " << fmt_double(res.final_accuracy())
                      << " theta " << fmt_double(res.final_theta()) << '\n';
        } else if (cmp->parsed()) {
            const auto cfg = resolve(cmp_c);
            const auto cmp_res = sim::compare_policies(cfg, parse_policies(cmp_policies), cmp_seeds);
            write_compare(cmp_c.out, cmp_res);
            auto man = open_out(cmp_c.out, "manifest.cfg");
            sim::write_manifest(man, cfg, "compare");
            for (const auto& s : cmp_res.summary)
                std::cout << s.policy << " mean_delta " << fmt_double(s.mean_delta) << " mean_acc "
                          << fmt_double(s.mean_accuracy) << '\n';
        } else if (sw->parsed()) {
            const auto cfg = resolve(sweep_c);
            const auto res = sim::sweep(cfg, sweep_param, parse_values(sweep_values), parse_policies(sweep_policies),
                                        sweep_seeds);
            auto sum = open_out(sweep_c.out, "summary.csv");
            sim::write_sweep_rows(sum, res.rows);
            auto runs = open_out(sweep_c.out, "runs.csv");
            sim::write_run_rows(runs, res.runs);
            auto man = open_out(sweep_c.out, "manifest.cfg");
            sim::write_manifest(man, cfg, "sweep");
            std::cout << res.rows.size() << " rows\n";
        } else if (ver->parsed()) {
            const auto checks = verify::run_all(verify_seed);
            bool ok = true;
            std::ostringstream csv;
            csv << "check,pass,worst,tolerance\n";
            for (const auto& c : checks) {
                ok = ok && c.pass;
                std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " worst=" << fmt_double(c.worst)
                          << " tol=" << fmt_double(c.tolerance) << (c.detail.empty() ? "" : " " + c.detail) << '\n';
                csv << c.name << ',' << (c.pass ? 1 : 0) << ',' << fmt_double(c.worst) << ','
                    << fmt_double(c.tolerance) << '\n';
            }
            if (!verify_out.empty()) open_out(verify_out, "verify.csv") << csv.str();
            return ok ? 0 : 3;
        }
    } catch (const Error& e) {
        std::cerr << "ERROR:" << code_name(e.kind()) << ':' << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "ERROR:numeric:" << e.what() << '\n';
        return 3;
    }
    return 0;
}
