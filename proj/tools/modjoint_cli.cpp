// Command-line front end: simulation runs, pricing quotes, calibration and
// sensitivity experiments, synthetic data generation, and input validation.
//
// Exit codes: 0 success, 1 validation/input error, 2 usage error.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "modjoint/bpd_pricing.hpp"
#include "modjoint/config.hpp"
#include "modjoint/simulator.hpp"
#include "modjoint/spd_pricing.hpp"
#include "modjoint/static_pricing.hpp"

namespace {

using namespace modjoint;

constexpr const char* kVersion = "0.1.0";

std::string resolve_config_path(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("MODJOINT_CONFIG")) return env;
    throw ValidationError("no config given: pass --config or set MODJOINT_CONFIG");
}

nlohmann::ordered_json manifest_json(const SimConfig& cfg, const std::string& policy) {
    nlohmann::ordered_json m;
    m["artifact_version"] = kVersion;
    m["policy"] = policy;
    m["seed"] = cfg.seed;
    nlohmann::ordered_json snap;
    for (const auto& [k, v] : cfg.snapshot) snap[k] = v;
    m["config"] = snap;
    nlohmann::ordered_json hashes;
    for (const auto& [label, path] : cfg.input_files) hashes[label] = file_hash_hex(path);
    m["input_hashes"] = hashes;
    return m;
}

std::vector<double> parse_grid(const std::string& spec) {
    // "lo:hi:step" or a comma list
    std::vector<double> values;
    if (spec.find(':') != std::string::npos) {
        std::stringstream ss(spec);
        std::string a, b, c;
        std::getline(ss, a, ':');
        std::getline(ss, b, ':');
        std::getline(ss, c, ':');
        const double lo = std::stod(a), hi = std::stod(b), step = std::stod(c);
        if (!(step > 0)) throw ValidationError("grid step must be positive");
        for (double v = lo; v <= hi + 1e-12; v += step) values.push_back(v);
        return values;
    }
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) values.push_back(std::stod(part));
    return values;
}

int cmd_simulate(const std::string& config_path, const std::string& from_manifest,
                 const std::string& policy_name_in_raw, long seed_override, int threads_override,
                 const std::string& series_out, const std::string& steady_out, const std::string& costs_out,
                 const std::string& theta_out, const std::string& dump_graphs, const std::string& dump_ilp,
                 int indent) {
    std::string policy_name_in = policy_name_in_raw;
    SimConfig cfg = [&]() {
        if (from_manifest.empty()) return SimConfig::load(resolve_config_path(config_path));
        // rebuild the run from a previously emitted report
        std::ifstream in(from_manifest);
        if (!in) throw ValidationError("cannot open " + from_manifest);
        nlohmann::json report = nlohmann::json::parse(in, nullptr, true, true);
        const auto& manifest = report.at("manifest");
        std::map<std::string, std::string> kv;
        for (const auto& [k, v] : manifest.at("config").items()) kv[k] = v.get<std::string>();
        policy_name_in = manifest.at("policy").get<std::string>();
        return SimConfig::from_map(std::move(kv), "");
    }();
    if (seed_override >= 0) {
        cfg.seed = static_cast<std::uint64_t>(seed_override);
        cfg.snapshot["seed"] = std::to_string(seed_override);
    }
    if (threads_override > 0) {
        cfg.threads = threads_override;
        cfg.snapshot["threads"] = std::to_string(threads_override);
    }
    cfg.dump_graphs_prefix = dump_graphs;
    cfg.dump_ilp_prefix = dump_ilp;
    const Policy policy = policy_from_string(policy_name_in);
    Simulation sim(cfg, policy);
    const auto wall_start = std::chrono::steady_clock::now();
    SimReport report = sim.run();
    const double wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

    nlohmann::ordered_json out = nlohmann::ordered_json::parse(report.to_json());
    out["manifest"] = manifest_json(cfg, policy_name_in);
    std::cout << (indent >= 0 ? out.dump(indent) : out.dump()) << "\n";
    // wall-clock metadata stays off stdout so reports are byte-reproducible
    std::cerr << "simulated " << report.requests_total << " requests in " << wall_s << "s wall clock\n";

    if (!series_out.empty()) {
        std::ofstream f(series_out);
        if (!f) throw ValidationError("cannot write " + series_out);
        f << "day,requests,served,lost,declined,fares,profit\n";
        f.precision(17);
        for (size_t d = 0; d < report.days.size(); d++) {
            const auto& ds = report.days[d];
            f << d << ',' << ds.requests << ',' << ds.served << ',' << ds.lost << ',' << ds.declined << ','
              << ds.fares << ',' << ds.profit << "\n";
        }
    }
    if (!steady_out.empty()) sim.build_steady_state().save_csv(steady_out);
    if (!costs_out.empty()) {
        OdCostTable table = cfg.costs.od_expected_cost;
        table.update(sim.shared_cost_samples());
        table.save_csv(costs_out);
    }
    if (!theta_out.empty()) save_theta_csv(sim.estimate_theta(), theta_out);
    return 0;
}

int cmd_price_quote(double ue, double us, double uo, double ce, double cs, double beta_p) {
    SpdInstance inst{ue, us, uo, ce, cs, beta_p};
    PriceQuote q = spd_optimal_prices(inst);
    std::cout.precision(12);
    std::cout << "p_exclusive,p_shared,expected_profit\n";
    std::cout << q.price_exclusive << ',' << q.price_shared << ',' << q.expected_profit << "\n";
    return 0;
}

int cmd_batch_quote(double c1e, double c1s, double c2e, double c2s, double css, double d1e, double d1s,
                    double d2e, double d2s, double uo1, double uo2, double beta_p, double step) {
    BatchPricingInstance inst;
    inst.r1 = {c1s, c1e, d1s, d1e, uo1, true, true};
    inst.r2 = {c2s, c2e, d2s, d2e, uo2, true, true};
    inst.cost_pooled = css;
    inst.beta_p = beta_p;
    BatchQuote q = step > 0 ? brute_force_batch(inst, step) : optimize_batch_prices(inst);
    std::cout.precision(12);
    std::cout << "p_1s,p_1e,p_2s,p_2e,expected_profit,concave\n";
    std::cout << q.prices[0] << ',' << q.prices[1] << ',' << q.prices[2] << ',' << q.prices[3] << ','
              << q.expected_profit << ',' << (concavity_certificate(inst) ? 1 : 0) << "\n";
    return 0;
}

int cmd_calibrate(const std::string& config_path, const std::string& candidates) {
    SimConfig cfg = SimConfig::load(resolve_config_path(config_path));
    MultiplierCalibration cal = calibrate_price_multiplier(cfg, parse_grid(candidates));
    std::cout.precision(12);
    std::cout << "multiplier,mean_dynamic_price,mean_static_price\n";
    for (const auto& row : cal.rows)
        std::cout << row.multiplier << ',' << row.mean_dynamic_price << ',' << row.mean_static_price << "\n";
    std::cout << "chosen," << cal.chosen << ",\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& grid) {
    SimConfig cfg = SimConfig::load(resolve_config_path(config_path));
    SweepResult res = sweep_retrospective_multiplier(cfg, parse_grid(grid));
    std::cout.precision(17);
    std::cout << "multiplier,profit_spd,profit_bpd\n";
    for (const auto& row : res.rows)
        std::cout << row.multiplier << ',' << row.profit_spd << ',' << row.profit_bpd << "\n";
    std::cout << "argmax," << res.argmax_spd << ',' << res.argmax_bpd << "\n";
    return 0;
}

int cmd_cost_converge(const std::string& config_path, int days, const std::string& policy_name_in,
                      bool identical, const std::string& costs_out, const std::string& theta_out,
                      const std::string& steady_out) {
    SimConfig cfg = SimConfig::load(resolve_config_path(config_path));
    ConvergenceResult res = run_cost_convergence(cfg, days, policy_from_string(policy_name_in), identical);
    std::cout.precision(17);
    std::cout << "day,mad\n";
    for (size_t i = 0; i < res.mad_series.size(); i++) std::cout << (i + 2) << ',' << res.mad_series[i] << "\n";
    if (!costs_out.empty()) res.final_costs.save_csv(costs_out);
    if (!theta_out.empty()) save_theta_csv(res.theta, theta_out);
    if (!steady_out.empty()) res.steady.save_csv(steady_out);
    return 0;
}

int cmd_gen_demand(const std::string& config_path, const std::string& out, int day,
                   const std::string& emit_network) {
    SimConfig cfg = SimConfig::load(resolve_config_path(config_path));
    auto rows = synthesize_demand(*cfg.net, cfg.clusters, cfg.synth, cfg.seed, day, cfg.horizon_s);
    save_demand_csv(rows, out);
    if (!emit_network.empty()) {
        std::ofstream nodes(emit_network + "_nodes.csv");
        std::ofstream edges(emit_network + "_edges.csv");
        if (!nodes || !edges) throw ValidationError("cannot write network csvs at " + emit_network);
        nodes << "node_id,x,y\n";
        nodes.precision(17);
        for (NodeId id : cfg.net->node_ids()) {
            auto [x, y] = cfg.net->coords(id);
            nodes << id << ',' << x << ',' << y << "\n";
        }
        edges << "src,dst,travel_time_s,length_m\n";
        edges.precision(17);
        for (NodeId id : cfg.net->node_ids()) {
            auto table = cfg.net->sssp_from(id);
            // direct edges are the neighbors reached by a two-node path
            for (NodeId other : cfg.net->node_ids()) {
                if (other == id) continue;
                std::vector<NodeId> path;
                try {
                    path = cfg.net->shortest_path_nodes(id, other);
                } catch (const NoPathError&) {
                    continue;
                }
                if (path.size() == 2)
                    edges << id << ',' << other << ','
                          << table->seconds[static_cast<size_t>(cfg.net->index_of(other))] << ','
                          << table->meters[static_cast<size_t>(cfg.net->index_of(other))] << "\n";
            }
        }
    }
    std::cerr << "wrote " << rows.size() << " requests to " << out << "\n";
    return 0;
}

int cmd_validate(const std::string& config_path) {
    SimConfig cfg = SimConfig::load(resolve_config_path(config_path));
    // demand rows (if any) must reference known, mutually reachable nodes
    auto rows = demand_for_day(cfg, 0);
    std::cerr << "config ok: " << cfg.net->node_count() << " nodes, " << rows.size() << " demand rows, "
              << cfg.cluster_count << " clusters\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint dispatching and pricing for a mixed exclusive/shared fleet"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path, policy = "spd", series_out, steady_out, costs_out, theta_out;
    std::string from_manifest, dump_graphs, dump_ilp;
    long seed_override = -1;
    int threads_override = 0;
    int indent = -1;
    auto* sim_cmd = app.add_subcommand("simulate", "Run one simulation and print a JSON report");
    sim_cmd->add_option("--config", config_path, "Run configuration file");
    sim_cmd->add_option("--from-manifest", from_manifest, "Re-run from a previously emitted report");
    sim_cmd->add_option("--dump-graphs", dump_graphs, "Dump RV/ESV graphs per batch to <prefix>_{rv,esv}.csv");
    sim_cmd->add_option("--dump-ilp", dump_ilp, "Dump assignment problems to <prefix>_ilp.jsonl");
    sim_cmd->add_option("--policy", policy, "spd, bpd, seq-static, or batch-static");
    sim_cmd->add_option("--seed", seed_override, "Override the config seed");
    sim_cmd->add_option("--threads", threads_override, "Override worker thread count");
    sim_cmd->add_option("--series-out", series_out, "Write the per-day series CSV here");
    sim_cmd->add_option("--steady-out", steady_out, "Write the steady-state table built from this run");
    sim_cmd->add_option("--costs-out", costs_out, "Write the updated learned-cost table");
    sim_cmd->add_option("--theta-out", theta_out, "Write the estimated sharing probabilities");
    sim_cmd->add_option("--indent", indent, "Pretty-print the JSON report");

    double ue = 0, us = 0, uo = 0, ce = 0, cs = 0, beta_p = -0.1;
    auto* quote_cmd = app.add_subcommand("price-quote", "Closed-form sequential price menu");
    quote_cmd->add_option("--ue", ue, "Non-price utility of the exclusive offer")->required();
    quote_cmd->add_option("--us", us, "Non-price utility of the shared offer")->required();
    quote_cmd->add_option("--uo", uo, "Full outside utility")->required();
    quote_cmd->add_option("--ce", ce, "Exclusive cost")->required();
    quote_cmd->add_option("--cs", cs, "Shared cost")->required();
    quote_cmd->add_option("--beta-p", beta_p, "Price coefficient (< 0)")->required();

    double c1e = 0, c1s = 0, c2e = 0, c2s = 0, css = 0;
    double d1e = 0, d1s = 0, d2e = 0, d2s = 0, uo1 = 0, uo2 = 0, bstep = 0;
    auto* batch_cmd = app.add_subcommand("batch-quote", "Two-request batched price menu");
    batch_cmd->add_option("--c1e", c1e, "Exclusive cost, request 1")->required();
    batch_cmd->add_option("--c1s", c1s, "Solo-shared cost, request 1")->required();
    batch_cmd->add_option("--c2e", c2e, "Exclusive cost, request 2")->required();
    batch_cmd->add_option("--c2s", c2s, "Solo-shared cost, request 2")->required();
    batch_cmd->add_option("--css", css, "Pooled-trip cost")->required();
    batch_cmd->add_option("--d1e", d1e, "Non-price utility, exclusive offer 1");
    batch_cmd->add_option("--d1s", d1s, "Non-price utility, shared offer 1");
    batch_cmd->add_option("--d2e", d2e, "Non-price utility, exclusive offer 2");
    batch_cmd->add_option("--d2s", d2s, "Non-price utility, shared offer 2");
    batch_cmd->add_option("--uo1", uo1, "Full outside utility of request 1");
    batch_cmd->add_option("--uo2", uo2, "Full outside utility of request 2");
    batch_cmd->add_option("--beta-p", beta_p, "Price coefficient (< 0)")->required();
    batch_cmd->add_option("--step", bstep, "Force brute-force search with this grid step");

    std::string candidates = "1.2,1.4,1.6,1.8,2.0";
    auto* cal_cmd = app.add_subcommand("calibrate-multiplier", "Pick the price-coefficient multiplier");
    cal_cmd->add_option("--config", config_path, "Run configuration file");
    cal_cmd->add_option("--candidates", candidates, "Comma list or lo:hi:step");

    std::string grid = "0:1:0.1";
    auto* sweep_cmd = app.add_subcommand("sweep-retrospective", "Profit vs retrospective multiplier");
    sweep_cmd->add_option("--config", config_path, "Run configuration file");
    sweep_cmd->add_option("--grid", grid, "Comma list or lo:hi:step");

    int days = 7;
    bool identical = false;
    auto* conv_cmd = app.add_subcommand("cost-converge", "Daily expected-cost estimation loop");
    conv_cmd->add_option("--config", config_path, "Run configuration file");
    conv_cmd->add_option("--days", days, "Number of simulated days")->check(CLI::Range(2, 10000));
    conv_cmd->add_option("--policy", policy, "Policy driving the estimation runs");
    conv_cmd->add_flag("--identical-demand", identical, "Reuse day 0's demand every day");
    conv_cmd->add_option("--costs-out", costs_out, "Write the learned cost table");
    conv_cmd->add_option("--theta-out", theta_out, "Write the sharing probabilities");
    conv_cmd->add_option("--steady-out", steady_out, "Write the steady-state table");

    std::string demand_out = "demand.csv", emit_network;
    int gen_day = 0;
    auto* gen_cmd = app.add_subcommand("gen-demand", "Write a synthetic demand CSV");
    gen_cmd->add_option("--config", config_path, "Run configuration file");
    gen_cmd->add_option("--out", demand_out, "Output CSV path");
    gen_cmd->add_option("--day", gen_day, "Demand substream day index");
    gen_cmd->add_option("--emit-network", emit_network, "Also write <prefix>_nodes/_edges.csv");

    auto* val_cmd = app.add_subcommand("validate", "Check a config and its referenced files");
    val_cmd->add_option("--config", config_path, "Run configuration file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim_cmd->parsed())
            return cmd_simulate(config_path, from_manifest, policy, seed_override, threads_override,
                                series_out, steady_out, costs_out, theta_out, dump_graphs, dump_ilp, indent);
        if (quote_cmd->parsed()) return cmd_price_quote(ue, us, uo, ce, cs, beta_p);
        if (batch_cmd->parsed())
            return cmd_batch_quote(c1e, c1s, c2e, c2s, css, d1e, d1s, d2e, d2s, uo1, uo2, beta_p, bstep);
        if (cal_cmd->parsed()) return cmd_calibrate(config_path, candidates);
        if (sweep_cmd->parsed()) return cmd_sweep(config_path, grid);
        if (conv_cmd->parsed())
            return cmd_cost_converge(config_path, days, policy, identical, costs_out, theta_out, steady_out);
        if (gen_cmd->parsed()) return cmd_gen_demand(config_path, demand_out, gen_day, emit_network);
        if (val_cmd->parsed()) return cmd_validate(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
