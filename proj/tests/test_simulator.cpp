#include "doctest.h"

#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include "modjoint/rng.hpp"

#include "modjoint/simulator.hpp"
#include "modjoint/static_pricing.hpp"

using namespace modjoint;

namespace {

std::map<std::string, std::string> base_map() {
    return {
        {"network", "grid:6x6:250:8"}, {"clusters", "4"},       {"intervals_per_day", "72"},
        {"n_exclusive", "6"},          {"n_shared", "4"},       {"max_wait_s", "300"},
        {"max_delay_s", "600"},        {"batch_window_s", "30"},{"seed", "3"},
        {"demand_per_day", "150"},     {"c_p", "2.0"},          {"beta_p", "-0.12"},
        {"beta_w", "-0.004"},          {"beta_t", "-0.002"},    {"outside_wait_s", "420"},
    };
}

SimConfig config_from(std::map<std::string, std::string> kv) { return SimConfig::from_map(std::move(kv), ""); }

}  // namespace

TEST_CASE("static price arithmetic") {
    StaticPricingParams p;
    p.min_fare = 5.0;
    p.base_fare = 2.0;
    p.time_rate = 0.35 / 60.0;
    p.distance_rate = 1.75;
    CHECK(static_price(p, 0.0, 0.0) == doctest::Approx(5.0));
    CHECK(static_price(p, 600.0, 2.0) == doctest::Approx(9.0));
    CHECK(static_price(p, 60.0, 0.1) == doctest::Approx(5.0));  // floor active
}

TEST_CASE("static shared split") {
    StaticPricingParams p;
    CHECK(static_shared_price(p, 10.0, {0, 1}) == doctest::Approx(12.0));  // theta defaults to 0
    p.theta_table[{0, 1}] = 1.0;
    CHECK(static_shared_price(p, 10.0, {0, 1}) == doctest::Approx(9.0));
    p.theta_table[{0, 1}] = 0.5;
    CHECK(static_shared_price(p, 10.0, {0, 1}) == doctest::Approx(10.5));
}

TEST_CASE("zero demand is an empty report") {
    auto kv = base_map();
    kv["demand_per_day"] = "0";
    SimConfig cfg = config_from(kv);
    for (Policy p : {Policy::Spd, Policy::Bpd, Policy::SeqStatic, Policy::BatchStatic}) {
        SimReport r = run_simulation(cfg, p);
        CHECK(r.requests_total == 0);
        CHECK(r.served == 0);
        CHECK(r.total_profit == doctest::Approx(0.0));
        CHECK(r.total_fares == doctest::Approx(0.0));
        CHECK(r.market_share == doctest::Approx(0.0));
    }
}

TEST_CASE("hand-traced single request on a co-located exclusive vehicle") {
    auto kv = base_map();
    kv["network"] = "grid:1x3:300:10";  // 3 nodes in a line, 30 s hops
    kv["clusters"] = "1";
    kv["n_exclusive"] = "1";
    kv["n_shared"] = "0";
    kv["outside_price_factor"] = "100";  // outside option priced out
    kv["seed"] = "5";
    SimConfig cfg = config_from(kv);

    // place the request at the vehicle's start node (fleet substream is
    // part of the seeding contract)
    Rng fleet(cfg.seed, "fleet");
    const NodeId start = cfg.net->id_of(static_cast<int>(fleet.below(3)));
    const NodeId dest = start == 2 ? 0 : 2;
    const char* demand = "/tmp/mj_one_req.csv";
    {
        std::ofstream d(demand);
        d << "request_time_s,origin_node,dest_node\n100.0," << start << "," << dest << "\n";
    }
    kv["demand"] = demand;
    cfg = config_from(kv);

    Simulation sim(cfg, Policy::Spd);
    SimReport r = sim.run();
    CHECK(r.requests_total == 1);
    CHECK(r.served == 1);
    CHECK(r.served_exclusive == 1);
    CHECK(r.mean_wait_s == doctest::Approx(0.0));

    const PathCost pc = cfg.net->shortest_path_cost(start, dest);
    const double op = cfg.costs.per_mile_cost * pc.meters / kMetersPerMile;
    CHECK(r.total_operational_cost == doctest::Approx(op).epsilon(1e-12));
    // realized profit is the quoted fare minus the per-mile cost
    CHECK(r.total_profit == doctest::Approx(r.total_fares - op).epsilon(1e-12));
    CHECK(r.total_fares == doctest::Approx(r.mean_price).epsilon(1e-12));
    CHECK(r.mean_price > op);  // priced above cost
    REQUIRE(sim.trips().size() == 1);
    CHECK(sim.trips()[0].travel == doctest::Approx(pc.seconds));
}

TEST_CASE("fixed seed gives byte-identical reports across runs and thread counts") {
    for (const char* policy : {"spd", "bpd"}) {
        auto kv = base_map();
        kv["seed"] = "11";
        const std::string a = run_simulation(config_from(kv), policy_from_string(policy)).to_json();
        const std::string b = run_simulation(config_from(kv), policy_from_string(policy)).to_json();
        CHECK(a == b);
        kv["threads"] = "4";
        const std::string c = run_simulation(config_from(kv), policy_from_string(policy)).to_json();
        CHECK(a == c);
    }
}

TEST_CASE("conservation, windows and accounting over all policies") {
    for (Policy p : {Policy::Spd, Policy::Bpd, Policy::SeqStatic, Policy::BatchStatic}) {
        auto kv = base_map();
        kv["seed"] = "21";
        kv["demand_per_day"] = "250";
        SimConfig cfg = config_from(kv);
        Simulation sim(cfg, p);
        SimReport r = sim.run();
        CHECK(r.requests_total > 150);  // Poisson around 250
        CHECK(r.served + r.lost + r.declined == r.requests_total);
        CHECK(r.no_offer <= r.declined);
        CHECK(r.market_share == doctest::Approx(static_cast<double>(r.served) / r.requests_total));

        // every served trip meets its windows at realization
        double fares = 0.0;
        for (const auto& t : sim.trips()) {
            CHECK(t.wait <= cfg.max_wait_s + 1e-6);
            CHECK(t.delay <= cfg.max_delay_s + 1e-6);
            CHECK(t.wait >= -1e-9);
            fares += t.fare;
        }
        CHECK(static_cast<long>(sim.trips().size()) == r.served);
        CHECK(fares == doctest::Approx(r.total_fares).epsilon(1e-9));
        CHECK(r.total_profit ==
              doctest::Approx(r.total_fares - r.total_operational_cost - r.total_penalties).epsilon(1e-12));
        CHECK(r.total_penalties == doctest::Approx(r.lost * cfg.costs.lost_demand_penalty).epsilon(1e-12));
    }
}

TEST_CASE("two shared acceptances pool onto one capacity-2 vehicle") {
    auto kv = base_map();
    kv["network"] = "grid:1x4:300:10";
    kv["clusters"] = "1";
    kv["n_exclusive"] = "0";
    kv["n_shared"] = "1";
    kv["outside_price_factor"] = "100";
    // pick a seed whose per-request choice draws are far from the small
    // outside mass, so both customers accept deterministically
    for (std::uint64_t seed = 1;; seed++) {
        const std::uint64_t cs = Rng::stream_seed(seed, "choice");
        if (Rng::unit_for(cs, 0) < 0.5 && Rng::unit_for(cs, 1) < 0.5) {
            kv["seed"] = std::to_string(seed);
            break;
        }
    }
    const char* demand = "/tmp/mj_pair_req.csv";
    {
        std::ofstream d(demand);
        d << "request_time_s,origin_node,dest_node\n10.0,0,3\n11.0,0,3\n";
    }
    kv["demand"] = demand;
    // learned shared costs must be positive for the pooled matching to
    // clear the nonnegative-savings gate
    const char* costs = "/tmp/mj_pair_costs.csv";
    {
        std::ofstream c(costs);
        c << "o_cluster,d_cluster,expected_cost,samples\n0,0,1.0,10\n";
    }
    kv["costs_csv"] = costs;
    SimConfig cfg = config_from(kv);
    Simulation sim(cfg, Policy::Bpd);
    SimReport r = sim.run();
    CHECK(r.requests_total == 2);
    CHECK(r.served == 2);
    CHECK(r.served_shared == 2);
    CHECK(r.lost == 0);
    CHECK(r.pooled_trips == 1);
}

TEST_CASE("two exclusive acceptances on one busy vehicle lose the later one") {
    auto kv = base_map();
    kv["network"] = "grid:1x12:400:8";  // long line: trips take minutes
    kv["clusters"] = "1";
    kv["n_exclusive"] = "1";
    kv["n_shared"] = "0";
    kv["outside_price_factor"] = "100";
    kv["max_wait_s"] = "240";
    kv["c_p"] = "3.5";
    for (std::uint64_t seed = 1;; seed++) {
        const std::uint64_t cs = Rng::stream_seed(seed, "choice");
        if (Rng::unit_for(cs, 0) < 0.5 && Rng::unit_for(cs, 1) < 0.5) {
            kv["seed"] = std::to_string(seed);
            break;
        }
    }
    SimConfig base_cfg = config_from(kv);
    Rng fleet(base_cfg.seed, "fleet");
    const int start = static_cast<int>(fleet.below(12));
    // both requests start at the vehicle's node and cross the line
    const int dest = start < 6 ? 11 : 0;
    const char* demand = "/tmp/mj_conflict_req.csv";
    {
        std::ofstream d(demand);
        d << "request_time_s,origin_node,dest_node\n10.0," << start << "," << dest << "\n11.0," << start
          << "," << dest << "\n";
    }
    kv["demand"] = demand;
    SimConfig cfg = config_from(kv);
    Simulation sim(cfg, Policy::Bpd);
    SimReport r = sim.run();
    CHECK(r.requests_total == 2);
    CHECK(r.served == 1);
    CHECK(r.lost == 1);
    CHECK(r.total_penalties == doctest::Approx(3.5));
    // the earlier request is the one kept
    REQUIRE(sim.trips().size() == 1);
    CHECK(sim.trips()[0].request == 0);
}

TEST_CASE("cost convergence series") {
    auto kv = base_map();
    kv["demand_per_day"] = "120";
    kv["n_exclusive"] = "4";
    kv["n_shared"] = "6";
    SimConfig cfg = config_from(kv);

    SUBCASE("two days yield a single MAD value") {
        ConvergenceResult res = run_cost_convergence(cfg, 2);
        CHECK(res.mad_series.size() == 1);
    }
    SUBCASE("identical demand reaches the fixed point immediately") {
        ConvergenceResult res = run_cost_convergence(cfg, 4, Policy::Spd, true);
        REQUIRE(res.mad_series.size() == 3);
        CHECK(res.mad_series[0] <= 1e-9);  // day 2
        CHECK(res.mad_series[1] <= 1e-9);  // day 3
        CHECK(res.mad_series[2] <= 1e-9);
    }
    SUBCASE("identically distributed days trend down") {
        ConvergenceResult res = run_cost_convergence(cfg, 7);
        REQUIRE(res.mad_series.size() == 6);
        CHECK(res.mad_series.back() < res.mad_series.front());
    }
    CHECK_THROWS_AS(run_cost_convergence(cfg, 1), ValidationError);
}

TEST_CASE("multiplier calibration") {
    auto kv = base_map();
    kv["demand_per_day"] = "120";
    SimConfig cfg = config_from(kv);
    SUBCASE("a single candidate is chosen") {
        MultiplierCalibration cal = calibrate_price_multiplier(cfg, {1.4});
        CHECK(cal.chosen == doctest::Approx(1.4));
        CHECK(cal.rows.size() == 1);
    }
    SUBCASE("the gap-minimizing candidate wins") {
        MultiplierCalibration cal = calibrate_price_multiplier(cfg, {1.0, 1.4, 1.8, 2.2, 2.6});
        REQUIRE(cal.rows.size() == 5);
        double best_gap = 1e300;
        double best_m = 0;
        for (const auto& row : cal.rows) {
            const double gap = std::fabs(row.mean_dynamic_price - row.mean_static_price);
            if (gap < best_gap - 1e-12) {
                best_gap = gap;
                best_m = row.multiplier;
            }
        }
        CHECK(cal.chosen == doctest::Approx(best_m));
        // mean dynamic price falls as the price coefficient scales up
        CHECK(cal.rows.back().mean_dynamic_price < cal.rows.front().mean_dynamic_price);
    }
}

TEST_CASE("retrospective sweep: multiplier zero is bit-identical to a plain run") {
    auto kv = base_map();
    kv["demand_per_day"] = "150";
    kv["demand_spread"] = "1.6";
    kv["clusters"] = "2";
    kv["n_exclusive"] = "5";
    kv["n_shared"] = "3";
    SimConfig cfg = config_from(kv);

    // build steady-state tables from a logging run, as the CLI would
    Simulation baseline(cfg, Policy::Spd);
    baseline.run();
    SteadyStateModel steady = baseline.build_steady_state();
    const char* steady_path = "/tmp/mj_steady_sweep.csv";
    steady.save_csv(steady_path);

    kv["steady_csv"] = steady_path;
    SimConfig cfg2 = config_from(kv);
    SweepResult sweep = sweep_retrospective_multiplier(cfg2, {0.0, 0.5, 1.0});
    REQUIRE(sweep.rows.size() == 3);

    SimConfig plain = cfg2;
    plain.costs.retrospective_multiplier = 0.0;
    const SimReport plain_spd = run_simulation(plain, Policy::Spd);
    const SimReport plain_bpd = run_simulation(plain, Policy::Bpd);
    CHECK(sweep.rows[0].profit_spd == plain_spd.total_profit);  // bitwise
    CHECK(sweep.rows[0].profit_bpd == plain_bpd.total_profit);
}

TEST_CASE("theta estimation and steady-state build from a run") {
    auto kv = base_map();
    kv["demand_per_day"] = "250";
    kv["n_shared"] = "8";
    kv["n_exclusive"] = "4";
    SimConfig cfg = config_from(kv);
    Simulation sim(cfg, Policy::Spd);
    sim.run();
    auto theta = sim.estimate_theta();
    for (const auto& [od, t] : theta) {
        CHECK(t >= 0.0);
        CHECK(t <= 1.0);
    }
    SteadyStateModel steady = sim.build_steady_state();
    CHECK(steady.clusters() == cfg.clusters.k);
    // flow balance on populated cells (throughput construction)
    int populated = 0;
    for (int c = 0; c < steady.clusters(); c++)
        for (int i = 0; i < steady.intervals(); i++) {
            const SteadyCell& cell = steady.cell(c, i);
            if (cell.vehicles_exclusive <= 0 || cell.open_exclusive <= 0) continue;
            populated++;
            const double y = throughput_cell(cell, Mode::Exclusive);
            const double eta = wait_time(cell.wait_coef_exclusive, cell.open_exclusive);
            CHECK(cell.vehicles_exclusive ==
                  doctest::Approx(cell.open_exclusive + (eta + cell.trip_time_exclusive) * y).epsilon(1e-9));
        }
    CHECK(populated > 0);
}

TEST_CASE("day series sum to the totals") {
    auto kv = base_map();
    kv["demand_per_day"] = "120";
    SimConfig cfg = config_from(kv);
    SimReport r = run_simulation(cfg, Policy::SeqStatic);
    long reqs = 0, served = 0;
    double fares = 0;
    for (const auto& d : r.days) {
        reqs += d.requests;
        served += d.served;
        fares += d.fares;
    }
    CHECK(reqs == r.requests_total);
    CHECK(served == r.served);
    CHECK(fares == doctest::Approx(r.total_fares).epsilon(1e-9));
}
