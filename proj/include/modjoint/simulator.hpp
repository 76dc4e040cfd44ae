#pragma once

#include <string>
#include <vector>

#include "modjoint/assignment.hpp"
#include "modjoint/bpd_pricing.hpp"
#include "modjoint/config.hpp"
#include "modjoint/costs.hpp"
#include "modjoint/matching.hpp"
#include "modjoint/spd_pricing.hpp"

namespace modjoint {

struct DayStats {
    long requests = 0, served = 0, lost = 0, declined = 0;
    double profit = 0.0;
    double fares = 0.0;
};

struct SimReport {
    std::string policy;
    // accounting: profit = fares - operational costs - penalties
    double total_profit = 0.0;
    double total_fares = 0.0;
    double total_operational_cost = 0.0;
    double total_penalties = 0.0;

    long requests_total = 0;
    long served = 0;      // completed their trip
    long lost = 0;        // accepted but displaced by overbooking
    long declined = 0;    // chose (or were left with) the outside option
    long no_offer = 0;    // subset of declined that never saw a menu

    double market_share = 0.0;  // served / requests_total
    double mean_price = 0.0;    // over served trips
    double mean_wait_s = 0.0;
    double mean_delay_s = 0.0;

    long served_exclusive = 0;
    long served_shared = 0;
    long pooled_trips = 0;  // shared trips that carried two requests
    double mean_price_exclusive = 0.0;
    double mean_price_shared = 0.0;
    double mean_quoted_exclusive = 0.0;  // over all quotes that offered it
    double mean_static_exclusive = 0.0;  // static benchmark on the same quotes

    std::vector<DayStats> days;

    std::string to_json(int indent = -1) const;
};

/// One realized trip, for learning and diagnostics.
struct TripLogEntry {
    RequestId request = -1;
    Mode mode = Mode::Exclusive;
    OdPair od{0, 0};
    double fare = 0.0;
    double wait = 0.0;
    double travel = 0.0;
    double delay = 0.0;
    bool shared_initiator = false;  // vehicle was empty at commitment
    bool pooled = false;            // a partner joined while active
    double realized_shared_cost = 0.0;  // attributed cost sample (see costs)
};

class Simulation {
   public:
    Simulation(const SimConfig& cfg, Policy policy);

    /// Choice sampling ignores quoted prices and uses the static benchmark
    /// menu instead. Used by the cost-estimation loop, which treats demand
    /// as exogenous.
    void set_exogenous_choice(bool on) { exogenous_choice_ = on; }
    void set_day_index(int day) { day_index_ = day; }
    void set_learned_costs(OdCostTable table) { cfg_.costs.od_expected_cost = std::move(table); }
    const OdCostTable& learned_costs() const { return cfg_.costs.od_expected_cost; }

    SimReport run();

    // post-run artifacts
    const std::vector<TripLogEntry>& trips() const { return trips_; }
    std::vector<std::pair<OdPair, double>> shared_cost_samples() const;
    std::vector<SharedTripRecord> shared_trip_records() const;
    std::map<OdPair, double> estimate_theta() const;
    SteadyStateModel build_steady_state() const;

   private:
    struct Impl;
    SimConfig cfg_;
    Policy policy_;
    bool exogenous_choice_ = false;
    int day_index_ = 0;
    std::vector<TripLogEntry> trips_;

    // quote-level aggregates for the steady-state build
    struct CellQuoteStats {
        double wait_e = 0, travel_e = 0, cost_e = 0;
        long n_e = 0;
        double wait_s = 0, travel_s = 0, cost_s = 0;
        long n_s = 0;
        double u_outside = 0;
        long n_o = 0;
    };
    struct CellTickStats {
        double count_e = 0, idle_e = 0;
        double count_s = 0, idle_s_empty = 0, s_one = 0, s_two = 0;
        long ticks = 0;
        double trip_dur_e = 0, trip_dur_s = 0;
        long trips_e = 0, trips_s = 0;
    };
    std::vector<CellQuoteStats> quote_stats_;
    std::vector<CellTickStats> tick_stats_;
    double wait_sum_e_ = 0, wait_sum_s_ = 0;
    long wait_n_e_ = 0, wait_n_s_ = 0;

    friend struct SimRun;
};

SimReport run_simulation(const SimConfig& cfg, Policy policy);

struct ConvergenceResult {
    std::vector<double> mad_series;  // one value per day after day 1
    OdCostTable final_costs;
    std::map<OdPair, double> theta;
    SteadyStateModel steady;
};

/// Repeats one-day simulations, updating the learned O-D cost table after
/// each day; demand is redrawn per day unless identical_demand is set.
ConvergenceResult run_cost_convergence(const SimConfig& cfg, int n_days, Policy policy = Policy::Spd,
                                       bool identical_demand = false);

struct MultiplierCalibration {
    double chosen = 1.0;
    struct Row {
        double multiplier;
        double mean_dynamic_price;
        double mean_static_price;
    };
    std::vector<Row> rows;
};

/// Simulates one day per candidate multiplier and picks the one whose mean
/// quoted exclusive price lands closest to the static benchmark mean.
MultiplierCalibration calibrate_price_multiplier(const SimConfig& cfg,
                                                 const std::vector<double>& candidates);

struct SweepResult {
    struct Row {
        double multiplier;
        double profit_spd;
        double profit_bpd;
    };
    std::vector<Row> rows;
    double argmax_spd = 0.0;
    double argmax_bpd = 0.0;
};

/// Runs SPD and BPD once per multiplier value on the same config.
SweepResult sweep_retrospective_multiplier(const SimConfig& cfg, const std::vector<double>& grid);

}  // namespace modjoint
