#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "modjoint/common.hpp"

namespace modjoint {

using OdPair = std::pair<ClusterId, ClusterId>;

/// One possible future match for a shared request: probability the match
/// happens, marginal cost of adding the partner, and the partner's fare.
struct AlphaEntry {
    double alpha = 0.0;          // match probability
    double marginal_cost = 0.0;  // c_{r',r}
    double partner_price = 0.0;  // p_s^{r'}
};

/// Running mean of realized shared operational cost per O-D cluster pair.
/// Starts at zero everywhere and is updated once per simulated day.
class OdCostTable {
   public:
    double value(const OdPair& od) const;
    long samples(const OdPair& od) const;
    bool observed(const OdPair& od) const { return samples_for(od) > 0; }

    /// Merge one day's realized costs into the running means and return the
    /// mean absolute difference against the previous values over the cells
    /// that received samples today.
    double update(const std::vector<std::pair<OdPair, double>>& day_costs);

    void save_csv(const std::string& path) const;
    static OdCostTable load_csv(const std::string& path);

    const std::map<OdPair, std::pair<double, long>>& cells() const { return cells_; }

   private:
    long samples_for(const OdPair& od) const;
    std::map<OdPair, std::pair<double, long>> cells_;  // od -> (mean, count)
};

struct CostModel {
    double c0 = 0.0;                // fallback unmatched-ride cost
    std::map<OdPair, double> c0_table;  // optional per-OD override
    double per_mile_cost = 0.1458;  // currency per mile
    std::map<OdPair, std::vector<AlphaEntry>> alpha_table;
    OdCostTable od_expected_cost;   // learned E[c_s,operational]
    double lost_demand_penalty = 0.0;      // c_p
    double retrospective_multiplier = 0.0; // in [0, 1]

    double c0_for(const OdPair& od) const;
    void validate() const;
};

/// Expected operational cost of a shared request that is first on its trip:
/// (1 - sum(alpha)) * c0 + sum(alpha * (marginal_cost - partner_price)).
/// Falls back to c0 when the O-D pair has no alpha row.
double expected_shared_operational_cost(const CostModel& model, const OdPair& od);

/// One (cluster, time-interval) cell of the steady-state fleet-flow model.
struct SteadyCell {
    double vehicles_exclusive = 0.0;  // L_e
    double vehicles_shared = 0.0;     // L_s
    double open_exclusive = 0.0;      // O_e
    double open_shared = 0.0;         // O_s
    double trip_time_exclusive = 0.0; // T_e, seconds
    double trip_time_shared = 0.0;    // T_s, seconds
    double wait_coef_exclusive = 0.0; // A_e in eta = A / sqrt(O)
    double wait_coef_shared = 0.0;    // A_s
    double utilization_shared = 1.0;  // zeta_s in (0, 2]
    // listed prices and mean operational cost per trip, used for profit rates
    double price_exclusive = 0.0;
    double price_shared = 0.0;
    double op_cost_exclusive = 0.0;
    double op_cost_shared = 0.0;
};

class SteadyStateModel {
   public:
    SteadyStateModel() = default;
    SteadyStateModel(int clusters, int intervals);

    int clusters() const { return clusters_; }
    int intervals() const { return intervals_; }
    bool empty() const { return cells_.empty(); }

    SteadyCell& cell(ClusterId cluster, int interval);
    const SteadyCell& cell(ClusterId cluster, int interval) const;

    void save_csv(const std::string& path) const;
    static SteadyStateModel load_csv(const std::string& path);

   private:
    int clusters_ = 0, intervals_ = 0;
    std::vector<SteadyCell> cells_;
};

/// Wait time at a cell: eta = A / sqrt(O). Throws CalibrationError at O = 0.
double wait_time(double wait_coef, double open_vehicles);

/// Steady-state trip throughput of a cell (vehicles entering service per
/// second). Exclusive: (L - O) / (F(O) + T). Shared multiplies by zeta_s.
double throughput(const SteadyStateModel& model, ClusterId cluster, int interval, Mode mode);
double throughput_cell(const SteadyCell& cell, Mode mode);

/// Three-state occupancy chain of the shared fleet: vehicle counts by
/// onboard headcount for the capacity-two utilization model.
struct UtilizationModel {
    double n0 = 0.0, n1 = 0.0, n2 = 0.0;  // vehicles by onboard headcount
    double open_one = 0.0;                // O_s'
    double throughput_first = 0.0;        // Y_s
    double throughput_second = 0.0;       // Y_s'
    double p01 = 0.0, p10 = 0.0, p12 = 0.0, p21 = 0.0;
    double zeta_s = 0.0;                  // (N1 + 2 N2) / L_s
};

struct UtilizationInputs {
    double fleet_shared = 0.0;   // L_s
    double open_empty = 0.0;     // O_s
    double open_one = 0.0;       // O_s'
    double wait_empty = 0.0;     // eta_s = F_s(O_s)
    double wait_one = 0.0;       // eta_s'
    double trip_time_first = 0.0;   // T_s
    double trip_time_second = 0.0;  // T_s'
};

/// Calibrates Y_s, Y_s' so the chain is balanced under the simplification
/// that empty and one-customer vehicles pick up at the same per-vehicle
/// rate (P01 = P12), and the state counts sum to the fleet size.
UtilizationModel solve_utilization(const UtilizationInputs& in);

/// zeta_s from raw state counts.
double utilization_from_counts(double n0, double n1, double n2, double fleet_shared);

/// Per (cluster, interval, mode) average profit per second per vehicle.
class RegionProfitRates {
   public:
    RegionProfitRates() = default;
    RegionProfitRates(int clusters, int intervals);

    bool empty() const { return rates_.empty(); }
    double rate(ClusterId cluster, int interval, Mode mode) const;
    double& rate_ref(ClusterId cluster, int interval, Mode mode);
    int intervals() const { return intervals_; }

   private:
    int clusters_ = 0, intervals_ = 0;
    std::vector<double> rates_;  // [cluster][interval][mode e/s]
};

/// epsilon_bar = Y * (listed price - operational cost per trip) / L,
/// clamped at zero, per cell and mode. Cells with no open vehicles or no
/// fleet yield zero.
RegionProfitRates region_profit_rates(const SteadyStateModel& model);

/// Retrospective cost of blocking a mode-m vehicle on an o->d trip:
/// multiplier * (eps[o] * trip_seconds + (eps[o] - eps[d]) * horizon_seconds).
double retrospective_cost(const RegionProfitRates& rates, Mode mode, ClusterId origin_cluster,
                          ClusterId dest_cluster, int interval, double trip_seconds,
                          double horizon_seconds, double multiplier);

/// Aggregate per-OD match statistics from one day of trip logs into an
/// alpha table (single aggregated row per OD pair).
struct SharedTripRecord {
    OdPair od;
    bool matched = false;
    double marginal_cost = 0.0;   // only when matched
    double partner_price = 0.0;   // only when matched
};
std::map<OdPair, std::vector<AlphaEntry>> estimate_alpha_table(const std::vector<SharedTripRecord>& records,
                                                               double fallback_c0);

}  // namespace modjoint
