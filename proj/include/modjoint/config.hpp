#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "modjoint/choice.hpp"
#include "modjoint/common.hpp"
#include "modjoint/costs.hpp"
#include "modjoint/network.hpp"
#include "modjoint/static_pricing.hpp"

namespace modjoint {

enum class Policy { Spd, Bpd, SeqStatic, BatchStatic };

Policy policy_from_string(const std::string& name);
const char* policy_name(Policy p);
bool policy_is_batched(Policy p);

enum class RebalanceMode { Auto, On, Off };

struct SyntheticDemandParams {
    double per_day = 2000.0;
    double peak1_hour = 8.0;
    double peak2_hour = 18.0;
    double peak_width_hours = 2.5;
    double base_level = 0.25;   // off-peak floor relative to peak height
    double spread = 0.8;        // cluster attractiveness dispersion, 0 = uniform
};

struct DemandRow {
    double time = 0.0;
    NodeId origin = -1;
    NodeId dest = -1;
};

/// Flat key=value run configuration. `load` resolves every key (defaults
/// included) so the snapshot in the run manifest is complete.
struct SimConfig {
    std::shared_ptr<RoadNetwork> net;
    ClusterMap clusters;
    ClusterTimes cluster_times;

    ChoiceParams choice;
    StaticPricingParams static_params;
    CostModel costs;
    SteadyStateModel steady;  // empty unless steady_csv given

    int n_exclusive = 50;
    int n_shared = 25;
    double batch_window_s = 30.0;
    double max_wait_s = 300.0;
    double max_delay_s = 600.0;
    double horizon_s = kSecondsPerDay;
    std::uint64_t seed = 1;
    int threads = 1;
    int cluster_count = 25;
    int intervals_per_day = 72;

    double outside_wait_s = 420.0;
    double outside_price_factor = 1.0;
    double outside_travel_factor = 1.0;
    std::optional<double> price_floor;
    bool retro_shared_own_duration = true;

    RebalanceMode rebalance = RebalanceMode::Auto;
    double rebalance_idle_s = 300.0;
    double wait_coef_exclusive = 2000.0;  // A in eta = A / sqrt(O), seconds
    double wait_coef_shared = 2000.0;

    std::string demand_source = "synthetic";  // "synthetic" or a CSV path
    SyntheticDemandParams synth;

    // debug dumps (set by the CLI, not config keys)
    std::string dump_graphs_prefix;
    std::string dump_ilp_prefix;

    // resolved snapshot (every known key), input paths and hashes
    std::map<std::string, std::string> snapshot;
    std::map<std::string, std::string> input_files;  // label -> path

    static SimConfig load(const std::string& path);
    static SimConfig from_map(std::map<std::string, std::string> kv, const std::string& base_dir);

    bool rebalance_enabled(Policy p) const;
    int interval_of(double sim_time) const;
    double interval_length_s() const { return kSecondsPerDay / intervals_per_day; }
    OdPair od_clusters(NodeId origin, NodeId dest) const;
};

/// Parses a `key = value` file with '#' comments. Unknown keys fail.
std::map<std::string, std::string> parse_config_file(const std::string& path);

/// Demand loading and synthesis. Loaded rows are validated against the
/// network (unknown nodes report the offending line).
std::vector<DemandRow> load_demand_csv(const std::string& path, const RoadNetwork& net);
std::vector<DemandRow> synthesize_demand(const RoadNetwork& net, const ClusterMap& clusters,
                                         const SyntheticDemandParams& params, std::uint64_t seed,
                                         int day_index, double horizon_s);
void save_demand_csv(const std::vector<DemandRow>& rows, const std::string& path);

/// Demand for one simulated day under this config.
std::vector<DemandRow> demand_for_day(const SimConfig& cfg, int day_index);

/// FNV-1a hash of a file's bytes, as fixed-width hex.
std::string file_hash_hex(const std::string& path);

}  // namespace modjoint
