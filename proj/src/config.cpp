#include "modjoint/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace modjoint {

Policy policy_from_string(const std::string& name) {
    if (name == "spd") return Policy::Spd;
    if (name == "bpd") return Policy::Bpd;
    if (name == "seq-static") return Policy::SeqStatic;
    if (name == "batch-static") return Policy::BatchStatic;
    throw ValidationError("unknown policy '" + name + "' (spd, bpd, seq-static, batch-static)");
}

const char* policy_name(Policy p) {
    switch (p) {
        case Policy::Spd: return "spd";
        case Policy::Bpd: return "bpd";
        case Policy::SeqStatic: return "seq-static";
        case Policy::BatchStatic: return "batch-static";
    }
    return "?";
}

bool policy_is_batched(Policy p) { return p == Policy::Bpd || p == Policy::BatchStatic; }

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "network", "network_nodes", "network_edges", "clusters", "intervals_per_day",
        "n_exclusive", "n_shared", "batch_window_s", "max_wait_s", "max_delay_s", "horizon_s",
        "seed", "threads",
        "beta_p", "beta_w", "beta_t", "price_multiplier", "asc_exclusive", "asc_shared", "asc_outside",
        "per_mile_cost", "c0", "c_p", "retrospective_multiplier",
        "costs_csv", "steady_csv", "theta_csv",
        "f_min", "f_base", "f_t", "f_d", "shared_base_discount", "shared_surcharge",
        "outside_wait_s", "outside_price_factor", "outside_travel_factor",
        "price_floor", "retro_shared_own_duration",
        "rebalance", "rebalance_idle_s", "wait_coef_exclusive", "wait_coef_shared",
        "demand", "demand_per_day", "demand_peak1_h", "demand_peak2_h", "demand_peak_width_h",
        "demand_base_level", "demand_spread",
    };
    return keys;
}

double to_double(const std::map<std::string, std::string>& kv, const std::string& key) {
    try {
        return std::stod(kv.at(key));
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "' has a bad numeric value '" + kv.at(key) + "'");
    }
}

long to_long(const std::map<std::string, std::string>& kv, const std::string& key) {
    try {
        return std::stol(kv.at(key));
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "' has a bad integer value '" + kv.at(key) + "'");
    }
}

std::string resolve_path(const std::string& base_dir, const std::string& p) {
    if (p.empty() || p.front() == '/' || base_dir.empty()) return p;
    return base_dir + "/" + p;
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (!known_keys().count(key))
            throw ValidationError(path + ":" + std::to_string(line_no) + ": unknown config key '" + key + "'");
        kv[key] = value;
    }
    return kv;
}

SimConfig SimConfig::load(const std::string& path) {
    auto kv = parse_config_file(path);
    std::string base_dir;
    auto slash = path.find_last_of('/');
    if (slash != std::string::npos) base_dir = path.substr(0, slash);
    return from_map(std::move(kv), base_dir);
}

SimConfig SimConfig::from_map(std::map<std::string, std::string> kv, const std::string& base_dir) {
    // defaults for every key so the snapshot is complete
    auto def = [&](const std::string& k, const std::string& v) {
        if (!kv.count(k)) kv[k] = v;
    };
    def("network", "grid:12x12:250:8");
    def("network_nodes", "");
    def("network_edges", "");
    def("clusters", "25");
    def("intervals_per_day", "72");
    def("n_exclusive", "50");
    def("n_shared", "25");
    def("batch_window_s", "30");
    def("max_wait_s", "300");
    def("max_delay_s", "600");
    def("horizon_s", "86400");
    def("seed", "1");
    def("threads", "1");
    def("beta_p", "-0.1");
    def("beta_w", "-0.005");
    def("beta_t", "-0.003");
    def("price_multiplier", "1.8");
    def("asc_exclusive", "0");
    def("asc_shared", "0");
    def("asc_outside", "0");
    def("per_mile_cost", "0.1458");
    def("c0", "2.0");
    def("c_p", "2.0");
    def("retrospective_multiplier", "0");
    def("costs_csv", "");
    def("steady_csv", "");
    def("theta_csv", "");
    def("f_min", "5.0");
    def("f_base", "2.0");
    def("f_t", "0.00583333333333333");
    def("f_d", "1.75");
    def("shared_base_discount", "0.3");
    def("shared_surcharge", "0.2");
    def("outside_wait_s", "420");
    def("outside_price_factor", "1.0");
    def("outside_travel_factor", "1.0");
    def("price_floor", "none");
    def("retro_shared_own_duration", "true");
    def("rebalance", "auto");
    def("rebalance_idle_s", "300");
    def("wait_coef_exclusive", "2000");
    def("wait_coef_shared", "2000");
    def("demand", "synthetic");
    def("demand_per_day", "2000");
    def("demand_peak1_h", "8");
    def("demand_peak2_h", "18");
    def("demand_peak_width_h", "2.5");
    def("demand_base_level", "0.25");
    def("demand_spread", "0.8");

    SimConfig cfg;
    cfg.snapshot = kv;

    const std::string netspec = kv.at("network");
    if (netspec.rfind("grid:", 0) == 0) {
        // grid:RxC:SPACING:SPEED
        int rows = 0, cols = 0;
        double spacing = 0, speed = 0;
        char x = 0;
        std::stringstream ss(netspec.substr(5));
        std::string part;
        std::vector<std::string> parts;
        while (std::getline(ss, part, ':')) parts.push_back(part);
        if (parts.size() != 3) throw ValidationError("network grid spec must be grid:RxC:SPACING_M:SPEED_MPS");
        std::stringstream dims(parts[0]);
        dims >> rows >> x >> cols;
        if (dims.fail() || x != 'x') throw ValidationError("bad grid dimensions in '" + netspec + "'");
        try {
            spacing = std::stod(parts[1]);
            speed = std::stod(parts[2]);
        } catch (const std::exception&) {
            throw ValidationError("bad grid spacing/speed in '" + netspec + "'");
        }
        cfg.net = std::make_shared<RoadNetwork>(RoadNetwork::grid(rows, cols, spacing, speed));
    } else if (!netspec.empty()) {
        throw ValidationError("network must be 'grid:...' or empty with network_nodes/network_edges set");
    } else {
        const std::string nodes = resolve_path(base_dir, kv.at("network_nodes"));
        const std::string edges = resolve_path(base_dir, kv.at("network_edges"));
        if (nodes.empty() || edges.empty())
            throw ValidationError("set either network=grid:... or network_nodes and network_edges");
        cfg.net = std::make_shared<RoadNetwork>(RoadNetwork::from_csv(nodes, edges));
        cfg.input_files["network_nodes"] = nodes;
        cfg.input_files["network_edges"] = edges;
        cfg.snapshot["network_nodes"] = nodes;
        cfg.snapshot["network_edges"] = edges;
    }

    cfg.cluster_count = static_cast<int>(to_long(kv, "clusters"));
    if (cfg.cluster_count < 1) throw ValidationError("clusters must be >= 1");
    cfg.cluster_count = std::min(cfg.cluster_count, cfg.net->node_count());
    cfg.intervals_per_day = static_cast<int>(to_long(kv, "intervals_per_day"));
    if (cfg.intervals_per_day < 1) throw ValidationError("intervals_per_day must be >= 1");

    cfg.seed = static_cast<std::uint64_t>(to_long(kv, "seed"));
    cfg.clusters = kmeans_cluster(*cfg.net, cfg.cluster_count, Rng::stream_seed(cfg.seed, "clusters"));
    cfg.cluster_times = ClusterTimes(*cfg.net, cfg.clusters);

    cfg.n_exclusive = static_cast<int>(to_long(kv, "n_exclusive"));
    cfg.n_shared = static_cast<int>(to_long(kv, "n_shared"));
    if (cfg.n_exclusive < 0 || cfg.n_shared < 0) throw ValidationError("fleet sizes must be >= 0");
    cfg.batch_window_s = to_double(kv, "batch_window_s");
    if (!(cfg.batch_window_s > 0)) throw ValidationError("batch_window_s must be > 0");
    cfg.max_wait_s = to_double(kv, "max_wait_s");
    cfg.max_delay_s = to_double(kv, "max_delay_s");
    cfg.horizon_s = to_double(kv, "horizon_s");
    cfg.threads = static_cast<int>(to_long(kv, "threads"));
    if (cfg.threads < 1) throw ValidationError("threads must be >= 1");

    cfg.choice.beta_p = to_double(kv, "beta_p");
    cfg.choice.beta_w = to_double(kv, "beta_w");
    cfg.choice.beta_t = to_double(kv, "beta_t");
    cfg.choice.price_multiplier = to_double(kv, "price_multiplier");
    cfg.choice.asc_exclusive = to_double(kv, "asc_exclusive");
    cfg.choice.asc_shared = to_double(kv, "asc_shared");
    cfg.choice.asc_outside = to_double(kv, "asc_outside");
    cfg.choice.validate();

    cfg.costs.per_mile_cost = to_double(kv, "per_mile_cost");
    cfg.costs.c0 = to_double(kv, "c0");
    cfg.costs.lost_demand_penalty = to_double(kv, "c_p");
    cfg.costs.retrospective_multiplier = to_double(kv, "retrospective_multiplier");
    if (!kv.at("costs_csv").empty()) {
        const std::string p = resolve_path(base_dir, kv.at("costs_csv"));
        cfg.costs.od_expected_cost = OdCostTable::load_csv(p);
        cfg.input_files["costs_csv"] = p;
        cfg.snapshot["costs_csv"] = p;
    }
    cfg.costs.validate();
    if (!kv.at("steady_csv").empty()) {
        const std::string p = resolve_path(base_dir, kv.at("steady_csv"));
        cfg.steady = SteadyStateModel::load_csv(p);
        cfg.input_files["steady_csv"] = p;
        cfg.snapshot["steady_csv"] = p;
    }

    cfg.static_params.min_fare = to_double(kv, "f_min");
    cfg.static_params.base_fare = to_double(kv, "f_base");
    cfg.static_params.time_rate = to_double(kv, "f_t");
    cfg.static_params.distance_rate = to_double(kv, "f_d");
    cfg.static_params.shared_base_discount = to_double(kv, "shared_base_discount");
    cfg.static_params.shared_surcharge = to_double(kv, "shared_surcharge");
    if (!kv.at("theta_csv").empty()) {
        const std::string p = resolve_path(base_dir, kv.at("theta_csv"));
        cfg.static_params.theta_table = load_theta_csv(p);
        cfg.input_files["theta_csv"] = p;
        cfg.snapshot["theta_csv"] = p;
    }
    cfg.static_params.validate();

    cfg.outside_wait_s = to_double(kv, "outside_wait_s");
    cfg.outside_price_factor = to_double(kv, "outside_price_factor");
    cfg.outside_travel_factor = to_double(kv, "outside_travel_factor");
    if (kv.at("price_floor") != "none") cfg.price_floor = to_double(kv, "price_floor");
    cfg.retro_shared_own_duration = kv.at("retro_shared_own_duration") == "true";

    const std::string reb = kv.at("rebalance");
    if (reb == "auto") cfg.rebalance = RebalanceMode::Auto;
    else if (reb == "on") cfg.rebalance = RebalanceMode::On;
    else if (reb == "off") cfg.rebalance = RebalanceMode::Off;
    else throw ValidationError("rebalance must be auto, on, or off");
    cfg.rebalance_idle_s = to_double(kv, "rebalance_idle_s");
    cfg.wait_coef_exclusive = to_double(kv, "wait_coef_exclusive");
    cfg.wait_coef_shared = to_double(kv, "wait_coef_shared");

    cfg.demand_source = kv.at("demand");
    if (cfg.demand_source != "synthetic") {
        cfg.demand_source = resolve_path(base_dir, cfg.demand_source);
        cfg.input_files["demand_csv"] = cfg.demand_source;
        cfg.snapshot["demand"] = cfg.demand_source;
    }
    cfg.synth.per_day = to_double(kv, "demand_per_day");
    cfg.synth.peak1_hour = to_double(kv, "demand_peak1_h");
    cfg.synth.peak2_hour = to_double(kv, "demand_peak2_h");
    cfg.synth.peak_width_hours = to_double(kv, "demand_peak_width_h");
    cfg.synth.base_level = to_double(kv, "demand_base_level");
    cfg.synth.spread = to_double(kv, "demand_spread");
    return cfg;
}

bool SimConfig::rebalance_enabled(Policy p) const {
    switch (rebalance) {
        case RebalanceMode::On: return true;
        case RebalanceMode::Off: return false;
        case RebalanceMode::Auto: return policy_is_batched(p);
    }
    return false;
}

int SimConfig::interval_of(double sim_time) const {
    double day_time = std::fmod(sim_time, kSecondsPerDay);
    if (day_time < 0) day_time += kSecondsPerDay;
    int idx = static_cast<int>(day_time / interval_length_s());
    return std::min(idx, intervals_per_day - 1);
}

OdPair SimConfig::od_clusters(NodeId origin, NodeId dest) const {
    return {clusters.cluster_of(origin), clusters.cluster_of(dest)};
}

std::vector<DemandRow> load_demand_csv(const std::string& path, const RoadNetwork& net) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open demand file " + path);
    std::vector<DemandRow> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        if (line_no == 1) {
            if (line.rfind("request_time_s", 0) != 0)
                throw ValidationError(path + ":1: expected header 'request_time_s,origin_node,dest_node'");
            continue;
        }
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ','))
            throw ValidationError(path + ":" + std::to_string(line_no) + ": expected 3 fields");
        DemandRow r;
        try {
            r.time = std::stod(a);
            r.origin = std::stoi(b);
            r.dest = std::stoi(c);
        } catch (const std::exception&) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": bad numeric field");
        }
        if (!net.has_node(r.origin))
            throw ValidationError(path + ":" + std::to_string(line_no) + ": unknown origin node " + b);
        if (!net.has_node(r.dest))
            throw ValidationError(path + ":" + std::to_string(line_no) + ": unknown dest node " + c);
        if (r.origin == r.dest)
            throw ValidationError(path + ":" + std::to_string(line_no) + ": origin equals destination");
        if (r.time < 0.0)
            throw ValidationError(path + ":" + std::to_string(line_no) + ": negative request time");
        rows.push_back(r);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const DemandRow& a, const DemandRow& b) { return a.time < b.time; });
    return rows;
}

std::vector<DemandRow> synthesize_demand(const RoadNetwork& net, const ClusterMap& clusters,
                                         const SyntheticDemandParams& params, std::uint64_t seed,
                                         int day_index, double horizon_s) {
    // cluster attractiveness from a structure substream shared by all days
    Rng structure(seed, "demand-structure");
    std::vector<double> attract(static_cast<size_t>(clusters.k));
    for (auto& a : attract) a = std::exp(params.spread * structure.uniform(-1.0, 1.0));

    std::vector<std::vector<NodeId>> members(static_cast<size_t>(clusters.k));
    for (NodeId id : net.node_ids()) members[static_cast<size_t>(clusters.cluster_of(id))].push_back(id);
    for (auto& m : members) std::sort(m.begin(), m.end());

    // O-D weights proportional to attractiveness products, no self pairs
    std::vector<double> weights;
    std::vector<OdPair> pairs;
    for (int i = 0; i < clusters.k; i++)
        for (int j = 0; j < clusters.k; j++) {
            if (i == j && clusters.k > 1) continue;
            if (members[static_cast<size_t>(i)].empty() || members[static_cast<size_t>(j)].empty()) continue;
            pairs.push_back({i, j});
            weights.push_back(attract[static_cast<size_t>(i)] * attract[static_cast<size_t>(j)]);
        }
    double weight_sum = 0.0;
    for (double w : weights) weight_sum += w;

    auto profile = [&](double t_s) {
        const double h = t_s / 3600.0;
        auto peak = [&](double center) {
            const double z = (h - center) / params.peak_width_hours;
            return std::exp(-0.5 * z * z);
        };
        return params.base_level + peak(params.peak1_hour) + peak(params.peak2_hour);
    };
    // normalize so the day integrates to per_day arrivals
    double integral = 0.0;
    const double bin_s = 60.0;
    const double day_span = std::min(horizon_s, kSecondsPerDay);
    const int bins = static_cast<int>(std::ceil(day_span / bin_s));
    for (int b = 0; b < bins; b++) integral += profile((b + 0.5) * bin_s) * bin_s;
    const double scale = integral > 0 ? params.per_day / integral : 0.0;

    Rng rng(seed, "demand", static_cast<std::uint64_t>(day_index));
    std::vector<DemandRow> rows;
    for (int b = 0; b < bins; b++) {
        const double lam = scale * profile((b + 0.5) * bin_s) * bin_s;
        // Knuth Poisson sampler; lambda stays small per bin
        int n = 0;
        double acc = std::exp(-lam);
        double prod = rng.uniform();
        while (prod > acc) {
            n++;
            prod *= rng.uniform();
        }
        for (int k = 0; k < n; k++) {
            const double t = b * bin_s + rng.uniform() * bin_s;
            // categorical O-D pick
            double r = rng.uniform() * weight_sum;
            size_t pick = 0;
            for (size_t i = 0; i < weights.size(); i++) {
                r -= weights[i];
                if (r <= 0) {
                    pick = i;
                    break;
                }
                pick = i;
            }
            const auto& om = members[static_cast<size_t>(pairs[pick].first)];
            const auto& dm = members[static_cast<size_t>(pairs[pick].second)];
            DemandRow row;
            row.time = t;
            row.origin = om[rng.below(om.size())];
            row.dest = dm[rng.below(dm.size())];
            if (row.origin == row.dest) {
                if (dm.size() > 1) {
                    while (row.dest == row.origin) row.dest = dm[rng.below(dm.size())];
                } else {
                    continue;  // degenerate cluster pair, drop the arrival
                }
            }
            rows.push_back(row);
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const DemandRow& a, const DemandRow& b) { return a.time < b.time; });
    return rows;
}

void save_demand_csv(const std::vector<DemandRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "request_time_s,origin_node,dest_node\n";
    out.precision(17);
    for (const auto& r : rows) out << r.time << ',' << r.origin << ',' << r.dest << '\n';
}

std::vector<DemandRow> demand_for_day(const SimConfig& cfg, int day_index) {
    if (cfg.demand_source == "synthetic")
        return synthesize_demand(*cfg.net, cfg.clusters, cfg.synth, cfg.seed, day_index, cfg.horizon_s);
    auto rows = load_demand_csv(cfg.demand_source, *cfg.net);
    // arrivals outside the run horizon are not part of this run
    rows.erase(std::remove_if(rows.begin(), rows.end(),
                              [&](const DemandRow& r) { return r.time >= cfg.horizon_s; }),
               rows.end());
    std::vector<NodeId> used;
    for (const auto& r : rows) {
        used.push_back(r.origin);
        used.push_back(r.dest);
    }
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    cfg.net->validate_strongly_connected(used);
    return rows;
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path + " for hashing");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); i++) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace modjoint
