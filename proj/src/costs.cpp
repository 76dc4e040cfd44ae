#include "modjoint/costs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace modjoint {

double OdCostTable::value(const OdPair& od) const {
    auto it = cells_.find(od);
    return it == cells_.end() ? 0.0 : it->second.first;
}

long OdCostTable::samples_for(const OdPair& od) const {
    auto it = cells_.find(od);
    return it == cells_.end() ? 0 : it->second.second;
}

long OdCostTable::samples(const OdPair& od) const { return samples_for(od); }

double OdCostTable::update(const std::vector<std::pair<OdPair, double>>& day_costs) {
    std::map<OdPair, std::pair<double, long>> today;  // od -> (sum, count)
    for (const auto& [od, cost] : day_costs) {
        auto& cell = today[od];
        cell.first += cost;
        cell.second += 1;
    }
    if (today.empty()) return 0.0;
    double abs_diff = 0.0;
    for (const auto& [od, sum_count] : today) {
        auto& cell = cells_[od];
        const double before = cell.first;
        const double merged_sum = cell.first * static_cast<double>(cell.second) + sum_count.first;
        cell.second += sum_count.second;
        cell.first = merged_sum / static_cast<double>(cell.second);
        abs_diff += std::fabs(cell.first - before);
    }
    return abs_diff / static_cast<double>(today.size());
}

void OdCostTable::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "o_cluster,d_cluster,expected_cost,samples\n";
    for (const auto& [od, cell] : cells_) {
        std::ostringstream line;
        line.precision(17);
        line << od.first << ',' << od.second << ',' << cell.first << ',' << cell.second << '\n';
        out << line.str();
    }
}

OdCostTable OdCostTable::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open cost table " + path);
    OdCostTable t;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        if (line_no == 1) {
            if (line.rfind("o_cluster", 0) != 0)
                throw ValidationError(path + ":1: expected header 'o_cluster,d_cluster,expected_cost,samples'");
            continue;
        }
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f;
        std::vector<std::string> fields;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 4) throw ValidationError(path + ":" + std::to_string(line_no) + ": expected 4 fields");
        try {
            OdPair od{std::stoi(fields[0]), std::stoi(fields[1])};
            t.cells_[od] = {std::stod(fields[2]), std::stol(fields[3])};
        } catch (const std::exception&) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": bad numeric field");
        }
    }
    return t;
}

double CostModel::c0_for(const OdPair& od) const {
    auto it = c0_table.find(od);
    return it == c0_table.end() ? c0 : it->second;
}

void CostModel::validate() const {
    if (retrospective_multiplier < 0.0 || retrospective_multiplier > 1.0)
        throw ValidationError("retrospective_multiplier must be in [0, 1]");
    if (per_mile_cost < 0.0) throw ValidationError("per_mile_cost must be >= 0");
    for (const auto& [od, entries] : alpha_table) {
        double total = 0.0;
        for (const auto& e : entries) {
            if (e.alpha < 0.0 || e.alpha > 1.0) throw ValidationError("alpha out of [0, 1]");
            total += e.alpha;
        }
        if (total > 1.0 + 1e-12) throw ValidationError("alpha row sums above 1");
    }
}

double expected_shared_operational_cost(const CostModel& model, const OdPair& od) {
    const double c0 = model.c0_for(od);
    auto it = model.alpha_table.find(od);
    if (it == model.alpha_table.end() || it->second.empty()) return c0;
    double alpha_sum = 0.0;
    double matched = 0.0;
    for (const auto& e : it->second) {
        alpha_sum += e.alpha;
        matched += e.alpha * (e.marginal_cost - e.partner_price);
    }
    return (1.0 - alpha_sum) * c0 + matched;
}

SteadyStateModel::SteadyStateModel(int clusters, int intervals) : clusters_(clusters), intervals_(intervals) {
    if (clusters < 1 || intervals < 1) throw ValidationError("steady-state grid must be at least 1x1");
    cells_.assign(static_cast<size_t>(clusters) * static_cast<size_t>(intervals), SteadyCell{});
}

SteadyCell& SteadyStateModel::cell(ClusterId cluster, int interval) {
    if (cluster < 0 || cluster >= clusters_ || interval < 0 || interval >= intervals_)
        throw ValidationError("steady-state cell out of range");
    return cells_[static_cast<size_t>(cluster) * static_cast<size_t>(intervals_) + static_cast<size_t>(interval)];
}

const SteadyCell& SteadyStateModel::cell(ClusterId cluster, int interval) const {
    return const_cast<SteadyStateModel*>(this)->cell(cluster, interval);
}

void SteadyStateModel::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "cluster,interval,L_e,L_s,O_e,O_s,T_e,T_s,A_e,A_s,zeta_s,price_e,price_s,opcost_e,opcost_s\n";
    out.precision(17);
    for (int c = 0; c < clusters_; c++)
        for (int i = 0; i < intervals_; i++) {
            const SteadyCell& s = cell(c, i);
            out << c << ',' << i << ',' << s.vehicles_exclusive << ',' << s.vehicles_shared << ','
                << s.open_exclusive << ',' << s.open_shared << ',' << s.trip_time_exclusive << ','
                << s.trip_time_shared << ',' << s.wait_coef_exclusive << ',' << s.wait_coef_shared << ','
                << s.utilization_shared << ',' << s.price_exclusive << ',' << s.price_shared << ','
                << s.op_cost_exclusive << ',' << s.op_cost_shared << '\n';
        }
}

SteadyStateModel SteadyStateModel::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open steady-state table " + path);
    std::string line;
    int line_no = 0;
    std::vector<std::pair<std::pair<int, int>, SteadyCell>> rows;
    int max_c = -1, max_i = -1;
    while (std::getline(in, line)) {
        line_no++;
        if (line_no == 1) {
            if (line.rfind("cluster", 0) != 0) throw ValidationError(path + ":1: bad header");
            continue;
        }
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f;
        std::vector<double> v;
        while (std::getline(ss, f, ',')) {
            try {
                v.push_back(std::stod(f));
            } catch (const std::exception&) {
                throw ValidationError(path + ":" + std::to_string(line_no) + ": bad numeric field");
            }
        }
        if (v.size() != 15) throw ValidationError(path + ":" + std::to_string(line_no) + ": expected 15 fields");
        SteadyCell s;
        s.vehicles_exclusive = v[2];
        s.vehicles_shared = v[3];
        s.open_exclusive = v[4];
        s.open_shared = v[5];
        s.trip_time_exclusive = v[6];
        s.trip_time_shared = v[7];
        s.wait_coef_exclusive = v[8];
        s.wait_coef_shared = v[9];
        s.utilization_shared = v[10];
        s.price_exclusive = v[11];
        s.price_shared = v[12];
        s.op_cost_exclusive = v[13];
        s.op_cost_shared = v[14];
        rows.push_back({{static_cast<int>(v[0]), static_cast<int>(v[1])}, s});
        max_c = std::max(max_c, static_cast<int>(v[0]));
        max_i = std::max(max_i, static_cast<int>(v[1]));
    }
    if (rows.empty()) throw ValidationError(path + ": empty steady-state table");
    SteadyStateModel m(max_c + 1, max_i + 1);
    for (const auto& [ci, s] : rows) m.cell(ci.first, ci.second) = s;
    return m;
}

double wait_time(double wait_coef, double open_vehicles) {
    if (!(open_vehicles > 0.0)) throw CalibrationError("wait function singular: no open vehicles");
    return wait_coef / std::sqrt(open_vehicles);
}

double throughput_cell(const SteadyCell& cell, Mode mode) {
    if (mode == Mode::Exclusive) {
        const double busy = cell.vehicles_exclusive - cell.open_exclusive;
        if (busy < -1e-9) throw ValidationError("open exclusive vehicles exceed fleet");
        if (busy <= 0.0) return 0.0;
        const double f = wait_time(cell.wait_coef_exclusive, cell.open_exclusive);
        return busy / (f + cell.trip_time_exclusive);
    }
    if (mode == Mode::Shared) {
        const double busy = cell.vehicles_shared - cell.open_shared;
        if (busy < -1e-9) throw ValidationError("open shared vehicles exceed fleet");
        if (busy <= 0.0) return 0.0;
        const double f = wait_time(cell.wait_coef_shared, cell.open_shared);
        return cell.utilization_shared * busy / (f + cell.trip_time_shared);
    }
    throw ValidationError("throughput is defined for platform modes only");
}

double throughput(const SteadyStateModel& model, ClusterId cluster, int interval, Mode mode) {
    return throughput_cell(model.cell(cluster, interval), mode);
}

double utilization_from_counts(double n0, double n1, double n2, double fleet_shared) {
    if (!(fleet_shared > 0.0)) throw CalibrationError("utilization needs a positive shared fleet");
    (void)n0;
    return (n1 + 2.0 * n2) / fleet_shared;
}

UtilizationModel solve_utilization(const UtilizationInputs& in) {
    if (!(in.fleet_shared > 0.0)) throw CalibrationError("utilization needs a positive shared fleet");
    if (in.open_empty < 0.0 || in.open_one < 0.0 || in.wait_empty < 0.0 || in.wait_one < 0.0 ||
        in.trip_time_first < 0.0 || in.trip_time_second < 0.0)
        throw CalibrationError("utilization inputs must be nonnegative");

    // Unknowns x = Y_s, z = Y_s'. The fleet-size constraint makes z affine
    // in x; the equal-pickup-rate condition z * N0 = x * N1 then closes a
    // quadratic in x.
    const double denom2 = in.wait_one + in.trip_time_second;
    const double slack = in.fleet_shared - in.open_empty - in.open_one;
    if (slack < -1e-12) throw CalibrationError("open vehicles exceed the shared fleet");

    double x = 0.0, z = 0.0;
    if (denom2 <= 0.0) {
        // No second-pickup machinery: z must absorb nothing, so require the
        // slack to be served by first trips alone.
        z = 0.0;
        const double denom1 = in.wait_empty + in.trip_time_first;
        if (denom1 <= 0.0) {
            if (std::fabs(slack) > 1e-9) throw CalibrationError("utilization balance infeasible");
            x = 0.0;
        } else {
            x = slack / denom1;
            if (x < 0.0) throw CalibrationError("utilization balance infeasible");
            // equal-rate condition: z*N0 = x*N1 -> x * N1 must vanish
            const double n1 = in.open_one + in.trip_time_first * x;
            if (x * n1 > 1e-9) throw CalibrationError("utilization balance infeasible");
        }
    } else {
        const double a = slack / denom2;
        const double b = (in.trip_time_first + in.wait_empty) / denom2;
        // (a - b x)(O_s + eta_s x) = x (O_s' + eta_s'(a - b x) + T_s x)
        const double qa = b * (in.wait_one - in.wait_empty) - in.trip_time_first;
        const double qb = a * (in.wait_empty - in.wait_one) - b * in.open_empty - in.open_one;
        const double qc = a * in.open_empty;
        auto z_of = [&](double xv) { return a - b * xv; };
        bool found = false;
        auto consider = [&](double xv) {
            if (found || !(xv >= -1e-12)) return;
            double zv = z_of(xv);
            if (!(zv >= -1e-12)) return;
            x = std::max(0.0, xv);
            z = std::max(0.0, zv);
            found = true;
        };
        if (std::fabs(qa) < 1e-300) {
            if (std::fabs(qb) < 1e-300) {
                if (std::fabs(qc) > 1e-12) throw CalibrationError("utilization balance infeasible");
                consider(0.0);
            } else {
                consider(-qc / qb);
            }
        } else {
            const double disc = qb * qb - 4.0 * qa * qc;
            if (disc < 0.0) throw CalibrationError("utilization balance infeasible");
            const double sq = std::sqrt(disc);
            double r1 = (-qb - sq) / (2.0 * qa);
            double r2 = (-qb + sq) / (2.0 * qa);
            if (r1 > r2) std::swap(r1, r2);
            consider(r1);
            consider(r2);
        }
        if (!found) throw CalibrationError("utilization balance has no nonnegative solution");
    }

    UtilizationModel u;
    u.open_one = in.open_one;
    u.throughput_first = x;
    u.throughput_second = z;
    u.n0 = in.open_empty + in.wait_empty * x;
    u.n1 = in.open_one + in.wait_one * z + in.trip_time_first * x;
    u.n2 = in.fleet_shared - u.n0 - u.n1;  // sum is exact by construction
    if (u.n2 < -1e-9) throw CalibrationError("utilization balance infeasible");
    u.n2 = std::max(0.0, u.n2);
    // Transition probabilities as per-vehicle flow rates; balance holds by
    // construction of the flows.
    u.p01 = u.n0 > 0.0 ? x / u.n0 : 0.0;
    u.p12 = u.n1 > 0.0 ? z / u.n1 : u.p01;
    u.p10 = u.n1 > 0.0 ? x / u.n1 : 0.0;
    u.p21 = u.n2 > 0.0 ? z / u.n2 : 0.0;
    u.zeta_s = utilization_from_counts(u.n0, u.n1, u.n2, in.fleet_shared);
    return u;
}

RegionProfitRates::RegionProfitRates(int clusters, int intervals) : clusters_(clusters), intervals_(intervals) {
    rates_.assign(static_cast<size_t>(clusters) * static_cast<size_t>(intervals) * 2, 0.0);
}

double RegionProfitRates::rate(ClusterId cluster, int interval, Mode mode) const {
    if (rates_.empty()) return 0.0;
    if (cluster < 0 || cluster >= clusters_ || interval < 0 || interval >= intervals_)
        throw ValidationError("profit-rate cell out of range");
    const size_t m = mode == Mode::Exclusive ? 0 : 1;
    return rates_[(static_cast<size_t>(cluster) * static_cast<size_t>(intervals_) + static_cast<size_t>(interval)) * 2 + m];
}

double& RegionProfitRates::rate_ref(ClusterId cluster, int interval, Mode mode) {
    if (cluster < 0 || cluster >= clusters_ || interval < 0 || interval >= intervals_)
        throw ValidationError("profit-rate cell out of range");
    const size_t m = mode == Mode::Exclusive ? 0 : 1;
    return rates_[(static_cast<size_t>(cluster) * static_cast<size_t>(intervals_) + static_cast<size_t>(interval)) * 2 + m];
}

RegionProfitRates region_profit_rates(const SteadyStateModel& model) {
    RegionProfitRates r(model.clusters(), model.intervals());
    for (int c = 0; c < model.clusters(); c++)
        for (int i = 0; i < model.intervals(); i++) {
            const SteadyCell& s = model.cell(c, i);
            if (s.vehicles_exclusive > 0.0 && s.open_exclusive > 0.0) {
                const double y = throughput_cell(s, Mode::Exclusive);
                const double margin = s.price_exclusive - s.op_cost_exclusive;
                r.rate_ref(c, i, Mode::Exclusive) = std::max(0.0, y * margin / s.vehicles_exclusive);
            }
            if (s.vehicles_shared > 0.0 && s.open_shared > 0.0) {
                const double y = throughput_cell(s, Mode::Shared);
                const double margin = s.price_shared - s.op_cost_shared;
                r.rate_ref(c, i, Mode::Shared) = std::max(0.0, y * margin / s.vehicles_shared);
            }
        }
    return r;
}

double retrospective_cost(const RegionProfitRates& rates, Mode mode, ClusterId origin_cluster,
                          ClusterId dest_cluster, int interval, double trip_seconds,
                          double horizon_seconds, double multiplier) {
    if (rates.empty() || multiplier == 0.0) return 0.0;
    const double eps_o = rates.rate(origin_cluster, interval, mode);
    const double eps_d = rates.rate(dest_cluster, interval, mode);
    return multiplier * (eps_o * trip_seconds + (eps_o - eps_d) * horizon_seconds);
}

std::map<OdPair, std::vector<AlphaEntry>> estimate_alpha_table(const std::vector<SharedTripRecord>& records,
                                                               double fallback_c0) {
    (void)fallback_c0;
    struct Acc {
        long total = 0;
        long matched = 0;
        double cost_sum = 0.0;
        double price_sum = 0.0;
    };
    std::map<OdPair, Acc> acc;
    for (const auto& rec : records) {
        auto& a = acc[rec.od];
        a.total++;
        if (rec.matched) {
            a.matched++;
            a.cost_sum += rec.marginal_cost;
            a.price_sum += rec.partner_price;
        }
    }
    std::map<OdPair, std::vector<AlphaEntry>> table;
    for (const auto& [od, a] : acc) {
        AlphaEntry e;
        e.alpha = a.total > 0 ? static_cast<double>(a.matched) / static_cast<double>(a.total) : 0.0;
        if (a.matched > 0) {
            e.marginal_cost = a.cost_sum / static_cast<double>(a.matched);
            e.partner_price = a.price_sum / static_cast<double>(a.matched);
        }
        table[od] = {e};
    }
    return table;
}

}  // namespace modjoint
