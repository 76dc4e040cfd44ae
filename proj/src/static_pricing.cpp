#include "modjoint/static_pricing.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace modjoint {

double StaticPricingParams::theta_for(const OdPair& od) const {
    auto it = theta_table.find(od);
    return it == theta_table.end() ? 0.0 : it->second;
}

void StaticPricingParams::validate() const {
    if (min_fare < 0.0 || base_fare < 0.0 || time_rate < 0.0 || distance_rate < 0.0)
        throw ValidationError("static fares must be >= 0");
    for (const auto& [od, theta] : theta_table) {
        (void)od;
        if (theta < 0.0 || theta > 1.0) throw ValidationError("theta must be in [0, 1]");
    }
}

double static_price(const StaticPricingParams& params, double travel_seconds, double distance_miles) {
    return std::max(params.min_fare,
                    params.base_fare + params.time_rate * travel_seconds + params.distance_rate * distance_miles);
}

double static_price(const StaticPricingParams& params, const Request& r) {
    return static_price(params, r.direct_time, meters_to_miles(r.direct_meters));
}

double static_shared_price(const StaticPricingParams& params, double price_exclusive, const OdPair& od) {
    const double theta = params.theta_for(od);
    return (1.0 - params.shared_base_discount * theta + params.shared_surcharge) * price_exclusive;
}

void save_theta_csv(const std::map<OdPair, double>& theta, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "o_cluster,d_cluster,theta\n";
    out.precision(17);
    for (const auto& [od, t] : theta) out << od.first << ',' << od.second << ',' << t << '\n';
}

std::map<OdPair, double> load_theta_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open theta table " + path);
    std::map<OdPair, double> theta;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        if (line_no == 1) {
            if (line.rfind("o_cluster", 0) != 0) throw ValidationError(path + ":1: bad header");
            continue;
        }
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ','))
            throw ValidationError(path + ":" + std::to_string(line_no) + ": expected 3 fields");
        try {
            theta[{std::stoi(a), std::stoi(b)}] = std::stod(c);
        } catch (const std::exception&) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": bad numeric field");
        }
    }
    return theta;
}

}  // namespace modjoint
