#pragma once

#include <map>

#include "modjoint/common.hpp"
#include "modjoint/costs.hpp"
#include "modjoint/matching.hpp"

namespace modjoint {

/// Benchmark fare structure: p = max(f_min, f_base + f_t * t + f_d * d),
/// with the shared fare split off the exclusive fare through the sharing
/// probability theta.
struct StaticPricingParams {
    double min_fare = 5.0;          // f_min
    double base_fare = 2.0;         // f_base
    double time_rate = 0.35 / 60.0; // f_t, currency per second
    double distance_rate = 1.75;    // f_d, currency per mile
    double shared_base_discount = 0.3;  // multiplies theta
    double shared_surcharge = 0.2;
    std::map<OdPair, double> theta_table;  // sharing probability per O-D cluster

    double theta_for(const OdPair& od) const;
    void validate() const;
};

/// Benchmark static fare for a request's direct trip.
double static_price(const StaticPricingParams& params, const Request& r);
double static_price(const StaticPricingParams& params, double travel_seconds, double distance_miles);

/// Shared fare: p_s = (1 - base_discount * theta + surcharge) * p_e.
double static_shared_price(const StaticPricingParams& params, double price_exclusive, const OdPair& od);

void save_theta_csv(const std::map<OdPair, double>& theta, const std::string& path);
std::map<OdPair, double> load_theta_csv(const std::string& path);

}  // namespace modjoint
