#pragma once

#include <optional>
#include <vector>

#include "modjoint/choice.hpp"
#include "modjoint/common.hpp"
#include "modjoint/matching.hpp"

namespace modjoint {

/// Principal-branch Lambert W on the nonnegative axis: returns w with
/// w * exp(w) = x, residual within 1e-12 * max(1, x). Halley iteration from
/// a log-based initial guess. Throws std::domain_error for x < 0.
double lambert_w(double x);

/// W(exp(log_x)) without forming exp(log_x); safe for large arguments.
double lambert_w_exp(double log_x);

/// One sequential pricing problem: non-price utilities of the two platform
/// modes, the full outside utility (outside price folded in), total costs
/// (operational plus retrospective), and the effective price coefficient.
struct SpdInstance {
    double u_exclusive = 0.0;  // U_e under the assignment policy
    double u_shared = 0.0;     // U_s under the assignment policy
    double u_outside = 0.0;    // full outside utility
    double cost_exclusive = 0.0;
    double cost_shared = 0.0;
    double beta_p = -0.1;  // < 0

    void validate() const;
};

struct PriceQuote {
    bool no_sale = false;  // both services priced out
    double price_exclusive = 0.0;
    double price_shared = 0.0;
    double expected_profit = 0.0;
    ChoiceProbabilities probabilities;
};

/// Expected per-request profit at given prices (the sequential MPP
/// objective), evaluated with overflow-safe exponentials.
double expected_profit_spd(const SpdInstance& inst, double price_exclusive, double price_shared);

/// Closed-form optimal menu via the Lambert W function. The price gap
/// satisfies p_e - p_s = c_e - c_s at the critical point; the quote is
/// compared against the no-sale limit (zero profit) and the better returned.
PriceQuote spd_optimal_prices(const SpdInstance& inst);

/// Single-product restriction: only one platform mode is offered. Solved by
/// bisection on the first-order condition in probability space.
struct SingleProductQuote {
    double price = 0.0;
    double probability = 0.0;
    double expected_profit = 0.0;
};
SingleProductQuote single_product_price(double u_assign, double u_outside, double cost, double beta_p);

/// Everything spd_handle_request needs to turn a request plus candidate
/// vehicles into menu utilities and costs.
struct QuoteEnv {
    const RoadNetwork* net = nullptr;
    ChoiceParams choice;
    double per_mile_cost = 0.0;
    double u_outside = 0.0;  // full outside utility for this request
    // quoted operational cost of the shared service (learned O-D expectation)
    double shared_operational_cost = 0.0;
    // decision-time extra costs per mode (retrospective); zero when disabled
    RouteExtraCost extra_cost;
    std::optional<double> price_floor;
};

struct SpdDecision {
    bool no_offer = false;
    PriceQuote quote;                 // two-sided when both vehicles exist
    bool offer_exclusive = false;
    bool offer_shared = false;
    VehicleId vehicle_exclusive = -1;
    VehicleId vehicle_shared = -1;
    InsertionPlan plan_exclusive;
    InsertionPlan plan_shared;
    double cost_exclusive = 0.0;  // operational + retrospective, quoted side
    double cost_shared = 0.0;
    ModeOffer offer_e, offer_s;  // QoS behind the utilities
};

/// The sequential step: pick the cheapest feasible vehicle of each service
/// type, price the resulting menu (two-product closed form, or the
/// single-product restriction when only one type is available), and return
/// the decision. No feasible vehicle at all yields a no-offer.
SpdDecision spd_handle_request(const Request& r, const std::vector<VehicleState>& vehicles,
                               const QuoteEnv& env, double now);

}  // namespace modjoint
