#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "modjoint/common.hpp"
#include "modjoint/network.hpp"

namespace modjoint {

/// A trip request with its feasibility windows. `direct_time` is the
/// unshared shortest-path travel time; the earliest possible arrival is
/// request_time + direct_time and total delay is measured against it.
struct Request {
    RequestId id = -1;
    NodeId origin = -1;
    NodeId dest = -1;
    double request_time = 0.0;  // seconds
    double direct_time = 0.0;   // seconds
    double direct_meters = 0.0;
    double max_wait = 0.0;      // Omega, seconds
    double max_delay = 0.0;     // Delta, seconds

    double latest_pickup() const { return request_time + max_wait; }
    double latest_arrival() const { return request_time + direct_time + max_delay; }
};

/// Builds a request and fills direct_time/direct_meters from the network.
Request make_request(const RoadNetwork& net, RequestId id, NodeId origin, NodeId dest,
                     double request_time, double max_wait, double max_delay);

enum class StopAction { Pickup, Dropoff };

struct Stop {
    NodeId node = -1;
    StopAction action = StopAction::Pickup;
    RequestId request = -1;
    double planned_time = 0.0;
};

/// Supply-side state of one vehicle. `loc`/`loc_time` anchor where the
/// vehicle can next be re-routed: for an idle vehicle its current node, for
/// a moving vehicle the next node on its path and the arrival time there.
struct VehicleState {
    VehicleId id = -1;
    Mode service_type = Mode::Exclusive;
    int capacity = 1;  // 1 exclusive, 2 shared
    NodeId loc = -1;
    double loc_time = 0.0;

    struct Commitment {
        RequestId request = -1;
        double request_time = 0.0;
        double direct_time = 0.0;
        double max_wait = 0.0;
        double max_delay = 0.0;
        bool onboard = false;
    };
    std::vector<Stop> stops;              // remaining plan, time-ordered
    std::vector<Commitment> commitments;  // active requests

    int onboard_count() const;
    int active_count() const { return static_cast<int>(commitments.size()); }
    const Commitment* find_commitment(RequestId r) const;
};

/// A feasible way of adding one or two requests to a vehicle's plan.
struct InsertionPlan {
    std::vector<Stop> stops;    // full new remaining plan with planned times
    double added_meters = 0.0;  // extra distance vs. the current plan
    double added_seconds = 0.0; // extra busy time vs. the current plan
    double added_cost = 0.0;    // per-mile cost of the extra distance
    double pickup_time = 0.0;   // first added request
    double dropoff_time = 0.0;
    double pickup_time_2 = 0.0; // second added request, pair insertions only
    double dropoff_time_2 = 0.0;
    double plan_end_time = 0.0;
};

/// Minimum-cost feasible insertion of `r` into `v`'s plan, enumerating all
/// stop orderings that keep pickups before dropoffs and occupancy within
/// capacity. Empty when every ordering violates a wait, delay, or capacity
/// constraint.
std::optional<InsertionPlan> feasible_vehicle_request(const RoadNetwork& net, double per_mile_cost,
                                                      const VehicleState& v, const Request& r, double now);

/// Same for a pair of requests on an empty shared vehicle.
std::optional<InsertionPlan> feasible_vehicle_pair(const RoadNetwork& net, double per_mile_cost,
                                                   const VehicleState& v, const Request& r1,
                                                   const Request& r2, double now);

/// Whether a virtual capacity-2 vehicle materialized at r1's origin when
/// both requests are known could serve the pair within the windows.
bool feasible_pair(const RoadNetwork& net, const Request& r1, const Request& r2);

/// Re-checks a stored plan against the vehicle's commitments plus the given
/// added requests. Used to re-validate matchings before commitment.
bool validate_plan(const RoadNetwork& net, const VehicleState& v, const std::vector<Stop>& stops,
                   const std::vector<Request>& added, double now);

struct RvGraph {
    std::vector<std::pair<RequestId, RequestId>> request_edges;  // id < id, sorted
    struct VehicleEdge {
        RequestId request;
        VehicleId vehicle;
        InsertionPlan plan;
    };
    std::vector<VehicleEdge> vehicle_edges;  // sorted by (request, vehicle)
};

/// All feasible request-request and request-vehicle pairings.
RvGraph build_rv_graph(const RoadNetwork& net, double per_mile_cost, const std::vector<Request>& requests,
                       const std::vector<VehicleState>& vehicles, double now, int threads = 1);

/// Extra decision-time cost of blocking a vehicle on a route (the simulator
/// plugs the retrospective-cost estimate in here; zero by default).
using RouteExtraCost =
    std::function<double(Mode mode, NodeId route_start, NodeId route_end, double busy_seconds)>;

/// One pricing quote attached to an ESV matching. In one-request matchings
/// only the first entry is used.
struct MatchingQuote {
    struct PerRequest {
        bool has_exclusive = false;
        bool has_shared = false;
        double price_exclusive = 0.0;
        double price_shared = 0.0;
        double prob_exclusive = 0.0;
        double prob_shared = 0.0;
        double wait_exclusive = 0.0;
        double travel_exclusive = 0.0;
        double wait_shared = 0.0;
        double travel_shared = 0.0;
    };
    std::vector<PerRequest> per_request;
    double expected_profit = 0.0;
};

struct EsvSlot {
    VehicleId vehicle = -1;
    double cost = 0.0;  // insertion cost plus any route extra cost
    InsertionPlan plan;
    bool present() const { return vehicle >= 0; }
};

/// Candidate matching of one or two requests to concrete vehicles. The
/// shared slot serves every listed request in one trip; exclusive slots are
/// per request. u/quote/gammas are filled by the pricing stage.
struct EsvMatching {
    int id = -1;
    std::vector<RequestId> requests;  // sorted, size 1 or 2
    EsvSlot shared;
    std::vector<EsvSlot> exclusives;  // parallel to requests
    double u = 0.0;                   // expected profit coefficient
    MatchingQuote quote;
    std::vector<std::pair<VehicleId, double>> gammas;  // vehicle usage probabilities
};

/// ESV matchings from the RV graph: one matching per request with its best
/// exclusive and shared vehicles, plus one per shareable pair that some
/// shared vehicle can serve. Output is canonically ordered and independent
/// of input permutation.
std::vector<EsvMatching> build_esv_graph(const RoadNetwork& net, double per_mile_cost,
                                         const std::vector<Request>& requests,
                                         const std::vector<VehicleState>& vehicles, const RvGraph& rv,
                                         double now, const RouteExtraCost& extra_cost = {},
                                         int threads = 1);

}  // namespace modjoint
