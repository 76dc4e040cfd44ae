#include "modjoint/matching.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

namespace modjoint {

namespace {

struct WindowInfo {
    double request_time = 0.0;
    double latest_pickup = 0.0;
    double latest_arrival = 0.0;
};

using WindowMap = std::map<RequestId, WindowInfo>;

WindowMap windows_for(const VehicleState& v, const std::vector<const Request*>& added) {
    WindowMap w;
    for (const auto& c : v.commitments)
        w[c.request] = {c.request_time, c.request_time + c.max_wait,
                        c.request_time + c.direct_time + c.max_delay};
    for (const Request* r : added) w[r->id] = {r->request_time, r->latest_pickup(), r->latest_arrival()};
    return w;
}

struct EvalResult {
    bool feasible = false;
    double meters = 0.0;
    double end_time = 0.0;
    std::vector<Stop> stops;
    std::map<RequestId, double> pickups, dropoffs;
};

// Walks a stop sequence from the vehicle anchor, filling planned times and
// checking wait, delay and capacity constraints.
EvalResult evaluate_sequence(const RoadNetwork& net, const VehicleState& v, double depart,
                             std::vector<Stop> seq, const WindowMap& windows, bool check_constraints) {
    EvalResult res;
    double t = depart;
    NodeId prev = v.loc;
    int occupancy = v.onboard_count();
    double meters = 0.0;
    for (auto& stop : seq) {
        if (stop.node != prev) {
            PathCost leg = net.shortest_path_cost(prev, stop.node);
            t += leg.seconds;
            meters += leg.meters;
        }
        auto wit = windows.find(stop.request);
        if (wit == windows.end()) return res;  // unknown request in plan
        const WindowInfo& w = wit->second;
        if (stop.action == StopAction::Pickup) {
            t = std::max(t, w.request_time);
            if (check_constraints && t > w.latest_pickup + 1e-9) return res;
            occupancy++;
            if (check_constraints && occupancy > v.capacity) return res;
            res.pickups[stop.request] = t;
        } else {
            if (check_constraints && t > w.latest_arrival + 1e-9) return res;
            occupancy--;
            if (occupancy < 0) return res;
            res.dropoffs[stop.request] = t;
        }
        stop.planned_time = t;
        prev = stop.node;
    }
    res.feasible = true;
    res.meters = meters;
    res.end_time = t;
    res.stops = std::move(seq);
    return res;
}

// Every way of inserting (pickup, dropoff) into a sequence keeping the
// pickup first.
void enumerate_insertions(const std::vector<Stop>& base, const Stop& pickup, const Stop& dropoff,
                          std::vector<std::vector<Stop>>& out) {
    const size_t n = base.size();
    for (size_t i = 0; i <= n; i++) {
        for (size_t j = i; j <= n; j++) {
            std::vector<Stop> seq;
            seq.reserve(n + 2);
            seq.insert(seq.end(), base.begin(), base.begin() + static_cast<long>(i));
            seq.push_back(pickup);
            seq.insert(seq.end(), base.begin() + static_cast<long>(i), base.begin() + static_cast<long>(j));
            seq.push_back(dropoff);
            seq.insert(seq.end(), base.begin() + static_cast<long>(j), base.end());
            out.push_back(std::move(seq));
        }
    }
}

std::optional<InsertionPlan> best_insertion(const RoadNetwork& net, double per_mile_cost,
                                            const VehicleState& v, const std::vector<const Request*>& added,
                                            double now) {
    const double depart = std::max(v.loc_time, now);
    const WindowMap windows = windows_for(v, added);

    // current plan metrics, re-timed from the anchor
    double base_meters = 0.0;
    double base_busy = 0.0;
    if (!v.stops.empty()) {
        EvalResult base = evaluate_sequence(net, v, depart, v.stops, windows, false);
        if (!base.feasible) return std::nullopt;
        base_meters = base.meters;
        base_busy = base.end_time - depart;
    }

    std::vector<std::vector<Stop>> candidates;
    {
        Stop p1{added[0]->origin, StopAction::Pickup, added[0]->id, 0.0};
        Stop d1{added[0]->dest, StopAction::Dropoff, added[0]->id, 0.0};
        std::vector<std::vector<Stop>> first;
        enumerate_insertions(v.stops, p1, d1, first);
        if (added.size() == 1) {
            candidates = std::move(first);
        } else {
            Stop p2{added[1]->origin, StopAction::Pickup, added[1]->id, 0.0};
            Stop d2{added[1]->dest, StopAction::Dropoff, added[1]->id, 0.0};
            for (const auto& seq : first) enumerate_insertions(seq, p2, d2, candidates);
        }
    }

    std::optional<InsertionPlan> best;
    for (auto& seq : candidates) {
        EvalResult r = evaluate_sequence(net, v, depart, std::move(seq), windows, true);
        if (!r.feasible) continue;
        InsertionPlan plan;
        plan.stops = std::move(r.stops);
        plan.added_meters = r.meters - base_meters;
        plan.added_seconds = (r.end_time - depart) - base_busy;
        plan.added_cost = per_mile_cost * meters_to_miles(plan.added_meters);
        plan.pickup_time = r.pickups.at(added[0]->id);
        plan.dropoff_time = r.dropoffs.at(added[0]->id);
        if (added.size() == 2) {
            plan.pickup_time_2 = r.pickups.at(added[1]->id);
            plan.dropoff_time_2 = r.dropoffs.at(added[1]->id);
        }
        plan.plan_end_time = r.end_time;
        if (!best || plan.added_cost < best->added_cost - 1e-12 ||
            (std::fabs(plan.added_cost - best->added_cost) <= 1e-12 && plan.plan_end_time < best->plan_end_time))
            best = std::move(plan);
    }
    return best;
}

}  // namespace

int VehicleState::onboard_count() const {
    int n = 0;
    for (const auto& c : commitments)
        if (c.onboard) n++;
    return n;
}

const VehicleState::Commitment* VehicleState::find_commitment(RequestId r) const {
    for (const auto& c : commitments)
        if (c.request == r) return &c;
    return nullptr;
}

Request make_request(const RoadNetwork& net, RequestId id, NodeId origin, NodeId dest,
                     double request_time, double max_wait, double max_delay) {
    if (!(max_wait > 0.0) || !(max_delay > 0.0)) throw ValidationError("max_wait and max_delay must be > 0");
    Request r;
    r.id = id;
    r.origin = origin;
    r.dest = dest;
    r.request_time = request_time;
    PathCost pc = net.shortest_path_cost(origin, dest);
    r.direct_time = pc.seconds;
    r.direct_meters = pc.meters;
    r.max_wait = max_wait;
    r.max_delay = max_delay;
    return r;
}

std::optional<InsertionPlan> feasible_vehicle_request(const RoadNetwork& net, double per_mile_cost,
                                                      const VehicleState& v, const Request& r, double now) {
    return best_insertion(net, per_mile_cost, v, {&r}, now);
}

std::optional<InsertionPlan> feasible_vehicle_pair(const RoadNetwork& net, double per_mile_cost,
                                                   const VehicleState& v, const Request& r1,
                                                   const Request& r2, double now) {
    return best_insertion(net, per_mile_cost, v, {&r1, &r2}, now);
}

bool feasible_pair(const RoadNetwork& net, const Request& r1, const Request& r2) {
    VehicleState virtual_vehicle;
    virtual_vehicle.id = -1;
    virtual_vehicle.service_type = Mode::Shared;
    virtual_vehicle.capacity = 2;
    virtual_vehicle.loc = r1.origin;
    virtual_vehicle.loc_time = std::max(r1.request_time, r2.request_time);
    return feasible_vehicle_pair(net, 0.0, virtual_vehicle, r1, r2, virtual_vehicle.loc_time).has_value();
}

bool validate_plan(const RoadNetwork& net, const VehicleState& v, const std::vector<Stop>& stops,
                   const std::vector<Request>& added, double now) {
    std::vector<const Request*> ptrs;
    ptrs.reserve(added.size());
    for (const auto& r : added) ptrs.push_back(&r);
    EvalResult r = evaluate_sequence(net, v, std::max(v.loc_time, now), stops, windows_for(v, ptrs), true);
    return r.feasible;
}

namespace {

void parallel_over(int count, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; i++) fn(i);
        return;
    }
    const int workers = std::min(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; w++)
        pool.emplace_back([&, w]() {
            for (int i = w; i < count; i += workers) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

RvGraph build_rv_graph(const RoadNetwork& net, double per_mile_cost, const std::vector<Request>& requests,
                       const std::vector<VehicleState>& vehicles, double now, int threads) {
    RvGraph g;
    std::vector<const Request*> by_id;
    by_id.reserve(requests.size());
    for (const auto& r : requests) by_id.push_back(&r);
    std::sort(by_id.begin(), by_id.end(), [](const Request* a, const Request* b) { return a->id < b->id; });

    for (size_t i = 0; i < by_id.size(); i++)
        for (size_t j = i + 1; j < by_id.size(); j++)
            if (feasible_pair(net, *by_id[i], *by_id[j]) || feasible_pair(net, *by_id[j], *by_id[i]))
                g.request_edges.emplace_back(by_id[i]->id, by_id[j]->id);

    std::vector<std::vector<RvGraph::VehicleEdge>> per_request(by_id.size());
    parallel_over(static_cast<int>(by_id.size()), threads, [&](int idx) {
        const Request& r = *by_id[static_cast<size_t>(idx)];
        auto to_origin = net.sssp_to(r.origin);
        for (const auto& v : vehicles) {
            // necessary condition: the vehicle must be able to reach the
            // origin inside the wait window even with no other stops
            const double reach = to_origin->seconds[static_cast<size_t>(net.index_of(v.loc))];
            if (!(std::max(v.loc_time, now) + reach <= r.latest_pickup() + 1e-9)) continue;
            auto plan = feasible_vehicle_request(net, per_mile_cost, v, r, now);
            if (plan) per_request[static_cast<size_t>(idx)].push_back({r.id, v.id, std::move(*plan)});
        }
        std::sort(per_request[static_cast<size_t>(idx)].begin(), per_request[static_cast<size_t>(idx)].end(),
                  [](const auto& a, const auto& b) { return a.vehicle < b.vehicle; });
    });
    for (auto& edges : per_request)
        for (auto& e : edges) g.vehicle_edges.push_back(std::move(e));
    return g;
}

std::vector<EsvMatching> build_esv_graph(const RoadNetwork& net, double per_mile_cost,
                                         const std::vector<Request>& requests,
                                         const std::vector<VehicleState>& vehicles, const RvGraph& rv,
                                         double now, const RouteExtraCost& extra_cost, int threads) {
    std::map<RequestId, const Request*> req_by_id;
    for (const auto& r : requests) req_by_id[r.id] = &r;
    std::map<VehicleId, const VehicleState*> veh_by_id;
    for (const auto& v : vehicles) veh_by_id[v.id] = &v;

    auto slot_cost = [&](Mode mode, const Request& r, const InsertionPlan& plan) {
        double extra = 0.0;
        if (extra_cost) extra = extra_cost(mode, r.origin, r.dest, plan.added_seconds);
        return plan.added_cost + extra;
    };

    // best exclusive / shared vehicle per request from the RV edges
    std::map<RequestId, EsvSlot> best_exclusive, best_shared;
    for (const auto& e : rv.vehicle_edges) {
        const VehicleState& v = *veh_by_id.at(e.vehicle);
        const Request& r = *req_by_id.at(e.request);
        const double cost = slot_cost(v.service_type, r, e.plan);
        auto& slot = v.service_type == Mode::Exclusive ? best_exclusive[e.request] : best_shared[e.request];
        if (!slot.present() || cost < slot.cost - 1e-12 ||
            (std::fabs(cost - slot.cost) <= 1e-12 && e.vehicle < slot.vehicle)) {
            slot.vehicle = e.vehicle;
            slot.cost = cost;
            slot.plan = e.plan;
        }
    }

    std::vector<EsvMatching> out;
    for (const auto& [rid, r] : req_by_id) {
        EsvMatching m;
        m.requests = {rid};
        auto ex = best_exclusive.find(rid);
        auto sh = best_shared.find(rid);
        if (ex != best_exclusive.end()) m.exclusives = {ex->second};
        else m.exclusives = {EsvSlot{}};
        if (sh != best_shared.end()) m.shared = sh->second;
        if (m.exclusives[0].present() || m.shared.present()) out.push_back(std::move(m));
    }

    // two-request matchings need a shared vehicle feasible for the pair
    std::vector<EsvMatching> pair_matchings(rv.request_edges.size());
    std::vector<char> pair_ok(rv.request_edges.size(), 0);
    parallel_over(static_cast<int>(rv.request_edges.size()), threads, [&](int idx) {
        const auto& [a, b] = rv.request_edges[static_cast<size_t>(idx)];
        const Request& r1 = *req_by_id.at(a);
        const Request& r2 = *req_by_id.at(b);
        EsvSlot shared_slot;
        for (const auto& v : vehicles) {
            if (v.service_type != Mode::Shared) continue;
            auto plan = feasible_vehicle_pair(net, per_mile_cost, v, r1, r2, now);
            if (!plan) continue;
            double extra = 0.0;
            if (extra_cost) {
                const Stop& first = plan->stops.front();
                const Stop& last = plan->stops.back();
                extra = extra_cost(Mode::Shared, first.node, last.node, plan->added_seconds);
            }
            const double cost = plan->added_cost + extra;
            if (!shared_slot.present() || cost < shared_slot.cost - 1e-12 ||
                (std::fabs(cost - shared_slot.cost) <= 1e-12 && v.id < shared_slot.vehicle)) {
                shared_slot.vehicle = v.id;
                shared_slot.cost = cost;
                shared_slot.plan = std::move(*plan);
            }
        }
        if (!shared_slot.present()) return;
        EsvMatching m;
        m.requests = {a, b};
        m.shared = std::move(shared_slot);
        m.exclusives.resize(2);
        auto e1 = best_exclusive.find(a);
        auto e2 = best_exclusive.find(b);
        if (e1 != best_exclusive.end()) m.exclusives[0] = e1->second;
        if (e2 != best_exclusive.end()) m.exclusives[1] = e2->second;
        pair_matchings[static_cast<size_t>(idx)] = std::move(m);
        pair_ok[static_cast<size_t>(idx)] = 1;
    });
    for (size_t i = 0; i < pair_matchings.size(); i++)
        if (pair_ok[i]) out.push_back(std::move(pair_matchings[i]));

    std::sort(out.begin(), out.end(),
              [](const EsvMatching& a, const EsvMatching& b) { return a.requests < b.requests; });
    for (size_t i = 0; i < out.size(); i++) out[i].id = static_cast<int>(i);
    return out;
}

}  // namespace modjoint
