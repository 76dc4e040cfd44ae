#include "modjoint/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <queue>
#include <set>

#include "json.hpp"
#include "modjoint/static_pricing.hpp"

namespace modjoint {

namespace {

enum EventKind { kIntervalTick = 0, kVehicleStop = 1, kArrival = 2, kBatchClose = 3, kRebalanceCheck = 4 };

struct Event {
    double time;
    int prio;
    long seq;
    int a = 0;   // vehicle or request index
    long b = 0;  // plan version for stop events
};

struct EventAfter {
    bool operator()(const Event& x, const Event& y) const {
        if (x.time != y.time) return x.time > y.time;
        if (x.prio != y.prio) return x.prio > y.prio;
        return x.seq > y.seq;
    }
};

enum class Outcome { Pending, Declined, Lost, Committed, Served };

struct RequestState {
    Outcome outcome = Outcome::Pending;
    Mode mode = Mode::Outside;
    bool no_offer = false;
    double fare = 0.0;
    double pickup_time = 0.0;
    double wait = 0.0;
    double travel = 0.0;
    double delay = 0.0;
};

struct PathHop {
    NodeId node;
    double time;
    double meters;
};

struct VehicleExtra {
    std::deque<PathHop> path;
    long version = 0;
    double idle_since = 0.0;
    bool check_scheduled = false;
    // pooling-episode bookkeeping for attributed cost samples: the request
    // that opened the trip is sampled once, at its dropoff
    RequestId initiator = -1;
    double initiator_solo_cost = 0.0;
    bool initiator_matched = false;
    double initiator_marginal_cost = 0.0;
    double initiator_partner_price = 0.0;
};

}  // namespace

struct SimRun {
    Simulation& sim;
    const SimConfig& cfg;
    Policy policy;

    std::vector<VehicleState> vehicles;
    std::vector<VehicleExtra> extra;
    std::vector<Request> requests;
    std::vector<RequestState> states;

    std::priority_queue<Event, std::vector<Event>, EventAfter> queue;
    long seq_counter = 0;
    double now = 0.0;
    std::uint64_t choice_seed = 0;
    bool rebalance_on = false;
    RegionProfitRates rates;
    std::map<VehicleId, int> vehicle_index_map;

    std::vector<int> pending_batch;
    std::map<RequestId, MatchingQuote::PerRequest> quote_by_request;
    bool dumps_started = false;

    // day-attributed accounting
    std::map<long, double> day_fares, day_op, day_pen;
    double fares = 0.0, op_cost = 0.0, penalties = 0.0;
    double quoted_e_sum = 0.0, static_e_sum = 0.0;
    long quoted_e_n = 0;

    SimRun(Simulation& s, Policy p) : sim(s), cfg(s.cfg_), policy(p) {}

    void push(double time, int kind, int a = 0, long b = 0) {
        queue.push(Event{time, kind, seq_counter++, a, b});
    }

    static long day_of(double t) { return static_cast<long>(std::floor(t / kSecondsPerDay)); }

    // ---- movement -------------------------------------------------------

    void advance_vehicle(int v, double t) {
        auto& ex = extra[static_cast<size_t>(v)];
        auto& st = vehicles[static_cast<size_t>(v)];
        while (!ex.path.empty() && ex.path.front().time <= t + 1e-9) {
            const PathHop& hop = ex.path.front();
            const double cost = cfg.costs.per_mile_cost * meters_to_miles(hop.meters);
            op_cost += cost;
            day_op[day_of(hop.time)] += cost;
            st.loc = hop.node;
            st.loc_time = hop.time;
            ex.path.pop_front();
        }
    }

    void refresh_anchor(int v, double t) {
        advance_vehicle(v, t);
        auto& ex = extra[static_cast<size_t>(v)];
        auto& st = vehicles[static_cast<size_t>(v)];
        if (!ex.path.empty()) {
            st.loc = ex.path.front().node;
            st.loc_time = ex.path.front().time;
        }
    }

    void refresh_all_anchors(double t) {
        for (int v = 0; v < static_cast<int>(vehicles.size()); v++) refresh_anchor(v, t);
    }

    void expand_leg(NodeId from, NodeId to, double depart, std::deque<PathHop>& out) {
        if (from == to) return;
        auto nodes = cfg.net->shortest_path_nodes(from, to);
        auto table = cfg.net->sssp_from(from);
        double prev_m = 0.0;
        for (size_t i = 1; i < nodes.size(); i++) {
            const int idx = cfg.net->index_of(nodes[i]);
            out.push_back({nodes[i], depart + table->seconds[static_cast<size_t>(idx)],
                           table->meters[static_cast<size_t>(idx)] - prev_m});
            prev_m = table->meters[static_cast<size_t>(idx)];
        }
    }

    void rebuild_path(int v) {
        auto& ex = extra[static_cast<size_t>(v)];
        auto& st = vehicles[static_cast<size_t>(v)];
        advance_vehicle(v, now);
        // a moving vehicle finishes its current edge before re-routing; keep
        // that hop so its distance is still accrued
        std::deque<PathHop> fresh;
        if (!ex.path.empty() && ex.path.front().node == st.loc && ex.path.front().time > now)
            fresh.push_back(ex.path.front());
        ex.path = std::move(fresh);
        double t = std::max(st.loc_time, now);
        NodeId prev = st.loc;
        for (const auto& stop : st.stops) {
            expand_leg(prev, stop.node, t, ex.path);
            if (!ex.path.empty() && ex.path.back().node == stop.node) t = ex.path.back().time;
            t = std::max(t, stop.planned_time);
            prev = stop.node;
        }
    }

    // ---- quoting helpers --------------------------------------------------

    double outside_utility(const Request& r) const {
        const double p_o = cfg.outside_price_factor * static_price(cfg.static_params, r);
        ModeOffer offer{p_o, cfg.outside_wait_s, cfg.outside_travel_factor * r.direct_time};
        return utility(cfg.choice, offer) + cfg.choice.asc_outside;
    }

    RouteExtraCost retro_lambda() {
        if (rates.empty() || cfg.costs.retrospective_multiplier == 0.0) return {};
        return [this](Mode m, NodeId a, NodeId b, double busy_s) {
            const int interval = cfg.interval_of(now);
            double trip_s = busy_s;
            if (m == Mode::Shared && !cfg.retro_shared_own_duration)
                trip_s = cfg.net->shortest_travel_time(a, b);
            const double day_time = std::fmod(now, kSecondsPerDay);
            const double remaining = (interval + 1) * cfg.interval_length_s() - day_time;
            return retrospective_cost(rates, m, cfg.clusters.cluster_of(a), cfg.clusters.cluster_of(b),
                                      interval, trip_s, std::max(remaining, 0.0),
                                      cfg.costs.retrospective_multiplier);
        };
    }

    int cell_index(ClusterId c, int interval) const { return c * cfg.intervals_per_day + interval; }

    void log_quote(const Request& r, const MatchingQuote::PerRequest& q, double cost_e, double cost_s,
                   double u_o) {
        const int cell = cell_index(cfg.clusters.cluster_of(r.origin), cfg.interval_of(now));
        auto& qs = sim.quote_stats_[static_cast<size_t>(cell)];
        qs.u_outside += u_o;
        qs.n_o++;
        if (q.has_exclusive) {
            qs.wait_e += q.wait_exclusive;
            qs.travel_e += q.travel_exclusive;
            qs.cost_e += cost_e;
            qs.n_e++;
            quoted_e_sum += q.price_exclusive;
            static_e_sum += static_price(cfg.static_params, r);
            quoted_e_n++;
        }
        if (q.has_shared) {
            qs.wait_s += q.wait_shared;
            qs.travel_s += q.travel_shared;
            qs.cost_s += cost_s;
            qs.n_s++;
        }
    }

    Mode sample_mode(const Request& r, const MatchingQuote::PerRequest& q) {
        if (sim.exogenous_choice_) {
            // demand treated as exogenous: choice pinned to the static
            // benchmark menu on the same quality of service
            const double p_stat = static_price(cfg.static_params, r);
            const double ps_stat =
                static_shared_price(cfg.static_params, p_stat, cfg.od_clusters(r.origin, r.dest));
            const double ue = q.has_exclusive
                                  ? utility(cfg.choice, {p_stat, q.wait_exclusive, q.travel_exclusive}) +
                                        cfg.choice.asc_exclusive
                                  : -1e30;
            const double us = q.has_shared
                                  ? utility(cfg.choice, {ps_stat, q.wait_shared, q.travel_shared}) +
                                        cfg.choice.asc_shared
                                  : -1e30;
            ChoiceProbabilities probs = choice_probabilities(ue, us, outside_utility(r));
            if (!q.has_exclusive) probs.p_exclusive = 0.0;
            if (!q.has_shared) probs.p_shared = 0.0;
            return sample_choice(probs, Rng::unit_for(choice_seed, static_cast<std::uint64_t>(r.id)));
        }
        ChoiceProbabilities probs{q.has_exclusive ? q.prob_exclusive : 0.0,
                                  q.has_shared ? q.prob_shared : 0.0, 0.0};
        probs.p_outside = std::max(0.0, 1.0 - probs.p_exclusive - probs.p_shared);
        return sample_choice(probs, Rng::unit_for(choice_seed, static_cast<std::uint64_t>(r.id)));
    }

    // ---- commitment and completion ----------------------------------------

    VehicleState stripped_state(int v) const {
        VehicleState st = vehicles[static_cast<size_t>(v)];
        st.stops.clear();
        st.commitments.clear();
        return st;
    }

    double exogenous_partner_price(const Request& partner) const {
        const double pe = static_price(cfg.static_params, partner);
        return static_shared_price(cfg.static_params, pe, cfg.od_clusters(partner.origin, partner.dest));
    }

    void commit_requests(int v, const InsertionPlan& plan, const std::vector<int>& req_indices,
                         const std::vector<double>& fares_in) {
        auto& st = vehicles[static_cast<size_t>(v)];
        auto& ex = extra[static_cast<size_t>(v)];
        const bool was_empty = st.commitments.empty();

        for (size_t k = 0; k < req_indices.size(); k++) {
            const Request& r = requests[static_cast<size_t>(req_indices[k])];
            RequestState& rs = states[static_cast<size_t>(req_indices[k])];
            rs.outcome = Outcome::Committed;
            rs.mode = st.service_type;
            rs.fare = fares_in[k];
            fares += fares_in[k];
            day_fares[day_of(now)] += fares_in[k];
            st.commitments.push_back({r.id, r.request_time, r.direct_time, r.max_wait, r.max_delay, false});
        }

        if (st.service_type == Mode::Shared) {
            if (was_empty) {
                int init = req_indices[0];
                for (int idx : req_indices) {
                    const Request& a = requests[static_cast<size_t>(idx)];
                    const Request& b = requests[static_cast<size_t>(init)];
                    if (a.request_time < b.request_time || (a.request_time == b.request_time && a.id < b.id))
                        init = idx;
                }
                ex.initiator = requests[static_cast<size_t>(init)].id;
                ex.initiator_matched = false;
                ex.initiator_solo_cost = plan.added_cost;
                if (req_indices.size() == 2) {
                    const int partner = req_indices[0] == init ? req_indices[1] : req_indices[0];
                    const Request& init_r = requests[static_cast<size_t>(init)];
                    const Request& partner_r = requests[static_cast<size_t>(partner)];
                    auto solo = feasible_vehicle_request(*cfg.net, cfg.costs.per_mile_cost,
                                                         stripped_state(v), init_r, now);
                    const double solo_cost = solo ? solo->added_cost : 0.0;
                    ex.initiator_solo_cost = solo_cost;
                    ex.initiator_matched = true;
                    ex.initiator_marginal_cost = plan.added_cost - solo_cost;
                    double partner_fare = 0.0;
                    for (size_t k = 0; k < req_indices.size(); k++)
                        if (req_indices[k] == partner) partner_fare = fares_in[k];
                    ex.initiator_partner_price =
                        sim.exogenous_choice_ ? exogenous_partner_price(partner_r) : partner_fare;
                }
            } else if (ex.initiator >= 0) {
                const Request& joiner = requests[static_cast<size_t>(req_indices[0])];
                ex.initiator_matched = true;
                ex.initiator_marginal_cost = plan.added_cost;
                ex.initiator_partner_price =
                    sim.exogenous_choice_ ? exogenous_partner_price(joiner) : fares_in[0];
            }
        }

        st.stops = plan.stops;
        ex.version++;
        ex.idle_since = std::numeric_limits<double>::infinity();
        rebuild_path(v);
        for (const auto& stop : st.stops) push(stop.planned_time, kVehicleStop, v, ex.version);
    }

    void handle_stop_event(int v, long version) {
        auto& ex = extra[static_cast<size_t>(v)];
        if (version != ex.version) return;  // superseded plan
        auto& st = vehicles[static_cast<size_t>(v)];
        if (st.stops.empty()) return;
        advance_vehicle(v, now);
        const Stop stop = st.stops.front();
        st.stops.erase(st.stops.begin());

        const int ridx = stop.request;
        const Request& r = requests[static_cast<size_t>(ridx)];
        RequestState& rs = states[static_cast<size_t>(ridx)];
        if (stop.action == StopAction::Pickup) {
            for (auto& c : st.commitments)
                if (c.request == r.id) c.onboard = true;
            rs.pickup_time = now;
            rs.wait = now - r.request_time;
            if (st.service_type == Mode::Exclusive) {
                sim.wait_sum_e_ += rs.wait;
                sim.wait_n_e_++;
            } else {
                sim.wait_sum_s_ += rs.wait;
                sim.wait_n_s_++;
            }
        } else {
            rs.outcome = Outcome::Served;
            rs.travel = now - rs.pickup_time;
            rs.delay = now - (r.request_time + r.direct_time);
            finalize_trip(v, r, rs);
            st.commitments.erase(std::remove_if(st.commitments.begin(), st.commitments.end(),
                                                [&](const auto& c) { return c.request == r.id; }),
                                 st.commitments.end());
            record_trip_duration(r, rs, st.service_type);
            if (st.commitments.empty() && st.stops.empty()) {
                ex.idle_since = now;
                maybe_schedule_check(v, now + cfg.rebalance_idle_s);
            }
        }
    }

    void finalize_trip(int v, const Request& r, const RequestState& rs) {
        auto& ex = extra[static_cast<size_t>(v)];
        TripLogEntry e;
        e.request = r.id;
        e.mode = vehicles[static_cast<size_t>(v)].service_type;
        e.od = cfg.od_clusters(r.origin, r.dest);
        e.fare = rs.fare;
        e.wait = rs.wait;
        e.travel = rs.travel;
        e.delay = rs.delay;
        if (e.mode == Mode::Shared && ex.initiator == r.id) {
            e.shared_initiator = true;
            e.pooled = ex.initiator_matched;
            e.realized_shared_cost = ex.initiator_matched
                                         ? ex.initiator_marginal_cost - ex.initiator_partner_price
                                         : ex.initiator_solo_cost;
            ex.initiator = -1;
        }
        sim.trips_.push_back(e);
    }

    void record_trip_duration(const Request& r, const RequestState& rs, Mode mode) {
        const int cell = cell_index(cfg.clusters.cluster_of(r.origin), cfg.interval_of(rs.pickup_time));
        auto& ts = sim.tick_stats_[static_cast<size_t>(cell)];
        if (mode == Mode::Exclusive) {
            ts.trip_dur_e += rs.travel;
            ts.trips_e++;
        } else {
            ts.trip_dur_s += rs.travel;
            ts.trips_s++;
        }
    }

    // ---- rebalancing --------------------------------------------------------

    void maybe_schedule_check(int v, double t) {
        if (!rebalance_on || t > cfg.horizon_s) return;
        auto& ex = extra[static_cast<size_t>(v)];
        if (ex.check_scheduled) return;
        ex.check_scheduled = true;
        push(t, kRebalanceCheck, v);
    }

    void handle_rebalance_check(int v) {
        auto& ex = extra[static_cast<size_t>(v)];
        ex.check_scheduled = false;
        auto& st = vehicles[static_cast<size_t>(v)];
        if (!st.commitments.empty() || !st.stops.empty()) return;
        advance_vehicle(v, now);
        if (!ex.path.empty()) {  // already repositioning
            maybe_schedule_check(v, now + cfg.rebalance_idle_s);
            return;
        }
        if (now - ex.idle_since < cfg.rebalance_idle_s - 1e-9) {
            maybe_schedule_check(v, ex.idle_since + cfg.rebalance_idle_s);
            return;
        }
        if (rates.empty()) return;
        const int interval = cfg.interval_of(now);
        const ClusterId own = cfg.clusters.cluster_of(st.loc);
        const double own_rate = rates.rate(own, interval, st.service_type);
        ClusterId target = -1;
        double best_tt = 0.0;
        for (ClusterId c = 0; c < cfg.clusters.k; c++) {
            if (c == own || !(rates.rate(c, interval, st.service_type) > own_rate + 1e-12)) continue;
            // cluster-level decision, so the precomputed medoid times suffice
            const double tt = cfg.cluster_times.seconds(own, c);
            if (!std::isfinite(tt)) continue;
            if (target < 0 || tt < best_tt - 1e-9 || (std::fabs(tt - best_tt) <= 1e-9 && c < target)) {
                target = c;
                best_tt = tt;
            }
        }
        if (target >= 0) expand_leg(st.loc, cfg.clusters.medoids[static_cast<size_t>(target)], now, ex.path);
        maybe_schedule_check(v, now + cfg.rebalance_idle_s);
    }

    // ---- sequential policies -------------------------------------------------

    void handle_sequential(int ridx) {
        const Request& r = requests[static_cast<size_t>(ridx)];
        RequestState& rs = states[static_cast<size_t>(ridx)];
        refresh_all_anchors(now);

        MatchingQuote::PerRequest q;
        VehicleId veh_e = -1, veh_s = -1;
        InsertionPlan plan_e, plan_s;
        double cost_e = 0.0, cost_s = 0.0;
        const double u_o = outside_utility(r);

        if (policy == Policy::Spd) {
            QuoteEnv env;
            env.net = cfg.net.get();
            env.choice = cfg.choice;
            env.per_mile_cost = cfg.costs.per_mile_cost;
            env.u_outside = u_o;
            env.shared_operational_cost = cfg.costs.od_expected_cost.value(cfg.od_clusters(r.origin, r.dest));
            env.extra_cost = retro_lambda();
            env.price_floor = cfg.price_floor;
            SpdDecision dec = spd_handle_request(r, vehicles, env, now);
            if (dec.no_offer || dec.quote.no_sale) {
                rs.outcome = Outcome::Declined;
                rs.no_offer = dec.no_offer;
                return;
            }
            q.has_exclusive = dec.offer_exclusive;
            q.has_shared = dec.offer_shared;
            q.price_exclusive = dec.quote.price_exclusive;
            q.price_shared = dec.quote.price_shared;
            q.prob_exclusive = dec.quote.probabilities.p_exclusive;
            q.prob_shared = dec.quote.probabilities.p_shared;
            q.wait_exclusive = dec.offer_e.wait;
            q.travel_exclusive = dec.offer_e.travel;
            q.wait_shared = dec.offer_s.wait;
            q.travel_shared = dec.offer_s.travel;
            veh_e = dec.vehicle_exclusive;
            veh_s = dec.vehicle_shared;
            plan_e = dec.plan_exclusive;
            plan_s = dec.plan_shared;
            cost_e = dec.cost_exclusive;
            cost_s = dec.cost_shared;
        } else {
            // benchmark: nearest feasible vehicle per type, static prices
            auto to_origin = cfg.net->sssp_to(r.origin);
            std::optional<InsertionPlan> be, bs;
            for (const auto& v : vehicles) {
                const double reach = to_origin->seconds[static_cast<size_t>(cfg.net->index_of(v.loc))];
                if (!(std::max(v.loc_time, now) + reach <= r.latest_pickup() + 1e-9)) continue;
                auto plan = feasible_vehicle_request(*cfg.net, cfg.costs.per_mile_cost, v, r, now);
                if (!plan) continue;
                auto& best = v.service_type == Mode::Exclusive ? be : bs;
                VehicleId& veh = v.service_type == Mode::Exclusive ? veh_e : veh_s;
                if (!best || plan->pickup_time < best->pickup_time - 1e-9 ||
                    (std::fabs(plan->pickup_time - best->pickup_time) <= 1e-9 && v.id < veh)) {
                    best = plan;
                    veh = v.id;
                }
            }
            if (!be && !bs) {
                rs.outcome = Outcome::Declined;
                rs.no_offer = true;
                return;
            }
            const double pe = static_price(cfg.static_params, r);
            const double ps = static_shared_price(cfg.static_params, pe, cfg.od_clusters(r.origin, r.dest));
            double ue = -1e30, us = -1e30;
            if (be) {
                q.has_exclusive = true;
                q.price_exclusive = pe;
                q.wait_exclusive = be->pickup_time - r.request_time;
                q.travel_exclusive = be->dropoff_time - be->pickup_time;
                ue = utility(cfg.choice, {pe, q.wait_exclusive, q.travel_exclusive}) + cfg.choice.asc_exclusive;
                plan_e = *be;
                cost_e = plan_e.added_cost;
            }
            if (bs) {
                q.has_shared = true;
                q.price_shared = ps;
                q.wait_shared = bs->pickup_time - r.request_time;
                q.travel_shared = bs->dropoff_time - bs->pickup_time;
                us = utility(cfg.choice, {ps, q.wait_shared, q.travel_shared}) + cfg.choice.asc_shared;
                plan_s = *bs;
                cost_s = plan_s.added_cost;
            }
            ChoiceProbabilities probs = choice_probabilities(ue, us, u_o);
            q.prob_exclusive = q.has_exclusive ? probs.p_exclusive : 0.0;
            q.prob_shared = q.has_shared ? probs.p_shared : 0.0;
        }

        log_quote(r, q, cost_e, cost_s, u_o);
        const Mode chosen = sample_mode(r, q);
        if (chosen == Mode::Outside || (chosen == Mode::Exclusive && !q.has_exclusive) ||
            (chosen == Mode::Shared && !q.has_shared)) {
            rs.outcome = Outcome::Declined;
            return;
        }
        const int v = vehicle_index_map.at(chosen == Mode::Exclusive ? veh_e : veh_s);
        commit_requests(v, chosen == Mode::Exclusive ? plan_e : plan_s, {ridx},
                        {chosen == Mode::Exclusive ? q.price_exclusive : q.price_shared});
    }

    // ---- batched policies --------------------------------------------------

    bool price_single(EsvMatching& m, const Request& r) {
        MatchingQuote::PerRequest q;
        const double u_o = outside_utility(r);
        const double beta = cfg.choice.effective_beta_p();
        const bool has_e = m.exclusives[0].present();
        const bool has_s = m.shared.present();
        double cost_e = 0.0, cost_s = 0.0;
        double ue = -1e30, us = -1e30;
        if (has_e) {
            q.has_exclusive = true;
            q.wait_exclusive = m.exclusives[0].plan.pickup_time - r.request_time;
            q.travel_exclusive = m.exclusives[0].plan.dropoff_time - m.exclusives[0].plan.pickup_time;
            ue = cfg.choice.beta_w * q.wait_exclusive + cfg.choice.beta_t * q.travel_exclusive +
                 cfg.choice.asc_exclusive;
            cost_e = m.exclusives[0].cost;
        }
        if (has_s) {
            q.has_shared = true;
            q.wait_shared = m.shared.plan.pickup_time - r.request_time;
            q.travel_shared = m.shared.plan.dropoff_time - m.shared.plan.pickup_time;
            us = cfg.choice.beta_w * q.wait_shared + cfg.choice.beta_t * q.travel_shared + cfg.choice.asc_shared;
            // quoted shared cost: learned O-D expectation plus the slot's
            // retrospective part; per-vehicle mileage only ranks vehicles
            const double retro_part = m.shared.cost - m.shared.plan.added_cost;
            cost_s = cfg.costs.od_expected_cost.value(cfg.od_clusters(r.origin, r.dest)) + retro_part;
        }

        if (policy == Policy::Bpd) {
            if (has_e && has_s) {
                SpdInstance inst{ue, us, u_o, cost_e, cost_s, beta};
                PriceQuote pq = spd_optimal_prices(inst);
                if (pq.no_sale) return false;
                q.price_exclusive = pq.price_exclusive;
                q.price_shared = pq.price_shared;
                q.prob_exclusive = pq.probabilities.p_exclusive;
                q.prob_shared = pq.probabilities.p_shared;
                m.u = pq.expected_profit;
            } else {
                const double u = has_e ? ue : us;
                const double c = has_e ? cost_e : cost_s;
                SingleProductQuote sq = single_product_price(u, u_o, c, beta);
                if (!(sq.expected_profit >= 0.0)) return false;
                if (has_e) {
                    q.price_exclusive = sq.price;
                    q.prob_exclusive = sq.probability;
                } else {
                    q.price_shared = sq.price;
                    q.prob_shared = sq.probability;
                }
                m.u = sq.expected_profit;
            }
        } else {  // Batched-Static: same pipeline, static prices in u and gamma
            const double pe = static_price(cfg.static_params, r);
            const double ps = static_shared_price(cfg.static_params, pe, cfg.od_clusters(r.origin, r.dest));
            if (has_e) q.price_exclusive = pe;
            if (has_s) q.price_shared = ps;
            ChoiceProbabilities probs =
                choice_probabilities(has_e ? beta * pe + ue : -1e30, has_s ? beta * ps + us : -1e30, u_o);
            q.prob_exclusive = has_e ? probs.p_exclusive : 0.0;
            q.prob_shared = has_s ? probs.p_shared : 0.0;
            m.u = q.prob_exclusive * (pe - cost_e) + q.prob_shared * (ps - cost_s);
        }

        if (cfg.price_floor &&
            ((q.has_exclusive && q.price_exclusive < *cfg.price_floor) ||
             (q.has_shared && q.price_shared < *cfg.price_floor))) {
            if (q.has_exclusive) q.price_exclusive = std::max(*cfg.price_floor, q.price_exclusive);
            if (q.has_shared) q.price_shared = std::max(*cfg.price_floor, q.price_shared);
            ChoiceProbabilities probs =
                choice_probabilities(has_e ? beta * q.price_exclusive + ue : -1e30,
                                     has_s ? beta * q.price_shared + us : -1e30, u_o);
            q.prob_exclusive = has_e ? probs.p_exclusive : 0.0;
            q.prob_shared = has_s ? probs.p_shared : 0.0;
            m.u = q.prob_exclusive * (q.price_exclusive - cost_e) +
                  q.prob_shared * (q.price_shared - cost_s);
        }
        m.quote.per_request = {q};
        m.quote.expected_profit = m.u;
        m.gammas.clear();
        if (has_e) m.gammas.emplace_back(m.exclusives[0].vehicle, q.prob_exclusive);
        if (has_s) m.gammas.emplace_back(m.shared.vehicle, q.prob_shared);
        return true;
    }

    bool price_pair(EsvMatching& m, const Request& r1, const Request& r2,
                    const std::map<RequestId, const EsvMatching*>& solo_matching,
                    const RouteExtraCost& retro) {
        BatchPricingInstance inst;
        inst.beta_p = cfg.choice.effective_beta_p();
        inst.cost_pooled = m.shared.cost;
        const Request* rr[2] = {&r1, &r2};
        MatchingQuote::PerRequest qs[2];
        for (int i = 0; i < 2; i++) {
            const Request& r = *rr[i];
            BatchRequestTerms& t = i == 0 ? inst.r1 : inst.r2;
            auto& q = qs[i];
            t.log_outside = outside_utility(r);
            t.offer_exclusive = m.exclusives[static_cast<size_t>(i)].present();
            if (t.offer_exclusive) {
                const auto& plan = m.exclusives[static_cast<size_t>(i)].plan;
                q.has_exclusive = true;
                q.wait_exclusive = plan.pickup_time - r.request_time;
                q.travel_exclusive = plan.dropoff_time - plan.pickup_time;
                t.d_exclusive = cfg.choice.beta_w * q.wait_exclusive +
                                cfg.choice.beta_t * q.travel_exclusive + cfg.choice.asc_exclusive;
                t.cost_exclusive = m.exclusives[static_cast<size_t>(i)].cost;
            }
            q.has_shared = true;
            const double pickup = i == 0 ? m.shared.plan.pickup_time : m.shared.plan.pickup_time_2;
            const double dropoff = i == 0 ? m.shared.plan.dropoff_time : m.shared.plan.dropoff_time_2;
            q.wait_shared = pickup - r.request_time;
            q.travel_shared = dropoff - pickup;
            t.d_shared =
                cfg.choice.beta_w * q.wait_shared + cfg.choice.beta_t * q.travel_shared + cfg.choice.asc_shared;
            // expected cost if the pair does not pool together
            double solo_busy = r.direct_time;
            auto it = solo_matching.find(r.id);
            if (it != solo_matching.end() && it->second->shared.present())
                solo_busy = it->second->shared.plan.added_seconds;
            const double retro_solo = retro ? retro(Mode::Shared, r.origin, r.dest, solo_busy) : 0.0;
            t.cost_shared = cfg.costs.od_expected_cost.value(cfg.od_clusters(r.origin, r.dest)) + retro_solo;
        }
        if (inst.pooling_savings() < 0.0) return false;  // pooling must save cost

        PriceVector prices{};
        ProbVector probs{};
        if (policy == Policy::Bpd) {
            BatchQuote bq = optimize_batch_prices(inst);
            prices = bq.prices;
            probs = bq.probabilities;
            m.u = bq.expected_profit;
        } else {
            for (int i = 0; i < 2; i++) {
                const Request& r = *rr[i];
                const double pe = static_price(cfg.static_params, r);
                prices[static_cast<size_t>(i * 2)] =
                    static_shared_price(cfg.static_params, pe, cfg.od_clusters(r.origin, r.dest));
                prices[static_cast<size_t>(i * 2 + 1)] = pe;
            }
            probs = batch_probabilities(inst, prices);
            m.u = batched_expected_profit(inst, prices);
        }
        if (cfg.price_floor) {
            bool floored = false;
            for (auto& p : prices)
                if (p < *cfg.price_floor) {
                    p = *cfg.price_floor;
                    floored = true;
                }
            if (floored) {
                probs = batch_probabilities(inst, prices);
                m.u = batched_expected_profit(inst, prices);
            }
        }
        for (int i = 0; i < 2; i++) {
            qs[i].price_shared = prices[static_cast<size_t>(i * 2)];
            qs[i].price_exclusive = prices[static_cast<size_t>(i * 2 + 1)];
            qs[i].prob_shared = probs[static_cast<size_t>(i * 2)];
            qs[i].prob_exclusive = probs[static_cast<size_t>(i * 2 + 1)];
        }
        m.quote.per_request = {qs[0], qs[1]};
        m.quote.expected_profit = m.u;
        m.gammas.clear();
        m.gammas.emplace_back(m.shared.vehicle, 1.0 - (1.0 - qs[0].prob_shared) * (1.0 - qs[1].prob_shared));
        for (int i = 0; i < 2; i++)
            if (m.exclusives[static_cast<size_t>(i)].present())
                m.gammas.emplace_back(m.exclusives[static_cast<size_t>(i)].vehicle, qs[i].prob_exclusive);
        return true;
    }

    void handle_batch_close() {
        if (!pending_batch.empty()) {
            std::vector<int> batch = std::move(pending_batch);
            pending_batch.clear();
            process_batch(batch);
        }
        if (now + cfg.batch_window_s <= cfg.horizon_s + cfg.batch_window_s + 1e-9)
            push(now + cfg.batch_window_s, kBatchClose);
    }

    void process_batch(const std::vector<int>& batch) {
        refresh_all_anchors(now);
        quote_by_request.clear();

        std::vector<Request> reqs;
        reqs.reserve(batch.size());
        for (int idx : batch) reqs.push_back(requests[static_cast<size_t>(idx)]);

        RvGraph rv = build_rv_graph(*cfg.net, cfg.costs.per_mile_cost, reqs, vehicles, now, cfg.threads);
        auto retro = retro_lambda();
        std::vector<EsvMatching> esv =
            build_esv_graph(*cfg.net, cfg.costs.per_mile_cost, reqs, vehicles, rv, now, retro, cfg.threads);

        std::map<RequestId, const EsvMatching*> solo_matching;
        for (const auto& m : esv)
            if (m.requests.size() == 1) solo_matching[m.requests[0]] = &m;
        std::map<RequestId, const Request*> req_by_id;
        for (const auto& r : reqs) req_by_id[r.id] = &r;

        std::vector<char> keep(esv.size(), 0);
        for (size_t i = 0; i < esv.size(); i++) {
            EsvMatching& m = esv[i];
            if (m.requests.size() == 1)
                keep[i] = price_single(m, *req_by_id.at(m.requests[0])) ? 1 : 0;
        }
        for (size_t i = 0; i < esv.size(); i++) {
            EsvMatching& m = esv[i];
            if (m.requests.size() == 2)
                keep[i] = price_pair(m, *req_by_id.at(m.requests[0]), *req_by_id.at(m.requests[1]),
                                     solo_matching, retro)
                              ? 1
                              : 0;
        }

        AssignmentProblem prob;
        prob.lost_demand_penalty = cfg.costs.lost_demand_penalty;
        for (size_t i = 0; i < esv.size(); i++) {
            if (!keep[i]) continue;
            AssignmentProblem::Matching am;
            am.id = esv[i].id;
            am.u = esv[i].u;
            am.requests = esv[i].requests;
            am.vehicles = esv[i].gammas;
            prob.matchings.push_back(std::move(am));
        }
        prob.finalize();
        AssignmentSolution sol = solve_assignment(prob);
        std::set<int> selected(sol.selected.begin(), sol.selected.end());
        dump_batch_debug(rv, esv, keep, prob, sol);

        std::map<RequestId, const EsvMatching*> offer_of;
        for (size_t i = 0; i < esv.size(); i++)
            if (keep[i] && selected.count(esv[i].id))
                for (RequestId rid : esv[i].requests) offer_of[rid] = &esv[i];

        struct Accepted {
            int ridx;
            const EsvMatching* m;
            Mode mode;
            bool done = false;
        };
        std::vector<Accepted> accepted;
        for (int idx : batch) {
            const Request& r = requests[static_cast<size_t>(idx)];
            RequestState& rs = states[static_cast<size_t>(idx)];
            auto it = offer_of.find(r.id);
            if (it == offer_of.end()) {
                rs.outcome = Outcome::Declined;
                rs.no_offer = true;
                continue;
            }
            const EsvMatching& m = *it->second;
            const size_t pos = m.requests[0] == r.id ? 0 : 1;
            const auto& q = m.quote.per_request[pos];
            quote_by_request[r.id] = q;
            log_quote(r, q,
                      pos < m.exclusives.size() && m.exclusives[pos].present() ? m.exclusives[pos].cost : 0.0,
                      m.shared.present() ? m.shared.cost : 0.0, outside_utility(r));
            const Mode chosen = sample_mode(r, q);
            if (chosen == Mode::Outside || (chosen == Mode::Exclusive && !q.has_exclusive) ||
                (chosen == Mode::Shared && !q.has_shared)) {
                rs.outcome = Outcome::Declined;
                continue;
            }
            accepted.push_back({idx, &m, chosen, false});
        }

        // overbooking resolution: first-come commitment with reassignment
        std::sort(accepted.begin(), accepted.end(), [&](const Accepted& a, const Accepted& b) {
            const Request& ra = requests[static_cast<size_t>(a.ridx)];
            const Request& rb = requests[static_cast<size_t>(b.ridx)];
            if (ra.request_time != rb.request_time) return ra.request_time < rb.request_time;
            return ra.id < rb.id;
        });
        // a vehicle claimed earlier in this resolution stays a candidate;
        // feasibility against its updated plan decides (capacity-2 pooling
        // keeps working, a busy exclusive vehicle prunes itself)
        auto commit_or_lose = [&](int ridx, Mode mode, VehicleId preferred) {
            const Request& r = requests[static_cast<size_t>(ridx)];
            RequestState& rs = states[static_cast<size_t>(ridx)];
            const auto& q = quote_by_request.at(r.id);
            const double fare = mode == Mode::Exclusive ? q.price_exclusive : q.price_shared;
            int best_v = -1;
            double best_key = 0.0;
            for (const auto& v : vehicles) {
                if (v.service_type != mode) continue;
                auto plan = feasible_vehicle_request(*cfg.net, cfg.costs.per_mile_cost, v, r, now);
                if (!plan) continue;
                const double key = v.id == preferred ? -1.0 : plan->added_cost;
                if (best_v < 0 || key < best_key - 1e-12 ||
                    (std::fabs(key - best_key) <= 1e-12 && v.id < vehicles[static_cast<size_t>(best_v)].id)) {
                    best_v = vehicle_index_map.at(v.id);
                    best_key = key;
                }
                if (v.id == preferred) break;
            }
            if (best_v < 0) {
                rs.outcome = Outcome::Lost;
                penalties += cfg.costs.lost_demand_penalty;
                day_pen[day_of(now)] += cfg.costs.lost_demand_penalty;
                return;
            }
            auto plan = feasible_vehicle_request(*cfg.net, cfg.costs.per_mile_cost,
                                                 vehicles[static_cast<size_t>(best_v)], r, now);
            commit_requests(best_v, *plan, {ridx}, {fare});
        };

        for (size_t i = 0; i < accepted.size(); i++) {
            Accepted& a = accepted[i];
            if (a.done) continue;
            a.done = true;
            const Request& r = requests[static_cast<size_t>(a.ridx)];
            bool pooled = false;
            if (a.mode == Mode::Shared && a.m->requests.size() == 2) {
                for (size_t j = i + 1; j < accepted.size() && !pooled; j++) {
                    Accepted& b = accepted[j];
                    if (b.done || b.m != a.m || b.mode != Mode::Shared) continue;
                    // re-validate the stored pooled route against the live state
                    const int v = vehicle_index_map.at(a.m->shared.vehicle);
                    const Request& other = requests[static_cast<size_t>(b.ridx)];
                    const bool a_first = a.m->requests[0] == r.id;
                    auto plan = feasible_vehicle_pair(*cfg.net, cfg.costs.per_mile_cost,
                                                      vehicles[static_cast<size_t>(v)],
                                                      a_first ? r : other, a_first ? other : r, now);
                    if (plan) {
                        const int first = a_first ? a.ridx : b.ridx;
                        const int second = a_first ? b.ridx : a.ridx;
                        commit_requests(
                            v, *plan, {first, second},
                            {quote_by_request.at(requests[static_cast<size_t>(first)].id).price_shared,
                             quote_by_request.at(requests[static_cast<size_t>(second)].id).price_shared});
                        b.done = true;
                        pooled = true;
                    }
                    break;
                }
            }
            if (!pooled)
                commit_or_lose(a.ridx, a.mode,
                               a.mode == Mode::Exclusive ? exclusive_slot_vehicle(*a.m, r.id)
                                                         : a.m->shared.vehicle);
        }
    }

    void dump_batch_debug(const RvGraph& rv, const std::vector<EsvMatching>& esv,
                          const std::vector<char>& keep, const AssignmentProblem& prob,
                          const AssignmentSolution& sol) {
        const bool fresh = !dumps_started;
        dumps_started = true;
        if (!cfg.dump_graphs_prefix.empty()) {
            std::ofstream rv_out(cfg.dump_graphs_prefix + "_rv.csv", fresh ? std::ios::trunc : std::ios::app);
            if (fresh) rv_out << "batch_time,kind,a,b\n";
            rv_out.precision(17);
            for (const auto& [a, b] : rv.request_edges) rv_out << now << ",rr," << a << ',' << b << "\n";
            for (const auto& e : rv.vehicle_edges) rv_out << now << ",rv," << e.request << ',' << e.vehicle << "\n";
            std::ofstream esv_out(cfg.dump_graphs_prefix + "_esv.csv",
                                  fresh ? std::ios::trunc : std::ios::app);
            if (fresh) esv_out << "batch_time,matching,requests,shared_vehicle,exclusive_vehicles,priced,u\n";
            esv_out.precision(17);
            for (size_t i = 0; i < esv.size(); i++) {
                const EsvMatching& m = esv[i];
                esv_out << now << ',' << m.id << ',';
                for (size_t k = 0; k < m.requests.size(); k++) esv_out << (k ? ";" : "") << m.requests[k];
                esv_out << ',' << (m.shared.present() ? m.shared.vehicle : -1) << ',';
                for (size_t k = 0; k < m.exclusives.size(); k++)
                    esv_out << (k ? ";" : "") << (m.exclusives[k].present() ? m.exclusives[k].vehicle : -1);
                esv_out << ',' << int(keep[i]) << ',' << m.u << "\n";
            }
        }
        if (!cfg.dump_ilp_prefix.empty()) {
            std::ofstream out(cfg.dump_ilp_prefix + "_ilp.jsonl", fresh ? std::ios::trunc : std::ios::app);
            nlohmann::ordered_json j;
            j["batch_time"] = now;
            j["lost_demand_penalty"] = prob.lost_demand_penalty;
            nlohmann::ordered_json ms = nlohmann::ordered_json::array();
            for (const auto& m : prob.matchings) {
                nlohmann::ordered_json mj;
                mj["id"] = m.id;
                mj["u"] = m.u;
                mj["requests"] = m.requests;
                nlohmann::ordered_json vs = nlohmann::ordered_json::array();
                for (const auto& [veh, g] : m.vehicles) vs.push_back({{"vehicle", veh}, {"gamma", g}});
                mj["vehicles"] = vs;
                ms.push_back(mj);
            }
            j["matchings"] = ms;
            j["selected"] = sol.selected;
            j["objective"] = sol.objective;
            nlohmann::ordered_json pens = nlohmann::ordered_json::object();
            for (const auto& [veh, w] : sol.penalties) pens[std::to_string(veh)] = w;
            j["penalties"] = pens;
            out << j.dump() << "\n";
        }
    }

    static VehicleId exclusive_slot_vehicle(const EsvMatching& m, RequestId rid) {
        const size_t pos = m.requests[0] == rid ? 0 : 1;
        return pos < m.exclusives.size() && m.exclusives[pos].present() ? m.exclusives[pos].vehicle : -1;
    }

    // ---- main loop -----------------------------------------------------------

    void handle_interval_tick() {
        const int interval = cfg.interval_of(now);
        for (int v = 0; v < static_cast<int>(vehicles.size()); v++) {
            advance_vehicle(v, now);
            auto& st = vehicles[static_cast<size_t>(v)];
            auto& ex = extra[static_cast<size_t>(v)];
            const NodeId node = ex.path.empty() ? st.loc : ex.path.front().node;
            auto& ts = sim.tick_stats_[static_cast<size_t>(cell_index(cfg.clusters.cluster_of(node), interval))];
            const bool idle = st.commitments.empty() && st.stops.empty();
            if (st.service_type == Mode::Exclusive) {
                ts.count_e += 1;
                if (idle) ts.idle_e += 1;
            } else {
                ts.count_s += 1;
                const int onboard = st.onboard_count();
                if (idle) ts.idle_s_empty += 1;
                if (onboard == 1) ts.s_one += 1;
                if (onboard >= 2) ts.s_two += 1;
            }
        }
        for (int c = 0; c < cfg.clusters.k; c++)
            sim.tick_stats_[static_cast<size_t>(cell_index(c, interval))].ticks++;
    }

    SimReport run() {
        choice_seed = Rng::stream_seed(cfg.seed, "choice");
        rebalance_on = cfg.rebalance_enabled(policy);
        if (!cfg.steady.empty()) rates = region_profit_rates(cfg.steady);

        Rng fleet_rng(cfg.seed, "fleet");
        const int total = cfg.n_exclusive + cfg.n_shared;
        vehicles.resize(static_cast<size_t>(total));
        extra.resize(static_cast<size_t>(total));
        for (int v = 0; v < total; v++) {
            auto& st = vehicles[static_cast<size_t>(v)];
            st.id = v;
            st.service_type = v < cfg.n_exclusive ? Mode::Exclusive : Mode::Shared;
            st.capacity = st.service_type == Mode::Exclusive ? 1 : 2;
            st.loc = cfg.net->id_of(
                static_cast<int>(fleet_rng.below(static_cast<std::uint64_t>(cfg.net->node_count()))));
            st.loc_time = 0.0;
            vehicle_index_map[st.id] = v;
            extra[static_cast<size_t>(v)].idle_since = 0.0;
            maybe_schedule_check(v, cfg.rebalance_idle_s);
        }

        const std::vector<DemandRow> demand = demand_for_day(cfg, sim.day_index_);
        requests.reserve(demand.size());
        states.assign(demand.size(), RequestState{});
        for (size_t i = 0; i < demand.size(); i++) {
            requests.push_back(make_request(*cfg.net, static_cast<int>(i), demand[i].origin, demand[i].dest,
                                            demand[i].time, cfg.max_wait_s, cfg.max_delay_s));
            push(demand[i].time, kArrival, static_cast<int>(i));
        }
        const int n_ticks = static_cast<int>(std::ceil(cfg.horizon_s / cfg.interval_length_s()));
        for (int k = 0; k < n_ticks; k++) push(k * cfg.interval_length_s(), kIntervalTick);
        if (policy_is_batched(policy)) push(cfg.batch_window_s, kBatchClose);

        const size_t cells = static_cast<size_t>(cfg.clusters.k) * static_cast<size_t>(cfg.intervals_per_day);
        sim.quote_stats_.assign(cells, {});
        sim.tick_stats_.assign(cells, {});

        while (!queue.empty()) {
            const Event e = queue.top();
            queue.pop();
            now = e.time;
            switch (e.prio) {
                case kIntervalTick: handle_interval_tick(); break;
                case kVehicleStop: handle_stop_event(e.a, e.b); break;
                case kArrival:
                    if (policy_is_batched(policy))
                        pending_batch.push_back(e.a);
                    else
                        handle_sequential(e.a);
                    break;
                case kBatchClose: handle_batch_close(); break;
                case kRebalanceCheck: handle_rebalance_check(e.a); break;
            }
        }
        // finish repositioning accrual at the horizon; drop unfinished legs
        for (int v = 0; v < total; v++) {
            advance_vehicle(v, cfg.horizon_s);
            if (vehicles[static_cast<size_t>(v)].commitments.empty()) extra[static_cast<size_t>(v)].path.clear();
            advance_vehicle(v, std::numeric_limits<double>::max());
        }
        return assemble_report();
    }

    SimReport assemble_report() {
        SimReport r;
        r.policy = policy_name(policy);
        r.requests_total = static_cast<long>(requests.size());
        double price_sum = 0, wait_sum = 0, delay_sum = 0;
        double price_sum_e = 0, price_sum_s = 0;
        std::map<long, DayStats> day_map;
        for (size_t i = 0; i < requests.size(); i++) {
            const RequestState& rs = states[i];
            auto& ds = day_map[day_of(requests[i].request_time)];
            ds.requests++;
            switch (rs.outcome) {
                case Outcome::Served:
                    r.served++;
                    ds.served++;
                    price_sum += rs.fare;
                    wait_sum += rs.wait;
                    delay_sum += rs.delay;
                    if (rs.mode == Mode::Exclusive) {
                        r.served_exclusive++;
                        price_sum_e += rs.fare;
                    } else {
                        r.served_shared++;
                        price_sum_s += rs.fare;
                    }
                    break;
                case Outcome::Lost:
                    r.lost++;
                    ds.lost++;
                    break;
                case Outcome::Declined:
                    r.declined++;
                    ds.declined++;
                    if (rs.no_offer) r.no_offer++;
                    break;
                default:
                    throw Error("request left unresolved at end of run");
            }
        }
        for (const auto& t : sim.trips_)
            if (t.shared_initiator && t.pooled) r.pooled_trips++;
        r.total_fares = fares;
        r.total_operational_cost = op_cost;
        r.total_penalties = penalties;
        r.total_profit = fares - op_cost - penalties;
        r.market_share = r.requests_total > 0 ? static_cast<double>(r.served) / r.requests_total : 0.0;
        r.mean_price = r.served > 0 ? price_sum / r.served : 0.0;
        r.mean_wait_s = r.served > 0 ? wait_sum / r.served : 0.0;
        r.mean_delay_s = r.served > 0 ? delay_sum / r.served : 0.0;
        r.mean_price_exclusive = r.served_exclusive > 0 ? price_sum_e / r.served_exclusive : 0.0;
        r.mean_price_shared = r.served_shared > 0 ? price_sum_s / r.served_shared : 0.0;
        r.mean_quoted_exclusive = quoted_e_n > 0 ? quoted_e_sum / quoted_e_n : 0.0;
        r.mean_static_exclusive = quoted_e_n > 0 ? static_e_sum / quoted_e_n : 0.0;
        for (auto& [day, ds] : day_map) {
            ds.fares = day_fares.count(day) ? day_fares[day] : 0.0;
            ds.profit = ds.fares - (day_op.count(day) ? day_op[day] : 0.0) -
                        (day_pen.count(day) ? day_pen[day] : 0.0);
            r.days.push_back(ds);
        }
        return r;
    }
};

Simulation::Simulation(const SimConfig& cfg, Policy policy) : cfg_(cfg), policy_(policy) {}

SimReport Simulation::run() {
    trips_.clear();
    SimRun run(*this, policy_);
    return run.run();
}

std::vector<std::pair<OdPair, double>> Simulation::shared_cost_samples() const {
    std::vector<std::pair<OdPair, double>> out;
    for (const auto& t : trips_)
        if (t.shared_initiator) out.emplace_back(t.od, t.realized_shared_cost);
    return out;
}

std::vector<SharedTripRecord> Simulation::shared_trip_records() const {
    std::vector<SharedTripRecord> out;
    for (const auto& t : trips_)
        if (t.shared_initiator) out.push_back({t.od, t.pooled, 0.0, 0.0});
    return out;
}

std::map<OdPair, double> Simulation::estimate_theta() const {
    std::map<OdPair, std::pair<long, long>> acc;
    for (const auto& t : trips_)
        if (t.shared_initiator) {
            auto& a = acc[t.od];
            a.second++;
            if (t.pooled) a.first++;
        }
    std::map<OdPair, double> theta;
    for (const auto& [od, mp] : acc)
        theta[od] = mp.second > 0 ? static_cast<double>(mp.first) / mp.second : 0.0;
    return theta;
}

SteadyStateModel Simulation::build_steady_state() const {
    const int K = cfg_.clusters.k;
    const int M = cfg_.intervals_per_day;
    SteadyStateModel m(K, M);

    double g_dur_e = 0, g_dur_s = 0;
    long g_trips_e = 0, g_trips_s = 0;
    double g_idle_e = 0, g_idle_s = 0;
    long g_ticks = 0;
    for (const auto& ts : tick_stats_) {
        g_dur_e += ts.trip_dur_e;
        g_trips_e += ts.trips_e;
        g_dur_s += ts.trip_dur_s;
        g_trips_s += ts.trips_s;
        g_idle_e += ts.idle_e;
        g_idle_s += ts.idle_s_empty;
        g_ticks += ts.ticks;
    }
    const double fallback_t_e = g_trips_e > 0 ? g_dur_e / g_trips_e : 600.0;
    const double fallback_t_s = g_trips_s > 0 ? g_dur_s / g_trips_s : 600.0;
    // ticks accumulate once per cluster per interval tick
    const double tick_count = K > 0 ? static_cast<double>(g_ticks) / K : 0.0;
    const double mean_idle_e = tick_count > 0 ? g_idle_e / tick_count : 0.0;
    const double mean_idle_s = tick_count > 0 ? g_idle_s / tick_count : 0.0;
    double coef_e = cfg_.wait_coef_exclusive;
    double coef_s = cfg_.wait_coef_shared;
    if (wait_n_e_ > 0 && mean_idle_e > 0) coef_e = (wait_sum_e_ / wait_n_e_) * std::sqrt(mean_idle_e);
    if (wait_n_s_ > 0 && mean_idle_s > 0) coef_s = (wait_sum_s_ / wait_n_s_) * std::sqrt(mean_idle_s);

    for (int c = 0; c < K; c++)
        for (int i = 0; i < M; i++) {
            const auto& ts = tick_stats_[static_cast<size_t>(c * M + i)];
            const auto& qs = quote_stats_[static_cast<size_t>(c * M + i)];
            SteadyCell& cell = m.cell(c, i);
            if (ts.ticks == 0) continue;
            const double n = static_cast<double>(ts.ticks);
            cell.vehicles_exclusive = ts.count_e / n;
            cell.vehicles_shared = ts.count_s / n;
            cell.open_exclusive = ts.idle_e / n;
            cell.open_shared = ts.idle_s_empty / n;
            cell.trip_time_exclusive = ts.trips_e > 0 ? ts.trip_dur_e / ts.trips_e : fallback_t_e;
            cell.trip_time_shared = ts.trips_s > 0 ? ts.trip_dur_s / ts.trips_s : fallback_t_s;
            cell.wait_coef_exclusive = coef_e;
            cell.wait_coef_shared = coef_s;
            const double n1 = ts.s_one / n, n2 = ts.s_two / n;
            cell.utilization_shared =
                cell.vehicles_shared > 0 && (n1 + n2) > 0 ? (n1 + 2 * n2) / cell.vehicles_shared : 1.0;
            // listed prices: average-profit maximizers on the cell's mean offer
            const double u_o = qs.n_o > 0 ? qs.u_outside / qs.n_o : 0.0;
            if (qs.n_e > 0 && qs.n_s > 0) {
                SpdInstance inst;
                inst.u_exclusive = cfg_.choice.beta_w * (qs.wait_e / qs.n_e) +
                                   cfg_.choice.beta_t * (qs.travel_e / qs.n_e) + cfg_.choice.asc_exclusive;
                inst.u_shared = cfg_.choice.beta_w * (qs.wait_s / qs.n_s) +
                                cfg_.choice.beta_t * (qs.travel_s / qs.n_s) + cfg_.choice.asc_shared;
                inst.u_outside = u_o;
                inst.cost_exclusive = qs.cost_e / qs.n_e;
                inst.cost_shared = qs.cost_s / qs.n_s;
                inst.beta_p = cfg_.choice.effective_beta_p();
                PriceQuote q = spd_optimal_prices(inst);
                if (!q.no_sale) {
                    cell.price_exclusive = q.price_exclusive;
                    cell.price_shared = q.price_shared;
                }
                cell.op_cost_exclusive = inst.cost_exclusive;
                cell.op_cost_shared = inst.cost_shared;
            } else if (qs.n_e > 0) {
                const double u = cfg_.choice.beta_w * (qs.wait_e / qs.n_e) +
                                 cfg_.choice.beta_t * (qs.travel_e / qs.n_e) + cfg_.choice.asc_exclusive;
                SingleProductQuote sq =
                    single_product_price(u, u_o, qs.cost_e / qs.n_e, cfg_.choice.effective_beta_p());
                cell.price_exclusive = sq.price;
                cell.op_cost_exclusive = qs.cost_e / qs.n_e;
            } else if (qs.n_s > 0) {
                const double u = cfg_.choice.beta_w * (qs.wait_s / qs.n_s) +
                                 cfg_.choice.beta_t * (qs.travel_s / qs.n_s) + cfg_.choice.asc_shared;
                SingleProductQuote sq =
                    single_product_price(u, u_o, qs.cost_s / qs.n_s, cfg_.choice.effective_beta_p());
                cell.price_shared = sq.price;
                cell.op_cost_shared = qs.cost_s / qs.n_s;
            }
        }
    return m;
}

SimReport run_simulation(const SimConfig& cfg, Policy policy) {
    Simulation sim(cfg, policy);
    return sim.run();
}

ConvergenceResult run_cost_convergence(const SimConfig& cfg, int n_days, Policy policy,
                                       bool identical_demand) {
    if (n_days < 2) throw ValidationError("cost convergence needs n_days >= 2");
    ConvergenceResult res;
    OdCostTable table = cfg.costs.od_expected_cost;
    for (int day = 0; day < n_days; day++) {
        Simulation sim(cfg, policy);
        sim.set_exogenous_choice(true);
        sim.set_day_index(identical_demand ? 0 : day);
        sim.set_learned_costs(table);
        sim.run();
        const double mad = table.update(sim.shared_cost_samples());
        if (day > 0) res.mad_series.push_back(mad);
        if (day == n_days - 1) {
            res.theta = sim.estimate_theta();
            res.steady = sim.build_steady_state();
        }
    }
    res.final_costs = std::move(table);
    return res;
}

MultiplierCalibration calibrate_price_multiplier(const SimConfig& cfg,
                                                 const std::vector<double>& candidates) {
    if (candidates.empty()) throw ValidationError("no multiplier candidates given");
    MultiplierCalibration out;
    double best_gap = std::numeric_limits<double>::infinity();
    for (double m : candidates) {
        SimConfig c = cfg;
        c.choice.price_multiplier = m;
        c.choice.validate();
        SimReport rep = run_simulation(c, Policy::Spd);
        MultiplierCalibration::Row row{m, rep.mean_quoted_exclusive, rep.mean_static_exclusive};
        out.rows.push_back(row);
        const double gap = std::fabs(row.mean_dynamic_price - row.mean_static_price);
        if (gap < best_gap - 1e-12) {
            best_gap = gap;
            out.chosen = m;
        }
    }
    return out;
}

SweepResult sweep_retrospective_multiplier(const SimConfig& cfg, const std::vector<double>& grid) {
    SweepResult out;
    double best_spd = -std::numeric_limits<double>::infinity();
    double best_bpd = -std::numeric_limits<double>::infinity();
    for (double m : grid) {
        SimConfig c = cfg;
        c.costs.retrospective_multiplier = m;
        c.costs.validate();
        const double spd = run_simulation(c, Policy::Spd).total_profit;
        const double bpd = run_simulation(c, Policy::Bpd).total_profit;
        out.rows.push_back({m, spd, bpd});
        if (spd > best_spd + 1e-12) {
            best_spd = spd;
            out.argmax_spd = m;
        }
        if (bpd > best_bpd + 1e-12) {
            best_bpd = bpd;
            out.argmax_bpd = m;
        }
    }
    return out;
}

std::string SimReport::to_json(int indent) const {
    nlohmann::ordered_json j;
    j["policy"] = policy;
    j["totals"] = {{"profit", total_profit},
                   {"fares", total_fares},
                   {"operational_cost", total_operational_cost},
                   {"penalties", total_penalties}};
    j["requests"] = {{"total", requests_total},
                     {"served", served},
                     {"lost", lost},
                     {"declined", declined},
                     {"no_offer", no_offer}};
    // market share counts every arriving request in the denominator
    j["market_share"] = market_share;
    j["means"] = {{"price", mean_price},
                  {"wait_s", mean_wait_s},
                  {"delay_s", mean_delay_s},
                  {"price_exclusive", mean_price_exclusive},
                  {"price_shared", mean_price_shared},
                  {"quoted_exclusive", mean_quoted_exclusive},
                  {"static_exclusive", mean_static_exclusive}};
    j["served_by_mode"] = {{"exclusive", served_exclusive},
                           {"shared", served_shared},
                           {"pooled_trips", pooled_trips}};
    nlohmann::ordered_json days_json = nlohmann::ordered_json::array();
    for (const auto& d : days)
        days_json.push_back({{"requests", d.requests},
                             {"served", d.served},
                             {"lost", d.lost},
                             {"declined", d.declined},
                             {"fares", d.fares},
                             {"profit", d.profit}});
    j["days"] = days_json;
    return indent >= 0 ? j.dump(indent) : j.dump();
}

}  // namespace modjoint
