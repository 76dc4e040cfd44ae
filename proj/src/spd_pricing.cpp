#include "modjoint/spd_pricing.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace modjoint {

namespace {

// One Halley step target: f(w) = w e^w - x.
double halley_refine(double w, double x) {
    for (int i = 0; i < 64; i++) {
        const double ew = std::exp(w);
        const double f = w * ew - x;
        if (std::fabs(f) <= 1e-14 * std::max(1.0, std::fabs(x))) break;
        const double fp = ew * (w + 1.0);
        const double fpp = ew * (w + 2.0);
        const double denom = fp - 0.5 * f * fpp / fp;
        const double step = f / denom;
        w -= step;
        if (std::fabs(step) <= 1e-16 * std::max(1.0, std::fabs(w))) break;
    }
    return w;
}

}  // namespace

namespace {

// Newton on w + log(w) = log_x; stable when exp-domain terms would overflow.
double log_domain_w(double log_x) {
    double w = log_x - std::log(log_x);
    for (int i = 0; i < 64; i++) {
        const double g = w + std::log(w) - log_x;
        const double step = g * w / (w + 1.0);
        w -= step;
        if (std::fabs(step) <= 1e-16 * std::max(1.0, w)) break;
    }
    return w;
}

}  // namespace

double lambert_w(double x) {
    if (x < 0.0) throw std::domain_error("lambert_w: negative argument");
    if (x == 0.0) return 0.0;
    if (std::log(x) > 350.0) return log_domain_w(std::log(x));  // Halley terms would overflow
    double w;
    if (x < 1.0) {
        // series-flavored start, fine for Halley
        w = x * (1.0 - x);
    } else {
        const double l = std::log(x);
        w = l > 1.0 ? l - std::log(l) : l;
        if (w <= 0.0) w = 0.5;
    }
    return halley_refine(w, x);
}

double lambert_w_exp(double log_x) {
    if (std::isinf(log_x) && log_x < 0.0) return 0.0;
    if (log_x <= 350.0) return lambert_w(std::exp(log_x));
    return log_domain_w(log_x);
}

void SpdInstance::validate() const {
    if (!(beta_p < 0.0)) throw ValidationError("beta_p must be negative");
    if (!std::isfinite(u_exclusive) || !std::isfinite(u_shared) || !std::isfinite(u_outside) ||
        !std::isfinite(cost_exclusive) || !std::isfinite(cost_shared))
        throw ValidationError("SpdInstance fields must be finite");
}

double expected_profit_spd(const SpdInstance& inst, double price_exclusive, double price_shared) {
    const double te = inst.beta_p * price_exclusive + inst.u_exclusive;
    const double ts = inst.beta_p * price_shared + inst.u_shared;
    const double to = inst.u_outside;
    const double m = std::max(te, std::max(ts, to));
    const double ee = std::exp(te - m);
    const double es = std::exp(ts - m);
    const double eo = std::exp(to - m);
    return (ee * (price_exclusive - inst.cost_exclusive) + es * (price_shared - inst.cost_shared)) /
           (ee + es + eo);
}

PriceQuote spd_optimal_prices(const SpdInstance& inst) {
    inst.validate();
    const double b = inst.beta_p;
    // A = 1 + exp(U_s - U_e + beta (c_s - c_e)); the W argument is
    // A * exp(U_e + beta c_e - 1) / exp(U_o), handled in log space.
    const double gap_exp = inst.u_shared - inst.u_exclusive + b * (inst.cost_shared - inst.cost_exclusive);
    double log_a;
    if (gap_exp > 36.0) {
        log_a = gap_exp;  // 1 + e^g ~ e^g
    } else {
        log_a = std::log1p(std::exp(gap_exp));
    }
    const double log_warg = log_a + inst.u_exclusive + b * inst.cost_exclusive - 1.0 - inst.u_outside;
    const double w = lambert_w_exp(log_warg);

    PriceQuote q;
    q.price_exclusive = (inst.u_outside + std::log(w) - log_a - inst.u_exclusive) / b;
    q.price_shared = q.price_exclusive - (inst.cost_exclusive - inst.cost_shared);
    q.expected_profit = expected_profit_spd(inst, q.price_exclusive, q.price_shared);
    q.probabilities = choice_probabilities(b * q.price_exclusive + inst.u_exclusive,
                                           b * q.price_shared + inst.u_shared, inst.u_outside);
    if (!(q.expected_profit >= 0.0)) {
        q.no_sale = true;
        q.expected_profit = 0.0;
        q.price_exclusive = q.price_shared = std::numeric_limits<double>::infinity();
        q.probabilities = {0.0, 0.0, 1.0};
    }
    return q;
}

SingleProductQuote single_product_price(double u_assign, double u_outside, double cost, double beta_p) {
    if (!(beta_p < 0.0)) throw ValidationError("beta_p must be negative");
    // FOC of the transformed (probability-space) objective:
    // h(P) = log(P / (1 - P)) + u_o - u - beta c + 1 / (1 - P), increasing in P.
    auto foc = [&](double p) {
        return std::log(p / (1.0 - p)) + u_outside - u_assign - beta_p * cost + 1.0 / (1.0 - p);
    };
    double lo = 1e-300, hi = 1.0 - 1e-16;
    // h(lo) is -inf-ish, h(hi) +inf-ish; bisection on the sign change
    for (int i = 0; i < 200; i++) {
        const double mid = 0.5 * (lo + hi);
        if (foc(mid) > 0.0)
            hi = mid;
        else
            lo = mid;
    }
    const double p = 0.5 * (lo + hi);
    SingleProductQuote q;
    q.probability = p;
    q.price = (std::log(p / (1.0 - p)) + u_outside - u_assign) / beta_p;
    // the no-sale limit bounds the optimum below by zero; when the optimal
    // acceptance probability underflows the bisection floor, the product
    // p * margin can round to a negative denormal
    q.expected_profit = std::max(0.0, p * (q.price - cost));
    return q;
}

SpdDecision spd_handle_request(const Request& r, const std::vector<VehicleState>& vehicles,
                               const QuoteEnv& env, double now) {
    SpdDecision d;
    const RoadNetwork& net = *env.net;
    auto to_origin = net.sssp_to(r.origin);

    const VehicleState* best_e = nullptr;
    const VehicleState* best_s = nullptr;
    std::optional<InsertionPlan> plan_e, plan_s;
    double cost_e = 0.0, cost_s = 0.0;

    for (const auto& v : vehicles) {
        const double reach = to_origin->seconds[static_cast<size_t>(net.index_of(v.loc))];
        if (!(std::max(v.loc_time, now) + reach <= r.latest_pickup() + 1e-9)) continue;
        auto plan = feasible_vehicle_request(net, env.per_mile_cost, v, r, now);
        if (!plan) continue;
        double extra = env.extra_cost ? env.extra_cost(v.service_type, r.origin, r.dest, plan->added_seconds) : 0.0;
        const double cost = plan->added_cost + extra;
        if (v.service_type == Mode::Exclusive) {
            if (!best_e || cost < cost_e - 1e-12 || (std::fabs(cost - cost_e) <= 1e-12 && v.id < best_e->id)) {
                best_e = &v;
                cost_e = cost;
                plan_e = std::move(plan);
            }
        } else {
            if (!best_s || cost < cost_s - 1e-12 || (std::fabs(cost - cost_s) <= 1e-12 && v.id < best_s->id)) {
                best_s = &v;
                cost_s = cost;
                plan_s = std::move(plan);
            }
        }
    }

    if (!best_e && !best_s) {
        d.no_offer = true;
        return d;
    }

    const double beta = env.choice.effective_beta_p();
    if (best_e) {
        d.offer_exclusive = true;
        d.vehicle_exclusive = best_e->id;
        d.plan_exclusive = *plan_e;
        d.offer_e.wait = plan_e->pickup_time - r.request_time;
        d.offer_e.travel = plan_e->dropoff_time - plan_e->pickup_time;
        d.cost_exclusive = cost_e;
    }
    if (best_s) {
        d.offer_shared = true;
        d.vehicle_shared = best_s->id;
        d.plan_shared = *plan_s;
        d.offer_s.wait = plan_s->pickup_time - r.request_time;
        d.offer_s.travel = plan_s->dropoff_time - plan_s->pickup_time;
        // quoted shared cost: learned O-D expectation plus the decision-time
        // extra; the per-vehicle insertion cost only drives vehicle choice
        double extra = env.extra_cost ? env.extra_cost(Mode::Shared, r.origin, r.dest, plan_s->added_seconds) : 0.0;
        d.cost_shared = env.shared_operational_cost + extra;
    }

    auto apply_floor = [&](double p) { return env.price_floor ? std::max(*env.price_floor, p) : p; };

    if (best_e && best_s) {
        SpdInstance inst;
        inst.u_exclusive = assignment_utility(env.choice, d.offer_e) + env.choice.asc_exclusive;
        inst.u_shared = assignment_utility(env.choice, d.offer_s) + env.choice.asc_shared;
        inst.u_outside = env.u_outside;
        inst.cost_exclusive = d.cost_exclusive;
        inst.cost_shared = d.cost_shared;
        inst.beta_p = beta;
        d.quote = spd_optimal_prices(inst);
        if (!d.quote.no_sale && env.price_floor) {
            d.quote.price_exclusive = apply_floor(d.quote.price_exclusive);
            d.quote.price_shared = apply_floor(d.quote.price_shared);
            d.quote.expected_profit = expected_profit_spd(inst, d.quote.price_exclusive, d.quote.price_shared);
            d.quote.probabilities = choice_probabilities(beta * d.quote.price_exclusive + inst.u_exclusive,
                                                         beta * d.quote.price_shared + inst.u_shared,
                                                         inst.u_outside);
        }
    } else {
        const bool exclusive_only = best_e != nullptr;
        const double u = exclusive_only ? assignment_utility(env.choice, d.offer_e) + env.choice.asc_exclusive
                                        : assignment_utility(env.choice, d.offer_s) + env.choice.asc_shared;
        const double c = exclusive_only ? d.cost_exclusive : d.cost_shared;
        SingleProductQuote sq = single_product_price(u, env.u_outside, c, beta);
        double price = apply_floor(sq.price);
        const double ut = beta * price + u;
        const double m = std::max(ut, env.u_outside);
        const double prob = std::exp(ut - m) / (std::exp(ut - m) + std::exp(env.u_outside - m));
        d.quote.expected_profit = prob * (price - c);
        if (exclusive_only) {
            d.quote.price_exclusive = price;
            d.quote.probabilities = {prob, 0.0, 1.0 - prob};
        } else {
            d.quote.price_shared = price;
            d.quote.probabilities = {0.0, prob, 1.0 - prob};
        }
        if (!(d.quote.expected_profit >= 0.0)) {
            d.quote.no_sale = true;
            d.quote.expected_profit = 0.0;
        }
    }
    return d;
}

}  // namespace modjoint
