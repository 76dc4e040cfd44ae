#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "modjoint/spd_pricing.hpp"
#include "modjoint/rng.hpp"

using namespace modjoint;

namespace {

// oracle: bisection on w * e^w = x over a bracketing interval
double lambert_bisect(double x) {
    double lo = 0.0, hi = 1.0;
    while (hi * std::exp(hi) < x) hi *= 2.0;
    for (int i = 0; i < 200; i++) {
        const double mid = 0.5 * (lo + hi);
        if (mid * std::exp(mid) < x)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// oracle: coarse grid over margins plus compass pattern search on Eq.-9
// profit; independent of the closed form
struct OracleResult {
    double pe = 0.0, ps = 0.0, profit = 0.0;
};

OracleResult grid_pattern_oracle(const SpdInstance& inst, int grid_n = 120) {
    auto value = [&](double pe, double ps) { return expected_profit_spd(inst, pe, ps); };
    // adaptive margin bracket: expand while the symmetric diagonal improves
    double unit = 1.0 / -inst.beta_p;
    double upper = 2.0 * unit;
    while (value(inst.cost_exclusive + upper, inst.cost_shared + upper) >
           value(inst.cost_exclusive + 0.5 * upper, inst.cost_shared + 0.5 * upper)) {
        upper *= 2.0;
        if (upper > 1e9) break;
    }
    OracleResult best;
    best.pe = inst.cost_exclusive;
    best.ps = inst.cost_shared;
    best.profit = value(best.pe, best.ps);
    for (int i = 0; i <= grid_n; i++)
        for (int j = 0; j <= grid_n; j++) {
            const double pe = inst.cost_exclusive + upper * i / grid_n;
            const double ps = inst.cost_shared + upper * j / grid_n;
            const double v = value(pe, ps);
            if (v > best.profit) {
                best = {pe, ps, v};
            }
        }
    // local refinement of the winning grid point
    double step = upper / grid_n;
    while (step > 1e-9) {
        bool moved = false;
        const double dirs[4][2] = {{step, 0}, {-step, 0}, {0, step}, {0, -step}};
        for (const auto& d : dirs) {
            const double v = value(best.pe + d[0], best.ps + d[1]);
            if (v > best.profit + 1e-16) {
                best = {best.pe + d[0], best.ps + d[1], v};
                moved = true;
            }
        }
        if (!moved) step *= 0.5;
    }
    return best;
}

}  // namespace

TEST_CASE("lambert w basics") {
    CHECK(lambert_w(0.0) == doctest::Approx(0.0));
    CHECK(std::fabs(lambert_w(std::exp(1.0)) - 1.0) <= 1e-12);
    CHECK(std::fabs(lambert_w(1.0) - 0.567143290410) <= 1e-10);
    CHECK(lambert_w(1.0) == doctest::Approx(lambert_bisect(1.0)).epsilon(1e-12));
    CHECK_THROWS_AS(lambert_w(-0.5), std::domain_error);
}

TEST_CASE("lambert w residual over a log-spaced sweep") {
    // x = 0 plus 10^-8 .. 10^8
    CHECK(std::fabs(lambert_w(0.0) * std::exp(lambert_w(0.0)) - 0.0) <= 1e-12);
    for (int k = -80; k <= 80; k++) {
        const double x = std::pow(10.0, k / 10.0);
        const double w = lambert_w(x);
        CHECK(std::fabs(w * std::exp(w) - x) <= 1e-12 * std::max(1.0, x));
    }
}

TEST_CASE("lambert w log-domain variant") {
    for (double lx : {-700.0, -10.0, 0.0, 5.0, 100.0, 700.0, 5000.0}) {
        const double w = lambert_w_exp(lx);
        // w + log w = lx must hold when w is large enough to matter
        if (w > 1e-300) CHECK(std::fabs(w + std::log(w) - lx) <= 1e-9 * std::max(1.0, std::fabs(lx)));
    }
    CHECK(lambert_w_exp(std::log(1.0)) == doctest::Approx(lambert_w(1.0)).epsilon(1e-12));
}

TEST_CASE("expected profit evaluations") {
    SpdInstance inst;
    inst.u_exclusive = -1;
    inst.u_shared = -0.5;
    inst.u_outside = -2;
    inst.cost_exclusive = 8;
    inst.cost_shared = 5;
    inst.beta_p = -0.1;
    CHECK(expected_profit_spd(inst, 8.0, 5.0) == doctest::Approx(0.0));
    CHECK(std::fabs(expected_profit_spd(inst, 1e6, 1e6)) <= 1e-6);

    // symmetric collapse: p_e = p_s = p gives (p - c) * P_mod
    SpdInstance sym;
    sym.u_exclusive = sym.u_shared = 0.3;
    sym.u_outside = -1.0;
    sym.cost_exclusive = sym.cost_shared = 4.0;
    sym.beta_p = -0.2;
    const double p = 9.0;
    const double e_mod = std::exp(sym.beta_p * p + 0.3);
    const double pmod = 2 * e_mod / (2 * e_mod + std::exp(-1.0));
    CHECK(expected_profit_spd(sym, p, p) == doctest::Approx((p - 4.0) * pmod).epsilon(1e-12));
}

TEST_CASE("symmetric services get equal prices") {
    SpdInstance inst;
    inst.u_exclusive = inst.u_shared = -0.7;
    inst.u_outside = -1.3;
    inst.cost_exclusive = inst.cost_shared = 6.0;
    inst.beta_p = -0.15;
    PriceQuote q = spd_optimal_prices(inst);
    CHECK(q.price_exclusive == doctest::Approx(q.price_shared).epsilon(1e-12));
    CHECK(q.expected_profit > 0.0);
}

TEST_CASE("worked instance: gap exact, value matches the grid oracle") {
    SpdInstance inst;
    inst.u_exclusive = -1;
    inst.u_shared = -1;
    inst.u_outside = -2;
    inst.cost_exclusive = 8;
    inst.cost_shared = 5;
    inst.beta_p = -0.1;
    PriceQuote q = spd_optimal_prices(inst);
    CHECK(q.price_exclusive - q.price_shared == doctest::Approx(3.0).epsilon(1e-12));
    OracleResult o = grid_pattern_oracle(inst);
    CHECK(std::fabs(q.price_exclusive - o.pe) <= 1e-4);
    CHECK(std::fabs(q.price_shared - o.ps) <= 1e-4);
    CHECK(q.expected_profit == doctest::Approx(o.profit).epsilon(1e-9));
}

TEST_CASE("degenerate instance reduces to 1 + W(2/e)") {
    SpdInstance inst;
    inst.u_exclusive = inst.u_shared = inst.u_outside = 0.0;
    inst.cost_exclusive = inst.cost_shared = 0.0;
    inst.beta_p = -1.0;

    // oracle: single-price reduction solved by bisection on p = 1 + 2 e^{-p}
    double lo = 0.0, hi = 4.0;
    for (int i = 0; i < 200; i++) {
        const double mid = 0.5 * (lo + hi);
        if (mid - 1.0 - 2.0 * std::exp(-mid) < 0)
            lo = mid;
        else
            hi = mid;
    }
    const double p_star = 0.5 * (lo + hi);
    const double w = lambert_bisect(2.0 / std::exp(1.0));
    CHECK(p_star == doctest::Approx(1.0 + w).epsilon(1e-10));

    PriceQuote q = spd_optimal_prices(inst);
    CHECK(q.price_exclusive == doctest::Approx(1.0 + w).epsilon(1e-10));
    CHECK(q.price_shared == doctest::Approx(1.0 + w).epsilon(1e-10));
    CHECK(q.expected_profit == doctest::Approx(w).epsilon(1e-10));
}

TEST_CASE("closed form beats the grid oracle on random instances") {
    Rng rng(2024);
    for (int i = 0; i < 200; i++) {
        SpdInstance inst;
        inst.u_exclusive = rng.uniform(-5, 1);
        inst.u_shared = rng.uniform(-5, 1);
        inst.u_outside = rng.uniform(-5, 1);
        inst.cost_exclusive = rng.uniform(0, 30);
        inst.cost_shared = rng.uniform(0, 30);
        inst.beta_p = rng.uniform(-0.5, -0.02);
        PriceQuote q = spd_optimal_prices(inst);
        OracleResult o = grid_pattern_oracle(inst, 60);
        CHECK(q.expected_profit >= o.profit - 1e-6);
        CHECK(std::fabs(q.price_exclusive - o.pe) <= 1e-3 * std::max(1.0, std::fabs(o.pe)));
        CHECK(std::fabs(q.price_shared - o.ps) <= 1e-3 * std::max(1.0, std::fabs(o.ps)));
        CHECK(q.price_exclusive - q.price_shared ==
              doctest::Approx(inst.cost_exclusive - inst.cost_shared).epsilon(1e-9));
    }
}

TEST_CASE("first-order conditions vanish at the critical point") {
    Rng rng(31);
    for (int i = 0; i < 50; i++) {
        SpdInstance inst;
        inst.u_exclusive = rng.uniform(-3, 1);
        inst.u_shared = rng.uniform(-3, 1);
        inst.u_outside = rng.uniform(-3, 1);
        inst.cost_exclusive = rng.uniform(0, 20);
        inst.cost_shared = rng.uniform(0, 20);
        inst.beta_p = rng.uniform(-0.4, -0.05);
        PriceQuote q = spd_optimal_prices(inst);
        const double h = 1e-5;
        const double de = (expected_profit_spd(inst, q.price_exclusive + h, q.price_shared) -
                           expected_profit_spd(inst, q.price_exclusive - h, q.price_shared)) /
                          (2 * h);
        const double ds = (expected_profit_spd(inst, q.price_exclusive, q.price_shared + h) -
                           expected_profit_spd(inst, q.price_exclusive, q.price_shared - h)) /
                          (2 * h);
        CHECK(std::fabs(de) <= 1e-8);
        CHECK(std::fabs(ds) <= 1e-8);
    }
}

TEST_CASE("single product price solves its first-order condition") {
    Rng rng(99);
    for (int i = 0; i < 100; i++) {
        const double u = rng.uniform(-3, 1);
        const double uo = rng.uniform(-3, 1);
        const double c = rng.uniform(0, 20);
        const double beta = rng.uniform(-0.4, -0.05);
        SingleProductQuote q = single_product_price(u, uo, c, beta);
        CHECK(q.expected_profit > 0.0);
        // numeric check: profit decreases on both sides
        auto profit = [&](double p) {
            const double t = beta * p + u;
            const double m = std::max(t, uo);
            const double prob = std::exp(t - m) / (std::exp(t - m) + std::exp(uo - m));
            return prob * (p - c);
        };
        CHECK(profit(q.price) >= profit(q.price + 1e-3) - 1e-12);
        CHECK(profit(q.price) >= profit(q.price - 1e-3) - 1e-12);
        CHECK(q.expected_profit == doctest::Approx(profit(q.price)).epsilon(1e-9));
    }
}

namespace {

RoadNetwork line_network() {
    RoadNetwork net;
    for (int i = 0; i < 6; i++) net.add_node(i, i * 500.0, 0.0);
    for (int i = 0; i + 1 < 6; i++) {
        net.add_edge(i, i + 1, 60.0, 500.0);
        net.add_edge(i + 1, i, 60.0, 500.0);
    }
    net.finalize();
    return net;
}

VehicleState idle_vehicle(VehicleId id, Mode mode, NodeId at) {
    VehicleState v;
    v.id = id;
    v.service_type = mode;
    v.capacity = mode == Mode::Exclusive ? 1 : 2;
    v.loc = at;
    v.loc_time = 0.0;
    return v;
}

QuoteEnv basic_env(const RoadNetwork& net) {
    QuoteEnv env;
    env.net = &net;
    env.choice.beta_p = -0.1;
    env.choice.beta_w = -0.005;
    env.choice.beta_t = -0.003;
    env.per_mile_cost = 1.0;
    env.u_outside = -3.0;
    env.shared_operational_cost = 1.5;
    return env;
}

}  // namespace

TEST_CASE("spd_handle_request with no vehicles is a no-offer") {
    RoadNetwork net = line_network();
    Request r = make_request(net, 0, 0, 3, 100.0, 300.0, 600.0);
    QuoteEnv env = basic_env(net);
    SpdDecision d = spd_handle_request(r, {}, env, 100.0);
    CHECK(d.no_offer);
}

TEST_CASE("spd_handle_request single-type menus") {
    RoadNetwork net = line_network();
    Request r = make_request(net, 0, 0, 3, 100.0, 300.0, 600.0);
    QuoteEnv env = basic_env(net);
    std::vector<VehicleState> fleet = {idle_vehicle(1, Mode::Exclusive, 1)};
    SpdDecision d = spd_handle_request(r, fleet, env, 100.0);
    CHECK_FALSE(d.no_offer);
    CHECK(d.offer_exclusive);
    CHECK_FALSE(d.offer_shared);
    CHECK(d.vehicle_exclusive == 1);
    CHECK(d.quote.probabilities.p_shared == doctest::Approx(0.0));
    CHECK(d.quote.expected_profit > 0.0);
}

TEST_CASE("spd_handle_request picks the cheaper vehicle of each type") {
    RoadNetwork net = line_network();
    Request r = make_request(net, 0, 2, 5, 0.0, 300.0, 600.0);
    QuoteEnv env = basic_env(net);
    std::vector<VehicleState> fleet = {
        idle_vehicle(0, Mode::Exclusive, 0),  // 2 hops from origin
        idle_vehicle(1, Mode::Exclusive, 2),  // at origin
        idle_vehicle(2, Mode::Shared, 1),     // 1 hop away
        idle_vehicle(3, Mode::Shared, 4),     // 2 hops away
    };
    SpdDecision d = spd_handle_request(r, fleet, env, 0.0);
    REQUIRE(d.offer_exclusive);
    REQUIRE(d.offer_shared);

    // oracle: enumerate all vehicles, track the cheapest insertion per type
    double best_e = 1e18, best_s = 1e18;
    VehicleId arg_e = -1, arg_s = -1;
    for (const auto& v : fleet) {
        auto plan = feasible_vehicle_request(net, env.per_mile_cost, v, r, 0.0);
        if (!plan) continue;
        if (v.service_type == Mode::Exclusive && plan->added_cost < best_e) {
            best_e = plan->added_cost;
            arg_e = v.id;
        }
        if (v.service_type == Mode::Shared && plan->added_cost < best_s) {
            best_s = plan->added_cost;
            arg_s = v.id;
        }
    }
    CHECK(d.vehicle_exclusive == arg_e);
    CHECK(d.vehicle_shared == arg_s);
    CHECK(d.vehicle_exclusive == 1);
    CHECK(d.vehicle_shared == 2);
}

TEST_CASE("price floor keeps quotes self-consistent") {
    RoadNetwork net = line_network();
    Request r = make_request(net, 0, 0, 3, 100.0, 300.0, 600.0);
    QuoteEnv env = basic_env(net);
    env.price_floor = 50.0;  // far above the unconstrained optimum
    std::vector<VehicleState> fleet = {idle_vehicle(1, Mode::Exclusive, 0),
                                       idle_vehicle(2, Mode::Shared, 1)};
    SpdDecision d = spd_handle_request(r, fleet, env, 100.0);
    REQUIRE_FALSE(d.no_offer);
    CHECK(d.quote.price_exclusive >= 50.0);
    CHECK(d.quote.price_shared >= 50.0);
    // quoted probabilities match the choice model at the floored prices
    SpdInstance inst;
    inst.u_exclusive = assignment_utility(env.choice, d.offer_e);
    inst.u_shared = assignment_utility(env.choice, d.offer_s);
    inst.u_outside = env.u_outside;
    inst.beta_p = env.choice.effective_beta_p();
    auto probs = choice_probabilities(inst.beta_p * d.quote.price_exclusive + inst.u_exclusive,
                                      inst.beta_p * d.quote.price_shared + inst.u_shared, inst.u_outside);
    CHECK(d.quote.probabilities.p_exclusive == doctest::Approx(probs.p_exclusive).epsilon(1e-12));
    CHECK(d.quote.probabilities.p_shared == doctest::Approx(probs.p_shared).epsilon(1e-12));
}
