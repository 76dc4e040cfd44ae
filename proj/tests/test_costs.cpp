#include "doctest.h"

#include <cmath>

#include "modjoint/costs.hpp"
#include "modjoint/rng.hpp"

using namespace modjoint;

TEST_CASE("expected shared operational cost") {
    CostModel m;
    m.c0 = 10.0;

    SUBCASE("no alpha row falls back to c0") {
        CHECK(expected_shared_operational_cost(m, {0, 1}) == doctest::Approx(10.0));
    }
    SUBCASE("single certain match") {
        m.alpha_table[{0, 1}] = {{1.0, 4.0, 6.0}};
        CHECK(expected_shared_operational_cost(m, {0, 1}) == doctest::Approx(-2.0));
    }
    SUBCASE("half match") {
        m.alpha_table[{0, 1}] = {{0.5, 4.0, 6.0}};
        CHECK(expected_shared_operational_cost(m, {0, 1}) == doctest::Approx(0.5 * 10.0 + 0.5 * (-2.0)));
    }
    SUBCASE("bounded between extremes") {
        Rng rng(3);
        for (int i = 0; i < 100; i++) {
            CostModel cm;
            cm.c0 = rng.uniform(0, 20);
            double asum = 0;
            std::vector<AlphaEntry> row;
            for (int k = 0; k < 3; k++) {
                const double a = rng.uniform(0, 0.3);
                asum += a;
                row.push_back({a, rng.uniform(0, 10), rng.uniform(0, 10)});
            }
            cm.alpha_table[{1, 2}] = row;
            REQUIRE(asum <= 1.0);
            double lo = cm.c0, hi = cm.c0;
            for (const auto& e : row) {
                lo = std::min(lo, e.marginal_cost - e.partner_price);
                hi = std::max(hi, e.marginal_cost - e.partner_price);
            }
            const double v = expected_shared_operational_cost(cm, {1, 2});
            CHECK(v >= lo - 1e-12);
            CHECK(v <= hi + 1e-12);
        }
    }
}

TEST_CASE("cost model validation") {
    CostModel m;
    m.retrospective_multiplier = 1.5;
    CHECK_THROWS_AS(m.validate(), ValidationError);
    m.retrospective_multiplier = 0.5;
    m.alpha_table[{0, 0}] = {{0.7, 1, 1}, {0.6, 1, 1}};
    CHECK_THROWS_AS(m.validate(), ValidationError);
}

TEST_CASE("throughput formulas") {
    SteadyCell cell;
    cell.vehicles_exclusive = 10;
    cell.open_exclusive = 4;
    cell.wait_coef_exclusive = 200.0;  // F(4) = 100
    cell.trip_time_exclusive = 300;
    CHECK(wait_time(cell.wait_coef_exclusive, 4.0) == doctest::Approx(100.0));
    CHECK(throughput_cell(cell, Mode::Exclusive) == doctest::Approx(6.0 / 400.0));

    cell.vehicles_shared = 10;
    cell.open_shared = 4;
    cell.wait_coef_shared = 200.0;
    cell.trip_time_shared = 300;
    cell.utilization_shared = 1.5;
    CHECK(throughput_cell(cell, Mode::Shared) == doctest::Approx(1.5 * 6.0 / 400.0));

    SUBCASE("all vehicles idle gives zero throughput") {
        cell.open_exclusive = 10;
        CHECK(throughput_cell(cell, Mode::Exclusive) == doctest::Approx(0.0));
    }
    SUBCASE("no open vehicles is an error") {
        cell.open_exclusive = 0;
        CHECK_THROWS_AS(throughput_cell(cell, Mode::Exclusive), CalibrationError);
    }
}

TEST_CASE("flow balance holds for calibrated cells") {
    // L = O + (F(O) + T) * Y / zeta-adjustment, by construction of Y
    Rng rng(77);
    for (int i = 0; i < 200; i++) {
        SteadyCell cell;
        cell.vehicles_exclusive = rng.uniform(1, 50);
        cell.open_exclusive = rng.uniform(0.1, cell.vehicles_exclusive);
        cell.wait_coef_exclusive = rng.uniform(10, 1000);
        cell.trip_time_exclusive = rng.uniform(60, 1200);
        cell.vehicles_shared = rng.uniform(1, 50);
        cell.open_shared = rng.uniform(0.1, cell.vehicles_shared);
        cell.wait_coef_shared = rng.uniform(10, 1000);
        cell.trip_time_shared = rng.uniform(60, 1200);
        cell.utilization_shared = rng.uniform(0.1, 2.0);

        const double ye = throughput_cell(cell, Mode::Exclusive);
        const double eta_e = wait_time(cell.wait_coef_exclusive, cell.open_exclusive);
        CHECK(cell.vehicles_exclusive ==
              doctest::Approx(cell.open_exclusive + eta_e * ye + cell.trip_time_exclusive * ye).epsilon(1e-9));

        const double ys = throughput_cell(cell, Mode::Shared);
        const double eta_s = wait_time(cell.wait_coef_shared, cell.open_shared);
        CHECK(cell.vehicles_shared ==
              doctest::Approx(cell.open_shared + (eta_s / cell.utilization_shared) * ys +
                              (cell.trip_time_shared / cell.utilization_shared) * ys)
                  .epsilon(1e-9));
        CHECK(ye >= 0.0);
        CHECK(ys >= 0.0);
    }
}

TEST_CASE("utilization from counts") {
    CHECK(utilization_from_counts(10, 0, 0, 10) == doctest::Approx(0.0));
    CHECK(utilization_from_counts(0, 10, 0, 10) == doctest::Approx(1.0));
    CHECK(utilization_from_counts(2, 5, 3, 10) == doctest::Approx(1.1));
    CHECK_THROWS_AS(utilization_from_counts(1, 1, 1, 0), CalibrationError);
}

TEST_CASE("solve_utilization balances the occupancy chain") {
    UtilizationInputs in;
    in.fleet_shared = 20;
    in.open_empty = 5;
    in.open_one = 2;
    in.wait_empty = 120;
    in.wait_one = 90;
    in.trip_time_first = 600;
    in.trip_time_second = 500;

    UtilizationModel u = solve_utilization(in);
    CHECK(u.n0 + u.n1 + u.n2 == doctest::Approx(in.fleet_shared).epsilon(1e-15));
    CHECK(u.n0 >= 0.0);
    CHECK(u.n1 >= 0.0);
    CHECK(u.n2 >= 0.0);
    // state definitions
    CHECK(u.n0 == doctest::Approx(in.open_empty + in.wait_empty * u.throughput_first).epsilon(1e-9));
    CHECK(u.n1 == doctest::Approx(in.open_one + in.wait_one * u.throughput_second +
                                  in.trip_time_first * u.throughput_first)
                      .epsilon(1e-9));
    CHECK(u.n2 == doctest::Approx(in.trip_time_second * u.throughput_second).epsilon(1e-6));
    // equal pickup rates (the P01 = P12 simplification)
    CHECK(u.p01 == doctest::Approx(u.p12).epsilon(1e-9));
    // detailed balance
    CHECK(u.n0 * u.p01 == doctest::Approx(u.n1 * u.p10).epsilon(1e-9));
    CHECK(u.n1 * u.p12 == doctest::Approx(u.n2 * u.p21).epsilon(1e-9));
    CHECK(u.zeta_s == doctest::Approx((u.n1 + 2 * u.n2) / in.fleet_shared));
    CHECK(u.zeta_s > 0.0);
    CHECK(u.zeta_s <= 2.0);
}

TEST_CASE("solve_utilization all idle") {
    UtilizationInputs in;
    in.fleet_shared = 8;
    in.open_empty = 8;
    in.open_one = 0;
    in.wait_empty = 100;
    in.wait_one = 100;
    in.trip_time_first = 500;
    in.trip_time_second = 400;
    UtilizationModel u = solve_utilization(in);
    CHECK(u.zeta_s == doctest::Approx(0.0));
    CHECK(u.throughput_first == doctest::Approx(0.0));
    CHECK(u.throughput_second == doctest::Approx(0.0));
}

TEST_CASE("solve_utilization infeasible inputs") {
    UtilizationInputs in;
    in.fleet_shared = 5;
    in.open_empty = 7;  // more open than the fleet
    in.open_one = 0;
    in.wait_empty = 100;
    in.wait_one = 100;
    in.trip_time_first = 500;
    in.trip_time_second = 400;
    CHECK_THROWS_AS(solve_utilization(in), CalibrationError);
    in.fleet_shared = 0;
    CHECK_THROWS_AS(solve_utilization(in), CalibrationError);
}

TEST_CASE("solve_utilization random feasible instances") {
    Rng rng(5150);
    int solved = 0;
    for (int i = 0; i < 200; i++) {
        UtilizationInputs in;
        in.fleet_shared = rng.uniform(5, 100);
        in.open_empty = rng.uniform(0.1, in.fleet_shared * 0.5);
        in.open_one = rng.uniform(0.0, in.fleet_shared * 0.2);
        in.wait_empty = rng.uniform(30, 300);
        in.wait_one = rng.uniform(30, 300);
        in.trip_time_first = rng.uniform(120, 1500);
        in.trip_time_second = rng.uniform(120, 1500);
        UtilizationModel u;
        try {
            u = solve_utilization(in);
        } catch (const CalibrationError&) {
            continue;
        }
        solved++;
        CHECK(u.n0 + u.n1 + u.n2 == doctest::Approx(in.fleet_shared).epsilon(1e-12));
        CHECK(u.n0 * u.p01 == doctest::Approx(u.n1 * u.p10).epsilon(1e-9));
        CHECK(u.n1 * u.p12 == doctest::Approx(u.n2 * u.p21).epsilon(1e-9));
        CHECK(u.zeta_s == doctest::Approx((u.n1 + 2 * u.n2) / in.fleet_shared));
    }
    CHECK(solved > 100);  // most random instances should be solvable
}

TEST_CASE("region profit rates") {
    SteadyStateModel m(2, 2);
    SteadyCell& cell = m.cell(0, 0);
    cell.vehicles_exclusive = 20;
    cell.open_exclusive = 16;
    cell.wait_coef_exclusive = 400.0;  // F(16) = 100
    cell.trip_time_exclusive = 300;    // Y = 4/400 = 0.01
    cell.price_exclusive = 12.0;
    cell.op_cost_exclusive = 2.0;  // margin 10
    RegionProfitRates r = region_profit_rates(m);
    CHECK(r.rate(0, 0, Mode::Exclusive) == doctest::Approx(0.01 * 10.0 / 20.0));
    // untouched cell: zero
    CHECK(r.rate(1, 1, Mode::Exclusive) == doctest::Approx(0.0));
    CHECK(r.rate(1, 1, Mode::Shared) == doctest::Approx(0.0));

    // negative margin clamps to zero
    SteadyStateModel m2(1, 1);
    m2.cell(0, 0) = cell;
    m2.cell(0, 0).op_cost_exclusive = 50.0;
    RegionProfitRates r2 = region_profit_rates(m2);
    CHECK(r2.rate(0, 0, Mode::Exclusive) == doctest::Approx(0.0));
}

TEST_CASE("retrospective cost") {
    RegionProfitRates r(2, 1);
    r.rate_ref(0, 0, Mode::Exclusive) = 0.005;
    r.rate_ref(1, 0, Mode::Exclusive) = 0.005;
    CHECK(retrospective_cost(r, Mode::Exclusive, 0, 1, 0, 600, 1200, 1.0) == doctest::Approx(3.0));
    CHECK(retrospective_cost(r, Mode::Exclusive, 0, 1, 0, 600, 1200, 0.0) == doctest::Approx(0.0));

    r.rate_ref(0, 0, Mode::Shared) = 0.004;
    r.rate_ref(1, 0, Mode::Shared) = 0.006;
    CHECK(retrospective_cost(r, Mode::Shared, 0, 1, 0, 0, 1000, 1.0) == doctest::Approx(-2.0));

    // linearity in the multiplier and in (t_r, t_r')
    Rng rng(8);
    for (int i = 0; i < 50; i++) {
        const double tr = rng.uniform(0, 2000), trp = rng.uniform(0, 2000), mult = rng.uniform(0, 1);
        const double base = retrospective_cost(r, Mode::Shared, 0, 1, 0, tr, trp, 1.0);
        CHECK(retrospective_cost(r, Mode::Shared, 0, 1, 0, tr, trp, mult) == doctest::Approx(mult * base));
        CHECK(retrospective_cost(r, Mode::Shared, 0, 1, 0, 2 * tr, 2 * trp, 1.0) ==
              doctest::Approx(2 * base));
    }
}

TEST_CASE("learned cost table updates") {
    OdCostTable t;
    SUBCASE("empty day leaves the table unchanged") {
        CHECK(t.update({}) == doctest::Approx(0.0));
        CHECK(t.value({0, 1}) == doctest::Approx(0.0));
    }
    SUBCASE("first observation moves a cell off zero") {
        const double mad = t.update({{{0, 1}, 8.0}});
        CHECK(mad == doctest::Approx(8.0));
        CHECK(t.value({0, 1}) == doctest::Approx(8.0));
        CHECK(t.samples({0, 1}) == 1);
    }
    SUBCASE("identical costs two days running reach a fixed point") {
        t.update({{{0, 1}, 8.0}, {{0, 1}, 8.0}});
        const double mad2 = t.update({{{0, 1}, 8.0}, {{0, 1}, 8.0}});
        CHECK(mad2 == doctest::Approx(0.0));
    }
    SUBCASE("running mean across days") {
        t.update({{{0, 1}, 6.0}});
        const double mad = t.update({{{0, 1}, 10.0}});
        CHECK(t.value({0, 1}) == doctest::Approx(8.0));
        CHECK(mad == doctest::Approx(2.0));
    }
    SUBCASE("mad averages only over cells touched today") {
        t.update({{{0, 1}, 4.0}, {{2, 3}, 10.0}});
        const double mad = t.update({{{0, 1}, 8.0}});  // cell mean 4 -> 6
        CHECK(mad == doctest::Approx(2.0));
        CHECK(t.value({2, 3}) == doctest::Approx(10.0));
    }
}

TEST_CASE("repeated identical sample days drive MAD to zero and keep it there") {
    OdCostTable t;
    std::vector<std::pair<OdPair, double>> day = {{{0, 1}, 5.0}, {{1, 0}, 3.0}, {{2, 2}, 7.5}};
    double prev = t.update(day);
    CHECK(prev > 0.0);
    for (int d = 0; d < 5; d++) {
        const double mad = t.update(day);
        CHECK(mad <= prev + 1e-15);
        prev = mad;
    }
    CHECK(prev == doctest::Approx(0.0));
}

TEST_CASE("cost table csv round trip") {
    OdCostTable t;
    t.update({{{0, 1}, 5.5}, {{3, 4}, -1.25}});
    t.save_csv("/tmp/mj_costs.csv");
    OdCostTable u = OdCostTable::load_csv("/tmp/mj_costs.csv");
    CHECK(u.value({0, 1}) == doctest::Approx(5.5));
    CHECK(u.value({3, 4}) == doctest::Approx(-1.25));
    CHECK(u.samples({0, 1}) == 1);
}

TEST_CASE("steady state csv round trip") {
    SteadyStateModel m(2, 3);
    m.cell(1, 2).vehicles_exclusive = 12.5;
    m.cell(1, 2).price_shared = 9.75;
    m.cell(0, 0).utilization_shared = 1.25;
    m.save_csv("/tmp/mj_steady.csv");
    SteadyStateModel l = SteadyStateModel::load_csv("/tmp/mj_steady.csv");
    CHECK(l.clusters() == 2);
    CHECK(l.intervals() == 3);
    CHECK(l.cell(1, 2).vehicles_exclusive == doctest::Approx(12.5));
    CHECK(l.cell(1, 2).price_shared == doctest::Approx(9.75));
    CHECK(l.cell(0, 0).utilization_shared == doctest::Approx(1.25));
}

TEST_CASE("alpha table estimation from records") {
    std::vector<SharedTripRecord> recs = {
        {{0, 1}, true, 3.0, 5.0},
        {{0, 1}, false, 0.0, 0.0},
        {{0, 1}, true, 5.0, 7.0},
        {{2, 2}, false, 0.0, 0.0},
    };
    auto table = estimate_alpha_table(recs, 10.0);
    REQUIRE(table.count({0, 1}) == 1);
    const AlphaEntry& e = table[{0, 1}][0];
    CHECK(e.alpha == doctest::Approx(2.0 / 3.0));
    CHECK(e.marginal_cost == doctest::Approx(4.0));
    CHECK(e.partner_price == doctest::Approx(6.0));
    CHECK(table[{2, 2}][0].alpha == doctest::Approx(0.0));
}
