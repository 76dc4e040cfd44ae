// Python bindings for the main pricing, matching-selection, and simulation
// operations. Heavier plumbing (networks, fleets) stays behind the config
// file: run_simulation takes a config path and returns the JSON report.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "modjoint/assignment.hpp"
#include "modjoint/bpd_pricing.hpp"
#include "modjoint/choice.hpp"
#include "modjoint/config.hpp"
#include "modjoint/costs.hpp"
#include "modjoint/simulator.hpp"
#include "modjoint/spd_pricing.hpp"
#include "modjoint/static_pricing.hpp"

namespace py = pybind11;
using namespace modjoint;

namespace {

SpdInstance make_spd(double ue, double us, double uo, double ce, double cs, double beta_p) {
    return SpdInstance{ue, us, uo, ce, cs, beta_p};
}

BatchPricingInstance make_batch(double c1e, double c1s, double c2e, double c2s, double css, double d1e,
                                double d1s, double d2e, double d2s, double uo1, double uo2, double beta_p) {
    BatchPricingInstance inst;
    inst.r1 = {c1s, c1e, d1s, d1e, uo1, true, true};
    inst.r2 = {c2s, c2e, d2s, d2e, uo2, true, true};
    inst.cost_pooled = css;
    inst.beta_p = beta_p;
    return inst;
}

py::dict quote_dict(const PriceQuote& q) {
    py::dict d;
    d["no_sale"] = q.no_sale;
    d["price_exclusive"] = q.price_exclusive;
    d["price_shared"] = q.price_shared;
    d["expected_profit"] = q.expected_profit;
    d["prob_exclusive"] = q.probabilities.p_exclusive;
    d["prob_shared"] = q.probabilities.p_shared;
    d["prob_outside"] = q.probabilities.p_outside;
    return d;
}

py::dict batch_quote_dict(const BatchQuote& q) {
    py::dict d;
    d["prices"] = q.prices;          // order: p_1s, p_1e, p_2s, p_2e
    d["probabilities"] = q.probabilities;
    d["expected_profit"] = q.expected_profit;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Joint vehicle dispatching and pricing for mixed exclusive/shared fleets";
    m.attr("__version__") = "0.1.0";

    m.def("lambert_w", &lambert_w, py::arg("x"), "Principal-branch Lambert W for x >= 0");

    m.def("choice_probabilities",
          [](double ue, double us, double uo) {
              auto p = choice_probabilities(ue, us, uo);
              return py::make_tuple(p.p_exclusive, p.p_shared, p.p_outside);
          },
          py::arg("u_exclusive"), py::arg("u_shared"), py::arg("u_outside"),
          "Multinomial-logit probabilities over (exclusive, shared, outside)");

    m.def("spd_optimal_prices",
          [](double ue, double us, double uo, double ce, double cs, double beta_p) {
              return quote_dict(spd_optimal_prices(make_spd(ue, us, uo, ce, cs, beta_p)));
          },
          py::arg("u_exclusive"), py::arg("u_shared"), py::arg("u_outside"), py::arg("cost_exclusive"),
          py::arg("cost_shared"), py::arg("beta_p"),
          "Closed-form two-product menu; the price gap equals the cost gap");

    m.def("expected_profit_spd",
          [](double ue, double us, double uo, double ce, double cs, double beta_p, double pe, double ps) {
              return expected_profit_spd(make_spd(ue, us, uo, ce, cs, beta_p), pe, ps);
          },
          py::arg("u_exclusive"), py::arg("u_shared"), py::arg("u_outside"), py::arg("cost_exclusive"),
          py::arg("cost_shared"), py::arg("beta_p"), py::arg("price_exclusive"), py::arg("price_shared"));

    m.def("optimize_batch_prices",
          [](double c1e, double c1s, double c2e, double c2s, double css, double d1e, double d1s, double d2e,
             double d2s, double uo1, double uo2, double beta_p) {
              return batch_quote_dict(
                  optimize_batch_prices(make_batch(c1e, c1s, c2e, c2s, css, d1e, d1s, d2e, d2s, uo1, uo2, beta_p)));
          },
          py::arg("c1e"), py::arg("c1s"), py::arg("c2e"), py::arg("c2s"), py::arg("css"), py::arg("d1e") = 0.0,
          py::arg("d1s") = 0.0, py::arg("d2e") = 0.0, py::arg("d2s") = 0.0, py::arg("uo1") = 0.0,
          py::arg("uo2") = 0.0, py::arg("beta_p") = -0.1);

    m.def("brute_force_batch",
          [](double c1e, double c1s, double c2e, double c2s, double css, double d1e, double d1s, double d2e,
             double d2s, double uo1, double uo2, double beta_p, double step) {
              return batch_quote_dict(brute_force_batch(
                  make_batch(c1e, c1s, c2e, c2s, css, d1e, d1s, d2e, d2s, uo1, uo2, beta_p), step));
          },
          py::arg("c1e"), py::arg("c1s"), py::arg("c2e"), py::arg("c2s"), py::arg("css"), py::arg("d1e") = 0.0,
          py::arg("d1s") = 0.0, py::arg("d2e") = 0.0, py::arg("d2s") = 0.0, py::arg("uo1") = 0.0,
          py::arg("uo2") = 0.0, py::arg("beta_p") = -0.1, py::arg("step") = 0.01);

    m.def("concavity_certificate",
          [](double c1e, double c2e, double beta_p) {
              BatchPricingInstance inst;
              inst.r1.cost_exclusive = c1e;
              inst.r2.cost_exclusive = c2e;
              inst.beta_p = beta_p;
              return concavity_certificate(inst);
          },
          py::arg("c1e"), py::arg("c2e"), py::arg("beta_p"));

    m.def("solve_assignment",
          [](const std::vector<py::dict>& matchings, double lost_demand_penalty) {
              AssignmentProblem prob;
              prob.lost_demand_penalty = lost_demand_penalty;
              for (const auto& d : matchings) {
                  AssignmentProblem::Matching am;
                  am.id = d["id"].cast<int>();
                  am.u = d["u"].cast<double>();
                  am.requests = d["requests"].cast<std::vector<int>>();
                  am.vehicles = d["vehicles"].cast<std::vector<std::pair<int, double>>>();
                  prob.matchings.push_back(std::move(am));
              }
              prob.finalize();
              AssignmentSolution sol = solve_assignment(prob);
              py::dict out;
              out["selected"] = sol.selected;
              out["objective"] = sol.objective;
              out["penalties"] = sol.penalties;
              return out;
          },
          py::arg("matchings"), py::arg("lost_demand_penalty") = 0.0,
          "Exact matching selection with overbooking penalties; matchings are "
          "dicts with id, u, requests, vehicles=[(vehicle, gamma), ...]");

    m.def("static_price",
          [](double travel_seconds, double distance_miles, double f_min, double f_base, double f_t,
             double f_d) {
              StaticPricingParams p;
              p.min_fare = f_min;
              p.base_fare = f_base;
              p.time_rate = f_t;
              p.distance_rate = f_d;
              return static_price(p, travel_seconds, distance_miles);
          },
          py::arg("travel_seconds"), py::arg("distance_miles"), py::arg("f_min") = 5.0,
          py::arg("f_base") = 2.0, py::arg("f_t") = 0.35 / 60.0, py::arg("f_d") = 1.75);

    m.def("solve_utilization",
          [](double fleet_shared, double open_empty, double open_one, double wait_empty, double wait_one,
             double trip_time_first, double trip_time_second) {
              UtilizationModel u = solve_utilization(
                  {fleet_shared, open_empty, open_one, wait_empty, wait_one, trip_time_first, trip_time_second});
              py::dict d;
              d["n0"] = u.n0;
              d["n1"] = u.n1;
              d["n2"] = u.n2;
              d["zeta_s"] = u.zeta_s;
              d["throughput_first"] = u.throughput_first;
              d["throughput_second"] = u.throughput_second;
              return d;
          },
          py::arg("fleet_shared"), py::arg("open_empty"), py::arg("open_one"), py::arg("wait_empty"),
          py::arg("wait_one"), py::arg("trip_time_first"), py::arg("trip_time_second"));

    m.def("run_simulation",
          [](const std::string& config_path, const std::string& policy, long seed) {
              SimConfig cfg = SimConfig::load(config_path);
              if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
              return run_simulation(cfg, policy_from_string(policy)).to_json();
          },
          py::arg("config_path"), py::arg("policy") = "spd", py::arg("seed") = -1,
          "Run one simulated day and return the JSON report as a string");

    m.def("run_cost_convergence",
          [](const std::string& config_path, int days, const std::string& policy, bool identical) {
              SimConfig cfg = SimConfig::load(config_path);
              return run_cost_convergence(cfg, days, policy_from_string(policy), identical).mad_series;
          },
          py::arg("config_path"), py::arg("days") = 7, py::arg("policy") = "spd",
          py::arg("identical_demand") = false, "Daily cost-learning loop; returns the MAD series");
}
