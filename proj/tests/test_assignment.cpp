#include "doctest.h"

#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "modjoint/assignment.hpp"
#include "modjoint/rng.hpp"

using namespace modjoint;

namespace {

AssignmentProblem random_problem(Rng& rng, int max_matchings = 12) {
    AssignmentProblem p;
    p.lost_demand_penalty = rng.uniform(0, 10);
    const int n_requests = 2 + static_cast<int>(rng.below(6));
    const int n_vehicles = 2 + static_cast<int>(rng.below(5));
    const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_matchings)));
    for (int i = 0; i < n; i++) {
        AssignmentProblem::Matching m;
        m.id = i;
        m.u = rng.uniform(-4, 12);
        m.requests.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n_requests))));
        if (rng.below(3) == 0) {
            int second = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_requests)));
            if (second != m.requests[0]) m.requests.push_back(second);
        }
        const int slots = 1 + static_cast<int>(rng.below(3));
        for (int s = 0; s < slots; s++)
            m.vehicles.emplace_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n_vehicles))),
                                    rng.uniform(0, 1));
        p.matchings.push_back(std::move(m));
    }
    p.finalize();
    return p;
}

}  // namespace

TEST_CASE("single matching below capacity has no penalty") {
    AssignmentProblem p;
    p.lost_demand_penalty = 2.0;
    p.matchings.push_back({0, 5.0, {1}, {{7, 0.6}}});
    p.finalize();
    AssignmentSolution s = solve_assignment(p);
    CHECK(s.selected == std::vector<int>{0});
    CHECK(s.objective == doctest::Approx(5.0));
    CHECK(s.penalties.empty());
}

TEST_CASE("negative-value matching is left unselected") {
    AssignmentProblem p;
    p.matchings.push_back({0, -1.0, {1}, {{7, 0.5}}});
    p.finalize();
    AssignmentSolution s = solve_assignment(p);
    CHECK(s.selected.empty());
    CHECK(s.objective == doctest::Approx(0.0));
}

TEST_CASE("overbooking penalty forces a choice between conflicting matchings") {
    // two matchings on one vehicle, gamma = 1 each; selecting both costs
    // (c_p + eps) * (2 - 1) = 12 > the 5 gained from the second one
    AssignmentProblem p;
    p.lost_demand_penalty = 7.0;  // eps_j = mean u = 5 -> c_p + eps = 12
    p.matchings.push_back({0, 5.0, {1}, {{9, 1.0}}});
    p.matchings.push_back({1, 5.0, {2}, {{9, 1.0}}});
    p.finalize();
    CHECK(p.vehicle_mean_profit.at(9) == doctest::Approx(5.0));
    AssignmentSolution s = solve_assignment(p);
    AssignmentSolution b = brute_force_assignment(p);
    CHECK(s.objective == doctest::Approx(b.objective));
    CHECK(s.selected.size() == 1);
    CHECK(s.objective == doctest::Approx(5.0));
}

TEST_CASE("overbooking is taken when the penalty is small") {
    AssignmentProblem p;
    p.lost_demand_penalty = 0.5;
    p.matchings.push_back({0, 5.0, {1}, {{9, 0.8}}});
    p.matchings.push_back({1, 5.0, {2}, {{9, 0.8}}});
    p.finalize();
    AssignmentSolution s = solve_assignment(p);
    CHECK(s.selected == std::vector<int>{0, 1});
    // w = (0.5 + 5) * (1.6 - 1) = 3.3
    CHECK(s.objective == doctest::Approx(10.0 - 3.3));
    REQUIRE(s.penalties.count(9) == 1);
    CHECK(s.penalties.at(9) == doctest::Approx(3.3));
    AssignmentSolution b = brute_force_assignment(p);
    CHECK(b.objective == doctest::Approx(s.objective));
}

TEST_CASE("brute force rejects oversized problems and empty is fine") {
    AssignmentProblem p;
    CHECK(brute_force_assignment(p).objective == doctest::Approx(0.0));
    CHECK(solve_assignment(p).objective == doctest::Approx(0.0));
    for (int i = 0; i < 21; i++) p.matchings.push_back({i, 1.0, {i}, {}});
    p.finalize();
    CHECK_THROWS_AS(brute_force_assignment(p), ValidationError);
}

TEST_CASE("solver equals brute force on 500 random instances") {
    Rng rng(1234);
    for (int trial = 0; trial < 500; trial++) {
        AssignmentProblem p = random_problem(rng);
        AssignmentSolution s = solve_assignment(p);
        AssignmentSolution b = brute_force_assignment(p);
        CHECK(std::fabs(s.objective - b.objective) <= 1e-9);

        // the selection satisfies the packing constraint
        std::set<RequestId> covered;
        for (int id : s.selected)
            for (const auto& m : p.matchings)
                if (m.id == id)
                    for (RequestId r : m.requests) CHECK(covered.insert(r).second);

        // penalties reconstruct exactly from the tight formula
        std::map<VehicleId, double> gamma_sum;
        for (int id : s.selected)
            for (const auto& m : p.matchings)
                if (m.id == id)
                    for (const auto& [veh, g] : m.vehicles) gamma_sum[veh] += g;
        double total_pen = 0.0;
        for (const auto& [veh, g] : gamma_sum) {
            const double w = std::max(0.0, (p.lost_demand_penalty + p.vehicle_mean_profit.at(veh)) * (g - 1.0));
            total_pen += w;
            if (w > 0.0) {
                REQUIRE(s.penalties.count(veh) == 1);
                CHECK(std::fabs(s.penalties.at(veh) - w) <= 1e-12);
            } else {
                CHECK(s.penalties.count(veh) == 0);
            }
        }
        double total_u = 0.0;
        for (int id : s.selected)
            for (const auto& m : p.matchings)
                if (m.id == id) total_u += m.u;
        CHECK(std::fabs(s.objective - (total_u - total_pen)) <= 1e-12);
    }
}

TEST_CASE("raising any u never lowers the optimum") {
    // eps_j is problem data here; with it held fixed, every selection's
    // value is nondecreasing in u_i, hence so is the optimum
    Rng rng(777);
    for (int trial = 0; trial < 50; trial++) {
        AssignmentProblem p = random_problem(rng, 10);
        const double base = solve_assignment(p).objective;
        const size_t k = rng.below(p.matchings.size());
        p.matchings[k].u += rng.uniform(0.1, 5.0);
        const double bumped = solve_assignment(p).objective;
        CHECK(bumped >= base - 1e-9);
        const double check = brute_force_assignment(p).objective;
        CHECK(bumped == doctest::Approx(check).epsilon(1e-12));
    }
}

TEST_CASE("gamma validation") {
    AssignmentProblem p;
    p.matchings.push_back({0, 1.0, {1}, {{1, 1.5}}});
    CHECK_THROWS_AS(p.finalize(), ValidationError);
}
