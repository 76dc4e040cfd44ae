#pragma once

#include <map>
#include <vector>

#include "modjoint/common.hpp"

namespace modjoint {

/// The batched matching-selection integer program: pick ESV matchings to
/// maximize sum(u_i y_i) - sum(w_j), where w_j is the overbooking penalty
/// max(0, (c_p + eps_j) * (sum of gamma over selected matchings - 1)).
struct AssignmentProblem {
    struct Matching {
        int id = 0;
        double u = 0.0;                                  // expected profit
        std::vector<RequestId> requests;                 // covered requests
        std::vector<std::pair<VehicleId, double>> vehicles;  // (vehicle, gamma)
    };
    std::vector<Matching> matchings;
    std::map<VehicleId, double> vehicle_mean_profit;  // eps_j; filled by finalize()
    double lost_demand_penalty = 0.0;                 // c_p

    /// Computes eps_j as the mean u over the matchings containing each
    /// vehicle and checks gamma ranges.
    void finalize();
    void validate() const;
};

struct AssignmentSolution {
    std::vector<int> selected;               // matching ids, sorted
    std::map<VehicleId, double> penalties;   // w_j > 0 entries only
    double objective = 0.0;
};

/// Exact solver: depth-first branch and bound over the binary selection
/// vector, branching in descending-u order (id tiebreak) with an additive
/// bound that ignores penalties. Deterministic.
AssignmentSolution solve_assignment(const AssignmentProblem& prob);

/// Exhaustive oracle over all selection vectors satisfying the per-request
/// packing constraint. Limited to 20 matchings.
AssignmentSolution brute_force_assignment(const AssignmentProblem& prob);

/// Objective of a concrete selection, with penalties at their tight values.
double assignment_objective(const AssignmentProblem& prob, const std::vector<int>& selected_ids,
                            std::map<VehicleId, double>* penalties_out = nullptr);

}  // namespace modjoint
