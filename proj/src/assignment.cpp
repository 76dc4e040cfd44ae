#include "modjoint/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace modjoint {

void AssignmentProblem::finalize() {
    validate();
    vehicle_mean_profit.clear();
    std::map<VehicleId, std::pair<double, int>> acc;
    for (const auto& m : matchings)
        for (const auto& [veh, gamma] : m.vehicles) {
            auto& a = acc[veh];
            a.first += m.u;
            a.second += 1;
        }
    for (const auto& [veh, a] : acc) vehicle_mean_profit[veh] = a.first / static_cast<double>(a.second);
}

void AssignmentProblem::validate() const {
    std::set<int> ids;
    for (const auto& m : matchings) {
        if (!ids.insert(m.id).second) throw ValidationError("duplicate matching id");
        if (!std::isfinite(m.u)) throw ValidationError("matching u must be finite");
        if (m.requests.empty()) throw ValidationError("matching covers no request");
        for (const auto& [veh, gamma] : m.vehicles) {
            (void)veh;
            if (gamma < 0.0 || gamma > 1.0) throw ValidationError("gamma out of [0, 1]");
        }
    }
}

double assignment_objective(const AssignmentProblem& prob, const std::vector<int>& selected_ids,
                            std::map<VehicleId, double>* penalties_out) {
    std::set<int> chosen(selected_ids.begin(), selected_ids.end());
    double value = 0.0;
    std::map<VehicleId, double> gamma_sum;
    for (const auto& m : prob.matchings) {
        if (!chosen.count(m.id)) continue;
        value += m.u;
        for (const auto& [veh, gamma] : m.vehicles) gamma_sum[veh] += gamma;
    }
    if (penalties_out) penalties_out->clear();
    for (const auto& [veh, g] : gamma_sum) {
        auto it = prob.vehicle_mean_profit.find(veh);
        const double eps = it == prob.vehicle_mean_profit.end() ? 0.0 : it->second;
        const double w = std::max(0.0, (prob.lost_demand_penalty + eps) * (g - 1.0));
        if (w > 0.0 && penalties_out) (*penalties_out)[veh] = w;
        value -= w;
    }
    return value;
}

namespace {

struct SolverState {
    const AssignmentProblem* prob = nullptr;
    std::vector<const AssignmentProblem::Matching*> order;  // descending u, id tiebreak
    // per-position: largest achievable remaining positive value
    std::vector<double> suffix_bound;
    std::set<RequestId> covered;
    std::vector<int> current;
    double current_u = 0.0;
    std::map<VehicleId, double> gamma_sum;
    std::vector<int> best;
    double best_value = 0.0;
    bool have_best = false;

    double penalties_now() const {
        double total = 0.0;
        for (const auto& [veh, g] : gamma_sum) {
            auto it = prob->vehicle_mean_profit.find(veh);
            const double eps = it == prob->vehicle_mean_profit.end() ? 0.0 : it->second;
            total += std::max(0.0, (prob->lost_demand_penalty + eps) * (g - 1.0));
        }
        return total;
    }

    void consider_leaf() {
        const double value = current_u - penalties_now();
        if (!have_best || value > best_value + 1e-12) {
            best = current;
            best_value = value;
            have_best = true;
        }
    }

    void dfs(size_t pos) {
        if (pos == order.size()) {
            consider_leaf();
            return;
        }
        // additive bound: fixed value plus remaining positive u, penalties
        // ignored (they only subtract)
        if (have_best && current_u + suffix_bound[pos] <= best_value + 1e-12) {
            consider_leaf();
            return;
        }
        const auto& m = *order[pos];
        bool conflict = false;
        for (RequestId r : m.requests)
            if (covered.count(r)) {
                conflict = true;
                break;
            }
        if (!conflict && m.u > -1e18) {
            for (RequestId r : m.requests) covered.insert(r);
            for (const auto& [veh, gamma] : m.vehicles) gamma_sum[veh] += gamma;
            current.push_back(m.id);
            current_u += m.u;
            dfs(pos + 1);
            current_u -= m.u;
            current.pop_back();
            for (const auto& [veh, gamma] : m.vehicles) {
                auto it = gamma_sum.find(veh);
                it->second -= gamma;
                if (std::fabs(it->second) < 1e-15) gamma_sum.erase(it);
            }
            for (RequestId r : m.requests) covered.erase(r);
        }
        dfs(pos + 1);
    }
};

}  // namespace

AssignmentSolution solve_assignment(const AssignmentProblem& prob) {
    prob.validate();
    SolverState st;
    st.prob = &prob;
    for (const auto& m : prob.matchings) st.order.push_back(&m);
    std::sort(st.order.begin(), st.order.end(), [](const auto* a, const auto* b) {
        if (a->u != b->u) return a->u > b->u;
        return a->id < b->id;
    });
    st.suffix_bound.assign(st.order.size() + 1, 0.0);
    for (size_t i = st.order.size(); i-- > 0;)
        st.suffix_bound[i] = st.suffix_bound[i + 1] + std::max(0.0, st.order[i]->u);
    st.consider_leaf();  // empty selection is always feasible
    st.dfs(0);

    AssignmentSolution sol;
    sol.selected = st.best;
    std::sort(sol.selected.begin(), sol.selected.end());
    sol.objective = assignment_objective(prob, sol.selected, &sol.penalties);
    return sol;
}

AssignmentSolution brute_force_assignment(const AssignmentProblem& prob) {
    prob.validate();
    const size_t n = prob.matchings.size();
    if (n > 20) throw ValidationError("brute_force_assignment limited to 20 matchings");
    AssignmentSolution best;
    best.objective = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); mask++) {
        std::set<RequestId> covered;
        bool feasible = true;
        std::vector<int> sel;
        for (size_t i = 0; i < n && feasible; i++) {
            if (!(mask & (std::uint64_t{1} << i))) continue;
            for (RequestId r : prob.matchings[i].requests)
                if (!covered.insert(r).second) {
                    feasible = false;
                    break;
                }
            sel.push_back(prob.matchings[i].id);
        }
        if (!feasible) continue;
        std::map<VehicleId, double> pen;
        const double value = assignment_objective(prob, sel, &pen);
        if (value > best.objective + 1e-12) {
            std::sort(sel.begin(), sel.end());
            best.selected = sel;
            best.penalties = pen;
            best.objective = value;
        }
    }
    return best;
}

}  // namespace modjoint
