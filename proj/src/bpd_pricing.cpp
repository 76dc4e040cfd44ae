#include "modjoint/bpd_pricing.hpp"

#include "modjoint/spd_pricing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace modjoint {

namespace {

constexpr double kInteriorFloor = 1e-9;

const BatchRequestTerms& terms_of(const BatchPricingInstance& inst, int i) { return i == 0 ? inst.r1 : inst.r2; }

bool offered(const BatchPricingInstance& inst, int var) {
    switch (var) {
        case 0: return inst.r1.offer_shared;
        case 1: return inst.r1.offer_exclusive;
        case 2: return inst.r2.offer_shared;
        case 3: return inst.r2.offer_exclusive;
    }
    return false;
}

double cost_of(const BatchPricingInstance& inst, int var) {
    const BatchRequestTerms& t = terms_of(inst, var / 2);
    return (var % 2 == 0) ? t.cost_shared : t.cost_exclusive;
}

double d_of(const BatchPricingInstance& inst, int var) {
    const BatchRequestTerms& t = terms_of(inst, var / 2);
    return (var % 2 == 0) ? t.d_shared : t.d_exclusive;
}

double phi_of(const BatchPricingInstance& inst, const ProbVector& p, int request) {
    double used = 0.0;
    for (int m = 0; m < 2; m++) {
        const int var = request * 2 + m;
        if (offered(inst, var)) used += p[static_cast<size_t>(var)];
    }
    return 1.0 - used;
}

// Gradient of the transformed objective over offered variables; zero
// entries for unoffered ones.
ProbVector transformed_gradient(const BatchPricingInstance& inst, const ProbVector& p) {
    const double beta = inst.beta_p;
    const double coupling = beta * inst.pooling_savings();
    ProbVector g{};
    for (int i = 0; i < 2; i++) {
        const double phi = phi_of(inst, p, i);
        const BatchRequestTerms& t = terms_of(inst, i);
        for (int m = 0; m < 2; m++) {
            const int var = i * 2 + m;
            if (!offered(inst, var)) continue;
            double grad = std::log(p[static_cast<size_t>(var)] / phi) + t.log_outside + 1.0 / phi -
                          d_of(inst, var) - beta * cost_of(inst, var);
            g[static_cast<size_t>(var)] = grad;
        }
    }
    if (offered(inst, 0) && offered(inst, 2)) {
        g[0] += coupling * p[2];
        g[2] += coupling * p[0];
    }
    return g;
}

// Solve A x = b in place by Gaussian elimination with partial pivoting.
bool solve_linear(std::vector<std::vector<double>>& a, std::vector<double>& b) {
    const size_t n = b.size();
    for (size_t col = 0; col < n; col++) {
        size_t pivot = col;
        for (size_t r = col + 1; r < n; r++)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        if (std::fabs(a[pivot][col]) < 1e-300) return false;
        std::swap(a[pivot], a[col]);
        std::swap(b[pivot], b[col]);
        for (size_t r = col + 1; r < n; r++) {
            const double f = a[r][col] / a[col][col];
            for (size_t c = col; c < n; c++) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (size_t col = n; col-- > 0;) {
        for (size_t r = 0; r < col; r++) b[r] -= a[r][col] * b[col];
        b[col] /= a[col][col];
    }
    return true;
}

struct MaskedSolution {
    ProbVector probs{};
    double objective = 0.0;  // transformed objective value
};

// Minimizes the transformed objective over the products in `free_vars`,
// holding everything else at the values in `start`. Damped Newton with a
// fraction-to-boundary rule keeping the iterate strictly interior.
MaskedSolution solve_masked(const BatchPricingInstance& inst, const std::array<bool, 4>& free_vars,
                            ProbVector start) {
    std::vector<int> vars;
    for (int v = 0; v < 4; v++)
        if (free_vars[static_cast<size_t>(v)] && offered(inst, v)) vars.push_back(v);

    ProbVector x = start;
    if (vars.empty()) return {x, transformed_objective(inst, x)};

    auto max_feasible_step = [&](const ProbVector& p, const std::vector<double>& dir) {
        double alpha = std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < vars.size(); k++) {
            const double d = dir[k];
            const double cur = p[static_cast<size_t>(vars[k])];
            if (d > 0.0) alpha = std::min(alpha, (cur - kInteriorFloor) / d);
        }
        for (int i = 0; i < 2; i++) {
            // phi_i shrinks when the request's free probabilities rise
            double dphi = 0.0;
            for (size_t k = 0; k < vars.size(); k++)
                if (vars[k] / 2 == i) dphi += dir[k];
            if (dphi < 0.0) {
                const double phi = phi_of(inst, p, i);
                alpha = std::min(alpha, (phi - kInteriorFloor) / (-dphi));
            }
        }
        return std::max(alpha, 0.0);
    };

    double fx = transformed_objective(inst, x);
    for (int iter = 0; iter < 500; iter++) {
        const ProbVector grad_full = transformed_gradient(inst, x);
        double gmax = 0.0;
        for (int v : vars) gmax = std::max(gmax, std::fabs(grad_full[static_cast<size_t>(v)]));
        if (gmax <= 1e-11) break;

        const auto h_full = hessian_at(inst, x);
        const size_t n = vars.size();
        std::vector<double> step(n);
        double damping = 0.0;
        bool solved = false;
        for (int attempt = 0; attempt < 12 && !solved; attempt++) {
            std::vector<std::vector<double>> a(n, std::vector<double>(n));
            std::vector<double> b(n);
            for (size_t r = 0; r < n; r++) {
                for (size_t c = 0; c < n; c++)
                    a[r][c] = h_full[static_cast<size_t>(vars[r])][static_cast<size_t>(vars[c])];
                a[r][r] += damping;
                b[r] = grad_full[static_cast<size_t>(vars[r])];
            }
            if (solve_linear(a, b)) {
                double dot = 0.0;
                for (size_t k = 0; k < n; k++) dot += b[k] * grad_full[static_cast<size_t>(vars[k])];
                if (dot > 0.0) {
                    step = b;
                    solved = true;
                    break;
                }
            }
            damping = damping == 0.0 ? 1e-8 : damping * 100.0;
        }
        if (!solved)
            for (size_t k = 0; k < n; k++) step[k] = grad_full[static_cast<size_t>(vars[k])];

        // keep iterates away from the boundary and limit the move so an
        // early overshoot cannot park the iterate at the interior floor
        double step_inf = 0.0;
        for (double s : step) step_inf = std::max(step_inf, std::fabs(s));
        double alpha = std::min({1.0, 0.95 * max_feasible_step(x, step), 0.25 / std::max(step_inf, 1e-12)});
        double descent = 0.0;
        for (size_t k = 0; k < n; k++) descent += step[k] * grad_full[static_cast<size_t>(vars[k])];
        bool moved = false;
        for (int bt = 0; bt < 60 && alpha > 0.0; bt++) {
            ProbVector cand = x;
            for (size_t k = 0; k < n; k++) cand[static_cast<size_t>(vars[k])] -= alpha * step[k];
            const double fc = transformed_objective(inst, cand);
            if (fc <= fx - 1e-4 * alpha * descent || (bt > 20 && fc < fx)) {
                x = cand;
                fx = fc;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!moved) break;
    }

    // cleanup: cyclic coordinate bisection. Each partial derivative is
    // strictly increasing in its own coordinate, so the 1-D root is exact;
    // this grinds out any remaining stall near the boundary. A coordinate
    // whose optimum sits on the interior floor stays pinned there, so the
    // loop also stops once a sweep no longer moves the point.
    for (int sweep = 0; sweep < 80; sweep++) {
        const ProbVector grad = transformed_gradient(inst, x);
        double gmax = 0.0;
        for (int v : vars) gmax = std::max(gmax, std::fabs(grad[static_cast<size_t>(v)]));
        if (gmax <= 1e-12) break;
        double moved = 0.0;
        for (int v : vars) {
            const int sibling = (v / 2) * 2 + (1 - v % 2);
            const double sib = offered(inst, sibling) ? x[static_cast<size_t>(sibling)] : 0.0;
            double lo = kInteriorFloor;
            double hi = 1.0 - sib - kInteriorFloor;
            if (hi <= lo) continue;
            auto deriv = [&](double t) {
                ProbVector y = x;
                y[static_cast<size_t>(v)] = t;
                return transformed_gradient(inst, y)[static_cast<size_t>(v)];
            };
            const double before = x[static_cast<size_t>(v)];
            if (deriv(lo) >= 0.0) {
                x[static_cast<size_t>(v)] = lo;
            } else if (deriv(hi) <= 0.0) {
                x[static_cast<size_t>(v)] = hi;
            } else {
                for (int it = 0; it < 80; it++) {
                    const double mid = 0.5 * (lo + hi);
                    if (deriv(mid) > 0.0)
                        hi = mid;
                    else
                        lo = mid;
                }
                x[static_cast<size_t>(v)] = 0.5 * (lo + hi);
            }
            moved = std::max(moved, std::fabs(x[static_cast<size_t>(v)] - before));
        }
        if (moved <= 1e-15) break;
    }
    fx = transformed_objective(inst, x);
    return {x, fx};
}

// Decoupled sequential optimum as a warm start: ignores the coupling term,
// which only perturbs the solution, and is always strictly interior.
ProbVector spd_warm_start(const BatchPricingInstance& inst) {
    ProbVector x{};
    for (int i = 0; i < 2; i++) {
        const BatchRequestTerms& t = i == 0 ? inst.r1 : inst.r2;
        double ps = 0.0, pe = 0.0;
        if (t.offer_shared && t.offer_exclusive) {
            SpdInstance s{t.d_exclusive, t.d_shared, t.log_outside, t.cost_exclusive, t.cost_shared,
                          inst.beta_p};
            PriceQuote q = spd_optimal_prices(s);
            ps = q.probabilities.p_shared;
            pe = q.probabilities.p_exclusive;
        } else if (t.offer_shared || t.offer_exclusive) {
            const double u = t.offer_shared ? t.d_shared : t.d_exclusive;
            const double c = t.offer_shared ? t.cost_shared : t.cost_exclusive;
            SingleProductQuote q = single_product_price(u, t.log_outside, c, inst.beta_p);
            (t.offer_shared ? ps : pe) = q.probability;
        }
        ps = std::max(ps, 1e-6);
        pe = std::max(pe, 1e-6);
        const double sum = ps + pe;
        if (sum > 1.0 - 1e-6) {
            ps *= (1.0 - 1e-6) / sum * 0.98;
            pe *= (1.0 - 1e-6) / sum * 0.98;
        }
        x[static_cast<size_t>(i * 2)] = t.offer_shared ? ps : 0.0;
        x[static_cast<size_t>(i * 2 + 1)] = t.offer_exclusive ? pe : 0.0;
    }
    return x;
}

BatchQuote quote_from_probs(const BatchPricingInstance& inst, const ProbVector& probs) {
    BatchQuote q;
    q.probabilities = probs;
    for (int i = 0; i < 2; i++) {
        auto pp = prob_to_price(inst, probs[static_cast<size_t>(i * 2)], probs[static_cast<size_t>(i * 2 + 1)], i);
        q.prices[static_cast<size_t>(i * 2)] = pp[0];
        q.prices[static_cast<size_t>(i * 2 + 1)] = pp[1];
    }
    q.expected_profit = batched_expected_profit(inst, q.prices);
    return q;
}


}  // namespace

void BatchPricingInstance::validate() const {
    if (!(beta_p < 0.0)) throw ValidationError("beta_p must be negative");
    const double fields[] = {r1.cost_shared,  r1.cost_exclusive, r1.d_shared, r1.d_exclusive, r1.log_outside,
                             r2.cost_shared,  r2.cost_exclusive, r2.d_shared, r2.d_exclusive, r2.log_outside,
                             cost_pooled};
    for (double f : fields)
        if (!std::isfinite(f)) throw ValidationError("BatchPricingInstance fields must be finite");
    if (!r1.offer_shared && !r1.offer_exclusive && !r2.offer_shared && !r2.offer_exclusive)
        throw ValidationError("BatchPricingInstance offers nothing");
}

std::array<double, 2> prob_to_price(const BatchPricingInstance& inst, double prob_shared,
                                    double prob_exclusive, int request_index) {
    const BatchRequestTerms& t = terms_of(inst, request_index);
    const double used = (t.offer_shared ? prob_shared : 0.0) + (t.offer_exclusive ? prob_exclusive : 0.0);
    const double phi = 1.0 - used;
    if (!(phi > 0.0)) throw std::domain_error("prob_to_price: boundary probabilities");
    std::array<double, 2> out{0.0, 0.0};
    if (t.offer_shared) {
        if (!(prob_shared > 0.0)) throw std::domain_error("prob_to_price: boundary probabilities");
        out[0] = (std::log(prob_shared / phi) + t.log_outside - t.d_shared) / inst.beta_p;
    }
    if (t.offer_exclusive) {
        if (!(prob_exclusive > 0.0)) throw std::domain_error("prob_to_price: boundary probabilities");
        out[1] = (std::log(prob_exclusive / phi) + t.log_outside - t.d_exclusive) / inst.beta_p;
    }
    return out;
}

ProbVector batch_probabilities(const BatchPricingInstance& inst, const PriceVector& prices) {
    ProbVector p{};
    for (int i = 0; i < 2; i++) {
        const BatchRequestTerms& t = terms_of(inst, i);
        const double us = inst.beta_p * prices[static_cast<size_t>(i * 2)] + t.d_shared;
        const double ue = inst.beta_p * prices[static_cast<size_t>(i * 2 + 1)] + t.d_exclusive;
        const double uo = t.log_outside;
        double m = uo;
        if (t.offer_shared) m = std::max(m, us);
        if (t.offer_exclusive) m = std::max(m, ue);
        const double es = t.offer_shared ? std::exp(us - m) : 0.0;
        const double ee = t.offer_exclusive ? std::exp(ue - m) : 0.0;
        const double z = es + ee + std::exp(uo - m);
        p[static_cast<size_t>(i * 2)] = es / z;
        p[static_cast<size_t>(i * 2 + 1)] = ee / z;
    }
    return p;
}

double batched_expected_profit(const BatchPricingInstance& inst, const PriceVector& prices) {
    const ProbVector p = batch_probabilities(inst, prices);
    double profit = 0.0;
    for (int v = 0; v < 4; v++)
        if (offered(inst, v)) profit += p[static_cast<size_t>(v)] * (prices[static_cast<size_t>(v)] - cost_of(inst, v));
    profit += p[0] * p[2] * inst.pooling_savings();
    return profit;
}

bool concavity_certificate(const BatchPricingInstance& inst) {
    return std::min(inst.r1.cost_exclusive, inst.r2.cost_exclusive) <= -1.0 / inst.beta_p;
}

double transformed_objective(const BatchPricingInstance& inst, const ProbVector& p) {
    const double beta = inst.beta_p;
    double g = 0.0;
    for (int i = 0; i < 2; i++) {
        const double phi = phi_of(inst, p, i);
        if (!(phi > 0.0)) return std::numeric_limits<double>::infinity();
        const BatchRequestTerms& t = terms_of(inst, i);
        for (int m = 0; m < 2; m++) {
            const int var = i * 2 + m;
            if (!offered(inst, var)) continue;
            const double pv = p[static_cast<size_t>(var)];
            if (!(pv > 0.0)) return std::numeric_limits<double>::infinity();
            g += pv * (std::log(pv / phi) + t.log_outside - d_of(inst, var) - beta * cost_of(inst, var));
        }
    }
    if (offered(inst, 0) && offered(inst, 2)) g += beta * inst.pooling_savings() * p[0] * p[2];
    return g;
}

double transformed_gradient_norm(const BatchPricingInstance& inst, const ProbVector& probs) {
    const ProbVector g = transformed_gradient(inst, probs);
    double n = 0.0;
    for (int v = 0; v < 4; v++)
        if (offered(inst, v)) n = std::max(n, std::fabs(g[static_cast<size_t>(v)]));
    return n;
}

std::array<std::array<double, 4>, 4> hessian_at(const BatchPricingInstance& inst, const ProbVector& p) {
    std::array<std::array<double, 4>, 4> h{};
    for (int i = 0; i < 2; i++) {
        const double phi = phi_of(inst, p, i);
        if (!(phi > 0.0)) throw std::domain_error("hessian_at: boundary probabilities");
        const double common = 1.0 / phi + 1.0 / (phi * phi);
        for (int m = 0; m < 2; m++) {
            const int var = i * 2 + m;
            if (!offered(inst, var)) continue;
            const double pv = p[static_cast<size_t>(var)];
            if (!(pv > 0.0)) throw std::domain_error("hessian_at: boundary probabilities");
            h[static_cast<size_t>(var)][static_cast<size_t>(var)] = 1.0 / pv + common;
            const int other = i * 2 + (1 - m);
            if (offered(inst, other)) h[static_cast<size_t>(var)][static_cast<size_t>(other)] = common;
        }
    }
    if (offered(inst, 0) && offered(inst, 2)) {
        const double c = inst.beta_p * inst.pooling_savings();
        h[0][2] = c;
        h[2][0] = c;
    }
    return h;
}

BatchQuote optimize_batch_prices(const BatchPricingInstance& inst) {
    inst.validate();
    if (!concavity_certificate(inst)) return brute_force_batch(inst, 0.01);
    MaskedSolution s = solve_masked(inst, {true, true, true, true}, spd_warm_start(inst));
    return quote_from_probs(inst, s.probs);
}

BatchQuote brute_force_batch(const BatchPricingInstance& inst, double step) {
    inst.validate();
    if (!(step > 0.0) || step > 0.5) throw ValidationError("brute-force step must be in (0, 0.5]");
    if (!inst.r1.offer_shared) {
        // nothing to enumerate: the remaining products form a concave problem
        MaskedSolution s = solve_masked(inst, {false, true, true, true}, spd_warm_start(inst));
        return quote_from_probs(inst, s.probs);
    }
    MaskedSolution best;
    bool have_best = false;
    const int cells = static_cast<int>(std::ceil(1.0 / step));
    for (int k = 0; k <= cells; k++) {
        double p1s = std::min(1.0, k * step);
        p1s = std::min(std::max(p1s, 1e-6), 1.0 - 2e-6);
        ProbVector start = spd_warm_start(inst);
        start[0] = p1s;
        if (inst.r1.offer_exclusive) start[1] = std::min(start[1], 0.5 * (1.0 - p1s));
        MaskedSolution s = solve_masked(inst, {false, true, true, true}, start);
        if (!have_best || s.objective < best.objective) {
            best = s;
            have_best = true;
        }
    }
    // polish the winner over all variables; safe because for fixed P_1s the
    // rest is concave and the polish only accepts improvements
    MaskedSolution polished = solve_masked(inst, {true, true, true, true}, best.probs);
    if (polished.objective < best.objective) best = polished;
    return quote_from_probs(inst, best.probs);
}

}  // namespace modjoint
