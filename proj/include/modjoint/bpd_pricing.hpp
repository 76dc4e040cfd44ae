#pragma once

#include <array>

#include "modjoint/common.hpp"

namespace modjoint {

/// Pricing terms of one request inside a two-request matching: total costs
/// per mode, non-price utility constants, the log of the exponentiated
/// outside utility, and which products are actually offerable.
struct BatchRequestTerms {
    double cost_shared = 0.0;     // expected cost if not pooled with the partner
    double cost_exclusive = 0.0;
    double d_shared = 0.0;        // non-price utility constant of the shared offer
    double d_exclusive = 0.0;
    double log_outside = 0.0;     // log D_i
    bool offer_shared = true;
    bool offer_exclusive = true;
};

/// The batched multi-product pricing instance for two requests that some
/// shared vehicle can serve together. Pooling savings
/// C = c_1s + c_2s - c_ss must be nonnegative for emitted instances.
struct BatchPricingInstance {
    BatchRequestTerms r1, r2;
    double cost_pooled = 0.0;  // c_ss
    double beta_p = -0.1;      // < 0

    double pooling_savings() const { return r1.cost_shared + r2.cost_shared - cost_pooled; }
    void validate() const;
};

// Probability variable order used throughout: P_1s, P_1e, P_2s, P_2e.
using ProbVector = std::array<double, 4>;
using PriceVector = std::array<double, 4>;

struct BatchQuote {
    PriceVector prices{};        // same order as ProbVector
    ProbVector probabilities{};
    double expected_profit = 0.0;
};

/// Inverse of the MNL map for request i (0 or 1):
/// p = (log(D P / (1 - P_s - P_e)) - d) / beta. Throws std::domain_error on
/// boundary probabilities.
std::array<double, 2> prob_to_price(const BatchPricingInstance& inst, double prob_shared,
                                    double prob_exclusive, int request_index);

/// MNL choice probabilities of both requests at the given prices
/// (unoffered products get zero).
ProbVector batch_probabilities(const BatchPricingInstance& inst, const PriceVector& prices);

/// The batched expected-profit objective:
/// sum_i sum_m P_im (p_im - c_im) + P_1s P_2s (c_1s + c_2s - c_ss).
double batched_expected_profit(const BatchPricingInstance& inst, const PriceVector& prices);

/// Joint concavity holds in probability space when
/// min(c_1e, c_2e) <= -1 / beta_p (boundary inclusive).
bool concavity_certificate(const BatchPricingInstance& inst);

/// Hessian of the probability-space transformed objective at an interior
/// point, rows/cols ordered (P_1s, P_1e, P_2s, P_2e). Positive semidefinite
/// exactly when the original objective is concave there.
std::array<std::array<double, 4>, 4> hessian_at(const BatchPricingInstance& inst, const ProbVector& probs);

/// Value of the transformed objective beta * E[profit] (minimized by the
/// solver); exposed for finite-difference tests.
double transformed_objective(const BatchPricingInstance& inst, const ProbVector& probs);

/// Gradient norm of the transformed objective over the offered products.
double transformed_gradient_norm(const BatchPricingInstance& inst, const ProbVector& probs);

/// Jointly concave instances are solved by damped Newton with interior
/// safeguarding on the transformed objective; others fall back to
/// brute_force_batch with the default step 0.01.
BatchQuote optimize_batch_prices(const BatchPricingInstance& inst);

/// Enumerates P_1s on a grid and solves the remaining jointly concave
/// subproblem at each grid point; returns the best quote found.
BatchQuote brute_force_batch(const BatchPricingInstance& inst, double step);

}  // namespace modjoint
