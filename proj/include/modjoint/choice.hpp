#pragma once

#include "modjoint/common.hpp"
#include "modjoint/rng.hpp"

namespace modjoint {

/// Multinomial-logit coefficients. All betas are per-unit disutilities and
/// must be negative; the price multiplier rescales beta_p once so every
/// pricing module sees a single effective price coefficient.
struct ChoiceParams {
    double beta_p = -0.1;   // utility per currency unit
    double beta_w = -0.01;  // utility per second of wait
    double beta_t = -0.005; // utility per second of travel
    double price_multiplier = 1.0;  // >= 1, applied to beta_p
    // optional alternative-specific constants, default 0
    double asc_exclusive = 0.0;
    double asc_shared = 0.0;
    double asc_outside = 0.0;

    double effective_beta_p() const { return beta_p * price_multiplier; }
    void validate() const;
};

struct ModeOffer {
    double price = 0.0;   // currency
    double wait = 0.0;    // seconds
    double travel = 0.0;  // seconds
};

struct ChoiceProbabilities {
    double p_exclusive = 0.0;
    double p_shared = 0.0;
    double p_outside = 0.0;
};

/// Full utility of an offer: effective_beta_p * price + beta_w * wait +
/// beta_t * travel (+ the mode's constant, added by the caller).
double utility(const ChoiceParams& params, const ModeOffer& offer);

/// The non-price part of the utility (everything the assignment policy
/// controls): beta_w * wait + beta_t * travel.
double assignment_utility(const ChoiceParams& params, const ModeOffer& offer);

/// Softmax over the three mode utilities, max-subtracted for stability.
ChoiceProbabilities choice_probabilities(double u_exclusive, double u_shared, double u_outside);

/// Inverse-CDF sample in fixed order (exclusive, shared, outside).
Mode sample_choice(const ChoiceProbabilities& probs, double unit_draw);
Mode sample_choice(const ChoiceProbabilities& probs, Rng& rng);

}  // namespace modjoint
