#include "modjoint/choice.hpp"

#include <algorithm>
#include <cmath>

namespace modjoint {

void ChoiceParams::validate() const {
    if (!(price_multiplier >= 1.0)) throw ValidationError("price_multiplier must be >= 1");
    if (!(effective_beta_p() < 0.0)) throw ValidationError("beta_p must be negative");
    if (!(beta_w <= 0.0) || !(beta_t <= 0.0)) throw ValidationError("beta_w and beta_t must be <= 0");
}

double utility(const ChoiceParams& params, const ModeOffer& offer) {
    return params.effective_beta_p() * offer.price + params.beta_w * offer.wait + params.beta_t * offer.travel;
}

double assignment_utility(const ChoiceParams& params, const ModeOffer& offer) {
    return params.beta_w * offer.wait + params.beta_t * offer.travel;
}

ChoiceProbabilities choice_probabilities(double u_exclusive, double u_shared, double u_outside) {
    const double m = std::max(u_exclusive, std::max(u_shared, u_outside));
    const double ee = std::exp(u_exclusive - m);
    const double es = std::exp(u_shared - m);
    const double eo = std::exp(u_outside - m);
    const double z = ee + es + eo;
    return {ee / z, es / z, eo / z};
}

Mode sample_choice(const ChoiceProbabilities& probs, double unit_draw) {
    if (unit_draw < probs.p_exclusive) return Mode::Exclusive;
    if (unit_draw < probs.p_exclusive + probs.p_shared) return Mode::Shared;
    return Mode::Outside;
}

Mode sample_choice(const ChoiceProbabilities& probs, Rng& rng) {
    return sample_choice(probs, rng.uniform());
}

}  // namespace modjoint
