#include "qdlock/estimator.hpp"

namespace qdlock {

RateEstimator::RateEstimator(double tau_cycle_s, double tau_filter_s, double initial_cps)
    : tau_cycle_(tau_cycle_s), tau_filter_(tau_filter_s), estimate_(initial_cps) {
    if (!(tau_cycle_s > 0.0))
        throw ConfigError("RateEstimator: tau_cycle must be positive");
    if (!(tau_cycle_s < tau_filter_s))
        throw ConfigError("RateEstimator: tau_cycle must be smaller than tau_filter");
    if (!(initial_cps >= 0.0))
        throw ConfigError("RateEstimator: initial estimate must be non-negative");
    d_ = std::exp(-tau_cycle_ / tau_filter_);
    i_ = (1.0 - d_) / tau_cycle_;
}

double steady_state_std(const RateEstimator& est, double lambda_cps) {
    if (!(lambda_cps >= 0.0))
        throw ConfigError("steady_state_std: rate must be non-negative");
    const double d = est.decrement();
    const double i = est.increment();
    const double var = lambda_cps * est.tau_cycle_s() * i * i / (1.0 - d * d);
    return std::sqrt(var);
}

}  // namespace qdlock
