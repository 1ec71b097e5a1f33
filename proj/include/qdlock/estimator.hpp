// Exponential-smoothing count-rate estimator: a first-order IIR filter
// driven once per digital cycle with a photon-arrival Boolean,
//   R[n+1] = R[n]*d + B*i,  d = exp(-tau_cycle/tau_filter),  i = (1-d)/tau_cycle.
#ifndef QDLOCK_ESTIMATOR_HPP
#define QDLOCK_ESTIMATOR_HPP

#include <cmath>
#include <cstdint>

#include "qdlock/common.hpp"

namespace qdlock {

class RateEstimator {
public:
    /// Throws ConfigError unless 0 < tau_cycle < tau_filter and initial >= 0.
    RateEstimator(double tau_cycle_s, double tau_filter_s, double initial_cps);

    /// One digital cycle; returns the new estimate in cps.
    double tick(bool photon_arrived) {
        estimate_ = estimate_ * d_ + (photon_arrived ? i_ : 0.0);
        return estimate_;
    }

    /// Fast-forward through n consecutive empty cycles (B = 0). Closed form
    /// of the recurrence; equals sequential ticks up to rounding.
    double advance_empty(std::uint64_t n) {
        if (n > 0) estimate_ *= std::pow(d_, static_cast<double>(n));
        return estimate_;
    }

    /// Fast-forward through n cycles with a constant per-cycle arrival
    /// expectation B = p (deterministic drive mode).
    double advance_mean(std::uint64_t n, double p) {
        if (n > 0) {
            const double dn = std::pow(d_, static_cast<double>(n));
            estimate_ = estimate_ * dn + p * i_ * (1.0 - dn) / (1.0 - d_);
        }
        return estimate_;
    }

    double estimate() const { return estimate_; }
    double decrement() const { return d_; }
    double increment() const { return i_; }
    double tau_cycle_s() const { return tau_cycle_; }
    double tau_filter_s() const { return tau_filter_; }

private:
    double tau_cycle_, tau_filter_;
    double d_, i_;
    double estimate_;
};

/// Analytic steady-state standard deviation of the estimate under constant
/// Poisson drive: sqrt(lambda*tau_cycle*i^2/(1-d^2)), which tends to
/// sqrt(lambda/(2*tau_filter)) for tau_cycle << tau_filter.
double steady_state_std(const RateEstimator& est, double lambda_cps);

/// Mean estimator reading under constant Poisson drive: the Boolean input
/// collapses multiple arrivals per cycle, so the fixed point is
/// (1 - exp(-lambda*tau_cycle))/tau_cycle, slightly below lambda. Lock
/// references measured through the estimator live at this value.
inline double estimator_fixed_point(double lambda_cps, double tau_cycle_s) {
    return (1.0 - std::exp(-lambda_cps * tau_cycle_s)) / tau_cycle_s;
}

}  // namespace qdlock

#endif
