// Instantaneous detection rate through the filter (rate = T(nu) * R_QD) and
// stochastic photon event generation with dark counts.
#ifndef QDLOCK_DETECTION_HPP
#define QDLOCK_DETECTION_HPP

#include <functional>
#include <string>
#include <vector>

#include "qdlock/common.hpp"
#include "qdlock/spectra.hpp"

namespace qdlock {

struct DetectionChannel {
    double r_qd_cps = 0.0;   // emitter rate at the detector, efficiency included
    double dark_cps = 0.0;
    FilterCurve curve;       // emitter-convolved transmission
};

/// rate = T_QD(nu) * R_QD, in cps. Throws outside the curve range.
double instantaneous_rate(const DetectionChannel& channel, double nu_ghz);

enum class EventTag : std::uint8_t { signal, dark };

struct Event {
    double t_s = 0.0;
    EventTag tag = EventTag::signal;
};

/// Strictly increasing timestamps inside the generating window.
struct EventTrain {
    std::vector<Event> events;
    double t_begin_s = 0.0;
    double t_end_s = 0.0;

    std::size_t count(EventTag tag) const;
    /// One timestamp (12 significant digits) and tag per line.
    void write(const std::string& path) const;
};

/// Inhomogeneous Poisson process by thinning. rate_fn must stay below
/// rate_bound on the window; a violation detected during thinning throws.
EventTrain generate_events(const std::function<double(double)>& rate_fn_cps,
                           double t_begin_s, double t_end_s, double rate_bound_cps,
                           Rng& rng);

/// Adds a homogeneous dark-count train and re-sorts; signal tags survive.
EventTrain merge_dark(const EventTrain& train, double dark_rate_cps,
                      double t_begin_s, double t_end_s, Rng& rng);

}  // namespace qdlock

#endif
