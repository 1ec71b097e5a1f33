#include "qdlock/detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace qdlock {

double instantaneous_rate(const DetectionChannel& channel, double nu_ghz) {
    if (!(channel.r_qd_cps >= 0.0) || !(channel.dark_cps >= 0.0))
        throw ConfigError("DetectionChannel: rates must be non-negative");
    return channel.curve.transmission(nu_ghz) * channel.r_qd_cps;
}

std::size_t EventTrain::count(EventTag tag) const {
    std::size_t n = 0;
    for (const auto& e : events)
        if (e.tag == tag) ++n;
    return n;
}

void EventTrain::write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("EventTrain: cannot write " + path);
    out << "# t_s tag\n";
    char buf[64];
    for (const auto& e : events) {
        std::snprintf(buf, sizeof buf, "%.12g %s\n", e.t_s,
                      e.tag == EventTag::signal ? "signal" : "dark");
        out << buf;
    }
}

EventTrain generate_events(const std::function<double(double)>& rate_fn_cps,
                           double t_begin_s, double t_end_s, double rate_bound_cps,
                           Rng& rng) {
    if (!(t_end_s >= t_begin_s))
        throw ConfigError("generate_events: empty or inverted window");
    if (rate_bound_cps < 0.0)
        throw ConfigError("generate_events: rate bound must be non-negative");

    EventTrain train;
    train.t_begin_s = t_begin_s;
    train.t_end_s = t_end_s;
    if (rate_bound_cps == 0.0) return train;

    std::exponential_distribution<double> gap(rate_bound_cps);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double t = t_begin_s;
    for (;;) {
        t += gap(rng);
        if (t >= t_end_s) break;
        const double r = rate_fn_cps(t);
        if (r > rate_bound_cps * (1.0 + 1e-12))
            throw PhysicsError("generate_events: rate exceeds the thinning bound");
        if (u01(rng) * rate_bound_cps < r)
            train.events.push_back({t, EventTag::signal});
    }
    return train;
}

EventTrain merge_dark(const EventTrain& train, double dark_rate_cps,
                      double t_begin_s, double t_end_s, Rng& rng) {
    if (dark_rate_cps < 0.0)
        throw ConfigError("merge_dark: dark rate must be non-negative");
    EventTrain out;
    out.t_begin_s = t_begin_s;
    out.t_end_s = t_end_s;
    out.events = train.events;
    if (dark_rate_cps > 0.0) {
        std::exponential_distribution<double> gap(dark_rate_cps);
        double t = t_begin_s;
        for (;;) {
            t += gap(rng);
            if (t >= t_end_s) break;
            out.events.push_back({t, EventTag::dark});
        }
        std::sort(out.events.begin(), out.events.end(),
                  [](const Event& a, const Event& b) { return a.t_s < b.t_s; });
    }
    return out;
}

}  // namespace qdlock
