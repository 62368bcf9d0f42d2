#include "dsrfoc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

namespace dsrfoc {

double thd(const SignalWindow& win, int n_harmonics) {
    if (n_harmonics < 1) throw std::invalid_argument("thd: n_harmonics must be >= 1");
    if (!(win.fundamental > 0.0) || !(win.sample_rate > 0.0))
        throw std::invalid_argument("thd: sample_rate and fundamental must be > 0");
    if (!(win.sample_rate > 2.0 * n_harmonics * win.fundamental))
        throw std::invalid_argument("thd: sample rate below Nyquist for requested harmonics");

    const double samples_per_period = win.sample_rate / win.fundamental;
    const auto periods = static_cast<long>(std::floor(
        static_cast<double>(win.samples.size()) / samples_per_period));
    if (periods < 2) throw std::invalid_argument("thd: window shorter than 2 fundamental periods");

    // Trim the tail so the correlation runs over whole periods.
    const auto n = static_cast<std::size_t>(std::llround(periods * samples_per_period));
    const std::size_t count = std::min(n, win.samples.size());

    double rms_sq = 0.0;
    for (std::size_t i = 0; i < count; ++i) rms_sq += win.samples[i] * win.samples[i];
    const double rms = std::sqrt(rms_sq / static_cast<double>(count));

    const double w0 = 2.0 * M_PI * win.fundamental / win.sample_rate;
    double fundamental_mag = 0.0;
    double harmonics_sq = 0.0;
    for (int k = 1; k <= n_harmonics; ++k) {
        std::complex<double> acc{0.0, 0.0};
        const double wk = w0 * k;
        for (std::size_t i = 0; i < count; ++i)
            acc += win.samples[i] * std::polar(1.0, -wk * static_cast<double>(i));
        const double mag = 2.0 * std::abs(acc) / static_cast<double>(count);
        if (k == 1)
            fundamental_mag = mag;
        else
            harmonics_sq += mag * mag;
    }

    if (!(fundamental_mag > 1e-9 * rms) || fundamental_mag == 0.0)
        throw NoFundamentalError("thd: no fundamental component in window");

    return std::sqrt(harmonics_sq) / fundamental_mag;
}

TrackingStats tracking_metrics(std::span<const double> reference,
                               std::span<const double> measured) {
    if (reference.size() != measured.size())
        throw std::invalid_argument("tracking_metrics: length mismatch");
    if (reference.empty()) throw std::invalid_argument("tracking_metrics: empty input");

    double err_sq = 0.0;
    double meas_sq = 0.0;
    double err_max = -std::numeric_limits<double>::infinity();
    double err_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double err = reference[i] - measured[i];
        err_sq += err * err;
        meas_sq += measured[i] * measured[i];
        err_max = std::max(err_max, err);
        err_min = std::min(err_min, err);
    }
    const auto n = static_cast<double>(reference.size());
    return {std::sqrt(err_sq / n), err_max - err_min, std::sqrt(meas_sq / n)};
}

}  // namespace dsrfoc
