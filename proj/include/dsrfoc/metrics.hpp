#pragma once

#include <span>
#include <stdexcept>

namespace dsrfoc {

/// Uniformly sampled signal segment taken at steady state.
struct SignalWindow {
    std::span<const double> samples;
    double sample_rate = 0.0;  // [Hz]
    double fundamental = 0.0;  // [Hz]
};

class NoFundamentalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Total harmonic distortion sqrt(sum |A_k|^2, k=2..n) / |A_1|, with A_k the
/// Fourier coefficient at k*fundamental obtained by direct correlation over
/// the window trimmed to whole fundamental periods.
/// Requires >= 2 full periods and sample_rate > 2*n_harmonics*fundamental;
/// throws NoFundamentalError when |A_1| falls below 1e-9 of the signal RMS.
double thd(const SignalWindow& win, int n_harmonics);

struct TrackingStats {
    double rmse = 0.0;
    double peak_to_peak_error = 0.0;
    double rms_measured = 0.0;
};

/// rmse = sqrt(mean((ref-meas)^2)); peak_to_peak_error = max(ref-meas)-min(ref-meas);
/// rms_measured = sqrt(mean(meas^2)). Throws std::invalid_argument on length
/// mismatch or empty input.
TrackingStats tracking_metrics(std::span<const double> reference,
                               std::span<const double> measured);

}  // namespace dsrfoc
