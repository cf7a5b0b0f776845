#pragma once

#include "mppn/tensor.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <vector>

namespace mppn {

/// Channel-averaged DFT magnitudes at integer frequencies 0..floor(T/2).
struct AmplitudeSpectrum {
    Eigen::VectorXd amplitudes;
    Index length = 0;  // T
};

struct DetectedPeriod {
    Index period = 0;
    Index frequency = 0;
    double amplitude = 0.0;
};

/// Distinct periods in descending amplitude order.
struct PeriodSet {
    std::vector<DetectedPeriod> entries;
    int requested = 0;  // k

    std::vector<Index> periods() const;
    nlohmann::json to_json() const;
};

/// Spectrum of a [T, C] matrix: each column is mean-centred, transformed, and
/// the magnitudes averaged over columns.
AmplitudeSpectrum amplitude_spectrum(const Eigen::Ref<const Eigen::MatrixXd>& series);

/// Picks frequencies in 1..floor(T/2) by descending amplitude (ties go to the
/// lower frequency), maps each to ceil(T/f), and keeps the first k distinct.
PeriodSet topk_periods(const AmplitudeSpectrum& spectrum, int k);

/// Explicit periods that bypass FFT selection (non-periodic datasets).
PeriodSet override_periods(const std::vector<Index>& periods);

} // namespace mppn
