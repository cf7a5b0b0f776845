#include "mppn/periods.hpp"

#include "mppn/error.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <complex>
#include <numeric>
#include <set>

namespace mppn {

std::vector<Index> PeriodSet::periods() const
{
    std::vector<Index> out;
    for (const auto& e : entries) out.push_back(e.period);
    return out;
}

nlohmann::json PeriodSet::to_json() const
{
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : entries) {
        list.push_back({{"period", e.period}, {"frequency", e.frequency}, {"amplitude", e.amplitude}});
    }
    return {{"k", requested}, {"periods", list}};
}

AmplitudeSpectrum amplitude_spectrum(const Eigen::Ref<const Eigen::MatrixXd>& series)
{
    const Index t = series.rows();
    if (t < 4) throw ArgumentError("amplitude_spectrum: need T >= 4, got " + std::to_string(t));
    if (series.cols() < 1) throw ArgumentError("amplitude_spectrum: no channels");
    if (!series.allFinite()) throw DataError("amplitude_spectrum: series contains NaN or Inf");

    const Index bins = t / 2 + 1;
    AmplitudeSpectrum out;
    out.length = t;
    out.amplitudes = Eigen::VectorXd::Zero(bins);

    Eigen::FFT<double> fft;
    std::vector<double> column(static_cast<std::size_t>(t));
    std::vector<std::complex<double>> freq;
    for (Index c = 0; c < series.cols(); ++c) {
        const double mu = series.col(c).mean();
        for (Index i = 0; i < t; ++i) column[i] = series(i, c) - mu;
        fft.fwd(freq, column);
        for (Index f = 0; f < bins; ++f) out.amplitudes[f] += std::abs(freq[f]);
    }
    out.amplitudes /= static_cast<double>(series.cols());
    return out;
}

PeriodSet topk_periods(const AmplitudeSpectrum& spectrum, int k)
{
    if (k < 1) throw ArgumentError("topk_periods: k must be >= 1");
    const Index t = spectrum.length;
    const Index top = t / 2;
    if (spectrum.amplitudes.size() < top + 1) throw DimensionError("topk_periods: spectrum too short");

    std::vector<Index> freqs(static_cast<std::size_t>(top));
    std::iota(freqs.begin(), freqs.end(), Index{1});
    std::stable_sort(freqs.begin(), freqs.end(),
                     [&](Index a, Index b) { return spectrum.amplitudes[a] > spectrum.amplitudes[b]; });

    PeriodSet out;
    out.requested = k;
    std::set<Index> seen;
    for (Index f : freqs) {
        if (static_cast<int>(out.entries.size()) == k) break;
        const Index period = (t + f - 1) / f;
        if (!seen.insert(period).second) continue;
        out.entries.push_back({period, f, spectrum.amplitudes[f]});
    }
    return out;
}

PeriodSet override_periods(const std::vector<Index>& periods)
{
    if (periods.empty()) throw ConfigError("period override needs at least one period");
    PeriodSet out;
    out.requested = static_cast<int>(periods.size());
    std::set<Index> seen;
    for (Index p : periods) {
        if (p < 2) throw ConfigError("period override must be >= 2, got " + std::to_string(p));
        if (!seen.insert(p).second) throw ConfigError("duplicate period override " + std::to_string(p));
        out.entries.push_back({p, 0, 0.0});
    }
    return out;
}

} // namespace mppn
