#pragma once

#include "mppn/data.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace mppn {

enum class Binning { EqualFrequency, EqualWidth };

Binning parse_binning(const std::string& text);
const char* to_string(Binning mode);

/// Integer symbols in [0, alphabet) with the count of distinct symbols seen.
struct DiscreteSeries {
    std::vector<int> symbols;
    int alphabet = 0;  // Q
    int distinct = 0;  // N

    Index size() const { return static_cast<Index>(symbols.size()); }
};

/// Maps a real series onto Q bins. Equal-frequency bins use empirical
/// quantile boundaries; a value equal to a boundary falls in the lower bin.
DiscreteSeries discretize(const Eigen::Ref<const Eigen::VectorXd>& series, int q,
                          Binning mode = Binning::EqualFrequency);

/// Lempel-Ziv match lengths: entry i is the length of the shortest substring
/// starting at i that does not occur starting at any earlier position
/// (n - i + 1 when every substring starting at i occurs earlier).
std::vector<Index> lz_match_lengths(std::span<const int> symbols);

/// Entropy-rate estimate in bits per symbol: n ln(n) / sum(Lambda) / ln(2).
double lz_entropy_rate(std::span<const int> symbols);
double lz_entropy_rate(const DiscreteSeries& series);

double binary_entropy(double p);

struct FanoBound {
    double pi_max = 1.0;
    bool clamped = false;  // S was outside [0, log2 N]
};

/// Largest accuracy Pi in [1/N, 1] with H(Pi) + (1 - Pi) log2(N - 1) = S.
FanoBound fano_upper_bound(double entropy_bits, int distinct);

struct VariatePredictability {
    std::string name;
    double entropy_bits = 0.0;
    double pi_max = 1.0;
    int distinct = 1;
    bool clamped = false;
};

struct PredictabilityReport {
    std::vector<VariatePredictability> variates;
    double mean_pi_max = 0.0;
    int q = 0;
    Binning mode = Binning::EqualFrequency;

    nlohmann::json to_json() const;
};

/// Runs discretize -> entropy rate -> Fano bound for every column.
PredictabilityReport dataset_predictability(const Eigen::MatrixXd& values, std::span<const std::string> names,
                                            int q, Binning mode = Binning::EqualFrequency);
PredictabilityReport dataset_predictability(const SeriesDataset& dataset, int q,
                                            Binning mode = Binning::EqualFrequency);

} // namespace mppn
