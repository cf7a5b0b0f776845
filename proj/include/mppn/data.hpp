#pragma once

#include "mppn/tensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mppn {

/// Multivariate series loaded from the benchmark CSV layout.
struct SeriesDataset {
    std::vector<std::string> timestamps;  // empty when the file has no date column
    Eigen::MatrixXd values;               // [T, C]
    std::vector<std::string> names;       // C entries
    Index filled_cells = 0;               // cells imputed by forward fill

    Index length() const { return values.rows(); }
    Index channels() const { return values.cols(); }
};

struct CsvOptions {
    bool strict = true;
    // false: headerless numeric matrix, channels named c0, c1, ...
    bool date_column = true;
};

SeriesDataset read_csv(std::istream& in, const CsvOptions& options = {}, const std::string& source = "<stream>");
SeriesDataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
void write_csv(std::ostream& out, const SeriesDataset& dataset);

// ---------------------------------------------------------------------------
// Chronological splits

enum class SplitScheme { Ett, Standard };  // 6:2:2 and 7:1:2
enum class Split { Train, Val, Test };

const char* to_string(Split split);
Split parse_split(const std::string& text);
SplitScheme parse_split_scheme(const std::string& text);
const char* to_string(SplitScheme scheme);

struct SplitBounds {
    Index train_end = 0;
    Index val_end = 0;
    Index total = 0;

    Index begin(Split s) const;
    Index end(Split s) const;
    Index length(Split s) const { return end(s) - begin(s); }
};

SplitBounds chronological_split(Index total, SplitScheme scheme);

// ---------------------------------------------------------------------------
// Standardization

/// Per-channel z-score fitted on the training rows only.
class Standardizer {
public:
    static constexpr double kStdFloor = 1e-8;

    // strict: a zero-variance channel is a DataError; otherwise its scale is
    // floored at kStdFloor and the channel index is appended to `floored`.
    static Standardizer fit(const Eigen::MatrixXd& values, Index train_end, bool strict = true,
                            std::vector<Index>* floored = nullptr);

    // Rebuilds a fitted standardizer from stored statistics.
    static Standardizer from_stats(Eigen::RowVectorXd mean, Eigen::RowVectorXd scale);

    Eigen::MatrixXd apply(const Eigen::MatrixXd& values) const;
    Eigen::MatrixXd invert(const Eigen::MatrixXd& values) const;

    const Eigen::RowVectorXd& mean() const { return mean_; }
    const Eigen::RowVectorXd& scale() const { return scale_; }

private:
    Eigen::RowVectorXd mean_;
    Eigen::RowVectorXd scale_;
};

// ---------------------------------------------------------------------------
// Sliding windows

struct WindowBatch {
    Tensor inputs;               // [B, L, C]
    Tensor targets;              // [B, H, C]
    std::vector<Index> origins;  // index of the first target row
};

/// Every forecast origin t whose targets [t, t+H) lie inside the split and
/// whose lookback [t-L, t) lies inside the series.
std::vector<Index> window_origins(const SplitBounds& bounds, Split split, Index lookback, Index horizon);

WindowBatch make_batch(const Eigen::MatrixXd& values, std::span<const Index> origins, Index lookback,
                       Index horizon);

/// Batches over one split. Training order is shuffled by `seed`; pass
/// std::nullopt for sequential order.
class WindowStream {
public:
    WindowStream(const Eigen::MatrixXd& values, const SplitBounds& bounds, Split split, Index lookback,
                 Index horizon, Index batch_size, std::optional<std::uint64_t> shuffle_seed = std::nullopt);

    bool next(WindowBatch& batch);
    void reset() { cursor_ = 0; }
    Index window_count() const { return static_cast<Index>(origins_.size()); }
    const std::vector<Index>& origins() const { return origins_; }

private:
    const Eigen::MatrixXd* values_;
    std::vector<Index> origins_;
    Index lookback_;
    Index horizon_;
    Index batch_size_;
    std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Metrics

struct ForecastMetrics {
    double mse = 0.0;
    double mae = 0.0;
    Index windows = 0;
};

class MetricsAccumulator {
public:
    // pred and target: identical shapes [B, H, C] (or [H, C] for one window).
    void add(const Tensor& pred, const Tensor& target);
    ForecastMetrics result() const;

private:
    double squared_ = 0.0;
    double absolute_ = 0.0;
    Index elements_ = 0;
    Index windows_ = 0;
};

ForecastMetrics metrics(std::span<const Tensor> preds, std::span<const Tensor> targets);

} // namespace mppn
