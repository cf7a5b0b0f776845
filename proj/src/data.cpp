#include "mppn/data.hpp"

#include "mppn/error.hpp"
#include "mppn/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace mppn {

namespace {

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return fields;
}

bool is_missing(const std::string& cell)
{
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

std::optional<double> parse_number(const std::string& cell)
{
    double v = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    if (!cell.empty() && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace

SeriesDataset read_csv(std::istream& in, const CsvOptions& options, const std::string& source)
{
    SeriesDataset ds;
    std::string line;
    Index line_no = 0;
    std::size_t width = 0;
    const std::size_t first_value = options.date_column ? 1 : 0;

    if (options.date_column) {
        while (std::getline(in, line)) {
            ++line_no;
            if (!trim(line).empty()) break;
        }
        if (trim(line).empty()) throw DataError(source + ": empty file");
        auto header = split_fields(line);
        if (header.size() < 2) throw DataError(source + ": header needs a date column and at least one variate");
        ds.names.assign(header.begin() + 1, header.end());
        width = header.size();
    }

    std::vector<std::vector<double>> rows;
    std::vector<std::vector<bool>> missing;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (width == 0) {
            width = fields.size();
            for (std::size_t c = 0; c < width; ++c) ds.names.push_back("c" + std::to_string(c));
        }
        if (fields.size() != width) {
            throw DataError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(width));
        }
        std::vector<double> row(width - first_value);
        std::vector<bool> gap(width - first_value, false);
        for (std::size_t f = first_value; f < width; ++f) {
            const std::size_t c = f - first_value;
            auto value = is_missing(fields[f]) ? std::nullopt : parse_number(fields[f]);
            if (!value) {
                if (options.strict || !is_missing(fields[f])) {
                    throw DataError(source + ": unparseable cell at line " + std::to_string(line_no) + ", column " +
                                    std::to_string(f + 1) + " (" + ds.names[c] + "): '" + fields[f] + "'");
                }
                gap[c] = true;
                row[c] = std::numeric_limits<double>::quiet_NaN();
            } else {
                row[c] = *value;
            }
        }
        if (options.date_column) ds.timestamps.push_back(fields[0]);
        rows.push_back(std::move(row));
        missing.push_back(std::move(gap));
    }
    if (rows.empty()) throw DataError(source + ": no data rows");

    const auto t_len = static_cast<Index>(rows.size());
    const auto c_len = static_cast<Index>(ds.names.size());
    ds.values.resize(t_len, c_len);
    for (Index c = 0; c < c_len; ++c) {
        std::optional<double> last;
        Index leading = 0;
        for (Index t = 0; t < t_len; ++t) {
            if (missing[t][c]) {
                ++ds.filled_cells;
                if (last) {
                    ds.values(t, c) = *last;
                } else {
                    ++leading;
                }
            } else {
                last = rows[t][c];
                ds.values(t, c) = rows[t][c];
                // Leading gaps take the first observed value.
                for (; leading > 0; --leading) ds.values(t - leading, c) = rows[t][c];
            }
        }
        if (!last) throw DataError(source + ": column " + ds.names[c] + " has no values");
    }
    return ds;
}

SeriesDataset load_csv(const std::filesystem::path& path, const CsvOptions& options)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return read_csv(in, options, path.string());
}

void write_csv(std::ostream& out, const SeriesDataset& dataset)
{
    const bool dated = !dataset.timestamps.empty();
    if (dated) {
        out << "date";
        for (const auto& n : dataset.names) out << ',' << n;
        out << '\n';
    }
    char buf[64];
    for (Index t = 0; t < dataset.length(); ++t) {
        if (dated) out << dataset.timestamps[t];
        for (Index c = 0; c < dataset.channels(); ++c) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, dataset.values(t, c));
            if (dated || c > 0) out << ',';
            out.write(buf, ptr - buf);
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------

const char* to_string(Split split)
{
    switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& text)
{
    if (text == "train") return Split::Train;
    if (text == "val" || text == "valid" || text == "validation") return Split::Val;
    if (text == "test") return Split::Test;
    throw ConfigError("unknown split '" + text + "' (expected train, val or test)");
}

SplitScheme parse_split_scheme(const std::string& text)
{
    if (text == "ett") return SplitScheme::Ett;
    if (text == "standard") return SplitScheme::Standard;
    throw ConfigError("unknown split scheme '" + text + "' (expected ett or standard)");
}

const char* to_string(SplitScheme scheme) { return scheme == SplitScheme::Ett ? "ett" : "standard"; }

Index SplitBounds::begin(Split s) const
{
    switch (s) {
    case Split::Train: return 0;
    case Split::Val: return train_end;
    case Split::Test: return val_end;
    }
    return 0;
}

Index SplitBounds::end(Split s) const
{
    switch (s) {
    case Split::Train: return train_end;
    case Split::Val: return val_end;
    case Split::Test: return total;
    }
    return 0;
}

SplitBounds chronological_split(Index total, SplitScheme scheme)
{
    if (total < 3) throw ConfigError("series of length " + std::to_string(total) + " is too short to split");
    const Index train_tenths = scheme == SplitScheme::Ett ? 6 : 7;
    return {total * train_tenths / 10, total * 8 / 10, total};
}

// ---------------------------------------------------------------------------

Standardizer Standardizer::fit(const Eigen::MatrixXd& values, Index train_end, bool strict,
                               std::vector<Index>* floored)
{
    if (train_end < 1 || train_end > values.rows()) throw DataError("standardizer: empty training split");
    const auto train = values.topRows(train_end);
    Standardizer s;
    s.mean_ = train.colwise().mean();
    s.scale_ = ((train.rowwise() - s.mean_).array().square().colwise().sum() / static_cast<double>(train_end))
                   .sqrt()
                   .matrix();
    for (Index c = 0; c < values.cols(); ++c) {
        if (s.scale_[c] < kStdFloor) {
            if (strict) throw DataError("channel " + std::to_string(c) + " has zero variance on the training split");
            s.scale_[c] = kStdFloor;
            if (floored) floored->push_back(c);
        }
    }
    return s;
}

Standardizer Standardizer::from_stats(Eigen::RowVectorXd mean, Eigen::RowVectorXd scale)
{
    if (mean.size() != scale.size()) throw DimensionError("standardizer: mean and scale sizes differ");
    if ((scale.array() <= 0.0).any()) throw DataError("standardizer: scale must be positive");
    Standardizer s;
    s.mean_ = std::move(mean);
    s.scale_ = std::move(scale);
    return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& values) const
{
    if (values.cols() != mean_.size()) throw DimensionError("standardizer: channel count mismatch");
    return ((values.rowwise() - mean_).array().rowwise() / scale_.array()).matrix();
}

Eigen::MatrixXd Standardizer::invert(const Eigen::MatrixXd& values) const
{
    if (values.cols() != mean_.size()) throw DimensionError("standardizer: channel count mismatch");
    return ((values.array().rowwise() * scale_.array()).matrix().rowwise() + mean_);
}

// ---------------------------------------------------------------------------

std::vector<Index> window_origins(const SplitBounds& bounds, Split split, Index lookback, Index horizon)
{
    if (lookback < 1 || horizon < 1) throw ConfigError("lookback and horizon must be >= 1");
    const Index first = std::max(bounds.begin(split), lookback);
    const Index last = bounds.end(split) - horizon;
    if (last < first) {
        throw ConfigError(std::string(to_string(split)) + " split of length " + std::to_string(bounds.length(split)) +
                          " yields no windows for L=" + std::to_string(lookback) + ", H=" + std::to_string(horizon));
    }
    std::vector<Index> origins(static_cast<std::size_t>(last - first + 1));
    for (std::size_t i = 0; i < origins.size(); ++i) origins[i] = first + static_cast<Index>(i);
    return origins;
}

WindowBatch make_batch(const Eigen::MatrixXd& values, std::span<const Index> origins, Index lookback, Index horizon)
{
    const auto b = static_cast<Index>(origins.size());
    const Index c = values.cols();
    Eigen::ArrayXd in(b * lookback * c);
    Eigen::ArrayXd out(b * horizon * c);
    for (Index i = 0; i < b; ++i) {
        const Index t = origins[i];
        if (t - lookback < 0 || t + horizon > values.rows()) throw DimensionError("window outside the series");
        for (Index l = 0; l < lookback; ++l) {
            for (Index ch = 0; ch < c; ++ch) in[(i * lookback + l) * c + ch] = values(t - lookback + l, ch);
        }
        for (Index h = 0; h < horizon; ++h) {
            for (Index ch = 0; ch < c; ++ch) out[(i * horizon + h) * c + ch] = values(t + h, ch);
        }
    }
    return {Tensor::from({b, lookback, c}, std::move(in)), Tensor::from({b, horizon, c}, std::move(out)),
            std::vector<Index>(origins.begin(), origins.end())};
}

WindowStream::WindowStream(const Eigen::MatrixXd& values, const SplitBounds& bounds, Split split, Index lookback,
                           Index horizon, Index batch_size, std::optional<std::uint64_t> shuffle_seed)
    : values_(&values), origins_(window_origins(bounds, split, lookback, horizon)), lookback_(lookback),
      horizon_(horizon), batch_size_(batch_size)
{
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (bounds.total != values.rows()) throw DimensionError("split bounds do not match the series length");
    if (shuffle_seed) {
        SplitMix64 rng(*shuffle_seed);
        rng.shuffle(std::span<Index>(origins_));
    }
}

bool WindowStream::next(WindowBatch& batch)
{
    if (cursor_ >= origins_.size()) return false;
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(batch_size_), origins_.size() - cursor_);
    batch = make_batch(*values_, std::span<const Index>(origins_).subspan(cursor_, count), lookback_, horizon_);
    cursor_ += count;
    return true;
}

// ---------------------------------------------------------------------------

void MetricsAccumulator::add(const Tensor& pred, const Tensor& target)
{
    if (pred.shape() != target.shape()) {
        throw DimensionError("metrics: prediction " + to_string(pred.shape()) + " vs target " +
                             to_string(target.shape()));
    }
    const Eigen::ArrayXd diff = pred.data() - target.data();
    squared_ += diff.square().sum();
    absolute_ += diff.abs().sum();
    elements_ += diff.size();
    windows_ += pred.rank() >= 3 ? pred.dim(0) : 1;
}

ForecastMetrics MetricsAccumulator::result() const
{
    if (elements_ == 0) return {};
    const auto n = static_cast<double>(elements_);
    return {squared_ / n, absolute_ / n, windows_};
}

ForecastMetrics metrics(std::span<const Tensor> preds, std::span<const Tensor> targets)
{
    if (preds.size() != targets.size()) throw DimensionError("metrics: stream lengths differ");
    MetricsAccumulator acc;
    for (std::size_t i = 0; i < preds.size(); ++i) acc.add(preds[i], targets[i]);
    return acc.result();
}

} // namespace mppn
