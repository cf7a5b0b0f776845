#include "mppn/predictability.hpp"

#include "mppn/error.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <future>
#include <numeric>
#include <set>
#include <thread>

namespace mppn {

Binning parse_binning(const std::string& text)
{
    if (text == "equal-frequency" || text == "quantile") return Binning::EqualFrequency;
    if (text == "equal-width" || text == "uniform") return Binning::EqualWidth;
    throw ConfigError("unknown binning mode '" + text + "' (expected equal-frequency or equal-width)");
}

const char* to_string(Binning mode)
{
    return mode == Binning::EqualFrequency ? "equal-frequency" : "equal-width";
}

DiscreteSeries discretize(const Eigen::Ref<const Eigen::VectorXd>& series, int q, Binning mode)
{
    if (q < 2) throw ArgumentError("discretize: Q must be >= 2, got " + std::to_string(q));
    if (series.size() < 2) throw ArgumentError("discretize: need at least two samples");
    if (!series.allFinite()) throw DataError("discretize: series contains NaN or Inf");

    const Index n = series.size();
    DiscreteSeries out;
    out.alphabet = q;
    out.symbols.resize(static_cast<std::size_t>(n));

    if (mode == Binning::EqualFrequency) {
        std::vector<double> sorted(series.data(), series.data() + n);
        std::sort(sorted.begin(), sorted.end());
        // Boundary k closes the first ceil(k n / Q) order statistics.
        std::vector<double> bounds(static_cast<std::size_t>(q - 1));
        for (int k = 1; k < q; ++k) {
            const Index idx = (static_cast<Index>(k) * n + q - 1) / q - 1;
            bounds[k - 1] = sorted[std::max<Index>(idx, 0)];
        }
        for (Index i = 0; i < n; ++i) {
            const auto it = std::lower_bound(bounds.begin(), bounds.end(), series[i]);
            out.symbols[i] = static_cast<int>(it - bounds.begin());
        }
    } else {
        const double lo = series.minCoeff();
        const double hi = series.maxCoeff();
        const double width = hi - lo;
        for (Index i = 0; i < n; ++i) {
            int bin = 0;
            if (width > 0.0) bin = std::min(q - 1, static_cast<int>(std::floor((series[i] - lo) / width * q)));
            out.symbols[i] = bin;
        }
    }
    out.distinct = static_cast<int>(std::set<int>(out.symbols.begin(), out.symbols.end()).size());
    return out;
}

namespace {

std::vector<Index> suffix_array(std::span<const int> s)
{
    const auto n = static_cast<Index>(s.size());
    std::vector<Index> sa(n), rank(n), tmp(n);
    std::iota(sa.begin(), sa.end(), Index{0});
    for (Index i = 0; i < n; ++i) rank[i] = s[i];
    for (Index k = 1;; k <<= 1) {
        auto key = [&](Index i) { return std::pair<Index, Index>(rank[i], i + k < n ? rank[i + k] : -1); };
        std::sort(sa.begin(), sa.end(), [&](Index a, Index b) { return key(a) < key(b); });
        tmp[sa[0]] = 0;
        for (Index r = 1; r < n; ++r) tmp[sa[r]] = tmp[sa[r - 1]] + (key(sa[r - 1]) < key(sa[r]) ? 1 : 0);
        rank.swap(tmp);
        if (rank[sa[n - 1]] == n - 1) break;
    }
    return sa;
}

// Kasai: lcp[r] = lcp(suffix sa[r-1], suffix sa[r]), lcp[0] = 0.
std::vector<Index> lcp_array(std::span<const int> s, const std::vector<Index>& sa)
{
    const auto n = static_cast<Index>(s.size());
    std::vector<Index> rank(n), lcp(n, 0);
    for (Index r = 0; r < n; ++r) rank[sa[r]] = r;
    Index h = 0;
    for (Index i = 0; i < n; ++i) {
        if (rank[i] == 0) {
            h = 0;
            continue;
        }
        const Index j = sa[rank[i] - 1];
        while (i + h < n && j + h < n && s[i + h] == s[j + h]) ++h;
        lcp[rank[i]] = h;
        if (h > 0) --h;
    }
    return lcp;
}

class RangeMin {
public:
    explicit RangeMin(const std::vector<Index>& v)
    {
        const auto n = v.size();
        table_.push_back(v);
        for (std::size_t w = 1; 2 * w <= n; w <<= 1) {
            const auto& prev = table_.back();
            std::vector<Index> next(n - 2 * w + 1);
            for (std::size_t i = 0; i < next.size(); ++i) next[i] = std::min(prev[i], prev[i + w]);
            table_.push_back(std::move(next));
        }
    }

    // Minimum over the closed range [lo, hi].
    Index query(std::size_t lo, std::size_t hi) const
    {
        const auto level = static_cast<std::size_t>(std::bit_width(hi - lo + 1) - 1);
        return std::min(table_[level][lo], table_[level][hi + 1 - (std::size_t{1} << level)]);
    }

private:
    std::vector<std::vector<Index>> table_;
};

} // namespace

std::vector<Index> lz_match_lengths(std::span<const int> symbols)
{
    const auto n = static_cast<Index>(symbols.size());
    if (n == 0) return {};
    const auto sa = suffix_array(symbols);
    const auto lcp = lcp_array(symbols, sa);
    const RangeMin rmq(lcp);

    // Nearest ranks on either side whose suffix starts earlier in the text.
    std::vector<Index> before(n, -1), after(n, -1);
    std::vector<Index> stack;
    for (Index r = 0; r < n; ++r) {
        while (!stack.empty() && sa[stack.back()] > sa[r]) {
            after[stack.back()] = r;
            stack.pop_back();
        }
        before[r] = stack.empty() ? -1 : stack.back();
        stack.push_back(r);
    }

    std::vector<Index> lambda(n);
    for (Index r = 0; r < n; ++r) {
        Index longest = 0;
        if (before[r] >= 0) longest = std::max(longest, rmq.query(before[r] + 1, r));
        if (after[r] >= 0) longest = std::max(longest, rmq.query(r + 1, after[r]));
        lambda[sa[r]] = longest + 1;
    }
    return lambda;
}

double lz_entropy_rate(std::span<const int> symbols)
{
    const auto n = static_cast<Index>(symbols.size());
    if (n < 2) throw ArgumentError("lz_entropy_rate: need at least two symbols");
    const auto lambda = lz_match_lengths(symbols);
    const double total = static_cast<double>(std::accumulate(lambda.begin(), lambda.end(), Index{0}));
    const double nn = static_cast<double>(n);
    return nn * std::log(nn) / total / std::log(2.0);
}

double lz_entropy_rate(const DiscreteSeries& series) { return lz_entropy_rate(std::span<const int>(series.symbols)); }

double binary_entropy(double p)
{
    auto term = [](double x) { return x > 0.0 ? -x * std::log2(x) : 0.0; };
    return term(p) + term(1.0 - p);
}

FanoBound fano_upper_bound(double entropy_bits, int distinct)
{
    if (distinct < 1) throw ArgumentError("fano_upper_bound: N must be >= 1");
    if (distinct == 1) return {1.0, entropy_bits != 0.0};

    const double n = static_cast<double>(distinct);
    const double max_entropy = std::log2(n);
    if (entropy_bits >= max_entropy) return {1.0 / n, entropy_bits > max_entropy};
    if (entropy_bits <= 0.0) return {1.0, entropy_bits < 0.0};

    const double log_rest = std::log2(n - 1.0);
    auto f = [&](double pi) { return binary_entropy(pi) + (1.0 - pi) * log_rest; };
    // f decreases from log2 N at 1/N to 0 at 1.
    double lo = 1.0 / n;
    double hi = 1.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (f(mid) > entropy_bits ? lo : hi) = mid;
    }
    const double pi = std::abs(f(lo) - entropy_bits) <= std::abs(f(hi) - entropy_bits) ? lo : hi;
    return {pi, false};
}

nlohmann::json PredictabilityReport::to_json() const
{
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& v : variates) {
        vars.push_back({{"name", v.name}, {"S_bits", v.entropy_bits}, {"pi_max", v.pi_max}, {"N", v.distinct}});
    }
    return {{"variates", vars}, {"mean_pi_max", mean_pi_max}, {"Q", q}, {"mode", to_string(mode)}};
}

PredictabilityReport dataset_predictability(const Eigen::MatrixXd& values, std::span<const std::string> names,
                                            int q, Binning mode)
{
    if (values.cols() == 0 || values.rows() == 0) throw DataError("predictability: empty dataset");
    if (static_cast<Index>(names.size()) != values.cols()) throw DimensionError("predictability: name count mismatch");

    auto one = [&](Index c) {
        const DiscreteSeries d = discretize(values.col(c), q, mode);
        VariatePredictability v;
        v.name = names[c];
        v.distinct = d.distinct;
        v.entropy_bits = lz_entropy_rate(d);
        const FanoBound bound = fano_upper_bound(v.entropy_bits, d.distinct);
        v.pi_max = bound.pi_max;
        v.clamped = bound.clamped;
        return v;
    };

    const Index channels = values.cols();
    std::vector<VariatePredictability> results(static_cast<std::size_t>(channels));
    std::atomic<Index> next{0};
    auto worker = [&] {
        for (Index c = next++; c < channels; c = next++) results[c] = one(c);
    };
    const auto threads = std::clamp<Index>(std::thread::hardware_concurrency(), 1, channels);
    std::vector<std::future<void>> pool;
    for (Index t = 0; t < threads; ++t) pool.push_back(std::async(std::launch::async, worker));
    for (auto& f : pool) f.get();

    PredictabilityReport report;
    report.q = q;
    report.mode = mode;
    report.variates = std::move(results);
    double total = 0.0;
    for (const auto& v : report.variates) total += v.pi_max;
    report.mean_pi_max = total / static_cast<double>(report.variates.size());
    return report;
}

PredictabilityReport dataset_predictability(const SeriesDataset& dataset, int q, Binning mode)
{
    return dataset_predictability(dataset.values, dataset.names, q, mode);
}

} // namespace mppn
