#pragma once

#include "mppn/data.hpp"
#include "mppn/predictability.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mppn {

/// Everything a run needs. Serialises to flat key=value text (the default)
/// or JSON; both forms round-trip exactly, doubles included.
struct RunConfig {
    std::string model = "mppn";  // mppn | dlinear | nlinear | naive

    // model geometry
    Index lookback = 336;
    Index horizon = 96;
    Index hidden = 48;
    std::vector<Index> resolutions{1, 3, 4, 6};
    int top_k = 2;
    std::vector<Index> periods;  // empty: detect from the training split
    bool overlap = false;
    Index window = 25;           // DLinear moving average

    // data
    std::string data;
    SplitScheme split_scheme = SplitScheme::Ett;
    bool strict = true;
    bool date_column = true;
    Index channels = 0;          // filled in from the dataset by train()
    std::vector<std::string> channel_names;

    // optimisation
    double lr = 1e-3;
    double weight_decay = 1e-5;
    int max_epochs = 30;
    int patience = 3;
    Index batch_size = 32;
    std::uint64_t seed = 0;

    // analyze
    int q = 10;
    Binning binning = Binning::EqualFrequency;

    // outputs
    std::string checkpoint = "model.ckpt";

    /// Applies one `key=value` assignment. Unknown keys and bad values are
    /// ConfigErrors.
    void set(const std::string& key, const std::string& value);

    std::string to_text() const;
    nlohmann::json to_json() const;

    static RunConfig from_text(const std::string& text);
    static RunConfig from_json(const nlohmann::json& j);
    /// Accepts either format; JSON is recognised by a leading '{'.
    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::filesystem::path& path);

    bool operator==(const RunConfig&) const = default;
};

/// Known model kinds.
bool is_model_kind(const std::string& kind);

} // namespace mppn
