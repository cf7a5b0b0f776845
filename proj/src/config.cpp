#include "mppn/config.hpp"

#include "mppn/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mppn {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected)
{
    throw ConfigError("config: bad value '" + value + "' for " + key + " (expected " + expected + ")");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* expected)
{
    T out{};
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) bad_value(key, value, expected);
    return out;
}

bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value, "true or false");
}

std::string parse_string(const std::string& key, const std::string& value)
{
    if (value.empty() || value.front() != '"') return value;
    try {
        return nlohmann::json::parse(value).get<std::string>();
    } catch (const nlohmann::json::exception&) {
        bad_value(key, value, "a quoted string");
    }
}

std::vector<Index> parse_index_list(const std::string& key, const std::string& value)
{
    std::string body = value;
    if (!body.empty() && body.front() == '[') {
        if (body.back() != ']') bad_value(key, value, "a list of integers");
        body = body.substr(1, body.size() - 2);
    }
    std::vector<Index> out;
    if (trim(body).empty()) return out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<Index>(key, trim(item), "a list of integers"));
    return out;
}

std::vector<std::string> parse_names(const std::string& key, const std::string& value)
{
    if (!value.empty() && value.front() == '[') {
        try {
            return nlohmann::json::parse(value).get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception&) {
            bad_value(key, value, "a JSON array of strings");
        }
    }
    std::vector<std::string> out;
    if (value.empty()) return out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

std::string format_double(double v)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string format_list(const std::vector<Index>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

} // namespace

bool is_model_kind(const std::string& kind)
{
    return kind == "mppn" || kind == "dlinear" || kind == "nlinear" || kind == "naive";
}

void RunConfig::set(const std::string& raw_key, const std::string& raw_value)
{
    const std::string key = trim(raw_key);
    const std::string value = trim(raw_value);
    if (key == "model") {
        model = parse_string(key, value);
        if (!is_model_kind(model)) bad_value(key, value, "mppn, dlinear, nlinear or naive");
    } else if (key == "lookback") {
        lookback = parse_number<Index>(key, value, "an integer");
    } else if (key == "horizon") {
        horizon = parse_number<Index>(key, value, "an integer");
    } else if (key == "hidden") {
        hidden = parse_number<Index>(key, value, "an integer");
    } else if (key == "resolutions") {
        resolutions = parse_index_list(key, value);
    } else if (key == "top_k") {
        top_k = parse_number<int>(key, value, "an integer");
    } else if (key == "periods") {
        periods = parse_index_list(key, value);
    } else if (key == "overlap") {
        overlap = parse_bool(key, value);
    } else if (key == "window") {
        window = parse_number<Index>(key, value, "an integer");
    } else if (key == "data") {
        data = parse_string(key, value);
    } else if (key == "split_scheme") {
        split_scheme = parse_split_scheme(parse_string(key, value));
    } else if (key == "strict") {
        strict = parse_bool(key, value);
    } else if (key == "date_column") {
        date_column = parse_bool(key, value);
    } else if (key == "channels") {
        channels = parse_number<Index>(key, value, "an integer");
    } else if (key == "channel_names") {
        channel_names = parse_names(key, value);
    } else if (key == "lr") {
        lr = parse_number<double>(key, value, "a number");
    } else if (key == "weight_decay") {
        weight_decay = parse_number<double>(key, value, "a number");
    } else if (key == "max_epochs") {
        max_epochs = parse_number<int>(key, value, "an integer");
    } else if (key == "patience") {
        patience = parse_number<int>(key, value, "an integer");
    } else if (key == "batch_size") {
        batch_size = parse_number<Index>(key, value, "an integer");
    } else if (key == "seed") {
        seed = parse_number<std::uint64_t>(key, value, "an unsigned integer");
    } else if (key == "q") {
        q = parse_number<int>(key, value, "an integer");
    } else if (key == "binning") {
        binning = parse_binning(parse_string(key, value));
    } else if (key == "checkpoint") {
        checkpoint = parse_string(key, value);
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

std::string RunConfig::to_text() const
{
    auto quoted = [](const std::string& s) { return nlohmann::json(s).dump(); };
    std::ostringstream os;
    os << "model=" << model << '\n'
       << "lookback=" << lookback << '\n'
       << "horizon=" << horizon << '\n'
       << "hidden=" << hidden << '\n'
       << "resolutions=" << format_list(resolutions) << '\n'
       << "top_k=" << top_k << '\n'
       << "periods=" << format_list(periods) << '\n'
       << "overlap=" << (overlap ? "true" : "false") << '\n'
       << "window=" << window << '\n'
       << "data=" << quoted(data) << '\n'
       << "split_scheme=" << to_string(split_scheme) << '\n'
       << "strict=" << (strict ? "true" : "false") << '\n'
       << "date_column=" << (date_column ? "true" : "false") << '\n'
       << "channels=" << channels << '\n'
       << "channel_names=" << nlohmann::json(channel_names).dump() << '\n'
       << "lr=" << format_double(lr) << '\n'
       << "weight_decay=" << format_double(weight_decay) << '\n'
       << "max_epochs=" << max_epochs << '\n'
       << "patience=" << patience << '\n'
       << "batch_size=" << batch_size << '\n'
       << "seed=" << seed << '\n'
       << "q=" << q << '\n'
       << "binning=" << to_string(binning) << '\n'
       << "checkpoint=" << quoted(checkpoint) << '\n';
    return os.str();
}

nlohmann::json RunConfig::to_json() const
{
    return {{"model", model},
            {"lookback", lookback},
            {"horizon", horizon},
            {"hidden", hidden},
            {"resolutions", resolutions},
            {"top_k", top_k},
            {"periods", periods},
            {"overlap", overlap},
            {"window", window},
            {"data", data},
            {"split_scheme", to_string(split_scheme)},
            {"strict", strict},
            {"date_column", date_column},
            {"channels", channels},
            {"channel_names", channel_names},
            {"lr", lr},
            {"weight_decay", weight_decay},
            {"max_epochs", max_epochs},
            {"patience", patience},
            {"batch_size", batch_size},
            {"seed", seed},
            {"q", q},
            {"binning", to_string(binning)},
            {"checkpoint", checkpoint}};
}

RunConfig RunConfig::from_text(const std::string& text)
{
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(number) + ": expected key=value, got '" + t + "'");
        }
        c.set(t.substr(0, eq), t.substr(eq + 1));
    }
    return c;
}

RunConfig RunConfig::from_json(const nlohmann::json& j)
{
    if (!j.is_object()) throw ConfigError("config: JSON document must be an object");
    RunConfig c;
    for (const auto& [key, value] : j.items()) {
        // Strings are passed quoted so they survive unchanged.
        c.set(key, value.is_boolean() ? (value.get<bool>() ? "true" : "false") : value.dump());
    }
    return c;
}

RunConfig RunConfig::parse(const std::string& text)
{
    const std::string t = trim(text);
    if (!t.empty() && t.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(t);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config: invalid JSON: ") + e.what());
        }
        return from_json(j);
    }
    return from_text(text);
}

RunConfig RunConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

} // namespace mppn
