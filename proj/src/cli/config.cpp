#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "mbsat/cli.hpp"
#include "mbsat/error.hpp"
#include "text_util.hpp"

namespace mbsat::cli {

SweepAxes Experiment::effective_axes() const {
    SweepAxes a = SweepAxes::single(base);
    if (!axes.algorithms.empty()) a.algorithms = axes.algorithms;
    if (!axes.metrics.empty()) a.metrics = axes.metrics;
    if (!axes.precoders.empty()) a.precoders = axes.precoders;
    if (!axes.rho.empty()) a.rho = axes.rho;
    if (!axes.psat.empty()) a.psat = axes.psat;
    if (!axes.K.empty()) a.K = axes.K;
    return a;
}

namespace {

using detail::format_double;

struct Context {
    std::string key;
    std::filesystem::path base_dir;

    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(key + ": " + what); }

    double number(const std::string& v) const {
        try {
            const double x = detail::parse_double(v);
            if (!std::isfinite(x)) fail("expected a finite number, got '" + v + "'");
            return x;
        } catch (const std::invalid_argument&) {
            fail("expected a number, got '" + v + "'");
        }
    }
    int integer(const std::string& v) const {
        try {
            const long long x = detail::parse_int(v);
            if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) fail("out of range");
            return static_cast<int>(x);
        } catch (const std::invalid_argument&) {
            fail("expected an integer, got '" + v + "'");
        }
    }
    std::uint64_t u64(const std::string& v) const {
        try {
            return detail::parse_u64(v);
        } catch (const std::invalid_argument&) {
            fail("expected an unsigned 64-bit integer, got '" + v + "'");
        }
    }
    bool boolean(const std::string& v) const {
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        fail("expected true|false, got '" + v + "'");
    }
    std::filesystem::path path(const std::string& v) const {
        if (v.empty()) return {};
        std::filesystem::path p(v);
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    template <class F>
    auto parsed(F&& f, const std::string& v) const {
        try {
            return f(v);
        } catch (const ConfigError& e) {
            fail(e.what());
        }
    }
    template <class F>
    auto list(F&& item, const std::string& v) const {
        std::vector<decltype(item(std::string{}))> out;
        for (const std::string& s : detail::split_csv(v)) {
            if (s.empty()) fail("empty entry in list '" + v + "'");
            out.push_back(item(s));
        }
        if (out.empty()) fail("empty axis");
        return out;
    }
};

template <class T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& f) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + f(v[i]);
    return s;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

struct Key {
    std::string name;
    std::function<void(Experiment&, const std::string&, const Context&)> set;
    std::function<std::string(const Experiment&)> get;
};

#define NUM_KEY(NAME, FIELD)                                                                                 \
    Key {                                                                                                    \
        NAME, [](Experiment& e, const std::string& v, const Context& c) { e.base.FIELD = c.number(v); },     \
            [](const Experiment& e) { return format_double(e.base.FIELD); }                                  \
    }
#define INT_KEY(NAME, FIELD)                                                                                 \
    Key {                                                                                                    \
        NAME, [](Experiment& e, const std::string& v, const Context& c) { e.base.FIELD = c.integer(v); },    \
            [](const Experiment& e) { return std::to_string(e.base.FIELD); }                                 \
    }
#define BOOL_KEY(NAME, FIELD)                                                                                \
    Key {                                                                                                    \
        NAME, [](Experiment& e, const std::string& v, const Context& c) { e.base.FIELD = c.boolean(v); },    \
            [](const Experiment& e) { return bool_text(e.base.FIELD); }                                      \
    }
#define PATH_KEY(NAME, FIELD)                                                                                \
    Key {                                                                                                    \
        NAME, [](Experiment& e, const std::string& v, const Context& c) { e.base.FIELD = c.path(v); },       \
            [](const Experiment& e) { return e.base.FIELD.generic_string(); }                                \
    }

const std::vector<Key>& registry() {
    static const std::vector<Key> keys = {
        {"layout.source",
         [](Experiment& e, const std::string& v, const Context& c) {
             if (v == "hex") e.base.layout.source = LayoutSource::Hex;
             else if (v == "file") e.base.layout.source = LayoutSource::File;
             else c.fail("expected hex|file, got '" + v + "'");
         },
         [](const Experiment& e) { return std::string(e.base.layout.source == LayoutSource::Hex ? "hex" : "file"); }},
        PATH_KEY("layout.path", layout.path),
        INT_KEY("layout.rings", layout.rings),
        NUM_KEY("layout.beam_radius_km", layout.beam_radius_km),
        NUM_KEY("layout.center_lat", layout.center.lat_deg),
        NUM_KEY("layout.center_lon", layout.center.lon_deg),
        NUM_KEY("layout.satellite_lon", layout.satellite_lon_deg),
        {"layout.rounding",
         [](Experiment& e, const std::string& v, const Context& c) {
             if (v == "round") e.base.layout.rounding = Rounding::Round;
             else if (v == "floor") e.base.layout.rounding = Rounding::Floor;
             else c.fail("expected round|floor, got '" + v + "'");
         },
         [](const Experiment& e) { return std::string(e.base.layout.rounding == Rounding::Round ? "round" : "floor"); }},
        NUM_KEY("users.density", density),
        {"cluster.algorithm",
         [](Experiment& e, const std::string& v, const Context& c) { e.base.algorithm = c.parsed(parse_algorithm, v); },
         [](const Experiment& e) { return std::string(to_string(e.base.algorithm)); }},
        INT_KEY("cluster.K", cluster_size),
        {"cluster.metric",
         [](Experiment& e, const std::string& v, const Context& c) { e.base.metric = c.parsed(parse_metric, v); },
         [](const Experiment& e) { return std::string(to_string(e.base.metric)); }},
        NUM_KEY("cluster.kmeans_tol", kmeans.tol),
        INT_KEY("cluster.kmeans_max_iter", kmeans.max_iter),
        {"cluster.scaling",
         [](Experiment& e, const std::string& v, const Context& c) {
             if (v == "none") e.base.scale_features = false;
             else if (v == "unit_variance") e.base.scale_features = true;
             else c.fail("expected none|unit_variance, got '" + v + "'");
         },
         [](const Experiment& e) { return std::string(e.base.scale_features ? "unit_variance" : "none"); }},
        {"precoder.type",
         [](Experiment& e, const std::string& v, const Context& c) { e.base.precoder = c.parsed(parse_precoder, v); },
         [](const Experiment& e) { return std::string(to_string(e.base.precoder)); }},
        NUM_KEY("power.psat", power.psat_w),
        {"power.split",
         [](Experiment& e, const std::string& v, const Context& c) {
             if (v == "equal") e.base.power.split = PowerSplit::Equal;
             else if (v == "explicit") e.base.power.split = PowerSplit::Explicit;
             else c.fail("expected equal|explicit, got '" + v + "'");
         },
         [](const Experiment& e) { return std::string(e.base.power.split == PowerSplit::Equal ? "equal" : "explicit"); }},
        NUM_KEY("power.per_stream_w", power.per_stream_w),
        NUM_KEY("link.frequency_hz", link.carrier_frequency_hz),
        NUM_KEY("link.rx_diameter_m", link.rx_antenna_diameter_m),
        NUM_KEY("link.rx_efficiency", link.rx_antenna_efficiency),
        NUM_KEY("link.losses_db", link.antenna_losses_db),
        NUM_KEY("link.noise_temp_k", link.noise_temperature_k),
        NUM_KEY("link.bandwidth_hz", link.user_bandwidth_hz),
        {"antenna.mode",
         [](Experiment& e, const std::string& v, const Context& c) {
             if (v == "tapered") e.base.antenna.mode = PatternMode::TaperedAperture;
             else if (v == "table") e.base.antenna.mode = PatternMode::GainTable;
             else c.fail("expected tapered|table, got '" + v + "'");
         },
         [](const Experiment& e) {
             return std::string(e.base.antenna.mode == PatternMode::TaperedAperture ? "tapered" : "table");
         }},
        NUM_KEY("antenna.peak_gain_dbi", antenna.peak_gain_dbi),
        NUM_KEY("antenna.edge_pedestal", antenna.edge_pedestal),
        PATH_KEY("antenna.table", antenna_table),
        {"channel.phase_per",
         [](Experiment& e, const std::string& v, const Context& c) {
             if (v == "feed") e.base.phase_per = PhasePer::Feed;
             else if (v == "beam") e.base.phase_per = PhasePer::Beam;
             else c.fail("expected feed|beam, got '" + v + "'");
         },
         [](const Experiment& e) { return std::string(e.base.phase_per == PhasePer::Feed ? "feed" : "beam"); }},
        {"rate.model",
         [](Experiment& e, const std::string& v, const Context& c) { e.base.rate_model = c.parsed(parse_rate_model, v); },
         [](const Experiment& e) { return std::string(to_string(e.base.rate_model)); }},
        PATH_KEY("rate.modcod_table", modcod_table),
        INT_KEY("sim.iterations", iterations),
        {"sim.seed", [](Experiment& e, const std::string& v, const Context& c) { e.base.seed = c.u64(v); },
         [](const Experiment& e) { return std::to_string(e.base.seed); }},
        BOOL_KEY("sim.include_reserve", include_reserve),
        BOOL_KEY("sim.common_random_numbers", common_random_numbers),
        {"sweep.algorithm",
         [](Experiment& e, const std::string& v, const Context& c) {
             e.axes.algorithms = c.list([&](const std::string& s) { return c.parsed(parse_algorithm, s); }, v);
         },
         [](const Experiment& e) {
             return join<Algorithm>(e.effective_axes().algorithms, [](const Algorithm& a) { return std::string(to_string(a)); });
         }},
        {"sweep.metric",
         [](Experiment& e, const std::string& v, const Context& c) {
             e.axes.metrics = c.list([&](const std::string& s) { return c.parsed(parse_metric, s); }, v);
         },
         [](const Experiment& e) {
             return join<Metric>(e.effective_axes().metrics, [](const Metric& m) { return std::string(to_string(m)); });
         }},
        {"sweep.precoder",
         [](Experiment& e, const std::string& v, const Context& c) {
             e.axes.precoders = c.list([&](const std::string& s) { return c.parsed(parse_precoder, s); }, v);
         },
         [](const Experiment& e) {
             return join<PrecoderType>(e.effective_axes().precoders,
                                       [](const PrecoderType& p) { return std::string(to_string(p)); });
         }},
        {"sweep.rho",
         [](Experiment& e, const std::string& v, const Context& c) {
             e.axes.rho = c.list([&](const std::string& s) { return c.number(s); }, v);
         },
         [](const Experiment& e) { return join<double>(e.effective_axes().rho, format_double); }},
        {"sweep.psat",
         [](Experiment& e, const std::string& v, const Context& c) {
             e.axes.psat = c.list([&](const std::string& s) { return c.number(s); }, v);
         },
         [](const Experiment& e) { return join<double>(e.effective_axes().psat, format_double); }},
        {"sweep.K",
         [](Experiment& e, const std::string& v, const Context& c) {
             e.axes.K = c.list([&](const std::string& s) { return c.integer(s); }, v);
         },
         [](const Experiment& e) {
             return join<int>(e.effective_axes().K, [](const int& k) { return std::to_string(k); });
         }},
    };
    return keys;
}

#undef NUM_KEY
#undef INT_KEY
#undef BOOL_KEY
#undef PATH_KEY

const Key* find_key(std::string_view name) {
    for (const Key& k : registry()) {
        if (k.name == name) return &k;
    }
    return nullptr;
}

void apply(Experiment& e, const std::string& key, const std::string& value, const std::filesystem::path& base_dir) {
    const Key* k = find_key(key);
    if (!k) throw ConfigError("unknown configuration key '" + key + "'");
    k->set(e, value, Context{key, base_dir});
}

} // namespace

void apply_setting(Experiment& e, std::string_view assignment, const std::filesystem::path& base_dir) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
    }
    apply(e, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)), base_dir);
}

Experiment parse_config(std::istream& in, const std::string& source, const std::filesystem::path& base_dir,
                        const std::vector<std::string>& overrides) {
    Experiment e;
    std::string line, section;
    std::size_t line_no = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ParseError(source, line_no, "unterminated section header");
            section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError(source, line_no, "expected key = value");
        std::string key = detail::trim(std::string_view(t).substr(0, eq));
        if (!section.empty()) key = section + "." + key;
        if (!seen.insert(key).second) throw ParseError(source, line_no, "duplicate key '" + key + "'");
        try {
            apply(e, key, detail::trim(std::string_view(t).substr(eq + 1)), base_dir);
        } catch (const ConfigError& err) {
            throw ParseError(source, line_no, err.what());
        }
    }
    for (const std::string& o : overrides) apply_setting(e, o);
    return e;
}

Experiment parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    if (path.empty()) {
        std::istringstream empty;
        return parse_config(empty, "<defaults>", {}, overrides);
    }
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    return parse_config(in, path.string(), path.parent_path(), overrides);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const Key& k : registry()) out.push_back(k.name);
    return out;
}

std::vector<std::pair<std::string, std::string>> config_echo(const Experiment& e) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const Key& k : registry()) out.emplace_back(k.name, k.get(e));
    return out;
}

} // namespace mbsat::cli
