#include "mbsat/link.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "mbsat/error.hpp"
#include "text_util.hpp"

namespace mbsat {

double to_db(double linear) {
    return linear > 0.0 ? 10.0 * std::log10(linear) : -std::numeric_limits<double>::infinity();
}

double from_db(double db) { return std::pow(10.0, db / 10.0); }

ModCodTable::ModCodTable(std::vector<ModCodRow> rows, std::string name) : rows_(std::move(rows)), name_(std::move(name)) {
    if (rows_.empty()) throw ConfigError("modcod table '" + name_ + "' is empty");
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& r = rows_[i];
        if (!std::isfinite(r.threshold_db) || !std::isfinite(r.efficiency) || r.efficiency <= 0.0) {
            throw ConfigError("modcod table '" + name_ + "': row " + std::to_string(i + 1) + " is not finite and positive");
        }
        if (i > 0 && !(r.threshold_db > rows_[i - 1].threshold_db && r.efficiency > rows_[i - 1].efficiency)) {
            throw ConfigError("modcod table '" + name_ + "': row " + std::to_string(i + 1) +
                              " does not increase in both threshold and efficiency");
        }
    }
}

ModCodTable ModCodTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open modcod table " + path.string());
    return parse(in, path.string());
}

ModCodTable ModCodTable::parse(std::istream& in, const std::string& source) {
    std::vector<ModCodRow> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto fields = detail::split_csv(t);
        if (!header) {
            if (fields.size() != 2 || fields[0] != "es_n0_dB" || fields[1] != "spectral_efficiency") {
                throw ParseError(source, line_no, "expected header 'es_n0_dB,spectral_efficiency'");
            }
            header = true;
            continue;
        }
        if (fields.size() != 2) throw ParseError(source, line_no, "expected 2 fields");
        ModCodRow r;
        try {
            r.threshold_db = detail::parse_double(fields[0]);
            r.efficiency = detail::parse_double(fields[1]);
        } catch (const std::invalid_argument&) {
            throw ParseError(source, line_no, "malformed number");
        }
        if (!rows.empty() && !(r.threshold_db > rows.back().threshold_db && r.efficiency > rows.back().efficiency)) {
            throw ParseError(source, line_no, "rows must increase in both threshold and efficiency");
        }
        rows.push_back(r);
    }
    if (!header) throw ParseError(source, line_no, "missing header");
    if (rows.empty()) throw ParseError(source, line_no, "no rows");
    return ModCodTable(std::move(rows), source);
}

double ModCodTable::efficiency_at_db(double sinr_db) const {
    // Inclusive comparison; the slack absorbs dB round trips like to_db(from_db(x)).
    constexpr double slack = 1e-9;
    const auto it = std::upper_bound(rows_.begin(), rows_.end(), sinr_db + slack,
                                     [](double v, const ModCodRow& r) { return v < r.threshold_db; });
    if (it == rows_.begin()) return 0.0;
    return std::prev(it)->efficiency;
}

const std::vector<ModCodRow>& dvbs2x_normal_frame_points() {
    static const std::vector<ModCodRow> rows = {
        {-2.35, 0.490243, "QPSK 1/4"},       {-1.24, 0.656448, "QPSK 1/3"},
        {-0.30, 0.789412, "QPSK 2/5"},       {1.00, 0.988858, "QPSK 1/2"},
        {2.23, 1.188304, "QPSK 3/5"},        {3.10, 1.322253, "QPSK 2/3"},
        {4.03, 1.487473, "QPSK 3/4"},        {4.68, 1.587196, "QPSK 4/5"},
        {5.18, 1.654663, "QPSK 5/6"},        {6.20, 1.766451, "QPSK 8/9"},
        {6.42, 1.788612, "QPSK 9/10"},       {5.50, 1.779991, "8PSK 3/5"},
        {6.62, 1.980636, "8PSK 2/3"},        {7.91, 2.228124, "8PSK 3/4"},
        {9.35, 2.478562, "8PSK 5/6"},        {10.69, 2.646012, "8PSK 8/9"},
        {10.98, 2.679207, "8PSK 9/10"},      {8.97, 2.637201, "16APSK 2/3"},
        {10.21, 2.966728, "16APSK 3/4"},     {11.03, 3.165623, "16APSK 4/5"},
        {11.61, 3.300184, "16APSK 5/6"},     {12.89, 3.523143, "16APSK 8/9"},
        {13.13, 3.567342, "16APSK 9/10"},    {12.73, 3.703295, "32APSK 3/4"},
        {13.64, 3.951571, "32APSK 4/5"},     {14.28, 4.119540, "32APSK 5/6"},
        {15.69, 4.397854, "32APSK 8/9"},     {16.05, 4.453027, "32APSK 9/10"},
        {-2.85, 0.434841, "QPSK 2/9"},       {-2.03, 0.567805, "QPSK 13/45"},
        {0.22, 0.889135, "QPSK 9/20"},       {1.45, 1.088581, "QPSK 11/20"},
        {4.73, 1.647211, "8APSK 5/9-L"},     {5.13, 1.713601, "8APSK 26/45-L"},
        {6.12, 1.896173, "8PSK 23/36"},      {7.02, 2.062148, "8PSK 25/36"},
        {7.49, 2.145136, "8PSK 13/18"},      {5.97, 1.972253, "16APSK 1/2-L"},
        {6.55, 2.104850, "16APSK 8/15-L"},   {6.84, 2.193247, "16APSK 5/9-L"},
        {7.51, 2.281645, "16APSK 26/45"},    {7.80, 2.370043, "16APSK 3/5"},
        {8.10, 2.458441, "16APSK 28/45"},    {8.38, 2.524739, "16APSK 23/36"},
        {8.43, 2.635236, "16APSK 2/3-L"},    {9.27, 2.745734, "16APSK 25/36"},
        {9.71, 2.856231, "16APSK 13/18"},    {10.65, 3.077225, "16APSK 7/9"},
        {11.99, 3.386618, "16APSK 77/90"},   {11.10, 3.289502, "32APSK 2/3-L"},
        {11.75, 3.510192, "32APSK 32/45"},   {12.17, 3.620536, "32APSK 11/15"},
        {13.05, 3.841226, "32APSK 7/9"},     {13.98, 4.206428, "64APSK 32/45-L"},
        {14.81, 4.338659, "64APSK 11/15"},   {15.47, 4.603122, "64APSK 7/9"},
        {15.87, 4.735354, "64APSK 4/5"},     {16.55, 4.936639, "64APSK 5/6"},
        {17.73, 5.163248, "128APSK 3/4"},    {18.53, 5.355556, "128APSK 7/9"},
        {16.98, 5.065690, "256APSK 29/45-L"}, {17.24, 5.241514, "256APSK 2/3-L"},
        {18.10, 5.417338, "256APSK 31/45-L"}, {18.59, 5.593162, "256APSK 32/45"},
        {18.84, 5.768987, "256APSK 11/15-L"}, {19.57, 5.900855, "256APSK 3/4"},
    };
    return rows;
}

std::vector<ModCodRow> efficient_envelope(std::vector<ModCodRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const ModCodRow& a, const ModCodRow& b) {
        return a.threshold_db < b.threshold_db || (a.threshold_db == b.threshold_db && a.efficiency > b.efficiency);
    });
    std::vector<ModCodRow> out;
    for (auto& r : rows) {
        if (out.empty() || (r.efficiency > out.back().efficiency && r.threshold_db > out.back().threshold_db)) {
            out.push_back(std::move(r));
        }
    }
    return out;
}

std::shared_ptr<const ModCodTable> default_modcod_table() {
    static const auto table = std::make_shared<const ModCodTable>(
        efficient_envelope(dvbs2x_normal_frame_points()), "dvbs2x-normal-envelope");
    return table;
}

double rate_from_sinr_db(double sinr_db, const ModCodTable& table) { return table.efficiency_at_db(sinr_db); }

double rate_from_sinr(double sinr_linear, const ModCodTable& table) {
    return rate_from_sinr_db(to_db(sinr_linear), table);
}

double shannon_rate(double sinr_linear) { return std::log2(1.0 + sinr_linear); }

std::string_view to_string(RateModel m) { return m == RateModel::ModCod ? "modcod" : "shannon"; }

RateModel parse_rate_model(std::string_view s) {
    if (s == "modcod") return RateModel::ModCod;
    if (s == "shannon") return RateModel::Shannon;
    throw ConfigError("unknown rate model '" + std::string(s) + "' (expected modcod|shannon)");
}

double RateFunction::operator()(double sinr_linear) const {
    if (model == RateModel::Shannon) return shannon_rate(sinr_linear);
    return rate_from_sinr(sinr_linear, *table);
}

ClusterLinkResult cluster_link_result(std::span<const double> sinr, const RateFunction& rate) {
    if (sinr.empty()) throw ConfigError("cluster_link_result needs at least one member");
    ClusterLinkResult r;
    const double serving = *std::min_element(sinr.begin(), sinr.end());
    r.serving_sinr_db = to_db(serving);
    r.member_sinr_db.reserve(sinr.size());
    r.loss_db.reserve(sinr.size());
    for (double g : sinr) {
        const double db = to_db(g);
        r.member_sinr_db.push_back(db);
        r.loss_db.push_back(db - r.serving_sinr_db);
    }
    r.rate = rate(serving);
    r.outage = !(r.rate > 0.0);
    return r;
}

double loss_stddev_db(const ClusterLinkResult& r) {
    const auto n = static_cast<double>(r.loss_db.size());
    if (r.loss_db.empty()) return 0.0;
    double mean = 0.0;
    for (double x : r.loss_db) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : r.loss_db) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / n);
}

} // namespace mbsat
