#include <fstream>
#include <sstream>
#include <system_error>

#include "mbsat/cli.hpp"
#include "mbsat/error.hpp"
#include "text_util.hpp"

namespace mbsat::cli {

using nlohmann::json;

SummaryRow summary_row(const GridPoint& g, const RateReport& r) {
    return {std::string(to_string(g.config.algorithm)),
            std::string(to_string(g.config.metric)),
            std::string(to_string(g.config.precoder)),
            g.config.cluster_size,
            g.config.density,
            g.config.power.psat_w,
            r.headline_rate(g.config.include_reserve),
            r.outage_frac};
}

static const char* kCsvHeader = "algorithm,metric,precoder,K,rho,psat,avg_rate,outage_frac";

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    using detail::format_double;
    out << kCsvHeader << '\n';
    for (const SummaryRow& r : rows) {
        out << r.algorithm << ',' << r.metric << ',' << r.precoder << ',' << r.K << ',' << format_double(r.rho) << ','
            << format_double(r.psat) << ',' << format_double(r.avg_rate) << ',' << format_double(r.outage_frac) << '\n';
    }
}

std::vector<SummaryRow> read_summary_csv(std::istream& in, const std::string& source) {
    std::vector<SummaryRow> rows;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line) || detail::trim(line) != kCsvHeader) {
        throw ParseError(source, 1, std::string("expected header '") + kCsvHeader + "'");
    }
    ++line_no;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 8) throw ParseError(source, line_no, "expected 8 fields");
        try {
            rows.push_back({f[0], f[1], f[2], static_cast<int>(detail::parse_int(f[3])), detail::parse_double(f[4]),
                            detail::parse_double(f[5]), detail::parse_double(f[6]), detail::parse_double(f[7])});
        } catch (const std::invalid_argument& e) {
            throw ParseError(source, line_no, e.what());
        }
    }
    return rows;
}

namespace {

json cdf_json(const std::vector<double>& samples) {
    const CumulativeSummary s = cdf_summary(samples);
    return {{"probability", s.probability}, {"value_db", s.value}};
}

json cluster_json(const ClusterLinkResult& c) {
    return {{"frame", c.frame},           {"beam", c.beam},
            {"cluster", c.cluster},       {"reserve", c.reserve},
            {"users", c.users},           {"serving_sinr_db", c.serving_sinr_db},
            {"member_sinr_db", c.member_sinr_db}, {"loss_db", c.loss_db},
            {"rate", c.rate},             {"outage", c.outage}};
}

} // namespace

json point_json(const GridPoint& g, const RateReport& r, bool with_detail) {
    json hist = json::array();
    for (const auto& [size, count] : r.size_histogram) {
        hist.push_back({{"size", size},
                        {"count", count},
                        {"rel_freq", r.clusters ? static_cast<double>(count) / static_cast<double>(r.clusters) : 0.0}});
    }
    json quartiles = json::array();
    for (const auto& q : r.iteration_sigma_quartiles) quartiles.push_back({q[0], q[1], q[2]});
    json j = {
        {"id", g.id()},
        {"index", g.index},
        {"axes", g.axes},
        {"params",
         {{"algorithm", to_string(g.config.algorithm)},
          {"metric", to_string(g.config.metric)},
          {"precoder", to_string(g.config.precoder)},
          {"K", g.config.cluster_size},
          {"rho", g.config.density},
          {"psat", g.config.power.psat_w},
          {"include_reserve", g.config.include_reserve}}},
        {"aggregates",
         {{"avg_rate", r.avg_rate},
          {"avg_rate_se", r.avg_rate_se},
          {"avg_rate_with_reserve", r.avg_rate_with_reserve},
          {"headline_rate", r.headline_rate(g.config.include_reserve)},
          {"outage_frac", r.outage_frac},
          {"iterations", r.iterations},
          {"clusters", r.clusters},
          {"reserve_clusters", r.reserve_clusters},
          {"kmeans_nonconverged", r.kmeans_nonconverged}}},
        {"serving_sinr_cdf", cdf_json(r.serving_sinr_db)},
        {"sigma_dgamma_cdf", cdf_json(r.sigma_dgamma_db)},
        {"cluster_size_histogram", hist},
        {"iteration_rates", r.iteration_rates},
        {"iteration_sigma_quartiles", quartiles},
        {"warnings", r.warnings},
    };
    if (with_detail) {
        json iters = json::array();
        for (std::size_t i = 0; i < r.detail.size(); ++i) {
            json clusters = json::array();
            for (const auto& c : r.detail[i].clusters) clusters.push_back(cluster_json(c));
            iters.push_back({{"iteration", i},
                             {"frames", r.detail[i].frames},
                             {"users_per_beam", r.detail[i].users_per_beam},
                             {"clusters", clusters}});
        }
        j["detail"] = iters;
    }
    return j;
}

SummaryRow summary_row(const json& p) {
    try {
        const json& a = p.at("params");
        const json& g = p.at("aggregates");
        return {a.at("algorithm").get<std::string>(), a.at("metric").get<std::string>(),
                a.at("precoder").get<std::string>(), a.at("K").get<int>(),
                a.at("rho").get<double>(),           a.at("psat").get<double>(),
                g.at("headline_rate").get<double>(), g.at("outage_frac").get<double>()};
    } catch (const json::exception& e) {
        throw ParseError(p.value("id", std::string("<point>")), 0, std::string("malformed point record: ") + e.what());
    }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw IoError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void ensure_output_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw IoError("cannot create output directory '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
    }
    const auto probe = dir / ".write_probe";
    {
        std::ofstream out(probe);
        if (!out) throw IoError("output directory '" + dir.string() + "' is not writable");
    }
    std::filesystem::remove(probe, ec);
}

} // namespace mbsat::cli
