#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mbsat {

double to_db(double linear);
double from_db(double db);

struct ModCodRow {
    double threshold_db = 0.0;
    double efficiency = 0.0; ///< bit/s/Hz
    std::string label;
};

/// SINR -> spectral efficiency step function. Thresholds and efficiencies strictly increase.
class ModCodTable {
public:
    ModCodTable(std::vector<ModCodRow> rows, std::string name);

    /// CSV with header `es_n0_dB,spectral_efficiency`; `#` starts a comment.
    static ModCodTable load(const std::filesystem::path& path);
    static ModCodTable parse(std::istream& in, const std::string& source);

    /// Efficiency of the highest row with threshold <= sinr_db, 0 below the first row.
    double efficiency_at_db(double sinr_db) const;

    const std::vector<ModCodRow>& rows() const { return rows_; }
    const std::string& name() const { return name_; }
    double lowest_threshold_db() const { return rows_.front().threshold_db; }

private:
    std::vector<ModCodRow> rows_;
    std::string name_;
};

/// DVB-S2 and DVB-S2X operating points for 64800-bit frames on the AWGN channel,
/// as tabulated by the standards (ideal Es/N0 thresholds, efficiency without pilots).
/// Not monotone: some points are dominated by others.
const std::vector<ModCodRow>& dvbs2x_normal_frame_points();

/// Rows that no other row beats with a lower-or-equal threshold and higher-or-equal efficiency.
std::vector<ModCodRow> efficient_envelope(std::vector<ModCodRow> rows);

/// Built-in default: the efficient envelope of dvbs2x_normal_frame_points().
std::shared_ptr<const ModCodTable> default_modcod_table();

double rate_from_sinr(double sinr_linear, const ModCodTable& table);
double rate_from_sinr_db(double sinr_db, const ModCodTable& table);

/// log2(1 + sinr).
double shannon_rate(double sinr_linear);

enum class RateModel { ModCod, Shannon };

std::string_view to_string(RateModel m);
RateModel parse_rate_model(std::string_view s);

struct RateFunction {
    RateModel model = RateModel::ModCod;
    std::shared_ptr<const ModCodTable> table = default_modcod_table();

    double operator()(double sinr_linear) const;
};

struct ClusterLinkResult {
    int beam = 0;
    int cluster = 0;  ///< index in the beam's partition
    int frame = 0;
    bool reserve = false;
    std::vector<int> users; ///< global user ids, same order as member_sinr_db
    double serving_sinr_db = 0.0;
    std::vector<double> member_sinr_db;
    std::vector<double> loss_db; ///< member SINR minus serving SINR
    double rate = 0.0;
    bool outage = false;

    std::size_t size() const { return member_sinr_db.size(); }
};

ClusterLinkResult cluster_link_result(std::span<const double> member_sinr_linear, const RateFunction& rate);

/// Population standard deviation of the member losses, dB.
double loss_stddev_db(const ClusterLinkResult& r);

} // namespace mbsat
