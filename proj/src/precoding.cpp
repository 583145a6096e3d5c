#include "mbsat/precoding.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "mbsat/error.hpp"

namespace mbsat {

std::string_view to_string(PrecoderType t) {
    switch (t) {
    case PrecoderType::None: return "none";
    case PrecoderType::PAC: return "pac";
    case PrecoderType::SPC: return "spc";
    }
    return "?";
}

PrecoderType parse_precoder(std::string_view s) {
    if (s == "none") return PrecoderType::None;
    if (s == "pac") return PrecoderType::PAC;
    if (s == "spc") return PrecoderType::SPC;
    throw ConfigError("unknown precoder '" + std::string(s) + "' (expected none|pac|spc)");
}

double PowerModel::per_stream_power(std::size_t n_beams) const {
    if (split == PowerSplit::Explicit) return per_stream_w;
    if (n_beams == 0) throw ConfigError("power split over zero beams");
    return psat_w / static_cast<double>(n_beams);
}

void PowerModel::validate() const {
    if (!(psat_w > 0.0) || !std::isfinite(psat_w)) throw ConfigError("power.psat must be > 0");
    if (split == PowerSplit::Explicit && (!(per_stream_w > 0.0) || !std::isfinite(per_stream_w))) {
        throw ConfigError("power.per_stream_w must be > 0 with power.split=explicit");
    }
}

CRowVector equivalent_channel(std::span<const CRowVector> members) {
    if (members.empty()) throw ConfigError("equivalent channel of an empty cluster");
    CRowVector sum = members[0];
    for (std::size_t i = 1; i < members.size(); ++i) sum += members[i];
    return sum / static_cast<double>(members.size());
}

CRowVector equivalent_channel(std::span<const UserChannel> beam_users, std::span<const int> members) {
    if (members.empty()) throw ConfigError("equivalent channel of an empty cluster");
    CRowVector sum = beam_users[members[0]].coefficients;
    for (std::size_t i = 1; i < members.size(); ++i) sum += beam_users[members[i]].coefficients;
    return sum / static_cast<double>(members.size());
}

CMatrix mmse_precoder(const CMatrix& h, const Eigen::VectorXd& alpha) {
    if (alpha.size() != h.cols()) throw ConfigError("mmse_precoder: one regulariser per feed expected");
    for (Eigen::Index j = 0; j < alpha.size(); ++j) {
        if (!(alpha[j] > 0.0)) throw ConfigError("mmse_precoder: regularisers must be > 0");
    }
    CMatrix gram = h.adjoint() * h;
    gram.diagonal().real() += alpha;
    const Eigen::LLT<CMatrix> llt(gram);
    if (llt.info() != Eigen::Success) throw NumericalError("mmse_precoder: regularised Gram matrix not positive definite");
    return llt.solve(h.adjoint());
}

CMatrix mmse_precoder(const CMatrix& h, double alpha) {
    return mmse_precoder(h, Eigen::VectorXd::Constant(h.cols(), alpha));
}

CMatrix normalize_pac(const CMatrix& w) {
    CMatrix out = w;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        const double n = w.row(i).norm();
        if (!(n > 0.0)) throw NumericalError("normalize_pac: row " + std::to_string(i) + " is zero");
        out.row(i) /= n;
    }
    return out;
}

CMatrix normalize_spc(const CMatrix& w) {
    const double tr = w.squaredNorm();
    if (!(tr > 0.0)) throw NumericalError("normalize_spc: zero precoder");
    return w * std::sqrt(static_cast<double>(w.rows()) / tr);
}

CMatrix selection_precoder(std::size_t n_feeds, std::span<const int> active) {
    CMatrix w = CMatrix::Zero(static_cast<Eigen::Index>(n_feeds), static_cast<Eigen::Index>(active.size()));
    for (std::size_t s = 0; s < active.size(); ++s) w(active[s], static_cast<Eigen::Index>(s)) = 1.0;
    return w;
}

CMatrix build_precoder(PrecoderType type, const CMatrix& h_eq, std::span<const int> active, double p) {
    if (static_cast<std::size_t>(h_eq.rows()) != active.size()) {
        throw ConfigError("build_precoder: one active beam per equivalent-channel row expected");
    }
    switch (type) {
    case PrecoderType::None: return selection_precoder(static_cast<std::size_t>(h_eq.cols()), active);
    case PrecoderType::PAC: return normalize_pac(mmse_precoder(h_eq, 1.0 / p));
    case PrecoderType::SPC: return normalize_spc(mmse_precoder(h_eq, 1.0 / p));
    }
    throw ConfigError("build_precoder: bad type");
}

double user_sinr(const CRowVector& h, const CMatrix& w, std::size_t stream, double p) {
    const CRowVector g = h * w;
    double interference = 0.0;
    for (Eigen::Index l = 0; l < g.size(); ++l) {
        if (static_cast<std::size_t>(l) != stream) interference += std::norm(g[l]);
    }
    return p * std::norm(g[static_cast<Eigen::Index>(stream)]) / (1.0 + p * interference);
}

double no_precoding_sinr(const CRowVector& h, std::size_t b, double p) {
    double interference = 0.0;
    for (Eigen::Index l = 0; l < h.size(); ++l) {
        if (static_cast<std::size_t>(l) != b) interference += std::norm(h[l]);
    }
    return p * std::norm(h[static_cast<Eigen::Index>(b)]) / (1.0 + p * interference);
}

} // namespace mbsat
