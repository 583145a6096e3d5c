#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mbsat/channel.hpp"

namespace mbsat {

using CMatrix = Eigen::MatrixXcd;
using CRowVector = Eigen::RowVectorXcd;

/// What the transmitter does with the equivalent channel.
/// None is the reference without precoding: every feed radiates only its own beam's stream.
enum class PrecoderType { None, PAC, SPC };

std::string_view to_string(PrecoderType t);
PrecoderType parse_precoder(std::string_view s);

enum class PowerSplit { Equal, Explicit };

struct PowerModel {
    double psat_w = 90.0;
    PowerSplit split = PowerSplit::Equal;
    double per_stream_w = 0.0; ///< used when split == Explicit

    /// p: P_sat / N_B under the equal split.
    double per_stream_power(std::size_t n_beams) const;
    void validate() const;
};

/// Componentwise mean of the members' channel rows.
CRowVector equivalent_channel(std::span<const CRowVector> members);
CRowVector equivalent_channel(std::span<const UserChannel> beam_users, std::span<const int> members);

/// W = (H^H H + diag(alpha))^-1 H^H for an S x N_B equivalent channel, giving N_B x S.
/// Solved through a Cholesky factorisation of the regularised Gram matrix.
CMatrix mmse_precoder(const CMatrix& h_eq, const Eigen::VectorXd& alpha);
CMatrix mmse_precoder(const CMatrix& h_eq, double alpha);

/// Rows scaled to unit norm (one row per feed).
CMatrix normalize_pac(const CMatrix& w);
/// Scaled so that tr(W W^H) equals the number of feeds.
CMatrix normalize_spc(const CMatrix& w);

/// N_B x S matrix routing stream s to feed active[s] only.
CMatrix selection_precoder(std::size_t n_feeds, std::span<const int> active_beams);

/// Full precoder for one frame. `active_beams[s]` is the beam of stream s, i.e. of row s of h_eq.
CMatrix build_precoder(PrecoderType type, const CMatrix& h_eq, std::span<const int> active_beams,
                       double per_stream_power);

/// p |h w_s|^2 / (1 + p sum_{l != s} |h w_l|^2).
double user_sinr(const CRowVector& h, const CMatrix& w, std::size_t stream, double per_stream_power);

/// user_sinr with W = I over all feeds.
double no_precoding_sinr(const CRowVector& h, std::size_t serving_beam, double per_stream_power);

} // namespace mbsat
