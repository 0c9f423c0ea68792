#ifndef AOI_CHANNEL_HPP
#define AOI_CHANNEL_HPP

#include <string>

#include "aoi/distributions.hpp"

namespace aoi {

/// Forward channel with i.i.d. failures (probability alpha) and random delay Y,
/// reliable backward channel with random delay X.
struct ChannelModel {
  double alpha;
  DelayDistribution forward;
  DelayDistribution backward;

  ChannelModel(double failure_probability, DelayDistribution forward_delay, DelayDistribution backward_delay)
      : alpha(failure_probability), forward(std::move(forward_delay)), backward(std::move(backward_delay)) {
    validate_failure_probability(alpha);
    if (!(forward.mean() > 0.0)) throw InvalidParameter("forward delay must have a positive mean");
  }

  /// Same channel with the acknowledgement delay removed.
  ChannelModel without_backward_delay() const { return {alpha, forward, DelayDistribution::constant(0.0)}; }

  /// Same channel with the failure probability forced to zero.
  ChannelModel error_free() const { return {0.0, forward, backward}; }

  double mean_attempts() const { return 1.0 / (1.0 - alpha); }

  std::string describe() const {
    return "forward=" + forward.to_string() + " backward=" + backward.to_string() +
           " alpha=" + detail::format_number(alpha);
  }
};

}  // namespace aoi

#endif  // AOI_CHANNEL_HPP
