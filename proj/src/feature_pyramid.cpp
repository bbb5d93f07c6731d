#include "allday/feature_pyramid.hpp"

#include "allday/errors.hpp"

#include <sstream>

namespace allday {

void check_pyramid_shape(const FeaturePyramid& p, int64_t batch, int64_t height, int64_t width) {
  for (size_t i = 0; i < 3; ++i) {
    const std::vector<int64_t> want = {batch, kPyramidChannels[i], height / kPyramidStrides[i],
                                       width / kPyramidStrides[i]};
    if (!p[i].defined() || p[i].sizes() != torch::IntArrayRef(want)) {
      std::ostringstream msg;
      msg << "pyramid level " << i << " has shape " << (p[i].defined() ? p[i].sizes() : torch::IntArrayRef{})
          << ", expected " << torch::IntArrayRef(want);
      throw ConfigError(msg.str());
    }
  }
}

}  // namespace allday
