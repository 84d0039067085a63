#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pupilpipe/raster.hpp"
#include "pupilpipe/types.hpp"

namespace pupilpipe {

struct SegmentParams {
  /// Inclusive upper gray levels for the two masks; by default both come
  /// from a double Otsu split of the histogram (pupil | iris | sclera).
  std::optional<int> pupil_max_gray;
  std::optional<int> iris_max_gray;
};

struct SegmentResult {
  std::optional<Detection> iris;   // box of the iris+pupil component
  std::optional<Detection> pupil;  // box of the pupil component
  std::vector<std::string> missing;  // classes with no component (>= 4 px)
  int pupil_threshold = 0;
  int iris_threshold = 0;

  std::vector<Detection> detections() const;
};

/// Classical two-threshold segmenter: dark pixels form the pupil component,
/// dark+mid pixels the iris component; each class takes its largest
/// 4-connected component. Box edges are refined to subpixel precision from
/// boundary-pixel intensities; the score is the component circularity
/// 4*pi*area/perimeter^2 clamped to [0,1].
SegmentResult segment_raster(const Raster& raster, const SegmentParams& params = {});

/// Split class [lo..t] vs [t+1..hi] maximizing between-class variance;
/// returns lo when the range carries no contrast.
int otsu_threshold(const std::array<std::int64_t, 256>& histogram, int lo, int hi);

}  // namespace pupilpipe
