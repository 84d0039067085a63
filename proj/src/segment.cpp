#include "pupilpipe/segment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pupilpipe {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::array<std::int64_t, 256> histogram_of(const Raster& raster) {
  std::array<std::int64_t, 256> hist{};
  const std::uint8_t* data = raster.data();
  for (Eigen::Index i = 0; i < raster.size(); ++i) ++hist[data[i]];
  return hist;
}

// Median gray of histogram mass restricted to [lo, hi]; -1 when empty.
int band_median(const std::array<std::int64_t, 256>& hist, int lo, int hi) {
  std::int64_t total = 0;
  for (int v = lo; v <= hi; ++v) total += hist[v];
  if (total == 0) return -1;
  std::int64_t seen = 0;
  for (int v = lo; v <= hi; ++v) {
    seen += hist[v];
    if (2 * seen >= total) return v;
  }
  return hi;
}

struct Component {
  long area = 0;
  long boundary = 0;
  int min_row = 0, max_row = 0, min_col = 0, max_col = 0;
  double centroid_row = 0, centroid_col = 0;
  std::vector<std::uint8_t> mask;  // rows*cols, 1 = member
};

// Largest 4-connected component of {value <= max_gray}; empty when the best
// component is smaller than 4 px.
std::optional<Component> largest_component(const Raster& raster, int max_gray) {
  const int rows = static_cast<int>(raster.rows());
  const int cols = static_cast<int>(raster.cols());
  const auto at = [cols](int r, int c) { return static_cast<std::size_t>(r) * cols + c; };

  std::vector<std::uint8_t> in_mask(static_cast<std::size_t>(rows) * cols, 0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (raster(r, c) <= max_gray) in_mask[at(r, c)] = 1;

  std::vector<std::int32_t> labels(in_mask.size(), -1);
  std::vector<std::size_t> stack;
  std::int32_t next_label = 0;
  std::int32_t best_label = -1;
  long best_area = 0;

  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const std::size_t start = at(r, c);
      if (!in_mask[start] || labels[start] >= 0) continue;
      const std::int32_t label = next_label++;
      long area = 0;
      stack.push_back(start);
      labels[start] = label;
      while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        ++area;
        const int pr = static_cast<int>(p / cols);
        const int pc = static_cast<int>(p % cols);
        const int nr[4] = {pr - 1, pr + 1, pr, pr};
        const int nc[4] = {pc, pc, pc - 1, pc + 1};
        for (int k = 0; k < 4; ++k) {
          if (nr[k] < 0 || nr[k] >= rows || nc[k] < 0 || nc[k] >= cols) continue;
          const std::size_t q = at(nr[k], nc[k]);
          if (in_mask[q] && labels[q] < 0) {
            labels[q] = label;
            stack.push_back(q);
          }
        }
      }
      if (area > best_area) {
        best_area = area;
        best_label = label;
      }
    }

  if (best_label < 0 || best_area < 4) return std::nullopt;

  Component comp;
  comp.area = best_area;
  comp.mask.assign(in_mask.size(), 0);
  comp.min_row = rows;
  comp.min_col = cols;
  comp.max_row = -1;
  comp.max_col = -1;
  double sum_row = 0, sum_col = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (labels[at(r, c)] != best_label) continue;
      comp.mask[at(r, c)] = 1;
      comp.min_row = std::min(comp.min_row, r);
      comp.max_row = std::max(comp.max_row, r);
      comp.min_col = std::min(comp.min_col, c);
      comp.max_col = std::max(comp.max_col, c);
      sum_row += r;
      sum_col += c;
    }
  comp.centroid_row = sum_row / comp.area;
  comp.centroid_col = sum_col / comp.area;
  for (int r = comp.min_row; r <= comp.max_row; ++r)
    for (int c = comp.min_col; c <= comp.max_col; ++c) {
      if (!comp.mask[at(r, c)]) continue;
      const bool edge = r == 0 || r == rows - 1 || c == 0 || c == cols - 1 ||
                        !comp.mask[at(r - 1, c)] || !comp.mask[at(r + 1, c)] ||
                        !comp.mask[at(r, c - 1)] || !comp.mask[at(r, c + 1)];
      if (edge) ++comp.boundary;
    }
  return comp;
}

// Estimated covered fraction of a boundary pixel from its intensity,
// relative to the inside/outside reference grays.
double edge_alpha(double value, double in_ref, double out_ref) {
  if (out_ref <= in_ref + 1.0) return 1.0;
  return std::clamp((out_ref - value) / (out_ref - in_ref), 0.0, 1.0);
}

// Subpixel box: scan the rows (columns) around the component centroid and
// place each edge from the partial coverage of the two pixels straddling it.
BoundingBox refine_box(const Raster& raster, const Component& comp, double in_ref,
                       double out_ref) {
  const int rows = static_cast<int>(raster.rows());
  const int cols = static_cast<int>(raster.cols());
  const auto at = [cols](int r, int c) { return static_cast<std::size_t>(r) * cols + c; };

  double left_sum = 0, right_sum = 0;
  int horiz_n = 0;
  const int r0 = static_cast<int>(std::llround(comp.centroid_row));
  for (int r = r0 - 1; r <= r0 + 1; ++r) {
    if (r < comp.min_row || r > comp.max_row) continue;
    int cl = -1, cr = -1;
    for (int c = comp.min_col; c <= comp.max_col; ++c)
      if (comp.mask[at(r, c)]) {
        if (cl < 0) cl = c;
        cr = c;
      }
    if (cl < 0) continue;
    double left = cl + 1.0 - edge_alpha(raster(r, cl), in_ref, out_ref);
    if (cl > 0) left -= edge_alpha(raster(r, cl - 1), in_ref, out_ref);
    double right = cr + edge_alpha(raster(r, cr), in_ref, out_ref);
    if (cr + 1 < cols) right += edge_alpha(raster(r, cr + 1), in_ref, out_ref);
    left_sum += left;
    right_sum += right;
    ++horiz_n;
  }

  double top_sum = 0, bottom_sum = 0;
  int vert_n = 0;
  const int c0 = static_cast<int>(std::llround(comp.centroid_col));
  for (int c = c0 - 1; c <= c0 + 1; ++c) {
    if (c < comp.min_col || c > comp.max_col) continue;
    int rt = -1, rb = -1;
    for (int r = comp.min_row; r <= comp.max_row; ++r)
      if (comp.mask[at(r, c)]) {
        if (rt < 0) rt = r;
        rb = r;
      }
    if (rt < 0) continue;
    double top = rt + 1.0 - edge_alpha(raster(rt, c), in_ref, out_ref);
    if (rt > 0) top -= edge_alpha(raster(rt - 1, c), in_ref, out_ref);
    double bottom = rb + edge_alpha(raster(rb, c), in_ref, out_ref);
    if (rb + 1 < rows) bottom += edge_alpha(raster(rb + 1, c), in_ref, out_ref);
    top_sum += top;
    bottom_sum += bottom;
    ++vert_n;
  }

  BoundingBox box;
  box.x1 = horiz_n > 0 ? left_sum / horiz_n : comp.min_col;
  box.x2 = horiz_n > 0 ? right_sum / horiz_n : comp.max_col + 1.0;
  box.y1 = vert_n > 0 ? top_sum / vert_n : comp.min_row;
  box.y2 = vert_n > 0 ? bottom_sum / vert_n : comp.max_row + 1.0;
  if (box.x2 <= box.x1) box.x2 = box.x1 + 1.0;  // >= 4 px components stay sane
  if (box.y2 <= box.y1) box.y2 = box.y1 + 1.0;
  return box;
}

double circularity(const Component& comp) {
  if (comp.boundary == 0) return 0.0;
  const double score = 4.0 * kPi * static_cast<double>(comp.area) /
                       (static_cast<double>(comp.boundary) * static_cast<double>(comp.boundary));
  return std::clamp(score, 0.0, 1.0);
}

}  // namespace

int otsu_threshold(const std::array<std::int64_t, 256>& histogram, int lo, int hi) {
  std::int64_t total = 0;
  double weighted = 0;
  for (int v = lo; v <= hi; ++v) {
    total += histogram[v];
    weighted += static_cast<double>(histogram[v]) * v;
  }
  if (total == 0) return lo;

  int best = lo;
  double best_var = -1.0;
  std::int64_t n0 = 0;
  double sum0 = 0;
  for (int t = lo; t < hi; ++t) {
    n0 += histogram[t];
    sum0 += static_cast<double>(histogram[t]) * t;
    const std::int64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const double mu0 = sum0 / n0;
    const double mu1 = (weighted - sum0) / n1;
    const double var = static_cast<double>(n0) * static_cast<double>(n1) * (mu0 - mu1) *
                       (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best = t;
    }
  }
  return best;
}

std::vector<Detection> SegmentResult::detections() const {
  std::vector<Detection> out;
  if (iris) out.push_back(*iris);
  if (pupil) out.push_back(*pupil);
  return out;
}

SegmentResult segment_raster(const Raster& raster, const SegmentParams& params) {
  SegmentResult result;
  const auto hist = histogram_of(raster);

  result.iris_threshold = params.iris_max_gray.value_or(otsu_threshold(hist, 0, 255));
  result.pupil_threshold =
      params.pupil_max_gray.value_or(otsu_threshold(hist, 0, result.iris_threshold));
  result.pupil_threshold = std::min(result.pupil_threshold, result.iris_threshold);

  const int pupil_ref = band_median(hist, 0, result.pupil_threshold);
  const int iris_ref = band_median(hist, result.pupil_threshold + 1, result.iris_threshold);
  const int sclera_ref = band_median(hist, result.iris_threshold + 1, 255);

  if (const auto comp = largest_component(raster, result.iris_threshold)) {
    Detection d;
    d.class_label = DetectionClass::iris;
    d.score = circularity(*comp);
    d.box = refine_box(raster, *comp, iris_ref >= 0 ? iris_ref : result.iris_threshold,
                       sclera_ref >= 0 ? sclera_ref : 255.0);
    result.iris = d;
  } else {
    result.missing.emplace_back("iris");
  }

  if (const auto comp = largest_component(raster, result.pupil_threshold)) {
    Detection d;
    d.class_label = DetectionClass::pupil;
    d.score = circularity(*comp);
    d.box = refine_box(raster, *comp, pupil_ref >= 0 ? pupil_ref : 0.0,
                       iris_ref >= 0 ? iris_ref : result.iris_threshold);
    result.pupil = d;
  } else {
    result.missing.emplace_back("pupil");
  }
  return result;
}

}  // namespace pupilpipe
