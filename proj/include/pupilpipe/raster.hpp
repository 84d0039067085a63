#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <stdexcept>

namespace pupilpipe {

template <typename Scalar>
using ImageT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 8-bit grayscale image; raster(y, x), origin top-left.
using Raster = ImageT<std::uint8_t>;

struct InvalidSpec : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Synthetic eye: concentric sclera / iris / pupil disks, an optional
/// eyelid band over the top of the iris, and i.i.d. Gaussian pixel noise.
struct EyeRasterSpec {
  int width = 64;
  int height = 64;
  double center_x = 32;
  double center_y = 32;
  double iris_radius = 20;
  double pir = 0.4;  // pupil radius = pir * iris_radius
  std::uint8_t sclera_gray = 200;
  std::uint8_t iris_gray = 90;
  std::uint8_t pupil_gray = 20;
  double noise_sd = 0.0;
  double eyelid_occlusion_frac = 0.0;  // fraction of the iris's vertical extent

  double pupil_radius() const { return pir * iris_radius; }
  void validate() const;  // throws InvalidSpec
};

/// Deterministic given (spec, seed); disk edges are anti-aliased by 4x4
/// supersampled coverage so boxes can be recovered to subpixel precision.
Raster render_eye_raster(const EyeRasterSpec& spec, std::uint64_t seed);

void write_pgm(const std::filesystem::path& path, const Raster& raster);
Raster read_pgm(const std::filesystem::path& path);

}  // namespace pupilpipe
