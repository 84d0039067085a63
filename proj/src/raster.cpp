#include "pupilpipe/raster.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "pupilpipe/io.hpp"
#include "pupilpipe/rng.hpp"

namespace pupilpipe {

void EyeRasterSpec::validate() const {
  if (width < 4 || height < 4) throw InvalidSpec("raster must be at least 4x4");
  if (!(pir > 0.0 && pir < 1.0)) throw InvalidSpec("pir must be in (0,1)");
  if (pupil_radius() < 2.0) throw InvalidSpec("pupil radius must be >= 2 px");
  if (center_x - iris_radius < 0 || center_x + iris_radius > width ||
      center_y - iris_radius < 0 || center_y + iris_radius > height)
    throw InvalidSpec("iris circle must fit inside the image");
  if (!(pupil_gray < iris_gray && iris_gray < sclera_gray))
    throw InvalidSpec("grays must satisfy pupil < iris < sclera");
  if (noise_sd < 0) throw InvalidSpec("noise_sd must be >= 0");
  if (!(eyelid_occlusion_frac >= 0.0 && eyelid_occlusion_frac < 1.0))
    throw InvalidSpec("eyelid_occlusion_frac must be in [0,1)");
}

namespace {

// Fraction of the unit pixel [x,x+1)x[y,y+1) inside the disk, 4x4 subsamples.
double disk_coverage(int x, int y, double cx, double cy, double radius) {
  const double r2 = radius * radius;
  int inside = 0;
  for (int sy = 0; sy < 4; ++sy)
    for (int sx = 0; sx < 4; ++sx) {
      const double px = x + (sx + 0.5) / 4.0;
      const double py = y + (sy + 0.5) / 4.0;
      const double dx = px - cx;
      const double dy = py - cy;
      if (dx * dx + dy * dy <= r2) ++inside;
    }
  return inside / 16.0;
}

std::uint8_t clamp_gray(double v) {
  return static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, std::round(v))));
}

}  // namespace

Raster render_eye_raster(const EyeRasterSpec& spec, std::uint64_t seed) {
  spec.validate();
  Raster raster(spec.height, spec.width);

  const double pupil_r = spec.pupil_radius();
  const double lid_y =
      spec.center_y - spec.iris_radius + spec.eyelid_occlusion_frac * (2.0 * spec.iris_radius);

  for (int y = 0; y < spec.height; ++y) {
    const bool under_lid = spec.eyelid_occlusion_frac > 0.0 && (y + 0.5) < lid_y;
    for (int x = 0; x < spec.width; ++x) {
      double value = spec.sclera_gray;
      if (!under_lid) {
        const double ci = disk_coverage(x, y, spec.center_x, spec.center_y, spec.iris_radius);
        if (ci > 0.0) {
          const double cp = disk_coverage(x, y, spec.center_x, spec.center_y, pupil_r);
          value = spec.sclera_gray * (1.0 - ci) + spec.iris_gray * (ci - cp) +
                  spec.pupil_gray * cp;
        }
      }
      raster(y, x) = clamp_gray(value);
    }
  }

  if (spec.noise_sd > 0.0) {
    Rng rng(seed);
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x)
        raster(y, x) = clamp_gray(raster(y, x) + rng.normal(0.0, spec.noise_sd));
  }
  return raster;
}

void write_pgm(const std::filesystem::path& path, const Raster& raster) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << raster.cols() << ' ' << raster.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(raster.data()),
            static_cast<std::streamsize>(raster.size()));
}

Raster read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw IoError(path.string() + ": not a binary PGM (P5)");
  long width = 0, height = 0, maxval = 0;
  in >> width >> height >> maxval;
  if (!in || width <= 0 || height <= 0 || maxval != 255)
    throw IoError(path.string() + ": unsupported PGM header");
  in.get();  // single whitespace after the header
  Raster raster(height, width);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!in) throw IoError(path.string() + ": truncated PGM payload");
  return raster;
}

}  // namespace pupilpipe
