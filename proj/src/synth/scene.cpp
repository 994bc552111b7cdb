#include "depthlab/synth/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "depthlab/core/rng.hpp"
#include "depthlab/io/pfm.hpp"
#include "depthlab/io/pnm.hpp"

namespace depthlab::synth {
namespace {

constexpr double kTau = 6.283185307179586477;

struct Plane {
  double c, ax, ay;
};
struct Bump {
  double cx, cy, rx, ry, amp;
};
struct Ridge {
  double fx, fy, phase, amp;
};

}  // namespace

Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg) {
  if (cfg.height < 16 || cfg.width < 16) {
    throw ImageTooSmallError("generate_scene: dims must be at least 16");
  }
  Rng rng(derive_seed(seed, 0x5ce7e5eedULL, 17));

  // Primitive draws happen up front in a fixed order so the field is a pure
  // function of (seed, config).
  const int n_bumps = static_cast<int>(rng.uniform_int(1, 2));
  const int n_ridges = static_cast<int>(rng.uniform_int(1, 2));

  Plane plane;
  plane.c = rng.uniform(1.6, 2.4);
  const double tilt_x = rng.uniform(0.25, 0.6) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
  const double tilt_y = rng.uniform(0.25, 0.6) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
  plane.ax = tilt_x;
  plane.ay = tilt_y;

  std::vector<Bump> bumps(n_bumps);
  for (auto& b : bumps) {
    b.cx = rng.uniform(0.15, 0.85);
    b.cy = rng.uniform(0.15, 0.85);
    b.rx = rng.uniform(0.1, 0.3);
    b.ry = rng.uniform(0.1, 0.3);
    b.amp = rng.uniform(0.1, 0.35) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
  }

  std::vector<Ridge> ridges(n_ridges);
  for (auto& r : ridges) {
    r.fx = rng.uniform(6.0, 14.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    r.fy = rng.uniform(6.0, 14.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    r.phase = rng.uniform(0.0, kTau);
    r.amp = cfg.ridge_amplitude * rng.uniform(0.6, 1.0);
  }

  // Albedo texture parameters (image only, never in the depth field).
  const double alb_fx = rng.uniform(9.0, 21.0);
  const double alb_fy = rng.uniform(9.0, 21.0);
  const double alb_phase = rng.uniform(0.0, kTau);

  const int h = cfg.height, w = cfg.width;
  Scene scene;
  scene.seed = seed;
  scene.gt_depth = DepthGrid(h, w);
  DepthGrid detail(h, w);

  for (int i = 0; i < h; ++i) {
    const double v = static_cast<double>(i) / (h - 1);
    for (int j = 0; j < w; ++j) {
      const double u = static_cast<double>(j) / (w - 1);
      double d = plane.c + plane.ax * (u - 0.5) + plane.ay * (v - 0.5);
      for (const auto& b : bumps) {
        const double dx = (u - b.cx) / b.rx, dy = (v - b.cy) / b.ry;
        d += b.amp * std::exp(-(dx * dx + dy * dy));
      }
      double fine = 0.0;
      for (const auto& r : ridges) {
        fine += r.amp * std::sin(kTau * (r.fx * u + r.fy * v) + r.phase);
      }
      detail.at(i, j) = fine;
      scene.gt_depth.at(i, j) = d + fine;
    }
  }

  // Map the composed field affinely onto the canonical [0.5, 2.5] range:
  // strictly positive, and every scene shares one absolute depth domain
  // (the frame a consistent pseudo-label source would emit).
  {
    double lo = scene.gt_depth.values()[0], hi = lo;
    for (double d : scene.gt_depth.values()) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    const double scale = 2.0 / (hi - lo);
    for (double& d : scene.gt_depth.values()) d = 0.5 + (d - lo) * scale;
  }
  const double dmin = 0.5;
  const double inv_range = 1.0 / 2.0;

  // Lambertian shading from the depth gradient; the spatial gain treats the
  // pixel pitch as 1/24 of a depth unit so normals vary visibly.
  const double gain_x = 24.0 * (w - 1) / 128.0;
  const double gain_y = 24.0 * (h - 1) / 128.0;
  const double lx = 0.4, ly = 0.3, lz = 0.85;
  const double lnorm = std::sqrt(lx * lx + ly * ly + lz * lz);

  scene.image = ImageGrid(h, w, 3);
  double ridge_amp_total = 1e-12;
  for (const auto& r : ridges) ridge_amp_total += r.amp;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const int jm = std::max(j - 1, 0), jp = std::min(j + 1, w - 1);
      const int im = std::max(i - 1, 0), ip = std::min(i + 1, h - 1);
      const double gx =
          (scene.gt_depth.at(i, jp) - scene.gt_depth.at(i, jm)) / (jp - jm) * gain_x;
      const double gy =
          (scene.gt_depth.at(ip, j) - scene.gt_depth.at(im, j)) / (ip - im) * gain_y;
      const double nn = std::sqrt(gx * gx + gy * gy + 1.0);
      const double shade = std::max(0.0, (-gx * lx - gy * ly + lz) / (nn * lnorm));

      const double u = static_cast<double>(j) / (w - 1);
      const double v = static_cast<double>(i) / (h - 1);
      const double alb =
          cfg.albedo_strength * std::sin(kTau * (alb_fx * u + alb_fy * v) + alb_phase);
      const double dn = (scene.gt_depth.at(i, j) - dmin) * inv_range;
      const double fine_n = 0.5 + 0.5 * detail.at(i, j) / ridge_amp_total;

      scene.image.at(0, i, j) = std::clamp((0.12 + 0.76 * dn) * (1.0 + alb), 0.0, 1.0);
      scene.image.at(1, i, j) = std::clamp(shade, 0.0, 1.0);
      scene.image.at(2, i, j) = std::clamp(0.2 + 0.6 * fine_n + 0.5 * alb, 0.0, 1.0);
    }
  }
  return scene;
}

void save_scene(const Scene& scene, const std::string& base_path,
                const std::string& config_hash) {
  io::write_pfm(scene.gt_depth, base_path + ".pfm");
  io::write_ppm(scene.image, base_path + ".ppm");
  nlohmann::json meta;
  meta["seed"] = scene.seed;
  meta["config_hash"] = config_hash;
  std::ofstream out(base_path + ".json");
  if (!out) throw IoError("cannot open for write: " + base_path + ".json");
  out << meta.dump(2) << "\n";
}

Scene load_scene(const std::string& base_path) {
  Scene scene;
  scene.gt_depth = io::read_pfm(base_path + ".pfm");
  scene.image = io::read_ppm(base_path + ".ppm");
  std::ifstream in(base_path + ".json");
  if (!in) throw IoError("cannot open for read: " + base_path + ".json");
  nlohmann::json meta = nlohmann::json::parse(in);
  scene.seed = meta.at("seed").get<std::uint64_t>();
  return scene;
}

}  // namespace depthlab::synth
