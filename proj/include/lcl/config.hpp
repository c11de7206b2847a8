#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "lcl/mapping.hpp"
#include "lcl/rransac.hpp"
#include "lcl/sequence.hpp"
#include "lcl/sim.hpp"

// Run configuration: every threshold of the system with embedded defaults,
// overridable from a flat TOML-style key/value file ("[section]" headers,
// "key = value" lines, '#' comments).

namespace lcl {

struct SimConfig {
  std::string world = "square";
  int frames = 30;
  NoiseConfig noise;
  int beams = 360;
  double min_range = 0.15;
  std::optional<double> max_range;  // empty: keep the world preset's value
  int image_width = 1920;
  int image_height = 1080;
  double fx = 1000.0, fy = 1000.0, cx = 960.0, cy = 540.0;
  CameraMount mount;
  double min_pitch = 5.0 * EIGEN_PI / 180.0;
  double wall_height = 2.5;
};

struct EvalConfig {
  double seg_scale = 0.25;          // raster = image size * scale
  double corner_match_radius = 1.0; // m
  int seg_stride = 5;               // render every k-th frame
};

struct Config {
  std::uint64_t seed = 1;
  SimConfig sim;
  FrontendConfig frontend;
  RransacConfig rransac;
  MappingConfig mapping;
  EvalConfig eval;
};

/// Apply overrides from config text on top of `base`. Unknown keys raise
/// ConfigError naming the key.
Config parse_config(const std::string& text, const Config& base = {});

Config load_config(const std::string& path, const Config& base = {});

/// Current values in the accepted file syntax.
std::string dump_config(const Config& cfg);

/// Build the simulation world for the configured preset, with config
/// overrides applied.
World world_from_config(const Config& cfg);

}  // namespace lcl
