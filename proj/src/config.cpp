#include "lcl/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lcl/errors.hpp"

namespace lcl {

namespace {

constexpr double kDeg = EIGEN_PI / 180.0;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                        (v.front() == '\'' && v.back() == '\''))) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for " + key + ": '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) {
    throw ConfigError("expected integer for " + key + ": '" + v + "'");
  }
  return static_cast<int>(d);
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_int(key, item));
  }
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

void apply_key(Config& c, const std::string& key, const std::string& raw) {
  const std::string v = unquote(raw);
  auto d = [&] { return to_double(key, v); };
  auto i = [&] { return to_int(key, v); };

  if (key == "seed") {
    c.seed = static_cast<std::uint64_t>(to_double(key, v));
  } else if (key == "sim.world") {
    c.sim.world = v;
  } else if (key == "sim.frames") {
    c.sim.frames = i();
  } else if (key == "sim.range_sigma") {
    c.sim.noise.range_sigma = d();
  } else if (key == "sim.pixel_sigma") {
    c.sim.noise.pixel_sigma = d();
  } else if (key == "sim.dropout") {
    c.sim.noise.dropout = d();
  } else if (key == "sim.beams") {
    c.sim.beams = i();
  } else if (key == "sim.min_range") {
    c.sim.min_range = d();
  } else if (key == "sim.max_range") {
    c.sim.max_range = d();
  } else if (key == "sim.image_width") {
    c.sim.image_width = i();
  } else if (key == "sim.image_height") {
    c.sim.image_height = i();
  } else if (key == "sim.fx") {
    c.sim.fx = d();
  } else if (key == "sim.fy") {
    c.sim.fy = d();
  } else if (key == "sim.cx") {
    c.sim.cx = d();
  } else if (key == "sim.cy") {
    c.sim.cy = d();
  } else if (key == "sim.cam_height") {
    c.sim.mount.height = d();
  } else if (key == "sim.cam_pitch_deg") {
    c.sim.mount.pitch = d() * kDeg;
  } else if (key == "sim.cam_roll_deg") {
    c.sim.mount.roll = d() * kDeg;
  } else if (key == "sim.cam_yaw_deg") {
    c.sim.mount.yaw = d() * kDeg;
  } else if (key == "sim.cam_offset_x") {
    c.sim.mount.offset.x() = d();
  } else if (key == "sim.cam_offset_y") {
    c.sim.mount.offset.y() = d();
  } else if (key == "sim.min_pitch_deg") {
    c.sim.min_pitch = d() * kDeg;
  } else if (key == "sim.wall_height") {
    c.sim.wall_height = d();
  } else if (key == "features.dist_thresh") {
    c.frontend.lines.dist_thresh = d();
  } else if (key == "features.min_length") {
    c.frontend.lines.min_length = d();
  } else if (key == "features.min_inliers") {
    c.frontend.lines.min_inliers = i();
  } else if (key == "features.jump_thresh") {
    c.frontend.lines.jump_thresh = d();
  } else if (key == "features.merge_angle_deg") {
    c.frontend.lines.merge_angle = d() * kDeg;
  } else if (key == "features.merge_offset") {
    c.frontend.lines.merge_offset = d();
  } else if (key == "icp.max_iterations") {
    c.frontend.icp.max_iterations = i();
  } else if (key == "icp.param_tol") {
    c.frontend.icp.param_tol = d();
  } else if (key == "icp.max_corr_dist") {
    c.frontend.icp.max_corr_dist = d();
  } else if (key == "icp.inlier_dist") {
    c.frontend.icp.inlier_dist = d();
  } else if (key == "icp.overlap_frac") {
    c.frontend.icp.overlap_frac = d();
  } else if (key == "grouping.vp_angle_deg") {
    c.frontend.grouping.vp_angle_thresh = d() * kDeg;
  } else if (key == "grouping.horizon_margin") {
    c.frontend.grouping.horizon_margin = d();
  } else if (key == "tracks.gamma") {
    c.frontend.track_gamma = d();
    c.rransac.track_gamma = d();
  } else if (key == "rransac.tau") {
    c.rransac.tau = d();
  } else if (key == "rransac.budget") {
    c.rransac.budget = i();
  } else if (key == "rransac.draw_cap_factor") {
    c.rransac.draw_cap_factor = i();
  } else if (key == "rransac.capacity") {
    c.rransac.capacity = i();
  } else if (key == "rransac.stale_age") {
    c.rransac.stale_age = i();
  } else if (key == "rransac.promote_thresh") {
    c.rransac.promote_thresh = d();
  } else if (key == "rransac.min_maturity") {
    c.rransac.min_maturity = i();
  } else if (key == "rransac.min_pairs") {
    c.rransac.min_pairs = i();
  } else if (key == "rransac.window") {
    c.rransac.window = i();
  } else if (key == "rransac.min_rotation_deg") {
    c.rransac.min_rotation = d() * kDeg;
  } else if (key == "rransac.min_translation") {
    c.rransac.min_translation = d();
  } else if (key == "rransac.support_frac") {
    c.rransac.support_frac = d();
  } else if (key == "rransac.assoc_thresh") {
    c.rransac.assoc_thresh = d();
  } else if (key == "rransac.mode") {
    if (v == "motion") {
      c.rransac.mode = GenerationMode::kMotionConstrained;
    } else if (v == "baseline") {
      c.rransac.mode = GenerationMode::kBoundaryCorners;
    } else {
      throw ConfigError("rransac.mode must be 'motion' or 'baseline'");
    }
  } else if (key == "mapping.cluster_angle_deg") {
    c.mapping.cluster_angle = d() * kDeg;
  } else if (key == "mapping.cluster_offset") {
    c.mapping.cluster_offset = d();
  } else if (key == "mapping.cluster_gap") {
    c.mapping.cluster_gap = d();
  } else if (key == "mapping.min_wall_length") {
    c.mapping.min_wall_length = d();
  } else if (key == "mapping.corner_radius") {
    c.mapping.corner_radius = d();
  } else if (key == "mapping.corner_min_angle_deg") {
    c.mapping.corner_min_angle = d() * kDeg;
  } else if (key == "mapping.endpoint_corner_gap") {
    c.mapping.endpoint_corner_gap = d();
  } else if (key == "mapping.point_wall_assoc") {
    c.mapping.point_wall_assoc = d();
  } else if (key == "mapping.max_points_per_frame") {
    c.mapping.max_points_per_frame = i();
  } else if (key == "mapping.huber_wall") {
    c.mapping.huber_wall = d();
  } else if (key == "mapping.huber_epi") {
    c.mapping.huber_epi = d();
  } else if (key == "mapping.epi_weight") {
    c.mapping.epi_weight = d();
  } else if (key == "mapping.min_baseline") {
    c.mapping.min_baseline = d();
  } else if (key == "mapping.min_shared_tracks") {
    c.mapping.min_shared_tracks = i();
  } else if (key == "mapping.pair_offsets") {
    c.mapping.pair_offsets = to_int_list(key, v);
  } else if (key == "mapping.max_iterations") {
    c.mapping.max_iterations = i();
  } else if (key == "mapping.step_tol") {
    c.mapping.step_tol = d();
  } else if (key == "eval.seg_scale") {
    c.eval.seg_scale = d();
  } else if (key == "eval.corner_match_radius") {
    c.eval.corner_match_radius = d();
  } else if (key == "eval.seg_stride") {
    c.eval.seg_stride = i();
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

}  // namespace

Config parse_config(const std::string& text, const Config& base) {
  Config cfg = base;
  std::stringstream ss(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("bad section header on line " +
                          std::to_string(lineno));
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected key = value on line " +
                        std::to_string(lineno));
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!section.empty()) key = section + "." + key;
    apply_key(cfg, key, value);
  }
  return cfg;
}

Config load_config(const std::string& path, const Config& base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

std::string dump_config(const Config& c) {
  std::ostringstream o;
  o.precision(12);
  const auto deg = [](double rad) { return rad / kDeg; };
  o << "seed = " << c.seed << "\n\n";
  o << "[sim]\n";
  o << "world = " << c.sim.world << "\n";
  o << "frames = " << c.sim.frames << "\n";
  o << "range_sigma = " << c.sim.noise.range_sigma << "\n";
  o << "pixel_sigma = " << c.sim.noise.pixel_sigma << "\n";
  o << "dropout = " << c.sim.noise.dropout << "\n";
  o << "beams = " << c.sim.beams << "\n";
  o << "min_range = " << c.sim.min_range << "\n";
  if (c.sim.max_range) {
    o << "max_range = " << *c.sim.max_range << "\n";
  } else {
    o << "# max_range = (world preset)\n";
  }
  o << "image_width = " << c.sim.image_width << "\n";
  o << "image_height = " << c.sim.image_height << "\n";
  o << "fx = " << c.sim.fx << "\n";
  o << "fy = " << c.sim.fy << "\n";
  o << "cx = " << c.sim.cx << "\n";
  o << "cy = " << c.sim.cy << "\n";
  o << "cam_height = " << c.sim.mount.height << "\n";
  o << "cam_pitch_deg = " << deg(c.sim.mount.pitch) << "\n";
  o << "cam_roll_deg = " << deg(c.sim.mount.roll) << "\n";
  o << "cam_yaw_deg = " << deg(c.sim.mount.yaw) << "\n";
  o << "cam_offset_x = " << c.sim.mount.offset.x() << "\n";
  o << "cam_offset_y = " << c.sim.mount.offset.y() << "\n";
  o << "min_pitch_deg = " << deg(c.sim.min_pitch) << "\n";
  o << "wall_height = " << c.sim.wall_height << "\n\n";
  o << "[features]\n";
  o << "dist_thresh = " << c.frontend.lines.dist_thresh << "\n";
  o << "min_length = " << c.frontend.lines.min_length << "\n";
  o << "min_inliers = " << c.frontend.lines.min_inliers << "\n";
  o << "jump_thresh = " << c.frontend.lines.jump_thresh << "\n";
  o << "merge_angle_deg = " << deg(c.frontend.lines.merge_angle) << "\n";
  o << "merge_offset = " << c.frontend.lines.merge_offset << "\n\n";
  o << "[icp]\n";
  o << "max_iterations = " << c.frontend.icp.max_iterations << "\n";
  o << "param_tol = " << c.frontend.icp.param_tol << "\n";
  o << "max_corr_dist = " << c.frontend.icp.max_corr_dist << "\n";
  o << "inlier_dist = " << c.frontend.icp.inlier_dist << "\n";
  o << "overlap_frac = " << c.frontend.icp.overlap_frac << "\n\n";
  o << "[grouping]\n";
  o << "vp_angle_deg = " << deg(c.frontend.grouping.vp_angle_thresh) << "\n";
  o << "horizon_margin = " << c.frontend.grouping.horizon_margin << "\n\n";
  o << "[tracks]\n";
  o << "gamma = " << c.frontend.track_gamma << "\n\n";
  o << "[rransac]\n";
  o << "tau = " << c.rransac.tau << "\n";
  o << "budget = " << c.rransac.budget << "\n";
  o << "draw_cap_factor = " << c.rransac.draw_cap_factor << "\n";
  o << "capacity = " << c.rransac.capacity << "\n";
  o << "stale_age = " << c.rransac.stale_age << "\n";
  o << "promote_thresh = " << c.rransac.promote_thresh << "\n";
  o << "min_maturity = " << c.rransac.min_maturity << "\n";
  o << "min_pairs = " << c.rransac.min_pairs << "\n";
  o << "window = " << c.rransac.window << "\n";
  o << "min_rotation_deg = " << deg(c.rransac.min_rotation) << "\n";
  o << "min_translation = " << c.rransac.min_translation << "\n";
  o << "support_frac = " << c.rransac.support_frac << "\n";
  o << "assoc_thresh = " << c.rransac.assoc_thresh << "\n";
  o << "mode = "
    << (c.rransac.mode == GenerationMode::kMotionConstrained ? "motion"
                                                             : "baseline")
    << "\n\n";
  o << "[mapping]\n";
  o << "cluster_angle_deg = " << deg(c.mapping.cluster_angle) << "\n";
  o << "cluster_offset = " << c.mapping.cluster_offset << "\n";
  o << "cluster_gap = " << c.mapping.cluster_gap << "\n";
  o << "min_wall_length = " << c.mapping.min_wall_length << "\n";
  o << "corner_radius = " << c.mapping.corner_radius << "\n";
  o << "corner_min_angle_deg = " << deg(c.mapping.corner_min_angle) << "\n";
  o << "endpoint_corner_gap = " << c.mapping.endpoint_corner_gap << "\n";
  o << "point_wall_assoc = " << c.mapping.point_wall_assoc << "\n";
  o << "max_points_per_frame = " << c.mapping.max_points_per_frame << "\n";
  o << "huber_wall = " << c.mapping.huber_wall << "\n";
  o << "huber_epi = " << c.mapping.huber_epi << "\n";
  o << "epi_weight = " << c.mapping.epi_weight << "\n";
  o << "min_baseline = " << c.mapping.min_baseline << "\n";
  o << "min_shared_tracks = " << c.mapping.min_shared_tracks << "\n";
  o << "pair_offsets = ";
  for (std::size_t i = 0; i < c.mapping.pair_offsets.size(); ++i) {
    o << (i ? "," : "") << c.mapping.pair_offsets[i];
  }
  o << "\n";
  o << "max_iterations = " << c.mapping.max_iterations << "\n";
  o << "step_tol = " << c.mapping.step_tol << "\n\n";
  o << "[eval]\n";
  o << "seg_scale = " << c.eval.seg_scale << "\n";
  o << "corner_match_radius = " << c.eval.corner_match_radius << "\n";
  o << "seg_stride = " << c.eval.seg_stride << "\n";
  return o.str();
}

World world_from_config(const Config& cfg) {
  World w = make_world(cfg.sim.world);
  w.noise = cfg.sim.noise;
  w.lidar.beams = cfg.sim.beams;
  w.lidar.min_range = cfg.sim.min_range;
  if (cfg.sim.max_range) w.lidar.max_range = *cfg.sim.max_range;
  w.image_width = cfg.sim.image_width;
  w.image_height = cfg.sim.image_height;
  w.intrinsics = {cfg.sim.fx, cfg.sim.fy, cfg.sim.cx, cfg.sim.cy};
  w.mount = cfg.sim.mount;
  w.min_pitch = cfg.sim.min_pitch;
  w.wall_height = cfg.sim.wall_height;
  return w;
}

}  // namespace lcl
