#include "lcl/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lcl/errors.hpp"

namespace lcl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json vec2_json(const Vec2d& v) { return json::array({v.x(), v.y()}); }

Vec2d json_vec2(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) {
    throw IoError("expected [x, y] for " + what);
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

json frame_json(const SensorFrame& f) {
  json scan = json::array();
  for (std::size_t i = 0; i < f.scan.points.size(); ++i) {
    if (!f.scan.point_valid(i)) continue;
    scan.push_back(vec2_json(f.scan.points[i]));
  }
  json tracks = json::array();
  for (const auto& t : f.tracks) {
    tracks.push_back({{"id", t.id}, {"px", vec2_json(t.px)}});
  }
  auto lines_json = [](const std::vector<ImageSegment>& ls) {
    json out = json::array();
    for (const auto& l : ls) {
      out.push_back(json::array({l.a.x(), l.a.y(), l.b.x(), l.b.y()}));
    }
    return out;
  };
  return json{{"index", f.index},
              {"scan", std::move(scan)},
              {"tracks", std::move(tracks)},
              {"lines",
               {{"horizontal", lines_json(f.lines.horizontal)},
                {"vertical", lines_json(f.lines.vertical)}}},
              {"vp", json::array({f.vp.u, f.vp.v})}};
}

SensorFrame frame_from_json(const json& j, const std::string& where) {
  SensorFrame f;
  f.index = j.at("index").get<int>();
  for (const auto& p : j.at("scan")) {
    f.scan.points.push_back(json_vec2(p, where + " scan point"));
  }
  // Enforce the bearing ordering invariant.
  std::stable_sort(f.scan.points.begin(), f.scan.points.end(),
                   [](const Vec2d& a, const Vec2d& b) {
                     return std::atan2(a.y(), a.x()) < std::atan2(b.y(), b.x());
                   });
  for (const auto& t : j.at("tracks")) {
    f.tracks.push_back(
        {t.at("id").get<int>(), json_vec2(t.at("px"), where + " track")});
  }
  auto read_lines = [&](const json& arr, std::vector<ImageSegment>* out) {
    for (const auto& l : arr) {
      if (!l.is_array() || l.size() != 4) {
        throw IoError("expected [u1,v1,u2,v2] line in " + where);
      }
      out->push_back({Vec2d(l[0].get<double>(), l[1].get<double>()),
                      Vec2d(l[2].get<double>(), l[3].get<double>())});
    }
  };
  read_lines(j.at("lines").at("horizontal"), &f.lines.horizontal);
  read_lines(j.at("lines").at("vertical"), &f.lines.vertical);
  const Vec2d vp = json_vec2(j.at("vp"), where + " vp");
  f.vp = {vp.x(), vp.y()};
  return f;
}

json gt_json(const GroundTruth& gt) {
  json poses = json::array();
  for (const auto& p : gt.poses) {
    poses.push_back(json::array({p.xy.x(), p.xy.y(), p.theta}));
  }
  json walls = json::array();
  for (const auto& w : gt.plan.walls) {
    walls.push_back(json::array({w.a.x(), w.a.y(), w.b.x(), w.b.y()}));
  }
  json corners = json::array();
  for (const auto& c : gt.plan.corners) corners.push_back(vec2_json(c));
  json polygon = json::array();
  for (const auto& v : gt.floor_polygon) polygon.push_back(vec2_json(v));
  json ground = json::object();
  std::vector<int> ids;
  for (const auto& [id, on] : gt.track_on_ground) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  for (int id : ids) ground[std::to_string(id)] = gt.track_on_ground.at(id);
  return json{
      {"poses", std::move(poses)},
      {"alignment",
       {{"delta", gt.alignment.delta},
        {"phi", gt.alignment.phi},
        {"origin", vec2_json(gt.alignment.origin)}}},
      {"plan", {{"walls", std::move(walls)}, {"corners", std::move(corners)}}},
      {"floor_polygon", std::move(polygon)},
      {"mount",
       {{"height", gt.mount.height},
        {"pitch", gt.mount.pitch},
        {"roll", gt.mount.roll},
        {"yaw", gt.mount.yaw},
        {"offset", vec2_json(gt.mount.offset)}}},
      {"wall_height", gt.wall_height},
      {"track_on_ground", std::move(ground)}};
}

GroundTruth gt_from_json(const json& j) {
  GroundTruth gt;
  for (const auto& p : j.at("poses")) {
    gt.poses.push_back({Vec2d(p[0].get<double>(), p[1].get<double>()),
                        p[2].get<double>()});
  }
  const auto& a = j.at("alignment");
  gt.alignment.delta = a.at("delta").get<double>();
  gt.alignment.phi = a.at("phi").get<double>();
  gt.alignment.origin = json_vec2(a.at("origin"), "gt alignment origin");
  for (const auto& w : j.at("plan").at("walls")) {
    LineSegment2 seg;
    seg.a = Vec2d(w[0].get<double>(), w[1].get<double>());
    seg.b = Vec2d(w[2].get<double>(), w[3].get<double>());
    gt.plan.walls.push_back(seg);
  }
  for (const auto& c : j.at("plan").at("corners")) {
    gt.plan.corners.push_back(json_vec2(c, "gt corner"));
  }
  for (const auto& v : j.at("floor_polygon")) {
    gt.floor_polygon.push_back(json_vec2(v, "gt polygon vertex"));
  }
  const auto& m = j.at("mount");
  gt.mount.height = m.at("height").get<double>();
  gt.mount.pitch = m.at("pitch").get<double>();
  gt.mount.roll = m.at("roll").get<double>();
  gt.mount.yaw = m.at("yaw").get<double>();
  gt.mount.offset = json_vec2(m.at("offset"), "gt mount offset");
  gt.wall_height = j.at("wall_height").get<double>();
  for (const auto& [key, value] : j.at("track_on_ground").items()) {
    gt.track_on_ground[std::stoi(key)] = value.get<bool>();
  }
  return gt;
}

}  // namespace

Dataset dataset_from_sim(const World& world, const SimSequence& sim) {
  Dataset out;
  out.meta.k = world.intrinsics;
  out.meta.image_width = world.image_width;
  out.meta.image_height = world.image_height;
  out.meta.lidar_min_range = world.lidar.min_range;
  out.meta.lidar_max_range = world.lidar.max_range;
  out.frames = sim.frames;
  out.gt = sim.gt;
  return out;
}

void write_dataset(const std::string& dir, const Dataset& dataset) {
  fs::create_directories(dir);
  {
    json meta{{"fx", dataset.meta.k.fx},
              {"fy", dataset.meta.k.fy},
              {"cx", dataset.meta.k.cx},
              {"cy", dataset.meta.k.cy},
              {"image_width", dataset.meta.image_width},
              {"image_height", dataset.meta.image_height},
              {"lidar_min_range", dataset.meta.lidar_min_range},
              {"lidar_max_range", dataset.meta.lidar_max_range}};
    std::ofstream out(fs::path(dir) / "meta.json");
    if (!out) throw IoError("cannot write " + dir + "/meta.json");
    out << meta.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "frames.jsonl");
    if (!out) throw IoError("cannot write " + dir + "/frames.jsonl");
    for (const auto& f : dataset.frames) out << frame_json(f).dump() << "\n";
  }
  if (dataset.gt) {
    std::ofstream out(fs::path(dir) / "gt.json");
    if (!out) throw IoError("cannot write " + dir + "/gt.json");
    out << gt_json(*dataset.gt).dump(2) << "\n";
  }
}

Dataset read_dataset(const std::string& dir) {
  Dataset out;
  const fs::path meta_path = fs::path(dir) / "meta.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw IoError("cannot open " + meta_path.string());
  json meta;
  try {
    meta_in >> meta;
  } catch (const json::exception& e) {
    throw IoError("malformed " + meta_path.string() + ": " + e.what());
  }
  try {
    out.meta.k = {meta.at("fx").get<double>(), meta.at("fy").get<double>(),
                  meta.at("cx").get<double>(), meta.at("cy").get<double>()};
    out.meta.image_width = meta.at("image_width").get<int>();
    out.meta.image_height = meta.at("image_height").get<int>();
    out.meta.lidar_min_range = meta.at("lidar_min_range").get<double>();
    out.meta.lidar_max_range = meta.at("lidar_max_range").get<double>();
  } catch (const json::exception& e) {
    throw IoError("missing field in " + meta_path.string() + ": " + e.what());
  }

  const fs::path frames_path = fs::path(dir) / "frames.jsonl";
  std::ifstream frames_in(frames_path);
  if (!frames_in) throw IoError("cannot open " + frames_path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(frames_in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where =
        frames_path.string() + ":" + std::to_string(lineno);
    try {
      out.frames.push_back(frame_from_json(json::parse(line), where));
    } catch (const json::exception& e) {
      throw IoError("malformed frame record at " + where + ": " + e.what());
    }
  }

  const fs::path gt_path = fs::path(dir) / "gt.json";
  if (fs::exists(gt_path)) {
    std::ifstream gt_in(gt_path);
    if (!gt_in) throw IoError("cannot open " + gt_path.string());
    try {
      json j;
      gt_in >> j;
      out.gt = gt_from_json(j);
    } catch (const json::exception& e) {
      throw IoError("malformed " + gt_path.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace lcl
