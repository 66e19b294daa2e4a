// Copyright 2026 The RealMotion Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "realmotion/world.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include <json.hpp>

#include "realmotion/hashing.hpp"

namespace realmotion
{

namespace
{

using json = nlohmann::ordered_json;

uint64_t splitmix64(uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform doubles straight from raw engine output; std distributions are
// implementation-defined and would break cross-toolchain reproducibility.
double uniform01(std::mt19937_64 & rng)
{
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64 & rng, double lo, double hi)
{
  return lo + (hi - lo) * uniform01(rng);
}

enum class Behavior { kConstantVelocity, kTurn, kLaneChange, kStop };

Behavior sample_behavior(std::mt19937_64 & rng, const BehaviorMix & mix)
{
  const double u = uniform01(rng) * mix.sum();
  double acc = mix.constant_velocity;
  if (u < acc) return Behavior::kConstantVelocity;
  acc += mix.turn;
  if (u < acc) return Behavior::kTurn;
  acc += mix.lane_change;
  if (u < acc) return Behavior::kLaneChange;
  return Behavior::kStop;
}

// Closed-form smooth path for one agent, evaluated at arbitrary time.
struct PathSpec
{
  Behavior behavior = Behavior::kConstantVelocity;
  Vec2 start = Vec2::Zero();
  double heading = 0.0;
  double speed = 5.0;
  double turn_radius = 30.0;
  double turn_sign = 1.0;
  double lc_offset = 3.5;     // lateral shift, lane change
  double lc_time = 3.0;       // midpoint of the shift
  double lc_tau = 1.0;
  double stop_time = 3.0;     // midpoint of the deceleration
  double stop_tau = 0.8;
  double noise_amp = 0.0;
  double noise_freq = 0.5;
  double noise_phase = 0.0;

  Vec2 eval(double t, bool with_noise) const
  {
    const Vec2 dir(std::cos(heading), std::sin(heading));
    const Vec2 normal(-dir.y(), dir.x());
    Vec2 p;
    switch (behavior) {
      case Behavior::kConstantVelocity:
        p = start + dir * (speed * t);
        break;
      case Behavior::kTurn: {
        const Vec2 center = start + normal * (turn_sign * turn_radius);
        const double omega = turn_sign * speed / turn_radius;
        const double a0 = std::atan2(start.y() - center.y(), start.x() - center.x());
        const double a = a0 + omega * t;
        p = center + turn_radius * Vec2(std::cos(a), std::sin(a));
        break;
      }
      case Behavior::kLaneChange: {
        const double u = (t - lc_time) / lc_tau;
        const double shift = lc_offset * 0.5 * (1.0 + std::tanh(u));
        p = start + dir * (speed * t) + normal * shift;
        break;
      }
      case Behavior::kStop: {
        // Arc length of v(t) = speed * sigmoid(-(t - stop_time)/tau).
        auto arclen = [&](double tt) {
          const double u = (tt - stop_time) / stop_tau;
          return speed * (tt - stop_tau * std::log1p(std::exp(u)) +
                          stop_tau * std::log1p(std::exp(-stop_time / stop_tau)));
        };
        p = start + dir * arclen(t);
        break;
      }
    }
    if (with_noise && noise_amp > 0.0) {
      p += normal * (noise_amp * std::sin(noise_freq * t + noise_phase));
    }
    return p;
  }
};

}  // namespace

void WorldConfig::validate() const
{
  if (n_agents < 1 || n_lanes < 0 || t_hist < 2 || t_fut < 1 || frequency_hz <= 0.0) {
    throw ConfigInvalid("world config has out-of-range counts");
  }
  if (std::abs(behavior_mix.sum() - 1.0) > 1e-9) {
    throw ConfigInvalid("behavior mix probabilities must sum to 1");
  }
}

Scene generate_scene(const WorldConfig & cfg, uint64_t scene_index)
{
  cfg.validate();
  std::mt19937_64 rng(splitmix64(cfg.seed * 0x9e3779b97f4a7c15ULL + scene_index));

  Scene scene;
  scene.t_hist = cfg.t_hist;
  scene.t_fut = cfg.t_fut;
  scene.frequency_hz = cfg.frequency_hz;

  const int total = cfg.t_hist + cfg.t_fut;
  const double dt = 1.0 / cfg.frequency_hz;

  std::vector<PathSpec> paths;
  for (int j = 0; j < cfg.n_agents; ++j) {
    PathSpec path;
    path.behavior = sample_behavior(rng, cfg.behavior_mix);
    const double spread = j == 0 ? 10.0 : 70.0;
    path.start = Vec2(uniform(rng, -spread, spread), uniform(rng, -spread, spread));
    path.heading = uniform(rng, -M_PI, M_PI);

    AgentCategory category = AgentCategory::kVehicle;
    if (j > 0) {
      const double uc = uniform01(rng);
      if (uc < 0.15) {
        category = AgentCategory::kPedestrian;
      } else if (uc < 0.25) {
        category = AgentCategory::kCyclist;
      }
    }
    switch (category) {
      case AgentCategory::kVehicle:
        path.speed = uniform(rng, 3.0, 12.0);
        break;
      case AgentCategory::kCyclist:
        path.speed = uniform(rng, 2.5, 6.0);
        break;
      case AgentCategory::kPedestrian:
        path.speed = uniform(rng, 0.8, 1.8);
        path.behavior = Behavior::kConstantVelocity;
        break;
    }
    path.turn_radius = uniform(rng, 18.0, 60.0);
    path.turn_sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
    path.lc_offset = uniform(rng, 2.5, 4.0) * (uniform01(rng) < 0.5 ? -1.0 : 1.0);
    path.lc_time = uniform(rng, 0.3, 0.8) * total * dt;
    path.lc_tau = uniform(rng, 0.8, 1.6);
    path.stop_time = uniform(rng, 0.4, 0.8) * total * dt;
    path.stop_tau = uniform(rng, 0.6, 1.2);
    path.noise_amp = uniform(rng, 0.0, 0.04);
    path.noise_freq = uniform(rng, 0.2, 0.9);
    path.noise_phase = uniform(rng, 0.0, 2.0 * M_PI);
    paths.push_back(path);

    AgentTrack track;
    track.id = "agent_" + std::to_string(j);
    track.category = category;
    track.states.resize(total);

    // Non-focal agents may appear mid-history.
    int first_valid = 0;
    if (j > 0 && uniform01(rng) < 0.25) {
      first_valid = static_cast<int>(uniform(rng, 1.0, cfg.t_hist * 0.6));
    }

    std::vector<Vec2> pos(total);
    for (int k = 0; k < total; ++k) {
      pos[k] = path.eval(k * dt, true);
    }
    // Velocity and acceleration as finite differences of position, so the
    // stored kinematics are exactly self-consistent.
    std::vector<Vec2> vel(total);
    for (int k = 0; k < total; ++k) {
      if (k == 0) {
        vel[k] = (pos[1] - pos[0]) * cfg.frequency_hz;
      } else if (k == total - 1) {
        vel[k] = (pos[k] - pos[k - 1]) * cfg.frequency_hz;
      } else {
        vel[k] = (pos[k + 1] - pos[k - 1]) * (0.5 * cfg.frequency_hz);
      }
    }
    double prev_heading = path.heading;
    for (int k = 0; k < total; ++k) {
      AgentState st;
      st.position = pos[k];
      st.velocity = vel[k];
      if (k == 0) {
        st.acceleration = (vel[1] - vel[0]) * cfg.frequency_hz;
      } else if (k == total - 1) {
        st.acceleration = (vel[k] - vel[k - 1]) * cfg.frequency_hz;
      } else {
        st.acceleration = (vel[k + 1] - vel[k - 1]) * (0.5 * cfg.frequency_hz);
      }
      if (st.velocity.norm() > 0.5) {
        st.heading = std::atan2(st.velocity.y(), st.velocity.x());
        prev_heading = st.heading;
      } else {
        st.heading = prev_heading;
      }
      st.valid = k >= first_valid;
      track.states[k] = st;
    }
    scene.tracks.push_back(std::move(track));
  }

  scene.focal_ids.push_back("agent_0");

  // Lanes: centerlines of the agent paths (noise-free, extended past the
  // horizon) plus background straights.
  const int lane_budget = cfg.n_lanes;
  int lane_id = 0;
  for (int j = 0; j < cfg.n_agents && lane_id < lane_budget; ++j) {
    const double t_end = total * dt * 1.25;
    const int n_pts = 40;
    LanePolyline lane;
    lane.id = "lane_" + std::to_string(lane_id++);
    lane.points.resize(n_pts, 2);
    for (int i = 0; i < n_pts; ++i) {
      const Vec2 p = paths[j].eval(t_end * i / (n_pts - 1), false);
      lane.points.row(i) = p.transpose();
    }
    scene.lanes.push_back(std::move(lane));
  }
  while (lane_id < lane_budget) {
    const Vec2 start(uniform(rng, -120.0, 120.0), uniform(rng, -120.0, 120.0));
    const double heading = uniform(rng, -M_PI, M_PI);
    const double length = uniform(rng, 60.0, 150.0);
    const Vec2 dir(std::cos(heading), std::sin(heading));
    LanePolyline lane;
    lane.id = "lane_" + std::to_string(lane_id++);
    lane.points.resize(2, 2);
    lane.points.row(0) = start.transpose();
    lane.points.row(1) = (start + dir * length).transpose();
    scene.lanes.push_back(std::move(lane));
  }
  return scene;
}

namespace
{

json scene_to_json(const Scene & scene)
{
  json j;
  j["format_version"] = kSceneFormatVersion;
  j["header"] = {
    {"q", scene.frequency_hz}, {"t_hist", scene.t_hist}, {"t_fut", scene.t_fut}};
  j["lanes"] = json::array();
  for (const auto & lane : scene.lanes) {
    json pts = json::array();
    for (Eigen::Index i = 0; i < lane.points.rows(); ++i) {
      pts.push_back({lane.points(i, 0), lane.points(i, 1)});
    }
    j["lanes"].push_back({{"id", lane.id}, {"points", std::move(pts)}});
  }
  j["tracks"] = json::array();
  for (const auto & track : scene.tracks) {
    json states = json::array();
    for (const auto & st : track.states) {
      states.push_back(
        {st.position.x(), st.position.y(), st.heading, st.velocity.x(), st.velocity.y(),
         st.acceleration.x(), st.acceleration.y(), st.valid ? 1 : 0});
    }
    j["tracks"].push_back(
      {{"id", track.id},
       {"category", static_cast<int>(track.category)},
       {"states", std::move(states)}});
  }
  j["focal_ids"] = scene.focal_ids;
  return j;
}

Scene scene_from_json(const json & j)
{
  if (!j.contains("format_version") || j["format_version"] != kSceneFormatVersion) {
    throw FormatVersionMismatch("unsupported scene format version");
  }
  Scene scene;
  scene.frequency_hz = j["header"]["q"].get<double>();
  scene.t_hist = j["header"]["t_hist"].get<int>();
  scene.t_fut = j["header"]["t_fut"].get<int>();
  for (const auto & jl : j["lanes"]) {
    LanePolyline lane;
    lane.id = jl["id"].get<std::string>();
    const auto & pts = jl["points"];
    lane.points.resize(static_cast<Eigen::Index>(pts.size()), 2);
    for (size_t i = 0; i < pts.size(); ++i) {
      lane.points(static_cast<Eigen::Index>(i), 0) = pts[i][0].get<double>();
      lane.points(static_cast<Eigen::Index>(i), 1) = pts[i][1].get<double>();
    }
    scene.lanes.push_back(std::move(lane));
  }
  for (const auto & jt : j["tracks"]) {
    AgentTrack track;
    track.id = jt["id"].get<std::string>();
    track.category = static_cast<AgentCategory>(jt["category"].get<int>());
    for (const auto & js : jt["states"]) {
      AgentState st;
      st.position = Vec2(js[0].get<double>(), js[1].get<double>());
      st.heading = js[2].get<double>();
      st.velocity = Vec2(js[3].get<double>(), js[4].get<double>());
      st.acceleration = Vec2(js[5].get<double>(), js[6].get<double>());
      st.valid = js[7].get<int>() != 0;
      track.states.push_back(st);
    }
    scene.tracks.push_back(std::move(track));
  }
  scene.focal_ids = j["focal_ids"].get<std::vector<std::string>>();
  return scene;
}

bool is_binary_path(const std::filesystem::path & path)
{
  return path.extension() == ".rmsb";
}

template <typename T>
void put(std::string & buf, const T & v)
{
  static_assert(std::endian::native == std::endian::little);
  const char * p = reinterpret_cast<const char *>(&v);
  buf.append(p, sizeof(T));
}

template <typename T>
T take(const std::string & buf, size_t & off)
{
  if (off + sizeof(T) > buf.size()) {
    throw CorruptFile("binary scene file truncated");
  }
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

void put_string(std::string & buf, const std::string & s)
{
  put<uint32_t>(buf, static_cast<uint32_t>(s.size()));
  buf.append(s);
}

std::string take_string(const std::string & buf, size_t & off)
{
  const auto n = take<uint32_t>(buf, off);
  if (off + n > buf.size()) {
    throw CorruptFile("binary scene file truncated");
  }
  std::string s = buf.substr(off, n);
  off += n;
  return s;
}

}  // namespace

void write_scene(const Scene & scene, const std::filesystem::path & path)
{
  if (is_binary_path(path)) {
    std::string buf;
    buf.append("RMSB0001");
    put<double>(buf, scene.frequency_hz);
    put<int32_t>(buf, scene.t_hist);
    put<int32_t>(buf, scene.t_fut);
    put<uint32_t>(buf, static_cast<uint32_t>(scene.lanes.size()));
    for (const auto & lane : scene.lanes) {
      put_string(buf, lane.id);
      put<uint32_t>(buf, static_cast<uint32_t>(lane.points.rows()));
      for (Eigen::Index i = 0; i < lane.points.rows(); ++i) {
        put<double>(buf, lane.points(i, 0));
        put<double>(buf, lane.points(i, 1));
      }
    }
    put<uint32_t>(buf, static_cast<uint32_t>(scene.tracks.size()));
    for (const auto & track : scene.tracks) {
      put_string(buf, track.id);
      put<uint8_t>(buf, static_cast<uint8_t>(track.category));
      put<uint32_t>(buf, static_cast<uint32_t>(track.states.size()));
      for (const auto & st : track.states) {
        put<double>(buf, st.position.x());
        put<double>(buf, st.position.y());
        put<double>(buf, st.heading);
        put<double>(buf, st.velocity.x());
        put<double>(buf, st.velocity.y());
        put<double>(buf, st.acceleration.x());
        put<double>(buf, st.acceleration.y());
        put<uint8_t>(buf, st.valid ? 1 : 0);
      }
    }
    put<uint32_t>(buf, static_cast<uint32_t>(scene.focal_ids.size()));
    for (const auto & id : scene.focal_ids) {
      put_string(buf, id);
    }
    put<uint64_t>(buf, fnv1a64(buf.data(), buf.size()));
    std::ofstream out(path, std::ios::binary);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) {
      throw std::runtime_error("failed to write " + path.string());
    }
    return;
  }

  json j = scene_to_json(scene);
  const std::string payload = j.dump();
  json wrapper;
  wrapper["scene"] = std::move(j);
  wrapper["checksum"] = to_hex(fnv1a64(payload));
  std::ofstream out(path);
  out << wrapper.dump(1) << '\n';
  if (!out) {
    throw std::runtime_error("failed to write " + path.string());
  }
}

Scene read_scene(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  if (is_binary_path(path)) {
    if (buf.size() < 16 || buf.compare(0, 8, "RMSB0001") != 0) {
      throw FormatVersionMismatch("bad binary scene magic");
    }
    uint64_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
    if (stored != fnv1a64(buf.data(), buf.size() - 8)) {
      throw CorruptFile("binary scene checksum mismatch");
    }
    size_t off = 8;
    Scene scene;
    scene.frequency_hz = take<double>(buf, off);
    scene.t_hist = take<int32_t>(buf, off);
    scene.t_fut = take<int32_t>(buf, off);
    const auto n_lanes = take<uint32_t>(buf, off);
    for (uint32_t l = 0; l < n_lanes; ++l) {
      LanePolyline lane;
      lane.id = take_string(buf, off);
      const auto n = take<uint32_t>(buf, off);
      lane.points.resize(n, 2);
      for (uint32_t i = 0; i < n; ++i) {
        lane.points(i, 0) = take<double>(buf, off);
        lane.points(i, 1) = take<double>(buf, off);
      }
      scene.lanes.push_back(std::move(lane));
    }
    const auto n_tracks = take<uint32_t>(buf, off);
    for (uint32_t ti = 0; ti < n_tracks; ++ti) {
      AgentTrack track;
      track.id = take_string(buf, off);
      track.category = static_cast<AgentCategory>(take<uint8_t>(buf, off));
      const auto n = take<uint32_t>(buf, off);
      for (uint32_t i = 0; i < n; ++i) {
        AgentState st;
        st.position.x() = take<double>(buf, off);
        st.position.y() = take<double>(buf, off);
        st.heading = take<double>(buf, off);
        st.velocity.x() = take<double>(buf, off);
        st.velocity.y() = take<double>(buf, off);
        st.acceleration.x() = take<double>(buf, off);
        st.acceleration.y() = take<double>(buf, off);
        st.valid = take<uint8_t>(buf, off) != 0;
        track.states.push_back(st);
      }
      scene.tracks.push_back(std::move(track));
    }
    const auto n_focal = take<uint32_t>(buf, off);
    for (uint32_t i = 0; i < n_focal; ++i) {
      scene.focal_ids.push_back(take_string(buf, off));
    }
    return scene;
  }

  json wrapper;
  try {
    wrapper = json::parse(buf);
  } catch (const json::parse_error &) {
    throw CorruptFile("scene file is not valid JSON: " + path.string());
  }
  if (!wrapper.contains("scene") || !wrapper.contains("checksum")) {
    throw CorruptFile("scene file missing payload or checksum");
  }
  const std::string payload = wrapper["scene"].dump();
  if (wrapper["checksum"].get<std::string>() != to_hex(fnv1a64(payload))) {
    throw CorruptFile("scene checksum mismatch");
  }
  return scene_from_json(wrapper["scene"]);
}

bool scenes_equal(const Scene & a, const Scene & b)
{
  if (a.t_hist != b.t_hist || a.t_fut != b.t_fut || a.frequency_hz != b.frequency_hz ||
      a.focal_ids != b.focal_ids || a.lanes.size() != b.lanes.size() ||
      a.tracks.size() != b.tracks.size()) {
    return false;
  }
  for (size_t i = 0; i < a.lanes.size(); ++i) {
    if (a.lanes[i].id != b.lanes[i].id || a.lanes[i].points != b.lanes[i].points) {
      return false;
    }
  }
  for (size_t i = 0; i < a.tracks.size(); ++i) {
    const auto & ta = a.tracks[i];
    const auto & tb = b.tracks[i];
    if (ta.id != tb.id || ta.category != tb.category || ta.states.size() != tb.states.size()) {
      return false;
    }
    for (size_t k = 0; k < ta.states.size(); ++k) {
      const auto & sa = ta.states[k];
      const auto & sb = tb.states[k];
      if (sa.position != sb.position || sa.heading != sb.heading ||
          sa.velocity != sb.velocity || sa.acceleration != sb.acceleration ||
          sa.valid != sb.valid) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace realmotion
