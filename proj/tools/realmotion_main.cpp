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

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "realmotion/evaluation.hpp"
#include "realmotion/hashing.hpp"
#include "realmotion/training.hpp"
#include "realmotion/world.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace realmotion;

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitMissingArtifact = 4;

struct MissingArtifact : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- manifests

/// Records what a command did: resolved config, seed, input hashes, outputs.
class Manifest
{
public:
  Manifest(std::string command, json resolved_config, uint64_t seed)
  : command_(std::move(command)), config_(std::move(resolved_config)), seed_(seed)
  {
  }

  void add_input(const fs::path & path)
  {
    inputs_[path.string()] = hash_file(path.string());
  }

  void add_output(const fs::path & path) { outputs_.push_back(path.string()); }

  void write(const fs::path & dir) const
  {
    json j;
    j["command"] = command_;
    j["config"] = config_;
    j["seed"] = seed_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    std::ofstream out(dir / "manifest.json");
    out << j.dump(1) << '\n';
  }

private:
  std::string command_;
  json config_;
  uint64_t seed_;
  json inputs_ = json::object();
  std::vector<std::string> outputs_;
};

std::optional<uint64_t> env_seed()
{
  const char * value = std::getenv("REALMOTION_SEED");
  if (value == nullptr || *value == '\0') {
    return std::nullopt;
  }
  return std::strtoull(value, nullptr, 10);
}

json load_json_file(const fs::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw MissingArtifact("cannot open " + path.string());
  }
  return json::parse(in);
}

// ------------------------------------------------------------------ configs

WorldConfig world_config_from_json(const json & j)
{
  WorldConfig cfg;
  cfg.n_agents = j.value("n_agents", cfg.n_agents);
  cfg.n_lanes = j.value("n_lanes", cfg.n_lanes);
  cfg.t_hist = j.value("t_hist", cfg.t_hist);
  cfg.t_fut = j.value("t_fut", cfg.t_fut);
  cfg.frequency_hz = j.value("frequency_hz", cfg.frequency_hz);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("behavior_mix")) {
    const auto & m = j["behavior_mix"];
    cfg.behavior_mix.constant_velocity =
      m.value("constant_velocity", cfg.behavior_mix.constant_velocity);
    cfg.behavior_mix.turn = m.value("turn", cfg.behavior_mix.turn);
    cfg.behavior_mix.lane_change = m.value("lane_change", cfg.behavior_mix.lane_change);
    cfg.behavior_mix.stop = m.value("stop", cfg.behavior_mix.stop);
  }
  return cfg;
}

json world_config_to_json(const WorldConfig & cfg)
{
  return json{
    {"n_agents", cfg.n_agents},
    {"n_lanes", cfg.n_lanes},
    {"t_hist", cfg.t_hist},
    {"t_fut", cfg.t_fut},
    {"frequency_hz", cfg.frequency_hz},
    {"seed", cfg.seed},
    {"behavior_mix",
     {{"constant_velocity", cfg.behavior_mix.constant_velocity},
      {"turn", cfg.behavior_mix.turn},
      {"lane_change", cfg.behavior_mix.lane_change},
      {"stop", cfg.behavior_mix.stop}}}};
}

ModelConfig model_config_from_json(const json & j)
{
  ModelConfig cfg;
  cfg.dim = j.value("dim", cfg.dim);
  cfg.heads = j.value("heads", cfg.heads);
  cfg.depth = j.value("depth", cfg.depth);
  cfg.neighborhood_window = j.value("neighborhood_window", cfg.neighborhood_window);
  cfg.num_modes = j.value("num_modes", cfg.num_modes);
  cfg.k_future = j.value("k_future", cfg.k_future);
  cfg.decoder_hidden = j.value("decoder_hidden", cfg.decoder_hidden);
  cfg.context_stream = j.value("context_stream", cfg.context_stream);
  cfg.trajectory_stream = j.value("trajectory_stream", cfg.trajectory_stream);
  cfg.memory_capacity = j.value("memory_capacity", cfg.memory_capacity);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

json model_config_to_json(const ModelConfig & cfg)
{
  return json{
    {"dim", cfg.dim},
    {"heads", cfg.heads},
    {"depth", cfg.depth},
    {"neighborhood_window", cfg.neighborhood_window},
    {"num_modes", cfg.num_modes},
    {"k_future", cfg.k_future},
    {"decoder_hidden", cfg.decoder_hidden},
    {"context_stream", cfg.context_stream},
    {"trajectory_stream", cfg.trajectory_stream},
    {"memory_capacity", cfg.memory_capacity},
    {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const json & j)
{
  TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.gradient_steps = j.value("gradient_steps", cfg.gradient_steps);
  if (j.contains("split_points")) {
    cfg.split_points = j["split_points"].get<std::vector<int>>();
  }
  cfg.radius = j.value("radius", cfg.radius);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

json train_config_to_json(const TrainConfig & cfg)
{
  return json{
    {"epochs", cfg.epochs},
    {"batch_size", cfg.batch_size},
    {"learning_rate", cfg.learning_rate},
    {"weight_decay", cfg.weight_decay},
    {"gradient_steps", cfg.gradient_steps},
    {"split_points", cfg.split_points},
    {"radius", cfg.radius},
    {"seed", cfg.seed}};
}

// ----------------------------------------------------------------- datasets

std::string scene_file_name(int index, const std::string & extension)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%06d", index);
  return std::string(buf) + extension;
}

std::vector<fs::path> list_scene_files(const fs::path & dir)
{
  if (!fs::is_directory(dir)) {
    throw MissingArtifact("dataset directory not found: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto & entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".json" || ext == ".rmsb") &&
        entry.path().filename().string().rfind("scene_", 0) == 0) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<Scene> load_dataset(const fs::path & dir, int limit = 0)
{
  const auto files = list_scene_files(dir);
  if (files.empty()) {
    throw MissingArtifact("no scene files in " + dir.string());
  }
  std::vector<Scene> scenes;
  for (const auto & file : files) {
    scenes.push_back(read_scene(file));
    if (limit > 0 && static_cast<int>(scenes.size()) >= limit) {
      break;
    }
  }
  return scenes;
}

// --------------------------------------------------------------------- svg

std::string svg_color(int mode)
{
  static const char * palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return palette[mode % 8];
}

/// Minimal line-plot writer used for the loss curve.
void write_loss_curve_svg(const std::vector<EpochStats> & history, const fs::path & path)
{
  const double width = 640.0, height = 400.0, margin = 50.0;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto & s : history) {
    lo = std::min(lo, s.mean_total);
    hi = std::max(hi, s.mean_total);
  }
  if (!(hi > lo)) {
    hi = lo + 1.0;
  }
  const auto x_of = [&](double e) {
    return margin + (width - 2 * margin) * e / std::max<size_t>(1, history.size() - 1);
  };
  const auto y_of = [&](double v) {
    return height - margin - (height - 2 * margin) * (v - lo) / (hi - lo);
  };

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  svg << "<text x='" << width / 2 << "' y='20' text-anchor='middle'>training loss</text>\n";
  svg << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
      << "' y2='" << height - margin << "' stroke='black'/>\n";
  svg << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
      << height - margin << "' stroke='black'/>\n";
  svg << "<polyline fill='none' stroke='#1f77b4' stroke-width='2' points='";
  for (size_t i = 0; i < history.size(); ++i) {
    svg << x_of(static_cast<double>(i)) << "," << y_of(history[i].mean_total) << " ";
  }
  svg << "'/>\n";
  svg << "<text x='" << margin << "' y='" << margin - 8 << "' font-size='12'>" << hi
      << "</text>\n";
  svg << "<text x='" << margin << "' y='" << height - margin + 16 << "' font-size='12'>" << lo
      << "</text>\n</svg>\n";
  std::ofstream out(path);
  out << svg.str();
}

struct PanelContent
{
  std::string title;
  // Polylines in global coordinates with a stroke color and width.
  struct Line
  {
    std::vector<Vec2> points;
    std::string color;
    double width = 1.0;
  };
  std::vector<Line> lines;
};

/// 2x2 panel figure of trajectory predictions in a shared global viewport.
void write_scene_panels_svg(const std::vector<PanelContent> & panels, const fs::path & path)
{
  const double panel = 320.0, pad = 30.0;
  double lo_x = 1e18, hi_x = -1e18, lo_y = 1e18, hi_y = -1e18;
  for (const auto & p : panels) {
    for (const auto & line : p.lines) {
      for (const auto & pt : line.points) {
        lo_x = std::min(lo_x, pt.x());
        hi_x = std::max(hi_x, pt.x());
        lo_y = std::min(lo_y, pt.y());
        hi_y = std::max(hi_y, pt.y());
      }
    }
  }
  const double span = std::max(hi_x - lo_x, hi_y - lo_y) + 1e-6;
  const double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);

  std::ostringstream svg;
  const double width = 2 * panel + 3 * pad, height = 2 * panel + 3 * pad;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  for (size_t i = 0; i < panels.size() && i < 4; ++i) {
    const double ox = pad + (i % 2) * (panel + pad);
    const double oy = pad + (i / 2) * (panel + pad);
    const auto to_px = [&](const Vec2 & pt) {
      const double u = ox + panel * (0.5 + (pt.x() - cx) / span * 0.9);
      const double v = oy + panel * (0.5 - (pt.y() - cy) / span * 0.9);
      return std::make_pair(u, v);
    };
    svg << "<rect x='" << ox << "' y='" << oy << "' width='" << panel << "' height='" << panel
        << "' fill='none' stroke='#cccccc'/>\n";
    svg << "<text x='" << ox + 4 << "' y='" << oy + 14 << "' font-size='12'>"
        << panels[i].title << "</text>\n";
    for (const auto & line : panels[i].lines) {
      if (line.points.size() < 2) {
        continue;
      }
      svg << "<polyline fill='none' stroke='" << line.color << "' stroke-width='" << line.width
          << "' points='";
      for (const auto & pt : line.points) {
        const auto [u, v] = to_px(pt);
        svg << u << "," << v << " ";
      }
      svg << "'/>\n";
    }
  }
  svg << "</svg>\n";
  std::ofstream out(path);
  out << svg.str();
}

// ----------------------------------------------------------------- commands

struct GenDataArgs
{
  std::string config_path;
  std::string out_dir;
  int count = -1;
  int64_t seed = -1;
  int jobs = 1;
  std::string format = "json";
};

int cmd_gen_data(const GenDataArgs & args)
{
  json file_cfg = json::object();
  if (!args.config_path.empty()) {
    file_cfg = load_json_file(args.config_path);
  }
  WorldConfig cfg = world_config_from_json(file_cfg);
  int count = args.count >= 0 ? args.count : file_cfg.value("count", 100);
  if (args.seed >= 0) {
    cfg.seed = static_cast<uint64_t>(args.seed);
  }
  if (const auto override_seed = env_seed()) {
    cfg.seed = *override_seed;
  }
  cfg.validate();
  const std::string extension = args.format == "rmsb" ? ".rmsb" : ".json";

  fs::create_directories(args.out_dir);
  std::atomic<int> next{0};
  const int jobs = std::max(1, args.jobs);
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        const Scene scene = generate_scene(cfg, static_cast<uint64_t>(i));
        write_scene(scene, fs::path(args.out_dir) / scene_file_name(i, extension));
      }
    });
  }
  for (auto & worker : workers) {
    worker.join();
  }

  json resolved = world_config_to_json(cfg);
  resolved["count"] = count;
  resolved["format"] = args.format;
  Manifest manifest("gen-data", resolved, cfg.seed);
  if (!args.config_path.empty()) {
    manifest.add_input(args.config_path);
  }
  for (int i = 0; i < count; ++i) {
    manifest.add_output(fs::path(args.out_dir) / scene_file_name(i, extension));
  }
  manifest.write(args.out_dir);
  std::cout << "wrote " << count << " scenes to " << args.out_dir << "\n";
  return kExitOk;
}

struct TrainArgs
{
  std::string dataset_dir;
  std::string config_path;
  std::string out_dir;
  std::string ablate;
  std::string streams = "unset";
  int epochs = -1;
  int gradient_steps = -1;
  int64_t seed = -1;
  int limit = 0;
};

int cmd_train(const TrainArgs & args)
{
  json file_cfg = json::object();
  if (!args.config_path.empty()) {
    file_cfg = load_json_file(args.config_path);
  }
  ModelConfig model_cfg = model_config_from_json(file_cfg.value("model", json::object()));
  TrainConfig train_cfg = train_config_from_json(file_cfg.value("train", json::object()));
  if (args.epochs >= 0) {
    train_cfg.epochs = args.epochs;
  }
  if (args.gradient_steps >= 0) {
    train_cfg.gradient_steps = args.gradient_steps;
  }
  if (args.seed >= 0) {
    model_cfg.seed = static_cast<uint64_t>(args.seed);
    train_cfg.seed = static_cast<uint64_t>(args.seed);
  }
  if (const auto override_seed = env_seed()) {
    model_cfg.seed = *override_seed;
    train_cfg.seed = *override_seed;
  }

  if (args.streams != "unset") {
    model_cfg.context_stream = args.streams.find("context") != std::string::npos;
    model_cfg.trajectory_stream = args.streams.find("trajectory") != std::string::npos;
  }

  const auto scenes = load_dataset(args.dataset_dir, args.limit);
  if (args.ablate == "realmotion-i") {
    // Independent variant: no scene reorganization, no streams.
    train_cfg.split_points = {scenes.front().t_hist};
    model_cfg.context_stream = false;
    model_cfg.trajectory_stream = false;
  } else if (!args.ablate.empty()) {
    throw ConfigInvalid("unknown ablation: " + args.ablate);
  }
  if (
    train_cfg.gradient_steps < 1 ||
    train_cfg.gradient_steps > static_cast<int>(train_cfg.split_points.size())) {
    throw ConfigInvalid("gradient_steps must lie in [1, segments]");
  }

  fs::create_directories(args.out_dir);
  Model model(model_cfg);
  json epochs_json = json::array();
  const auto history = train(model, scenes, train_cfg, [&](const EpochStats & s) {
    epochs_json.push_back(
      {{"epoch", s.epoch},
       {"total", s.mean_total},
       {"reg", s.mean_reg},
       {"cls", s.mean_cls},
       {"refine", s.mean_refine}});
    std::cout << "epoch " << s.epoch << " loss " << s.mean_total << "\n";
  });

  const fs::path ckpt = fs::path(args.out_dir) / "checkpoint.json";
  const fs::path metrics = fs::path(args.out_dir) / "training_metrics.json";
  const fs::path curve = fs::path(args.out_dir) / "loss_curve.svg";
  model.save_checkpoint(ckpt);
  {
    json j;
    j["config_hash"] = model_cfg.hash();
    j["epochs"] = std::move(epochs_json);
    std::ofstream out(metrics);
    out << j.dump(1) << '\n';
  }
  write_loss_curve_svg(history, curve);

  json resolved;
  resolved["model"] = model_config_to_json(model_cfg);
  resolved["train"] = train_config_to_json(train_cfg);
  resolved["ablate"] = args.ablate;
  Manifest manifest("train", resolved, train_cfg.seed);
  if (!args.config_path.empty()) {
    manifest.add_input(args.config_path);
  }
  for (const auto & file : list_scene_files(args.dataset_dir)) {
    manifest.add_input(file);
  }
  manifest.add_output(ckpt);
  manifest.add_output(metrics);
  manifest.add_output(curve);
  manifest.write(args.out_dir);
  return kExitOk;
}

struct EvalArgs
{
  std::string checkpoint;
  std::string dataset_dir;
  std::string out_dir;
  std::string split_points;
  int limit = 0;
};

std::vector<int> parse_split_points(const std::string & text)
{
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(std::stoi(item));
  }
  return out;
}

int cmd_eval(const EvalArgs & args)
{
  if (!fs::exists(args.checkpoint)) {
    throw MissingArtifact("checkpoint not found: " + args.checkpoint);
  }
  const Model model = Model::load_checkpoint(args.checkpoint);
  const auto scenes = load_dataset(args.dataset_dir, args.limit);

  EvalConfig cfg;
  if (!args.split_points.empty()) {
    cfg.split_points = parse_split_points(args.split_points);
  }
  const MetricReport report = evaluate(model, scenes, cfg);

  fs::create_directories(args.out_dir);
  const fs::path metrics = fs::path(args.out_dir) / "metrics.json";
  write_metric_report(report, metrics);

  json resolved;
  resolved["split_points"] = cfg.split_points;
  resolved["radius"] = cfg.radius;
  Manifest manifest("eval", resolved, model.config().seed);
  manifest.add_input(args.checkpoint);
  for (const auto & file : list_scene_files(args.dataset_dir)) {
    manifest.add_input(file);
  }
  manifest.add_output(metrics);
  manifest.write(args.out_dir);

  std::cout << "scenes " << report.count << " minADE6 " << report.min_ade_6 << " minFDE6 "
            << report.min_fde_6 << " MR6 " << report.miss_rate_6 << "\n";
  return kExitOk;
}

struct BenchArgs
{
  std::string checkpoint;
  std::string dataset_dir;
  std::string out_dir;
  int scene_index = 0;
  int reps = 100;
  std::string split_points;
};

int cmd_bench(const BenchArgs & args)
{
  if (!fs::exists(args.checkpoint)) {
    throw MissingArtifact("checkpoint not found: " + args.checkpoint);
  }
  const Model model = Model::load_checkpoint(args.checkpoint);
  const auto scenes = load_dataset(args.dataset_dir, args.scene_index + 1);
  if (static_cast<int>(scenes.size()) <= args.scene_index) {
    throw MissingArtifact("scene index out of range");
  }

  EvalConfig cfg;
  if (!args.split_points.empty()) {
    cfg.split_points = parse_split_points(args.split_points);
  }
  const LatencyReport report =
    latency_bench(model, scenes[static_cast<size_t>(args.scene_index)], cfg, args.reps);

  fs::create_directories(args.out_dir);
  const fs::path out_file = fs::path(args.out_dir) / "bench.json";
  {
    json j;
    j["online_median_ms"] = report.online_median_ms;
    j["online_iqr_ms"] = report.online_iqr_ms;
    j["offline_median_ms"] = report.offline_median_ms;
    j["offline_iqr_ms"] = report.offline_iqr_ms;
    j["repetitions"] = report.repetitions;
    j["predictions_identical"] = report.predictions_identical;
    j["hardware"] = report.hardware;
    std::ofstream out(out_file);
    out << j.dump(1) << '\n';
  }

  json resolved;
  resolved["scene_index"] = args.scene_index;
  resolved["reps"] = args.reps;
  resolved["split_points"] = cfg.split_points;
  Manifest manifest("bench", resolved, model.config().seed);
  manifest.add_input(args.checkpoint);
  manifest.add_output(out_file);
  manifest.write(args.out_dir);

  std::cout << "online " << report.online_median_ms << " ms, offline "
            << report.offline_median_ms << " ms, identical "
            << (report.predictions_identical ? "yes" : "no") << "\n";
  return kExitOk;
}

struct PlotArgs
{
  std::string checkpoint;
  std::string dataset_dir;
  std::string out_dir;
  int scene_index = 0;
  std::string split_points;
};

int cmd_plot(const PlotArgs & args)
{
  if (!fs::exists(args.checkpoint)) {
    throw MissingArtifact("checkpoint not found: " + args.checkpoint);
  }
  const Model model = Model::load_checkpoint(args.checkpoint);
  const auto scenes = load_dataset(args.dataset_dir, args.scene_index + 1);
  if (static_cast<int>(scenes.size()) <= args.scene_index) {
    throw MissingArtifact("scene index out of range");
  }
  const Scene & scene = scenes[static_cast<size_t>(args.scene_index)];

  EvalConfig cfg;
  if (!args.split_points.empty()) {
    cfg.split_points = parse_split_points(args.split_points);
  }
  const SceneSequence seq =
    split_scene(scene, cfg.split_points, scene.focal_ids.front(), cfg.radius);

  // Shared background: lanes plus the focal ground-truth future.
  std::vector<PanelContent::Line> background;
  for (const auto & lane : scene.lanes) {
    PanelContent::Line line;
    line.color = "#dddddd";
    for (Eigen::Index i = 0; i < lane.points.rows(); ++i) {
      line.points.emplace_back(lane.points.row(i).transpose());
    }
    background.push_back(std::move(line));
  }
  const AgentTrack * focal = scene.find_track(scene.focal_ids.front());
  PanelContent::Line gt_line;
  gt_line.color = "#2ca02c";
  gt_line.width = 2.0;
  for (int f = scene.t_hist; f < scene.total_frames(); ++f) {
    gt_line.points.push_back(focal->states[static_cast<size_t>(f)].position);
  }

  // Per-segment forecasts, progressively refined; panel 4 is the final one.
  StreamState state = model.make_state(seq.focal);
  std::vector<PanelContent> panels;
  SegmentOutput last;
  for (int i = 0; i < seq.num_segments(); ++i) {
    const VectorizedScene & vs = seq.sub_scenes[static_cast<size_t>(i)];
    last = model.run_segment(vs, state, scene.frequency_hz, false);
    PanelContent panel;
    panel.title = "segment " + std::to_string(i + 1);
    panel.lines = background;
    panel.lines.push_back(gt_line);
    const Eigen::Matrix2d rot = rotation2d(vs.frame.theta);
    for (int m = 0; m < last.refined.num_modes; ++m) {
      PanelContent::Line line;
      line.color = svg_color(m);
      line.width = 1.5;
      const auto traj = last.refined.mode_trajectory(m);
      for (Eigen::Index k = 0; k < traj.rows(); ++k) {
        line.points.emplace_back(rot * traj.row(k).transpose() + vs.frame.position());
      }
      panel.lines.push_back(std::move(line));
    }
    panels.push_back(std::move(panel));
  }
  // Final panel: the last refined forecast on its own, as the end product.
  PanelContent final_panel = panels.back();
  final_panel.title = "final";
  panels.push_back(std::move(final_panel));
  while (panels.size() > 4) {
    panels.erase(panels.begin());
  }

  fs::create_directories(args.out_dir);
  char name[48];
  std::snprintf(name, sizeof(name), "scene_%06d_progression.svg", args.scene_index);
  const fs::path out_file = fs::path(args.out_dir) / name;
  write_scene_panels_svg(panels, out_file);

  json resolved;
  resolved["scene_index"] = args.scene_index;
  resolved["split_points"] = cfg.split_points;
  Manifest manifest("plot", resolved, model.config().seed);
  manifest.add_input(args.checkpoint);
  manifest.add_output(out_file);
  manifest.write(args.out_dir);
  std::cout << "wrote " << out_file.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"RealMotion: continuous motion forecasting on synthetic driving scenes"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  auto * gen = app.add_subcommand("gen-data", "Generate a synthetic scene dataset");
  gen->add_option("--config", gen_args.config_path, "World config (JSON)");
  gen->add_option("--out", gen_args.out_dir, "Output dataset directory")->required();
  gen->add_option("--count", gen_args.count, "Number of scenes");
  gen->add_option("--seed", gen_args.seed, "Seed override");
  gen->add_option("--jobs", gen_args.jobs, "Worker threads");
  gen->add_option("--format", gen_args.format, "Scene file format: json or rmsb");

  TrainArgs train_args;
  auto * tr = app.add_subcommand("train", "Train a model on a dataset");
  tr->add_option("--dataset", train_args.dataset_dir, "Dataset directory")->required();
  tr->add_option("--config", train_args.config_path, "Model/train config (JSON)");
  tr->add_option("--out", train_args.out_dir, "Output directory")->required();
  tr->add_option("--ablate", train_args.ablate, "Ablation variant (realmotion-i)");
  tr->add_option(
    "--streams", train_args.streams, "Enabled streams: context,trajectory or none");
  tr->add_option("--epochs", train_args.epochs, "Epoch override");
  tr->add_option("--gradient-steps", train_args.gradient_steps, "Gradient steps override");
  tr->add_option("--seed", train_args.seed, "Seed override");
  tr->add_option("--limit", train_args.limit, "Use only the first N scenes");

  EvalArgs eval_args;
  auto * ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint path")->required();
  ev->add_option("--dataset", eval_args.dataset_dir, "Dataset directory")->required();
  ev->add_option("--out", eval_args.out_dir, "Output directory")->required();
  ev->add_option("--split-points", eval_args.split_points, "Comma-separated split points");
  ev->add_option("--limit", eval_args.limit, "Use only the first N scenes");

  BenchArgs bench_args;
  auto * be = app.add_subcommand("bench", "Latency benchmark (online vs offline)");
  be->add_option("--checkpoint", bench_args.checkpoint, "Checkpoint path")->required();
  be->add_option("--dataset", bench_args.dataset_dir, "Dataset directory")->required();
  be->add_option("--out", bench_args.out_dir, "Output directory")->required();
  be->add_option("--scene", bench_args.scene_index, "Scene index");
  be->add_option("--reps", bench_args.reps, "Repetitions");
  be->add_option("--split-points", bench_args.split_points, "Comma-separated split points");

  PlotArgs plot_args;
  auto * pl = app.add_subcommand("plot", "Plot per-scene trajectory progression");
  pl->add_option("--checkpoint", plot_args.checkpoint, "Checkpoint path")->required();
  pl->add_option("--dataset", plot_args.dataset_dir, "Dataset directory")->required();
  pl->add_option("--out", plot_args.out_dir, "Output directory")->required();
  pl->add_option("--scene", plot_args.scene_index, "Scene index");
  pl->add_option("--split-points", plot_args.split_points, "Comma-separated split points");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) {
      return cmd_gen_data(gen_args);
    }
    if (tr->parsed()) {
      return cmd_train(train_args);
    }
    if (ev->parsed()) {
      return cmd_eval(eval_args);
    }
    if (be->parsed()) {
      return cmd_bench(bench_args);
    }
    if (pl->parsed()) {
      return cmd_plot(plot_args);
    }
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  } catch (const ConfigInvalid & e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const SplitPointsInvalid & e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const nlohmann::json::exception & e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const NonFiniteLoss & e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const MissingArtifact & e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return kExitMissingArtifact;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
