#include "vda/project.h"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "vda/image_io.h"

namespace vda {

namespace {

std::string frame_name(int frame) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", frame);
  return buf;
}

std::string pair_name(int i, int j) {
  return frame_name(i) + "_" + frame_name(j);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expect) {
  throw std::invalid_argument("config: key '" + key + "' = '" + value +
                              "': expected " + expect);
}

double parse_double(const std::string& key, const std::string& value,
                    double lo, double hi) {
  double v = 0.0;
  try {
    size_t pos = 0;
    v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
  } catch (...) {
    bad_value(key, value, "a number");
  }
  if (v < lo || v > hi) {
    bad_value(key, value,
              "a value in [" + fmt(lo) + ", " + fmt(hi) + "]");
  }
  return v;
}

int64_t parse_int(const std::string& key, const std::string& value, int64_t lo,
                  int64_t hi) {
  int64_t v = 0;
  try {
    size_t pos = 0;
    v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
  } catch (...) {
    bad_value(key, value, "an integer");
  }
  if (v < lo || v > hi) {
    bad_value(key, value, "an integer in [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true/false");
}

}  // namespace

fs::path ProjectPaths::depth(int frame) const {
  return depth_dir() / (frame_name(frame) + ".pfm");
}
fs::path ProjectPaths::flow(int i, int j) const {
  return flow_dir() / (pair_name(i, j) + ".flo");
}
fs::path ProjectPaths::dyn_mask(int frame) const {
  return mask_dir() / ("dyn_" + frame_name(frame) + ".pgm");
}
fs::path ProjectPaths::flow_mask(int i, int j) const {
  return mask_dir() / ("flow_" + pair_name(i, j) + ".pgm");
}
fs::path ProjectPaths::out_depth(int frame) const {
  return out_depth_dir() / (frame_name(frame) + ".pfm");
}
fs::path ProjectPaths::gt_depth(int frame) const {
  return gt_depth_dir() / (frame_name(frame) + ".pfm");
}

int ProjectPaths::count_frames() const {
  int n = 0;
  while (fs::exists(depth(n))) ++n;
  return n;
}

void PipelineConfig::apply(const std::string& key, const std::string& value) {
  if (key == "fb_threshold") {
    fb_threshold = parse_double(key, value, 1e-6, 1e6);
  } else if (key == "min_match_dist") {
    min_match_dist = parse_double(key, value, 1.0, 1e4);
  } else if (key == "lambda1") {
    lambda1 = parse_double(key, value, 0.0, 1e9);
  } else if (key == "lambda2") {
    lambda2 = parse_double(key, value, 0.0, 1e9);
  } else if (key == "lambda_deform") {
    lambda_deform = parse_double(key, value, 0.0, 1e9);
  } else if (key == "lambda_focal") {
    lambda_focal = parse_double(key, value, 0.0, 1e9);
  } else if (key == "lambda_f") {
    lambda_f = parse_double(key, value, 0.0, 1e9);
  } else if (key == "tau") {
    tau = int(parse_int(key, value, 0, 1000));
  } else if (key == "filter_radius") {
    filter_radius = int(parse_int(key, value, 0, 64));
  } else if (key == "filter_normalize") {
    filter_normalize = parse_bool(key, value);
  } else if (key == "grid_long_max") {
    grid_long_max = int(parse_int(key, value, 1, 1025));
  } else if (key == "focal_prior") {
    focal_prior = parse_double(key, value, 1e-6, 1e6);
  } else if (key == "paper_focal_prior") {
    if (parse_bool(key, value)) focal_prior = 0.35;
  } else if (key == "normalize_handle_weights") {
    normalize_handle_weights = parse_bool(key, value);
  } else if (key == "count_pairs_twice") {
    count_pairs_twice = parse_bool(key, value);
  } else if (key == "deform_log_space") {
    deform_log_space = parse_bool(key, value);
  } else if (key == "loss_kind") {
    if (value != "euclidean" && value != "spatial_disparity" &&
        value != "spatial_ratio") {
      bad_value(key, value, "euclidean|spatial_disparity|spatial_ratio");
    }
    loss_kind = value;
  } else if (key == "max_iterations") {
    max_iterations = int(parse_int(key, value, 1, 100000));
  } else if (key == "function_tolerance") {
    function_tolerance = parse_double(key, value, 0.0, 1.0);
  } else if (key == "gradient_tolerance") {
    gradient_tolerance = parse_double(key, value, 0.0, 1.0);
  } else if (key == "parameter_tolerance") {
    parameter_tolerance = parse_double(key, value, 0.0, 1.0);
  } else if (key == "cost_floor") {
    cost_floor = parse_double(key, value, 0.0, 1e300);
  } else if (key == "init_damping") {
    init_damping = parse_double(key, value, 1e-300, 1e300);
  } else if (key == "linear_solver") {
    if (value != "auto" && value != "dense" && value != "sparse" &&
        value != "cg") {
      bad_value(key, value, "auto|dense|sparse|cg");
    }
    linear_solver = value;
  } else if (key == "fix_scale_handle") {
    fix_scale_handle = parse_bool(key, value);
  } else if (key == "shared_focal") {
    shared_focal = parse_bool(key, value);
  } else if (key == "huber_delta") {
    huber_delta = parse_double(key, value, 0.0, 1e9);
  } else if (key == "seed") {
    seed = uint64_t(parse_int(key, value, 0, INT64_MAX));
  } else if (key == "threads") {
    threads = int(parse_int(key, value, 0, 4096));
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

void PipelineConfig::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // Trim.
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path.string() + ":" +
                                  std::to_string(line_no) +
                                  ": expected key=value");
    }
    auto strip = [](std::string s) {
      const auto sb = s.find_first_not_of(" \t");
      const auto se = s.find_last_not_of(" \t");
      return sb == std::string::npos ? std::string()
                                     : s.substr(sb, se - sb + 1);
    };
    apply(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
}

void PipelineConfig::save_file(const fs::path& path) const {
  std::ofstream out(path);
  out << "fb_threshold = " << fmt(fb_threshold) << "\n";
  out << "min_match_dist = " << fmt(min_match_dist) << "\n";
  out << "lambda1 = " << fmt(lambda1) << "\n";
  out << "lambda2 = " << fmt(lambda2) << "\n";
  out << "lambda_deform = " << fmt(lambda_deform) << "\n";
  out << "lambda_focal = " << fmt(lambda_focal) << "\n";
  out << "lambda_f = " << fmt(lambda_f) << "\n";
  out << "tau = " << tau << "\n";
  out << "filter_radius = " << filter_radius << "\n";
  out << "filter_normalize = " << (filter_normalize ? "true" : "false")
      << "\n";
  out << "grid_long_max = " << grid_long_max << "\n";
  out << "focal_prior = " << fmt(focal_prior) << "\n";
  out << "normalize_handle_weights = "
      << (normalize_handle_weights ? "true" : "false") << "\n";
  out << "count_pairs_twice = " << (count_pairs_twice ? "true" : "false")
      << "\n";
  out << "deform_log_space = " << (deform_log_space ? "true" : "false")
      << "\n";
  out << "loss_kind = " << loss_kind << "\n";
  out << "max_iterations = " << max_iterations << "\n";
  out << "function_tolerance = " << fmt(function_tolerance) << "\n";
  out << "gradient_tolerance = " << fmt(gradient_tolerance) << "\n";
  out << "parameter_tolerance = " << fmt(parameter_tolerance) << "\n";
  out << "cost_floor = " << fmt(cost_floor) << "\n";
  out << "init_damping = " << fmt(init_damping) << "\n";
  out << "linear_solver = " << linear_solver << "\n";
  out << "fix_scale_handle = " << (fix_scale_handle ? "true" : "false")
      << "\n";
  out << "shared_focal = " << (shared_focal ? "true" : "false") << "\n";
  out << "huber_delta = " << fmt(huber_delta) << "\n";
  out << "seed = " << seed << "\n";
  out << "threads = " << threads << "\n";
}

LossKind PipelineConfig::parsed_loss_kind() const {
  if (loss_kind == "euclidean") return LossKind::Euclidean;
  if (loss_kind == "spatial_disparity") return LossKind::SpatialDisparity;
  return LossKind::SpatialRatio;
}

SolveOptions PipelineConfig::solve_options() const {
  SolveOptions o;
  o.max_iterations = max_iterations;
  o.function_tolerance = function_tolerance;
  o.gradient_tolerance = gradient_tolerance;
  o.parameter_tolerance = parameter_tolerance;
  o.cost_floor = cost_floor;
  o.init_damping = init_damping;
  o.loss_kind = parsed_loss_kind();
  o.huber_delta = huber_delta;
  o.fix_scale_handle = fix_scale_handle;
  o.shared_focal = shared_focal;
  o.threads = threads;
  o.seed = seed;
  if (linear_solver == "dense") {
    o.linear_solver = SolveOptions::LinearSolver::Dense;
  } else if (linear_solver == "sparse") {
    o.linear_solver = SolveOptions::LinearSolver::SparseCholesky;
  } else if (linear_solver == "cg") {
    o.linear_solver = SolveOptions::LinearSolver::ConjugateGradient;
  }
  return o;
}

RegWeights PipelineConfig::reg_weights() const {
  RegWeights w;
  w.lambda1 = lambda1;
  w.lambda2 = lambda2;
  w.lambda_deform = lambda_deform;
  w.lambda_focal = lambda_focal;
  w.focal_prior = focal_prior;
  w.normalize_handle_weights = normalize_handle_weights;
  w.count_pairs_twice = count_pairs_twice;
  w.deform_log_space = deform_log_space;
  return w;
}

void write_trajectory(const fs::path& path, const std::vector<Pose>& poses) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  for (size_t i = 0; i < poses.size(); ++i) {
    const Eigen::Quaterniond q(poses[i].rotation);
    const Eigen::Vector3d& t = poses[i].translation;
    out << i << " " << fmt(t.x()) << " " << fmt(t.y()) << " " << fmt(t.z())
        << " " << fmt(q.x()) << " " << fmt(q.y()) << " " << fmt(q.z()) << " "
        << fmt(q.w()) << "\n";
  }
}

std::vector<Pose> read_trajectory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::vector<Pose> poses;
  int64_t frame;
  double tx, ty, tz, qx, qy, qz, qw;
  while (in >> frame >> tx >> ty >> tz >> qx >> qy >> qz >> qw) {
    Pose p;
    p.translation = {tx, ty, tz};
    p.rotation = Eigen::Quaterniond(qw, qx, qy, qz).normalized().toRotationMatrix();
    poses.push_back(p);
  }
  if (poses.empty()) {
    throw std::runtime_error(path.string() + ": no poses");
  }
  return poses;
}

void write_focals(const fs::path& path, const std::vector<double>& focals) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  for (size_t i = 0; i < focals.size(); ++i) {
    out << i << " " << fmt(focals[i]) << "\n";
  }
}

std::vector<double> read_focals(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::vector<double> focals;
  int64_t frame;
  double u;
  while (in >> frame >> u) focals.push_back(u);
  if (focals.empty()) throw std::runtime_error(path.string() + ": no focals");
  return focals;
}

void write_grids(const fs::path& path,
                 const std::vector<DeformationGrid>& grids) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  if (!grids.empty()) {
    out << "# image " << grids[0].image_width << " " << grids[0].image_height
        << "\n";
  }
  for (size_t f = 0; f < grids.size(); ++f) {
    const DeformationGrid& g = grids[f];
    out << f << " " << g.cols << " " << g.rows;
    for (double h : g.handles) out << " " << fmt(h);
    out << "\n";
  }
}

std::vector<DeformationGrid> read_grids(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::string header;
  int width = 0, height = 0;
  in >> header;
  if (header != "#") throw std::runtime_error(path.string() + ": bad header");
  in >> header >> width >> height;
  std::vector<DeformationGrid> grids;
  int64_t frame;
  while (in >> frame) {
    int cols, rows;
    if (!(in >> cols >> rows)) {
      throw std::runtime_error(path.string() + ": truncated grid line");
    }
    DeformationGrid g(cols, rows, width, height);
    for (double& h : g.handles) {
      if (!(in >> h)) {
        throw std::runtime_error(path.string() + ": truncated handles");
      }
    }
    grids.push_back(std::move(g));
  }
  return grids;
}

void write_result_bundle(const ProjectPaths& paths,
                         const CameraParamBlock& params,
                         const std::vector<DepthMap>& filtered_depths,
                         const SolveReport& report,
                         const PipelineConfig& config) {
  if (params.n_frames() == 0) {
    throw std::invalid_argument("write_result_bundle: empty video");
  }
  fs::create_directories(paths.out_depth_dir());
  write_trajectory(paths.out_trajectory(), params.poses);
  write_focals(paths.out_focals(), params.focals);
  write_grids(paths.out_grids(), params.grids);
  for (size_t f = 0; f < filtered_depths.size(); ++f) {
    write_depth(paths.out_depth(int(f)), filtered_depths[f]);
  }

  nlohmann::ordered_json j;
  j["n_frames"] = params.n_frames();
  j["image"] = {params.width, params.height};
  j["loss_kind"] = config.loss_kind;
  j["seed"] = config.seed;
  j["residuals_dropped"] = report.residuals_dropped();
  // Timing intentionally left out: the bundle is byte-deterministic.
  auto& levels = j["levels"] = nlohmann::ordered_json::array();
  for (const LevelReport& l : report.levels) {
    levels.push_back({{"grid", {l.cols, l.rows}},
                      {"iterations", l.iterations},
                      {"initial_cost", l.initial_cost},
                      {"final_cost", l.final_cost},
                      {"residuals_used", l.residuals_used},
                      {"residuals_dropped", l.residuals_dropped},
                      {"termination", l.termination}});
  }
  std::ofstream out(paths.out_report());
  out << j.dump(2) << "\n";
}

CameraParamBlock read_param_bundle(const ProjectPaths& paths) {
  CameraParamBlock params;
  params.poses = read_trajectory(paths.out_trajectory());
  params.focals = read_focals(paths.out_focals());
  params.grids = read_grids(paths.out_grids());
  if (params.poses.size() != params.focals.size() ||
      params.poses.size() != params.grids.size()) {
    throw std::runtime_error("param bundle: inconsistent frame counts");
  }
  if (!params.grids.empty()) {
    params.width = params.grids[0].image_width;
    params.height = params.grids[0].image_height;
  }
  return params;
}

}  // namespace vda
