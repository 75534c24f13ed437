#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vda/image_io.h"
#include "vda/pipeline.h"

namespace py = pybind11;
using namespace vda;

namespace {

DepthMap depth_from_array(
    const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw std::invalid_argument("expected a 2D array");
  DepthMap d(int(arr.shape(1)), int(arr.shape(0)));
  std::memcpy(d.data(), arr.data(), sizeof(float) * d.size());
  return d;
}

py::array_t<float> depth_to_array(const DepthMap& d) {
  py::array_t<float> arr({d.height(), d.width()});
  std::memcpy(arr.mutable_data(), d.data(), sizeof(float) * d.size());
  return arr;
}

}  // namespace

PYBIND11_MODULE(pyvda, m) {
  m.doc() =
      "joint camera-pose / depth-deformation estimation for monocular video "
      "depth";

  py::class_<PixelCoord>(m, "PixelCoord")
      .def(py::init<double, double>(), py::arg("x"), py::arg("y"))
      .def_readwrite("x", &PixelCoord::x)
      .def_readwrite("y", &PixelCoord::y)
      .def("__repr__", [](const PixelCoord& p) {
        return "PixelCoord(" + std::to_string(p.x) + ", " + std::to_string(p.y) +
               ")";
      });

  py::class_<CameraPoint>(m, "CameraPoint")
      .def(py::init<double, double, double>(), py::arg("x"), py::arg("y"),
           py::arg("z"))
      .def_readwrite("x", &CameraPoint::x)
      .def_readwrite("y", &CameraPoint::y)
      .def_readwrite("z", &CameraPoint::z)
      .def("behind_camera", &CameraPoint::behind_camera);

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def_readwrite("rotation", &Pose::rotation)
      .def_readwrite("translation", &Pose::translation)
      .def("inverse", &Pose::inverse)
      .def("compose", &Pose::compose);

  py::class_<Intrinsics>(m, "Intrinsics")
      .def_static("for_image", &Intrinsics::for_image, py::arg("width"),
                  py::arg("height"), py::arg("focal"))
      .def_readwrite("focal", &Intrinsics::focal)
      .def("plane_from_raster", &Intrinsics::plane_from_raster)
      .def("raster_from_plane", &Intrinsics::raster_from_plane);

  m.def("lift", &lift, py::arg("p"), py::arg("depth"), py::arg("scale"));
  m.def("reproject", &reproject, py::arg("c"), py::arg("pose_i"),
        py::arg("pose_j"), py::arg("K_i"), py::arg("K_j"));
  m.def("to_pixel", &to_pixel, py::arg("c"));
  m.def("so3_exp", &so3_exp);
  m.def("so3_log", &so3_log);
  m.def("local_update", &local_update, py::arg("pose"), py::arg("delta"));

  py::class_<DeformationGrid>(m, "DeformationGrid")
      .def(py::init<int, int, int, int, double>(), py::arg("cols"),
           py::arg("rows"), py::arg("image_width"), py::arg("image_height"),
           py::arg("fill") = 1.0)
      .def_readwrite("cols", &DeformationGrid::cols)
      .def_readwrite("rows", &DeformationGrid::rows)
      .def_readwrite("handles", &DeformationGrid::handles);

  m.def("eval_spline", &eval_spline, py::arg("grid"), py::arg("p"));
  m.def("subdivide", &subdivide, py::arg("grid"), py::arg("next_cols"),
        py::arg("next_rows"));
  m.def(
      "grid_schedule",
      [](int w, int h, int long_max) {
        return grid_schedule(w, h, long_max).levels;
      },
      py::arg("width"), py::arg("height"), py::arg("long_side_max") = 17);

  m.def("loss_euclidean", &loss_euclidean);
  m.def("loss_spatial", &loss_spatial);
  m.def("loss_disparity", &loss_disparity);
  m.def("loss_ratio", &loss_ratio);
  m.def("loss_sim", &loss_sim);

  m.def("build_pair_set", [](int n) {
    std::vector<std::pair<int, int>> out;
    for (const FramePair& p : build_pair_set(n)) out.emplace_back(p.i, p.j);
    return out;
  });

  m.def("filter_weight",
        py::overload_cast<double, double, double>(&filter_weight),
        py::arg("z_reference"), py::arg("z_sample"), py::arg("lambda_f"));

  m.def("read_depth",
        [](const std::filesystem::path& p) { return depth_to_array(read_depth(p)); });
  m.def("write_depth", [](const std::filesystem::path& p,
                          const py::array_t<float, py::array::c_style |
                                                       py::array::forcecast>& a) {
    write_depth(p, depth_from_array(a));
  });

  // Pipeline stages over a project directory.
  py::class_<EvalSummary>(m, "EvalSummary")
      .def_readonly("ate", &EvalSummary::ate)
      .def_readonly("rpe_t_mean", &EvalSummary::rpe_t_mean)
      .def_readonly("rpe_r_mean_deg", &EvalSummary::rpe_r_mean_deg)
      .def_readonly("has_depth", &EvalSummary::has_depth)
      .def_property_readonly(
          "abs_rel", [](const EvalSummary& s) { return s.depth.abs_rel; });

  auto with_config = [](const std::string& root,
                        const std::map<std::string, std::string>& overrides) {
    ProjectPaths paths{root};
    PipelineConfig config;
    config.load_file(paths.config());
    for (const auto& [k, v] : overrides) config.apply(k, v);
    return std::pair{paths, config};
  };

  m.def(
      "synth",
      [](const std::string& root, const std::string& scene,
         const std::string& trajectory, int frames, int width, int height,
         double focal, double motion_scale, bool allow_rotation,
         int field_cols, int field_rows, double field_amplitude,
         double noise_sigma, bool dynamic_box, uint64_t seed) {
        SynthOptions opts;
        std::map<std::string, SceneKind> scenes{
            {"plane", SceneKind::Plane},
            {"two_plane", SceneKind::TwoPlane},
            {"point_cloud", SceneKind::PointCloud},
            {"heightfield", SceneKind::Heightfield}};
        std::map<std::string, TrajectoryKind> trajs{
            {"orbit", TrajectoryKind::Orbit},
            {"arc", TrajectoryKind::Arc},
            {"forward", TrajectoryKind::Forward},
            {"handheld", TrajectoryKind::HandheldJitter}};
        opts.scene.scene = scenes.at(scene);
        opts.scene.trajectory = trajs.at(trajectory);
        opts.scene.n_frames = frames;
        opts.scene.width = width;
        opts.scene.height = height;
        opts.scene.focal = focal;
        opts.scene.motion_scale = motion_scale;
        opts.scene.allow_rotation = allow_rotation;
        opts.scene.seed = seed;
        opts.corruption.field_cols = field_cols;
        opts.corruption.field_rows = field_rows;
        opts.corruption.field_amplitude = field_amplitude;
        opts.corruption.noise_sigma = noise_sigma;
        opts.dynamic_box = dynamic_box;
        stage_synth(root, opts, PipelineConfig{});
      },
      py::arg("root"), py::arg("scene") = "heightfield",
      py::arg("trajectory") = "orbit", py::arg("frames") = 12,
      py::arg("width") = 160, py::arg("height") = 96,
      py::arg("focal") = 2.7474774194546225, py::arg("motion_scale") = 1.0,
      py::arg("allow_rotation") = true, py::arg("field_cols") = 0,
      py::arg("field_rows") = 0, py::arg("field_amplitude") = 0.2,
      py::arg("noise_sigma") = 0.0, py::arg("dynamic_box") = false,
      py::arg("seed") = 1);

  m.def(
      "masks",
      [with_config](const std::string& root,
                       const std::map<std::string, std::string>& overrides) {
        auto [paths, config] = with_config(root, overrides);
        stage_masks(paths, config);
      },
      py::arg("root"),
      py::arg("overrides") = std::map<std::string, std::string>{});

  m.def(
      "solve",
      [with_config](const std::string& root,
                       const std::map<std::string, std::string>& overrides) {
        auto [paths, config] = with_config(root, overrides);
        const SolveReport report = stage_solve(paths, config);
        return report.final_cost();
      },
      py::arg("root"),
      py::arg("overrides") = std::map<std::string, std::string>{});

  m.def(
      "filter",
      [with_config](const std::string& root,
                       const std::map<std::string, std::string>& overrides) {
        auto [paths, config] = with_config(root, overrides);
        stage_filter(paths, config);
      },
      py::arg("root"),
      py::arg("overrides") = std::map<std::string, std::string>{});

  m.def(
      "run",
      [with_config](const std::string& root,
                       const std::map<std::string, std::string>& overrides) {
        auto [paths, config] = with_config(root, overrides);
        stage_run(paths, config);
      },
      py::arg("root"),
      py::arg("overrides") = std::map<std::string, std::string>{});

  m.def(
      "evaluate",
      [with_config](const std::string& root,
                       const std::map<std::string, std::string>& overrides) {
        auto [paths, config] = with_config(root, overrides);
        return stage_eval(paths, config);
      },
      py::arg("root"),
      py::arg("overrides") = std::map<std::string, std::string>{});
}
