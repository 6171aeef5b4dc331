#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "planeloc/dataset.hpp"
#include "planeloc/error.hpp"
#include "planeloc/evaluation.hpp"
#include "planeloc/features.hpp"
#include "planeloc/map.hpp"
#include "planeloc/registration.hpp"
#include "planeloc/segmentation.hpp"
#include "planeloc/synthetic.hpp"

namespace py = pybind11;
using namespace planeloc;

namespace {

using DepthArray = py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>;

DepthImage to_depth(const DepthArray& a) {
  if (a.ndim() != 2) throw InvalidArgument("depth image must be a 2-D array");
  DepthImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

DepthArray from_depth(const DepthImage& img) {
  DepthArray a({img.height, img.width});
  std::copy(img.data.begin(), img.data.end(), a.mutable_data());
  return a;
}

py::dict feature_dict(const SurfaceSegmentFeature& f) {
  py::dict d;
  d["rotation"] = f.rotation;
  d["centroid"] = f.centroid;
  d["normal"] = Vec3(f.normal());
  d["sigma_q"] = f.sigma_q;
  d["lambda"] = f.lambda;
  d["point_count"] = f.point_count;
  d["area"] = f.area();
  return d;
}

py::dict hypothesis_dict(const PoseHypothesis& h) {
  py::dict d;
  d["model_id"] = h.model_id;
  d["phi"] = h.belief.mean.phi;
  d["t"] = h.belief.mean.t;
  d["cov"] = h.belief.cov;
  d["consensus"] = h.consensus;
  d["n_pairs"] = h.pairs.size();
  return d;
}

FeatureConfig feature_config(const NoiseModel& nm) {
  FeatureConfig fc;
  fc.noise = nm;
  return fc;
}

}  // namespace

PYBIND11_MODULE(_planeloc, m) {
  m.doc() = "Plane-based global localization in depth images";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<VersionError>(m, "VersionError", PyExc_ValueError);
  py::register_exception<NotFound>(m, "NotFound", PyExc_KeyError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<Pose>(m, "Pose")
      .def(py::init<>())
      .def(py::init<const Vec3&, const Vec3&>(), py::arg("phi"), py::arg("t"))
      .def_readwrite("phi", &Pose::phi)
      .def_readwrite("t", &Pose::t)
      .def("rotation", [](const Pose& p) { return Mat3(p.rotation()); })
      .def("__mul__", [](const Pose& a, const Pose& b) { return compose(a, b); })
      .def("inverse", [](const Pose& p) { return invert(p); })
      .def("__repr__", [](const Pose& p) {
        return "Pose(phi=[" + std::to_string(p.phi.x()) + ", " + std::to_string(p.phi.y()) + ", " +
               std::to_string(p.phi.z()) + "], t=[" + std::to_string(p.t.x()) + ", " + std::to_string(p.t.y()) +
               ", " + std::to_string(p.t.z()) + "])";
      });

  py::class_<CameraIntrinsics>(m, "CameraIntrinsics")
      .def(py::init<>())
      .def(py::init([](double fx, double fy, double cx, double cy, int w, int h) {
             CameraIntrinsics k{fx, fy, cx, cy, w, h};
             k.validate();
             return k;
           }),
           py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"), py::arg("width"), py::arg("height"))
      .def_readwrite("fx", &CameraIntrinsics::fx)
      .def_readwrite("fy", &CameraIntrinsics::fy)
      .def_readwrite("cx", &CameraIntrinsics::cx)
      .def_readwrite("cy", &CameraIntrinsics::cy)
      .def_readwrite("width", &CameraIntrinsics::width)
      .def_readwrite("height", &CameraIntrinsics::height);

  py::class_<NoiseModel>(m, "NoiseModel")
      .def(py::init<>())
      .def(py::init<double, double>(), py::arg("sigma_px"), py::arg("k_z"))
      .def_readwrite("sigma_px", &NoiseModel::sigma_px)
      .def_readwrite("k_z", &NoiseModel::k_z);

  m.def("rotation_from_vector", py::overload_cast<const Vec3&>(&rotation_from_vector), py::arg("phi"));
  m.def("vector_from_rotation", py::overload_cast<const Mat3&>(&vector_from_rotation), py::arg("r"));

  m.def("read_depth", [](const std::filesystem::path& p) { return from_depth(read_depth_pgm(p)); }, py::arg("path"),
        "16-bit PGM depth image (mm) as a (height, width) uint16 array");
  m.def("write_depth", [](const std::filesystem::path& p, const DepthArray& a) { write_depth_pgm(p, to_depth(a)); },
        py::arg("path"), py::arg("depth"));
  m.def("read_intrinsics", &read_intrinsics, py::arg("path"));
  m.def("write_intrinsics", &write_intrinsics, py::arg("path"), py::arg("intrinsics"));

  m.def(
      "segment",
      [](const DepthArray& depth, const CameraIntrinsics& k, const NoiseModel& nm) {
        const SegmentLabeling l = segment_depth_image(to_depth(depth), k, nm, SegmentationParams{});
        py::array_t<std::int32_t> labels({l.height, l.width});
        std::copy(l.labels.begin(), l.labels.end(), labels.mutable_data());
        return labels;
      },
      py::arg("depth"), py::arg("intrinsics") = CameraIntrinsics{}, py::arg("noise") = NoiseModel{},
      "Per-pixel segment labels, -1 for unlabeled pixels");

  m.def(
      "detect_features",
      [](const DepthArray& depth, const CameraIntrinsics& k, const NoiseModel& nm) {
        py::list out;
        for (const auto& f : detect_features(to_depth(depth), k, nm, SegmentationParams{})) out.append(feature_dict(f));
        return out;
      },
      py::arg("depth"), py::arg("intrinsics") = CameraIntrinsics{}, py::arg("noise") = NoiseModel{});

  py::class_<TopologicalMap>(m, "Map")
      .def_static("load", &load_map, py::arg("path"))
      .def("save", [](const TopologicalMap& map, const std::filesystem::path& p) { save_map(map, p); }, py::arg("path"))
      .def("to_json", &map_to_json)
      .def_static("from_json", [](const std::string& s) { return map_from_json(s); }, py::arg("text"))
      .def_property_readonly("model_ids", [](const TopologicalMap& map) {
        std::vector<int> ids;
        for (const auto& lm : map.models) ids.push_back(lm.id);
        return ids;
      })
      .def("reference_pose", [](const TopologicalMap& map, int id) { return map.model(id).reference_pose; })
      .def("neighbors", [](const TopologicalMap& map, int id, int radius) {
        std::vector<int> ids;
        for (const auto& lm : neighbors(map, id, radius)) ids.push_back(lm.get().id);
        return ids;
      }, py::arg("id"), py::arg("radius"))
      .def("__len__", [](const TopologicalMap& map) { return map.models.size(); });

  m.def(
      "build_map",
      [](const std::filesystem::path& manifest, double d_min, double theta_min_deg, const NoiseModel& nm) {
        KeyframePolicy policy;
        policy.d_min = d_min;
        policy.theta_min_deg = theta_min_deg;
        const auto frames = load_map_frames(read_manifest(manifest));
        py::gil_scoped_release release;
        return build_map(frames, policy, feature_config(nm)).map;
      },
      py::arg("manifest"), py::arg("d_min") = 0.5, py::arg("theta_min_deg") = 15.0, py::arg("noise") = NoiseModel{});

  m.def(
      "localize",
      [](const DepthArray& depth, const TopologicalMap& map, const CameraIntrinsics& k, double mount_height,
         std::size_t threads) {
        const DepthImage img = to_depth(depth);
        std::vector<PoseHypothesis> hyps;
        {
          py::gil_scoped_release release;
          const NoiseModel nm;
          const auto scene = detect_features(img, k, nm, SegmentationParams{});
          RegistrationParams params;
          params.threads = threads;
          hyps = localize(scene, map, MatchPrior{}, default_camera_mount(mount_height), params);
        }
        py::list out;
        for (const auto& h : hyps) out.append(hypothesis_dict(h));
        return out;
      },
      py::arg("depth"), py::arg("map"), py::arg("intrinsics") = CameraIntrinsics{}, py::arg("mount_height") = 0.6,
      py::arg("threads") = 0,
      "Ranked pose hypotheses; each pose is the camera relative to the model frame");

  m.def(
      "synth",
      [](const std::filesystem::path& out, std::uint64_t seed) {
        BenchmarkConfig cfg;
        cfg.seed = seed;
        py::gil_scoped_release release;
        write_benchmark(synth_benchmark(cfg), out);
      },
      py::arg("out"), py::arg("seed") = 1, "Writes a seeded synthetic benchmark into `out`");

  m.def(
      "evaluate",
      [](const std::filesystem::path& manifest, const TopologicalMap& map, const std::filesystem::path& out,
         double mount_height) {
        EvalConfig ec;
        ec.camera_mount = default_camera_mount(mount_height);
        const auto records = read_manifest(manifest);
        EvalResult res;
        {
          py::gil_scoped_release release;
          res = evaluate(records, map, ec);
          write_report(out, res, ec);
        }
        return report_json(res, ec);
      },
      py::arg("manifest"), py::arg("map"), py::arg("out"), py::arg("mount_height") = 0.6,
      "Writes the report files into `out` and returns report.json as a string");
}
