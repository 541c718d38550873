#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "protoseg/assembly.hpp"
#include "protoseg/cloud.hpp"
#include "protoseg/geometry.hpp"
#include "protoseg/loss.hpp"
#include "protoseg/metrics.hpp"
#include "protoseg/model.hpp"
#include "protoseg/synth.hpp"
#include "protoseg/train.hpp"

namespace py = pybind11;
using namespace protoseg;

namespace {

std::vector<ClassMask> to_class_masks(
    const std::vector<std::pair<std::vector<std::uint8_t>, std::int32_t>>& raw) {
  std::vector<ClassMask> out;
  out.reserve(raw.size());
  for (const auto& [mask, cls] : raw) out.push_back({mask, cls});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "clustering-free point-cloud instance segmentation core";

  py::class_<PointCloud>(m, "PointCloud")
      .def(py::init<>())
      .def_readwrite("channels", &PointCloud::channels)
      .def_readwrite("data", &PointCloud::data)
      .def_readwrite("instance", &PointCloud::instance)
      .def_readwrite("semantic", &PointCloud::semantic)
      .def("size", &PointCloud::size)
      .def("validate", &PointCloud::validate)
      .def("subset", [](const PointCloud& c, const std::vector<std::size_t>& idx) {
        return c.subset(idx);
      });

  m.def("read_cloud", &read_cloud, py::arg("path"));
  m.def("write_cloud", &write_cloud, py::arg("cloud"), py::arg("path"));

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("seed", &SynthConfig::seed)
      .def_readwrite("n_points", &SynthConfig::n_points)
      .def_readwrite("min_instances", &SynthConfig::min_instances)
      .def_readwrite("max_instances", &SynthConfig::max_instances)
      .def_readwrite("noise_sigma", &SynthConfig::noise_sigma)
      .def_readwrite("extent_min", &SynthConfig::extent_min)
      .def_readwrite("extent_max", &SynthConfig::extent_max)
      .def_readwrite("use_boxes", &SynthConfig::use_boxes)
      .def_readwrite("use_spheres", &SynthConfig::use_spheres)
      .def_readwrite("use_planes", &SynthConfig::use_planes)
      .def_readwrite("allow_overlap", &SynthConfig::allow_overlap);
  m.def("generate_scene", &generate_scene, py::arg("config"), py::arg("scene_index") = 0);

  m.def(
      "fps",
      [](const std::vector<double>& vectors, std::size_t dim, std::size_t k, std::size_t start) {
        return fps(vectors, dim, k, start).indices;
      },
      py::arg("vectors"), py::arg("dim"), py::arg("k"), py::arg("start") = 0);
  m.def(
      "knn",
      [](const std::vector<double>& queries, std::size_t nq, const std::vector<double>& base,
         std::size_t nb, std::size_t dim, std::size_t k) {
        return knn(queries, nq, base, nb, dim, k).lists;
      },
      py::arg("queries"), py::arg("n_queries"), py::arg("base"), py::arg("n_base"),
      py::arg("dim"), py::arg("k"));

  m.def("iou", [](const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    return iou(a, b);
  });
  m.def(
      "coverage_metrics",
      [](const std::vector<std::pair<std::vector<std::uint8_t>, std::int32_t>>& pred,
         const std::vector<std::pair<std::vector<std::uint8_t>, std::int32_t>>& gt) {
        const Coverage c = coverage_metrics(to_class_masks(pred), to_class_masks(gt));
        return py::make_tuple(c.mcov, c.mwcov);
      },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "prec_rec",
      [](const std::vector<std::pair<std::vector<std::uint8_t>, std::int32_t>>& pred,
         const std::vector<std::pair<std::vector<std::uint8_t>, std::int32_t>>& gt,
         double iou_t) {
        const PrecRec pr = prec_rec(to_class_masks(pred), to_class_masks(gt), iou_t);
        return py::make_tuple(pr.mprec, pr.mrec);
      },
      py::arg("pred"), py::arg("gt"), py::arg("iou_t") = 0.5);
  m.def("masks_from_labels",
        [](const std::vector<std::int32_t>& instance, const std::vector<std::int32_t>& semantic) {
          std::vector<std::pair<std::vector<std::uint8_t>, std::int32_t>> out;
          for (auto& cm : masks_from_labels(instance, semantic))
            out.emplace_back(std::move(cm.mask), cm.cls);
          return out;
        });

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("m", &RunConfig::m)
      .def_readwrite("f", &RunConfig::f)
      .def_readwrite("k", &RunConfig::k)
      .def_readwrite("sampling", &RunConfig::sampling)
      .def_readwrite("threshold", &RunConfig::threshold)
      .def_readwrite("nms_iou", &RunConfig::nms_iou)
      .def_readwrite("dilations", &RunConfig::dilations)
      .def_readwrite("knn_k", &RunConfig::knn_k)
      .def_readwrite("lambda_", &RunConfig::lambda)
      .def_readwrite("lr", &RunConfig::lr)
      .def_readwrite("batch", &RunConfig::batch)
      .def_readwrite("epochs", &RunConfig::epochs)
      .def_readwrite("in_channels", &RunConfig::in_channels)
      .def_readwrite("seed", &RunConfig::seed)
      .def("validate", &RunConfig::validate)
      .def("to_json", &RunConfig::to_json)
      .def_static("from_json", &RunConfig::from_json);

  py::class_<ProtoSegModel>(m, "Model")
      .def(py::init<RunConfig>(), py::arg("config"))
      .def_readonly("config", &ProtoSegModel::cfg)
      .def("save", &ProtoSegModel::save, py::arg("path"))
      .def_static("load", py::overload_cast<const std::string&>(&ProtoSegModel::load),
                  py::arg("path"))
      .def("infer",
           [](const ProtoSegModel& model, const PointCloud& cloud) {
             return model.infer(cloud).labels;
           },
           py::arg("cloud"))
      .def("infer_blocks",
           [](const ProtoSegModel& model, const PointCloud& room, double size, double stride,
              double merge_t) { return infer_room_blocks(model, room, size, stride, merge_t); },
           py::arg("room"), py::arg("size") = 1.0, py::arg("stride") = 0.5,
           py::arg("merge_t") = 0.5);

  m.def(
      "train",
      [](ProtoSegModel& model, const std::vector<PointCloud>& scenes, std::size_t epochs,
         std::size_t batch, double lr, std::uint64_t seed) {
        TrainOptions opts;
        opts.epochs = epochs;
        opts.batch = batch;
        opts.lr = lr;
        opts.seed = seed;
        const TrainResult res = train_model(model, scenes, opts);
        return py::make_tuple(res.steps, res.final_loss, res.step_losses);
      },
      py::arg("model"), py::arg("scenes"), py::arg("epochs") = 1, py::arg("batch") = 16,
      py::arg("lr") = 0.001, py::arg("seed") = kDefaultSeed);

  m.def("checkpoint_config", &checkpoint_config, py::arg("path"));
}
