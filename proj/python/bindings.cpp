#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "auxmat/compositor.hpp"
#include "auxmat/gradcheck.hpp"
#include "auxmat/igdrnet.hpp"
#include "auxmat/image_io.hpp"
#include "auxmat/linedet.hpp"
#include "auxmat/metrics.hpp"
#include "auxmat/pseudogt.hpp"

namespace py = pybind11;
using namespace auxmat;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

// (H, W) or (H, W, C) float32 <-> ImageF32.
ImageF32 from_numpy(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw std::invalid_argument("expected a 2-D or 3-D array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  return ImageF32(h, w, c, std::vector<float>(a.data(), a.data() + a.size()));
}

Array to_numpy(const ImageF32& img) {
  std::vector<py::ssize_t> shape{img.height(), img.width()};
  if (img.channels() != 1) shape.push_back(img.channels());
  Array out(shape);
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

py::tuple segment_tuple(const LineSegment& s) { return py::make_tuple(s.x1, s.y1, s.x2, s.y2); }

std::vector<LineSegment> segments_from(const std::vector<std::array<double, 4>>& in) {
  std::vector<LineSegment> out;
  for (const auto& s : in) out.push_back({s[0], s[1], s[2], s[3]});
  return out;
}

}  // namespace

PYBIND11_MODULE(_auxmat, m) {
  m.doc() = "Mask-guided matting toolkit: compositing, line pseudo labels, metrics and a toy IGDR network.";

  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("composite", [](const Array& f, const Array& b, const Array& a) {
    return to_numpy(composite(from_numpy(f), from_numpy(b), from_numpy(a)));
  }, py::arg("fg"), py::arg("bg"), py::arg("alpha"));
  m.def("make_guidance", [](const Array& a, float threshold, int erode_k) {
    return to_numpy(make_guidance(from_numpy(a), threshold, erode_k));
  }, py::arg("alpha"), py::arg("threshold") = 0.95f, py::arg("erode_k") = 21);
  m.def("edge_from_mask", [](const Array& mask, int radius) { return to_numpy(edge_from_mask(from_numpy(mask), radius)); },
        py::arg("mask"), py::arg("radius") = 2);

  m.def("lsd_detect", [](const Array& gray) {
    py::list out;
    for (const auto& s : lsd_detect(from_numpy(gray))) out.append(segment_tuple(s));
    return out;
  }, py::arg("gray"));
  m.def("distance_field", [](const std::vector<std::array<double, 4>>& segs, int height, int width) {
    return to_numpy(distance_field(segments_from(segs), height, width));
  }, py::arg("segments"), py::arg("height"), py::arg("width"));
  m.def("homography_adaptation", [](const Array& gray, std::uint64_t seed, int n) {
    AdaptationParams p;
    p.n = n;
    return to_numpy(homography_adaptation(from_numpy(gray), seed, p));
  }, py::arg("gray"), py::arg("seed") = 0, py::arg("n") = 100);
  m.def("line_activation", [](const Array& d) { return to_numpy(line_activation(from_numpy(d))); }, py::arg("distance"));

  m.def("background_line_gt", [](const Array& pl, const Array& alpha) {
    const SupervisionMap s = background_line_gt(from_numpy(pl), from_numpy(alpha));
    return py::make_tuple(to_numpy(s.values), to_numpy(s.valid));
  }, py::arg("line_activation"), py::arg("alpha"));
  m.def("loss_region_mask", [](const Array& d, double threshold) { return to_numpy(loss_region_mask(from_numpy(d), threshold)); },
        py::arg("distance"), py::arg("threshold"));

  m.def("sad", [](const Array& p, const Array& g) { return sad(from_numpy(p), from_numpy(g)); });
  m.def("mse", [](const Array& p, const Array& g) { return mse(from_numpy(p), from_numpy(g)); });
  m.def("grad_error", [](const Array& p, const Array& g, double sigma) { return grad_error(from_numpy(p), from_numpy(g), sigma); },
        py::arg("pred"), py::arg("gt"), py::arg("sigma") = 1.4);
  m.def("conn_error", [](const Array& p, const Array& g, double step) { return conn_error(from_numpy(p), from_numpy(g), step); },
        py::arg("pred"), py::arg("gt"), py::arg("step") = 0.1);

  m.def("synth_sample", [](const std::string& task, std::uint64_t seed, int size, int adaptation_n) {
    SynthOptions o;
    o.size = size;
    o.adaptation_n = adaptation_n;
    const SampleBundle s = synth_sample(task_from_name(task), seed, o);
    py::dict d;
    d["task"] = task_name(s.task);
    d["image"] = to_numpy(s.image);
    d["guidance"] = to_numpy(s.guidance);
    if (s.alpha) d["alpha"] = to_numpy(*s.alpha);
    if (s.seg) d["seg"] = to_numpy(*s.seg);
    if (s.edge) d["edge"] = to_numpy(*s.edge);
    if (s.bl) d["bl"] = py::make_tuple(to_numpy(s.bl->values), to_numpy(s.bl->valid));
    if (s.distance) d["distance"] = to_numpy(*s.distance);
    return d;
  }, py::arg("task"), py::arg("seed") = 0, py::arg("size") = 64, py::arg("adaptation_n") = 5);

  m.def("gradcheck", [](const std::string& op) {
    py::dict out;
    for (const auto& r : run_gradchecks(op)) out[py::str(r.op)] = py::make_tuple(r.max_rel_error, r.tolerance, r.passed());
    return out;
  }, py::arg("op") = "all");

  m.def("read_png", [](const std::string& path) { return to_numpy(read_png(path)); });
  m.def("write_png", [](const std::string& path, const Array& img) { write_png(path, from_numpy(img)); });
  m.def("read_field", [](const std::string& path) { return to_numpy(read_field(path)); });
  m.def("write_field", [](const std::string& path, const Array& img) { write_field(path, from_numpy(img)); });
}
