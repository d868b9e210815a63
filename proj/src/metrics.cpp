#include "auxmat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "auxmat/image_io.hpp"
#include "auxmat/parallel.hpp"
#include "json.hpp"

namespace auxmat {

namespace {

void check_pair(const ImageF32& pred, const ImageF32& gt, const BinaryMask* region, const char* what) {
  if (pred.channels() != 1 || gt.channels() != 1) {
    throw std::invalid_argument(std::string(what) + ": expected single-channel mattes");
  }
  require_same_size(pred, gt, what);
  if (region != nullptr) require_same_size(pred, *region, what);
}

bool counted(const BinaryMask* region, std::size_t i) {
  return region == nullptr || region->data()[i] != 0.0f;
}

double gauss(double x, double sigma) {
  return std::exp(-x * x / (2 * sigma * sigma)) / (sigma * std::sqrt(2 * std::numbers::pi));
}

double dgauss(double x, double sigma) { return -x * gauss(x, sigma) / (sigma * sigma); }

int kernel_half(double sigma) {
  constexpr double eps = 1e-2;
  return static_cast<int>(std::ceil(sigma * std::sqrt(-2.0 * std::log(std::sqrt(2 * std::numbers::pi) * sigma * eps))));
}

}  // namespace

double sad(const ImageF32& pred, const ImageF32& gt, const BinaryMask* region) {
  check_pair(pred, gt, region, "sad");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (counted(region, i)) acc += std::abs(static_cast<double>(pred.data()[i]) - gt.data()[i]);
  }
  return acc / 1000.0;
}

double mse(const ImageF32& pred, const ImageF32& gt, const BinaryMask* region) {
  check_pair(pred, gt, region, "mse");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!counted(region, i)) continue;
    const double d = static_cast<double>(pred.data()[i]) - gt.data()[i];
    acc += d * d;
    ++n;
  }
  return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

std::vector<double> gaussian_derivative_kernel(double sigma, int& side) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_derivative_kernel: sigma must be > 0");
  const int half = kernel_half(sigma);
  side = 2 * half + 1;
  std::vector<double> k(static_cast<std::size_t>(side) * side);
  double norm = 0.0;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      const double v = gauss(i - half, sigma) * dgauss(j - half, sigma);
      k[static_cast<std::size_t>(i) * side + j] = v;
      norm += v * v;
    }
  }
  norm = std::sqrt(norm);
  for (double& v : k) v /= norm;
  return k;
}

ImageF32 gaussian_gradient_magnitude(const ImageF32& img, double sigma) {
  if (img.channels() != 1) throw std::invalid_argument("gaussian_gradient_magnitude: expected one channel");
  const int half = kernel_half(sigma);
  // The 2-D kernel is the outer product smooth(y) * deriv(x), scaled by 1/norm.
  std::vector<double> smooth(2 * half + 1), deriv(2 * half + 1);
  double s2 = 0.0, d2 = 0.0;
  for (int i = -half; i <= half; ++i) {
    smooth[i + half] = gauss(i, sigma);
    deriv[i + half] = dgauss(i, sigma);
    s2 += smooth[i + half] * smooth[i + half];
    d2 += deriv[i + half] * deriv[i + half];
  }
  const double scale = 1.0 / std::sqrt(s2 * d2);

  const int h = img.height(), w = img.width();
  // Convolution: out(y,x) = sum k(i,j) img(y-i, x-j).
  auto conv_rows = [&](const std::vector<double>& k, const auto& src) {
    std::vector<double> out(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int j = -half; j <= half; ++j) acc += k[j + half] * src(y, std::clamp(x - j, 0, w - 1));
        out[static_cast<std::size_t>(y) * w + x] = acc;
      }
    }
    return out;
  };
  auto conv_cols = [&](const std::vector<double>& k, const std::vector<double>& src) {
    std::vector<double> out(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int i = -half; i <= half; ++i) acc += k[i + half] * src[static_cast<std::size_t>(std::clamp(y - i, 0, h - 1)) * w + x];
        out[static_cast<std::size_t>(y) * w + x] = acc;
      }
    }
    return out;
  };
  auto pixel = [&](int y, int x) { return static_cast<double>(img.at(y, x)); };
  const auto gx = conv_cols(smooth, conv_rows(deriv, pixel));
  const auto gy = conv_cols(deriv, conv_rows(smooth, pixel));
  ImageF32 out(h, w, 1);
  for (std::size_t i = 0; i < gx.size(); ++i) out.data()[i] = static_cast<float>(scale * std::hypot(gx[i], gy[i]));
  return out;
}

double grad_error(const ImageF32& pred, const ImageF32& gt, double sigma, const BinaryMask* region) {
  check_pair(pred, gt, region, "grad_error");
  const ImageF32 gp = gaussian_gradient_magnitude(pred, sigma);
  const ImageF32 gg = gaussian_gradient_magnitude(gt, sigma);
  double acc = 0.0;
  for (std::size_t i = 0; i < gp.size(); ++i) {
    if (!counted(region, i)) continue;
    const double d = static_cast<double>(gp.data()[i]) - gg.data()[i];
    acc += d * d;
  }
  return acc / 1000.0;
}

namespace {

// Marks the largest 4-connected component of `on`; ties go to the first found in row-major scan.
std::vector<char> largest_component(const std::vector<char>& on, int h, int w) {
  std::vector<int> label(on.size(), -1);
  std::vector<int> stack;
  int best = -1;
  std::size_t best_size = 0;
  int next = 0;
  for (int start = 0; start < h * w; ++start) {
    if (!on[start] || label[start] >= 0) continue;
    std::size_t size = 0;
    stack.assign(1, start);
    label[start] = next;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++size;
      const int y = p / w, x = p % w;
      const int nbr[4] = {x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1, y > 0 ? p - w : -1, y + 1 < h ? p + w : -1};
      for (int q : nbr) {
        if (q >= 0 && on[q] && label[q] < 0) {
          label[q] = next;
          stack.push_back(q);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best = next;
    }
    ++next;
  }
  std::vector<char> omega(on.size(), 0);
  if (best >= 0) {
    for (std::size_t i = 0; i < on.size(); ++i) omega[i] = label[i] == best;
  }
  return omega;
}

}  // namespace

ImageF32 connectivity_levels(const ImageF32& pred, const ImageF32& gt, double step) {
  check_pair(pred, gt, nullptr, "connectivity_levels");
  if (!(step > 0.0) || step > 1.0) throw std::invalid_argument("connectivity_levels: step must be in (0, 1]");
  const int h = pred.height(), w = pred.width();
  const int steps = static_cast<int>(std::lround(1.0 / step));
  ImageF32 level(h, w, 1, -1.0f);
  std::vector<char> on(pred.size());
  for (int k = 1; k <= steps; ++k) {
    const double theta = k * step;
    for (std::size_t i = 0; i < on.size(); ++i) on[i] = pred.data()[i] >= theta && gt.data()[i] >= theta;
    const std::vector<char> omega = largest_component(on, h, w);
    const float prev = static_cast<float>((k - 1) * step);
    for (std::size_t i = 0; i < on.size(); ++i) {
      if (level.data()[i] == -1.0f && !omega[i]) level.data()[i] = prev;
    }
  }
  for (float& v : level.data()) {
    if (v == -1.0f) v = 1.0f;
  }
  return level;
}

double conn_error(const ImageF32& pred, const ImageF32& gt, double step, const BinaryMask* region) {
  check_pair(pred, gt, region, "conn_error");
  const ImageF32 level = connectivity_levels(pred, gt, step);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!counted(region, i)) continue;
    const double dp = static_cast<double>(pred.data()[i]) - level.data()[i];
    const double dg = static_cast<double>(gt.data()[i]) - level.data()[i];
    const double phi_p = 1.0 - (dp >= 0.15 ? dp : 0.0);
    const double phi_g = 1.0 - (dg >= 0.15 ? dg : 0.0);
    acc += std::abs(phi_p - phi_g);
  }
  return acc / 1000.0;
}

BinaryMask detail_region(const ImageF32& gt, int band_k) {
  if (gt.channels() != 1) throw std::invalid_argument("detail_region: expected one channel");
  BinaryMask soft(gt.height(), gt.width(), 1);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const float a = gt.data()[i];
    soft.data()[i] = (a > 0.0f && a < 1.0f) ? 1.0f : 0.0f;
  }
  return dilate(soft, band_k);
}

ImageEval evaluate_pair(const std::string& name, const ImageF32& pred, const ImageF32& gt, const EvalOptions& options) {
  const ImageF32 p = to_gray(pred);
  const ImageF32 g = to_gray(gt);
  check_pair(p, g, nullptr, "evaluate_pair");
  const BinaryMask region = detail_region(g, options.detail_band);
  ImageEval e;
  e.name = name;
  e.whole = {sad(p, g), mse(p, g), grad_error(p, g, options.grad_sigma), conn_error(p, g, options.conn_step)};
  e.detail = {sad(p, g, &region), mse(p, g, &region), grad_error(p, g, options.grad_sigma, &region),
              conn_error(p, g, options.conn_step, &region)};
  e.detail_pixels = static_cast<std::size_t>(std::count(region.data().begin(), region.data().end(), 1.0f));
  return e;
}

EvalReport assemble_report(std::vector<ImageEval> images, const EvalOptions& options) {
  EvalReport r;
  r.options = options;
  r.images = std::move(images);
  if (r.images.empty()) return r;
  auto add = [](MetricSet& acc, const MetricSet& m) {
    acc.sad += m.sad;
    acc.mse += m.mse;
    acc.grad += m.grad;
    acc.conn += m.conn;
  };
  for (const ImageEval& e : r.images) {
    add(r.mean_whole, e.whole);
    add(r.mean_detail, e.detail);
  }
  const double n = static_cast<double>(r.images.size());
  for (MetricSet* m : {&r.mean_whole, &r.mean_detail}) {
    m->sad /= n;
    m->mse /= n;
    m->grad /= n;
    m->conn /= n;
  }
  return r;
}

EvalReport evaluate(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir, const EvalOptions& options) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(pred_dir)) throw IoError("not a directory: " + pred_dir.string());
  if (!fs::is_directory(gt_dir)) throw IoError("not a directory: " + gt_dir.string());
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(gt_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  for (const std::string& n : names) {
    if (!fs::exists(pred_dir / n)) throw IoError("missing prediction for " + n);
  }
  std::vector<ImageEval> images(names.size());
  parallel_for(names.size(), [&](std::size_t i) {
    images[i] = evaluate_pair(names[i], read_png(pred_dir / names[i]), read_png(gt_dir / names[i]), options);
  });
  return assemble_report(std::move(images), options);
}

namespace {

nlohmann::json metric_json(const MetricSet& m) {
  return {{"sad", m.sad}, {"mse", m.mse}, {"grad", m.grad}, {"conn", m.conn}};
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["options"] = {{"detail_band", report.options.detail_band},
                  {"grad_sigma", report.options.grad_sigma},
                  {"conn_step", report.options.conn_step}};
  j["count"] = report.images.size();
  j["mean"] = {{"whole", metric_json(report.mean_whole)}, {"detail", metric_json(report.mean_detail)}};
  nlohmann::json per = nlohmann::json::array();
  for (const ImageEval& e : report.images) {
    per.push_back({{"name", e.name},
                   {"whole", metric_json(e.whole)},
                   {"detail", metric_json(e.detail)},
                   {"detail_pixels", e.detail_pixels}});
  }
  j["images"] = per;
  return j.dump(2);
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s | %-36s | %-36s\n", "", "Whole Image", "Detail");
  out << line;
  std::snprintf(line, sizeof line, "%-24s | %8s %8s %8s %8s | %8s %8s %8s %8s\n", "Image", "SAD", "MSE(e3)",
                "Grad", "Conn", "SAD", "MSE(e3)", "Grad", "Conn");
  out << line;
  auto row = [&](const std::string& name, const MetricSet& w, const MetricSet& d) {
    std::snprintf(line, sizeof line, "%-24.24s | %8.3f %8.3f %8.3f %8.3f | %8.3f %8.3f %8.3f %8.3f\n", name.c_str(),
                  w.sad, w.mse * 1e3, w.grad, w.conn, d.sad, d.mse * 1e3, d.grad, d.conn);
    out << line;
  };
  for (const ImageEval& e : report.images) row(e.name, e.whole, e.detail);
  row("mean (" + std::to_string(report.images.size()) + ")", report.mean_whole, report.mean_detail);
  return out.str();
}

}  // namespace auxmat
