#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "auxmat/image.hpp"

namespace auxmat {

// Matting error measures. Every function accepts an optional region mask;
// sums then run over region pixels only and MSE averages over them.
// SAD, Grad and Conn are reported in thousands (divided by 1000).

double sad(const ImageF32& pred, const ImageF32& gt, const BinaryMask* region = nullptr);
double mse(const ImageF32& pred, const ImageF32& gt, const BinaryMask* region = nullptr);

/// Gaussian first-derivative kernel along x, L2-normalized, as used by the
/// standard matting gradient metric. Side = 2*ceil(sigma*sqrt(-2 ln(sqrt(2 pi) sigma 0.01)))+1.
/// Row-major (side x side); the y kernel is its transpose.
std::vector<double> gaussian_derivative_kernel(double sigma, int& side);

/// Gradient magnitude from the Gaussian-derivative filters (convolution,
/// replicate border). Separable implementation.
ImageF32 gaussian_gradient_magnitude(const ImageF32& img, double sigma);

double grad_error(const ImageF32& pred, const ImageF32& gt, double sigma = 1.4,
                  const BinaryMask* region = nullptr);

/// Largest-4-connected-component threshold sweep. Thresholds are k*step for
/// k = 1 .. round(1/step). Ties between equally large components go to the
/// one whose first pixel comes first in row-major order.
ImageF32 connectivity_levels(const ImageF32& pred, const ImageF32& gt, double step = 0.1);
double conn_error(const ImageF32& pred, const ImageF32& gt, double step = 0.1,
                  const BinaryMask* region = nullptr);

/// dilate(0 < gt < 1, band_k).
BinaryMask detail_region(const ImageF32& gt, int band_k = 15);

struct MetricSet {
  double sad = 0, mse = 0, grad = 0, conn = 0;
};

struct ImageEval {
  std::string name;
  MetricSet whole;
  MetricSet detail;
  std::size_t detail_pixels = 0;
};

struct EvalOptions {
  int detail_band = 15;
  double grad_sigma = 1.4;
  double conn_step = 0.1;
};

struct EvalReport {
  std::vector<ImageEval> images;
  MetricSet mean_whole;
  MetricSet mean_detail;
  EvalOptions options;
};

ImageEval evaluate_pair(const std::string& name, const ImageF32& pred, const ImageF32& gt,
                        const EvalOptions& options = {});

/// Averages per-image entries into the report means.
EvalReport assemble_report(std::vector<ImageEval> images, const EvalOptions& options);

/// Pairs PNG files by name (every gt file needs a same-named prediction).
EvalReport evaluate(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                    const EvalOptions& options = {});

std::string report_to_json(const EvalReport& report);
/// Whole-image / detail table; MSE printed x1e3.
std::string report_to_table(const EvalReport& report);

}  // namespace auxmat
