#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "ucdl/tensor.hpp"

namespace ucdl {

/// Real-valued 2D image, row-major (height = first axis).
struct MagnitudeImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * width + c]; }
};

struct Roi {
  std::array<std::size_t, 2> offset{0, 0};
  std::array<std::size_t, 2> size{0, 0};
};

/// Offset of a centred crop; an odd leftover puts the extra pixel on the
/// high-index side.
Roi centered_roi(std::size_t height, std::size_t width, std::size_t roi_h, std::size_t roi_w);

/// Centred crop of |x| for a 2D image. Throws RoiTooLarge.
MagnitudeImage roi_crop(const ComplexImage& x, std::size_t roi_h, std::size_t roi_w);
/// Same for frame t of an (N_x, N_y, N_t) image.
MagnitudeImage roi_crop_frame(const ComplexImage& x, std::size_t t, std::size_t roi_h, std::size_t roi_w);

/// 10 log10(max(ref)^2 / MSE); +infinity when the images are identical.
double psnr(const MagnitudeImage& x, const MagnitudeImage& ref);
/// ||x - ref|| / ||ref||; throws ZeroReference when ref is all zero.
double nrmse(const MagnitudeImage& x, const MagnitudeImage& ref);
/// Mean SSIM over valid 11x11 Gaussian (sigma 1.5) windows with K1 = 0.01,
/// K2 = 0.03 and dynamic range max(ref). The window shrinks to the image for
/// crops smaller than 11 pixels.
double ssim(const MagnitudeImage& x, const MagnitudeImage& ref);

struct MetricReport {
  double psnr = 0.0;
  double nrmse = 0.0;
  double ssim = 0.0;
  Roi roi;
};

/// Metrics on ROI-cropped magnitudes. For (N_x, N_y, N_t) images every frame
/// is scored separately and the three numbers are averaged over frames.
/// roi_h / roi_w of 0 select half of each spatial extent.
MetricReport evaluate_metrics(const ComplexImage& x, const ComplexImage& ref, std::size_t roi_h = 0,
                              std::size_t roi_w = 0);

/// {psnr, nrmse, ssim, roi: [h, w]}; an infinite PSNR is written as "inf".
nlohmann::json to_json(const MetricReport& report);
std::string csv_header();
std::string csv_row(const MetricReport& report);

}  // namespace ucdl
