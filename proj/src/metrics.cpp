#include "ucdl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ucdl {
namespace {

void check_same(const MagnitudeImage& a, const MagnitudeImage& b) {
  if (a.height != b.height || a.width != b.width) {
    throw Error(ErrorCode::ShapeMismatch, "metric inputs differ in size");
  }
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w(size);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

MagnitudeImage crop_plane(const ComplexImage& x, std::size_t nx, std::size_t ny, std::size_t stride, std::size_t t,
                          std::size_t roi_h, std::size_t roi_w) {
  const Roi roi = centered_roi(nx, ny, roi_h, roi_w);
  MagnitudeImage out{roi_h, roi_w, std::vector<double>(roi_h * roi_w)};
  for (std::size_t r = 0; r < roi_h; ++r) {
    for (std::size_t c = 0; c < roi_w; ++c) {
      const std::size_t p = (r + roi.offset[0]) * ny + (c + roi.offset[1]);
      out.values[r * roi_w + c] = std::abs(x[p * stride + t]);
    }
  }
  return out;
}

}  // namespace

Roi centered_roi(std::size_t height, std::size_t width, std::size_t roi_h, std::size_t roi_w) {
  if (roi_h == 0 || roi_w == 0 || roi_h > height || roi_w > width) {
    throw Error(ErrorCode::RoiTooLarge, "ROI " + std::to_string(roi_h) + "x" + std::to_string(roi_w) +
                                            " does not fit image " + std::to_string(height) + "x" +
                                            std::to_string(width));
  }
  return Roi{{(height - roi_h) / 2, (width - roi_w) / 2}, {roi_h, roi_w}};
}

MagnitudeImage roi_crop(const ComplexImage& x, std::size_t roi_h, std::size_t roi_w) {
  if (x.ndim() != 2) throw Error(ErrorCode::ShapeMismatch, "roi_crop expects a 2D image");
  return crop_plane(x, x.shape()[0], x.shape()[1], 1, 0, roi_h, roi_w);
}

MagnitudeImage roi_crop_frame(const ComplexImage& x, std::size_t t, std::size_t roi_h, std::size_t roi_w) {
  if (x.ndim() != 3 || t >= x.shape()[2]) throw Error(ErrorCode::ShapeMismatch, "roi_crop_frame: bad frame index");
  return crop_plane(x, x.shape()[0], x.shape()[1], x.shape()[2], t, roi_h, roi_w);
}

double psnr(const MagnitudeImage& x, const MagnitudeImage& ref) {
  check_same(x, ref);
  double mse = 0.0;
  double peak = 0.0;
  for (std::size_t i = 0; i < ref.values.size(); ++i) {
    const double d = x.values[i] - ref.values[i];
    mse += d * d;
    peak = std::max(peak, ref.values[i]);
  }
  mse /= static_cast<double>(ref.values.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double nrmse(const MagnitudeImage& x, const MagnitudeImage& ref) {
  check_same(x, ref);
  double err = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < ref.values.size(); ++i) {
    const double d = x.values[i] - ref.values[i];
    err += d * d;
    den += ref.values[i] * ref.values[i];
  }
  if (den == 0.0) throw Error(ErrorCode::ZeroReference, "NRMSE reference is identically zero");
  return std::sqrt(err / den);
}

double ssim(const MagnitudeImage& x, const MagnitudeImage& ref) {
  check_same(x, ref);
  const std::size_t win_h = std::min<std::size_t>(11, ref.height);
  const std::size_t win_w = std::min<std::size_t>(11, ref.width);
  const auto wh = gaussian_window(win_h, 1.5);
  const auto ww = gaussian_window(win_w, 1.5);

  double range = 0.0;
  for (double v : ref.values) range = std::max(range, v);
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t r0 = 0; r0 + win_h <= ref.height; ++r0) {
    for (std::size_t c0 = 0; c0 + win_w <= ref.width; ++c0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t i = 0; i < win_h; ++i) {
        for (std::size_t j = 0; j < win_w; ++j) {
          const double w = wh[i] * ww[j];
          const double a = x.at(r0 + i, c0 + j);
          const double b = ref.at(r0 + i, c0 + j);
          mx += w * a;
          my += w * b;
          sxx += w * a * a;
          syy += w * b * b;
          sxy += w * a * b;
        }
      }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cov = sxy - mx * my;
      const double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
      const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
      // Both images constant and equal inside the window with a zero range.
      total += den == 0.0 ? 1.0 : num / den;
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

MetricReport evaluate_metrics(const ComplexImage& x, const ComplexImage& ref, std::size_t roi_h, std::size_t roi_w) {
  check_same_shape(x.shape(), ref.shape(), "evaluate_metrics");
  if (ref.ndim() != 2 && ref.ndim() != 3) throw Error(ErrorCode::ShapeMismatch, "metrics need 2D or 3D images");
  const std::size_t nx = ref.shape()[0], ny = ref.shape()[1];
  if (roi_h == 0) roi_h = nx / 2;
  if (roi_w == 0) roi_w = ny / 2;
  const std::size_t frames = ref.ndim() == 3 ? ref.shape()[2] : 1;

  MetricReport report;
  report.roi = centered_roi(nx, ny, roi_h, roi_w);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto a = crop_plane(x, nx, ny, frames, t, roi_h, roi_w);
    const auto b = crop_plane(ref, nx, ny, frames, t, roi_h, roi_w);
    report.psnr += psnr(a, b);
    report.nrmse += nrmse(a, b);
    report.ssim += ssim(a, b);
  }
  report.psnr /= static_cast<double>(frames);
  report.nrmse /= static_cast<double>(frames);
  report.ssim /= static_cast<double>(frames);
  return report;
}

nlohmann::json to_json(const MetricReport& report) {
  nlohmann::json j;
  if (std::isinf(report.psnr)) {
    j["psnr"] = "inf";
  } else {
    j["psnr"] = report.psnr;
  }
  j["nrmse"] = report.nrmse;
  j["ssim"] = report.ssim;
  j["roi"] = {report.roi.size[0], report.roi.size[1]};
  return j;
}

std::string csv_header() { return "psnr,nrmse,ssim,roi_h,roi_w"; }

std::string csv_row(const MetricReport& report) {
  char buf[160];
  if (std::isinf(report.psnr)) {
    std::snprintf(buf, sizeof buf, "inf,%.17g,%.17g,%zu,%zu", report.nrmse, report.ssim, report.roi.size[0],
                  report.roi.size[1]);
  } else {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%zu,%zu", report.psnr, report.nrmse, report.ssim,
                  report.roi.size[0], report.roi.size[1]);
  }
  return buf;
}

}  // namespace ucdl
