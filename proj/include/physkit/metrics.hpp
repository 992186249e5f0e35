#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "physkit/asset.hpp"
#include "physkit/render.hpp"

namespace physkit {

/// Squared-distance Chamfer: mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2.
/// Unscaled; reports multiply by 1e3.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

/// F-score in [0, 1]; reports multiply by 1e2.
double fscore(std::span<const Vec3> a, std::span<const Vec3> b, double threshold = 0.05);

/// 10 log10(255^2 / MSE) over RGB per view, capped at 100 dB, averaged over views.
double psnr(std::span<const RgbImage> pred, std::span<const RgbImage> gt);
double psnr(const RgbImage& pred, const RgbImage& gt);
inline constexpr double kPsnrCap = 100.0;

/// Per-pixel error between two channel values (`channels` floats each).
/// A background side is replaced by the neutral value 0, applied after
/// normalization when `normalized` is set (direction and type: zero vector).
double pixel_error(Channel channel, const float* pred, bool pred_fg, const float* gt, bool gt_fg, bool normalized);

struct MaeResult {
  double normalized = 0.0;
  double absolute = 0.0;
};

/// MAE over pixels where either image is foreground, averaged over views.
/// Views where both images are empty are skipped.
MaeResult property_mae(const ObjectAsset& pred, const ObjectAsset& gt, Channel channel,
                       const std::vector<ViewSpec>& views = default_property_views());

/// Same, from already rendered images of matching views.
MaeResult property_mae(std::span<const PropertyImage> pred, std::span<const PropertyImage> gt);

struct EvalOptions {
  std::size_t surface_samples = 10000;
  double fscore_threshold = 0.05;
  int psnr_views = 30;
  int psnr_resolution = 256;
  int property_resolution = 512;
  std::uint64_t seed = 0;
};

struct MetricReport {
  double psnr_db = 0.0;
  double cd_e3 = 0.0;
  double fscore_e2 = 0.0;
  std::map<std::string, double> property_mae;      // normalized
  std::map<std::string, double> property_mae_abs;  // raw units

  bool operator==(const MetricReport&) const = default;
};

MetricReport evaluate(const ObjectAsset& pred, const ObjectAsset& gt, const EvalOptions& options = {});

nlohmann::json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);

/// One header line and one row per (id, report); columns fixed in kPropertyChannels order.
std::string reports_to_csv(const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace physkit
