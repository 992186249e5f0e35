#include "physkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "physkit/error.hpp"
#include "physkit/geometry.hpp"
#include "physkit/nearest.hpp"
#include "physkit/rng.hpp"

namespace physkit {

namespace {

std::vector<double> nearest_sq(std::span<const Vec3> query, const GridIndex& index) {
  std::vector<double> out(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) out[i] = index.nearest_sq(query[i]).first;
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double normalize_scalar(Channel c, double v) {
  switch (c) {
    case Channel::Scale: return v / 1000.0;
    case Channel::Density: return v / 10.0;
    case Channel::Affordance: return (v - 1.0) / 9.0;
    case Channel::KinRange: return v / M_PI;
    default: return v;
  }
}

// Background test for stored images: every channel holds the sentinel.
bool is_background(const float* px, int channels) {
  for (int c = 0; c < channels; ++c) {
    if (px[c] != kBackground) return false;
  }
  return true;
}

}  // namespace

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw Error(Errc::EmptyGeometry, "chamfer needs non-empty clouds");
  const GridIndex ia(a), ib(b);
  return mean(nearest_sq(a, ib)) + mean(nearest_sq(b, ia));
}

double fscore(std::span<const Vec3> a, std::span<const Vec3> b, double threshold) {
  if (a.empty() || b.empty()) throw Error(Errc::EmptyGeometry, "fscore needs non-empty clouds");
  if (!(threshold > 0.0)) throw Error(Errc::InvalidArgument, "fscore threshold must be positive");
  const GridIndex ia(a), ib(b);
  const double t2 = threshold * threshold;
  std::size_t hit_a = 0, hit_b = 0;
  for (const auto& p : a) hit_a += ib.nearest_sq_bounded(p, t2).first <= t2;
  for (const auto& p : b) hit_b += ia.nearest_sq_bounded(p, t2).first <= t2;
  const double precision = static_cast<double>(hit_a) / static_cast<double>(a.size());
  const double recall = static_cast<double>(hit_b) / static_cast<double>(b.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double psnr(const RgbImage& pred, const RgbImage& gt) {
  if (pred.width != gt.width || pred.height != gt.height || pred.rgb.size() != gt.rgb.size()) {
    throw Error(Errc::ShapeMismatch, fmt::format("image sizes differ: {}x{} vs {}x{}", pred.width, pred.height,
                                                 gt.width, gt.height));
  }
  if (pred.rgb.empty()) throw Error(Errc::ShapeMismatch, "empty images");
  double se = 0.0;
  for (std::size_t i = 0; i < pred.rgb.size(); ++i) {
    const double d = static_cast<double>(pred.rgb[i]) - static_cast<double>(gt.rgb[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(pred.rgb.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double psnr(std::span<const RgbImage> pred, std::span<const RgbImage> gt) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw Error(Errc::ShapeMismatch, fmt::format("view counts differ or are zero: {} vs {}", pred.size(), gt.size()));
  }
  double total = 0.0;
  for (std::size_t v = 0; v < pred.size(); ++v) total += psnr(pred[v], gt[v]);
  return total / static_cast<double>(pred.size());
}

double pixel_error(Channel channel, const float* pred, bool pred_fg, const float* gt, bool gt_fg, bool normalized) {
  const int n = channel_width(channel);
  auto value = [&](const float* px, bool fg, int c) -> double {
    if (!fg) return 0.0;
    return normalized ? normalize_scalar(channel, px[c]) : static_cast<double>(px[c]);
  };
  if (normalized && channel == Channel::KinType) {
    // One-hot L1 distance / 2; background is the zero vector.
    if (pred_fg && gt_fg) return std::lround(pred[0]) == std::lround(gt[0]) ? 0.0 : 1.0;
    return (pred_fg || gt_fg) ? 0.5 : 0.0;
  }
  if (normalized && channel == Channel::KinDirection) {
    Vec3 a = Vec3::Zero(), b = Vec3::Zero();
    if (pred_fg) a = Vec3(pred[0], pred[1], pred[2]);
    if (gt_fg) b = Vec3(gt[0], gt[1], gt[2]);
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 && nb == 0.0) return 0.0;
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - std::min(1.0, std::abs(a.dot(b)) / (na * nb));
  }
  double s = 0.0;
  for (int c = 0; c < n; ++c) s += std::abs(value(pred, pred_fg, c) - value(gt, gt_fg, c));
  return s / n;
}

MaeResult property_mae(std::span<const PropertyImage> pred, std::span<const PropertyImage> gt) {
  if (pred.size() != gt.size()) throw Error(Errc::ShapeMismatch, "view counts differ");
  MaeResult out;
  int used = 0;
  for (std::size_t v = 0; v < pred.size(); ++v) {
    const PropertyImage& a = pred[v];
    const PropertyImage& b = gt[v];
    if (a.width != b.width || a.height != b.height || a.channels != b.channels || a.channel != b.channel) {
      throw Error(Errc::ShapeMismatch, "property images differ in shape or channel");
    }
    double sum_n = 0.0, sum_a = 0.0;
    std::size_t count = 0;
    const std::size_t npx = static_cast<std::size_t>(a.width) * a.height;
    for (std::size_t i = 0; i < npx; ++i) {
      const float* pa = &a.pixels[i * a.channels];
      const float* pb = &b.pixels[i * b.channels];
      const bool fa = !is_background(pa, a.channels);
      const bool fb = !is_background(pb, b.channels);
      if (!fa && !fb) continue;
      sum_n += pixel_error(a.channel, pa, fa, pb, fb, true);
      sum_a += pixel_error(a.channel, pa, fa, pb, fb, false);
      ++count;
    }
    if (count == 0) continue;
    out.normalized += sum_n / static_cast<double>(count);
    out.absolute += sum_a / static_cast<double>(count);
    ++used;
  }
  if (used > 0) {
    out.normalized /= used;
    out.absolute /= used;
  }
  return out;
}

MaeResult property_mae(const ObjectAsset& pred, const ObjectAsset& gt, Channel channel,
                       const std::vector<ViewSpec>& views) {
  MaeResult out;
  int used = 0;
  for (const ViewSpec& view : views) {
    const Fragments fa = rasterize_fragments(pred, view);
    const Fragments fb = rasterize_fragments(gt, view);
    const PropertyImage a = fill_channel(pred, fa, view, channel);
    const PropertyImage b = fill_channel(gt, fb, view, channel);
    double sum_n = 0.0, sum_a = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < fa.part_id.size(); ++i) {
      const bool ga = fa.foreground(i), gb = fb.foreground(i);
      if (!ga && !gb) continue;
      const float* pa = &a.pixels[i * a.channels];
      const float* pb = &b.pixels[i * b.channels];
      sum_n += pixel_error(channel, pa, ga, pb, gb, true);
      sum_a += pixel_error(channel, pa, ga, pb, gb, false);
      ++count;
    }
    if (count == 0) continue;
    out.normalized += sum_n / static_cast<double>(count);
    out.absolute += sum_a / static_cast<double>(count);
    ++used;
  }
  if (used > 0) {
    out.normalized /= used;
    out.absolute /= used;
  }
  return out;
}

MetricReport evaluate(const ObjectAsset& pred, const ObjectAsset& gt, const EvalOptions& options) {
  MetricReport r;
  const ObjectSamples sp = sample_object(pred, options.surface_samples, derive_seed(options.seed, 1));
  const ObjectSamples sg = sample_object(gt, options.surface_samples, derive_seed(options.seed, 1));
  r.cd_e3 = chamfer(sp.points, sg.points) * 1e3;
  r.fscore_e2 = fscore(sp.points, sg.points, options.fscore_threshold) * 1e2;

  const auto rviews = random_sphere_views(options.psnr_views, derive_seed(options.seed, 3), options.psnr_resolution);
  std::vector<RgbImage> ip, ig;
  for (const auto& v : rviews) {
    ip.push_back(render_color(pred, v));
    ig.push_back(render_color(gt, v));
  }
  r.psnr_db = psnr(ip, ig);

  const auto views = default_property_views(options.property_resolution);
  std::vector<Fragments> fp, fg;
  for (const auto& v : views) {
    fp.push_back(rasterize_fragments(pred, v));
    fg.push_back(rasterize_fragments(gt, v));
  }
  for (Channel c : kPropertyChannels) {
    std::vector<PropertyImage> a, b;
    for (std::size_t v = 0; v < views.size(); ++v) {
      a.push_back(fill_channel(pred, fp[v], views[v], c));
      b.push_back(fill_channel(gt, fg[v], views[v], c));
    }
    const MaeResult m = property_mae(a, b);
    r.property_mae[std::string(to_string(c))] = m.normalized;
    r.property_mae_abs[std::string(to_string(c))] = m.absolute;
  }
  return r;
}

nlohmann::json report_to_json(const MetricReport& report) {
  return nlohmann::json{{"psnr_db", report.psnr_db},
                        {"cd_e3", report.cd_e3},
                        {"fscore_e2", report.fscore_e2},
                        {"property_mae", report.property_mae},
                        {"property_mae_abs", report.property_mae_abs}};
}

MetricReport report_from_json(const nlohmann::json& j) {
  try {
    MetricReport r;
    r.psnr_db = j.at("psnr_db").get<double>();
    r.cd_e3 = j.at("cd_e3").get<double>();
    r.fscore_e2 = j.at("fscore_e2").get<double>();
    r.property_mae = j.at("property_mae").get<std::map<std::string, double>>();
    r.property_mae_abs = j.value("property_mae_abs", std::map<std::string, double>{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaViolation, std::string("metric report: ") + e.what());
  }
}

std::string reports_to_csv(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::ostringstream out;
  out << "id,psnr_db,cd_e3,fscore_e2";
  for (Channel c : kPropertyChannels) out << ",mae_" << to_string(c);
  for (Channel c : kPropertyChannels) out << ",mae_abs_" << to_string(c);
  out << "\n";
  auto get = [](const std::map<std::string, double>& m, Channel c) {
    auto it = m.find(std::string(to_string(c)));
    return it == m.end() ? std::nan("") : it->second;
  };
  for (const auto& [id, r] : rows) {
    out << id << fmt::format(",{:.9g},{:.9g},{:.9g}", r.psnr_db, r.cd_e3, r.fscore_e2);
    for (Channel c : kPropertyChannels) out << fmt::format(",{:.9g}", get(r.property_mae, c));
    for (Channel c : kPropertyChannels) out << fmt::format(",{:.9g}", get(r.property_mae_abs, c));
    out << "\n";
  }
  return out.str();
}

}  // namespace physkit
