#include "physkit/cfm.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include <fmt/format.h>

#include "physkit/asset_io.hpp"
#include "physkit/rng.hpp"

namespace physkit {

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes a little-endian host");

namespace {

constexpr char kCkptMagic[8] = {'P', 'K', 'C', 'F', 'M', '0', '0', '1'};

void check_dim(const FieldModel& model, const ToyBatch& batch) {
  if (batch.size < 1) throw Error(Errc::ShapeMismatch, "batch is empty");
  const std::size_t n = static_cast<std::size_t>(batch.size) * batch.dim;
  if (batch.dim != model.dim() || batch.x0.size() != n || batch.eps.size() != n ||
      batch.t.size() != static_cast<std::size_t>(batch.size)) {
    throw Error(Errc::ShapeMismatch, fmt::format("batch {}x{} does not fit a model of dim {}", batch.size, batch.dim,
                                                 model.dim()));
  }
}

// Residual f(x_t, t) - (eps - x0) for row b.
void residual(const FieldModel& model, const ToyBatch& batch, int b, std::vector<double>& xt, std::vector<double>& r) {
  const int d = batch.dim;
  const double t = batch.t[b];
  const double* x0 = &batch.x0[static_cast<std::size_t>(b) * d];
  const double* eps = &batch.eps[static_cast<std::size_t>(b) * d];
  for (int k = 0; k < d; ++k) xt[k] = (1.0 - t) * x0[k] + t * eps[k];
  model.evaluate(xt, t, r);
  for (int k = 0; k < d; ++k) r[k] -= eps[k] - x0[k];
}

}  // namespace

LinearField::LinearField(int dim) : dim_(dim) {
  if (dim < 1) throw Error(Errc::InvalidArgument, "model dim must be positive");
  params_.assign(static_cast<std::size_t>(dim) * (dim + 1) + dim, 0.0);
}

void LinearField::evaluate(std::span<const double> x, double t, std::span<double> out) const {
  const int in = dim_ + 1;
  const double* b = &params_[static_cast<std::size_t>(dim_) * in];
  for (int i = 0; i < dim_; ++i) {
    const double* w = &params_[static_cast<std::size_t>(i) * in];
    double s = b[i];
    for (int k = 0; k < dim_; ++k) s += w[k] * x[k];
    s += w[dim_] * t;
    out[i] = s;
  }
}

void LinearField::backward(std::span<const double> x, double t, std::span<const double> g,
                           std::span<double> grad) const {
  const int in = dim_ + 1;
  double* gb = &grad[static_cast<std::size_t>(dim_) * in];
  for (int i = 0; i < dim_; ++i) {
    double* gw = &grad[static_cast<std::size_t>(i) * in];
    for (int k = 0; k < dim_; ++k) gw[k] += g[i] * x[k];
    gw[dim_] += g[i] * t;
    gb[i] += g[i];
  }
}

MlpField::MlpField(int dim, int hidden) : dim_(dim), hidden_(hidden) {
  if (dim < 1 || hidden < 1) throw Error(Errc::InvalidArgument, "model dims must be positive");
  const std::size_t in = dim + 1;
  params_.assign(hidden * in + hidden + static_cast<std::size_t>(dim) * hidden + dim, 0.0);
}

void MlpField::evaluate(std::span<const double> x, double t, std::span<double> out) const {
  const int in = dim_ + 1;
  const double* w1 = params_.data();
  const double* b1 = w1 + static_cast<std::size_t>(hidden_) * in;
  const double* w2 = b1 + hidden_;
  const double* b2 = w2 + static_cast<std::size_t>(dim_) * hidden_;
  std::vector<double> h(hidden_);
  for (int j = 0; j < hidden_; ++j) {
    const double* w = w1 + static_cast<std::size_t>(j) * in;
    double s = b1[j];
    for (int k = 0; k < dim_; ++k) s += w[k] * x[k];
    s += w[dim_] * t;
    h[j] = std::tanh(s);
  }
  for (int i = 0; i < dim_; ++i) {
    const double* w = w2 + static_cast<std::size_t>(i) * hidden_;
    double s = b2[i];
    for (int j = 0; j < hidden_; ++j) s += w[j] * h[j];
    out[i] = s;
  }
}

void MlpField::backward(std::span<const double> x, double t, std::span<const double> g,
                        std::span<double> grad) const {
  const int in = dim_ + 1;
  const std::size_t o_b1 = static_cast<std::size_t>(hidden_) * in;
  const std::size_t o_w2 = o_b1 + hidden_;
  const std::size_t o_b2 = o_w2 + static_cast<std::size_t>(dim_) * hidden_;
  const double* w1 = params_.data();
  const double* b1 = w1 + o_b1;
  const double* w2 = w1 + o_w2;
  std::vector<double> h(hidden_);
  for (int j = 0; j < hidden_; ++j) {
    const double* w = w1 + static_cast<std::size_t>(j) * in;
    double s = b1[j];
    for (int k = 0; k < dim_; ++k) s += w[k] * x[k];
    s += w[dim_] * t;
    h[j] = std::tanh(s);
  }
  std::vector<double> dh(hidden_, 0.0);
  for (int i = 0; i < dim_; ++i) {
    double* gw2 = &grad[o_w2 + static_cast<std::size_t>(i) * hidden_];
    const double* w = w2 + static_cast<std::size_t>(i) * hidden_;
    for (int j = 0; j < hidden_; ++j) {
      gw2[j] += g[i] * h[j];
      dh[j] += w[j] * g[i];
    }
    grad[o_b2 + i] += g[i];
  }
  for (int j = 0; j < hidden_; ++j) {
    const double dz = dh[j] * (1.0 - h[j] * h[j]);
    double* gw1 = &grad[static_cast<std::size_t>(j) * in];
    for (int k = 0; k < dim_; ++k) gw1[k] += dz * x[k];
    gw1[dim_] += dz * t;
    grad[o_b1 + j] += dz;
  }
}

ConstantField::ConstantField(std::vector<double> value) : value_(std::move(value)) {
  if (value_.empty()) throw Error(Errc::InvalidArgument, "constant field needs a value");
}

void ConstantField::evaluate(std::span<const double>, double, std::span<double> out) const {
  for (std::size_t i = 0; i < value_.size(); ++i) out[i] = value_[i];
}

void init_params(FieldModel& model, std::uint64_t seed, double scale) {
  Rng rng(seed);
  auto& p = model.params();
  const int d = model.dim();
  if (auto* mlp = dynamic_cast<MlpField*>(&model)) {
    const int h = mlp->hidden();
    const std::size_t n_w1 = static_cast<std::size_t>(h) * (d + 1);
    const std::size_t o_w2 = n_w1 + h;
    const std::size_t n_w2 = static_cast<std::size_t>(d) * h;
    std::fill(p.begin(), p.end(), 0.0);
    for (std::size_t i = 0; i < n_w1; ++i) p[i] = rng.normal() * scale / std::sqrt(d + 1.0);
    for (std::size_t i = 0; i < n_w2; ++i) p[o_w2 + i] = rng.normal() * scale / std::sqrt(static_cast<double>(h));
  } else if (dynamic_cast<LinearField*>(&model)) {
    const std::size_t n_w = static_cast<std::size_t>(d) * (d + 1);
    std::fill(p.begin(), p.end(), 0.0);
    for (std::size_t i = 0; i < n_w; ++i) p[i] = rng.normal() * scale / std::sqrt(d + 1.0);
  }
}

std::vector<double> interpolant(std::span<const double> x0, std::span<const double> eps, double t) {
  if (x0.size() != eps.size()) {
    throw Error(Errc::ShapeMismatch, fmt::format("x0 has {} entries, eps {}", x0.size(), eps.size()));
  }
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = (1.0 - t) * x0[i] + t * eps[i];
  return out;
}

double cfm_loss(const FieldModel& model, const ToyBatch& batch) {
  check_dim(model, batch);
  std::vector<double> xt(batch.dim), r(batch.dim);
  double total = 0.0;
  for (int b = 0; b < batch.size; ++b) {
    residual(model, batch, b, xt, r);
    double s = 0.0;
    for (double v : r) s += v * v;
    total += s;
  }
  return total / batch.size;
}

double cfm_loss_grad(const FieldModel& model, const ToyBatch& batch, std::vector<double>& grad) {
  check_dim(model, batch);
  grad.assign(model.params().size(), 0.0);
  std::vector<double> xt(batch.dim), r(batch.dim);
  const double inv_b = 1.0 / batch.size;
  double total = 0.0;
  for (int b = 0; b < batch.size; ++b) {
    residual(model, batch, b, xt, r);
    double s = 0.0;
    for (double& v : r) {
      s += v * v;
      v *= 2.0 * inv_b;
    }
    total += s;
    model.backward(xt, batch.t[b], r, grad);
  }
  return total * inv_b;
}

std::vector<double> cfm_block_losses(const FieldModel& model, const ToyBatch& batch, std::span<const int> widths) {
  check_dim(model, batch);
  int sum = 0;
  for (int w : widths) {
    if (w < 1) throw Error(Errc::ShapeMismatch, "block widths must be positive");
    sum += w;
  }
  if (sum != batch.dim) throw Error(Errc::ShapeMismatch, fmt::format("blocks cover {} of {} dims", sum, batch.dim));
  std::vector<double> out(widths.size(), 0.0);
  std::vector<double> xt(batch.dim), r(batch.dim);
  for (int b = 0; b < batch.size; ++b) {
    residual(model, batch, b, xt, r);
    int k = 0;
    for (std::size_t blk = 0; blk < widths.size(); ++blk) {
      double s = 0.0;
      for (int j = 0; j < widths[blk]; ++j, ++k) s += r[k] * r[k];
      out[blk] += s;
    }
  }
  for (double& v : out) v /= batch.size;
  return out;
}

double gradient_check(const FieldModel& model, const ToyBatch& batch, double h) {
  std::vector<double> analytic;
  cfm_loss_grad(model, batch, analytic);
  auto probe = model.clone();
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double p = probe->params()[i];
    probe->params()[i] = p + h;
    const double up = cfm_loss(*probe, batch);
    probe->params()[i] = p - h;
    const double down = cfm_loss(*probe, batch);
    probe->params()[i] = p;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

std::vector<double> sample_mixture(const MixtureSpec& spec, int n, std::uint64_t seed) {
  if (spec.centers.empty()) throw Error(Errc::InvalidArgument, "mixture needs at least one center");
  for (const auto& c : spec.centers) {
    if (static_cast<int>(c.size()) != spec.dim) throw Error(Errc::ShapeMismatch, "center dim mismatch");
  }
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n) * spec.dim);
  for (int i = 0; i < n; ++i) {
    const auto& c = spec.centers[rng.index(spec.centers.size())];
    for (int k = 0; k < spec.dim; ++k) out.push_back(c[k] + spec.sigma * rng.normal());
  }
  return out;
}

ToyBatch draw_batch(std::span<const double> data, int dim, int batch, std::uint64_t seed) {
  if (dim < 1 || data.empty() || data.size() % dim != 0) throw Error(Errc::ShapeMismatch, "data is not n x dim");
  if (batch < 1) throw Error(Errc::InvalidArgument, "batch must be >= 1");
  const std::size_t rows = data.size() / dim;
  Rng rng(seed);
  ToyBatch b;
  b.size = batch;
  b.dim = dim;
  b.x0.reserve(static_cast<std::size_t>(batch) * dim);
  b.eps.reserve(static_cast<std::size_t>(batch) * dim);
  for (int i = 0; i < batch; ++i) {
    const std::size_t row = rng.index(rows);
    for (int k = 0; k < dim; ++k) b.x0.push_back(data[row * dim + k]);
    for (int k = 0; k < dim; ++k) b.eps.push_back(rng.normal());
    b.t.push_back(rng.uniform());
  }
  return b;
}

TrainResult train(FieldModel& model, std::span<const double> data, const TrainConfig& config) {
  if (config.steps < 0 || config.batch < 1) throw Error(Errc::InvalidArgument, "steps >= 0 and batch >= 1 required");
  TrainResult result;
  std::vector<double> grad, velocity(model.params().size(), 0.0);
  double ema = 0.0;
  for (int step = 0; step < config.steps; ++step) {
    const ToyBatch batch = draw_batch(data, model.dim(), config.batch, derive_seed(config.seed, step));
    const double loss = cfm_loss_grad(model, batch, grad);
    ema = step == 0 ? loss : (1.0 - config.smoothing) * ema + config.smoothing * loss;
    result.trace.push_back({step, loss, ema});
    if (!std::isfinite(loss)) {
      throw DivergenceError(fmt::format("loss became {} at step {}", loss, step), std::move(result.trace));
    }
    auto& p = model.params();
    for (std::size_t i = 0; i < p.size(); ++i) {
      velocity[i] = config.momentum * velocity[i] - config.lr * grad[i];
      p[i] += velocity[i];
    }
  }
  return result;
}

std::vector<double> euler_sample(const FieldModel& model, std::span<const double> eps, int steps) {
  if (steps < 1) throw Error(Errc::InvalidArgument, "euler_sample needs steps >= 1");
  if (eps.size() != static_cast<std::size_t>(model.dim())) throw Error(Errc::ShapeMismatch, "eps dim mismatch");
  std::vector<double> x(eps.begin(), eps.end()), f(eps.size());
  const double dt = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    const double t = 1.0 - k * dt;
    model.evaluate(x, t, f);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= dt * f[i];
  }
  return x;
}

std::string trace_to_csv(const std::vector<TrainStep>& trace) {
  std::ostringstream out;
  out << "step,loss,smoothed\n";
  for (const auto& s : trace) out << fmt::format("{},{:.17g},{:.17g}\n", s.step, s.loss, s.smoothed);
  return out.str();
}

void save_checkpoint(const FieldModel& model, const std::filesystem::path& file) {
  std::uint32_t kind = 0, hidden = 0;
  if (const auto* mlp = dynamic_cast<const MlpField*>(&model)) {
    kind = 1;
    hidden = static_cast<std::uint32_t>(mlp->hidden());
  } else if (!dynamic_cast<const LinearField*>(&model)) {
    throw Error(Errc::InvalidArgument, "only linear and mlp models can be checkpointed");
  }
  std::string out(kCkptMagic, sizeof(kCkptMagic));
  auto put_u32 = [&](std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); };
  put_u32(kind);
  put_u32(static_cast<std::uint32_t>(model.dim()));
  put_u32(hidden);
  put_u32(static_cast<std::uint32_t>(model.params().size()));
  for (double v : model.params()) {
    const float f = static_cast<float>(v);
    out.append(reinterpret_cast<const char*>(&f), 4);
  }
  write_text_file(file, out);
}

std::unique_ptr<FieldModel> load_checkpoint(const std::filesystem::path& file) {
  const std::string bytes = read_text_file(file);
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kCkptMagic, 8) != 0) {
    throw Error(Errc::SchemaViolation, file.string() + ": not a checkpoint");
  }
  auto u32 = [&](std::size_t off) {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + off, 4);
    return v;
  };
  const std::uint32_t kind = u32(8), dim = u32(12), hidden = u32(16), count = u32(20);
  std::unique_ptr<FieldModel> model;
  if (kind == 0) model = std::make_unique<LinearField>(static_cast<int>(dim));
  else if (kind == 1) model = std::make_unique<MlpField>(static_cast<int>(dim), static_cast<int>(hidden));
  else throw Error(Errc::SchemaViolation, fmt::format("unknown model kind {}", kind));
  if (count != model->params().size() || bytes.size() != 24 + 4ull * count) {
    throw Error(Errc::WrongArity, fmt::format("checkpoint holds {} params, model needs {}", count,
                                              model->params().size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 24 + 4ull * i, 4);
    model->params()[i] = f;
  }
  return model;
}

}  // namespace physkit
