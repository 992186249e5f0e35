#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "physkit/error.hpp"

namespace physkit {

/// Velocity field f(x, t) with input [x; t] (D + 1) and output D.
class FieldModel {
 public:
  virtual ~FieldModel() = default;

  virtual std::string kind() const = 0;
  virtual int dim() const = 0;
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  virtual void evaluate(std::span<const double> x, double t, std::span<double> out) const = 0;
  /// Adds d<grad_out, f(x, t)>/d(params) into `grad`.
  virtual void backward(std::span<const double> x, double t, std::span<const double> grad_out,
                        std::span<double> grad) const = 0;
  virtual std::unique_ptr<FieldModel> clone() const = 0;

 protected:
  std::vector<double> params_;
};

/// f = W [x; t] + b. Parameters: W row-major D x (D+1), then b.
class LinearField : public FieldModel {
 public:
  explicit LinearField(int dim);
  std::string kind() const override { return "linear"; }
  int dim() const override { return dim_; }
  void evaluate(std::span<const double> x, double t, std::span<double> out) const override;
  void backward(std::span<const double> x, double t, std::span<const double> grad_out,
                std::span<double> grad) const override;
  std::unique_ptr<FieldModel> clone() const override { return std::make_unique<LinearField>(*this); }

 private:
  int dim_;
};

/// f = W2 tanh(W1 [x; t] + b1) + b2. Parameters: W1 (H x (D+1)), b1, W2 (D x H), b2.
class MlpField : public FieldModel {
 public:
  MlpField(int dim, int hidden);
  std::string kind() const override { return "mlp"; }
  int dim() const override { return dim_; }
  int hidden() const { return hidden_; }
  void evaluate(std::span<const double> x, double t, std::span<double> out) const override;
  void backward(std::span<const double> x, double t, std::span<const double> grad_out,
                std::span<double> grad) const override;
  std::unique_ptr<FieldModel> clone() const override { return std::make_unique<MlpField>(*this); }

 private:
  int dim_;
  int hidden_;
};

/// Returns the same value for every input. Has no trainable parameters.
class ConstantField : public FieldModel {
 public:
  explicit ConstantField(std::vector<double> value);
  std::string kind() const override { return "constant"; }
  int dim() const override { return static_cast<int>(value_.size()); }
  void evaluate(std::span<const double> x, double t, std::span<double> out) const override;
  void backward(std::span<const double>, double, std::span<const double>, std::span<double>) const override {}
  std::unique_ptr<FieldModel> clone() const override { return std::make_unique<ConstantField>(*this); }

 private:
  std::vector<double> value_;
};

/// Fills params with N(0, scale^2 / fan_in) weights and zero biases.
void init_params(FieldModel& model, std::uint64_t seed, double scale = 1.0);

/// Row-major B x D blocks.
struct ToyBatch {
  int size = 0;
  int dim = 0;
  std::vector<double> x0;
  std::vector<double> eps;
  std::vector<double> t;
};

/// x_t = (1 - t) x0 + t eps. ShapeMismatch when lengths differ.
std::vector<double> interpolant(std::span<const double> x0, std::span<const double> eps, double t);

/// Mean over the batch of ||f(x_t, t) - (eps - x0)||^2.
double cfm_loss(const FieldModel& model, const ToyBatch& batch);
/// Loss and its parameter gradient.
double cfm_loss_grad(const FieldModel& model, const ToyBatch& batch, std::vector<double>& grad);
/// Per-block losses over consecutive coordinate blocks of the given widths
/// (e.g. {8, 8} for structural + physical latents). Widths must sum to D.
std::vector<double> cfm_block_losses(const FieldModel& model, const ToyBatch& batch, std::span<const int> widths);

/// Max over parameters of |analytic - central difference| / max(|a|, |n|, 1e-6).
double gradient_check(const FieldModel& model, const ToyBatch& batch, double h = 1e-5);

struct MixtureSpec {
  int dim = 2;
  /// Mode centers; x0 = center + sigma * N(0, I).
  std::vector<std::vector<double>> centers = {{5.0, 1.5}, {5.0, -1.5}};
  double sigma = 0.05;
};

/// n draws, row-major n x dim, modes chosen uniformly.
std::vector<double> sample_mixture(const MixtureSpec& spec, int n, std::uint64_t seed);

/// Draws a batch: x0 rows picked uniformly from `data`, eps ~ N(0, I), t ~ U[0, 1].
ToyBatch draw_batch(std::span<const double> data, int dim, int batch, std::uint64_t seed);

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  int steps = 2000;
  int batch = 256;
  std::uint64_t seed = 0;
  /// EMA weight for the smoothed trace.
  double smoothing = 0.02;
};

struct TrainStep {
  int step = 0;
  double loss = 0.0;
  double smoothed = 0.0;
};

struct TrainResult {
  std::vector<TrainStep> trace;
  double initial_loss() const { return trace.empty() ? 0.0 : trace.front().loss; }
  double final_smoothed() const { return trace.empty() ? 0.0 : trace.back().smoothed; }
};

/// Thrown with code Divergence; carries every step up to and including the failure.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, std::vector<TrainStep> trace)
      : Error(Errc::Divergence, message), trace_(std::move(trace)) {}
  const std::vector<TrainStep>& trace() const { return trace_; }

 private:
  std::vector<TrainStep> trace_;
};

/// Gradient descent with momentum on cfm_loss, in place. Throws
/// DivergenceError on a non-finite loss.
TrainResult train(FieldModel& model, std::span<const double> data, const TrainConfig& config);

/// Integrates dx/dt = -f(x, t) from t = 1 (x = eps) to t = 0 with `steps`
/// fixed Euler steps.
std::vector<double> euler_sample(const FieldModel& model, std::span<const double> eps, int steps);

std::string trace_to_csv(const std::vector<TrainStep>& trace);

/// Checkpoint layout (little-endian): "PKCFM001", u32 kind (0 linear, 1 mlp),
/// u32 dim, u32 hidden (0 for linear), u32 count, count x f32 params.
void save_checkpoint(const FieldModel& model, const std::filesystem::path& file);
std::unique_ptr<FieldModel> load_checkpoint(const std::filesystem::path& file);

}  // namespace physkit
