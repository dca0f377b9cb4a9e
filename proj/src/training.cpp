#include "timetk/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "timetk/checkpoint.hpp"
#include "timetk/error.hpp"
#include "timetk/ops.hpp"

namespace timetk::train {

Var mse_loss(const Var& pred, const Var& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse_loss shape mismatch: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  return ops::mean(ops::square(pred - target));
}

Adam::Adam(ParameterList params, AdamConfig config) : params_(std::move(params)), config_(config), lr_(config.lr) {
  for (const auto& p : params_) {
    m_.emplace_back(p.var.shape(), 0.0);
    v_.emplace_back(p.var.shape(), 0.0);
  }
}

void Adam::step() {
  for (const auto& p : params_)
    if (p.trainable && !p.var.grad().all_finite()) throw NumericError("non-finite gradient in " + p.name);

  double clip = 1.0;
  if (config_.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const auto& p : params_)
      if (p.trainable)
        for (double g : p.var.grad().data()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > config_.max_grad_norm) clip = config_.max_grad_norm / norm;
  }

  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var var = params_[i].var;
    if (params_[i].trainable) {
      auto& value = var.mutable_value();
      const auto& grad = var.grad();
      for (std::size_t j = 0; j < value.numel(); ++j) {
        const double g = grad[j] * clip;
        m_[i][j] = config_.beta1 * m_[i][j] + (1.0 - config_.beta1) * g;
        v_[i][j] = config_.beta2 * v_[i][j] + (1.0 - config_.beta2) * g * g;
        const double m_hat = m_[i][j] / bc1;
        const double v_hat = v_[i][j] / bc2;
        value[j] -= lr_ * m_hat / (std::sqrt(v_hat) + config_.eps);
      }
    }
    var.zero_grad();
  }
}

void TrainSchedule::validate() const {
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (patience == 0 || patience > max_epochs) throw ConfigError("patience must be in [1, max_epochs]");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json j;
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : epochs)
    j["epochs"].push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  j["stopped_epoch"] = stopped_epoch;
  j["best_epoch"] = best_epoch;
  j["best_val_loss"] = best_val_loss;
  j["early_stopped"] = early_stopped;
  return j;
}

double evaluate_loss(const TimeTkModel& model, const data::WindowSet& set, std::size_t batch_size) {
  if (set.size() == 0) throw DataError("cannot evaluate on an empty split");
  NoGradGuard guard;
  double total = 0.0;
  std::size_t elements = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    idx.clear();
    for (std::size_t w = start; w < std::min(set.size(), start + batch_size); ++w) idx.push_back(w);
    auto [x, y] = data::gather(set, idx);
    const Tensor pred = model.forward(constant(x)).value();
    for (std::size_t i = 0; i < pred.numel(); ++i) total += (pred[i] - y[i]) * (pred[i] - y[i]);
    elements += pred.numel();
  }
  return total / static_cast<double>(elements);
}

TrainReport fit(TimeTkModel& model, const data::WindowSet& train_set, const data::WindowSet& val_set,
                const TrainSchedule& schedule, const AdamConfig& adam_config, const TrainHooks& hooks) {
  schedule.validate();
  if (train_set.size() == 0 || val_set.size() == 0) throw DataError("training needs non-empty train and val splits");
  const auto t0 = std::chrono::steady_clock::now();

  const ParameterList params = model.parameters();
  Adam adam(params, adam_config);
  std::mt19937_64 shuffle_rng(schedule.seed);
  std::mt19937_64 dropout_rng(schedule.seed ^ 0x9E3779B97F4A7C15ULL);
  const nn::Mode train_mode{true, &dropout_rng};

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainReport report;
  report.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best = checkpoint::snapshot(params);
  std::size_t bad_epochs = 0;

  for (std::size_t epoch = 1; epoch <= schedule.max_epochs; ++epoch) {
    if (schedule.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < order.size(); start += schedule.batch_size) {
      idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                 order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + schedule.batch_size)));
      auto [x, y] = data::gather(train_set, idx);
      Var loss = mse_loss(model.forward(constant(std::move(x)), train_mode), constant(std::move(y)));
      backward(loss);
      adam.step();
      loss_sum += loss.value().item();
      ++batches;
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), evaluate_loss(model, val_set)};
    if (hooks.validation_override) rec.val_loss = hooks.validation_override(epoch, rec.val_loss);
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss))
      throw NumericError("training diverged at epoch " + std::to_string(epoch));
    report.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    report.stopped_epoch = epoch;

    if (rec.val_loss < report.best_val_loss) {
      report.best_val_loss = rec.val_loss;
      report.best_epoch = epoch;
      best = checkpoint::snapshot(params);
      bad_epochs = 0;
    } else if (++bad_epochs >= schedule.patience) {
      report.early_stopped = true;
      break;
    }
    adam.decay_lr();
  }

  checkpoint::restore(params, best);
  report.wall_time_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

CheckReport grad_check(const ParameterList& params, const std::function<Var()>& loss_fn, double tolerance,
                       double step) {
  CheckReport report;
  report.tolerance = tolerance;
  zero_grads(params);
  backward(loss_fn());
  std::vector<Tensor> analytic;
  for (const auto& p : params) analytic.push_back(p.var.grad());
  zero_grads(params);

  NoGradGuard guard;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    if (!params[pi].trainable) continue;
    Var var = params[pi].var;
    auto& value = var.mutable_value();
    for (std::size_t j = 0; j < value.numel(); ++j) {
      const double saved = value[j];
      value[j] = saved + step;
      const double up = loss_fn().value().item();
      value[j] = saved - step;
      const double down = loss_fn().value().item();
      value[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[pi][j];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (report.coordinates == 0 || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_parameter = params[pi].name;
        report.worst_index = j;
      }
      ++report.coordinates;
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

CheckReport grad_check(const TimeTkModel& model, const Tensor& input, const Tensor& target, double tolerance,
                       double step) {
  const Var x = constant(input);
  const Var y = constant(target);
  return grad_check(model.parameters(), [&] { return mse_loss(model.forward(x), y); }, tolerance, step);
}

}  // namespace timetk::train
