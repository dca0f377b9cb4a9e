#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "timetk/autodiff.hpp"
#include "timetk/data.hpp"
#include "timetk/model.hpp"

namespace timetk::train {

// Mean of squared differences over every element.
Var mse_loss(const Var& pred, const Var& target);

struct AdamConfig {
  double lr = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables global-norm clipping
  double lr_decay = 1.0;       // per-epoch multiplier; 1 disables
};

class Adam {
 public:
  Adam(ParameterList params, AdamConfig config = {});

  // Bias-corrected update of every trainable parameter, then zeroes grads.
  // Throws NumericError if any gradient is non-finite.
  void step();
  void decay_lr() { lr_ *= config_.lr_decay; }

  double lr() const { return lr_; }
  std::uint64_t steps() const { return t_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  ParameterList params_;
  AdamConfig config_;
  double lr_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

struct TrainSchedule {
  std::size_t max_epochs = 30;
  std::size_t patience = 3;
  std::size_t batch_size = 32;
  std::uint64_t seed = 2024;
  bool shuffle = true;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
  double wall_time_sec = 0.0;

  // Deterministic fields only; wall time is reported separately.
  nlohmann::json to_json() const;
};

struct TrainHooks {
  // Replaces the measured validation loss of an epoch (test fixtures).
  std::function<double(std::size_t epoch, double measured)> validation_override;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Mean squared error of the model over a window set, eval mode.
double evaluate_loss(const TimeTkModel& model, const data::WindowSet& set, std::size_t batch_size = 64);

// Epoch loop with early stopping on validation loss; the parameters of the
// best validation epoch are restored before returning.
TrainReport fit(TimeTkModel& model, const data::WindowSet& train_set, const data::WindowSet& val_set,
                const TrainSchedule& schedule, const AdamConfig& adam, const TrainHooks& hooks = {});

struct CheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
  double tolerance = 0.0;
  bool passed = false;
};

// Relative error of analytic vs numeric derivative:
//   |a - n| / max(|a|, |n|, kGradCheckFloor)
// Central differences at step 1e-5 carry ~1e-11 absolute rounding noise, so
// the floor keeps near-zero derivatives from reporting noise as error; it
// still flags any absolute discrepancy above tolerance * floor.
inline constexpr double kGradCheckFloor = 1e-5;

// Central finite differences over every trainable coordinate of `params`
// against the analytic gradient of `loss_fn`.
CheckReport grad_check(const ParameterList& params, const std::function<Var()>& loss_fn, double tolerance = 1e-4,
                       double step = 1e-5);

// Loss is MSE of the eval-mode forward pass against `target`.
CheckReport grad_check(const TimeTkModel& model, const Tensor& input, const Tensor& target, double tolerance = 1e-4,
                       double step = 1e-5);

}  // namespace timetk::train
