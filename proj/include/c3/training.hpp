#pragma once

#include "c3/kernel_regression.hpp"
#include "c3/mlp.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace c3 {

/// One logged interaction (context, arm, reward) with its time-interval label.
struct LoggedSample {
    Eigen::VectorXd context;
    Eigen::VectorXd arm;
    int reward = 0;
    int interval = 0;

    /// Network input: context followed by arm features.
    Eigen::VectorXd input() const;
};

Eigen::VectorXd concat_input(const Eigen::VectorXd& context, const Eigen::VectorXd& arm);

struct TrainingConfig {
    int epochs = 4;
    int batch_size = 16;
    double learning_rate = 1e-3;
    double lr_decay = 0.99;  // multiplicative, per epoch
    double lambda_ece = 0.0;
    int ece_bins = 5;
    double ref_fraction = 0.2;
    double sample_fraction = 1.0;
    int time_intervals = 1;  // 1 disables interval masking
    double sigma = 1.0;
    std::optional<double> truncation_radius;
    std::uint64_t seed = 0;
    /// Backpropagate through the importance weights too. Off: weights are
    /// recomputed from fresh embeddings each batch and held constant.
    bool differentiate_weights = false;
    /// Held-out fraction for best-by-validation model selection; 0 keeps
    /// the final-epoch model.
    double validation_fraction = 0.0;

    void validate() const;
    KernelConfigd kernel() const;
};

inline constexpr double kPredictionClamp = 1e-7;

/// Binary cross entropy with p_hat clamped to [1e-7, 1 - 1e-7].
double bce_loss(double p_hat, int reward);

/// Expected calibration error over `bins` equal-width bins of [0, 1].
double ece_loss(std::span<const double> p_hats, std::span<const int> rewards, int bins);

/// IWKR predictions for `queries` against `refs`, both embedded with
/// `params`. Importance weights come from all refs; each query only sees
/// refs in its own time interval. Queries with no same-interval support get
/// the mean reward of the refs.
Eigen::VectorXd iwkr_forward_batch(const MlpParamsd& params, std::span<const LoggedSample> queries,
                                   std::span<const LoggedSample> refs, const TrainingConfig& config);

/// mean BCE + lambda * ECE of the batch predictions.
double batch_loss(const MlpParamsd& params, std::span<const LoggedSample> queries,
                  std::span<const LoggedSample> refs, const TrainingConfig& config);

struct LossAndGrad {
    double loss = 0.0;
    MlpParamsd grad;
};

/// Loss and its gradient, by reverse mode through IWKR (query and reference
/// embeddings) and the network. Throws TrainingDiverged on a non-finite loss.
LossAndGrad loss_and_grad(const MlpParamsd& params, std::span<const LoggedSample> queries,
                          std::span<const LoggedSample> refs, const TrainingConfig& config);

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, std::vector<double> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    const std::vector<double>& trace() const { return trace_; }

private:
    std::vector<double> trace_;
};

struct TrainResult {
    MlpParamsd params;
    std::vector<double> epoch_losses;       // mean batch loss per epoch
    std::vector<double> validation_losses;  // empty without a validation split
    int selected_epoch = -1;                // -1: initial params returned
};

/// Adam on mini-batches of self-supervised IWKR predictions. Each epoch
/// subsamples the data, splits it into references and queries, and decays
/// the learning rate.
TrainResult train(std::span<const LoggedSample> dataset, const TrainingConfig& config, MlpParamsd init);

}  // namespace c3
