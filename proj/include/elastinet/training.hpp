#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "elastinet/dataset.hpp"
#include "elastinet/loss.hpp"
#include "elastinet/material.hpp"
#include "elastinet/network.hpp"

namespace elastinet {

enum class TrainMode { Solve, Identify };

TrainMode train_mode_from_string(const std::string& s);
const char* train_mode_name(TrainMode m);

struct TrainingConfig {
    int batch_size = 64;
    int max_epochs = 10000;
    int patience = 500;  // epochs without a new best full-dataset loss
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;  // drives shuffling (and scratch init in retrain)
    TrainMode mode = TrainMode::Solve;
    // loss-variant knobs, forwarded to the loss program
    double flow_coefficient = 1.5;
    bool clipped_consistency = false;

    void validate() const;
};

struct AdamState {
    std::vector<double> m, v;
    long long t = 0;  // completed steps
};

// One in-place Adam update with bias correction. Raises on a non-finite
// gradient entry, naming the parameter when `names` covers it.
void adam_step(std::vector<double>& theta, const std::vector<double>& grad, AdamState& state,
               const TrainingConfig& cfg, const std::vector<std::string>& names = {});

struct EpochRecord {
    int epoch = 0;              // 1-based
    double total_loss = 0.0;    // full-dataset loss after this epoch's updates
    std::vector<double> terms;  // per-term breakdown; filled on logging epochs only
    double lambda = 0.0, mu = 0.0;  // physical units, current values
    std::optional<double> sigma_y;
    double seconds = 0.0;  // wall clock spent on this epoch
};

struct TrainingHistory {
    std::vector<std::string> term_names;
    std::vector<EpochRecord> epochs;
    double initial_loss = 0.0;  // full-dataset loss before any update
    int best_epoch = 0;         // 0 means the initial state was never beaten
    double best_loss = 0.0;
    // retrain only: initial loss from the checkpoint over initial loss of a
    // freshly initialized model on the same data
    std::optional<double> initial_loss_ratio;
    // non-empty when training stopped on a numerical failure
    std::string abort_reason;
    int abort_epoch = 0, abort_batch = 0;
};

struct Checkpoint {
    int version = 1;
    FieldModel model;            // architecture and weights (best state)
    MaterialParams material;     // physical units, trainable flags as trained
    NormalizationRecord normalization;  // the units the weights were trained in
    std::optional<AdamState> adam;
    std::uint64_t seed = 0;
};

struct TrainResult {
    TrainingHistory history;
    Checkpoint best;
};

// Mini-batch Adam over the composite loss. The problem kind comes from the
// dataset, the unit system from its normalization record (callers normalize
// first; raw data trains in raw units). In Identify mode lambda and mu (and
// sigma_y on plastic problems) are trained alongside the weights; in Solve
// mode the material stays fixed. Early stop: `patience` consecutive epochs
// without a strict new best full-dataset loss. A non-finite loss or gradient
// aborts the run with the offending epoch/batch recorded in the history.
TrainResult train(FieldModel model, MaterialParams material, const Dataset& data,
                  const TrainingConfig& cfg);

// Same loop, initialized from a checkpoint. Raw datasets are first brought
// into the checkpoint's unit system; datasets normalized differently are
// rejected. When `expected` is given, its architecture must match the
// checkpoint's. The history records the checkpoint-vs-scratch initial-loss
// ratio; stored Adam moments are resumed when their length still matches.
TrainResult retrain(const Checkpoint& ckpt, const Dataset& data, const TrainingConfig& cfg,
                    const std::optional<NetworkArch>& expected = std::nullopt);

// Concatenates per-mu elastic datasets (raw) into one surrogate set with mu as
// a third network input, normalizes it, and trains with the material fixed.
TrainResult train_surrogate(const std::vector<Dataset>& parts, const NetworkArch& arch,
                            MaterialParams material, const TrainingConfig& cfg);

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// CSV: epoch, total_loss, term_* (blank off logging epochs), lambda, mu,
// sigma_y, seconds; an abort, if any, is noted in a trailing comment line.
std::string history_csv(const TrainingHistory& h);
void save_history(const TrainingHistory& h, const std::string& path);

}  // namespace elastinet
