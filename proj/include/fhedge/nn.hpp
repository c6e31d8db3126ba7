// SPDX-License-Identifier: Apache-2.0
//
// Plaintext dense networks: definition, forward pass, small-scale SGD
// training, fixed-point quantization with explicit scale bookkeeping, and
// the exact mod-t integer oracle the encrypted engine is tested against.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "fhedge/encode.hpp"

namespace fhedge::nn {

using encode::FixedPointCodec;
using encode::ScaleState;
using ring::i64;
using ring::u64;

enum class ActivationKind { relu, square_plus_two, none };

std::string to_string(ActivationKind k);
ActivationKind activation_from_string(const std::string& tag);

// x^2 + 2x, the FHE-friendly stand-in for ReLU. Minimum -1 at x = -1.
double square_plus_two(double x);
double apply_activation(ActivationKind k, double x);

struct DenseLayer {
    std::size_t in_dim = 0, out_dim = 0;
    std::vector<double> weights;  // row-major, out_dim x in_dim
    std::vector<double> bias;     // out_dim
    ActivationKind activation = ActivationKind::none;

    double w(std::size_t row, std::size_t col) const { return weights[row * in_dim + col]; }
};

struct ModelSpec {
    std::vector<DenseLayer> layers;
    std::size_t input_dim = 0, class_count = 0;
    std::string name;
    std::string training_config_hash;
    u64 delta_hint = 1024;  // suggested fixed-point scale

    std::size_t parameter_count() const;
};

// Throws on broken dimension chains or a softmax-era final activation.
void validate_model(const ModelSpec& m);

std::vector<double> forward(const ModelSpec& m, std::span<const double> x);
std::size_t argmax(std::span<const double> v);

struct Dataset {
    std::size_t feature_dim = 0;
    std::vector<double> features;  // row-major, samples x feature_dim
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * feature_dim, feature_dim};
    }
};

// Headerless CSV, label in the last column. feature_scale divides every
// feature on load (the bundled digits store raw 0..16 pixel counts).
Dataset load_csv(const std::string& path, double feature_scale = 1.0);

// Deterministic split by seeded shuffle; second part has `fraction` of rows.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double fraction, u64 seed);

struct Architecture {
    std::vector<std::size_t> dims;  // e.g. {64, 32, 10}
    ActivationKind hidden_activation = ActivationKind::relu;
};

struct TrainConfig {
    int epochs = 60;
    double learning_rate = 0.1;
    int batch_size = 32;
    double validation_fraction = 0.15;
    u64 seed = 1;
};

class TrainingError : public std::runtime_error {
  public:
    TrainingError(const std::string& msg, int epoch)
        : std::runtime_error(msg), epoch(epoch) {}
    int epoch;
};

struct TrainResult {
    ModelSpec model;
    std::vector<double> val_accuracy;  // per epoch
    std::vector<double> train_loss;    // per epoch, softmax cross-entropy
};

// Softmax cross-entropy on the logits during training only; the stored
// model never carries a softmax layer.
TrainResult train_sgd(const Dataset& data, const Architecture& arch,
                      const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Quantization and the integer oracle

// Per-layer scale powers: weights sit at power 1, the bias at the layer's
// z-power (input power + 1) so the addition is scale-legal, and the output
// power doubles across a square_plus_two activation.
struct ScalePlanEntry {
    int input_power = 1;
    int weight_power = 1;
    int bias_power = 2;
    int output_power = 2;
};
using ScalePlan = std::vector<ScalePlanEntry>;

ScalePlan make_scale_plan(const ModelSpec& m, int input_power = 1);

struct QuantizedLayer {
    std::size_t in_dim = 0, out_dim = 0;
    std::vector<i64> weights;  // power 1
    std::vector<i64> bias;     // at the layer's z-power
    ActivationKind activation = ActivationKind::none;
    ScalePlanEntry plan;

    i64 w(std::size_t row, std::size_t col) const { return weights[row * in_dim + col]; }
};

struct QuantizedModel {
    std::vector<QuantizedLayer> layers;
    FixedPointCodec codec;
    std::size_t input_dim = 0, class_count = 0;
    int input_power = 1;
    std::string name;

    int output_power() const { return layers.back().plan.output_power; }
    std::size_t parameter_count() const;
};

QuantizedModel quantize(const ModelSpec& m, const FixedPointCodec& codec,
                        int input_power = 1);

// Worst-case integer magnitude anywhere in the pipeline for inputs bounded
// by input_max, as a bit count. Used to size the plaintext modulus before
// anything can overflow.
int required_plain_bits(const QuantizedModel& qm, double input_max);

// Executes the exact integer arithmetic (mod t) the encrypted engine
// performs: same rounding, same scale composition, no encryption.
std::vector<u64> oracle_forward_int(const QuantizedModel& qm,
                                    std::span<const u64> x_slots, u64 t);

// Convenience: quantize a real input at the model's input power.
std::vector<u64> quantize_input(const QuantizedModel& qm, std::span<const double> x,
                                u64 t);

// Decode integer logits back to reals at the model's output power.
std::vector<double> decode_logits(const QuantizedModel& qm, std::span<const u64> logits,
                                  u64 t);

// ---------------------------------------------------------------------------
// Model files (JSON; row-major weights, activation tags, delta)

void save_model(const ModelSpec& m, const std::string& path);
ModelSpec load_model(const std::string& path);

}  // namespace fhedge::nn
