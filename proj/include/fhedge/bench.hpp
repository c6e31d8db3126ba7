// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale reproduction of the evaluation matrix: three model variants x
// three security levels x two input modes, measuring time to compute, a
// deterministic working-set byte count, and remaining noise budget. Every
// reported cell is correctness-gated against the integer oracle.

#pragma once

#include "fhedge/agents.hpp"

namespace fhedge::bench {

using ring::u64;

enum class Variant { last_layer, full_no_act, full_square2x };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& tag);

struct BenchConfig {
    std::string dataset_csv;
    double feature_scale = 16.0;
    std::size_t hidden = 8;
    std::vector<int> levels = {128, 192, 256};
    std::vector<Variant> variants = {Variant::last_layer, Variant::full_no_act,
                                     Variant::full_square2x};
    int runs = 5;            // the experiment is applied `runs` times per cell
    std::size_t batch = 64;  // samples per inference
    int epochs = 25;
    double learning_rate = 0.1;
    u64 seed = 1;
    bool parallel = false;  // cells in threads; trades timing fidelity for wall-clock
    int depth_margin = 0;
    // fixed-point scale per variant: deeper pipelines need smaller scales to
    // keep the integer magnitudes within a usable plaintext modulus
    u64 delta_last = 1024, delta_no_act = 64, delta_square = 4;
};

u64 config_hash(const BenchConfig& cfg);

struct BenchCell {
    Variant variant = Variant::last_layer;
    int level = 128;
    std::string mode;   // "plain" | "encrypted" | "-" for the encryption stage
    std::string stage;  // model_encryption | inference | decryption
    double time_s_mean = 0;
    double bytes_mean = 0;
    double budget_bits_mean = 0;
    int runs = 0;
    bool correct = false;
};

struct BenchReport {
    std::vector<BenchCell> cells;
    std::string environment;
    u64 config_fingerprint = 0;

    // schema: variant,level,mode,stage,time_s_mean,bytes_mean,budget_bits_mean,runs,correct
    std::string to_csv() const;
    const BenchCell* find(Variant v, int level, const std::string& mode,
                          const std::string& stage) const;
};

// Trains the three variant models and executes the full matrix. Any
// correctness failure marks the cell instead of aborting the report.
BenchReport run_matrix(const BenchConfig& cfg);

struct ModelEncryptionReport {
    double seconds = 0;
    std::size_t plaintext_bytes = 0;
    std::size_t ciphertext_bytes = 0;
    double ratio = 0;  // the paper reports 8.22 as its best case; context only
    bfv::EncryptionParams params;
};

// Encryption-stage metrics for one trained model at one level.
ModelEncryptionReport encryption_report(const nn::ModelSpec& model,
                                        protect::EncryptionScope scope, int level,
                                        u64 delta, u64 seed, int depth_margin = 0);

struct AccuracyReport {
    std::vector<double> relu, square2x, none;  // validation accuracy per epoch

    // schema: epoch,relu,square2x,none
    std::string to_csv() const;
};

// Trains one model per activation kind on the dataset and reports the
// per-epoch validation accuracy series.
AccuracyReport accuracy_report(const nn::Dataset& data, std::size_t hidden, int epochs,
                               double learning_rate, u64 seed);

// Picks parameters for a variant pipeline: quantizes provisionally, sizes
// the plaintext modulus from the worst-case bound, and asks the preset
// ladder for the measured depth. Exposed for the CLI and the tests.
struct PipelineSetup {
    bfv::EncryptionParams params;
    nn::QuantizedModel qmodel;
    protect::EncryptionScope scope;
};
PipelineSetup plan_pipeline(const nn::ModelSpec& model, protect::EncryptionScope scope,
                            int level, u64 delta, int depth_margin = 0);

}  // namespace fhedge::bench
