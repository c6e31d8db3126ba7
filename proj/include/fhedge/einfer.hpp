// SPDX-License-Identifier: Apache-2.0
//
// Encrypted forward pass over a protected model, in both confidentiality
// modes. Out-of-scope layers run as plaintext integer ops; in-scope layers
// run on ciphertexts with explicit scale management and per-layer noise
// budget tracing. Sample j of a batch rides in slot j of every ciphertext.

#pragma once

#include <optional>

#include "fhedge/protect.hpp"

namespace fhedge::einfer {

using encode::ScaleState;
using ring::u64;

enum class InputMode { plaintext_input, encrypted_input };

std::string to_string(InputMode m);
InputMode mode_from_string(const std::string& tag);

struct EncryptedActivations {
    std::vector<bfv::Ciphertext> units;  // one ciphertext per neuron
    ScaleState scale;
    int layer_index = 0;
};

struct TraceRow {
    std::string layer;
    std::string op_kind;
    int min_budget_bits = -1;  // -1 when no secret key is available
    double elapsed_ms = 0;
    std::size_t ciphertext_bytes = 0;
};

struct BudgetTrace {
    std::vector<TraceRow> rows;
    bool budget_exhausted = false;
    std::string warning;

    // CSV with header: layer,op_kind,min_budget_bits,elapsed_ms,ciphertext_bytes
    std::string to_csv() const;
};

// The noise probe carries the secret key into a trace; it exists only in
// backend/test contexts. The edge agent never holds one.
struct NoiseProbe {
    const bfv::SecretKey* secret = nullptr;
};

struct InferenceResult {
    std::vector<bfv::Ciphertext> logits;  // one per class, batch in slots
    ScaleState scale;
    std::size_t batch_size = 0;
    BudgetTrace trace;
};

// Batch of real feature vectors -> per-feature ciphertexts at the input
// power (sample j in slot j; unused slots zero).
EncryptedActivations encrypt_input(const std::vector<std::vector<double>>& batch,
                                   const encode::FixedPointCodec& codec, int input_power,
                                   const bfv::PublicKey& pk, const bfv::ContextPtr& ctx,
                                   ring::Rng& rng);

// One dense layer over encrypted parameters. Activations arrive either
// batch-encoded (plaintext path, lower noise) or encrypted. The output power
// is the input power + 1; the bias is injected at the output power.
EncryptedActivations eval_dense(const protect::ProtectedLayer& layer,
                                const std::vector<bfv::Plaintext>& acts_plain,
                                ScaleState scale, const bfv::ContextPtr& ctx);
EncryptedActivations eval_dense(const protect::ProtectedLayer& layer,
                                const EncryptedActivations& acts,
                                const bfv::RelinKeys& rk, const bfv::ContextPtr& ctx);

// a^2 + 2*Delta^k * a per neuron: ciphertext square plus a plaintext-scalar
// multiple. Scale alignment is exact; the output power is 2k.
EncryptedActivations eval_square_plus_two(const EncryptedActivations& acts,
                                          const bfv::RelinKeys& rk,
                                          const encode::FixedPointCodec& codec,
                                          const bfv::ContextPtr& ctx);

// Full pipeline per the package's scope: clear prefix as integer ops, then
// encrypted layers. Asserts final budget > 0 when a probe is present,
// otherwise flags exhaustion and completes for diagnostics.
InferenceResult run_inference(const protect::DeploymentPackage& pkg,
                              const std::vector<std::vector<double>>& batch,
                              InputMode mode, ring::Rng& rng,
                              const NoiseProbe* probe = nullptr);

struct DecryptedOutput {
    std::vector<std::vector<double>> logits;  // batch x classes
    std::vector<std::size_t> predicted;       // argmax per sample
    int final_budget_bits = 0;                // min over logit ciphertexts
};

DecryptedOutput decrypt_output(const InferenceResult& result, const bfv::SecretKey& sk,
                               const encode::FixedPointCodec& codec,
                               const bfv::ContextPtr& ctx);

// The multiply count along the deepest encrypted path; what a preset's
// measured depth capacity must cover.
int required_depth(const protect::ProtectedModel& model, InputMode mode);

}  // namespace fhedge::einfer
