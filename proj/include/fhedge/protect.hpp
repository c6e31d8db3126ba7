// SPDX-License-Identifier: Apache-2.0
//
// Trained-model protection: encrypt quantized layer parameters (one
// ciphertext per scalar, value replicated across all slots), persist
// protected models with their key pairs in an on-disk vault, and build
// deployment packages that carry public material only.

#pragma once

#include <optional>
#include <string>

#include "fhedge/bfv.hpp"
#include "fhedge/nn.hpp"

namespace fhedge::protect {

using ring::i64;
using ring::u64;

enum class EncryptionScope { last_layer_only, full_classifier };

std::string to_string(EncryptionScope s);
EncryptionScope scope_from_string(const std::string& tag);

struct ProtectedLayer {
    std::size_t in_dim = 0, out_dim = 0;
    nn::ActivationKind activation = nn::ActivationKind::none;
    nn::ScalePlanEntry plan;
    bool encrypted = false;
    // in-scope parameters: ciphertexts, row-major out_dim x in_dim
    std::vector<bfv::Ciphertext> enc_weights;
    std::vector<bfv::Ciphertext> enc_bias;
    // out-of-scope parameters stay quantized integers
    std::vector<i64> clear_weights;
    std::vector<i64> clear_bias;
};

struct ProtectedModel {
    std::string model_id;
    std::vector<ProtectedLayer> layers;
    EncryptionScope scope = EncryptionScope::last_layer_only;
    encode::FixedPointCodec codec;
    int input_power = 1;
    std::size_t input_dim = 0, class_count = 0;
    u64 params_fp = 0;
};

struct EncryptionReport {
    double seconds = 0;
    std::size_t encrypted_params = 0;
    std::size_t plaintext_bytes = 0;   // quantized integers, 8 bytes each
    std::size_t ciphertext_bytes = 0;  // serialized ciphertext payload
    double expansion_ratio = 0;        // ciphertext / plaintext
};

// Encrypts every in-scope scalar under the keyset. Throws RangeError if the
// pipeline's worst-case integer bound does not fit the plaintext modulus.
std::pair<ProtectedModel, EncryptionReport> protect_model(
    const nn::QuantizedModel& qm, EncryptionScope scope, const bfv::KeySet& keys,
    ring::Rng& rng, double input_max = 1.0);

// ---------------------------------------------------------------------------
// Key vault: directory of serialized records plus an index file. The secret
// key never leaves this store; packages embed public material only.

struct KeyVaultRecord {
    std::string model_id;
    bfv::KeySet keys;
    std::string created_at;
    std::string note;
};

class VaultError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class KeyVault {
  public:
    explicit KeyVault(std::string directory);

    void store(const KeyVaultRecord& record);
    KeyVaultRecord fetch(const std::string& model_id) const;
    bool contains(const std::string& model_id) const;
    std::vector<std::string> list() const;

    const std::string& directory() const { return dir_; }

  private:
    std::string dir_;
};

// ---------------------------------------------------------------------------
// Deployment package: binary container with magic bytes, tagged sections
// (params, public key, relin keys, codec config, per-layer ciphertext
// blobs), and a CRC-32 trailer.

struct DeploymentPackage {
    std::string model_id;
    bfv::EncryptionParams params;
    bfv::PublicKey public_key;
    bfv::RelinKeys relin;
    ProtectedModel model;
};

// Assembles a package from public key material. Hard-fails if any secret
// material or cleartext in-scope parameter would end up inside.
DeploymentPackage build_package(const ProtectedModel& model, const bfv::PublicKey& pk,
                                const bfv::RelinKeys& rk,
                                const bfv::EncryptionParams& params);

std::vector<std::uint8_t> save_package(const DeploymentPackage& pkg);
DeploymentPackage load_package(const std::uint8_t* data, std::size_t len);

void save_package_file(const DeploymentPackage& pkg, const std::string& path);
DeploymentPackage load_package_file(const std::string& path);

// Byte-scan helper shared with the test suites: true if `needle` occurs in
// `haystack`.
bool contains_bytes(std::span<const std::uint8_t> haystack,
                    std::span<const std::uint8_t> needle);

}  // namespace fhedge::protect
