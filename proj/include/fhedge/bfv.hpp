// SPDX-License-Identifier: Apache-2.0
//
// Leveled homomorphic scheme over Z_t with scale-invariant (t/q)
// multiplication: key generation, encryption, ciphertext algebra,
// relinearization, and exact noise-budget measurement.
//
// Coefficient moduli are products of distinct NTT-friendly primes kept in
// RNS form per prime. The multiplication tensor step lifts operands to
// exact wide integers over an extended prime basis, so every result is the
// true rounded value rather than an RNS approximation. Not constant-time;
// this is a research toolkit.

#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "fhedge/ring.hpp"

namespace fhedge::bfv {

using ring::Rng;
using ring::u64;

class ParameterError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct EncryptionParams {
    std::size_t poly_degree = 0;                    // n, power of two
    std::vector<ring::PrimeModulus> coeff_modulus;  // product is q
    u64 plain_modulus = 0;                          // t, prime, t = 1 (mod 2n)
    int security_level = 128;                       // 128|192|256; 0 skips the bound check
    double noise_sigma = 3.2;
    int relin_decomposition_bits = 16;

    bool operator==(const EncryptionParams&) const = default;
};

// Throws ParameterError on any violated invariant (n not a power of two,
// t != 1 mod 2n, q over the standard bound for the security level, ...).
void validate(const EncryptionParams& params);

int coeff_modulus_bits(const EncryptionParams& params);

// Max log2(q) per the homomorphic encryption standard for ternary secrets.
int standard_logq_bound(std::size_t poly_degree, int security_level);

u64 params_fingerprint(const EncryptionParams& params);

std::vector<std::uint8_t> save_params(const EncryptionParams&);
EncryptionParams load_params(const std::uint8_t* data, std::size_t len);

// Immutable per-parameter-set tables: NTT twiddles for every base and
// tensor prime, CRT bases, and the q/t scaling constants. Shared by all
// objects created under the same parameters.
class Context;
using ContextPtr = std::shared_ptr<const Context>;
ContextPtr get_context(const EncryptionParams& params);

struct Plaintext {
    ring::RingPoly poly;  // modulus t, coefficient domain, residues in [0, t)
};

struct SecretKey {
    ring::RnsPoly s;  // ternary key, NTT form per base prime
    u64 params_fp = 0;
};

struct PublicKey {
    ring::RnsPoly p0, p1;  // RLWE sample (-(a*s+e), a), NTT form
    u64 params_fp = 0;
};

struct RelinKeys {
    // keys[i] switches 2^(w*i) * s^2; count = ceil(log2(q) / w).
    std::vector<std::array<ring::RnsPoly, 2>> keys;
    int decomposition_bits = 0;
    u64 params_fp = 0;
};

struct KeySet {
    EncryptionParams params;
    SecretKey secret;
    PublicKey public_key;
    RelinKeys relin;
};

struct Ciphertext {
    std::vector<ring::RnsPoly> polys;  // coefficient domain; size >= 2
    u64 params_fp = 0;

    std::size_t size() const { return polys.size(); }
    std::size_t byte_size() const;
};

KeySet keygen(const EncryptionParams& params, Rng& rng);

// Fingerprint of the public key material; ties a deployment to a keyset
// when two keysets share the same parameter shape.
u64 key_fingerprint(const PublicKey& pk);

Ciphertext encrypt(const Plaintext& pt, const PublicKey& pk, const ContextPtr& ctx,
                   Rng& rng);
Plaintext decrypt(const Ciphertext& ct, const SecretKey& sk, const ContextPtr& ctx);

Ciphertext add(const Ciphertext& a, const Ciphertext& b);
Ciphertext add_plain(const Ciphertext& a, const Plaintext& p, const ContextPtr& ctx);
Ciphertext multiply_plain(const Ciphertext& a, const Plaintext& p, const ContextPtr& ctx);

// Tensor + exact t/q scaling + relinearization back to size 2.
Ciphertext multiply(const Ciphertext& a, const Ciphertext& b, const RelinKeys& rk,
                    const ContextPtr& ctx);
Ciphertext square(const Ciphertext& a, const RelinKeys& rk, const ContextPtr& ctx);

// The unreduced forms, for callers that relinearize later (or never).
Ciphertext multiply_no_relin(const Ciphertext& a, const Ciphertext& b,
                             const ContextPtr& ctx);
Ciphertext square_no_relin(const Ciphertext& a, const ContextPtr& ctx);
Ciphertext relinearize(const Ciphertext& a, const RelinKeys& rk, const ContextPtr& ctx);

// Multiplies every slot/coefficient by a signed scalar (centered mod t).
// Equivalent to multiply_plain by the constant polynomial.
Ciphertext multiply_scalar(const Ciphertext& a, std::int64_t value, const ContextPtr& ctx);

// Remaining invariant-noise budget in bits, computed over exact integers:
// budget = max(0, floor(-log2(2 * ||v||_inf))) where v is the invariant
// noise. Decryption is guaranteed correct whenever the result is > 0.
// Needs the secret key; backend/test use only.
int noise_budget(const Ciphertext& ct, const SecretKey& sk, const ContextPtr& ctx);

// True iff noise_budget(ct) > 0; the test-context decryption validity check.
bool validate_decryption(const Ciphertext& ct, const SecretKey& sk, const ContextPtr& ctx);

// ---------------------------------------------------------------------------
// Fused linear combinations. A dot product of ciphertext rows accumulates
// the exact tensor of every term and applies the t/q scaling and the
// relinearization once, which is both faster and quieter (noise-wise) than
// folding multiply(+add). Decrypts to sum_i a_i * b_i mod t.

class PreparedCipher {
  public:
    PreparedCipher() = default;
    const void* impl() const { return impl_.get(); }

  private:
    friend PreparedCipher prepare_cipher(const Ciphertext&, const ContextPtr&);
    friend class CipherDot;
    std::shared_ptr<const void> impl_;
    u64 params_fp = 0;
    std::size_t size = 0;
};

PreparedCipher prepare_cipher(const Ciphertext& ct, const ContextPtr& ctx);

class CipherDot {
  public:
    explicit CipherDot(ContextPtr ctx);
    ~CipherDot();
    CipherDot(CipherDot&&) noexcept;
    CipherDot& operator=(CipherDot&&) noexcept;

    void accumulate(const PreparedCipher& a, const PreparedCipher& b);
    // Scale, then relinearize to size 2. Throws if nothing was accumulated.
    Ciphertext finish(const RelinKeys& rk);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Plaintext-side analogue: sum_i ct_i * pt_i with no rescaling and strictly
// smaller noise growth than the ciphertext form.
class PreparedPlain {
  public:
    PreparedPlain() = default;
    const void* impl() const { return impl_.get(); }

  private:
    friend PreparedPlain prepare_plain(const Plaintext&, const ContextPtr&);
    friend class PlainDot;
    friend Ciphertext multiply_prepared_plain(const Ciphertext&, const PreparedPlain&,
                                              const ContextPtr&);
    std::shared_ptr<const void> impl_;
    u64 params_fp = 0;
};

PreparedPlain prepare_plain(const Plaintext& p, const ContextPtr& ctx);
Ciphertext multiply_prepared_plain(const Ciphertext& a, const PreparedPlain& p,
                                   const ContextPtr& ctx);

class PlainDot {
  public:
    explicit PlainDot(ContextPtr ctx);
    ~PlainDot();
    PlainDot(PlainDot&&) noexcept;
    PlainDot& operator=(PlainDot&&) noexcept;

    void accumulate(const Ciphertext& ct, const PreparedPlain& p);
    Ciphertext finish();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Parameter presets

// Smallest bundled (n, coeff_modulus, t) triple meeting the standard bound
// for `level` whose measured squaring-depth capacity is >= depth_hint.
// plain_bits sets the plaintext modulus size; t is generated as the largest
// NTT-friendly prime of that bit size for the chosen n. Depth capacity is
// probed with an actual keygen + repeated square-and-relinearize chain and
// cached per (level, depth_hint, plain_bits).
EncryptionParams security_preset(int level, int depth_hint, int plain_bits = 40);

// Measured capacity of a parameter set: square-and-accumulate levels
// (one squaring plus a 64-term fan-in sum) until the budget hits 0.
int probe_depth_capacity(const EncryptionParams& params);

// ---------------------------------------------------------------------------
// Serialization (little-endian, tagged length-prefixed sections)

std::vector<std::uint8_t> save_plaintext(const Plaintext&);
Plaintext load_plaintext(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> save_ciphertext(const Ciphertext&);
Ciphertext load_ciphertext(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> save_secret_key(const SecretKey&);
SecretKey load_secret_key(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> save_public_key(const PublicKey&);
PublicKey load_public_key(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> save_relin_keys(const RelinKeys&);
RelinKeys load_relin_keys(const std::uint8_t* data, std::size_t len);

// Context accessors used by the encoding layer.
const ring::NttTables& plain_ntt_tables(const ContextPtr& ctx);
const EncryptionParams& context_params(const ContextPtr& ctx);

}  // namespace fhedge::bfv
