// SPDX-License-Identifier: Apache-2.0
//
// Exact arithmetic in the negacyclic ring Z_q[x]/(x^n + 1) for NTT-friendly
// primes q < 2^62, plus RNS composites and CRT lifting. This is the numeric
// substrate for the encryption scheme; everything here is a pure function
// over immutable inputs.

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fhedge::ring {

using u64 = std::uint64_t;
using i64 = std::int64_t;
using u128 = unsigned __int128;

// Caller-owned RNG; never shared across threads.
using Rng = std::mt19937_64;

inline constexpr u64 kMaxPrime = u64(1) << 62;

inline u64 add_mod(u64 a, u64 b, u64 q) {
    u64 s = a + b;
    return s >= q ? s - q : s;
}

inline u64 sub_mod(u64 a, u64 b, u64 q) { return a >= b ? a - b : a + q - b; }

inline u64 mul_mod(u64 a, u64 b, u64 q) { return u64((u128(a) * b) % q); }

u64 pow_mod(u64 base, u64 exp, u64 q);
u64 inv_mod(u64 a, u64 q);  // q prime

// Deterministic Miller-Rabin, valid for any 64-bit input.
bool is_prime(u64 n);

// Largest prime p < upper with p = 1 (mod step) and p >= 2^(bits-1).
// Throws if the range contains none.
u64 find_ntt_prime(int bits, u64 step, u64 upper_exclusive);

// Distinct NTT-friendly primes of the given bit sizes, all = 1 (mod step),
// skipping any value in `avoid`.
std::vector<u64> find_ntt_primes(std::span<const int> bits, u64 step,
                                 std::span<const u64> avoid = {});

// Round half away from zero. The single rounding rule used everywhere.
i64 round_half_away(double x);

struct PrimeModulus {
    u64 value = 0;
    std::size_t degree_hint = 0;  // n with value = 1 (mod 2n)

    bool operator==(const PrimeModulus&) const = default;
};

enum class Domain : std::uint8_t { coefficient, evaluation };

// Dense polynomial over a single prime modulus. Length n is a power of two,
// every residue is in [0, q).
struct RingPoly {
    std::vector<u64> coeffs;
    u64 modulus = 0;
    Domain domain = Domain::coefficient;

    RingPoly() = default;
    RingPoly(std::size_t n, u64 q, Domain d = Domain::coefficient)
        : coeffs(n, 0), modulus(q), domain(d) {}

    std::size_t n() const { return coeffs.size(); }
    bool is_zero() const;
};

// Twiddle tables for the negacyclic NTT over (n, q). `root` is a primitive
// 2n-th root of unity: root^n = -1 (mod q). Shoup companions hold
// floor(w * 2^64 / q) for the two-multiply modular product.
struct NttTables {
    std::size_t n = 0;
    u64 q = 0;
    u64 root = 0;
    std::vector<u64> fwd, fwd_shoup;  // psi^bitrev(i)
    std::vector<u64> inv, inv_shoup;  // psi^-bitrev(i)
    u64 n_inv = 0, n_inv_shoup = 0;

    static NttTables create(std::size_t n, u64 q);
};

inline u64 mul_mod_shoup(u64 x, u64 y, u64 y_shoup, u64 q) {
    u64 hi = u64((u128(x) * y_shoup) >> 64);
    u64 r = x * y - hi * q;
    return r >= q ? r - q : r;
}

void ntt_forward_inplace(RingPoly& p, const NttTables& t);
void ntt_inverse_inplace(RingPoly& p, const NttTables& t);
RingPoly ntt_forward(const RingPoly& p, const NttTables& t);
RingPoly ntt_inverse(const RingPoly& p, const NttTables& t);

RingPoly poly_add(const RingPoly& a, const RingPoly& b);
RingPoly poly_sub(const RingPoly& a, const RingPoly& b);
RingPoly poly_negate(const RingPoly& a);
void poly_add_inplace(RingPoly& a, const RingPoly& b);
void poly_sub_inplace(RingPoly& a, const RingPoly& b);
void poly_scalar_mul_inplace(RingPoly& a, u64 s);

// a * b mod (x^n + 1, q) via NTT pointwise product. Inputs in coefficient
// domain; same n and modulus required.
RingPoly poly_mul(const RingPoly& a, const RingPoly& b, const NttTables& t);

// O(n^2) negacyclic convolution; the reference oracle for poly_mul.
RingPoly schoolbook_mul(const RingPoly& a, const RingPoly& b);

// Samplers. Ternary coefficients land in {q-1, 0, 1}; Gaussian is rounded
// box-Muller with the given sigma.
RingPoly sample_uniform(u64 q, std::size_t n, Rng& rng);
RingPoly sample_ternary(u64 q, std::size_t n, Rng& rng);
RingPoly sample_gaussian(u64 q, std::size_t n, double sigma, Rng& rng);

// ---------------------------------------------------------------------------
// Wide integers (fixed-capacity little-endian limbs) and CRT lifting.
// Capacity covers the tensor accumulation bound n * q^2 * terms for every
// supported parameter set.

inline constexpr std::size_t kMaxLimbs = 32;

struct WideInt {
    bool neg = false;
    std::uint32_t len = 0;  // significant limbs; len == 0 means zero
    std::array<u64, kMaxLimbs> w{};

    bool is_zero() const { return len == 0; }
};

// Residue-number-system view of one ring element over a prime basis.
struct RnsPoly {
    std::vector<RingPoly> comps;  // one per prime, shared n and domain

    std::size_t n() const { return comps.empty() ? 0 : comps[0].n(); }
    std::size_t prime_count() const { return comps.size(); }
    Domain domain() const {
        return comps.empty() ? Domain::coefficient : comps[0].domain;
    }
};

// Precomputed CRT data for a fixed prime basis: Garner coefficients for
// mixed-radix reconstruction and the basis product for centering.
class CrtBasis {
  public:
    CrtBasis() = default;
    explicit CrtBasis(std::vector<u64> primes);

    const std::vector<u64>& primes() const { return primes_; }
    std::size_t size() const { return primes_.size(); }

    // Exact value in [0, P) from residues (one per prime).
    WideInt reconstruct(std::span<const u64> residues) const;

    // Same, then centered into (-P/2, P/2].
    WideInt reconstruct_centered(std::span<const u64> residues) const;

    // Residue of a centered wide integer modulo p.
    static u64 reduce(const WideInt& x, u64 p);

    const WideInt& product() const { return product_; }

  private:
    std::vector<u64> primes_;
    std::vector<std::vector<u64>> garner_inv_;  // inv[j][i]: p_i^-1 mod p_j, i<j
    std::vector<WideInt> weights_;              // prefix products p_0..p_{i-1}
    WideInt product_;                           // P
    WideInt half_product_;                      // floor(P/2)
};

// Limb helpers shared with the scheme layer.
int wide_cmp_mag(const WideInt& a, const WideInt& b);
void wide_add_mul_word(WideInt& acc, const WideInt& a, u64 m);  // acc += a*m
WideInt wide_sub_mag(const WideInt& a, const WideInt& b);       // |a| - |b|, a>=b
int wide_bit_length(const WideInt& a);

}  // namespace fhedge::ring
