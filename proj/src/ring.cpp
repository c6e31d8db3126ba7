// SPDX-License-Identifier: Apache-2.0

#include "fhedge/ring.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace fhedge::ring {

u64 pow_mod(u64 base, u64 exp, u64 q) {
    u64 r = 1 % q;
    base %= q;
    while (exp) {
        if (exp & 1) r = mul_mod(r, base, q);
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    return r;
}

u64 inv_mod(u64 a, u64 q) {
    if (a % q == 0) throw std::invalid_argument("inv_mod: zero has no inverse");
    return pow_mod(a, q - 2, q);
}

bool is_prime(u64 n) {
    if (n < 2) return false;
    for (u64 p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull,
                  29ull, 31ull, 37ull}) {
        if (n % p == 0) return n == p;
    }
    u64 d = n - 1;
    int s = std::countr_zero(d);
    d >>= s;
    // Deterministic witness set for 64-bit integers.
    for (u64 a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull, 23ull,
                  29ull, 31ull, 37ull}) {
        u64 x = pow_mod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int i = 1; i < s; ++i) {
            x = mul_mod(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) return false;
    }
    return true;
}

u64 find_ntt_prime(int bits, u64 step, u64 upper_exclusive) {
    if (bits < 2 || bits > 62) throw std::invalid_argument("prime bits out of range");
    u64 hi = std::min(upper_exclusive, u64(1) << bits);
    u64 lo = u64(1) << (bits - 1);
    u64 k = (hi - 2) / step;
    for (u64 p = k * step + 1; p >= lo && k > 0; --k, p = k * step + 1) {
        if (p < hi && is_prime(p)) return p;
    }
    throw std::runtime_error("no NTT prime of " + std::to_string(bits) +
                             " bits under the requested bound");
}

std::vector<u64> find_ntt_primes(std::span<const int> bits, u64 step,
                                 std::span<const u64> avoid) {
    std::vector<u64> out;
    for (int b : bits) {
        u64 upper = u64(1) << b;
        for (;;) {
            u64 p = find_ntt_prime(b, step, upper);
            bool clash = std::find(out.begin(), out.end(), p) != out.end() ||
                         std::find(avoid.begin(), avoid.end(), p) != avoid.end();
            if (!clash) {
                out.push_back(p);
                break;
            }
            upper = p;  // keep searching below the clashing prime
        }
    }
    return out;
}

i64 round_half_away(double x) {
    return i64(x >= 0 ? std::floor(x + 0.5) : std::ceil(x - 0.5));
}

bool RingPoly::is_zero() const {
    return std::all_of(coeffs.begin(), coeffs.end(), [](u64 c) { return c == 0; });
}

namespace {

u64 shoup_of(u64 y, u64 q) { return u64((u128(y) << 64) / q); }

std::size_t bit_reverse(std::size_t v, int bits) {
    std::size_t r = 0;
    for (int i = 0; i < bits; ++i) r |= ((v >> i) & 1) << (bits - 1 - i);
    return r;
}

void check_same(const RingPoly& a, const RingPoly& b) {
    if (a.n() != b.n() || a.modulus != b.modulus)
        throw std::invalid_argument("ring op: degree or modulus mismatch");
    if (a.domain != b.domain)
        throw std::invalid_argument("ring op: domain mismatch");
}

}  // namespace

NttTables NttTables::create(std::size_t n, u64 q) {
    if (!std::has_single_bit(n)) throw std::invalid_argument("n must be a power of two");
    if (q % (2 * n) != 1)
        throw std::invalid_argument("modulus has no primitive 2n-th root (q != 1 mod 2n)");
    if (q >= kMaxPrime || !is_prime(q))
        throw std::invalid_argument("modulus must be an odd prime below 2^62");

    NttTables t;
    t.n = n;
    t.q = q;

    // psi = c^((q-1)/2n) for the first c that yields psi^n = -1.
    u64 psi = 0;
    for (u64 c = 2;; ++c) {
        u64 cand = pow_mod(c, (q - 1) / (2 * n), q);
        if (pow_mod(cand, n, q) == q - 1) {
            psi = cand;
            break;
        }
        if (c > 1000) throw std::runtime_error("no 2n-th root found");
    }
    t.root = psi;

    int logn = std::countr_zero(n);
    u64 psi_inv = inv_mod(psi, q);
    t.fwd.resize(n);
    t.fwd_shoup.resize(n);
    t.inv.resize(n);
    t.inv_shoup.resize(n);
    u64 fp = 1, ip = 1;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = bit_reverse(i, logn);
        t.fwd[r] = fp;
        t.inv[r] = ip;
        fp = mul_mod(fp, psi, q);
        ip = mul_mod(ip, psi_inv, q);
    }
    for (std::size_t i = 0; i < n; ++i) {
        t.fwd_shoup[i] = shoup_of(t.fwd[i], q);
        t.inv_shoup[i] = shoup_of(t.inv[i], q);
    }
    t.n_inv = inv_mod(u64(n) % q, q);
    t.n_inv_shoup = shoup_of(t.n_inv, q);
    return t;
}

void ntt_forward_inplace(RingPoly& p, const NttTables& tb) {
    if (p.domain != Domain::coefficient)
        throw std::invalid_argument("ntt_forward: already in evaluation domain");
    if (p.n() != tb.n || p.modulus != tb.q)
        throw std::invalid_argument("ntt_forward: tables mismatch");
    u64* a = p.coeffs.data();
    const u64 q = tb.q;
    std::size_t t = tb.n;
    for (std::size_t m = 1; m < tb.n; m <<= 1) {
        t >>= 1;
        for (std::size_t i = 0; i < m; ++i) {
            const u64 s = tb.fwd[m + i];
            const u64 sq = tb.fwd_shoup[m + i];
            u64* lo = a + 2 * i * t;
            u64* hi = lo + t;
            for (std::size_t j = 0; j < t; ++j) {
                u64 u = lo[j];
                u64 v = mul_mod_shoup(hi[j], s, sq, q);
                lo[j] = add_mod(u, v, q);
                hi[j] = sub_mod(u, v, q);
            }
        }
    }
    p.domain = Domain::evaluation;
}

void ntt_inverse_inplace(RingPoly& p, const NttTables& tb) {
    if (p.domain != Domain::evaluation)
        throw std::invalid_argument("ntt_inverse: not in evaluation domain");
    if (p.n() != tb.n || p.modulus != tb.q)
        throw std::invalid_argument("ntt_inverse: tables mismatch");
    u64* a = p.coeffs.data();
    const u64 q = tb.q;
    std::size_t t = 1;
    for (std::size_t m = tb.n; m > 1; m >>= 1) {
        std::size_t h = m >> 1;
        std::size_t j1 = 0;
        for (std::size_t i = 0; i < h; ++i) {
            const u64 s = tb.inv[h + i];
            const u64 sq = tb.inv_shoup[h + i];
            u64* lo = a + j1;
            u64* hi = lo + t;
            for (std::size_t j = 0; j < t; ++j) {
                u64 u = lo[j];
                u64 v = hi[j];
                lo[j] = add_mod(u, v, q);
                hi[j] = mul_mod_shoup(sub_mod(u, v, q), s, sq, q);
            }
            j1 += 2 * t;
        }
        t <<= 1;
    }
    for (std::size_t j = 0; j < tb.n; ++j)
        a[j] = mul_mod_shoup(a[j], tb.n_inv, tb.n_inv_shoup, q);
    p.domain = Domain::coefficient;
}

RingPoly ntt_forward(const RingPoly& p, const NttTables& t) {
    RingPoly r = p;
    ntt_forward_inplace(r, t);
    return r;
}

RingPoly ntt_inverse(const RingPoly& p, const NttTables& t) {
    RingPoly r = p;
    ntt_inverse_inplace(r, t);
    return r;
}

RingPoly poly_add(const RingPoly& a, const RingPoly& b) {
    RingPoly r = a;
    poly_add_inplace(r, b);
    return r;
}

RingPoly poly_sub(const RingPoly& a, const RingPoly& b) {
    RingPoly r = a;
    poly_sub_inplace(r, b);
    return r;
}

RingPoly poly_negate(const RingPoly& a) {
    RingPoly r = a;
    for (auto& c : r.coeffs) c = c == 0 ? 0 : a.modulus - c;
    return r;
}

void poly_add_inplace(RingPoly& a, const RingPoly& b) {
    check_same(a, b);
    for (std::size_t i = 0; i < a.n(); ++i)
        a.coeffs[i] = add_mod(a.coeffs[i], b.coeffs[i], a.modulus);
}

void poly_sub_inplace(RingPoly& a, const RingPoly& b) {
    check_same(a, b);
    for (std::size_t i = 0; i < a.n(); ++i)
        a.coeffs[i] = sub_mod(a.coeffs[i], b.coeffs[i], a.modulus);
}

void poly_scalar_mul_inplace(RingPoly& a, u64 s) {
    s %= a.modulus;
    u64 sq = shoup_of(s, a.modulus);
    for (auto& c : a.coeffs) c = mul_mod_shoup(c, s, sq, a.modulus);
}

RingPoly poly_mul(const RingPoly& a, const RingPoly& b, const NttTables& t) {
    check_same(a, b);
    if (a.domain != Domain::coefficient)
        throw std::invalid_argument("poly_mul expects coefficient domain");
    RingPoly fa = ntt_forward(a, t);
    RingPoly fb = ntt_forward(b, t);
    for (std::size_t i = 0; i < fa.n(); ++i)
        fa.coeffs[i] = mul_mod(fa.coeffs[i], fb.coeffs[i], t.q);
    ntt_inverse_inplace(fa, t);
    return fa;
}

RingPoly schoolbook_mul(const RingPoly& a, const RingPoly& b) {
    check_same(a, b);
    const std::size_t n = a.n();
    const u64 q = a.modulus;
    RingPoly r(n, q);
    for (std::size_t i = 0; i < n; ++i) {
        if (a.coeffs[i] == 0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            u64 p = mul_mod(a.coeffs[i], b.coeffs[j], q);
            std::size_t k = i + j;
            if (k < n)
                r.coeffs[k] = add_mod(r.coeffs[k], p, q);
            else  // x^n = -1
                r.coeffs[k - n] = sub_mod(r.coeffs[k - n], p, q);
        }
    }
    return r;
}

RingPoly sample_uniform(u64 q, std::size_t n, Rng& rng) {
    RingPoly p(n, q);
    const u64 bound = std::numeric_limits<u64>::max() - std::numeric_limits<u64>::max() % q;
    for (auto& c : p.coeffs) {
        u64 v;
        do {
            v = rng();
        } while (v >= bound);
        c = v % q;
    }
    return p;
}

RingPoly sample_ternary(u64 q, std::size_t n, Rng& rng) {
    RingPoly p(n, q);
    const u64 bound = std::numeric_limits<u64>::max() - std::numeric_limits<u64>::max() % 3;
    for (auto& c : p.coeffs) {
        u64 v;
        do {
            v = rng();
        } while (v >= bound);
        switch (v % 3) {
            case 0: c = 0; break;
            case 1: c = 1; break;
            default: c = q - 1;
        }
    }
    return p;
}

namespace {

// Uniform in (0, 1); the offset keeps log() finite.
double unit_uniform(Rng& rng) { return (double(rng() >> 11) + 0.5) * 0x1p-53; }

}  // namespace

RingPoly sample_gaussian(u64 q, std::size_t n, double sigma, Rng& rng) {
    if (sigma <= 0) throw std::invalid_argument("sigma must be positive");
    RingPoly p(n, q);
    // Rounded box-Muller; one normal per coefficient keeps the stream
    // position independent of n's parity.
    for (auto& c : p.coeffs) {
        double u1 = unit_uniform(rng);
        double u2 = unit_uniform(rng);
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        i64 v = round_half_away(sigma * z);
        c = v < 0 ? q - u64(-v) % q : u64(v) % q;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Wide integers

namespace {

void wide_trim(WideInt& x) {
    while (x.len > 0 && x.w[x.len - 1] == 0) --x.len;
    if (x.len == 0) x.neg = false;
}

}  // namespace

int wide_cmp_mag(const WideInt& a, const WideInt& b) {
    if (a.len != b.len) return a.len < b.len ? -1 : 1;
    for (std::uint32_t i = a.len; i-- > 0;) {
        if (a.w[i] != b.w[i]) return a.w[i] < b.w[i] ? -1 : 1;
    }
    return 0;
}

void wide_add_mul_word(WideInt& acc, const WideInt& a, u64 m) {
    if (m == 0 || a.len == 0) return;
    u64 carry = 0;
    std::uint32_t i = 0;
    for (; i < a.len; ++i) {
        u128 cur = u128(a.w[i]) * m + acc.w[i] + carry;
        acc.w[i] = u64(cur);
        carry = u64(cur >> 64);
    }
    for (; carry != 0; ++i) {
        if (i >= kMaxLimbs) throw std::overflow_error("WideInt overflow");
        u128 cur = u128(acc.w[i]) + carry;
        acc.w[i] = u64(cur);
        carry = u64(cur >> 64);
    }
    acc.len = std::max<std::uint32_t>(acc.len, i);
    wide_trim(acc);
}

WideInt wide_sub_mag(const WideInt& a, const WideInt& b) {
    WideInt r;
    u64 borrow = 0;
    for (std::uint32_t i = 0; i < a.len; ++i) {
        u64 bi = i < b.len ? b.w[i] : 0;
        u64 d = a.w[i] - bi - borrow;
        borrow = (a.w[i] < bi + borrow || (bi + borrow < bi)) ? 1 : 0;
        r.w[i] = d;
    }
    r.len = a.len;
    wide_trim(r);
    return r;
}

int wide_bit_length(const WideInt& a) {
    if (a.len == 0) return 0;
    return int(64 * (a.len - 1) + (64 - std::countl_zero(a.w[a.len - 1])));
}

CrtBasis::CrtBasis(std::vector<u64> primes) : primes_(std::move(primes)) {
    const std::size_t k = primes_.size();
    if (k == 0) throw std::invalid_argument("CrtBasis: empty basis");
    garner_inv_.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        garner_inv_[j].resize(j);
        for (std::size_t i = 0; i < j; ++i)
            garner_inv_[j][i] = inv_mod(primes_[i] % primes_[j], primes_[j]);
    }
    weights_.resize(k);
    WideInt acc;
    acc.len = 1;
    acc.w[0] = 1;
    for (std::size_t i = 0; i < k; ++i) {
        weights_[i] = acc;
        WideInt next;
        wide_add_mul_word(next, acc, primes_[i]);
        acc = next;
    }
    product_ = acc;
    half_product_ = product_;
    u64 rem = 0;
    for (std::uint32_t i = half_product_.len; i-- > 0;) {
        u128 cur = (u128(rem) << 64) | half_product_.w[i];
        half_product_.w[i] = u64(cur >> 1);
        rem = u64(cur & 1);
    }
    while (half_product_.len > 0 && half_product_.w[half_product_.len - 1] == 0)
        --half_product_.len;
}

WideInt CrtBasis::reconstruct(std::span<const u64> residues) const {
    const std::size_t k = primes_.size();
    if (residues.size() != k)
        throw std::invalid_argument("reconstruct: residue count mismatch");
    // Garner mixed-radix digits.
    std::array<u64, kMaxLimbs> v{};
    for (std::size_t j = 0; j < k; ++j) {
        u64 t = residues[j] % primes_[j];
        for (std::size_t i = 0; i < j; ++i) {
            u64 d = sub_mod(t, v[i] % primes_[j], primes_[j]);
            t = mul_mod(d, garner_inv_[j][i], primes_[j]);
        }
        v[j] = t;
    }
    WideInt x;
    for (std::size_t i = 0; i < k; ++i) wide_add_mul_word(x, weights_[i], v[i]);
    return x;
}

WideInt CrtBasis::reconstruct_centered(std::span<const u64> residues) const {
    WideInt x = reconstruct(residues);
    if (wide_cmp_mag(x, half_product_) > 0) {
        x = wide_sub_mag(product_, x);
        x.neg = !x.is_zero();
    }
    return x;
}

u64 CrtBasis::reduce(const WideInt& x, u64 p) {
    u64 r = 0;
    for (std::uint32_t i = x.len; i-- > 0;)
        r = u64(((u128(r) << 64) | x.w[i]) % p);
    if (x.neg && r != 0) r = p - r;
    return r;
}

}  // namespace fhedge::ring
