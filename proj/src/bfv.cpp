// SPDX-License-Identifier: Apache-2.0

#include "fhedge/bfv.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>

#include "fhedge/serial.hpp"

namespace fhedge::bfv {

using boost::multiprecision::cpp_int;
using ring::CrtBasis;
using ring::Domain;
using ring::i64;
using ring::mul_mod;
using ring::NttTables;
using ring::RingPoly;
using ring::RnsPoly;
using ring::u128;
using ring::WideInt;

// ---------------------------------------------------------------------------
// Parameters

int standard_logq_bound(std::size_t n, int level) {
    struct Row {
        std::size_t n;
        int b128, b192, b256;
    };
    static constexpr Row kTable[] = {
        {1024, 27, 19, 14},    {2048, 54, 37, 29},    {4096, 109, 75, 58},
        {8192, 218, 152, 118}, {16384, 438, 300, 239}, {32768, 881, 611, 476},
    };
    for (const Row& r : kTable) {
        if (r.n == n) {
            if (level == 128) return r.b128;
            if (level == 192) return r.b192;
            if (level == 256) return r.b256;
            throw ParameterError("security level must be 128, 192, or 256 bits");
        }
    }
    throw ParameterError("poly_degree outside the standard table (1024..32768)");
}

int coeff_modulus_bits(const EncryptionParams& p) {
    int bits = 0;
    for (const auto& m : p.coeff_modulus) bits += 64 - std::countl_zero(m.value);
    return bits;
}

void validate(const EncryptionParams& p) {
    if (!std::has_single_bit(p.poly_degree) || p.poly_degree < 4)
        throw ParameterError("poly_degree must be a power of two >= 4");
    if (p.coeff_modulus.empty()) throw ParameterError("coeff_modulus is empty");
    const u64 two_n = 2 * u64(p.poly_degree);
    for (const auto& m : p.coeff_modulus) {
        if (m.value >= ring::kMaxPrime || !ring::is_prime(m.value))
            throw ParameterError("coeff modulus factor must be a prime below 2^62");
        if (m.value % two_n != 1)
            throw ParameterError("coeff modulus factor != 1 (mod 2n); no NTT root exists");
    }
    for (std::size_t i = 0; i < p.coeff_modulus.size(); ++i)
        for (std::size_t j = i + 1; j < p.coeff_modulus.size(); ++j)
            if (p.coeff_modulus[i].value == p.coeff_modulus[j].value)
                throw ParameterError("coeff modulus factors must be distinct");
    if (p.plain_modulus < 2 || !ring::is_prime(p.plain_modulus))
        throw ParameterError("plain_modulus must be prime");
    if (p.plain_modulus % two_n != 1)
        throw ParameterError("plain_modulus " + std::to_string(p.plain_modulus) +
                             " != 1 (mod " + std::to_string(two_n) +
                             "); batching needs t = 1 (mod 2n)");
    int tbits = 64 - std::countl_zero(p.plain_modulus);
    if (tbits >= coeff_modulus_bits(p)) throw ParameterError("plain_modulus must be < q");
    if (p.security_level != 0) {
        int bound = standard_logq_bound(p.poly_degree, p.security_level);
        if (coeff_modulus_bits(p) > bound)
            throw ParameterError("coeff modulus exceeds the standard bound for " +
                                 std::to_string(p.security_level) + "-bit security (" +
                                 std::to_string(coeff_modulus_bits(p)) + " > " +
                                 std::to_string(bound) + " bits)");
    }
    if (p.noise_sigma <= 0) throw ParameterError("noise_sigma must be positive");
    if (p.relin_decomposition_bits < 1 || p.relin_decomposition_bits > 60)
        throw ParameterError("relin_decomposition_bits out of range [1, 60]");
}

namespace {

constexpr std::uint32_t kTagParams = 0x31505645;  // "EVP1"
constexpr std::uint32_t kTagPlain = 0x31545850;
constexpr std::uint32_t kTagCipher = 0x31544358;
constexpr std::uint32_t kTagSecret = 0x314B5353;
constexpr std::uint32_t kTagPublic = 0x314B5055;
constexpr std::uint32_t kTagRelin = 0x314B4C52;

void write_params_body(serial::Writer& w, const EncryptionParams& p) {
    w.u64(p.poly_degree);
    w.u64(p.coeff_modulus.size());
    for (const auto& m : p.coeff_modulus) {
        w.u64(m.value);
        w.u64(m.degree_hint);
    }
    w.u64(p.plain_modulus);
    w.u32(std::uint32_t(p.security_level));
    w.f64(p.noise_sigma);
    w.u32(std::uint32_t(p.relin_decomposition_bits));
}

EncryptionParams read_params_body(serial::Reader& r) {
    EncryptionParams p;
    p.poly_degree = r.u64();
    std::size_t k = r.u64();
    p.coeff_modulus.resize(k);
    for (auto& m : p.coeff_modulus) {
        m.value = r.u64();
        m.degree_hint = r.u64();
    }
    p.plain_modulus = r.u64();
    p.security_level = int(r.u32());
    p.noise_sigma = r.f64();
    p.relin_decomposition_bits = int(r.u32());
    return p;
}

void write_ring_poly(serial::Writer& w, const RingPoly& p) {
    w.u64(p.modulus);
    w.u8(p.domain == Domain::evaluation ? 1 : 0);
    w.u64_vec(p.coeffs);
}

RingPoly read_ring_poly(serial::Reader& r) {
    RingPoly p;
    p.modulus = r.u64();
    p.domain = r.u8() ? Domain::evaluation : Domain::coefficient;
    p.coeffs = r.u64_vec();
    return p;
}

void write_rns_poly(serial::Writer& w, const RnsPoly& p) {
    w.u64(p.comps.size());
    for (const auto& c : p.comps) write_ring_poly(w, c);
}

RnsPoly read_rns_poly(serial::Reader& r) {
    RnsPoly p;
    std::size_t k = r.u64();
    p.comps.resize(k);
    for (auto& c : p.comps) c = read_ring_poly(r);
    return p;
}

}  // namespace

u64 params_fingerprint(const EncryptionParams& p) {
    serial::Writer w;
    write_params_body(w, p);
    u64 h = 0xcbf29ce484222325ull;  // FNV-1a
    for (std::uint8_t b : w.data()) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

u64 key_fingerprint(const PublicKey& pk) {
    auto bytes = save_public_key(pk);
    u64 h = 0xcbf29ce484222325ull;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::vector<std::uint8_t> save_params(const EncryptionParams& p) {
    serial::Writer w;
    auto s = w.begin_section(kTagParams, 1);
    write_params_body(w, p);
    w.end_section(s);
    return w.take();
}

EncryptionParams load_params(const std::uint8_t* data, std::size_t len) {
    serial::Reader r(data, len);
    r.expect_section(kTagParams, "encryption params");
    return read_params_body(r);
}

// ---------------------------------------------------------------------------
// Context

class Context {
  public:
    EncryptionParams params;
    u64 fp = 0;
    std::size_t n = 0;
    std::vector<u64> base_primes;
    std::vector<NttTables> base_tables;
    CrtBasis base_crt;
    NttTables plain_tables;

    std::vector<u64> tensor_primes;  // base primes followed by extension primes
    std::vector<NttTables> tensor_tables;
    CrtBasis tensor_crt;
    std::vector<u64> q_mod_tensor;   // q mod each tensor prime
    std::size_t max_dot_terms = 1024;

    cpp_int q_big;
    cpp_int half_q;  // floor(q/2)
    int logq_bits = 0;
    std::vector<u64> delta_mod_qi;  // floor(q/t) mod each base prime
    u64 q_mod_t = 0;                // r_t(q), for exact round(q*m/t) encoding
    int relin_digits = 0;

    explicit Context(const EncryptionParams& prm) : params(prm) {
        validate(params);
        fp = params_fingerprint(params);
        n = params.poly_degree;
        for (const auto& m : params.coeff_modulus) base_primes.push_back(m.value);
        for (u64 q : base_primes) base_tables.push_back(NttTables::create(n, q));
        base_crt = CrtBasis(base_primes);
        plain_tables = NttTables::create(n, params.plain_modulus);

        q_big = 1;
        for (u64 q : base_primes) q_big *= q;
        half_q = q_big >> 1;
        logq_bits = int(boost::multiprecision::msb(q_big)) + 1;

        cpp_int delta = q_big / params.plain_modulus;
        for (u64 q : base_primes)
            delta_mod_qi.push_back((delta % q).convert_to<u64>());
        q_mod_t = (q_big % params.plain_modulus).convert_to<u64>();

        relin_digits =
            (logq_bits + params.relin_decomposition_bits - 1) / params.relin_decomposition_bits;

        // Tensor basis: covers |sum of max_dot_terms products| of centered
        // operands, i.e. max_dot_terms * n * (q/2)^2, with slack.
        int need = 2 * logq_bits + std::countr_zero(n) +
                   int(std::bit_width(max_dot_terms)) + 2;
        int ext = 0;
        int have = 0;
        for (u64 q : base_primes) have += 64 - std::countl_zero(q);
        tensor_primes = base_primes;
        std::vector<int> ext_bits;
        while (have + 61 * ext < need) ++ext;
        for (int i = 0; i < ext; ++i) ext_bits.push_back(61);
        auto extras = ring::find_ntt_primes(ext_bits, 2 * u64(n), base_primes);
        tensor_primes.insert(tensor_primes.end(), extras.begin(), extras.end());
        tensor_tables = base_tables;
        for (u64 q : extras) tensor_tables.push_back(NttTables::create(n, q));
        tensor_crt = CrtBasis(tensor_primes);
        for (u64 q : tensor_primes)
            q_mod_tensor.push_back((q_big % q).convert_to<u64>());
    }
};

ContextPtr get_context(const EncryptionParams& params) {
    static std::mutex mu;
    static std::map<u64, std::weak_ptr<const Context>> cache;
    u64 fp = params_fingerprint(params);
    std::lock_guard lock(mu);
    if (auto it = cache.find(fp); it != cache.end()) {
        if (auto p = it->second.lock()) return p;
    }
    auto ctx = std::make_shared<const Context>(params);
    cache[fp] = ctx;
    return ctx;
}

const ring::NttTables& plain_ntt_tables(const ContextPtr& ctx) { return ctx->plain_tables; }
const EncryptionParams& context_params(const ContextPtr& ctx) { return ctx->params; }

// ---------------------------------------------------------------------------
// Internal helpers

namespace {

void check_fp(u64 a, u64 b, const char* what) {
    if (a != b)
        throw std::invalid_argument(std::string("params mismatch in ") + what);
}

std::vector<i64> ternary_signed(std::size_t n, Rng& rng) {
    std::vector<i64> v(n);
    const u64 bound = std::numeric_limits<u64>::max() - std::numeric_limits<u64>::max() % 3;
    for (auto& x : v) {
        u64 r;
        do {
            r = rng();
        } while (r >= bound);
        x = i64(r % 3) - 1;
    }
    return v;
}

std::vector<i64> gaussian_signed(std::size_t n, double sigma, Rng& rng) {
    std::vector<i64> v(n);
    for (auto& x : v) {
        double u1 = (double(rng() >> 11) + 0.5) * 0x1p-53;
        double u2 = (double(rng() >> 11) + 0.5) * 0x1p-53;
        double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        x = ring::round_half_away(sigma * z);
    }
    return v;
}

RnsPoly rns_from_signed(std::span<const i64> vals, const Context& C) {
    RnsPoly p;
    p.comps.reserve(C.base_primes.size());
    for (u64 q : C.base_primes) {
        RingPoly c(C.n, q);
        for (std::size_t j = 0; j < C.n; ++j) {
            i64 v = vals[j];
            c.coeffs[j] = v < 0 ? q - u64(-v) % q : u64(v) % q;
        }
        p.comps.push_back(std::move(c));
    }
    return p;
}

void rns_ntt_forward(RnsPoly& p, const Context& C) {
    for (std::size_t i = 0; i < p.comps.size(); ++i)
        ring::ntt_forward_inplace(p.comps[i], C.base_tables[i]);
}

void rns_ntt_inverse(RnsPoly& p, const Context& C) {
    for (std::size_t i = 0; i < p.comps.size(); ++i)
        ring::ntt_inverse_inplace(p.comps[i], C.base_tables[i]);
}

void rns_add_inplace(RnsPoly& a, const RnsPoly& b) {
    for (std::size_t i = 0; i < a.comps.size(); ++i)
        ring::poly_add_inplace(a.comps[i], b.comps[i]);
}

RnsPoly rns_pointwise_mul(const RnsPoly& a, const RnsPoly& b) {
    RnsPoly r = a;
    for (std::size_t i = 0; i < a.comps.size(); ++i) {
        const u64 q = a.comps[i].modulus;
        for (std::size_t j = 0; j < a.comps[i].n(); ++j)
            r.comps[i].coeffs[j] = mul_mod(a.comps[i].coeffs[j], b.comps[i].coeffs[j], q);
    }
    return r;
}

void rns_pointwise_mul_acc(RnsPoly& acc, const RnsPoly& a, const RnsPoly& b) {
    for (std::size_t i = 0; i < acc.comps.size(); ++i) {
        const u64 q = acc.comps[i].modulus;
        for (std::size_t j = 0; j < acc.comps[i].n(); ++j) {
            u64 p = mul_mod(a.comps[i].coeffs[j], b.comps[i].coeffs[j], q);
            acc.comps[i].coeffs[j] = ring::add_mod(acc.comps[i].coeffs[j], p, q);
        }
    }
}

RnsPoly rns_zero(const Context& C, Domain dom) {
    RnsPoly p;
    for (u64 q : C.base_primes) p.comps.emplace_back(C.n, q, dom);
    return p;
}

RnsPoly rns_uniform_eval(const Context& C, Rng& rng) {
    RnsPoly p;
    for (u64 q : C.base_primes) {
        RingPoly c = ring::sample_uniform(q, C.n, rng);
        c.domain = Domain::evaluation;
        p.comps.push_back(std::move(c));
    }
    return p;
}

cpp_int to_big(const WideInt& x) {
    cpp_int v = 0;
    for (std::uint32_t i = x.len; i-- > 0;) {
        v <<= 64;
        v += x.w[i];
    }
    return x.neg ? cpp_int(-v) : v;
}

// round(a / b) for b > 0, half away from zero (b odd here, so ties cannot occur).
cpp_int round_div(const cpp_int& a, const cpp_int& b) {
    cpp_int two_a = a < 0 ? cpp_int(-a) : a;
    two_a <<= 1;
    cpp_int r = (two_a + b) / (b << 1);
    return a < 0 ? cpp_int(-r) : r;
}

u64 big_mod_u64(const cpp_int& a, u64 p) {
    cpp_int m = a % p;
    if (m < 0) m += p;
    return m.convert_to<u64>();
}

// Gathers per-prime residues of coefficient j from an RNS polynomial.
void gather_residues(const RnsPoly& p, std::size_t j, std::vector<u64>& out) {
    out.resize(p.comps.size());
    for (std::size_t i = 0; i < p.comps.size(); ++i) out[i] = p.comps[i].coeffs[j];
}

u64 extract_bits(const WideInt& x, int offset, int width) {
    // Value assumed non-negative.
    u64 r = 0;
    for (int b = 0; b < width; ++b) {
        int pos = offset + b;
        std::uint32_t limb = std::uint32_t(pos >> 6);
        if (limb >= x.len) break;
        r |= ((x.w[limb] >> (pos & 63)) & 1) << b;
    }
    return r;
}

}  // namespace

std::size_t Ciphertext::byte_size() const {
    // mirrors save_ciphertext: section header + fingerprint + poly count,
    // then per poly a comp count and per comp modulus/domain/len + coeffs
    std::size_t b = 13 + 8 + 8;
    for (const auto& p : polys) {
        b += 8;
        for (const auto& c : p.comps) b += 17 + c.coeffs.size() * 8;
    }
    return b;
}

// ---------------------------------------------------------------------------
// Keygen / encrypt / decrypt

KeySet keygen(const EncryptionParams& params, Rng& rng) {
    auto ctx = get_context(params);
    const Context& C = *ctx;

    KeySet ks;
    ks.params = params;

    auto s_signed = ternary_signed(C.n, rng);
    RnsPoly s = rns_from_signed(s_signed, C);
    rns_ntt_forward(s, C);
    ks.secret.s = s;
    ks.secret.params_fp = C.fp;

    RnsPoly a = rns_uniform_eval(C, rng);
    RnsPoly e = rns_from_signed(gaussian_signed(C.n, params.noise_sigma, rng), C);
    rns_ntt_forward(e, C);
    // p0 = -(a*s + e), p1 = a
    RnsPoly p0 = rns_pointwise_mul(a, s);
    rns_add_inplace(p0, e);
    for (auto& c : p0.comps) c = ring::poly_negate(c);
    ks.public_key.p0 = std::move(p0);
    ks.public_key.p1 = std::move(a);
    ks.public_key.params_fp = C.fp;

    // Relinearization keys: rlk_i = (-(a_i*s + e_i) + 2^(w i) * s^2, a_i).
    RnsPoly s2 = rns_pointwise_mul(s, s);
    const int w = params.relin_decomposition_bits;
    ks.relin.decomposition_bits = w;
    ks.relin.params_fp = C.fp;
    for (int i = 0; i < C.relin_digits; ++i) {
        RnsPoly ai = rns_uniform_eval(C, rng);
        RnsPoly ei = rns_from_signed(gaussian_signed(C.n, params.noise_sigma, rng), C);
        rns_ntt_forward(ei, C);
        RnsPoly k0 = rns_pointwise_mul(ai, s);
        rns_add_inplace(k0, ei);
        for (auto& c : k0.comps) c = ring::poly_negate(c);
        for (std::size_t pi = 0; pi < C.base_primes.size(); ++pi) {
            const u64 q = C.base_primes[pi];
            u64 factor = ring::pow_mod(2, u64(w) * u64(i), q);
            for (std::size_t j = 0; j < C.n; ++j) {
                u64 contrib = mul_mod(factor, s2.comps[pi].coeffs[j], q);
                k0.comps[pi].coeffs[j] = ring::add_mod(k0.comps[pi].coeffs[j], contrib, q);
            }
        }
        ks.relin.keys.push_back({std::move(k0), std::move(ai)});
    }
    return ks;
}

namespace {

// Residue mod p of round(q*m/t) = floor(q/t)*m + round((q mod t)*m / t).
// Scaling each message coefficient exactly keeps the encoding error below
// one half instead of the (q mod t)*m term that otherwise dominates fresh
// noise at large t.
u64 scaled_plain_residue(u64 m, u64 delta_mod_p, u64 q_mod_t, u64 t, u64 p) {
    u128 num = u128(m) * q_mod_t;
    u64 corr = u64(((num << 1) + t) / (u128(t) << 1));
    return ring::add_mod(mul_mod(delta_mod_p, m % p, p), corr % p, p);
}

void check_plaintext(const Plaintext& pt, const Context& C) {
    if (pt.poly.modulus != C.params.plain_modulus || pt.poly.n() != C.n)
        throw std::invalid_argument("plaintext does not match scheme parameters");
    if (pt.poly.domain != Domain::coefficient)
        throw std::invalid_argument("plaintext must be in coefficient domain");
    for (u64 c : pt.poly.coeffs)
        if (c >= C.params.plain_modulus)
            throw std::invalid_argument("plaintext coefficient out of [0, t)");
}

}  // namespace

Ciphertext encrypt(const Plaintext& pt, const PublicKey& pk, const ContextPtr& ctx,
                   Rng& rng) {
    const Context& C = *ctx;
    check_fp(pk.params_fp, C.fp, "encrypt");
    check_plaintext(pt, C);

    RnsPoly u = rns_from_signed(ternary_signed(C.n, rng), C);
    rns_ntt_forward(u, C);
    auto e1 = gaussian_signed(C.n, C.params.noise_sigma, rng);
    auto e2 = gaussian_signed(C.n, C.params.noise_sigma, rng);

    RnsPoly c0 = rns_pointwise_mul(pk.p0, u);
    RnsPoly c1 = rns_pointwise_mul(pk.p1, u);
    rns_ntt_inverse(c0, C);
    rns_ntt_inverse(c1, C);
    const u64 t = C.params.plain_modulus;
    for (std::size_t pi = 0; pi < C.base_primes.size(); ++pi) {
        const u64 q = C.base_primes[pi];
        const u64 delta = C.delta_mod_qi[pi];
        for (std::size_t j = 0; j < C.n; ++j) {
            u64 dm = scaled_plain_residue(pt.poly.coeffs[j], delta, C.q_mod_t, t, q);
            u64 v = ring::add_mod(c0.comps[pi].coeffs[j], dm, q);
            i64 n1 = e1[j];
            v = ring::add_mod(v, n1 < 0 ? q - u64(-n1) % q : u64(n1) % q, q);
            c0.comps[pi].coeffs[j] = v;
            i64 n2 = e2[j];
            c1.comps[pi].coeffs[j] = ring::add_mod(
                c1.comps[pi].coeffs[j], n2 < 0 ? q - u64(-n2) % q : u64(n2) % q, q);
        }
    }
    Ciphertext ct;
    ct.params_fp = C.fp;
    ct.polys.push_back(std::move(c0));
    ct.polys.push_back(std::move(c1));
    return ct;
}

namespace {

// [c0 + c1 s + c2 s^2 + ...]_q in coefficient domain.
RnsPoly apply_secret(const Ciphertext& ct, const SecretKey& sk, const Context& C) {
    RnsPoly acc = rns_zero(C, Domain::evaluation);
    RnsPoly s_pow;  // s^i, NTT form
    for (std::size_t i = 0; i < ct.polys.size(); ++i) {
        RnsPoly term = ct.polys[i];
        if (term.domain() == Domain::coefficient) rns_ntt_forward(term, C);
        if (i == 1)
            s_pow = sk.s;
        else if (i > 1)
            s_pow = rns_pointwise_mul(s_pow, sk.s);
        if (i > 0) term = rns_pointwise_mul(term, s_pow);
        rns_add_inplace(acc, term);
    }
    rns_ntt_inverse(acc, C);
    return acc;
}

}  // namespace

Plaintext decrypt(const Ciphertext& ct, const SecretKey& sk, const ContextPtr& ctx) {
    const Context& C = *ctx;
    check_fp(ct.params_fp, C.fp, "decrypt");
    check_fp(sk.params_fp, C.fp, "decrypt");
    if (ct.size() < 2) throw std::invalid_argument("malformed ciphertext");

    RnsPoly acc = apply_secret(ct, sk, C);
    Plaintext out;
    out.poly = RingPoly(C.n, C.params.plain_modulus);
    const cpp_int t = C.params.plain_modulus;
    std::vector<u64> res;
    for (std::size_t j = 0; j < C.n; ++j) {
        gather_residues(acc, j, res);
        WideInt e = C.base_crt.reconstruct_centered(res);
        cpp_int m = round_div(to_big(e) * t, C.q_big) % t;
        if (m < 0) m += t;
        out.poly.coeffs[j] = m.convert_to<u64>();
    }
    return out;
}

int noise_budget(const Ciphertext& ct, const SecretKey& sk, const ContextPtr& ctx) {
    const Context& C = *ctx;
    check_fp(ct.params_fp, C.fp, "noise_budget");
    check_fp(sk.params_fp, C.fp, "noise_budget");

    RnsPoly acc = apply_secret(ct, sk, C);
    const cpp_int t = C.params.plain_modulus;
    cpp_int max_v = 0;
    std::vector<u64> res;
    for (std::size_t j = 0; j < C.n; ++j) {
        gather_residues(acc, j, res);
        WideInt e = C.base_crt.reconstruct_centered(res);
        cpp_int num = to_big(e) * t;
        cpp_int v = num - round_div(num, C.q_big) * C.q_big;
        if (v < 0) v = -v;
        if (v > max_v) max_v = v;
    }
    // budget = floor(log2(q / (2 max_v)))
    if (max_v == 0) return C.logq_bits - 1;
    cpp_int dv = max_v << 1;
    if (dv > C.q_big) return 0;
    int b = int(boost::multiprecision::msb(C.q_big)) - int(boost::multiprecision::msb(dv));
    while ((dv << (b + 1)) <= C.q_big) ++b;
    while (b > 0 && (dv << b) > C.q_big) --b;
    if (b < 0) b = 0;
    return b;
}

bool validate_decryption(const Ciphertext& ct, const SecretKey& sk, const ContextPtr& ctx) {
    return noise_budget(ct, sk, ctx) > 0;
}

// ---------------------------------------------------------------------------
// Linear ciphertext algebra

Ciphertext add(const Ciphertext& a, const Ciphertext& b) {
    check_fp(a.params_fp, b.params_fp, "add");
    const Ciphertext& big = a.size() >= b.size() ? a : b;
    const Ciphertext& small = a.size() >= b.size() ? b : a;
    Ciphertext r = big;
    for (std::size_t i = 0; i < small.size(); ++i) {
        for (std::size_t pi = 0; pi < r.polys[i].comps.size(); ++pi)
            ring::poly_add_inplace(r.polys[i].comps[pi], small.polys[i].comps[pi]);
    }
    return r;
}

Ciphertext add_plain(const Ciphertext& a, const Plaintext& p, const ContextPtr& ctx) {
    const Context& C = *ctx;
    check_fp(a.params_fp, C.fp, "add_plain");
    check_plaintext(p, C);
    Ciphertext r = a;
    const u64 t = C.params.plain_modulus;
    for (std::size_t pi = 0; pi < C.base_primes.size(); ++pi) {
        const u64 q = C.base_primes[pi];
        const u64 delta = C.delta_mod_qi[pi];
        for (std::size_t j = 0; j < C.n; ++j) {
            u64 dm = scaled_plain_residue(p.poly.coeffs[j], delta, C.q_mod_t, t, q);
            r.polys[0].comps[pi].coeffs[j] =
                ring::add_mod(r.polys[0].comps[pi].coeffs[j], dm, q);
        }
    }
    return r;
}

Ciphertext multiply_scalar(const Ciphertext& a, std::int64_t value, const ContextPtr& ctx) {
    const Context& C = *ctx;
    check_fp(a.params_fp, C.fp, "multiply_scalar");
    Ciphertext r = a;
    for (auto& poly : r.polys) {
        for (std::size_t pi = 0; pi < poly.comps.size(); ++pi) {
            const u64 q = C.base_primes[pi];
            u64 s = value < 0 ? q - u64(-value) % q : u64(value) % q;
            ring::poly_scalar_mul_inplace(poly.comps[pi], s);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Plaintext multiplication (centered lift, NTT pointwise)

namespace {

struct PlainOperand {
    RnsPoly ntt;          // centered plaintext lifted mod q, NTT form
    bool is_constant = false;
    i64 constant = 0;
};

std::shared_ptr<const PlainOperand> make_plain_operand(const Plaintext& p,
                                                       const Context& C) {
    check_plaintext(p, C);
    auto op = std::make_shared<PlainOperand>();
    const u64 t = C.params.plain_modulus;
    bool constant = true;
    for (std::size_t j = 1; j < C.n; ++j)
        if (p.poly.coeffs[j] != 0) {
            constant = false;
            break;
        }
    if (constant) {
        op->is_constant = true;
        u64 c = p.poly.coeffs[0];
        op->constant = c > t / 2 ? -i64(t - c) : i64(c);
        return op;
    }
    for (std::size_t pi = 0; pi < C.base_primes.size(); ++pi) {
        const u64 q = C.base_primes[pi];
        RingPoly c(C.n, q);
        for (std::size_t j = 0; j < C.n; ++j) {
            u64 v = p.poly.coeffs[j];
            c.coeffs[j] = v > t / 2 ? q - (t - v) % q : v % q;
        }
        ring::ntt_forward_inplace(c, C.base_tables[pi]);
        op->ntt.comps.push_back(std::move(c));
    }
    return op;
}

}  // namespace

PreparedPlain prepare_plain(const Plaintext& p, const ContextPtr& ctx) {
    PreparedPlain pp;
    pp.impl_ = make_plain_operand(p, *ctx);
    pp.params_fp = ctx->fp;
    return pp;
}

Ciphertext multiply_prepared_plain(const Ciphertext& a, const PreparedPlain& p,
                                   const ContextPtr& ctx) {
    const Context& C = *ctx;
    check_fp(a.params_fp, C.fp, "multiply_plain");
    check_fp(p.params_fp, C.fp, "multiply_plain");
    const auto* op = static_cast<const PlainOperand*>(p.impl_.get());
    if (!op) throw std::invalid_argument("empty prepared plaintext");
    if (op->is_constant) return multiply_scalar(a, op->constant, ctx);
    Ciphertext r = a;
    for (auto& poly : r.polys) {
        rns_ntt_forward(poly, C);
        for (std::size_t pi = 0; pi < poly.comps.size(); ++pi) {
            const u64 q = C.base_primes[pi];
            for (std::size_t j = 0; j < C.n; ++j)
                poly.comps[pi].coeffs[j] =
                    mul_mod(poly.comps[pi].coeffs[j], op->ntt.comps[pi].coeffs[j], q);
        }
        rns_ntt_inverse(poly, C);
    }
    return r;
}

Ciphertext multiply_plain(const Ciphertext& a, const Plaintext& p, const ContextPtr& ctx) {
    return multiply_prepared_plain(a, prepare_plain(p, ctx), ctx);
}

struct PlainDot::Impl {
    ContextPtr ctx;
    std::vector<RnsPoly> acc;  // NTT domain accumulators
    bool any = false;
};

PlainDot::PlainDot(ContextPtr ctx) : impl_(std::make_unique<Impl>()) {
    impl_->ctx = std::move(ctx);
}
PlainDot::~PlainDot() = default;
PlainDot::PlainDot(PlainDot&&) noexcept = default;
PlainDot& PlainDot::operator=(PlainDot&&) noexcept = default;

void PlainDot::accumulate(const Ciphertext& ct, const PreparedPlain& p) {
    const Context& C = *impl_->ctx;
    check_fp(ct.params_fp, C.fp, "PlainDot");
    check_fp(p.params_fp, C.fp, "PlainDot");
    const auto* op = static_cast<const PlainOperand*>(p.impl_.get());
    while (impl_->acc.size() < ct.size())
        impl_->acc.push_back(rns_zero(C, Domain::evaluation));
    for (std::size_t i = 0; i < ct.size(); ++i) {
        RnsPoly term = ct.polys[i];
        rns_ntt_forward(term, C);
        if (op->is_constant) {
            for (std::size_t pi = 0; pi < term.comps.size(); ++pi) {
                const u64 q = C.base_primes[pi];
                u64 s = op->constant < 0 ? q - u64(-op->constant) % q
                                         : u64(op->constant) % q;
                ring::poly_scalar_mul_inplace(term.comps[pi], s);
            }
            rns_add_inplace(impl_->acc[i], term);
        } else {
            rns_pointwise_mul_acc(impl_->acc[i], term, op->ntt);
        }
    }
    impl_->any = true;
}

Ciphertext PlainDot::finish() {
    if (!impl_->any) throw std::logic_error("PlainDot::finish with no terms");
    const Context& C = *impl_->ctx;
    Ciphertext r;
    r.params_fp = C.fp;
    for (auto& a : impl_->acc) {
        rns_ntt_inverse(a, C);
        r.polys.push_back(std::move(a));
    }
    impl_->acc.clear();
    impl_->any = false;
    return r;
}

// ---------------------------------------------------------------------------
// Ciphertext multiplication: exact tensor over the extended basis

namespace {

// One ciphertext polynomial lifted to the tensor basis, NTT form.
struct LiftedPoly {
    std::vector<RingPoly> comps;  // over tensor primes, evaluation domain
};

struct CipherOperand {
    std::vector<LiftedPoly> polys;
};

LiftedPoly lift_poly(const RnsPoly& p, const Context& C) {
    const std::size_t kb = C.base_primes.size();
    const std::size_t kt = C.tensor_primes.size();
    LiftedPoly out;
    out.comps.reserve(kt);
    for (std::size_t i = 0; i < kt; ++i)
        out.comps.emplace_back(C.n, C.tensor_primes[i], Domain::coefficient);

    // Residues of floor(q/2) tell the centering apart without a comparison
    // per prime: centered(x) = x - q iff 2x > q.
    std::vector<u64> res(kb);
    for (std::size_t j = 0; j < C.n; ++j) {
        for (std::size_t i = 0; i < kb; ++i) res[i] = p.comps[i].coeffs[j];
        WideInt x = C.base_crt.reconstruct(res);  // in [0, q)
        WideInt twox = x;
        u64 carry = 0;
        for (std::uint32_t l = 0; l < twox.len; ++l) {
            u64 nv = (twox.w[l] << 1) | carry;
            carry = twox.w[l] >> 63;
            twox.w[l] = nv;
        }
        if (carry) {
            twox.w[twox.len] = carry;
            ++twox.len;
        }
        const bool negative =
            ring::wide_cmp_mag(twox, C.base_crt.product()) > 0 && !x.is_zero();
        for (std::size_t i = 0; i < kt; ++i) {
            const u64 pi = C.tensor_primes[i];
            u64 r = i < kb ? res[i] : CrtBasis::reduce(x, pi);
            if (negative) r = ring::sub_mod(r, C.q_mod_tensor[i] % pi, pi);
            out.comps[i].coeffs[j] = r;
        }
    }
    for (std::size_t i = 0; i < kt; ++i)
        ring::ntt_forward_inplace(out.comps[i], C.tensor_tables[i]);
    return out;
}

// Inverse NTT + CRT reconstruction + t/q rounding back into base RNS.
RnsPoly scale_to_base(std::vector<RingPoly>& acc, const Context& C) {
    const std::size_t kt = C.tensor_primes.size();
    for (std::size_t i = 0; i < kt; ++i)
        ring::ntt_inverse_inplace(acc[i], C.tensor_tables[i]);
    RnsPoly out = rns_zero(C, Domain::coefficient);
    const cpp_int t = C.params.plain_modulus;
    std::vector<u64> res(kt);
    for (std::size_t j = 0; j < C.n; ++j) {
        for (std::size_t i = 0; i < kt; ++i) res[i] = acc[i].coeffs[j];
        WideInt e = C.tensor_crt.reconstruct_centered(res);
        cpp_int scaled = round_div(to_big(e) * t, C.q_big);
        for (std::size_t i = 0; i < C.base_primes.size(); ++i)
            out.comps[i].coeffs[j] = big_mod_u64(scaled, C.base_primes[i]);
    }
    return out;
}

std::vector<std::vector<RingPoly>> tensor_accumulators(std::size_t out_size,
                                                       const Context& C) {
    std::vector<std::vector<RingPoly>> acc(out_size);
    for (auto& a : acc) {
        a.reserve(C.tensor_primes.size());
        for (std::size_t i = 0; i < C.tensor_primes.size(); ++i)
            a.emplace_back(C.n, C.tensor_primes[i], Domain::evaluation);
    }
    return acc;
}

void tensor_acc_term(std::vector<std::vector<RingPoly>>& acc, const CipherOperand& a,
                     const CipherOperand& b, const Context& C) {
    for (std::size_t i = 0; i < a.polys.size(); ++i) {
        for (std::size_t k = 0; k < b.polys.size(); ++k) {
            auto& dst = acc[i + k];
            for (std::size_t pi = 0; pi < C.tensor_primes.size(); ++pi) {
                const u64 q = C.tensor_primes[pi];
                const u64* xa = a.polys[i].comps[pi].coeffs.data();
                const u64* xb = b.polys[k].comps[pi].coeffs.data();
                u64* d = dst[pi].coeffs.data();
                for (std::size_t j = 0; j < C.n; ++j)
                    d[j] = ring::add_mod(d[j], mul_mod(xa[j], xb[j], q), q);
            }
        }
    }
}

std::shared_ptr<const CipherOperand> make_cipher_operand(const Ciphertext& ct,
                                                         const Context& C) {
    auto op = std::make_shared<CipherOperand>();
    op->polys.reserve(ct.size());
    for (const auto& p : ct.polys) op->polys.push_back(lift_poly(p, C));
    return op;
}

}  // namespace

PreparedCipher prepare_cipher(const Ciphertext& ct, const ContextPtr& ctx) {
    check_fp(ct.params_fp, ctx->fp, "prepare_cipher");
    PreparedCipher pc;
    pc.impl_ = make_cipher_operand(ct, *ctx);
    pc.params_fp = ctx->fp;
    pc.size = ct.size();
    return pc;
}

Ciphertext relinearize(const Ciphertext& a, const RelinKeys& rk, const ContextPtr& ctx) {
    const Context& C = *ctx;
    check_fp(a.params_fp, C.fp, "relinearize");
    check_fp(rk.params_fp, C.fp, "relinearize");
    if (a.size() == 2) return a;
    if (a.size() != 3)
        throw std::invalid_argument("relinearize supports degree-2 ciphertexts only");
    if (int(rk.keys.size()) != C.relin_digits)
        throw std::invalid_argument("relinearization key count mismatch");

    const int w = rk.decomposition_bits;
    const std::size_t kb = C.base_primes.size();

    // Digit-decompose c2 (uncentered, in [0, q)).
    std::vector<std::vector<u64>> digits(C.relin_digits, std::vector<u64>(C.n));
    std::vector<u64> res(kb);
    for (std::size_t j = 0; j < C.n; ++j) {
        gather_residues(a.polys[2], j, res);
        WideInt x = C.base_crt.reconstruct(res);
        for (int d = 0; d < C.relin_digits; ++d)
            digits[d][j] = extract_bits(x, d * w, w);
    }

    RnsPoly acc0 = rns_zero(C, Domain::evaluation);
    RnsPoly acc1 = rns_zero(C, Domain::evaluation);
    for (int d = 0; d < C.relin_digits; ++d) {
        RnsPoly dp;
        for (std::size_t pi = 0; pi < kb; ++pi) {
            RingPoly c(C.n, C.base_primes[pi]);
            for (std::size_t j = 0; j < C.n; ++j)
                c.coeffs[j] = digits[d][j] % C.base_primes[pi];
            ring::ntt_forward_inplace(c, C.base_tables[pi]);
            dp.comps.push_back(std::move(c));
        }
        rns_pointwise_mul_acc(acc0, dp, rk.keys[d][0]);
        rns_pointwise_mul_acc(acc1, dp, rk.keys[d][1]);
    }
    rns_ntt_inverse(acc0, C);
    rns_ntt_inverse(acc1, C);

    Ciphertext r;
    r.params_fp = C.fp;
    r.polys.push_back(a.polys[0]);
    r.polys.push_back(a.polys[1]);
    rns_add_inplace(r.polys[0], acc0);
    rns_add_inplace(r.polys[1], acc1);
    return r;
}

Ciphertext multiply_no_relin(const Ciphertext& a, const Ciphertext& b,
                             const ContextPtr& ctx) {
    const Context& C = *ctx;
    check_fp(a.params_fp, b.params_fp, "multiply");
    check_fp(a.params_fp, C.fp, "multiply");
    auto oa = make_cipher_operand(a, C);
    auto ob = make_cipher_operand(b, C);
    auto acc = tensor_accumulators(a.size() + b.size() - 1, C);
    tensor_acc_term(acc, *oa, *ob, C);
    Ciphertext r;
    r.params_fp = C.fp;
    for (auto& comp : acc) r.polys.push_back(scale_to_base(comp, C));
    return r;
}

Ciphertext square_no_relin(const Ciphertext& a, const ContextPtr& ctx) {
    const Context& C = *ctx;
    check_fp(a.params_fp, C.fp, "square");
    auto oa = make_cipher_operand(a, C);
    auto acc = tensor_accumulators(2 * a.size() - 1, C);
    tensor_acc_term(acc, *oa, *oa, C);
    Ciphertext r;
    r.params_fp = C.fp;
    for (auto& comp : acc) r.polys.push_back(scale_to_base(comp, C));
    return r;
}

Ciphertext multiply(const Ciphertext& a, const Ciphertext& b, const RelinKeys& rk,
                    const ContextPtr& ctx) {
    return relinearize(multiply_no_relin(a, b, ctx), rk, ctx);
}

Ciphertext square(const Ciphertext& a, const RelinKeys& rk, const ContextPtr& ctx) {
    return relinearize(square_no_relin(a, ctx), rk, ctx);
}

struct CipherDot::Impl {
    ContextPtr ctx;
    std::vector<std::vector<RingPoly>> acc;
    std::size_t terms = 0;
};

CipherDot::CipherDot(ContextPtr ctx) : impl_(std::make_unique<Impl>()) {
    impl_->ctx = std::move(ctx);
}
CipherDot::~CipherDot() = default;
CipherDot::CipherDot(CipherDot&&) noexcept = default;
CipherDot& CipherDot::operator=(CipherDot&&) noexcept = default;

void CipherDot::accumulate(const PreparedCipher& a, const PreparedCipher& b) {
    const Context& C = *impl_->ctx;
    check_fp(a.params_fp, C.fp, "CipherDot");
    check_fp(b.params_fp, C.fp, "CipherDot");
    if (a.size != 2 || b.size != 2)
        throw std::invalid_argument("CipherDot requires size-2 (relinearized) operands");
    if (impl_->terms + 1 > C.max_dot_terms)
        throw std::invalid_argument("CipherDot term count exceeds the tensor basis headroom");
    if (impl_->acc.empty()) impl_->acc = tensor_accumulators(3, C);
    const auto* oa = static_cast<const CipherOperand*>(a.impl_.get());
    const auto* ob = static_cast<const CipherOperand*>(b.impl_.get());
    tensor_acc_term(impl_->acc, *oa, *ob, C);
    ++impl_->terms;
}

Ciphertext CipherDot::finish(const RelinKeys& rk) {
    if (impl_->terms == 0) throw std::logic_error("CipherDot::finish with no terms");
    const Context& C = *impl_->ctx;
    Ciphertext r;
    r.params_fp = C.fp;
    for (auto& comp : impl_->acc) r.polys.push_back(scale_to_base(comp, C));
    impl_->acc.clear();
    impl_->terms = 0;
    return relinearize(r, rk, impl_->ctx);
}

// ---------------------------------------------------------------------------
// Presets

int probe_depth_capacity(const EncryptionParams& params) {
    auto ctx = get_context(params);
    Rng rng(0x5eed5eedULL);
    KeySet ks = keygen(params, rng);
    Plaintext pt;
    pt.poly = RingPoly(params.poly_degree, params.plain_modulus);
    for (auto& c : pt.poly.coeffs) c = rng() % params.plain_modulus;
    Ciphertext ct = encrypt(pt, ks.public_key, ctx, rng);
    if (noise_budget(ct, ks.secret, ctx) <= 0) return -1;  // fresh ct undecryptable
    int depth = 0;
    while (depth < 64) {
        ct = square(ct, ks.relin, ctx);
        // a dense layer multiplies once and then folds a fan-in sum; model
        // the accumulation with a 64-term self-add per level
        for (int d = 0; d < 6; ++d) ct = add(ct, ct);
        if (noise_budget(ct, ks.secret, ctx) <= 0) break;
        ++depth;
    }
    return depth;
}

namespace {

// Prime bit layout summing exactly to `target`, split evenly into primes
// of at most 55 bits so the total never overshoots a security bound.
std::vector<int> chain_bits(int target) {
    int count = (target + 54) / 55;
    std::vector<int> bits(count, target / count);
    for (int i = 0; i < target % count; ++i) ++bits[i];
    return bits;
}

EncryptionParams assemble_params(std::size_t n, int level, int logq_target,
                                 int plain_bits) {
    EncryptionParams p;
    p.poly_degree = n;
    p.security_level = level;
    auto bits = chain_bits(logq_target);
    u64 t = ring::find_ntt_prime(plain_bits, 2 * u64(n), u64(1) << plain_bits);
    auto primes = ring::find_ntt_primes(bits, 2 * u64(n), std::array<u64, 1>{t});
    for (u64 q : primes) p.coeff_modulus.push_back({q, n});
    p.plain_modulus = t;
    return p;
}

}  // namespace

EncryptionParams security_preset(int level, int depth_hint, int plain_bits) {
    if (level != 128 && level != 192 && level != 256)
        throw ParameterError("security level must be 128, 192, or 256 bits, got " +
                             std::to_string(level));
    if (depth_hint < 0 || depth_hint > 64)
        throw ParameterError("depth_hint out of range [0, 64]");
    if (plain_bits < 14 || plain_bits > 60)
        throw ParameterError("plain_bits out of range [14, 60]");

    struct Key {
        int level, depth, plain_bits;
        auto operator<=>(const Key&) const = default;
    };
    static std::mutex mu;
    static std::map<Key, EncryptionParams> cache;
    std::lock_guard lock(mu);
    Key key{level, depth_hint, plain_bits};
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    const double logn_cost = 10.0;  // per-multiply overhead beyond log2(t), rough
    for (std::size_t n : {2048ull, 4096ull, 8192ull, 16384ull, 32768ull}) {
        int maxbits = standard_logq_bound(n, level);
        if (maxbits < plain_bits + 24) continue;
        // Ascending q ladder: smallest modulus first, per the preset contract.
        std::vector<int> rungs;
        for (double f : {0.4, 0.55, 0.7, 0.85, 1.0}) {
            int b = int(maxbits * f);
            if (b >= plain_bits + 24 && (rungs.empty() || b > rungs.back() + 8))
                rungs.push_back(b);
        }
        for (int b : rungs) {
            // Generous analytic estimate; skips only hopeless probes.
            double est = (b - plain_bits - 18.0) /
                         (plain_bits + std::log2(double(n)) / 2.0 + logn_cost - 8.0);
            if (est + 2.0 < depth_hint) continue;
            EncryptionParams cand = assemble_params(n, level, b, plain_bits);
            if (probe_depth_capacity(cand) >= depth_hint) {
                cache[key] = cand;
                return cand;
            }
        }
    }
    throw std::runtime_error("depth unreachable at this level: no bundled preset reaches depth " +
                             std::to_string(depth_hint) + " at " + std::to_string(level) +
                             "-bit security with a " + std::to_string(plain_bits) +
                             "-bit plaintext modulus");
}

// ---------------------------------------------------------------------------
// Serialization

std::vector<std::uint8_t> save_plaintext(const Plaintext& p) {
    serial::Writer w;
    auto s = w.begin_section(kTagPlain, 1);
    write_ring_poly(w, p.poly);
    w.end_section(s);
    return w.take();
}

Plaintext load_plaintext(const std::uint8_t* data, std::size_t len) {
    serial::Reader r(data, len);
    r.expect_section(kTagPlain, "plaintext");
    Plaintext p;
    p.poly = read_ring_poly(r);
    return p;
}

std::vector<std::uint8_t> save_ciphertext(const Ciphertext& ct) {
    serial::Writer w;
    auto s = w.begin_section(kTagCipher, 1);
    w.u64(ct.params_fp);
    w.u64(ct.polys.size());
    for (const auto& p : ct.polys) write_rns_poly(w, p);
    w.end_section(s);
    return w.take();
}

Ciphertext load_ciphertext(const std::uint8_t* data, std::size_t len) {
    serial::Reader r(data, len);
    r.expect_section(kTagCipher, "ciphertext");
    Ciphertext ct;
    ct.params_fp = r.u64();
    std::size_t k = r.u64();
    if (k < 2) throw serial::ParseError("ciphertext has fewer than two polynomials");
    ct.polys.resize(k);
    for (auto& p : ct.polys) p = read_rns_poly(r);
    return ct;
}

std::vector<std::uint8_t> save_secret_key(const SecretKey& sk) {
    serial::Writer w;
    auto s = w.begin_section(kTagSecret, 1);
    w.u64(sk.params_fp);
    write_rns_poly(w, sk.s);
    w.end_section(s);
    return w.take();
}

SecretKey load_secret_key(const std::uint8_t* data, std::size_t len) {
    serial::Reader r(data, len);
    r.expect_section(kTagSecret, "secret key");
    SecretKey sk;
    sk.params_fp = r.u64();
    sk.s = read_rns_poly(r);
    return sk;
}

std::vector<std::uint8_t> save_public_key(const PublicKey& pk) {
    serial::Writer w;
    auto s = w.begin_section(kTagPublic, 1);
    w.u64(pk.params_fp);
    write_rns_poly(w, pk.p0);
    write_rns_poly(w, pk.p1);
    w.end_section(s);
    return w.take();
}

PublicKey load_public_key(const std::uint8_t* data, std::size_t len) {
    serial::Reader r(data, len);
    r.expect_section(kTagPublic, "public key");
    PublicKey pk;
    pk.params_fp = r.u64();
    pk.p0 = read_rns_poly(r);
    pk.p1 = read_rns_poly(r);
    return pk;
}

std::vector<std::uint8_t> save_relin_keys(const RelinKeys& rk) {
    serial::Writer w;
    auto s = w.begin_section(kTagRelin, 1);
    w.u64(rk.params_fp);
    w.u32(std::uint32_t(rk.decomposition_bits));
    w.u64(rk.keys.size());
    for (const auto& k : rk.keys) {
        write_rns_poly(w, k[0]);
        write_rns_poly(w, k[1]);
    }
    w.end_section(s);
    return w.take();
}

RelinKeys load_relin_keys(const std::uint8_t* data, std::size_t len) {
    serial::Reader r(data, len);
    r.expect_section(kTagRelin, "relinearization keys");
    RelinKeys rk;
    rk.params_fp = r.u64();
    rk.decomposition_bits = int(r.u32());
    std::size_t k = r.u64();
    rk.keys.resize(k);
    for (auto& pair : rk.keys) {
        pair[0] = read_rns_poly(r);
        pair[1] = read_rns_poly(r);
    }
    return rk;
}

}  // namespace fhedge::bfv
