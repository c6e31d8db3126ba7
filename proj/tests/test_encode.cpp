// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fhedge/encode.hpp"

using namespace fhedge;
using namespace fhedge::encode;
using bfv::EncryptionParams;
using bfv::Rng;
using ring::u64;

namespace {

EncryptionParams small_params(std::size_t n = 1024, int qbits = 120, int tbits = 24) {
    EncryptionParams p;
    p.poly_degree = n;
    p.security_level = 0;
    std::vector<int> bits;
    int left = qbits;
    while (left > 0) {
        int take = std::min(left, 55);
        if (take < 20) take = 20;
        bits.push_back(take);
        left -= take;
    }
    u64 t = ring::find_ntt_prime(tbits, 2 * n, u64(1) << tbits);
    auto primes = ring::find_ntt_primes(bits, 2 * n, std::array<u64, 1>{t});
    for (u64 q : primes) p.coeff_modulus.push_back({q, n});
    p.plain_modulus = t;
    return p;
}

}  // namespace

TEST_CASE("batch encode/decode roundtrips") {
    auto p = small_params();
    auto ctx = bfv::get_context(p);

    std::vector<u64> zeros(p.poly_degree, 0);
    CHECK(batch_decode(batch_encode(zeros, ctx), ctx) == zeros);

    std::vector<u64> onehot(p.poly_degree, 0);
    onehot[17] = 1;
    CHECK(batch_decode(batch_encode(onehot, ctx), ctx) == onehot);

    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<u64> v(p.poly_degree);
        for (auto& x : v) x = rng() % p.plain_modulus;
        CHECK(batch_decode(batch_encode(v, ctx), ctx) == v);
    }
}

TEST_CASE("short vectors are zero padded; out-of-range values rejected") {
    auto p = small_params();
    auto ctx = bfv::get_context(p);
    std::vector<u64> v{1, 2, 3};
    auto slots = batch_decode(batch_encode(v, ctx), ctx);
    CHECK(slots[0] == 1);
    CHECK(slots[2] == 3);
    CHECK(slots[3] == 0);
    CHECK(slots.back() == 0);

    std::vector<u64> bad{p.plain_modulus};
    CHECK_THROWS_AS(batch_encode(bad, ctx), RangeError);
}

TEST_CASE("replicated constant encodes to the constant polynomial") {
    auto p = small_params();
    auto ctx = bfv::get_context(p);
    auto pt = encode_replicated(42, ctx);
    CHECK(pt.poly.coeffs[0] == 42);
    for (std::size_t i = 1; i < p.poly_degree; ++i) CHECK(pt.poly.coeffs[i] == 0);
    auto slots = batch_decode(pt, ctx);
    for (u64 s : slots) CHECK(s == 42);
}

TEST_CASE("slot semantics survive encryption: slot-wise add and multiply") {
    auto p = small_params();
    auto ctx = bfv::get_context(p);
    Rng rng(7);
    auto ks = bfv::keygen(p, rng);
    const u64 t = p.plain_modulus;

    for (int trial = 0; trial < 3; ++trial) {
        std::vector<u64> u(p.poly_degree), v(p.poly_degree);
        for (auto& x : u) x = rng() % t;
        for (auto& x : v) x = rng() % t;
        auto cu = bfv::encrypt(batch_encode(u, ctx), ks.public_key, ctx, rng);
        auto cv = bfv::encrypt(batch_encode(v, ctx), ks.public_key, ctx, rng);

        auto sum = batch_decode(bfv::decrypt(bfv::add(cu, cv), ks.secret, ctx), ctx);
        auto prod = batch_decode(
            bfv::decrypt(bfv::multiply(cu, cv, ks.relin, ctx), ks.secret, ctx), ctx);
        for (std::size_t j = 0; j < p.poly_degree; ++j) {
            CHECK(sum[j] == (u[j] + v[j]) % t);
            CHECK(prod[j] == ring::mul_mod(u[j], v[j], t));
        }
    }
}

TEST_CASE("fixed point: spec values") {
    FixedPointCodec codec{1024, small_params().plain_modulus};
    CHECK(quantize_value(0.5, codec, 1) == 512);
    CHECK(to_slot(quantize_value(-0.5, codec, 1), codec.plain_modulus) ==
          codec.plain_modulus - 512);
    // slot value t-1 at power 1 decodes to -1/Delta
    std::vector<u64> slots{codec.plain_modulus - 1};
    auto out = fix_decode(slots, codec, ScaleState{1});
    CHECK(out[0] == doctest::Approx(-1.0 / 1024));
    // zero slots decode to zero
    std::vector<u64> z{0, 0, 0};
    for (double v : fix_decode(z, codec, ScaleState{2})) CHECK(v == 0.0);
}

TEST_CASE("fixed point roundtrip error bounded by 1/(2 Delta^k)") {
    auto p = small_params();
    FixedPointCodec codec{1024, p.plain_modulus};
    Rng rng(11);
    for (int k : {1, 2}) {
        double bound = double(p.plain_modulus) / (2.0 * double(scale_factor(codec, k)));
        for (int trial = 0; trial < 1000; ++trial) {
            double x = (double(rng() % 200000) / 100000.0 - 1.0) * (bound * 0.99);
            std::array<double, 1> in{x};
            auto slots = fix_encode(in, codec, k);
            double back = fix_decode(slots, codec, ScaleState{k})[0];
            CHECK(std::abs(back - x) <= 1.0 / (2.0 * double(scale_factor(codec, k))) +
                                            1e-12);
        }
    }
}

TEST_CASE("quantization overflow raises, never wraps") {
    auto p = small_params();
    FixedPointCodec codec{1024, p.plain_modulus};
    double too_big = double(p.plain_modulus) / 2.0 / 1024.0 + 1.0;
    CHECK_THROWS_AS(quantize_value(too_big, codec, 1), RangeError);
    CHECK_THROWS_AS(quantize_value(0.5, codec, 7), RangeError);  // Delta^7 > t/2 range
    CHECK_THROWS_AS(scale_factor(codec, 7), RangeError);
}

TEST_CASE("scale composition rules") {
    ScaleState k1{1}, k2{2};
    CHECK(compose_scales(ScaleOp::add, k2, k2).power == 2);
    CHECK(compose_scales(ScaleOp::mul, k1, k1).power == 2);
    CHECK(compose_scales(ScaleOp::mul, k1, k2).power == 3);
    CHECK_THROWS_AS(compose_scales(ScaleOp::add, k1, k2), ScaleMismatch);
}
