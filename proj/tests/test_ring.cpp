// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fhedge/ring.hpp"

using namespace fhedge::ring;

TEST_CASE("ntt prime search honors the congruence") {
    u64 p = find_ntt_prime(20, 2 * 8, u64(1) << 20);
    CHECK(is_prime(p));
    CHECK(p % 16 == 1);
    auto ps = find_ntt_primes(std::array{30, 30, 30}, 2 * 4096);
    CHECK(ps.size() == 3);
    CHECK(ps[0] != ps[1]);
    CHECK(ps[1] != ps[2]);
    for (u64 q : ps) CHECK(q % 8192 == 1);
}

TEST_CASE("tables rejected for incompatible modulus") {
    CHECK_THROWS(NttTables::create(8, 19));  // 19 != 1 mod 16
}

TEST_CASE("ntt roundtrip identity, n=8 q=17") {
    auto t = NttTables::create(8, 17);
    CHECK(pow_mod(t.root, 16, 17) == 1);
    CHECK(pow_mod(t.root, 8, 17) == 16);
    Rng rng(123);
    for (int trial = 0; trial < 1000; ++trial) {
        RingPoly p = sample_uniform(17, 8, rng);
        RingPoly q = ntt_inverse(ntt_forward(p, t), t);
        CHECK(q.coeffs == p.coeffs);
    }
}

TEST_CASE("ntt of zero and constants") {
    u64 q = find_ntt_prime(28, 2 * 16, u64(1) << 28);
    auto t = NttTables::create(16, q);
    RingPoly z(16, q);
    CHECK(ntt_forward(z, t).is_zero());
    RingPoly c(16, q);
    c.coeffs[0] = 7;
    RingPoly e = ntt_forward(c, t);
    for (u64 v : e.coeffs) CHECK(v == 7);  // constant evaluates to itself everywhere
    CHECK(ntt_inverse(e, t).coeffs == c.coeffs);
}

TEST_CASE("negacyclic wraparound: x^3 * x = -1 at n=4") {
    u64 q = find_ntt_prime(20, 2 * 4, u64(1) << 20);
    auto t = NttTables::create(4, q);
    RingPoly a(4, q), b(4, q);
    a.coeffs[3] = 1;
    b.coeffs[1] = 1;
    RingPoly r = poly_mul(a, b, t);
    CHECK(r.coeffs[0] == q - 1);
    CHECK(r.coeffs[1] == 0);
    CHECK(r.coeffs[2] == 0);
    CHECK(r.coeffs[3] == 0);
    CHECK(schoolbook_mul(a, b).coeffs == r.coeffs);
}

TEST_CASE("(1+x)^2 = 1+2x+x^2 at n=4, q=17") {
    // 17 = 1 mod 8, so the n=4 tables exist
    auto t = NttTables::create(4, 17);
    RingPoly a(4, 17);
    a.coeffs[0] = 1;
    a.coeffs[1] = 1;
    RingPoly r = poly_mul(a, a, t);
    CHECK(r.coeffs == std::vector<u64>{1, 2, 1, 0});
}

TEST_CASE("poly_mul equals schoolbook oracle, 500 random pairs per degree") {
    Rng rng(2024);
    for (std::size_t n : {4, 8, 16, 32}) {
        u64 q = find_ntt_prime(40, 2 * n, u64(1) << 40);
        auto t = NttTables::create(n, q);
        for (int trial = 0; trial < 500; ++trial) {
            RingPoly a = sample_uniform(q, n, rng);
            RingPoly b = sample_uniform(q, n, rng);
            CHECK(poly_mul(a, b, t).coeffs == schoolbook_mul(a, b).coeffs);
        }
    }
}

TEST_CASE("ring axioms on random samples") {
    Rng rng(7);
    const std::size_t n = 16;
    u64 q = find_ntt_prime(30, 2 * n, u64(1) << 30);
    auto t = NttTables::create(n, q);
    for (int trial = 0; trial < 50; ++trial) {
        RingPoly a = sample_uniform(q, n, rng);
        RingPoly b = sample_uniform(q, n, rng);
        RingPoly c = sample_uniform(q, n, rng);
        CHECK(poly_mul(a, b, t).coeffs == poly_mul(b, a, t).coeffs);
        RingPoly lhs = poly_mul(a, poly_add(b, c), t);
        RingPoly rhs = poly_add(poly_mul(a, b, t), poly_mul(a, c, t));
        CHECK(lhs.coeffs == rhs.coeffs);
    }
}

TEST_CASE("ternary sampler support and determinism") {
    Rng rng(42);
    u64 q = 97 * 2 + 1;  // any modulus works here
    q = 195;             // not prime; ternary only needs q for the -1 image
    RingPoly p = sample_ternary(q, 256, rng);
    for (u64 c : p.coeffs) CHECK((c == 0 || c == 1 || c == q - 1));
    Rng r1(5), r2(5);
    CHECK(sample_ternary(q, 64, r1).coeffs == sample_ternary(q, 64, r2).coeffs);
}

TEST_CASE("gaussian sampler stddev within 2% of sigma") {
    Rng rng(99);
    const double sigma = 3.2;
    u64 q = u64(1) << 40;
    q = find_ntt_prime(40, 2, u64(1) << 40);
    double sum_sq = 0;
    const int draws = 1'000'000;
    const int per_poly = 4096;
    for (int i = 0; i < draws / per_poly; ++i) {
        RingPoly p = sample_gaussian(q, per_poly, sigma, rng);
        for (u64 c : p.coeffs) {
            double v = c > q / 2 ? -double(q - c) : double(c);
            sum_sq += v * v;
        }
    }
    double sd = std::sqrt(sum_sq / (double(draws / per_poly) * per_poly));
    CHECK(sd == doctest::Approx(sigma).epsilon(0.02));
}

TEST_CASE("uniform sampler reproducible under fixed seed") {
    u64 q = find_ntt_prime(50, 2 * 8, u64(1) << 50);
    Rng r1(11), r2(11);
    CHECK(sample_uniform(q, 128, r1).coeffs == sample_uniform(q, 128, r2).coeffs);
}

TEST_CASE("round_half_away ties go away from zero") {
    CHECK(round_half_away(0.5) == 1);
    CHECK(round_half_away(-0.5) == -1);
    CHECK(round_half_away(2.5) == 3);
    CHECK(round_half_away(-2.5) == -3);
    CHECK(round_half_away(0.49) == 0);
}

TEST_CASE("crt reconstruct/reduce roundtrip with centering") {
    auto primes = find_ntt_primes(std::array{59, 60, 61}, 2 * 8);
    CrtBasis basis(primes);
    Rng rng(31337);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<u64> res(primes.size());
        for (std::size_t i = 0; i < primes.size(); ++i) res[i] = rng() % primes[i];
        WideInt x = basis.reconstruct_centered(res);
        for (std::size_t i = 0; i < primes.size(); ++i)
            CHECK(CrtBasis::reduce(x, primes[i]) == res[i]);
    }
    // known small case: residues of -5 stay -5 after centering
    std::vector<u64> res;
    for (u64 p : primes) res.push_back(p - 5);
    WideInt m5 = basis.reconstruct_centered(res);
    CHECK(m5.neg);
    CHECK(m5.len == 1);
    CHECK(m5.w[0] == 5);
}

TEST_CASE("wide int helpers") {
    WideInt a;
    a.len = 1;
    a.w[0] = ~u64(0);
    WideInt acc;
    wide_add_mul_word(acc, a, ~u64(0));  // (2^64-1)^2
    CHECK(acc.len == 2);
    CHECK(acc.w[0] == 1);
    CHECK(acc.w[1] == ~u64(0) - 1);
    CHECK(wide_bit_length(acc) == 128);
    WideInt d = wide_sub_mag(acc, a);
    // (2^64-1)^2 - (2^64-1) = (2^64-1)(2^64-2)
    WideInt e;
    wide_add_mul_word(e, a, ~u64(0) - 1);
    CHECK(wide_cmp_mag(d, e) == 0);
}
