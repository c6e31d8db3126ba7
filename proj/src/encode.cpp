// SPDX-License-Identifier: Apache-2.0

#include "fhedge/encode.hpp"

#include <bit>
#include <cmath>
#include <string>

namespace fhedge::encode {

BatchLayout layout_of(const bfv::ContextPtr& ctx) {
    const auto& p = bfv::context_params(ctx);
    return {p.poly_degree, p.plain_modulus};
}

ScaleState compose_scales(ScaleOp op, ScaleState a, ScaleState b) {
    if (op == ScaleOp::add) {
        if (a.power != b.power)
            throw ScaleMismatch("scale mismatch: cannot add power " +
                                std::to_string(a.power) + " to power " +
                                std::to_string(b.power) + "; re-encode one operand");
        return a;
    }
    return ScaleState{a.power + b.power};
}

u64 scale_factor(const FixedPointCodec& codec, int power) {
    if (codec.scale < 2 || !std::has_single_bit(codec.scale))
        throw std::invalid_argument("codec scale must be a power of two >= 2");
    if (power < 0) throw std::invalid_argument("scale power must be non-negative");
    int bits = std::countr_zero(codec.scale) * power;
    if (bits >= 63)
        throw RangeError("scale factor Delta^" + std::to_string(power) +
                         " overflows 63 bits");
    return u64(1) << bits;
}

u64 to_slot(i64 v, u64 t) { return v < 0 ? t - u64(-v) : u64(v); }

i64 from_slot(u64 slot, u64 t) {
    return slot > t / 2 ? -i64(t - slot) : i64(slot);
}

i64 quantize_value(double x, const FixedPointCodec& codec, int power) {
    const u64 f = scale_factor(codec, power);
    const u64 t = codec.plain_modulus;
    double scaled = x * double(f);
    if (!std::isfinite(scaled))
        throw RangeError("non-finite value in fixed-point encoding");
    i64 v = ring::round_half_away(scaled);
    if (2 * std::abs((double)v) >= double(t))
        throw RangeError("quantization overflow: |" + std::to_string(x) +
                         "| * Delta^" + std::to_string(power) +
                         " reaches t/2; increase t or lower the scale");
    return v;
}

std::vector<u64> fix_encode(std::span<const double> x, const FixedPointCodec& codec,
                            int power) {
    std::vector<u64> slots(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        slots[i] = to_slot(quantize_value(x[i], codec, power), codec.plain_modulus);
    return slots;
}

std::vector<double> fix_decode(std::span<const u64> slots, const FixedPointCodec& codec,
                               ScaleState state) {
    const u64 f = scale_factor(codec, state.power);
    std::vector<double> out(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i)
        out[i] = double(from_slot(slots[i], codec.plain_modulus)) / double(f);
    return out;
}

bfv::Plaintext batch_encode(std::span<const u64> values, const bfv::ContextPtr& ctx) {
    const auto& tables = bfv::plain_ntt_tables(ctx);
    const auto& params = bfv::context_params(ctx);
    if (values.size() > params.poly_degree)
        throw std::invalid_argument("batch_encode: more values than slots");
    bfv::Plaintext pt;
    pt.poly = ring::RingPoly(params.poly_degree, params.plain_modulus,
                             ring::Domain::evaluation);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] >= params.plain_modulus)
            throw RangeError("batch_encode: slot value >= t");
        pt.poly.coeffs[i] = values[i];
    }
    ring::ntt_inverse_inplace(pt.poly, tables);
    return pt;
}

std::vector<u64> batch_decode(const bfv::Plaintext& pt, const bfv::ContextPtr& ctx) {
    const auto& tables = bfv::plain_ntt_tables(ctx);
    ring::RingPoly p = pt.poly;
    ring::ntt_forward_inplace(p, tables);
    return std::move(p.coeffs);
}

bfv::Plaintext encode_replicated(u64 value, const bfv::ContextPtr& ctx) {
    const auto& params = bfv::context_params(ctx);
    if (value >= params.plain_modulus)
        throw RangeError("encode_replicated: value >= t");
    // The inverse slot transform of a constant vector is the constant
    // polynomial, so skip the NTT outright.
    bfv::Plaintext pt;
    pt.poly = ring::RingPoly(params.poly_degree, params.plain_modulus);
    pt.poly.coeffs[0] = value;
    return pt;
}

}  // namespace fhedge::encode
