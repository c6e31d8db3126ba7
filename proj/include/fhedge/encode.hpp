// SPDX-License-Identifier: Apache-2.0
//
// Bridges real-valued network data and Z_t plaintexts: SIMD batch encoding
// across the n slots of the plaintext ring (t = 1 mod 2n splits it into n
// independent Z_t values) and fixed-point scaling for reals.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "fhedge/bfv.hpp"

namespace fhedge::encode {

using ring::i64;
using ring::u64;

// Raised when a value cannot be represented at the requested scale; nothing
// ever wraps around silently.
class RangeError : public std::range_error {
  public:
    using std::range_error::range_error;
};

class ScaleMismatch : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

struct BatchLayout {
    std::size_t slot_count = 0;
    u64 plain_modulus = 0;
};

BatchLayout layout_of(const bfv::ContextPtr& ctx);

// Fixed-point codec: reals scale by Delta^k (Delta a power of two >= 2).
struct FixedPointCodec {
    u64 scale = 1024;  // Delta
    u64 plain_modulus = 0;

    bool operator==(const FixedPointCodec&) const = default;
};

// Scale bookkeeping: a value at power k carries a factor Delta^k.
struct ScaleState {
    int power = 1;

    bool operator==(const ScaleState&) const = default;
};

enum class ScaleOp { add, mul };

// add requires equal powers; mul sums them.
ScaleState compose_scales(ScaleOp op, ScaleState a, ScaleState b);

// Delta^k, guarded against 64-bit overflow.
u64 scale_factor(const FixedPointCodec& codec, int power);

// Signed fixed-point quantity <-> Z_t slot value (negatives in [t/2, t)).
u64 to_slot(i64 v, u64 t);
i64 from_slot(u64 slot, u64 t);

// round(Delta^k * x), range-checked against (-t/2, t/2).
i64 quantize_value(double x, const FixedPointCodec& codec, int power);

std::vector<u64> fix_encode(std::span<const double> x, const FixedPointCodec& codec,
                            int power = 1);
std::vector<double> fix_decode(std::span<const u64> slots, const FixedPointCodec& codec,
                               ScaleState state);

// Slot vector <-> plaintext polynomial. Values must be in [0, t); shorter
// vectors are zero-padded to the slot count.
bfv::Plaintext batch_encode(std::span<const u64> values, const bfv::ContextPtr& ctx);
std::vector<u64> batch_decode(const bfv::Plaintext& pt, const bfv::ContextPtr& ctx);

// Constant vector shortcut: every slot carries the same value.
bfv::Plaintext encode_replicated(u64 value, const bfv::ContextPtr& ctx);

}  // namespace fhedge::encode
