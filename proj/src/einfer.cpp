// SPDX-License-Identifier: Apache-2.0

#include "fhedge/einfer.hpp"

#include <chrono>
#include <sstream>

namespace fhedge::einfer {

using Clock = std::chrono::steady_clock;

std::string to_string(InputMode m) {
    return m == InputMode::plaintext_input ? "plain" : "encrypted";
}

InputMode mode_from_string(const std::string& tag) {
    if (tag == "plain") return InputMode::plaintext_input;
    if (tag == "encrypted") return InputMode::encrypted_input;
    throw std::invalid_argument("unknown input mode '" + tag +
                                "' (expected plain|encrypted)");
}

std::string BudgetTrace::to_csv() const {
    std::ostringstream os;
    os << "layer,op_kind,min_budget_bits,elapsed_ms,ciphertext_bytes\n";
    for (const auto& r : rows)
        os << r.layer << ',' << r.op_kind << ',' << r.min_budget_bits << ','
           << r.elapsed_ms << ',' << r.ciphertext_bytes << '\n';
    return os.str();
}

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::size_t total_bytes(const std::vector<bfv::Ciphertext>& cts) {
    std::size_t b = 0;
    for (const auto& ct : cts) b += ct.byte_size();
    return b;
}

int min_budget(const std::vector<bfv::Ciphertext>& cts, const NoiseProbe* probe,
               const bfv::ContextPtr& ctx) {
    if (!probe || !probe->secret) return -1;
    int b = std::numeric_limits<int>::max();
    for (const auto& ct : cts)
        b = std::min(b, bfv::noise_budget(ct, *probe->secret, ctx));
    return b;
}

}  // namespace

EncryptedActivations encrypt_input(const std::vector<std::vector<double>>& batch,
                                   const encode::FixedPointCodec& codec, int input_power,
                                   const bfv::PublicKey& pk, const bfv::ContextPtr& ctx,
                                   ring::Rng& rng) {
    const auto& params = bfv::context_params(ctx);
    if (batch.empty()) throw std::invalid_argument("empty batch");
    if (batch.size() > params.poly_degree)
        throw std::invalid_argument("batch of " + std::to_string(batch.size()) +
                                    " exceeds the slot count " +
                                    std::to_string(params.poly_degree));
    const std::size_t features = batch[0].size();
    // quantize everything first so an out-of-range feature encrypts nothing
    std::vector<std::vector<u64>> slots(features, std::vector<u64>(batch.size()));
    for (std::size_t j = 0; j < batch.size(); ++j) {
        if (batch[j].size() != features)
            throw std::invalid_argument("ragged batch rows");
        for (std::size_t f = 0; f < features; ++f)
            slots[f][j] = encode::to_slot(
                encode::quantize_value(batch[j][f], codec, input_power),
                codec.plain_modulus);
    }
    EncryptedActivations out;
    out.scale = ScaleState{input_power};
    out.units.reserve(features);
    for (std::size_t f = 0; f < features; ++f)
        out.units.push_back(
            bfv::encrypt(encode::batch_encode(slots[f], ctx), pk, ctx, rng));
    return out;
}

EncryptedActivations eval_dense(const protect::ProtectedLayer& layer,
                                const std::vector<bfv::Plaintext>& acts_plain,
                                ScaleState scale, const bfv::ContextPtr& ctx) {
    if (!layer.encrypted)
        throw std::invalid_argument("eval_dense: layer parameters are not encrypted");
    if (acts_plain.size() != layer.in_dim)
        throw std::invalid_argument("eval_dense: activation count != layer fan-in");
    if (scale.power != layer.plan.input_power)
        throw encode::ScaleMismatch("eval_dense: activations at power " +
                                    std::to_string(scale.power) + ", plan expects " +
                                    std::to_string(layer.plan.input_power));
    std::vector<bfv::PreparedPlain> prepared;
    prepared.reserve(layer.in_dim);
    for (const auto& pt : acts_plain) prepared.push_back(bfv::prepare_plain(pt, ctx));

    EncryptedActivations out;
    out.scale = compose_scales(encode::ScaleOp::mul, scale, ScaleState{1});
    out.units.reserve(layer.out_dim);
    for (std::size_t k = 0; k < layer.out_dim; ++k) {
        bfv::PlainDot dot(ctx);
        for (std::size_t l = 0; l < layer.in_dim; ++l)
            dot.accumulate(layer.enc_weights[k * layer.in_dim + l], prepared[l]);
        bfv::Ciphertext z = dot.finish();
        out.units.push_back(bfv::add(z, layer.enc_bias[k]));  // bias at output power
    }
    return out;
}

EncryptedActivations eval_dense(const protect::ProtectedLayer& layer,
                                const EncryptedActivations& acts,
                                const bfv::RelinKeys& rk, const bfv::ContextPtr& ctx) {
    if (!layer.encrypted)
        throw std::invalid_argument("eval_dense: layer parameters are not encrypted");
    if (acts.units.size() != layer.in_dim)
        throw std::invalid_argument("eval_dense: activation count != layer fan-in");
    if (acts.scale.power != layer.plan.input_power)
        throw encode::ScaleMismatch("eval_dense: activations at power " +
                                    std::to_string(acts.scale.power) +
                                    ", plan expects " +
                                    std::to_string(layer.plan.input_power));
    std::vector<bfv::PreparedCipher> prepared;
    prepared.reserve(layer.in_dim);
    for (const auto& ct : acts.units) prepared.push_back(bfv::prepare_cipher(ct, ctx));

    EncryptedActivations out;
    out.scale = compose_scales(encode::ScaleOp::mul, acts.scale, ScaleState{1});
    out.units.reserve(layer.out_dim);
    for (std::size_t k = 0; k < layer.out_dim; ++k) {
        bfv::CipherDot dot(ctx);
        for (std::size_t l = 0; l < layer.in_dim; ++l)
            dot.accumulate(bfv::prepare_cipher(layer.enc_weights[k * layer.in_dim + l], ctx),
                           prepared[l]);
        bfv::Ciphertext z = dot.finish(rk);
        out.units.push_back(bfv::add(z, layer.enc_bias[k]));
    }
    return out;
}

EncryptedActivations eval_square_plus_two(const EncryptedActivations& acts,
                                          const bfv::RelinKeys& rk,
                                          const encode::FixedPointCodec& codec,
                                          const bfv::ContextPtr& ctx) {
    const int k = acts.scale.power;
    // 2 * Delta^k; the scale guard doubles as the overflow pre-flight
    u64 factor = encode::scale_factor(codec, k);
    if (factor >= (u64(1) << 62))
        throw encode::RangeError("square_plus_two scalar overflows at power " +
                                 std::to_string(k));
    EncryptedActivations out;
    out.scale = ScaleState{2 * k};
    out.units.reserve(acts.units.size());
    for (const auto& ct : acts.units) {
        bfv::Ciphertext sq = bfv::square(ct, rk, ctx);
        bfv::Ciphertext lin = bfv::multiply_scalar(ct, std::int64_t(2 * factor), ctx);
        out.units.push_back(bfv::add(sq, lin));
    }
    return out;
}

int required_depth(const protect::ProtectedModel& model, InputMode) {
    int depth = 0;
    for (const auto& l : model.layers) {
        if (!l.encrypted) continue;
        depth += 1;  // dense product
        if (l.activation == nn::ActivationKind::square_plus_two) depth += 1;
    }
    return depth;
}

InferenceResult run_inference(const protect::DeploymentPackage& pkg,
                              const std::vector<std::vector<double>>& batch,
                              InputMode mode, ring::Rng& rng, const NoiseProbe* probe) {
    auto ctx = bfv::get_context(pkg.params);
    const auto& model = pkg.model;
    const u64 t = pkg.params.plain_modulus;
    if (model.params_fp != bfv::params_fingerprint(pkg.params))
        throw std::invalid_argument("malformed package: params fingerprint mismatch");
    if (model.codec.plain_modulus != t)
        throw std::invalid_argument("malformed package: codec modulus != scheme t");
    if (batch.empty() || batch.size() > pkg.params.poly_degree)
        throw std::invalid_argument("batch size out of range [1, slot_count]");
    for (const auto& row : batch)
        if (row.size() != model.input_dim)
            throw std::invalid_argument("feature vector length != model input dim");

    InferenceResult res;
    res.batch_size = batch.size();

    // quantize the whole batch up front; overflow aborts before any crypto
    std::vector<std::vector<u64>> slots(model.input_dim,
                                        std::vector<u64>(batch.size()));
    for (std::size_t j = 0; j < batch.size(); ++j)
        for (std::size_t f = 0; f < model.input_dim; ++f)
            slots[f][j] = encode::to_slot(
                encode::quantize_value(batch[j][f], model.codec, model.input_power), t);

    int power = model.input_power;
    std::size_t li = 0;

    // clear prefix: the plaintext integer engine, identical to the oracle
    for (; li < model.layers.size() && !model.layers[li].encrypted; ++li) {
        const auto& l = model.layers[li];
        auto t0 = Clock::now();
        if (power != l.plan.input_power)
            throw encode::ScaleMismatch("clear layer scale plan violated");
        std::vector<std::vector<u64>> z(l.out_dim, std::vector<u64>(batch.size()));
        for (std::size_t k = 0; k < l.out_dim; ++k) {
            u64 b = encode::to_slot(l.clear_bias[k] % ring::i64(t), t);
            for (std::size_t j = 0; j < batch.size(); ++j) {
                u64 acc = b;
                for (std::size_t f = 0; f < l.in_dim; ++f) {
                    u64 w = encode::to_slot(l.clear_weights[k * l.in_dim + f] % ring::i64(t), t);
                    acc = ring::add_mod(acc, ring::mul_mod(w, slots[f][j], t), t);
                }
                z[k][j] = acc;
            }
        }
        power += 1;
        switch (l.activation) {
            case nn::ActivationKind::none:
                break;
            case nn::ActivationKind::relu:
                for (auto& row : z)
                    for (auto& v : row) {
                        ring::i64 c = encode::from_slot(v, t);
                        v = encode::to_slot(c > 0 ? c : 0, t);
                    }
                break;
            case nn::ActivationKind::square_plus_two: {
                u64 factor =
                    u64((ring::u128(2) * encode::scale_factor(model.codec, power)) % t);
                for (auto& row : z)
                    for (auto& v : row)
                        v = ring::add_mod(ring::mul_mod(v, v, t),
                                          ring::mul_mod(factor, v, t), t);
                power *= 2;
                break;
            }
        }
        slots = std::move(z);
        res.trace.rows.push_back({"layer" + std::to_string(li), "clear_dense", -1,
                                  ms_since(t0), 0});
    }

    if (li == model.layers.size())
        throw std::invalid_argument("package has no encrypted layer");

    // boundary: activations enter the in-scope region
    EncryptedActivations acts;
    std::vector<bfv::Plaintext> acts_plain;
    bool plain_stage = mode == InputMode::plaintext_input;
    {
        auto t0 = Clock::now();
        if (plain_stage) {
            for (const auto& s : slots) acts_plain.push_back(encode::batch_encode(s, ctx));
            res.trace.rows.push_back({"input", "batch_encode", -1, ms_since(t0), 0});
        } else {
            acts.scale = ScaleState{power};
            for (const auto& s : slots)
                acts.units.push_back(
                    bfv::encrypt(encode::batch_encode(s, ctx), pkg.public_key, ctx, rng));
            res.trace.rows.push_back({"input", "encrypt_input",
                                      min_budget(acts.units, probe, ctx), ms_since(t0),
                                      total_bytes(acts.units)});
        }
    }

    for (; li < model.layers.size(); ++li) {
        const auto& l = model.layers[li];
        if (!l.encrypted)
            throw std::invalid_argument(
                "malformed package: clear layer after encrypted layers");
        auto t0 = Clock::now();
        EncryptedActivations z;
        if (plain_stage) {
            z = eval_dense(l, acts_plain, ScaleState{power}, ctx);
            acts_plain.clear();
            plain_stage = false;
        } else {
            z = eval_dense(l, acts, pkg.relin, ctx);
        }
        power = z.scale.power;
        res.trace.rows.push_back({"layer" + std::to_string(li), "enc_dense",
                                  min_budget(z.units, probe, ctx), ms_since(t0),
                                  total_bytes(z.units)});
        if (l.activation == nn::ActivationKind::square_plus_two) {
            auto t1 = Clock::now();
            z = eval_square_plus_two(z, pkg.relin, model.codec, ctx);
            power = z.scale.power;
            res.trace.rows.push_back({"layer" + std::to_string(li), "square_plus_two",
                                      min_budget(z.units, probe, ctx), ms_since(t1),
                                      total_bytes(z.units)});
        } else if (l.activation == nn::ActivationKind::relu) {
            throw std::invalid_argument("malformed package: relu inside encrypted scope");
        }
        z.layer_index = int(li);
        acts = std::move(z);
    }

    res.logits = std::move(acts.units);
    res.scale = ScaleState{power};
    if (probe && probe->secret) {
        int fb = min_budget(res.logits, probe, ctx);
        res.trace.budget_exhausted = fb <= 0;
        if (res.trace.budget_exhausted)
            res.trace.warning =
                "noise budget exhausted; decrypted output is not trustworthy";
    }
    return res;
}

DecryptedOutput decrypt_output(const InferenceResult& result, const bfv::SecretKey& sk,
                               const encode::FixedPointCodec& codec,
                               const bfv::ContextPtr& ctx) {
    const u64 t = bfv::context_params(ctx).plain_modulus;
    DecryptedOutput out;
    out.final_budget_bits = std::numeric_limits<int>::max();
    std::vector<std::vector<u64>> slots;  // per class
    for (const auto& ct : result.logits) {
        out.final_budget_bits =
            std::min(out.final_budget_bits, bfv::noise_budget(ct, sk, ctx));
        slots.push_back(encode::batch_decode(bfv::decrypt(ct, sk, ctx), ctx));
    }
    const u64 f = encode::scale_factor(codec, result.scale.power);
    out.logits.resize(result.batch_size);
    out.predicted.resize(result.batch_size);
    for (std::size_t j = 0; j < result.batch_size; ++j) {
        out.logits[j].resize(slots.size());
        for (std::size_t c = 0; c < slots.size(); ++c)
            out.logits[j][c] =
                double(encode::from_slot(slots[c][j], t)) / double(f);
        out.predicted[j] = nn::argmax(out.logits[j]);
    }
    return out;
}

}  // namespace fhedge::einfer
