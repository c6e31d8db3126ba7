// SPDX-License-Identifier: Apache-2.0

#include "fhedge/bench.hpp"

#include <sys/utsname.h>

#include <chrono>
#include <future>
#include <map>
#include <sstream>

namespace fhedge::bench {

using Clock = std::chrono::steady_clock;
using einfer::InputMode;
using protect::EncryptionScope;

std::string to_string(Variant v) {
    switch (v) {
        case Variant::last_layer: return "last_layer";
        case Variant::full_no_act: return "full_no_act";
        case Variant::full_square2x: return "full_square2x";
    }
    throw std::logic_error("unknown variant");
}

Variant variant_from_string(const std::string& tag) {
    if (tag == "last_layer") return Variant::last_layer;
    if (tag == "full_no_act") return Variant::full_no_act;
    if (tag == "full_square2x") return Variant::full_square2x;
    throw std::invalid_argument("unknown bench variant '" + tag + "'");
}

u64 config_hash(const BenchConfig& cfg) {
    std::ostringstream os;
    os << cfg.dataset_csv << '|' << cfg.feature_scale << '|' << cfg.hidden << '|'
       << cfg.runs << '|' << cfg.batch << '|' << cfg.epochs << '|' << cfg.learning_rate
       << '|' << cfg.seed << '|' << cfg.depth_margin << '|' << cfg.delta_last << '|'
       << cfg.delta_no_act << '|' << cfg.delta_square;
    for (int l : cfg.levels) os << '|' << l;
    for (Variant v : cfg.variants) os << '|' << to_string(v);
    u64 h = 0xcbf29ce484222325ull;
    for (char c : os.str()) {
        h ^= std::uint8_t(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string BenchReport::to_csv() const {
    std::ostringstream os;
    os << "variant,level,mode,stage,time_s_mean,bytes_mean,budget_bits_mean,runs,correct\n";
    for (const auto& c : cells)
        os << to_string(c.variant) << ',' << c.level << ',' << c.mode << ',' << c.stage
           << ',' << c.time_s_mean << ',' << c.bytes_mean << ',' << c.budget_bits_mean
           << ',' << c.runs << ',' << (c.correct ? "true" : "false") << '\n';
    return os.str();
}

const BenchCell* BenchReport::find(Variant v, int level, const std::string& mode,
                                   const std::string& stage) const {
    for (const auto& c : cells)
        if (c.variant == v && c.level == level && c.mode == mode && c.stage == stage)
            return &c;
    return nullptr;
}

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

nn::ActivationKind variant_activation(Variant v) {
    switch (v) {
        case Variant::last_layer: return nn::ActivationKind::relu;
        case Variant::full_no_act: return nn::ActivationKind::none;
        case Variant::full_square2x: return nn::ActivationKind::square_plus_two;
    }
    throw std::logic_error("unknown variant");
}

EncryptionScope variant_scope(Variant v) {
    return v == Variant::last_layer ? EncryptionScope::last_layer_only
                                    : EncryptionScope::full_classifier;
}

u64 variant_delta(const BenchConfig& cfg, Variant v) {
    switch (v) {
        case Variant::last_layer: return cfg.delta_last;
        case Variant::full_no_act: return cfg.delta_no_act;
        case Variant::full_square2x: return cfg.delta_square;
    }
    throw std::logic_error("unknown variant");
}

}  // namespace

PipelineSetup plan_pipeline(const nn::ModelSpec& model, EncryptionScope scope, int level,
                            u64 delta, int depth_margin) {
    // provisional quantization against a roomy modulus to measure the bound
    u64 huge_t = ring::find_ntt_prime(61, 2, u64(1) << 61);
    nn::QuantizedModel provisional =
        nn::quantize(model, encode::FixedPointCodec{delta, huge_t});
    int plain_bits = std::clamp(nn::required_plain_bits(provisional, 1.0) + 1, 15, 60);

    int depth = 0;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        bool in_scope =
            scope == EncryptionScope::full_classifier || li + 1 == model.layers.size();
        if (!in_scope) continue;
        depth += 1;
        if (model.layers[li].activation == nn::ActivationKind::square_plus_two)
            depth += 1;
    }

    PipelineSetup setup;
    setup.scope = scope;
    setup.params = bfv::security_preset(level, depth + depth_margin, plain_bits);
    setup.qmodel =
        nn::quantize(model, encode::FixedPointCodec{delta, setup.params.plain_modulus});
    return setup;
}

ModelEncryptionReport encryption_report(const nn::ModelSpec& model,
                                        EncryptionScope scope, int level, u64 delta,
                                        u64 seed, int depth_margin) {
    PipelineSetup setup = plan_pipeline(model, scope, level, delta, depth_margin);
    ring::Rng rng(seed);
    bfv::KeySet keys = bfv::keygen(setup.params, rng);
    auto [pm, rep] = protect::protect_model(setup.qmodel, scope, keys, rng);
    ModelEncryptionReport out;
    out.seconds = rep.seconds;
    out.plaintext_bytes = rep.plaintext_bytes;
    out.ciphertext_bytes = rep.ciphertext_bytes;
    out.ratio = rep.expansion_ratio;
    out.params = setup.params;
    return out;
}

AccuracyReport accuracy_report(const nn::Dataset& data, std::size_t hidden, int epochs,
                               double learning_rate, u64 seed) {
    nn::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.learning_rate = learning_rate;
    cfg.seed = seed;
    AccuracyReport rep;
    nn::Architecture arch{{data.feature_dim, hidden, 10}, nn::ActivationKind::relu};
    // class count from the labels
    int classes = 0;
    for (int l : data.labels) classes = std::max(classes, l + 1);
    arch.dims.back() = std::size_t(classes);

    arch.hidden_activation = nn::ActivationKind::relu;
    rep.relu = nn::train_sgd(data, arch, cfg).val_accuracy;
    arch.hidden_activation = nn::ActivationKind::square_plus_two;
    rep.square2x = nn::train_sgd(data, arch, cfg).val_accuracy;
    arch.hidden_activation = nn::ActivationKind::none;
    rep.none = nn::train_sgd(data, arch, cfg).val_accuracy;
    return rep;
}

std::string AccuracyReport::to_csv() const {
    std::ostringstream os;
    os << "epoch,relu,square2x,none\n";
    for (std::size_t i = 0; i < relu.size(); ++i)
        os << i << ',' << relu[i] << ',' << square2x[i] << ',' << none[i] << '\n';
    return os.str();
}

namespace {

struct CellResult {
    std::vector<BenchCell> cells;
};

// One (variant, level): model encryption once, then runs x modes.
CellResult run_cell(const BenchConfig& cfg, const nn::ModelSpec& model, Variant variant,
                    int level, const std::vector<std::vector<double>>& batch) {
    CellResult out;
    const EncryptionScope scope = variant_scope(variant);
    PipelineSetup setup =
        plan_pipeline(model, scope, level, variant_delta(cfg, variant), cfg.depth_margin);
    auto ctx = bfv::get_context(setup.params);
    const u64 t = setup.params.plain_modulus;

    ring::Rng rng(cfg.seed ^ (u64(level) << 32) ^ u64(static_cast<int>(variant)));
    bfv::KeySet keys = bfv::keygen(setup.params, rng);
    auto [pm, enc_rep] = protect::protect_model(setup.qmodel, scope, keys, rng);
    auto pkg = protect::build_package(pm, keys.public_key, keys.relin, setup.params);

    BenchCell enc_cell{variant, level, "-", "model_encryption", enc_rep.seconds,
                       double(enc_rep.ciphertext_bytes), 0.0, 1, true};
    {
        // fresh budget of one parameter ciphertext, for the record
        const auto& any = pm.layers.back().enc_bias[0];
        enc_cell.budget_bits_mean = bfv::noise_budget(any, keys.secret, ctx);
    }
    out.cells.push_back(enc_cell);

    // expected integer logits from the oracle
    std::vector<std::vector<u64>> want;
    for (const auto& row : batch)
        want.push_back(
            nn::oracle_forward_int(setup.qmodel, nn::quantize_input(setup.qmodel, row, t), t));

    for (InputMode mode : {InputMode::plaintext_input, InputMode::encrypted_input}) {
        double time_sum = 0, bytes_sum = 0, budget_sum = 0, dec_time_sum = 0,
               dec_bytes_sum = 0;
        bool all_correct = true;
        einfer::NoiseProbe probe{&keys.secret};
        for (int run = 0; run < cfg.runs; ++run) {
            ring::Rng run_rng(cfg.seed ^ (u64(run) << 48) ^
                              (u64(static_cast<int>(mode)) << 40) ^ (u64(level) << 8) ^
                              u64(static_cast<int>(variant)));
            auto t0 = Clock::now();
            auto res = einfer::run_inference(pkg, batch, mode, run_rng, &probe);
            time_sum += seconds_since(t0);

            std::size_t peak = 0;
            for (const auto& row : res.trace.rows) peak = std::max(peak, row.ciphertext_bytes);
            bytes_sum += double(peak);

            int fb = std::numeric_limits<int>::max();
            for (const auto& ct : res.logits)
                fb = std::min(fb, bfv::noise_budget(ct, keys.secret, ctx));
            budget_sum += fb;

            bool ok = fb > 0 && !res.trace.budget_exhausted;
            for (std::size_t c = 0; c < res.logits.size() && ok; ++c) {
                auto slots = encode::batch_decode(
                    bfv::decrypt(res.logits[c], keys.secret, ctx), ctx);
                for (std::size_t j = 0; j < batch.size() && ok; ++j)
                    ok = slots[j] == want[j][c];
            }
            all_correct = all_correct && ok;

            auto t1 = Clock::now();
            auto dout = einfer::decrypt_output(res, keys.secret, pkg.model.codec, ctx);
            dec_time_sum += seconds_since(t1);
            (void)dout;
            std::size_t logit_bytes = 0;
            for (const auto& ct : res.logits) logit_bytes += ct.byte_size();
            dec_bytes_sum += double(logit_bytes);
        }
        std::string mode_tag = to_string(mode);
        out.cells.push_back({variant, level, mode_tag, "inference",
                             time_sum / cfg.runs, bytes_sum / cfg.runs,
                             budget_sum / cfg.runs, cfg.runs, all_correct});
        out.cells.push_back({variant, level, mode_tag, "decryption",
                             dec_time_sum / cfg.runs, dec_bytes_sum / cfg.runs,
                             budget_sum / cfg.runs, cfg.runs, all_correct});
    }
    return out;
}

}  // namespace

BenchReport run_matrix(const BenchConfig& cfg) {
    if (cfg.runs < 5)
        throw std::invalid_argument("bench requires >= 5 runs per cell");
    nn::Dataset data = nn::load_csv(cfg.dataset_csv, cfg.feature_scale);
    int classes = 0;
    for (int l : data.labels) classes = std::max(classes, l + 1);

    // one trained model per variant, shared across levels and modes
    std::map<Variant, nn::ModelSpec> models;
    for (Variant v : cfg.variants) {
        nn::TrainConfig tc;
        tc.epochs = cfg.epochs;
        tc.learning_rate = cfg.learning_rate;
        tc.seed = cfg.seed;
        nn::Architecture arch{{data.feature_dim, cfg.hidden, std::size_t(classes)},
                              variant_activation(v)};
        auto res = nn::train_sgd(data, arch, tc);
        res.model.name = to_string(v);
        models.emplace(v, std::move(res.model));
    }

    // a fixed evaluation batch, drawn deterministically
    auto [train, val] = nn::split_dataset(data, 0.2, cfg.seed + 17);
    std::size_t take = std::min(cfg.batch, val.size());
    std::vector<std::vector<double>> batch;
    for (std::size_t i = 0; i < take; ++i) {
        auto r = val.row(i);
        batch.emplace_back(r.begin(), r.end());
    }

    BenchReport report;
    report.config_fingerprint = config_hash(cfg);
    {
        utsname un{};
        uname(&un);
        std::ostringstream os;
        os << un.sysname << ' ' << un.release << ' ' << un.machine;
        report.environment = os.str();
    }

    std::vector<std::pair<Variant, int>> cells;
    for (Variant v : cfg.variants)
        for (int level : cfg.levels) cells.emplace_back(v, level);

    if (cfg.parallel) {
        std::vector<std::future<CellResult>> futures;
        for (auto [v, level] : cells)
            futures.push_back(std::async(std::launch::async, [&, v = v, level = level] {
                return run_cell(cfg, models.at(v), v, level, batch);
            }));
        for (auto& f : futures) {
            auto r = f.get();
            report.cells.insert(report.cells.end(), r.cells.begin(), r.cells.end());
        }
    } else {
        for (auto [v, level] : cells) {
            auto r = run_cell(cfg, models.at(v), v, level, batch);
            report.cells.insert(report.cells.end(), r.cells.begin(), r.cells.end());
        }
    }
    return report;
}

}  // namespace fhedge::bench
