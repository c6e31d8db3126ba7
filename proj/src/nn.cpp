// SPDX-License-Identifier: Apache-2.0

#include "fhedge/nn.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace fhedge::nn {

using json = nlohmann::json;

std::string to_string(ActivationKind k) {
    switch (k) {
        case ActivationKind::relu: return "relu";
        case ActivationKind::square_plus_two: return "square2x";
        case ActivationKind::none: return "none";
    }
    throw std::logic_error("unknown activation kind");
}

ActivationKind activation_from_string(const std::string& tag) {
    if (tag == "relu") return ActivationKind::relu;
    if (tag == "square2x") return ActivationKind::square_plus_two;
    if (tag == "none") return ActivationKind::none;
    throw std::invalid_argument("unsupported layer activation tag: '" + tag + "'");
}

double square_plus_two(double x) { return x * x + 2.0 * x; }

double apply_activation(ActivationKind k, double x) {
    switch (k) {
        case ActivationKind::relu: return x > 0 ? x : 0.0;
        case ActivationKind::square_plus_two: return square_plus_two(x);
        case ActivationKind::none: return x;
    }
    throw std::logic_error("unknown activation kind");
}

std::size_t ModelSpec::parameter_count() const {
    std::size_t c = 0;
    for (const auto& l : layers) c += l.weights.size() + l.bias.size();
    return c;
}

void validate_model(const ModelSpec& m) {
    if (m.layers.empty()) throw std::invalid_argument("model has no layers");
    std::size_t prev = m.input_dim;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const auto& l = m.layers[i];
        if (l.in_dim != prev)
            throw std::invalid_argument("layer " + std::to_string(i) +
                                        " input dim does not chain");
        if (l.weights.size() != l.in_dim * l.out_dim || l.bias.size() != l.out_dim)
            throw std::invalid_argument("layer " + std::to_string(i) +
                                        " weight/bias shapes inconsistent");
        prev = l.out_dim;
    }
    if (prev != m.class_count)
        throw std::invalid_argument("final layer width != class_count");
}

std::vector<double> forward(const ModelSpec& m, std::span<const double> x) {
    if (x.size() != m.input_dim)
        throw std::invalid_argument("forward: input dimension mismatch");
    std::vector<double> a(x.begin(), x.end());
    for (const auto& l : m.layers) {
        std::vector<double> z(l.out_dim);
        for (std::size_t k = 0; k < l.out_dim; ++k) {
            double s = l.bias[k];
            const double* wr = l.weights.data() + k * l.in_dim;
            for (std::size_t j = 0; j < l.in_dim; ++j) s += wr[j] * a[j];
            z[k] = apply_activation(l.activation, s);
        }
        a = std::move(z);
    }
    return a;
}

std::size_t argmax(std::span<const double> v) {
    return std::size_t(std::max_element(v.begin(), v.end()) - v.begin());
}

Dataset load_csv(const std::string& path, double feature_scale) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open dataset: " + path);
    Dataset d;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            std::string tok = line.substr(pos, comma == std::string::npos
                                                   ? std::string::npos
                                                   : comma - pos);
            row.push_back(std::stod(tok));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (row.size() < 2) throw std::runtime_error("csv row with fewer than 2 columns");
        if (d.feature_dim == 0)
            d.feature_dim = row.size() - 1;
        else if (row.size() - 1 != d.feature_dim)
            throw std::runtime_error("ragged csv row in " + path);
        for (std::size_t i = 0; i < d.feature_dim; ++i)
            d.features.push_back(row[i] / feature_scale);
        d.labels.push_back(int(row.back()));
    }
    if (d.labels.empty()) throw std::runtime_error("empty dataset: " + path);
    return d;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double fraction, u64 seed) {
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    ring::Rng rng(seed);
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng() % i]);
    std::size_t second = std::size_t(double(d.size()) * fraction);
    auto take = [&](std::size_t from, std::size_t count) {
        Dataset out;
        out.feature_dim = d.feature_dim;
        for (std::size_t i = from; i < from + count; ++i) {
            auto r = d.row(idx[i]);
            out.features.insert(out.features.end(), r.begin(), r.end());
            out.labels.push_back(d.labels[idx[i]]);
        }
        return out;
    };
    return {take(second, d.size() - second), take(0, second)};
}

// ---------------------------------------------------------------------------
// Training

namespace {

double activation_grad(ActivationKind k, double z) {
    switch (k) {
        case ActivationKind::relu: return z > 0 ? 1.0 : 0.0;
        case ActivationKind::square_plus_two: return 2.0 * z + 2.0;
        case ActivationKind::none: return 1.0;
    }
    return 1.0;
}

double gaussian(ring::Rng& rng) {
    double u1 = (double(rng() >> 11) + 0.5) * 0x1p-53;
    double u2 = (double(rng() >> 11) + 0.5) * 0x1p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

TrainResult train_sgd(const Dataset& data, const Architecture& arch,
                      const TrainConfig& cfg) {
    if (arch.dims.size() < 2) throw std::invalid_argument("architecture needs >= 2 dims");
    if (data.feature_dim != arch.dims.front())
        throw std::invalid_argument("architecture input dim != dataset feature dim");

    ring::Rng rng(cfg.seed);
    ModelSpec m;
    m.input_dim = arch.dims.front();
    m.class_count = arch.dims.back();
    m.delta_hint = 1024;
    for (std::size_t i = 0; i + 1 < arch.dims.size(); ++i) {
        DenseLayer l;
        l.in_dim = arch.dims[i];
        l.out_dim = arch.dims[i + 1];
        // final layer has no activation (softmax lives in the loss only)
        l.activation = i + 2 == arch.dims.size() ? ActivationKind::none
                                                 : arch.hidden_activation;
        l.weights.resize(l.in_dim * l.out_dim);
        l.bias.assign(l.out_dim, 0.0);
        double scale = std::sqrt(2.0 / double(l.in_dim));
        for (auto& w : l.weights) w = gaussian(rng) * scale;
        m.layers.push_back(std::move(l));
    }

    auto [train, val] = split_dataset(data, cfg.validation_fraction, cfg.seed);
    const std::size_t nclass = m.class_count;

    TrainResult result;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng() % i]);

        double loss_sum = 0.0;
        std::size_t cursor = 0;
        while (cursor < order.size()) {
            std::size_t bs = std::min<std::size_t>(cfg.batch_size, order.size() - cursor);
            // accumulate gradients over the minibatch
            std::vector<std::vector<double>> gw(m.layers.size()), gb(m.layers.size());
            for (std::size_t li = 0; li < m.layers.size(); ++li) {
                gw[li].assign(m.layers[li].weights.size(), 0.0);
                gb[li].assign(m.layers[li].bias.size(), 0.0);
            }
            for (std::size_t bi = 0; bi < bs; ++bi) {
                auto x = train.row(order[cursor + bi]);
                int label = train.labels[order[cursor + bi]];

                // forward, keeping pre-activations
                std::vector<std::vector<double>> acts{std::vector<double>(x.begin(), x.end())};
                std::vector<std::vector<double>> zs;
                for (const auto& l : m.layers) {
                    std::vector<double> z(l.out_dim);
                    for (std::size_t k = 0; k < l.out_dim; ++k) {
                        double s = l.bias[k];
                        const double* wr = l.weights.data() + k * l.in_dim;
                        for (std::size_t j = 0; j < l.in_dim; ++j)
                            s += wr[j] * acts.back()[j];
                        z[k] = s;
                    }
                    zs.push_back(z);
                    std::vector<double> a(l.out_dim);
                    for (std::size_t k = 0; k < l.out_dim; ++k)
                        a[k] = apply_activation(l.activation, z[k]);
                    acts.push_back(std::move(a));
                }

                // softmax cross-entropy on the logits
                const auto& logits = acts.back();
                double mx = *std::max_element(logits.begin(), logits.end());
                double denom = 0.0;
                for (double v : logits) denom += std::exp(v - mx);
                loss_sum += -(logits[label] - mx - std::log(denom));

                std::vector<double> delta(nclass);
                for (std::size_t k = 0; k < nclass; ++k)
                    delta[k] = std::exp(logits[k] - mx) / denom - (int(k) == label);

                for (std::size_t li = m.layers.size(); li-- > 0;) {
                    const auto& l = m.layers[li];
                    for (std::size_t k = 0; k < l.out_dim; ++k) {
                        double dz = delta[k] * activation_grad(l.activation, zs[li][k]);
                        delta[k] = dz;
                        gb[li][k] += dz;
                        for (std::size_t j = 0; j < l.in_dim; ++j)
                            gw[li][k * l.in_dim + j] += dz * acts[li][j];
                    }
                    if (li > 0) {
                        std::vector<double> prev(l.in_dim, 0.0);
                        for (std::size_t k = 0; k < l.out_dim; ++k)
                            for (std::size_t j = 0; j < l.in_dim; ++j)
                                prev[j] += delta[k] * l.w(k, j);
                        delta = std::move(prev);
                    }
                }
            }
            double step = cfg.learning_rate / double(bs);
            for (std::size_t li = 0; li < m.layers.size(); ++li) {
                auto& l = m.layers[li];
                for (std::size_t i2 = 0; i2 < l.weights.size(); ++i2)
                    l.weights[i2] -= step * gw[li][i2];
                for (std::size_t i2 = 0; i2 < l.bias.size(); ++i2)
                    l.bias[i2] -= step * gb[li][i2];
            }
            cursor += bs;
        }

        double epoch_loss = loss_sum / double(train.size());
        if (!std::isfinite(epoch_loss))
            throw TrainingError("training diverged (non-finite loss) at epoch " +
                                    std::to_string(epoch),
                                epoch);
        result.train_loss.push_back(epoch_loss);

        std::size_t hit = 0;
        for (std::size_t i = 0; i < val.size(); ++i)
            hit += argmax(forward(m, val.row(i))) == std::size_t(val.labels[i]);
        result.val_accuracy.push_back(val.size() ? double(hit) / double(val.size()) : 0.0);
    }

    m.name = "mlp";
    for (std::size_t dim : arch.dims) m.name += "-" + std::to_string(dim);
    m.name += "-" + to_string(arch.hidden_activation);
    m.training_config_hash =
        "epochs=" + std::to_string(cfg.epochs) + ";lr=" + std::to_string(cfg.learning_rate) +
        ";bs=" + std::to_string(cfg.batch_size) + ";seed=" + std::to_string(cfg.seed);
    result.model = std::move(m);
    validate_model(result.model);
    return result;
}

// ---------------------------------------------------------------------------
// Quantization

ScalePlan make_scale_plan(const ModelSpec& m, int input_power) {
    ScalePlan plan;
    int power = input_power;
    for (const auto& l : m.layers) {
        ScalePlanEntry e;
        e.input_power = power;
        e.weight_power = 1;
        e.bias_power = power + 1;  // z = W a + b lands at input power + 1
        int zp = power + 1;
        e.output_power = l.activation == ActivationKind::square_plus_two ? 2 * zp : zp;
        plan.push_back(e);
        power = e.output_power;
    }
    return plan;
}

QuantizedModel quantize(const ModelSpec& m, const FixedPointCodec& codec,
                        int input_power) {
    validate_model(m);
    QuantizedModel qm;
    qm.codec = codec;
    qm.input_dim = m.input_dim;
    qm.class_count = m.class_count;
    qm.input_power = input_power;
    qm.name = m.name;
    ScalePlan plan = make_scale_plan(m, input_power);
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
        const auto& l = m.layers[li];
        QuantizedLayer q;
        q.in_dim = l.in_dim;
        q.out_dim = l.out_dim;
        q.activation = l.activation;
        q.plan = plan[li];
        q.weights.reserve(l.weights.size());
        for (double w : l.weights)
            q.weights.push_back(encode::quantize_value(w, codec, q.plan.weight_power));
        q.bias.reserve(l.bias.size());
        for (double b : l.bias)
            q.bias.push_back(encode::quantize_value(b, codec, q.plan.bias_power));
        qm.layers.push_back(std::move(q));
    }
    return qm;
}

std::size_t QuantizedModel::parameter_count() const {
    std::size_t c = 0;
    for (const auto& l : layers) c += l.weights.size() + l.bias.size();
    return c;
}

int required_plain_bits(const QuantizedModel& qm, double input_max) {
    const double delta = double(qm.codec.scale);
    long double bound = std::abs(input_max) * std::pow(delta, qm.input_power);
    long double peak = bound;
    for (const auto& l : qm.layers) {
        long double zmax = 0;
        for (std::size_t k = 0; k < l.out_dim; ++k) {
            // bias integers already sit at the z-power
            long double s = std::abs((long double)l.bias[k]);
            for (std::size_t j = 0; j < l.in_dim; ++j)
                s += std::abs((long double)l.w(k, j)) * bound;
            zmax = std::max(zmax, s);
        }
        peak = std::max(peak, zmax);
        if (l.activation == ActivationKind::square_plus_two) {
            long double factor = std::pow(delta, l.plan.input_power + 1);
            long double amax = zmax * zmax + 2.0L * factor * zmax;
            bound = amax;
        } else {
            bound = zmax;  // relu magnitude bounded by |z|
        }
        peak = std::max(peak, bound);
    }
    int bits = int(std::ceil(std::log2(std::max(peak, 2.0L)))) + 2;  // sign + slack
    return bits;
}

std::vector<u64> oracle_forward_int(const QuantizedModel& qm,
                                    std::span<const u64> x_slots, u64 t) {
    if (x_slots.size() != qm.input_dim)
        throw std::invalid_argument("oracle: input dimension mismatch");
    std::vector<u64> a(x_slots.begin(), x_slots.end());
    for (const auto& l : qm.layers) {
        std::vector<u64> z(l.out_dim);
        for (std::size_t k = 0; k < l.out_dim; ++k) {
            u64 acc = encode::to_slot(l.bias[k] % i64(t), t);
            for (std::size_t j = 0; j < l.in_dim; ++j) {
                u64 w = encode::to_slot(l.w(k, j) % i64(t), t);
                acc = ring::add_mod(acc, ring::mul_mod(w, a[j], t), t);
            }
            z[k] = acc;
        }
        switch (l.activation) {
            case ActivationKind::none:
                break;
            case ActivationKind::relu:
                // centered comparison, exactly as a plaintext integer engine
                for (auto& v : z) {
                    i64 c = encode::from_slot(v, t);
                    v = encode::to_slot(c > 0 ? c : 0, t);
                }
                break;
            case ActivationKind::square_plus_two: {
                // a = z^2 + 2*Delta^k * z at power 2k, k = z-power
                u64 fd = encode::scale_factor(qm.codec, l.plan.input_power + 1);
                u64 factor = u64((ring::u128(2) * fd) % t);
                for (auto& v : z) {
                    u64 sq = ring::mul_mod(v, v, t);
                    u64 lin = ring::mul_mod(factor, v, t);
                    v = ring::add_mod(sq, lin, t);
                }
                break;
            }
        }
        a = std::move(z);
    }
    return a;
}

std::vector<u64> quantize_input(const QuantizedModel& qm, std::span<const double> x,
                                u64 t) {
    std::vector<u64> slots(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        FixedPointCodec c = qm.codec;
        c.plain_modulus = t;
        slots[i] = encode::to_slot(encode::quantize_value(x[i], c, qm.input_power), t);
    }
    return slots;
}

std::vector<double> decode_logits(const QuantizedModel& qm, std::span<const u64> logits,
                                  u64 t) {
    const long double f = std::pow((long double)qm.codec.scale, qm.output_power());
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i)
        out[i] = double((long double)encode::from_slot(logits[i], t) / f);
    return out;
}

// ---------------------------------------------------------------------------
// Model files

void save_model(const ModelSpec& m, const std::string& path) {
    validate_model(m);
    json j;
    j["format"] = "fhedge-model";
    j["version"] = 1;
    j["name"] = m.name;
    j["input_dim"] = m.input_dim;
    j["class_count"] = m.class_count;
    j["training_config_hash"] = m.training_config_hash;
    j["delta"] = m.delta_hint;
    j["layers"] = json::array();
    for (const auto& l : m.layers) {
        json jl;
        jl["type"] = "dense";
        jl["rows"] = l.out_dim;
        jl["cols"] = l.in_dim;
        jl["weights"] = l.weights;  // row-major
        jl["bias"] = l.bias;
        jl["activation"] = to_string(l.activation);
        j["layers"].push_back(std::move(jl));
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write model file: " + path);
    f << j.dump(2) << '\n';
}

ModelSpec load_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open model file: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed model file " + path + ": " + e.what());
    }
    auto need = [&](const char* key) {
        if (!j.contains(key))
            throw std::runtime_error("model file missing section '" + std::string(key) +
                                     "': " + path);
    };
    need("format");
    if (j["format"] != "fhedge-model")
        throw std::runtime_error("not a model file: " + path);
    need("version");
    if (j["version"] != 1)
        throw std::runtime_error("unsupported model file version in " + path);
    for (const char* key : {"name", "input_dim", "class_count", "layers", "delta"})
        need(key);

    ModelSpec m;
    m.name = j["name"];
    m.input_dim = j["input_dim"];
    m.class_count = j["class_count"];
    m.delta_hint = j["delta"];
    m.training_config_hash = j.value("training_config_hash", "");
    for (const auto& jl : j["layers"]) {
        std::string type = jl.value("type", "dense");
        if (type != "dense")
            throw std::runtime_error("unsupported layer type '" + type +
                                     "' (only dense layers are supported)");
        DenseLayer l;
        l.out_dim = jl.at("rows").get<std::size_t>();
        l.in_dim = jl.at("cols").get<std::size_t>();
        l.weights = jl.at("weights").get<std::vector<double>>();
        l.bias = jl.at("bias").get<std::vector<double>>();
        l.activation = activation_from_string(jl.at("activation").get<std::string>());
        m.layers.push_back(std::move(l));
    }
    validate_model(m);
    return m;
}

}  // namespace fhedge::nn
