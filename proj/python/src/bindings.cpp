// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the main operations: scheme-level encrypt/decrypt and
// ciphertext algebra, fixed-point encoding, model training, and the full
// protect -> infer -> decrypt pipeline with its integer oracle.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fhedge/bench.hpp"

namespace py = pybind11;
using namespace fhedge;
using ring::u64;

namespace {

// Scheme handle: parameters, context, and a keyset behind one object.
class Scheme {
  public:
    Scheme(int level, int depth_hint, int plain_bits, u64 seed)
        : params_(bfv::security_preset(level, depth_hint, plain_bits)),
          ctx_(bfv::get_context(params_)) {
        ring::Rng rng(seed);
        keys_ = bfv::keygen(params_, rng);
    }

    std::size_t slot_count() const { return params_.poly_degree; }
    u64 plain_modulus() const { return params_.plain_modulus; }
    int coeff_modulus_bits() const { return bfv::coeff_modulus_bits(params_); }
    int security_level() const { return params_.security_level; }

    bfv::Ciphertext encrypt(const std::vector<u64>& slots, u64 seed) {
        ring::Rng rng(seed);
        return bfv::encrypt(encode::batch_encode(slots, ctx_), keys_.public_key, ctx_,
                            rng);
    }
    std::vector<u64> decrypt(const bfv::Ciphertext& ct) {
        return encode::batch_decode(bfv::decrypt(ct, keys_.secret, ctx_), ctx_);
    }
    bfv::Ciphertext add(const bfv::Ciphertext& a, const bfv::Ciphertext& b) {
        return bfv::add(a, b);
    }
    bfv::Ciphertext multiply(const bfv::Ciphertext& a, const bfv::Ciphertext& b) {
        return bfv::multiply(a, b, keys_.relin, ctx_);
    }
    bfv::Ciphertext square(const bfv::Ciphertext& a) {
        return bfv::square(a, keys_.relin, ctx_);
    }
    bfv::Ciphertext multiply_plain(const bfv::Ciphertext& a,
                                   const std::vector<u64>& slots) {
        return bfv::multiply_plain(a, encode::batch_encode(slots, ctx_), ctx_);
    }
    bfv::Ciphertext add_plain(const bfv::Ciphertext& a, const std::vector<u64>& slots) {
        return bfv::add_plain(a, encode::batch_encode(slots, ctx_), ctx_);
    }
    int noise_budget(const bfv::Ciphertext& ct) {
        return bfv::noise_budget(ct, keys_.secret, ctx_);
    }

  private:
    bfv::EncryptionParams params_;
    bfv::ContextPtr ctx_;
    bfv::KeySet keys_;
};

nn::Dataset dataset_from(const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels) {
    if (features.size() != labels.size() || features.empty())
        throw std::invalid_argument("features and labels must align and be non-empty");
    nn::Dataset d;
    d.feature_dim = features[0].size();
    for (const auto& row : features) {
        if (row.size() != d.feature_dim)
            throw std::invalid_argument("ragged feature rows");
        d.features.insert(d.features.end(), row.begin(), row.end());
    }
    d.labels = labels;
    return d;
}

// Whole protected pipeline behind one object: quantize, keygen, encrypt the
// parameters, and serve encrypted inference plus the exact integer oracle.
class ProtectedPipeline {
  public:
    ProtectedPipeline(const nn::ModelSpec& model, const std::string& scope, int level,
                      u64 delta, u64 seed)
        : scope_(protect::scope_from_string(scope)) {
        auto setup = bench::plan_pipeline(model, scope_, level, delta, 0);
        params_ = setup.params;
        qmodel_ = setup.qmodel;
        ctx_ = bfv::get_context(params_);
        ring::Rng rng(seed);
        keys_ = bfv::keygen(params_, rng);
        auto [pm, rep] = protect::protect_model(qmodel_, scope_, keys_, rng);
        pkg_ = protect::build_package(pm, keys_.public_key, keys_.relin, params_);
        expansion_ratio_ = rep.expansion_ratio;
        encrypted_params_ = rep.encrypted_params;
    }

    py::dict infer(const std::vector<std::vector<double>>& batch,
                   const std::string& mode, u64 seed) {
        ring::Rng rng(seed);
        einfer::NoiseProbe probe{&keys_.secret};
        auto res = einfer::run_inference(pkg_, batch, einfer::mode_from_string(mode),
                                         rng, &probe);
        auto out = einfer::decrypt_output(res, keys_.secret, pkg_.model.codec, ctx_);
        py::dict d;
        d["logits"] = out.logits;
        d["predictions"] = out.predicted;
        d["final_budget_bits"] = out.final_budget_bits;
        d["trace_csv"] = res.trace.to_csv();
        d["budget_exhausted"] = res.trace.budget_exhausted;
        return d;
    }

    py::dict oracle(const std::vector<std::vector<double>>& batch) const {
        const u64 t = params_.plain_modulus;
        std::vector<std::vector<double>> logits;
        std::vector<std::size_t> preds;
        for (const auto& row : batch) {
            auto ints = nn::oracle_forward_int(qmodel_,
                                               nn::quantize_input(qmodel_, row, t), t);
            auto l = nn::decode_logits(qmodel_, ints, t);
            preds.push_back(nn::argmax(l));
            logits.push_back(std::move(l));
        }
        py::dict d;
        d["logits"] = logits;
        d["predictions"] = preds;
        return d;
    }

    py::bytes package_bytes() const {
        auto b = protect::save_package(pkg_);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
    }
    std::size_t poly_degree() const { return params_.poly_degree; }
    int coeff_modulus_bits() const { return bfv::coeff_modulus_bits(params_); }
    u64 plain_modulus() const { return params_.plain_modulus; }
    double expansion_ratio() const { return expansion_ratio_; }
    std::size_t encrypted_params() const { return encrypted_params_; }

  private:
    protect::EncryptionScope scope_;
    bfv::EncryptionParams params_;
    nn::QuantizedModel qmodel_;
    bfv::ContextPtr ctx_;
    bfv::KeySet keys_;
    protect::DeploymentPackage pkg_;
    double expansion_ratio_ = 0;
    std::size_t encrypted_params_ = 0;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "homomorphically protected dense-network inference";

    py::register_exception<encode::RangeError>(m, "RangeError");
    py::register_exception<bfv::ParameterError>(m, "ParameterError");

    py::class_<bfv::Ciphertext>(m, "Ciphertext")
        .def_property_readonly("size", &bfv::Ciphertext::size)
        .def("byte_size", &bfv::Ciphertext::byte_size);

    py::class_<Scheme>(m, "Scheme")
        .def(py::init<int, int, int, u64>(), py::arg("level") = 128,
             py::arg("depth_hint") = 1, py::arg("plain_bits") = 20,
             py::arg("seed") = 1)
        .def_property_readonly("slot_count", &Scheme::slot_count)
        .def_property_readonly("plain_modulus", &Scheme::plain_modulus)
        .def_property_readonly("coeff_modulus_bits", &Scheme::coeff_modulus_bits)
        .def_property_readonly("security_level", &Scheme::security_level)
        .def("encrypt", &Scheme::encrypt, py::arg("slots"), py::arg("seed") = 7)
        .def("decrypt", &Scheme::decrypt)
        .def("add", &Scheme::add)
        .def("multiply", &Scheme::multiply)
        .def("square", &Scheme::square)
        .def("multiply_plain", &Scheme::multiply_plain)
        .def("add_plain", &Scheme::add_plain)
        .def("noise_budget", &Scheme::noise_budget);

    py::class_<nn::ModelSpec>(m, "Model")
        .def_property_readonly("name", [](const nn::ModelSpec& m) { return m.name; })
        .def_property_readonly("input_dim",
                               [](const nn::ModelSpec& m) { return m.input_dim; })
        .def_property_readonly("class_count",
                               [](const nn::ModelSpec& m) { return m.class_count; })
        .def("forward",
             [](const nn::ModelSpec& m, const std::vector<double>& x) {
                 return nn::forward(m, x);
             })
        .def("save", [](const nn::ModelSpec& m, const std::string& path) {
            nn::save_model(m, path);
        });

    m.def("load_model", &nn::load_model, py::arg("path"));
    m.def(
        "train",
        [](const std::vector<std::vector<double>>& features,
           const std::vector<int>& labels, const std::vector<std::size_t>& dims,
           const std::string& activation, int epochs, double lr, int batch_size,
           u64 seed) {
            nn::Dataset d = dataset_from(features, labels);
            nn::TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.learning_rate = lr;
            cfg.batch_size = batch_size;
            cfg.seed = seed;
            nn::Architecture arch{dims, nn::activation_from_string(activation)};
            auto res = nn::train_sgd(d, arch, cfg);
            py::dict out;
            out["model"] = res.model;
            out["val_accuracy"] = res.val_accuracy;
            return out;
        },
        py::arg("features"), py::arg("labels"), py::arg("dims"),
        py::arg("activation") = "relu", py::arg("epochs") = 30, py::arg("lr") = 0.1,
        py::arg("batch_size") = 32, py::arg("seed") = 1);

    m.def("square_plus_two", &nn::square_plus_two, py::arg("x"),
          "the ReLU stand-in x^2 + 2x");

    py::class_<ProtectedPipeline>(m, "ProtectedPipeline")
        .def(py::init<const nn::ModelSpec&, const std::string&, int, u64, u64>(),
             py::arg("model"), py::arg("scope") = "last", py::arg("level") = 128,
             py::arg("delta") = 1024, py::arg("seed") = 1)
        .def("infer", &ProtectedPipeline::infer, py::arg("batch"),
             py::arg("mode") = "plain", py::arg("seed") = 7)
        .def("oracle", &ProtectedPipeline::oracle, py::arg("batch"))
        .def("package_bytes", &ProtectedPipeline::package_bytes)
        .def_property_readonly("poly_degree", &ProtectedPipeline::poly_degree)
        .def_property_readonly("coeff_modulus_bits",
                               &ProtectedPipeline::coeff_modulus_bits)
        .def_property_readonly("plain_modulus", &ProtectedPipeline::plain_modulus)
        .def_property_readonly("expansion_ratio", &ProtectedPipeline::expansion_ratio)
        .def_property_readonly("encrypted_params", &ProtectedPipeline::encrypted_params);
}
