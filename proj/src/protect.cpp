// SPDX-License-Identifier: Apache-2.0

#include "fhedge/protect.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <chrono>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "fhedge/serial.hpp"

namespace fhedge::protect {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(EncryptionScope s) {
    return s == EncryptionScope::last_layer_only ? "last" : "full";
}

EncryptionScope scope_from_string(const std::string& tag) {
    if (tag == "last") return EncryptionScope::last_layer_only;
    if (tag == "full") return EncryptionScope::full_classifier;
    throw std::invalid_argument("unknown scope '" + tag + "' (expected last|full)");
}

namespace {

bfv::Ciphertext encrypt_scalar(i64 value, const bfv::PublicKey& pk,
                               const bfv::ContextPtr& ctx, ring::Rng& rng) {
    const u64 t = bfv::context_params(ctx).plain_modulus;
    u64 slot = encode::to_slot(value % i64(t), t);
    return bfv::encrypt(encode::encode_replicated(slot, ctx), pk, ctx, rng);
}

}  // namespace

std::pair<ProtectedModel, EncryptionReport> protect_model(const nn::QuantizedModel& qm,
                                                          EncryptionScope scope,
                                                          const bfv::KeySet& keys,
                                                          ring::Rng& rng,
                                                          double input_max) {
    auto ctx = bfv::get_context(keys.params);
    const u64 t = keys.params.plain_modulus;
    int need = nn::required_plain_bits(qm, input_max);
    int have = 64 - std::countl_zero(t);
    if (need > have)
        throw encode::RangeError(
            "pipeline needs a " + std::to_string(need) + "-bit plaintext modulus but t has " +
            std::to_string(have) + " bits; increase t or lower the scale");
    for (const auto& l : qm.layers) {
        std::size_t idx = &l - qm.layers.data();
        bool in_scope = scope == EncryptionScope::full_classifier ||
                        idx + 1 == qm.layers.size();
        if (in_scope && l.activation == nn::ActivationKind::relu)
            throw std::invalid_argument(
                "relu cannot run under encryption; retrain with square2x or none");
    }

    ProtectedModel pm;
    pm.model_id = qm.name;
    pm.scope = scope;
    pm.codec = qm.codec;
    pm.input_power = qm.input_power;
    pm.input_dim = qm.input_dim;
    pm.class_count = qm.class_count;
    pm.params_fp = bfv::params_fingerprint(keys.params);

    EncryptionReport report;
    auto start = std::chrono::steady_clock::now();
    for (std::size_t li = 0; li < qm.layers.size(); ++li) {
        const auto& l = qm.layers[li];
        ProtectedLayer pl;
        pl.in_dim = l.in_dim;
        pl.out_dim = l.out_dim;
        pl.activation = l.activation;
        pl.plan = l.plan;
        pl.encrypted = scope == EncryptionScope::full_classifier ||
                       li + 1 == qm.layers.size();
        if (pl.encrypted) {
            pl.enc_weights.reserve(l.weights.size());
            for (i64 w : l.weights)
                pl.enc_weights.push_back(encrypt_scalar(w, keys.public_key, ctx, rng));
            pl.enc_bias.reserve(l.bias.size());
            for (i64 b : l.bias)
                pl.enc_bias.push_back(encrypt_scalar(b, keys.public_key, ctx, rng));
            report.encrypted_params += l.weights.size() + l.bias.size();
        } else {
            pl.clear_weights = l.weights;
            pl.clear_bias = l.bias;
        }
        pm.layers.push_back(std::move(pl));
    }
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.plaintext_bytes = report.encrypted_params * sizeof(i64);
    if (report.encrypted_params > 0) {
        std::size_t one = bfv::save_ciphertext(pm.layers.back().enc_bias[0]).size();
        report.ciphertext_bytes = report.encrypted_params * one;
        report.expansion_ratio =
            double(report.ciphertext_bytes) / double(report.plaintext_bytes);
    }
    return {std::move(pm), report};
}

// ---------------------------------------------------------------------------
// Vault

namespace {

constexpr std::uint32_t kTagVault = 0x31544C56;  // "VLT1"

std::string sanitize_id(const std::string& id) {
    std::string s;
    for (char c : id)
        s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    if (s.empty()) throw VaultError("empty model id");
    return s;
}

std::string now_string() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::vector<std::uint8_t> save_record(const KeyVaultRecord& r) {
    serial::Writer w;
    auto s = w.begin_section(kTagVault, 1);
    w.str(r.model_id);
    w.str(r.created_at.empty() ? now_string() : r.created_at);
    w.str(r.note);
    w.blob(bfv::save_params(r.keys.params));
    w.blob(bfv::save_secret_key(r.keys.secret));
    w.blob(bfv::save_public_key(r.keys.public_key));
    w.blob(bfv::save_relin_keys(r.keys.relin));
    w.end_section(s);
    return w.take();
}

KeyVaultRecord load_record(const std::vector<std::uint8_t>& bytes) {
    serial::Reader r(bytes);
    r.expect_section(kTagVault, "vault record");
    KeyVaultRecord rec;
    rec.model_id = r.str();
    rec.created_at = r.str();
    rec.note = r.str();
    auto params = r.blob();
    rec.keys.params = bfv::load_params(params.data(), params.size());
    auto sk = r.blob();
    rec.keys.secret = bfv::load_secret_key(sk.data(), sk.size());
    auto pk = r.blob();
    rec.keys.public_key = bfv::load_public_key(pk.data(), pk.size());
    auto rk = r.blob();
    rec.keys.relin = bfv::load_relin_keys(rk.data(), rk.size());
    return rec;
}

// Single writer per model id: an atomically created lock directory.
class IdLock {
  public:
    IdLock(const fs::path& dir, const std::string& id) : path_(dir / (id + ".lock")) {
        for (int attempt = 0; attempt < 500; ++attempt) {
            std::error_code ec;
            if (fs::create_directory(path_, ec)) {
                held_ = true;
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        throw VaultError("could not acquire vault lock for " + id);
    }
    ~IdLock() {
        if (held_) {
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }
    IdLock(const IdLock&) = delete;

  private:
    fs::path path_;
    bool held_ = false;
};

}  // namespace

KeyVault::KeyVault(std::string directory) : dir_(std::move(directory)) {
    fs::create_directories(dir_);
}

void KeyVault::store(const KeyVaultRecord& record) {
    std::string id = sanitize_id(record.model_id);
    IdLock lock(dir_, id);
    KeyVaultRecord r = record;
    if (r.created_at.empty()) r.created_at = now_string();
    auto bytes = save_record(r);
    fs::path final_path = fs::path(dir_) / (id + ".keys");
    fs::path tmp = final_path.string() + ".tmp";
    serial::write_file(tmp.string(), bytes);
    fs::rename(tmp, final_path);

    fs::path index = fs::path(dir_) / "index.json";
    json j;
    if (fs::exists(index)) {
        std::ifstream f(index);
        try {
            f >> j;
        } catch (...) {
            j = json::object();
        }
    }
    j[record.model_id] = {{"file", id + ".keys"}, {"created_at", r.created_at}};
    fs::path itmp = index.string() + ".tmp";
    {
        std::ofstream f(itmp, std::ios::trunc);
        f << j.dump(2) << '\n';
    }
    fs::rename(itmp, index);
}

bool KeyVault::contains(const std::string& model_id) const {
    return fs::exists(fs::path(dir_) / (sanitize_id(model_id) + ".keys"));
}

KeyVaultRecord KeyVault::fetch(const std::string& model_id) const {
    fs::path p = fs::path(dir_) / (sanitize_id(model_id) + ".keys");
    if (!fs::exists(p))
        throw VaultError("vault has no record for model id '" + model_id + "'");
    KeyVaultRecord rec;
    try {
        rec = load_record(serial::read_file(p.string()));
    } catch (const serial::ParseError& e) {
        throw VaultError("corrupted vault record for '" + model_id + "': " + e.what());
    }
    if (rec.model_id != model_id)
        throw VaultError("vault record id mismatch for '" + model_id + "'");
    return rec;
}

std::vector<std::string> KeyVault::list() const {
    std::vector<std::string> ids;
    fs::path index = fs::path(dir_) / "index.json";
    if (!fs::exists(index)) return ids;
    std::ifstream f(index);
    json j;
    try {
        f >> j;
    } catch (...) {
        return ids;
    }
    for (auto it = j.begin(); it != j.end(); ++it) ids.push_back(it.key());
    std::sort(ids.begin(), ids.end());
    return ids;
}

// ---------------------------------------------------------------------------
// Deployment package

namespace {

constexpr char kMagic[8] = {'F', 'H', 'E', 'D', 'G', 'E', 'P', 'K'};
constexpr std::uint32_t kSecParams = 0x00504B31;
constexpr std::uint32_t kSecPublic = 0x01504B31;
constexpr std::uint32_t kSecRelin = 0x02504B31;
constexpr std::uint32_t kSecCodec = 0x03504B31;
constexpr std::uint32_t kSecModel = 0x04504B31;
// The secret-key section tag from the scheme serializer; its presence
// anywhere in a package is a hard failure.
constexpr std::uint32_t kSecretTag = 0x314B5353;

void write_protected_layer(serial::Writer& w, const ProtectedLayer& l) {
    w.u64(l.in_dim);
    w.u64(l.out_dim);
    w.str(nn::to_string(l.activation));
    w.u32(std::uint32_t(l.plan.input_power));
    w.u32(std::uint32_t(l.plan.weight_power));
    w.u32(std::uint32_t(l.plan.bias_power));
    w.u32(std::uint32_t(l.plan.output_power));
    w.u8(l.encrypted ? 1 : 0);
    if (l.encrypted) {
        w.u64(l.enc_weights.size());
        for (const auto& ct : l.enc_weights) w.blob(bfv::save_ciphertext(ct));
        w.u64(l.enc_bias.size());
        for (const auto& ct : l.enc_bias) w.blob(bfv::save_ciphertext(ct));
    } else {
        w.u64(l.clear_weights.size());
        for (i64 v : l.clear_weights) w.u64(u64(v));
        w.u64(l.clear_bias.size());
        for (i64 v : l.clear_bias) w.u64(u64(v));
    }
}

ProtectedLayer read_protected_layer(serial::Reader& r) {
    ProtectedLayer l;
    l.in_dim = r.u64();
    l.out_dim = r.u64();
    l.activation = nn::activation_from_string(r.str());
    l.plan.input_power = int(r.u32());
    l.plan.weight_power = int(r.u32());
    l.plan.bias_power = int(r.u32());
    l.plan.output_power = int(r.u32());
    l.encrypted = r.u8() != 0;
    if (l.encrypted) {
        std::size_t nw = r.u64();
        l.enc_weights.reserve(nw);
        for (std::size_t i = 0; i < nw; ++i) {
            auto b = r.blob();
            l.enc_weights.push_back(bfv::load_ciphertext(b.data(), b.size()));
        }
        std::size_t nb = r.u64();
        l.enc_bias.reserve(nb);
        for (std::size_t i = 0; i < nb; ++i) {
            auto b = r.blob();
            l.enc_bias.push_back(bfv::load_ciphertext(b.data(), b.size()));
        }
    } else {
        for (auto* dst : {&l.clear_weights, &l.clear_bias}) {
            std::size_t c = r.u64();
            dst->reserve(c);
            for (std::size_t i = 0; i < c; ++i) dst->push_back(i64(r.u64()));
        }
    }
    return l;
}

}  // namespace

bool contains_bytes(std::span<const std::uint8_t> haystack,
                    std::span<const std::uint8_t> needle) {
    if (needle.empty() || needle.size() > haystack.size()) return false;
    return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
           haystack.end();
}

DeploymentPackage build_package(const ProtectedModel& model, const bfv::PublicKey& pk,
                                const bfv::RelinKeys& rk,
                                const bfv::EncryptionParams& params) {
    if (bfv::params_fingerprint(params) != model.params_fp)
        throw std::invalid_argument("build_package: params do not match the model");
    for (const auto& l : model.layers) {
        if (l.encrypted && (!l.clear_weights.empty() || !l.clear_bias.empty()))
            throw std::runtime_error(
                "security invariant violated: encrypted layer carries cleartext parameters");
        if (l.encrypted && (l.enc_weights.size() != l.in_dim * l.out_dim ||
                            l.enc_bias.size() != l.out_dim))
            throw std::invalid_argument("protected layer shape mismatch");
    }
    DeploymentPackage pkg{model.model_id, params, pk, rk, model};
    // scan the serialized form for secret-key sections before handing it out
    auto bytes = save_package(pkg);
    serial::Writer w;
    w.u32(kSecretTag);
    if (contains_bytes(bytes, w.data()))
        throw std::runtime_error(
            "security invariant violated: secret-key material detected in package");
    return pkg;
}

std::vector<std::uint8_t> save_package(const DeploymentPackage& pkg) {
    serial::Writer w;
    w.bytes(reinterpret_cast<const std::uint8_t*>(kMagic), sizeof kMagic);
    w.u8(1);  // container version
    w.str(pkg.model_id);

    auto s = w.begin_section(kSecParams, 1);
    w.blob(bfv::save_params(pkg.params));
    w.end_section(s);
    s = w.begin_section(kSecPublic, 1);
    w.blob(bfv::save_public_key(pkg.public_key));
    w.end_section(s);
    s = w.begin_section(kSecRelin, 1);
    w.blob(bfv::save_relin_keys(pkg.relin));
    w.end_section(s);

    s = w.begin_section(kSecCodec, 1);
    w.u64(pkg.model.codec.scale);
    w.u64(pkg.model.codec.plain_modulus);
    w.u32(std::uint32_t(pkg.model.input_power));
    w.end_section(s);

    s = w.begin_section(kSecModel, 1);
    w.str(pkg.model.model_id);
    w.str(to_string(pkg.model.scope));
    w.u64(pkg.model.input_dim);
    w.u64(pkg.model.class_count);
    w.u64(pkg.model.params_fp);
    w.u64(pkg.model.layers.size());
    for (const auto& l : pkg.model.layers) write_protected_layer(w, l);
    w.end_section(s);

    std::uint32_t crc = std::uint32_t(
        crc32(0L, reinterpret_cast<const Bytef*>(w.data().data()), uInt(w.data().size())));
    w.u32(crc);
    return w.take();
}

DeploymentPackage load_package(const std::uint8_t* data, std::size_t len) {
    if (len < sizeof(kMagic) + 5 || std::memcmp(data, kMagic, sizeof kMagic) != 0)
        throw serial::ParseError("not a deployment package (bad magic)");
    std::uint32_t want = 0;
    for (int i = 0; i < 4; ++i) want |= std::uint32_t(data[len - 4 + i]) << (8 * i);
    std::uint32_t got =
        std::uint32_t(crc32(0L, reinterpret_cast<const Bytef*>(data), uInt(len - 4)));
    if (want != got) throw serial::ParseError("package checksum mismatch");

    serial::Reader r(data + sizeof kMagic, len - sizeof kMagic - 4);
    if (r.u8() != 1) throw serial::ParseError("unsupported package version");
    DeploymentPackage pkg;
    pkg.model_id = r.str();

    r.expect_section(kSecParams, "params");
    {
        auto b = r.blob();
        pkg.params = bfv::load_params(b.data(), b.size());
    }
    r.expect_section(kSecPublic, "public key");
    {
        auto b = r.blob();
        pkg.public_key = bfv::load_public_key(b.data(), b.size());
    }
    r.expect_section(kSecRelin, "relin keys");
    {
        auto b = r.blob();
        pkg.relin = bfv::load_relin_keys(b.data(), b.size());
    }
    r.expect_section(kSecCodec, "codec");
    pkg.model.codec.scale = r.u64();
    pkg.model.codec.plain_modulus = r.u64();
    pkg.model.input_power = int(r.u32());

    r.expect_section(kSecModel, "model");
    pkg.model.model_id = r.str();
    pkg.model.scope = scope_from_string(r.str());
    pkg.model.input_dim = r.u64();
    pkg.model.class_count = r.u64();
    pkg.model.params_fp = r.u64();
    std::size_t nl = r.u64();
    for (std::size_t i = 0; i < nl; ++i)
        pkg.model.layers.push_back(read_protected_layer(r));
    return pkg;
}

void save_package_file(const DeploymentPackage& pkg, const std::string& path) {
    // write-then-rename: a crashed deploy never leaves a half-visible package
    auto bytes = save_package(pkg);
    std::string tmp = path + ".tmp";
    serial::write_file(tmp, bytes);
    fs::rename(tmp, path);
}

DeploymentPackage load_package_file(const std::string& path) {
    auto bytes = serial::read_file(path);
    return load_package(bytes.data(), bytes.size());
}

}  // namespace fhedge::protect
