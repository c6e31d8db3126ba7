// SPDX-License-Identifier: Apache-2.0

#include "fhedge/agents.hpp"

#include <sys/socket.h>

#include <cctype>
#include <chrono>
#include <filesystem>
#include <sstream>

#include "fhedge/serial.hpp"

namespace fhedge::agents {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string safe_name(const std::string& id) {
    std::string s;
    for (char c : id)
        s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return s;
}

}  // namespace

EdgeAgent::EdgeAgent(EdgeConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.data_dir.empty()) throw std::invalid_argument("edge data_dir required");
    fs::create_directories(cfg_.data_dir);
}

EdgeAgent::~EdgeAgent() { stop(); }

void EdgeAgent::start() {
    listen_fd_ = net::listen_on(cfg_.listen_addr, cfg_.port);
    port_ = net::bound_port(listen_fd_);
    stopping_ = false;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void EdgeAgent::stop() {
    if (listen_fd_ < 0) return;
    stopping_ = true;
    ::shutdown(listen_fd_, SHUT_RDWR);
    net::close_fd(listen_fd_);
    listen_fd_ = -1;
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::thread> ws;
    {
        std::lock_guard lock(mu_);
        ws.swap(workers_);
    }
    for (auto& w : ws)
        if (w.joinable()) w.join();
}

void EdgeAgent::run_until(const std::atomic<bool>& stop_flag) {
    start();
    while (!stop_flag.load())
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    stop();
}

void EdgeAgent::accept_loop() {
    while (!stopping_.load()) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (stopping_.load()) break;
            continue;
        }
        std::lock_guard lock(mu_);
        workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void EdgeAgent::serve_connection(int fd) {
    for (;;) {
        WireMessage msg;
        try {
            auto m = net::recv_message(fd);
            if (!m) break;  // clean EOF
            msg = std::move(*m);
        } catch (const FrameError& e) {
            // corrupt frame: report and keep serving the connection
            try {
                net::send_message(fd, {MsgType::ERROR, encode_error({0, e.what()})});
                continue;
            } catch (...) {
                break;
            }
        } catch (...) {
            break;
        }
        WireMessage reply;
        try {
            reply = handle(msg);
        } catch (const std::exception& e) {
            reply = {MsgType::ERROR, encode_error({0, e.what()})};
        }
        try {
            net::send_message(fd, reply);
        } catch (...) {
            break;
        }
    }
    net::close_fd(fd);
}

protect::DeploymentPackage& EdgeAgent::package_for(const std::string& model_id) {
    std::lock_guard lock(mu_);
    auto it = cache_.find(model_id);
    if (it != cache_.end()) return *it->second;
    fs::path p = fs::path(cfg_.data_dir) / (safe_name(model_id) + ".pkg");
    if (!fs::exists(p))
        throw AgentError("model id '" + model_id + "' not deployed on this edge");
    auto pkg = std::make_shared<protect::DeploymentPackage>(
        protect::load_package_file(p.string()));
    cache_[model_id] = pkg;
    return *pkg;
}

WireMessage EdgeAgent::handle(const WireMessage& msg) {
    switch (msg.type) {
        case MsgType::DEPLOY: {
            DeployBody b = decode_deploy(msg.payload);
            // validate before making it visible; a broken package is rejected
            auto pkg = protect::load_package(b.package_bytes.data(),
                                             b.package_bytes.size());
            if (pkg.model_id != b.model_id)
                throw AgentError("package id does not match deploy id");
            fs::path final_path =
                fs::path(cfg_.data_dir) / (safe_name(b.model_id) + ".pkg");
            fs::path tmp = final_path.string() + ".tmp";
            serial::write_file(tmp.string(), b.package_bytes);
            fs::rename(tmp, final_path);  // atomic replacement on redeploy
            {
                std::lock_guard lock(mu_);
                cache_[b.model_id] =
                    std::make_shared<protect::DeploymentPackage>(std::move(pkg));
            }
            std::string ack = "deployed " + b.model_id;
            return {MsgType::STATUS,
                    std::vector<std::uint8_t>(ack.begin(), ack.end())};
        }
        case MsgType::INFER_REQ: {
            InferRequestBody req = decode_infer_request(msg.payload);
            auto& pkg = package_for(req.model_id);
            auto t0 = Clock::now();
            // Edge context: no secret key exists here, so no noise probe.
            einfer::InferenceResult res;
            {
                std::lock_guard lock(rng_mu_);
                res = einfer::run_inference(pkg, req.batch, req.mode, edge_rng_, nullptr);
            }
            InferResponseBody out;
            out.job_id = req.job_id;
            out.model_id = req.model_id;
            out.params_fp = pkg.model.params_fp;
            out.key_fp = bfv::key_fingerprint(pkg.public_key);
            out.batch_size = res.batch_size;
            out.scale_power = std::uint32_t(res.scale.power);
            out.codec_scale = pkg.model.codec.scale;
            for (const auto& ct : res.logits)
                out.logit_blobs.push_back(bfv::save_ciphertext(ct));
            out.trace_csv = res.trace.to_csv();
            out.edge_seconds = seconds_since(t0);
            return {MsgType::INFER_RESP, encode_infer_response(out)};
        }
        case MsgType::STATUS: {
            std::ostringstream os;
            os << "edge ok; models:";
            std::lock_guard lock(mu_);
            for (const auto& e : fs::directory_iterator(cfg_.data_dir))
                if (e.path().extension() == ".pkg")
                    os << ' ' << e.path().stem().string();
            std::string s = os.str();
            return {MsgType::STATUS, std::vector<std::uint8_t>(s.begin(), s.end())};
        }
        default:
            throw AgentError("unsupported message type on edge");
    }
}

// ---------------------------------------------------------------------------
// Backend

namespace {

struct Conn {
    int fd = -1;
    Conn(const std::string& addr, int port) : fd(net::connect_to(addr, port)) {}
    ~Conn() { net::close_fd(fd); }
};

WireMessage roundtrip(const std::string& addr, int port, const WireMessage& msg) {
    Conn c(addr, port);
    net::send_message(c.fd, msg);
    auto reply = net::recv_message(c.fd);
    if (!reply) throw AgentError("edge closed the connection without a reply");
    if (reply->type == MsgType::ERROR) {
        ErrorBody e = decode_error(reply->payload);
        throw AgentError("edge error: " + e.message);
    }
    return *reply;
}

}  // namespace

std::string backend_deploy(const std::string& addr, int port,
                           const protect::DeploymentPackage& pkg,
                           StageTimings* timings) {
    auto t0 = Clock::now();
    DeployBody b{pkg.model_id, protect::save_package(pkg)};
    WireMessage reply = roundtrip(addr, port, {MsgType::DEPLOY, encode_deploy(b)});
    if (reply.type != MsgType::STATUS) throw AgentError("unexpected deploy reply type");
    if (timings) timings->deploy_s = seconds_since(t0);
    return std::string(reply.payload.begin(), reply.payload.end());
}

InferResponseBody backend_infer(const std::string& addr, int port,
                                const InferenceJob& job, StageTimings* timings) {
    auto t0 = Clock::now();
    InferRequestBody req{job.job_id, job.model_id, job.mode, job.batch};
    WireMessage reply =
        roundtrip(addr, port, {MsgType::INFER_REQ, encode_infer_request(req)});
    if (reply.type != MsgType::INFER_RESP)
        throw AgentError("unexpected inference reply type");
    InferResponseBody resp = decode_infer_response(reply.payload);
    if (resp.job_id != job.job_id)
        throw AgentError("response correlates to a different job id");
    if (timings) timings->request_s = seconds_since(t0);
    return resp;
}

einfer::DecryptedOutput backend_decrypt(const InferResponseBody& resp,
                                        const protect::KeyVaultRecord& record,
                                        StageTimings* timings) {
    auto t0 = Clock::now();
    if (record.model_id != resp.model_id)
        throw AgentError("vault record '" + record.model_id +
                         "' does not match response model '" + resp.model_id + "'");
    if (bfv::params_fingerprint(record.keys.params) != resp.params_fp)
        throw AgentError("vault record parameters do not match the response");
    if (resp.key_fp != 0 && bfv::key_fingerprint(record.keys.public_key) != resp.key_fp)
        throw AgentError("vault record key pair does not match the response");
    auto ctx = bfv::get_context(record.keys.params);
    einfer::InferenceResult res;
    res.batch_size = resp.batch_size;
    res.scale = encode::ScaleState{int(resp.scale_power)};
    for (const auto& blob : resp.logit_blobs)
        res.logits.push_back(bfv::load_ciphertext(blob.data(), blob.size()));
    encode::FixedPointCodec codec{resp.codec_scale, record.keys.params.plain_modulus};
    auto out = einfer::decrypt_output(res, record.keys.secret, codec, ctx);
    if (timings) timings->decrypt_s = seconds_since(t0);
    return out;
}

einfer::DecryptedOutput backend_decrypt(const InferResponseBody& resp,
                                        const protect::KeyVault& vault,
                                        StageTimings* timings) {
    return backend_decrypt(resp, vault.fetch(resp.model_id), timings);
}

std::string backend_status(const std::string& addr, int port) {
    WireMessage reply = roundtrip(addr, port, {MsgType::STATUS, {}});
    return std::string(reply.payload.begin(), reply.payload.end());
}

}  // namespace fhedge::agents
