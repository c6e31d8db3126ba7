// SPDX-License-Identifier: Apache-2.0
//
// Backend and edge agents over the wire protocol. The edge agent stores
// deployment packages and runs encrypted inference; it has no vault access
// path and never sees a secret key. The backend deploys packages, submits
// inference jobs, and decrypts responses against its vault.

#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "fhedge/wire.hpp"

namespace fhedge::agents {

struct EdgeConfig {
    std::string listen_addr = "127.0.0.1";
    int port = 0;  // 0 = ephemeral
    std::string data_dir;
};

// Long-running edge agent: DEPLOY stores a package (write-then-rename),
// INFER_REQ runs the encrypted forward pass. Malformed frames get an ERROR
// reply and the connection survives.
class EdgeAgent {
  public:
    explicit EdgeAgent(EdgeConfig cfg);
    ~EdgeAgent();

    void start();
    void stop();
    int port() const { return port_; }

    // also used by the CLI for a synchronous foreground run
    void run_until(const std::atomic<bool>& stop_flag);

  private:
    void accept_loop();
    void serve_connection(int fd);
    WireMessage handle(const WireMessage& msg);
    protect::DeploymentPackage& package_for(const std::string& model_id);

    EdgeConfig cfg_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
    std::mutex mu_;  // package cache and worker list
    std::map<std::string, std::shared_ptr<protect::DeploymentPackage>> cache_;
    ring::Rng edge_rng_{0xED6E5EEDULL};
    std::mutex rng_mu_;
};

// ---------------------------------------------------------------------------
// Backend client calls

struct InferenceJob {
    std::uint64_t job_id = 0;
    std::string model_id;
    einfer::InputMode mode = einfer::InputMode::plaintext_input;
    std::vector<std::vector<double>> batch;
};

struct StageTimings {
    double deploy_s = 0;
    double request_s = 0;  // send + edge compute + receive
    double decrypt_s = 0;
};

class AgentError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Pushes a package to an edge agent; returns the edge's acknowledgement.
std::string backend_deploy(const std::string& addr, int port,
                           const protect::DeploymentPackage& pkg,
                           StageTimings* timings = nullptr);

// Runs a job remotely; returns the still-encrypted response.
InferResponseBody backend_infer(const std::string& addr, int port,
                                const InferenceJob& job,
                                StageTimings* timings = nullptr);

// Decrypts a response with the vault record for its model id. A record/
// response mismatch (wrong model, wrong params) is an explicit error, never
// silent garbage.
einfer::DecryptedOutput backend_decrypt(const InferResponseBody& resp,
                                        const protect::KeyVaultRecord& record,
                                        StageTimings* timings = nullptr);
einfer::DecryptedOutput backend_decrypt(const InferResponseBody& resp,
                                        const protect::KeyVault& vault,
                                        StageTimings* timings = nullptr);

// Edge STATUS probe: returns the edge's model list line.
std::string backend_status(const std::string& addr, int port);

}  // namespace fhedge::agents
