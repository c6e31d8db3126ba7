// SPDX-License-Identifier: Apache-2.0
//
// Framed TCP wire protocol between backend and edge agents:
//   magic(4) | version(1) | type(1) | length(8 LE) | payload | CRC-32(4)
// The CRC covers everything from the magic through the payload. Transport
// security is out of scope; the encryption scheme itself is the boundary.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fhedge/einfer.hpp"

namespace fhedge::agents {

enum class MsgType : std::uint8_t {
    DEPLOY = 1,
    INFER_REQ = 2,
    INFER_RESP = 3,
    STATUS = 4,
    ERROR = 5,
};

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::array<std::uint8_t, 4> kWireMagic{'F', 'H', 'E', 'A'};
inline constexpr std::size_t kMaxFrameBytes = std::size_t(4) << 30;

struct WireMessage {
    MsgType type = MsgType::STATUS;
    std::vector<std::uint8_t> payload;
};

class FrameError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> frame_message(const WireMessage& msg);

// Parses one complete frame; throws FrameError on bad magic/version/CRC or a
// length that disagrees with the buffer.
WireMessage parse_frame(const std::uint8_t* data, std::size_t len);

// ---------------------------------------------------------------------------
// Payload bodies

struct DeployBody {
    std::string model_id;
    std::vector<std::uint8_t> package_bytes;
};

struct InferRequestBody {
    std::uint64_t job_id = 0;
    std::string model_id;
    einfer::InputMode mode = einfer::InputMode::plaintext_input;
    std::vector<std::vector<double>> batch;
};

struct InferResponseBody {
    std::uint64_t job_id = 0;
    std::string model_id;
    std::uint64_t params_fp = 0;
    std::uint64_t key_fp = 0;
    std::uint64_t batch_size = 0;
    std::uint32_t scale_power = 0;
    std::uint64_t codec_scale = 0;
    std::vector<std::vector<std::uint8_t>> logit_blobs;  // serialized ciphertexts
    std::string trace_csv;
    double edge_seconds = 0;
};

struct ErrorBody {
    std::uint64_t job_id = 0;  // 0 when not tied to a job
    std::string message;
};

std::vector<std::uint8_t> encode_deploy(const DeployBody&);
DeployBody decode_deploy(const std::vector<std::uint8_t>& payload);
std::vector<std::uint8_t> encode_infer_request(const InferRequestBody&);
InferRequestBody decode_infer_request(const std::vector<std::uint8_t>& payload);
std::vector<std::uint8_t> encode_infer_response(const InferResponseBody&);
InferResponseBody decode_infer_response(const std::vector<std::uint8_t>& payload);
std::vector<std::uint8_t> encode_error(const ErrorBody&);
ErrorBody decode_error(const std::vector<std::uint8_t>& payload);

// ---------------------------------------------------------------------------
// Blocking socket helpers (POSIX)

namespace net {

// Returns a listening fd; port 0 binds an ephemeral port.
int listen_on(const std::string& addr, int port);
int bound_port(int listen_fd);
int connect_to(const std::string& addr, int port);
void close_fd(int fd);

void write_all(int fd, const std::uint8_t* data, std::size_t len);
// false on clean EOF before any byte; throws on mid-read EOF or error.
bool read_exact(int fd, std::uint8_t* data, std::size_t len);

void send_message(int fd, const WireMessage& msg);
// nullopt on clean EOF at a frame boundary; FrameError on corruption.
std::optional<WireMessage> recv_message(int fd);

}  // namespace net

}  // namespace fhedge::agents
