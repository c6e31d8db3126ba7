// SPDX-License-Identifier: Apache-2.0

#include "fhedge/wire.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>
#include <zlib.h>

#include <cerrno>
#include <cstring>

#include "fhedge/serial.hpp"

namespace fhedge::agents {

std::vector<std::uint8_t> frame_message(const WireMessage& msg) {
    serial::Writer w;
    w.bytes(kWireMagic.data(), kWireMagic.size());
    w.u8(kWireVersion);
    w.u8(std::uint8_t(msg.type));
    w.u64(msg.payload.size());
    w.bytes(msg.payload.data(), msg.payload.size());
    std::uint32_t crc = std::uint32_t(
        crc32(0L, reinterpret_cast<const Bytef*>(w.data().data()), uInt(w.data().size())));
    w.u32(crc);
    return w.take();
}

WireMessage parse_frame(const std::uint8_t* data, std::size_t len) {
    constexpr std::size_t header = 4 + 1 + 1 + 8;
    if (len < header + 4) throw FrameError("frame shorter than header + trailer");
    if (std::memcmp(data, kWireMagic.data(), 4) != 0)
        throw FrameError("bad frame magic");
    if (data[4] != kWireVersion) throw FrameError("unsupported wire version");
    std::uint8_t type = data[5];
    if (type < 1 || type > 5) throw FrameError("unknown message type");
    std::uint64_t plen = 0;
    for (int i = 0; i < 8; ++i) plen |= std::uint64_t(data[6 + i]) << (8 * i);
    if (plen != len - header - 4) throw FrameError("frame length mismatch");
    std::uint32_t want = 0;
    for (int i = 0; i < 4; ++i) want |= std::uint32_t(data[len - 4 + i]) << (8 * i);
    std::uint32_t got =
        std::uint32_t(crc32(0L, reinterpret_cast<const Bytef*>(data), uInt(len - 4)));
    if (want != got) throw FrameError("frame CRC mismatch");
    WireMessage msg;
    msg.type = MsgType(type);
    msg.payload.assign(data + header, data + len - 4);
    return msg;
}

std::vector<std::uint8_t> encode_deploy(const DeployBody& b) {
    serial::Writer w;
    w.str(b.model_id);
    w.blob(b.package_bytes);
    return w.take();
}

DeployBody decode_deploy(const std::vector<std::uint8_t>& payload) {
    serial::Reader r(payload);
    DeployBody b;
    b.model_id = r.str();
    b.package_bytes = r.blob();
    return b;
}

std::vector<std::uint8_t> encode_infer_request(const InferRequestBody& b) {
    serial::Writer w;
    w.u64(b.job_id);
    w.str(b.model_id);
    w.u8(b.mode == einfer::InputMode::plaintext_input ? 0 : 1);
    w.u64(b.batch.size());
    w.u64(b.batch.empty() ? 0 : b.batch[0].size());
    for (const auto& row : b.batch)
        for (double v : row) w.f64(v);
    return w.take();
}

InferRequestBody decode_infer_request(const std::vector<std::uint8_t>& payload) {
    serial::Reader r(payload);
    InferRequestBody b;
    b.job_id = r.u64();
    b.model_id = r.str();
    b.mode = r.u8() == 0 ? einfer::InputMode::plaintext_input
                         : einfer::InputMode::encrypted_input;
    std::size_t rows = r.u64(), cols = r.u64();
    b.batch.assign(rows, std::vector<double>(cols));
    for (auto& row : b.batch)
        for (auto& v : row) v = r.f64();
    return b;
}

std::vector<std::uint8_t> encode_infer_response(const InferResponseBody& b) {
    serial::Writer w;
    w.u64(b.job_id);
    w.str(b.model_id);
    w.u64(b.params_fp);
    w.u64(b.key_fp);
    w.u64(b.batch_size);
    w.u32(b.scale_power);
    w.u64(b.codec_scale);
    w.u64(b.logit_blobs.size());
    for (const auto& blob : b.logit_blobs) w.blob(blob);
    w.str(b.trace_csv);
    w.f64(b.edge_seconds);
    return w.take();
}

InferResponseBody decode_infer_response(const std::vector<std::uint8_t>& payload) {
    serial::Reader r(payload);
    InferResponseBody b;
    b.job_id = r.u64();
    b.model_id = r.str();
    b.params_fp = r.u64();
    b.key_fp = r.u64();
    b.batch_size = r.u64();
    b.scale_power = r.u32();
    b.codec_scale = r.u64();
    std::size_t n = r.u64();
    b.logit_blobs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) b.logit_blobs.push_back(r.blob());
    b.trace_csv = r.str();
    b.edge_seconds = r.f64();
    return b;
}

std::vector<std::uint8_t> encode_error(const ErrorBody& b) {
    serial::Writer w;
    w.u64(b.job_id);
    w.str(b.message);
    return w.take();
}

ErrorBody decode_error(const std::vector<std::uint8_t>& payload) {
    serial::Reader r(payload);
    ErrorBody b;
    b.job_id = r.u64();
    b.message = r.str();
    return b;
}

// ---------------------------------------------------------------------------

namespace net {

namespace {

[[noreturn]] void sys_fail(const std::string& what) {
    throw std::runtime_error(what + ": " + std::strerror(errno));
}

}  // namespace

int listen_on(const std::string& addr, int port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) sys_fail("socket");
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(std::uint16_t(port));
    if (::inet_pton(AF_INET, addr.c_str(), &sa.sin_addr) != 1) {
        ::close(fd);
        throw std::runtime_error("bad listen address: " + addr);
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
        ::close(fd);
        sys_fail("bind " + addr + ":" + std::to_string(port));
    }
    if (::listen(fd, 16) != 0) {
        ::close(fd);
        sys_fail("listen");
    }
    return fd;
}

int bound_port(int listen_fd) {
    sockaddr_in sa{};
    socklen_t len = sizeof sa;
    if (::getsockname(listen_fd, reinterpret_cast<sockaddr*>(&sa), &len) != 0)
        sys_fail("getsockname");
    return ntohs(sa.sin_port);
}

int connect_to(const std::string& addr, int port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) sys_fail("socket");
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(std::uint16_t(port));
    if (::inet_pton(AF_INET, addr.c_str(), &sa.sin_addr) != 1) {
        ::close(fd);
        throw std::runtime_error("bad address: " + addr);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
        ::close(fd);
        sys_fail("connect " + addr + ":" + std::to_string(port));
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return fd;
}

void close_fd(int fd) {
    if (fd >= 0) ::close(fd);
}

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
    while (len > 0) {
        ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            sys_fail("send");
        }
        data += n;
        len -= std::size_t(n);
    }
}

bool read_exact(int fd, std::uint8_t* data, std::size_t len) {
    std::size_t got = 0;
    while (got < len) {
        ssize_t n = ::recv(fd, data + got, len - got, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            sys_fail("recv");
        }
        if (n == 0) {
            if (got == 0) return false;  // clean EOF between frames
            throw FrameError("connection closed mid-frame");
        }
        got += std::size_t(n);
    }
    return true;
}

void send_message(int fd, const WireMessage& msg) {
    auto bytes = frame_message(msg);
    write_all(fd, bytes.data(), bytes.size());
}

std::optional<WireMessage> recv_message(int fd) {
    constexpr std::size_t header = 4 + 1 + 1 + 8;
    std::uint8_t head[header];
    if (!read_exact(fd, head, header)) return std::nullopt;
    if (std::memcmp(head, kWireMagic.data(), 4) != 0)
        throw FrameError("bad frame magic");
    std::uint64_t plen = 0;
    for (int i = 0; i < 8; ++i) plen |= std::uint64_t(head[6 + i]) << (8 * i);
    if (plen > kMaxFrameBytes) throw FrameError("frame length over limit");
    std::vector<std::uint8_t> rest(plen + 4);
    if (!read_exact(fd, rest.data(), rest.size()))
        throw FrameError("connection closed mid-frame");
    std::vector<std::uint8_t> full(head, head + header);
    full.insert(full.end(), rest.begin(), rest.end());
    return parse_frame(full.data(), full.size());
}

}  // namespace net

}  // namespace fhedge::agents
