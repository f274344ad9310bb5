#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "pide/execution.hpp"
#include "pide/protocol.hpp"

namespace pide::protocol {

/// Transport-independent server side of one connection. Client messages go
/// to handle(); server messages leave through the output function, which
/// may be called from worker threads and must not block for long.
///
/// Ordering: `assigned` precedes every event of the exec ids it introduces,
/// each exec id reports status transitions in order, and nothing follows
/// its terminal status.
class Session {
 public:
  using Output = std::function<void(Message)>;

  Session(std::shared_ptr<const CheckerRegistry> registry, DocumentState::Options options, Output output);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  void handle(const Message& message);

  bool started() const;
  /// Null before session_start.
  DocumentState* state();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Protocol trace from the PIDE_PROTOCOL_TRACE environment variable:
/// unset or empty is off, "-" or "1" is stderr, anything else a file
/// appended to.
class Trace {
 public:
  /// `spec` as for the environment variable.
  explicit Trace(const char* spec);
  ~Trace();
  Trace(const Trace&) = delete;
  Trace& operator=(const Trace&) = delete;

  static Trace& global();
  bool enabled() const noexcept { return out_ != nullptr; }
  void log(char direction, const Message& message);

 private:
  std::mutex mutex_;
  std::FILE* out_ = nullptr;
};

/// Self-pipe that can be signalled from a signal handler.
class WakePipe {
 public:
  WakePipe();
  ~WakePipe();
  WakePipe(const WakePipe&) = delete;
  WakePipe& operator=(const WakePipe&) = delete;

  /// Async-signal-safe.
  void signal() noexcept;
  bool signalled() const;
  int read_fd() const noexcept { return fds_[0]; }

 private:
  int fds_[2];
};

struct ServeOptions {
  std::shared_ptr<const CheckerRegistry> registry;
  DocumentState::Options state;
  const WakePipe* wake = nullptr;
};

enum class ServeEnd { eof, protocol_error, interrupted };

std::string_view to_string(ServeEnd e);

/// Runs one connection until the input ends, a framing error occurs (after
/// reporting it) or `wake` is signalled. Pending output is flushed first.
ServeEnd serve(int in_fd, int out_fd, const ServeOptions& options);

/// Listening unix socket at `path` (an existing socket file is replaced).
/// Throws std::system_error.
int listen_unix(const std::string& path);
/// Accepted connection, or -1 when `wake` is signalled first.
int accept_one(int listen_fd, const WakePipe* wake);

/// Headless client over a connected descriptor, which it owns.
class Client {
 public:
  explicit Client(int fd);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  static Client connect_unix(const std::string& path);

  void send(const Message& message);
  /// Next message; nullopt on timeout or end of stream.
  std::optional<Message> receive(std::chrono::milliseconds timeout);
  /// Half-closes the sending direction.
  void finish();
  bool at_eof() const noexcept { return eof_; }

 private:
  int fd_;
  Decoder decoder_;
  bool eof_ = false;
};

/// Writes all of `bytes`; false when the peer is gone.
bool write_all(int fd, std::string_view bytes);

}  // namespace pide::protocol
