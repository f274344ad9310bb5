#include "pide/server.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <set>
#include <system_error>
#include <thread>
#include <variant>

namespace pide::protocol {

namespace {

std::system_error sys_error(const std::string& what) { return {errno, std::generic_category(), what}; }

}  // namespace

// Session

struct Session::Impl final : ExecObserver {
  using Event = std::variant<CheckerMessage, ExecStatus>;

  struct Known {
    NodeName node;
    Offset base = 0;
    ExecStatus last = ExecStatus::unprocessed;
  };

  std::shared_ptr<const CheckerRegistry> registry;
  DocumentState::Options options;
  Output output;

  mutable std::mutex mutex;
  std::map<ExecId, Known> known;
  std::map<ExecId, std::vector<Event>> held;  // events that overtook their `assigned`
  std::unique_ptr<DocumentState> state;       // declared last: destroyed first

  Impl(std::shared_ptr<const CheckerRegistry> r, DocumentState::Options o, Output out)
      : registry(std::move(r)), options(std::move(o)), output(std::move(out)) {}

  ~Impl() override { state.reset(); }

  void on_message(ExecId id, const NodeName&, const CheckerMessage& m) override {
    std::lock_guard lock(mutex);
    deliver_locked(id, m);
  }

  void on_status(ExecId id, const NodeName&, ExecStatus s) override {
    std::lock_guard lock(mutex);
    deliver_locked(id, s);
  }

  void deliver_locked(ExecId id, Event event) {
    auto it = known.find(id);
    if (it == known.end()) {
      held[id].push_back(std::move(event));
      return;
    }
    Known& k = it->second;
    if (is_terminal(k.last)) return;
    if (auto* m = std::get_if<CheckerMessage>(&event)) {
      m->range = m->range.shifted(k.base);
      if (m->fix) m->fix->range = m->fix->range.shifted(k.base);
      output(msg::report(id, Report{k.node, std::move(*m)}));
    } else {
      const ExecStatus s = std::get<ExecStatus>(event);
      if (s == k.last) return;
      k.last = s;
      output(msg::status(id, s));
    }
  }

  void announce(const DocumentState::Update& update) {
    std::lock_guard lock(mutex);
    output(msg::assigned(update.version->id, update.assignment));
    std::set<ExecId> current;
    for (const auto& [node, spans] : update.assignment.nodes) {
      for (const auto& s : spans) {
        known.try_emplace(s.exec, Known{node, s.range.begin, ExecStatus::unprocessed});
        current.insert(s.exec);
      }
    }
    auto pending = std::move(held);
    held.clear();
    for (auto& [id, events] : pending) {
      if (!known.contains(id)) continue;
      for (auto& e : events) deliver_locked(id, std::move(e));
    }
    for (auto it = known.begin(); it != known.end();) {
      if (is_terminal(it->second.last) && !current.contains(it->first)) {
        it = known.erase(it);
      } else {
        ++it;
      }
    }
    if (!update.removed_versions.empty()) output(msg::removed_versions(update.removed_versions));
  }

  void expect_arity(const Message& m, std::size_t lo, std::size_t hi) {
    if (m.arity() < lo || m.arity() > hi) {
      const std::string want = lo == hi ? std::to_string(lo) : std::to_string(lo) + " to " + std::to_string(hi);
      throw ProtocolError("expects " + want + " arguments, got " + std::to_string(m.arity()));
    }
  }

  void require_started() {
    if (!state) throw ProtocolError("no session started");
  }

  static std::optional<VersionId> version_arg(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_number(s, "version id");
  }

  void dispatch(const Message& m) {
    const std::string& name = m.name();
    if (name == "session_start") {
      expect_arity(m, 0, 1);
      if (state) throw ProtocolError("session already started");
      auto o = options;
      if (m.arity() == 1 && !m.arg(0).empty()) o.engine.session = m.arg(0);
      state = std::make_unique<DocumentState>(registry, std::move(o), this);
    } else if (name == "node_edits") {
      expect_arity(m, 2, 2);
      require_started();
      const auto version = version_arg(m.arg(0));
      const auto edits = decode_edits(yxml::parse(m.arg(1)));
      announce(state->apply(edits, version));
    } else if (name == "blob_update") {
      expect_arity(m, 3, 3);
      require_started();
      const auto version = version_arg(m.arg(0));
      NodeName node;
      try {
        node = NodeName::file(m.arg(1));
      } catch (const std::invalid_argument& e) {
        throw ProtocolError(e.what());
      }
      announce(state->apply({{node, edit::SetNode{utf8::decode(m.arg(2))}}}, version));
    } else if (name == "dialog_result") {
      expect_arity(m, 2, 2);
      require_started();
      throw ProtocolError("no dialog \"" + m.arg(0) + "\" is open");
    } else {
      throw ProtocolError("unknown message \"" + name + "\"");
    }
  }
};

Session::Session(std::shared_ptr<const CheckerRegistry> registry, DocumentState::Options options, Output output)
    : impl_(std::make_unique<Impl>(std::move(registry), std::move(options), std::move(output))) {}

Session::~Session() = default;

void Session::handle(const Message& message) {
  if (message.chunks.empty()) {
    impl_->output(msg::protocol_error("empty message"));
    return;
  }
  try {
    impl_->dispatch(message);
  } catch (const std::exception& e) {
    static const std::set<std::string> vocabulary{"session_start", "node_edits", "blob_update", "dialog_result"};
    const std::string prefix =
        vocabulary.contains(message.name()) ? "message \"" + message.name() + "\": " : std::string();
    impl_->output(msg::protocol_error(prefix + e.what()));
  }
}

bool Session::started() const { return impl_->state != nullptr; }

DocumentState* Session::state() { return impl_->state.get(); }

// Trace

Trace::Trace(const char* v) {
  if (!v || !*v) return;
  const std::string s(v);
  if (s == "-" || s == "1") {
    out_ = stderr;
  } else {
    out_ = std::fopen(v, "a");
  }
}

Trace::~Trace() {
  if (out_ && out_ != stderr) std::fclose(out_);
}

Trace& Trace::global() {
  static Trace trace(std::getenv("PIDE_PROTOCOL_TRACE"));
  return trace;
}

void Trace::log(char direction, const Message& message) {
  if (!out_) return;
  std::string line(1, direction);
  line += ' ';
  line += message.chunks.empty() ? std::string("(empty)") : yxml::clean(message.name());
  for (std::size_t i = 1; i < message.chunks.size(); ++i) {
    line += i == 1 ? " [" : ",";
    line += std::to_string(message.chunks[i].size());
    if (i + 1 == message.chunks.size()) line += ']';
  }
  line += '\n';
  std::lock_guard lock(mutex_);
  std::fputs(line.c_str(), out_);
  std::fflush(out_);
}

// WakePipe

WakePipe::WakePipe() {
  if (::pipe2(fds_, O_CLOEXEC | O_NONBLOCK) != 0) throw sys_error("pipe");
}

WakePipe::~WakePipe() {
  ::close(fds_[0]);
  ::close(fds_[1]);
}

void WakePipe::signal() noexcept {
  const char c = 1;
  [[maybe_unused]] auto n = ::write(fds_[1], &c, 1);
}

bool WakePipe::signalled() const {
  pollfd p{fds_[0], POLLIN, 0};
  return ::poll(&p, 1, 0) > 0;
}

// Transports

bool write_all(int fd, std::string_view bytes) {
  bool socket = true;
  while (!bytes.empty()) {
    ssize_t n = socket ? ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL) : ::write(fd, bytes.data(), bytes.size());
    if (n < 0 && socket && errno == ENOTSOCK) {
      socket = false;
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    if (n < 0 && errno == EAGAIN) {
      pollfd p{fd, POLLOUT, 0};
      ::poll(&p, 1, 100);
      continue;
    }
    if (n <= 0) return false;
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

std::string_view to_string(ServeEnd e) {
  switch (e) {
    case ServeEnd::eof: return "eof";
    case ServeEnd::protocol_error: return "protocol error";
    case ServeEnd::interrupted: return "interrupted";
  }
  return "?";
}

namespace {

// Single writer draining an unbounded queue, so producers never block on
// the peer.
class Writer {
 public:
  explicit Writer(int fd) : fd_(fd), thread_([this] { loop(); }) {}
  ~Writer() { close(); }

  void push(Message m) {
    {
      std::lock_guard lock(mutex_);
      if (closed_) return;
      queue_.push_back(std::move(m));
    }
    cv_.notify_one();
  }

  void close() {
    {
      std::lock_guard lock(mutex_);
      closed_ = true;
    }
    cv_.notify_one();
    if (thread_.joinable()) thread_.join();
  }

 private:
  void loop() {
    bool alive = true;
    while (true) {
      std::deque<Message> batch;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return closed_ || !queue_.empty(); });
        if (queue_.empty()) return;
        batch.swap(queue_);
      }
      std::string bytes;
      for (const auto& m : batch) {
        Trace::global().log('>', m);
        bytes += encode(m);
      }
      if (alive) alive = write_all(fd_, bytes);
    }
  }

  int fd_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Message> queue_;
  bool closed_ = false;
  std::thread thread_;
};

}  // namespace

ServeEnd serve(int in_fd, int out_fd, const ServeOptions& options) {
  Writer writer(out_fd);
  auto session = std::make_unique<Session>(options.registry, options.state,
                                           [&writer](Message m) { writer.push(std::move(m)); });
  Decoder decoder;
  ServeEnd end = ServeEnd::eof;
  std::vector<char> buffer(64 * 1024);
  while (true) {
    pollfd fds[2] = {{in_fd, POLLIN, 0}, {options.wake ? options.wake->read_fd() : -1, POLLIN, 0}};
    if (::poll(fds, 2, -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (fds[1].revents & POLLIN) {
      end = ServeEnd::interrupted;
      break;
    }
    if (!(fds[0].revents & (POLLIN | POLLHUP | POLLERR))) continue;
    const ssize_t n = ::read(in_fd, buffer.data(), buffer.size());
    if (n < 0 && (errno == EINTR || errno == EAGAIN)) continue;
    if (n <= 0) break;
    try {
      decoder.feed({buffer.data(), static_cast<std::size_t>(n)});
    } catch (const ProtocolError& e) {
      writer.push(msg::protocol_error(e.what()));
      end = ServeEnd::protocol_error;
      break;
    }
    while (auto m = decoder.next()) {
      Trace::global().log('<', *m);
      session->handle(*m);
    }
  }
  session.reset();
  writer.close();
  return end;
}

int listen_unix(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof addr.sun_path) {
    throw std::system_error(std::make_error_code(std::errc::filename_too_long), "socket path " + path);
  }
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  struct stat st {};
  if (::stat(path.c_str(), &st) == 0 && S_ISSOCK(st.st_mode)) ::unlink(path.c_str());
  const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw sys_error("socket");
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 1) != 0) {
    auto err = sys_error("bind " + path);
    ::close(fd);
    throw err;
  }
  return fd;
}

int accept_one(int listen_fd, const WakePipe* wake) {
  while (true) {
    pollfd fds[2] = {{listen_fd, POLLIN, 0}, {wake ? wake->read_fd() : -1, POLLIN, 0}};
    if (::poll(fds, 2, -1) < 0) {
      if (errno == EINTR) continue;
      throw sys_error("poll");
    }
    if (fds[1].revents & POLLIN) return -1;
    if (fds[0].revents & POLLIN) {
      const int fd = ::accept4(listen_fd, nullptr, nullptr, SOCK_CLOEXEC);
      if (fd >= 0) return fd;
      if (errno != EINTR && errno != ECONNABORTED) throw sys_error("accept");
    }
  }
}

// Client

Client::Client(int fd) : fd_(fd) {}

Client::~Client() {
  if (fd_ >= 0) ::close(fd_);
}

Client Client::connect_unix(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof addr.sun_path) {
    throw std::system_error(std::make_error_code(std::errc::filename_too_long), "socket path " + path);
  }
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw sys_error("socket");
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    auto err = sys_error("connect " + path);
    ::close(fd);
    throw err;
  }
  return Client(fd);
}

void Client::send(const Message& message) {
  if (!write_all(fd_, encode(message))) throw ProtocolError("connection closed");
}

void Client::finish() { ::shutdown(fd_, SHUT_WR); }

std::optional<Message> Client::receive(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::vector<char> buffer(64 * 1024);
  while (true) {
    if (auto m = decoder_.next()) return m;
    if (eof_) return std::nullopt;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd p{fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, static_cast<int>(left.count()));
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return std::nullopt;
    const ssize_t n = ::read(fd_, buffer.data(), buffer.size());
    if (n < 0 && (errno == EINTR || errno == EAGAIN)) continue;
    if (n <= 0) {
      eof_ = true;
      continue;
    }
    decoder_.feed({buffer.data(), static_cast<std::size_t>(n)});
  }
}

}  // namespace pide::protocol
