#include "pide/external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>

extern char** environ;

namespace pide {
namespace {

using Clock = std::chrono::steady_clock;

std::optional<std::size_t> parse_offset(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

class TempDir {
 public:
  explicit TempDir(const std::filesystem::path& root) {
    std::string pattern = (root / "pide-check-XXXXXX").string();
    if (!mkdtemp(pattern.data())) {
      throw std::runtime_error("cannot create temporary directory under " + root.string() + ": " +
                               std::strerror(errno));
    }
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct Pipe {
  int read = -1;
  int write = -1;
  Pipe() {
    int fds[2];
    if (pipe2(fds, O_CLOEXEC) != 0) throw std::runtime_error("pipe: " + std::string(std::strerror(errno)));
    read = fds[0];
    write = fds[1];
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  void close_read() {
    if (read >= 0) ::close(read);
    read = -1;
  }
  void close_write() {
    if (write >= 0) ::close(write);
    write = -1;
  }
};

class SpawnFiles {
 public:
  SpawnFiles() { posix_spawn_file_actions_init(&actions_); }
  ~SpawnFiles() { posix_spawn_file_actions_destroy(&actions_); }
  posix_spawn_file_actions_t* get() { return &actions_; }

 private:
  posix_spawn_file_actions_t actions_;
};

class SpawnAttrs {
 public:
  SpawnAttrs() {
    posix_spawnattr_init(&attr_);
    posix_spawnattr_setpgroup(&attr_, 0);
    sigset_t empty;
    sigemptyset(&empty);
    posix_spawnattr_setsigmask(&attr_, &empty);
    sigset_t defaults;
    sigemptyset(&defaults);
    sigaddset(&defaults, SIGINT);
    sigaddset(&defaults, SIGTERM);
    sigaddset(&defaults, SIGPIPE);
    posix_spawnattr_setsigdefault(&attr_, &defaults);
    posix_spawnattr_setflags(&attr_, POSIX_SPAWN_SETPGROUP | POSIX_SPAWN_SETSIGMASK |
                                         POSIX_SPAWN_SETSIGDEF);
  }
  ~SpawnAttrs() { posix_spawnattr_destroy(&attr_); }
  posix_spawnattr_t* get() { return &attr_; }

 private:
  posix_spawnattr_t attr_;
};

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

std::optional<CheckerMessage> parse_message_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::string_view fields[3];
  for (auto& f : fields) {
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) return std::nullopt;
    f = line.substr(0, tab);
    line.remove_prefix(tab + 1);
  }
  auto severity = parse_severity(fields[0]);
  auto start = parse_offset(fields[1]);
  auto end = parse_offset(fields[2]);
  if (!severity || !start || !end) return std::nullopt;
  if (line.empty() && *severity != Severity::status) return std::nullopt;
  CheckerMessage msg = make_message(*severity, {*start, *end}, line);
  return msg;
}

std::string tool_override_variable(std::string_view checker_id) {
  std::string var = "PIDE_TOOL_";
  for (char c : checker_id) {
    var.push_back(std::isalnum(static_cast<unsigned char>(c))
                      ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                      : '_');
  }
  return var;
}

ExternalChecker::ExternalChecker(Options options) : options_(std::move(options)) {
  if (split_words(options_.command_template).empty()) {
    throw std::invalid_argument("empty command template for checker \"" + options_.checker_id + "\"");
  }
}

CheckOutcome ExternalChecker::check(TextView content, std::stop_token cancel, const MessageSink& emit) {
  const Range whole{0, content.size()};
  const std::string input = utf8::encode(content);
  const auto root = options_.temp_root.empty() ? std::filesystem::temp_directory_path()
                                               : options_.temp_root;
  TempDir temp(root);

  std::vector<std::string> argv = split_words(options_.command_template);
  bool via_file = false;
  for (auto& arg : argv) {
    for (auto pos = arg.find("{file}"); pos != std::string::npos; pos = arg.find("{file}", pos)) {
      const std::string file = (temp.path() / "input").string();
      arg.replace(pos, 6, file);
      pos += file.size();
      via_file = true;
    }
  }
  if (const char* override_path = std::getenv(tool_override_variable(options_.checker_id).c_str());
      override_path && *override_path) {
    argv[0] = override_path;
  }
  if (via_file) {
    std::ofstream out(temp.path() / "input", std::ios::binary);
    out << input;
  }

  Pipe in, out, err;
  SpawnFiles files;
  if (via_file) {
    posix_spawn_file_actions_addopen(files.get(), 0, "/dev/null", O_RDONLY, 0);
  } else {
    posix_spawn_file_actions_adddup2(files.get(), in.read, 0);
  }
  posix_spawn_file_actions_adddup2(files.get(), out.write, 1);
  posix_spawn_file_actions_adddup2(files.get(), err.write, 2);
  posix_spawn_file_actions_addchdir_np(files.get(), temp.path().c_str());
  SpawnAttrs attrs;

  std::vector<char*> cargv;
  for (auto& a : argv) cargv.push_back(a.data());
  cargv.push_back(nullptr);

  pid_t pid = 0;
  if (int rc = posix_spawnp(&pid, cargv[0], files.get(), attrs.get(), cargv.data(), environ);
      rc != 0) {
    emit(make_message(Severity::error, whole,
                      "cannot start tool \"" + argv[0] + "\": " + std::strerror(rc)));
    return CheckOutcome::failed;
  }
  in.close_read();
  out.close_write();
  err.close_write();
  if (via_file) in.close_write();
  if (in.write >= 0) fcntl(in.write, F_SETFL, O_NONBLOCK);

  std::size_t written = 0;
  std::string out_buffer, err_text;
  bool unparseable = false;
  std::size_t parsed = 0;
  std::optional<Clock::time_point> interrupted;
  bool killed = false;
  int status = 0;
  bool exited = false;

  auto handle_line = [&](std::string_view line) {
    if (line.empty() || line == "\r") return;
    auto msg = parse_message_line(line);
    if (!msg) {
      unparseable = true;
      emit(make_message(Severity::warning, {0, 0},
                        "unparseable tool output: " + std::string(line.substr(0, 200))));
      return;
    }
    ++parsed;
    if (!whole.contains(msg->range) || msg->range.begin > msg->range.end) {
      const Range original = msg->range;
      msg->range.begin = std::min(original.begin, content.size());
      msg->range.end = std::clamp(original.end, msg->range.begin, content.size());
      emit(*msg);
      emit(make_message(Severity::warning, msg->range,
                        "malformed message position " + to_string(original) + " clamped to " +
                            to_string(msg->range)));
      return;
    }
    emit(*msg);
  };

  while (true) {
    if (cancel.stop_requested() && !interrupted) {
      kill(-pid, SIGINT);
      interrupted = Clock::now();
    }
    if (interrupted && !killed && Clock::now() - *interrupted >= options_.deadline) {
      kill(-pid, SIGKILL);
      killed = true;
    }
    std::vector<pollfd> fds;
    if (out.read >= 0) fds.push_back({out.read, POLLIN, 0});
    if (err.read >= 0) fds.push_back({err.read, POLLIN, 0});
    if (in.write >= 0) fds.push_back({in.write, POLLOUT, 0});
    if (fds.empty()) {
      if (!exited) {
        const pid_t w = waitpid(pid, &status, WNOHANG);
        if (w == pid) {
          exited = true;
        } else {
          usleep(5000);
          continue;
        }
      }
      break;
    }
    if (poll(fds.data(), fds.size(), 20) < 0 && errno != EINTR) break;
    for (const auto& p : fds) {
      if (p.revents == 0) continue;
      if (p.fd == in.write) {
        const ssize_t n = ::write(in.write, input.data() + written, input.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 && errno != EAGAIN) written = input.size();
        if (written >= input.size()) in.close_write();
        continue;
      }
      char buffer[4096];
      const ssize_t n = ::read(p.fd, buffer, sizeof buffer);
      if (n <= 0) {
        if (n < 0 && (errno == EAGAIN || errno == EINTR)) continue;
        if (p.fd == out.read) {
          out.close_read();
        } else {
          err.close_read();
        }
        continue;
      }
      if (p.fd == out.read) {
        out_buffer.append(buffer, static_cast<std::size_t>(n));
        std::size_t nl;
        while ((nl = out_buffer.find('\n')) != std::string::npos) {
          if (!interrupted) handle_line(std::string_view(out_buffer).substr(0, nl));
          out_buffer.erase(0, nl + 1);
        }
      } else if (err_text.size() < 4096) {
        err_text.append(buffer, static_cast<std::size_t>(n));
      }
    }
  }
  if (!out_buffer.empty() && !interrupted) handle_line(out_buffer);
  if (!exited) waitpid(pid, &status, 0);

  if (interrupted) {
    if (killed) {
      emit(make_message(Severity::error, whole,
                        "tool \"" + argv[0] + "\" killed after ignoring interrupt for " +
                            std::to_string(options_.deadline.count()) + " ms"));
    }
    return CheckOutcome::cancelled;
  }
  while (!err_text.empty() && (err_text.back() == '\n' || err_text.back() == '\r')) err_text.pop_back();
  if (WIFSIGNALED(status)) {
    emit(make_message(Severity::error, whole,
                      "tool \"" + argv[0] + "\" terminated by signal " +
                          std::to_string(WTERMSIG(status))));
    return CheckOutcome::failed;
  }
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (code != 0 && (unparseable || parsed == 0)) {
    std::string text = "tool \"" + argv[0] + "\" failed with exit code " + std::to_string(code);
    if (!err_text.empty()) text += ": " + err_text;
    emit(make_message(Severity::error, whole, text));
    return CheckOutcome::failed;
  }
  return CheckOutcome::finished;
}

}  // namespace pide
