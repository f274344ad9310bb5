#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <unordered_map>
#include <vector>

#include "pide/digest.hpp"
#include "pide/pretty.hpp"
#include "pide/sessions.hpp"
#include "pide/text.hpp"

namespace pide {

enum class Severity { status, writeln, warning, error };
enum class Phase { syntax, semantics };

std::string_view to_string(Severity s);
std::string_view to_string(Phase p);
std::optional<Severity> parse_severity(std::string_view s);

/// Replacement edit offered to the user ("active" markup).
struct ActiveFix {
  Range range;
  std::string replacement;  // UTF-8
  std::string label;

  friend bool operator==(const ActiveFix&, const ActiveFix&) = default;
};

struct CheckerMessage {
  Severity severity = Severity::writeln;
  Range range;
  pretty::Tree body;
  Phase phase = Phase::semantics;
  std::optional<ActiveFix> fix;

  /// Body rendered on one line.
  std::string text() const { return pretty::unbroken(body); }

  friend bool operator==(const CheckerMessage&, const CheckerMessage&) = default;
};

CheckerMessage make_message(Severity severity, Range range, std::string_view text,
                            Phase phase = Phase::semantics);

using MessageSink = std::function<void(const CheckerMessage&)>;

enum class CheckOutcome { finished, failed, cancelled };

std::string_view to_string(CheckOutcome o);

/// A function from input text to a stream of messages.
class Checker {
 public:
  virtual ~Checker() = default;
  virtual CheckOutcome check(TextView content, std::stop_token cancel, const MessageSink& emit) = 0;
};

/// Per-sub-element result cache keyed by source digest. Concurrent callers
/// asking for the same key share one computation. Values are message lists
/// with ranges relative to the sub-element.
class BlockCache {
 public:
  /// `capacity` 0 means unbounded.
  explicit BlockCache(std::size_t capacity = 0, bool enabled = true)
      : capacity_(capacity), enabled_(enabled) {}

  using Value = std::vector<CheckerMessage>;
  /// `compute` returns nullopt when cancelled; nothing is cached then.
  std::optional<Value> get_or_compute(const Digest& key, const std::function<std::optional<Value>()>& compute,
                                      std::stop_token cancel = {});

  std::size_t evaluations() const noexcept { return evaluations_.load(); }
  std::size_t hits() const noexcept { return hits_.load(); }
  std::size_t size() const;
  bool enabled() const noexcept { return enabled_; }
  void reset_counters() noexcept {
    evaluations_ = 0;
    hits_ = 0;
  }

 private:
  struct Slot {
    bool ready = false;
    Value value;
    std::list<Digest>::iterator lru;
  };

  std::size_t capacity_;
  bool enabled_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::unordered_map<Digest, std::shared_ptr<Slot>> slots_;
  std::list<Digest> lru_;  // most recent first; ready slots only
  std::atomic<std::size_t> evaluations_{0};
  std::atomic<std::size_t> hits_{0};
};

/// Auxiliary file format: files with `extension` are checked by `checker_id`
/// under a synthetic theory context.
struct FileFormat {
  std::string extension;
  std::string checker_id;
  std::function<TheoryHeader(const std::string& file_name)> theory_template;
};

class RegistryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckerRegistry {
 public:
  void add_checker(const std::string& id, std::shared_ptr<Checker> checker);
  void register_format(FileFormat format);

  const FileFormat* format_for(const std::string& extension) const;
  bool has_checker(const std::string& id) const;
  std::shared_ptr<Checker> checker(const std::string& id) const;
  std::vector<std::string> extensions() const;

  /// Runs a checker. Messages are clamped into the content (with a
  /// malformed-position warning); an exception from the checker becomes a
  /// single error over the whole content and outcome `failed`.
  CheckOutcome check(const std::string& checker_id, TextView content, std::stop_token cancel,
                     const MessageSink& emit) const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Checker>> checkers_;
  std::map<std::string, FileFormat> formats_;
};

/// Default synthetic header for an auxiliary file: theory named after the
/// file, importing nothing.
TheoryHeader default_theory_template(const std::string& file_name);

/// Sleeps up to `ms` milliseconds; false if cancelled first.
bool interruptible_sleep(std::stop_token cancel, long ms);

}  // namespace pide
