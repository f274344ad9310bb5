#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <thread>
#include <vector>

#include "pide/checker.hpp"
#include "pide/document.hpp"
#include "pide/exports.hpp"
#include "pide/markup.hpp"
#include "pide/theory_checker.hpp"

namespace pide {

using ExecId = std::uint64_t;

enum class ExecStatus { unprocessed, running, finished, failed, cancelled };

std::string_view to_string(ExecStatus s);
std::optional<ExecStatus> parse_exec_status(std::string_view s);
bool is_terminal(ExecStatus s) noexcept;

ExecId fresh_exec_id();

struct AssignedSpan {
  SpanId span = 0;
  ExecId exec = 0;
  Range range;

  friend bool operator==(const AssignedSpan&, const AssignedSpan&) = default;
};

struct Assignment {
  VersionId version = 0;
  std::map<NodeName, std::vector<AssignedSpan>> nodes;
  /// Per node: its imports paired with the exec of their last span (0 if
  /// the import is absent).
  std::map<NodeName, std::vector<std::pair<NodeName, ExecId>>> import_keys;
  /// Nodes in dependency order.
  std::vector<NodeName> order;
  /// Nodes on an import cycle; they are checked without their imports.
  std::set<NodeName> cyclic;

  std::optional<ExecId> exec_of(SpanId span) const;
  std::set<ExecId> exec_ids() const;
};

/// Within each node the longest prefix of unchanged span ids keeps its
/// exec ids, every later span gets a fresh one. Nodes that are new or whose
/// import keys changed are assigned afresh.
Assignment assign(const Version& version, const Assignment* previous);

/// Markup derived from one message: an element named after the severity
/// with the body text, and an "active" child carrying the fix.
MarkupTree add_message_markup(const MarkupTree& tree, const CheckerMessage& msg);

class ExecObserver {
 public:
  virtual ~ExecObserver() = default;
  virtual void on_message(ExecId, const NodeName&, const CheckerMessage&) {}
  virtual void on_status(ExecId, const NodeName&, ExecStatus) {}
};

/// Results of one exec unit; messages and markup relative to its span.
struct ExecView {
  ExecId id = 0;
  NodeName node;
  SpanId span = 0;
  ExecStatus status = ExecStatus::unprocessed;
  std::vector<CheckerMessage> messages;
  MarkupTree markup;
  std::vector<ExportEntry> exports;
};

class Engine {
 public:
  struct Options {
    unsigned workers = 0;  // 0: hardware concurrency
    std::chrono::milliseconds cancel_deadline{2000};
    std::string session = "Draft";
  };

  Engine(std::shared_ptr<const CheckerRegistry> registry, Options options,
         ExecObserver* observer = nullptr);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Installs the assignment of the latest version: obsolete units are
  /// cancelled, new ones created, eligibility recomputed.
  void update(std::shared_ptr<const Version> version, const Assignment& assignment);

  std::optional<ExecView> result(ExecId id) const;
  std::optional<ExecStatus> status(ExecId id) const;

  /// True once no eligible unit is unprocessed and no unit runs.
  bool await_quiescence(std::chrono::milliseconds timeout) const;
  bool quiescent() const;

  /// Ids of all units the engine still holds.
  std::vector<ExecId> live_units() const;
  std::size_t running() const;
  const Options& options() const noexcept { return options_; }

 private:
  struct Unit;

  void worker_loop(std::stop_token stop);
  void watchdog_loop(std::stop_token stop);
  std::shared_ptr<Unit> pick_locked();
  bool quiescent_locked() const;
  void run(const std::shared_ptr<Unit>& unit);
  void notify_status(const Unit& unit, ExecStatus status);

  std::shared_ptr<const CheckerRegistry> registry_;
  Options options_;
  ExecObserver* observer_;

  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::map<ExecId, std::shared_ptr<Unit>> units_;
  std::shared_ptr<const Version> version_;
  bool shutting_down_ = false;
  std::vector<std::jthread> workers_;
  std::jthread watchdog_;
};

struct NodeMessage {
  Range range;  // in node text
  CheckerMessage message;
};

/// Per-span results of the latest version, for comparing runs.
struct SpanResult {
  Text source;
  ExecStatus status = ExecStatus::unprocessed;
  std::vector<CheckerMessage> messages;
  MarkupTree markup;

  friend bool operator==(const SpanResult&, const SpanResult&) = default;
};

/// Document history plus execution: the state behind a server session.
class DocumentState {
 public:
  struct Options {
    Engine::Options engine;
    std::size_t keep_versions = 10;
    KeywordTable base_keywords = demo_keywords();
  };

  struct Update {
    std::shared_ptr<const Version> version;
    Assignment assignment;
    std::vector<VersionId> removed_versions;
  };

  DocumentState(std::shared_ptr<const CheckerRegistry> registry, Options options,
                ExecObserver* observer = nullptr);

  Update apply(const std::vector<NodeEdit>& edits, std::optional<VersionId> proposed = std::nullopt);
  Update set_perspective(const NodeName& node, std::vector<Range> visible, bool required);

  std::shared_ptr<const Version> latest() const;
  Assignment assignment() const;

  /// Markup of the latest version's results joined with pending edits.
  /// Throws LookupError for unknown nodes. Never waits for checking.
  Snapshot snapshot(const NodeName& node, std::vector<Edit> pending = {}) const;
  std::vector<NodeMessage> messages(const NodeName& node) const;
  std::vector<SpanResult> span_results(const NodeName& node) const;
  std::vector<ExportEntry> exports() const;

  bool await_quiescence(std::chrono::milliseconds timeout) const {
    return engine_.await_quiescence(timeout);
  }
  Engine& engine() noexcept { return engine_; }
  const History& history() const noexcept { return history_; }

 private:
  Update install(std::shared_ptr<const Version> version);

  History history_;
  Options options_;
  mutable std::mutex mutex_;
  Assignment assignment_;
  Engine engine_;
};

}  // namespace pide
