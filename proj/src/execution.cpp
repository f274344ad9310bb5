#include "pide/execution.hpp"

#include <algorithm>
#include <atomic>

namespace pide {
namespace {

using Clock = std::chrono::steady_clock;

std::atomic<ExecId> next_exec_id{1};

constexpr std::string_view status_names[] = {"unprocessed", "running", "finished", "failed",
                                             "cancelled"};

}  // namespace

std::string_view to_string(ExecStatus s) { return status_names[static_cast<int>(s)]; }

std::optional<ExecStatus> parse_exec_status(std::string_view s) {
  for (int i = 0; i < 5; ++i) {
    if (status_names[i] == s) return static_cast<ExecStatus>(i);
  }
  return std::nullopt;
}

bool is_terminal(ExecStatus s) noexcept {
  return s == ExecStatus::finished || s == ExecStatus::failed || s == ExecStatus::cancelled;
}

ExecId fresh_exec_id() { return next_exec_id.fetch_add(1); }

std::optional<ExecId> Assignment::exec_of(SpanId span) const {
  for (const auto& [name, spans] : nodes) {
    for (const auto& s : spans) {
      if (s.span == span) return s.exec;
    }
  }
  return std::nullopt;
}

std::set<ExecId> Assignment::exec_ids() const {
  std::set<ExecId> out;
  for (const auto& [name, spans] : nodes) {
    for (const auto& s : spans) out.insert(s.exec);
  }
  return out;
}

Assignment assign(const Version& version, const Assignment* previous) {
  Assignment out;
  out.version = version.id;
  std::map<NodeName, std::vector<NodeName>> graph;
  for (const auto& [name, node] : version.nodes) {
    auto& edges = graph[name];
    for (const auto& imp : node->imports) {
      if (version.nodes.contains(imp)) edges.push_back(imp);
    }
  }
  while (true) {
    try {
      out.order = topological_order(graph);
      break;
    } catch (const CycleError& e) {
      for (const auto& m : e.members()) {
        out.cyclic.insert(m);
        graph[m].clear();
      }
    }
  }

  for (const auto& name : out.order) {
    const Node& node = *version.nodes.at(name);
    const bool cyclic = out.cyclic.contains(name);
    std::vector<std::pair<NodeName, ExecId>> keys;
    if (!cyclic) {
      for (const auto& imp : node.imports) {
        ExecId last = 0;
        if (auto it = out.nodes.find(imp); it != out.nodes.end() && !it->second.empty()) {
          last = it->second.back().exec;
        }
        keys.emplace_back(imp, last);
      }
    }
    const std::vector<AssignedSpan>* prev = nullptr;
    if (previous) {
      auto it = previous->nodes.find(name);
      auto keys_it = previous->import_keys.find(name);
      if (it != previous->nodes.end() && keys_it != previous->import_keys.end() &&
          keys_it->second == keys && previous->cyclic.contains(name) == cyclic) {
        prev = &it->second;
      }
    }
    std::vector<AssignedSpan> spans;
    bool reuse = prev != nullptr;
    for (std::size_t i = 0; i < node.spans.size(); ++i) {
      const auto& s = node.spans[i];
      reuse = reuse && i < prev->size() && (*prev)[i].span == s.id;
      spans.push_back({s.id, reuse ? (*prev)[i].exec : fresh_exec_id(), s.range});
    }
    out.nodes.emplace(name, std::move(spans));
    out.import_keys.emplace(name, std::move(keys));
  }
  return out;
}

MarkupTree add_message_markup(const MarkupTree& tree, const CheckerMessage& msg) {
  MarkupTree out = tree.add(msg.range, MarkupElement(std::string(to_string(msg.severity)),
                                                      {{"body", msg.text()}}));
  if (msg.fix) {
    out = out.add(msg.fix->range, MarkupElement("active", {{"replacement", msg.fix->replacement},
                                                           {"label", msg.fix->label}}));
  }
  return out;
}

struct Engine::Unit {
  ExecId id = 0;
  NodeName node;
  std::shared_ptr<const Node> state;
  std::size_t index = 0;
  std::vector<ExecId> deps;
  std::vector<NodeName> missing_imports;
  bool cyclic = false;

  ExecStatus status = ExecStatus::unprocessed;
  bool eligible = false;
  int priority = 1;
  std::size_t order = 0;
  bool obsolete = false;
  bool abandoned = false;
  std::stop_source stop;
  std::optional<Clock::time_point> cancel_requested;

  std::vector<CheckerMessage> messages;
  MarkupTree markup;
  std::vector<ExportEntry> exports;
  std::shared_ptr<const TheoryContext> context;

  const CommandSpan& span() const { return state->spans[index]; }
};

Engine::Engine(std::shared_ptr<const CheckerRegistry> registry, Options options,
               ExecObserver* observer)
    : registry_(std::move(registry)), options_(std::move(options)), observer_(observer) {
  if (options_.workers == 0) options_.workers = std::max(1u, std::thread::hardware_concurrency());
  for (unsigned i = 0; i < options_.workers; ++i) {
    workers_.emplace_back([this](std::stop_token st) { worker_loop(st); });
  }
  watchdog_ = std::jthread([this](std::stop_token st) { watchdog_loop(st); });
}

Engine::~Engine() {
  {
    std::lock_guard lock(mutex_);
    shutting_down_ = true;
    for (auto& [id, unit] : units_) unit->stop.request_stop();
  }
  cv_.notify_all();
  watchdog_.request_stop();
  if (watchdog_.joinable()) watchdog_.join();
  workers_.clear();
}

void Engine::notify_status(const Unit& unit, ExecStatus status) {
  if (observer_) observer_->on_status(unit.id, unit.node, status);
}

void Engine::update(std::shared_ptr<const Version> version, const Assignment& assignment) {
  std::vector<std::shared_ptr<Unit>> dropped;
  {
    std::lock_guard lock(mutex_);
    version_ = version;
    const auto live = assignment.exec_ids();
    for (auto it = units_.begin(); it != units_.end();) {
      auto& unit = it->second;
      if (live.contains(it->first)) {
        ++it;
        continue;
      }
      unit->obsolete = true;
      if (unit->status == ExecStatus::running) {
        if (!unit->cancel_requested) {
          unit->stop.request_stop();
          unit->cancel_requested = Clock::now();
        }
        ++it;
        continue;
      }
      if (unit->status == ExecStatus::unprocessed) {
        unit->status = ExecStatus::cancelled;
        dropped.push_back(unit);
      }
      it = units_.erase(it);
    }

    std::map<NodeName, std::size_t> order;
    for (std::size_t i = 0; i < assignment.order.size(); ++i) order[assignment.order[i]] = i;

    for (const auto& [name, spans] : assignment.nodes) {
      const auto& state = version->nodes.at(name);
      for (std::size_t i = 0; i < spans.size(); ++i) {
        auto& slot = units_[spans[i].exec];
        if (!slot) {
          slot = std::make_shared<Unit>();
          slot->id = spans[i].exec;
          slot->node = name;
          slot->state = state;
          slot->index = i;
          slot->cyclic = assignment.cyclic.contains(name);
          if (i > 0) {
            slot->deps.push_back(spans[i - 1].exec);
          } else if (!slot->cyclic) {
            for (const auto& [imp, last] : assignment.import_keys.at(name)) {
              if (!version->nodes.contains(imp)) {
                slot->missing_imports.push_back(imp);
              } else if (last != 0) {
                slot->deps.push_back(last);
              }
            }
          }
        }
        slot->eligible = false;
        slot->priority = 1;
        slot->order = order[name];
      }
    }

    // Eligibility: visible closure per node, required nodes, and the
    // transitive imports of everything eligible.
    std::set<NodeName> full;
    std::vector<NodeName> pending;
    auto mark = [&](const NodeName& name, std::size_t upto, int priority) {
      const auto& spans = assignment.nodes.at(name);
      for (std::size_t i = 0; i < upto && i < spans.size(); ++i) {
        auto& unit = *units_.at(spans[i].exec);
        unit.eligible = true;
        unit.priority = std::min(unit.priority, priority);
      }
      if (upto > 0) pending.push_back(name);
    };
    for (const auto& [name, spans] : assignment.nodes) {
      const Node& node = *version->nodes.at(name);
      std::size_t visible_upto = 0;
      for (std::size_t i = 0; i < spans.size(); ++i) {
        for (const auto& r : node.perspective.visible) {
          if (intersects(spans[i].range, r)) visible_upto = i + 1;
        }
      }
      mark(name, visible_upto, 0);
      if (node.perspective.required) mark(name, spans.size(), 1);
    }
    while (!pending.empty()) {
      const NodeName name = pending.back();
      pending.pop_back();
      if (assignment.cyclic.contains(name)) continue;
      for (const auto& imp : version->nodes.at(name)->imports) {
        if (!version->nodes.contains(imp) || !full.insert(imp).second) continue;
        mark(imp, assignment.nodes.at(imp).size(), 1);
        if (assignment.nodes.at(imp).empty()) pending.push_back(imp);
      }
    }
  }
  cv_.notify_all();
  for (const auto& unit : dropped) notify_status(*unit, ExecStatus::cancelled);
}

std::shared_ptr<Engine::Unit> Engine::pick_locked() {
  std::shared_ptr<Unit> best;
  for (const auto& [id, unit] : units_) {
    if (unit->status != ExecStatus::unprocessed || !unit->eligible || unit->obsolete) continue;
    bool ready = true;
    for (ExecId dep : unit->deps) {
      auto it = units_.find(dep);
      if (it != units_.end() && !is_terminal(it->second->status)) {
        ready = false;
        break;
      }
    }
    if (!ready) continue;
    if (!best || std::tie(unit->priority, unit->order, unit->index) <
                     std::tie(best->priority, best->order, best->index)) {
      best = unit;
    }
  }
  return best;
}

void Engine::worker_loop(std::stop_token stop) {
  while (true) {
    std::shared_ptr<Unit> unit;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] {
        if (shutting_down_ || stop.stop_requested()) return true;
        unit = pick_locked();
        return unit != nullptr;
      });
      if (shutting_down_ || stop.stop_requested()) return;
      unit->status = ExecStatus::running;
    }
    notify_status(*unit, ExecStatus::running);
    run(unit);
    std::lock_guard lock(mutex_);
    if (unit->abandoned) return;
  }
}

void Engine::watchdog_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    std::vector<std::shared_ptr<Unit>> killed;
    {
      std::lock_guard lock(mutex_);
      if (shutting_down_) return;
      const auto now = Clock::now();
      for (auto it = units_.begin(); it != units_.end();) {
        auto& unit = it->second;
        if (unit->obsolete && unit->status == ExecStatus::running && unit->cancel_requested &&
            now - *unit->cancel_requested >= options_.cancel_deadline) {
          unit->status = ExecStatus::cancelled;
          unit->abandoned = true;
          killed.push_back(unit);
          workers_.emplace_back([this](std::stop_token st) { worker_loop(st); });
          it = units_.erase(it);
        } else {
          ++it;
        }
      }
    }
    if (!killed.empty()) cv_.notify_all();
    for (const auto& unit : killed) notify_status(*unit, ExecStatus::cancelled);
  }
}

void Engine::run(const std::shared_ptr<Unit>& unit) {
  const CommandSpan& span = unit->span();
  const Range whole{0, span.range.length()};
  std::shared_ptr<const TheoryContext> input;
  {
    std::lock_guard lock(mutex_);
    if (unit->index == 0) {
      std::vector<std::shared_ptr<const TheoryContext>> imports;
      for (ExecId dep : unit->deps) {
        if (auto it = units_.find(dep); it != units_.end()) imports.push_back(it->second->context);
      }
      input = merge_theory_contexts(imports);
    } else if (auto it = units_.find(unit->deps.front()); it != units_.end()) {
      input = it->second->context;
    }
    if (!input) input = std::make_shared<TheoryContext>();
    if (unit->node.kind == NodeName::Kind::theory && !span.is_prelude()) {
      const Offset length = utf8::decode(span.command).size();
      unit->markup = unit->markup.add({0, std::min(length, whole.end)},
                                      MarkupElement("keyword", {{"kind", "command"}}));
    }
  }

  const MessageSink sink = [&](const CheckerMessage& msg) {
    std::vector<CheckerMessage> reported;
    {
      std::lock_guard lock(mutex_);
      if (unit->status != ExecStatus::running || unit->obsolete) return;
      unit->messages.push_back(msg);
      reported.push_back(msg);
      try {
        unit->markup = add_message_markup(unit->markup, msg);
      } catch (const std::exception& e) {
        auto warning = make_message(Severity::warning, msg.range,
                                    std::string("rejected markup: ") + e.what());
        unit->messages.push_back(warning);
        reported.push_back(std::move(warning));
      }
    }
    if (observer_) {
      for (const auto& m : reported) observer_->on_message(unit->id, unit->node, m);
    }
  };

  const std::stop_token cancel = unit->stop.get_token();
  CheckOutcome outcome = CheckOutcome::finished;
  SpanOutput output;
  if (unit->node.kind == NodeName::Kind::file) {
    if (const FileFormat* format = registry_->format_for(unit->node.extension())) {
      outcome = registry_->check(format->checker_id, span.source, cancel, sink);
    }
  } else {
    try {
      if (unit->cyclic && span.is_prelude()) {
        sink(make_message(Severity::error, whole, "cyclic theory imports"));
      }
      SpanInput in{*unit->state, span, input, unit->missing_imports};
      outcome = check_theory_span(in, cancel, sink, output);
    } catch (const std::exception& e) {
      sink(make_message(Severity::error, whole, std::string("checker crashed: ") + e.what()));
      outcome = CheckOutcome::failed;
    }
  }
  if (!output.context) output.context = input;

  std::optional<ExecStatus> final_status;
  {
    std::lock_guard lock(mutex_);
    if (unit->status == ExecStatus::running) {
      ExecStatus status = ExecStatus::finished;
      if (unit->obsolete || outcome == CheckOutcome::cancelled) {
        status = ExecStatus::cancelled;
      } else if (outcome == CheckOutcome::failed) {
        status = ExecStatus::failed;
      }
      unit->context = output.context;
      for (auto& entry : output.exports) entry.session = options_.session;
      unit->exports = std::move(output.exports);
      unit->status = status;
      final_status = status;
      if (unit->obsolete) units_.erase(unit->id);
    }
  }
  cv_.notify_all();
  if (final_status) notify_status(*unit, *final_status);
}

std::optional<ExecView> Engine::result(ExecId id) const {
  std::lock_guard lock(mutex_);
  auto it = units_.find(id);
  if (it == units_.end()) return std::nullopt;
  const Unit& u = *it->second;
  return ExecView{u.id, u.node, u.span().id, u.status, u.messages, u.markup, u.exports};
}

std::optional<ExecStatus> Engine::status(ExecId id) const {
  std::lock_guard lock(mutex_);
  auto it = units_.find(id);
  if (it == units_.end()) return std::nullopt;
  return it->second->status;
}

bool Engine::quiescent_locked() const {
  for (const auto& [id, unit] : units_) {
    if (unit->status == ExecStatus::running) return false;
    if (unit->status == ExecStatus::unprocessed && unit->eligible && !unit->obsolete) return false;
  }
  return true;
}

bool Engine::quiescent() const {
  std::lock_guard lock(mutex_);
  return quiescent_locked();
}

bool Engine::await_quiescence(std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return cv_.wait_for(lock, timeout, [&] { return quiescent_locked(); });
}

std::vector<ExecId> Engine::live_units() const {
  std::lock_guard lock(mutex_);
  std::vector<ExecId> out;
  for (const auto& [id, unit] : units_) out.push_back(id);
  return out;
}

std::size_t Engine::running() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count_if(units_.begin(), units_.end(), [](const auto& kv) {
    return kv.second->status == ExecStatus::running;
  }));
}

DocumentState::DocumentState(std::shared_ptr<const CheckerRegistry> registry, Options options,
                             ExecObserver* observer)
    : history_(options.base_keywords),
      options_(options),
      assignment_(assign(*history_.latest(), nullptr)),
      engine_(std::move(registry), options.engine, observer) {}

DocumentState::Update DocumentState::install(std::shared_ptr<const Version> version) {
  assignment_ = assign(*version, &assignment_);
  engine_.update(version, assignment_);
  Update update{version, assignment_, history_.remove_versions(options_.keep_versions)};
  return update;
}

DocumentState::Update DocumentState::apply(const std::vector<NodeEdit>& edits,
                                           std::optional<VersionId> proposed) {
  std::lock_guard lock(mutex_);
  auto version = history_.apply_edits(edits, proposed);
  if (version->id == assignment_.version) return {version, assignment_, {}};
  return install(std::move(version));
}

DocumentState::Update DocumentState::set_perspective(const NodeName& node, std::vector<Range> visible,
                                                     bool required) {
  std::lock_guard lock(mutex_);
  return install(history_.set_perspective(node, std::move(visible), required));
}

std::shared_ptr<const Version> DocumentState::latest() const {
  std::lock_guard lock(mutex_);
  return history_.latest();
}

Assignment DocumentState::assignment() const {
  std::lock_guard lock(mutex_);
  return assignment_;
}

Snapshot DocumentState::snapshot(const NodeName& name, std::vector<Edit> pending) const {
  std::shared_ptr<const Version> version;
  std::vector<AssignedSpan> spans;
  {
    std::lock_guard lock(mutex_);
    version = history_.latest();
    if (auto it = assignment_.nodes.find(name); it != assignment_.nodes.end()) spans = it->second;
  }
  const Node* node = version->node(name);
  if (!node) throw LookupError("unknown node " + name.path);
  MarkupTree markup;
  for (const auto& s : spans) {
    auto result = engine_.result(s.exec);
    if (!result) continue;
    for (auto& [range, element] : result->markup.entries()) {
      markup = markup.add(range.shifted(s.range.begin), std::move(element));
    }
  }
  return Snapshot(version->id, name, node->text, std::move(markup), std::move(pending));
}

std::vector<NodeMessage> DocumentState::messages(const NodeName& name) const {
  std::vector<NodeMessage> out;
  const Assignment current = assignment();
  const auto it = current.nodes.find(name);
  if (it == current.nodes.end()) return out;
  for (const auto& s : it->second) {
    auto result = engine_.result(s.exec);
    if (!result) continue;
    for (auto& msg : result->messages) out.push_back({msg.range.shifted(s.range.begin), std::move(msg)});
  }
  return out;
}

std::vector<SpanResult> DocumentState::span_results(const NodeName& name) const {
  const auto version = latest();
  const Node* node = version->node(name);
  if (!node) throw LookupError("unknown node " + name.path);
  const Assignment current = assignment();
  std::vector<SpanResult> out;
  const auto it = current.nodes.find(name);
  if (it == current.nodes.end()) return out;
  for (std::size_t i = 0; i < it->second.size(); ++i) {
    SpanResult r;
    r.source = node->spans[i].source;
    if (auto result = engine_.result(it->second[i].exec)) {
      r.status = result->status;
      r.messages = std::move(result->messages);
      r.markup = std::move(result->markup);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ExportEntry> DocumentState::exports() const {
  std::vector<ExportEntry> out;
  for (const auto& exec : assignment().exec_ids()) {
    if (auto result = engine_.result(exec)) {
      for (auto& e : result->exports) out.push_back(std::move(e));
    }
  }
  std::sort(out.begin(), out.end(), [](const ExportEntry& a, const ExportEntry& b) {
    return std::tie(a.theory, a.name) < std::tie(b.theory, b.name);
  });
  return out;
}

}  // namespace pide
