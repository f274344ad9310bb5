#include "pide/checker.hpp"

#include <chrono>
#include <thread>

namespace pide {

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::status: return "status";
    case Severity::writeln: return "writeln";
    case Severity::warning: return "warning";
    case Severity::error: return "error";
  }
  return "?";
}

std::string_view to_string(Phase p) { return p == Phase::syntax ? "syntax" : "semantics"; }

std::optional<Severity> parse_severity(std::string_view s) {
  for (Severity sev : {Severity::status, Severity::writeln, Severity::warning, Severity::error}) {
    if (to_string(sev) == s) return sev;
  }
  return std::nullopt;
}

std::string_view to_string(CheckOutcome o) {
  switch (o) {
    case CheckOutcome::finished: return "finished";
    case CheckOutcome::failed: return "failed";
    case CheckOutcome::cancelled: return "cancelled";
  }
  return "?";
}

CheckerMessage make_message(Severity severity, Range range, std::string_view text, Phase phase) {
  return {severity, range, pretty::paragraph(text), phase, std::nullopt};
}

bool interruptible_sleep(std::stop_token cancel, long ms) {
  const auto until = std::chrono::steady_clock::now() + std::chrono::milliseconds(ms);
  while (std::chrono::steady_clock::now() < until) {
    if (cancel.stop_requested()) return false;
    const auto left = until - std::chrono::steady_clock::now();
    std::this_thread::sleep_for(std::min<std::chrono::steady_clock::duration>(
        left, std::chrono::milliseconds(5)));
  }
  return !cancel.stop_requested();
}

std::optional<BlockCache::Value> BlockCache::get_or_compute(
    const Digest& key, const std::function<std::optional<Value>()>& compute, std::stop_token cancel) {
  if (!enabled_) {
    ++evaluations_;
    return compute();
  }
  std::unique_lock lock(mutex_);
  while (true) {
    auto it = slots_.find(key);
    if (it == slots_.end()) break;
    auto slot = it->second;
    if (slot->ready) {
      lru_.splice(lru_.begin(), lru_, slot->lru);
      ++hits_;
      return slot->value;
    }
    // Someone else is computing this key.
    if (cancel.stop_requested()) return std::nullopt;
    cv_.wait_for(lock, std::chrono::milliseconds(10));
  }
  auto slot = std::make_shared<Slot>();
  slots_.emplace(key, slot);
  lock.unlock();

  ++evaluations_;
  std::optional<Value> value;
  try {
    value = compute();
  } catch (...) {
    lock.lock();
    slots_.erase(key);
    cv_.notify_all();
    throw;
  }

  lock.lock();
  if (!value) {
    slots_.erase(key);
  } else {
    slot->value = *value;
    slot->ready = true;
    lru_.push_front(key);
    slot->lru = lru_.begin();
    while (capacity_ > 0 && lru_.size() > capacity_) {
      slots_.erase(lru_.back());
      lru_.pop_back();
    }
  }
  cv_.notify_all();
  return value;
}

std::size_t BlockCache::size() const {
  std::lock_guard lock(mutex_);
  return lru_.size();
}

void CheckerRegistry::add_checker(const std::string& id, std::shared_ptr<Checker> checker) {
  std::lock_guard lock(mutex_);
  if (!checkers_.emplace(id, std::move(checker)).second) {
    throw RegistryError("checker \"" + id + "\" already registered");
  }
}

void CheckerRegistry::register_format(FileFormat format) {
  std::lock_guard lock(mutex_);
  if (format.extension.empty()) throw RegistryError("file format without extension");
  if (!checkers_.contains(format.checker_id)) {
    throw RegistryError("file format \"." + format.extension + "\" refers to unknown checker \"" +
                        format.checker_id + "\"");
  }
  if (!format.theory_template) format.theory_template = default_theory_template;
  const std::string ext = format.extension;
  if (!formats_.emplace(ext, std::move(format)).second) {
    throw RegistryError("file format \"." + ext + "\" already registered");
  }
}

const FileFormat* CheckerRegistry::format_for(const std::string& extension) const {
  std::lock_guard lock(mutex_);
  auto it = formats_.find(extension);
  return it == formats_.end() ? nullptr : &it->second;
}

bool CheckerRegistry::has_checker(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return checkers_.contains(id);
}

std::shared_ptr<Checker> CheckerRegistry::checker(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = checkers_.find(id);
  return it == checkers_.end() ? nullptr : it->second;
}

std::vector<std::string> CheckerRegistry::extensions() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [ext, f] : formats_) out.push_back(ext);
  return out;
}

CheckOutcome CheckerRegistry::check(const std::string& checker_id, TextView content,
                                    std::stop_token cancel, const MessageSink& emit) const {
  auto impl = checker(checker_id);
  const Range whole{0, content.size()};
  if (!impl) {
    emit(make_message(Severity::error, whole, "unknown checker \"" + checker_id + "\""));
    return CheckOutcome::failed;
  }
  const MessageSink clamped = [&](const CheckerMessage& msg) {
    if (whole.contains(msg.range) && msg.range.begin <= msg.range.end) return emit(msg);
    CheckerMessage fixed = msg;
    fixed.range.begin = std::min(msg.range.begin, content.size());
    fixed.range.end = std::clamp(msg.range.end, fixed.range.begin, content.size());
    if (fixed.fix && !whole.contains(fixed.fix->range)) fixed.fix.reset();
    emit(fixed);
    emit(make_message(Severity::warning, fixed.range,
                      "malformed message position " + to_string(msg.range) +
                          " clamped to " + to_string(fixed.range),
                      msg.phase));
  };
  try {
    return impl->check(content, cancel, clamped);
  } catch (const std::exception& e) {
    emit(make_message(Severity::error, whole,
                      "checker \"" + checker_id + "\" crashed: " + e.what()));
    return CheckOutcome::failed;
  }
}

TheoryHeader default_theory_template(const std::string& file_name) {
  TheoryHeader h;
  const auto slash = file_name.rfind('/');
  std::string base = slash == std::string::npos ? file_name : file_name.substr(slash + 1);
  const auto dot = base.rfind('.');
  h.name = dot == std::string::npos ? base : base.substr(0, dot);
  return h;
}

}  // namespace pide
