#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "pide/demo_checkers.hpp"
#include "pide/external.hpp"

namespace pide::cli {

namespace {

using json = nlohmann::json;

// Forward iterator that records how far the parser has read.
struct TrackingIterator {
  using iterator_category = std::forward_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  const char* p = nullptr;
  const char** high = nullptr;

  reference operator*() const { return *p; }
  TrackingIterator& operator++() {
    ++p;
    if (p > *high) *high = p;
    return *this;
  }
  TrackingIterator operator++(int) {
    auto old = *this;
    ++*this;
    return old;
  }
  friend bool operator==(const TrackingIterator& a, const TrackingIterator& b) { return a.p == b.p; }
};

// Builds the document and remembers where each value and key starts,
// keyed by JSON pointer.
class LocatingSax {
 public:
  LocatingSax(const char* begin, const char** high) : begin_(begin), high_(high) {}

  json root;
  std::map<std::string, std::size_t> values;
  std::map<std::string, std::size_t> keys;

  bool null() { return leaf(nullptr); }
  bool boolean(bool v) { return leaf(v); }
  bool number_integer(json::number_integer_t v) { return leaf(v); }
  bool number_unsigned(json::number_unsigned_t v) { return leaf(v); }
  bool number_float(json::number_float_t v, const std::string&) { return leaf(v); }
  bool string(std::string& v) { return leaf(v); }
  bool binary(json::binary_t& v) { return leaf(json::binary(v)); }

  bool start_object(std::size_t) {
    open(json::object());
    return true;
  }
  bool start_array(std::size_t) {
    open(json::array());
    return true;
  }
  bool end_object() { return close(); }
  bool end_array() { return close(); }

  bool key(std::string& k) {
    const std::size_t at = start();
    Frame& f = stack_.back();
    if (f.value->contains(k)) throw error_at("duplicate key \"" + k + "\"", at);
    f.key = k;
    keys[f.path + "/" + escape(k)] = at;
    return true;
  }

  bool parse_error(std::size_t position, const std::string&, const nlohmann::detail::exception& ex) {
    std::string what = ex.what();
    // Drop the library's own location prefix.
    if (auto col = what.find("column "); col != std::string::npos) {
      if (auto colon = what.find(": ", col); colon != std::string::npos) what = what.substr(colon + 2);
    }
    if (auto last = what.find("; last read: "); last != std::string::npos) what.resize(last);
    throw error_at(what, token_start(what, position));
  }

  // The parser reports the end of the offending token; step back to its start.
  std::size_t token_start(const std::string& what, std::size_t position) const {
    const std::size_t size = std::char_traits<char>::length(begin_);
    std::size_t at = std::min(position == 0 ? 0 : position - 1, size);
    if (what.find("unexpected string literal") != std::string::npos) {
      while (at > 0 && !(begin_[at - 1] == '"' && (at < 2 || begin_[at - 2] != '\\'))) --at;
      if (at > 0) --at;
    } else if (what.find("invalid literal") != std::string::npos || what.find("invalid number") != std::string::npos) {
      auto part = [&](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.'; };
      while (at > 0 && part(begin_[at - 1])) --at;
    }
    return at;
  }

  ConfigError error_at(const std::string& message, std::size_t offset) const {
    std::size_t line = 1;
    std::size_t column = 1;
    for (const char* c = begin_; c < begin_ + offset && *c; ++c) {
      if (*c == '\n') {
        ++line;
        column = 1;
      } else if ((static_cast<unsigned char>(*c) & 0xC0) != 0x80) {
        ++column;
      }
    }
    return ConfigError(message, line, column);
  }

 private:
  struct Frame {
    json* value;
    std::string path;
    std::string key;
  };

  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') {
        out += "~0";
      } else if (c == '/') {
        out += "~1";
      } else {
        out += c;
      }
    }
    return out;
  }

  // Offset of the current token: skip separators after the previous one.
  std::size_t start() {
    std::size_t at = last_;
    const std::size_t end = static_cast<std::size_t>(*high_ - begin_);
    while (at < end && std::string_view(" \t\r\n,:").find(begin_[at]) != std::string_view::npos) ++at;
    last_ = end;
    return at;
  }

  std::pair<json*, std::string> place(json v) {
    const std::size_t at = start();
    if (stack_.empty()) {
      root = std::move(v);
      values[""] = at;
      return {&root, ""};
    }
    Frame& f = stack_.back();
    std::string path;
    json* slot = nullptr;
    if (f.value->is_object()) {
      path = f.path + "/" + escape(f.key);
      slot = &((*f.value)[f.key] = std::move(v));
    } else {
      path = f.path + "/" + std::to_string(f.value->size());
      f.value->push_back(std::move(v));
      slot = &f.value->back();
    }
    values[path] = at;
    return {slot, path};
  }

  bool leaf(json v) {
    place(std::move(v));
    return true;
  }

  void open(json v) {
    auto [slot, path] = place(std::move(v));
    stack_.push_back({slot, path, {}});
  }

  bool close() {
    stack_.pop_back();
    last_ = static_cast<std::size_t>(*high_ - begin_);
    return true;
  }

  const char* begin_;
  const char** high_;
  std::size_t last_ = 0;
  std::vector<Frame> stack_;
};

class Reader {
 public:
  Reader(const std::string& text, const std::filesystem::path& base) : text_(text), base_(base) {
    const char* high = text_.data();
    sax_ = std::make_unique<LocatingSax>(text_.data(), &high);
    TrackingIterator first{text_.data(), &high};
    TrackingIterator last{text_.data() + text_.size(), &high};
    json::sax_parse(first, last, sax_.get());
  }

  Config read() {
    Config c = default_config();
    const json& root = sax_->root;
    if (!root.is_object()) fail("", "config must be an object");
    static const std::vector<std::string> known{"workers", "cache_capacity", "cancel_deadline_ms", "session",
                                                "exports", "checkers",       "formats"};
    for (const auto& [k, v] : root.items()) {
      if (std::find(known.begin(), known.end(), k) == known.end()) fail_key("/" + k, "unknown key \"" + k + "\"");
    }
    if (root.contains("workers")) c.workers = static_cast<unsigned>(number(root["workers"], "/workers", 0, 1024));
    if (root.contains("cache_capacity")) {
      c.cache_capacity = number(root["cache_capacity"], "/cache_capacity", 0, std::size_t{1} << 40);
    }
    if (root.contains("cancel_deadline_ms")) {
      c.cancel_deadline = std::chrono::milliseconds(number(root["cancel_deadline_ms"], "/cancel_deadline_ms", 1, 3'600'000));
    }
    if (root.contains("session")) c.session = nonempty(root["session"], "/session");
    if (root.contains("exports")) c.exports = base_ / nonempty(root["exports"], "/exports");

    auto registry = std::make_shared<CheckerRegistry>();
    if (root.contains("checkers")) {
      const json& checkers = root["checkers"];
      if (!checkers.is_object()) fail("/checkers", "\"checkers\" must be an object");
      for (const auto& [id, spec] : checkers.items()) add_checker(*registry, id, spec, c);
    } else {
      add_bundled(*registry, c);
    }
    if (root.contains("formats")) {
      const json& formats = root["formats"];
      if (!formats.is_object()) fail("/formats", "\"formats\" must be an object");
      for (const auto& [ext, id] : formats.items()) {
        const std::string path = "/formats/" + ext;
        if (ext.empty() || ext.find('.') != std::string::npos || ext == "thy") {
          fail_key(path, "bad file extension \"" + ext + "\"");
        }
        const std::string checker = nonempty(id, path);
        try {
          registry->register_format({ext, checker, {}});
        } catch (const RegistryError& e) {
          fail(path, e.what());
        }
      }
    } else if (!root.contains("checkers")) {
      registry->register_format({"ftl", "ftl", {}});
      registry->register_format({"bib", "bib", {}});
    }
    c.registry = std::move(registry);
    return c;
  }

 private:
  [[noreturn]] void fail(const std::string& path, const std::string& message) const {
    auto it = sax_->values.find(path);
    throw sax_->error_at(message, it == sax_->values.end() ? 0 : it->second);
  }

  [[noreturn]] void fail_key(const std::string& path, const std::string& message) const {
    auto it = sax_->keys.find(path);
    throw sax_->error_at(message, it == sax_->keys.end() ? 0 : it->second);
  }

  std::size_t number(const json& v, const std::string& path, std::size_t lo, std::size_t hi) const {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      fail(path, "\"" + path.substr(path.rfind('/') + 1) + "\" must be a non-negative integer");
    }
    const auto n = v.get<std::size_t>();
    if (n < lo || n > hi) {
      fail(path, "\"" + path.substr(path.rfind('/') + 1) + "\" must be between " + std::to_string(lo) + " and " +
                     std::to_string(hi));
    }
    return n;
  }

  std::string nonempty(const json& v, const std::string& path) const {
    if (!v.is_string() || v.get<std::string>().empty()) {
      fail(path, "\"" + path.substr(path.rfind('/') + 1) + "\" must be a non-empty string");
    }
    return v.get<std::string>();
  }

  void add_bundled(CheckerRegistry& r, const Config& c) const {
    r.add_checker("ftl", std::make_shared<FtlChecker>(FtlChecker::Options{0, std::make_shared<BlockCache>(c.cache_capacity)}));
    r.add_checker("bib", std::make_shared<BibChecker>(std::make_shared<BlockCache>(c.cache_capacity)));
  }

  void add_checker(CheckerRegistry& r, const std::string& id, const json& spec, const Config& c) const {
    const std::string path = "/checkers/" + id;
    if (id.empty()) fail_key(path, "empty checker id");
    if (!spec.is_object()) fail(path, "checker \"" + id + "\" must be an object");
    if (!spec.contains("type")) fail(path, "checker \"" + id + "\" lacks \"type\"");
    const std::string type = nonempty(spec["type"], path + "/type");
    auto allow = [&](std::initializer_list<const char*> keys) {
      for (const auto& [k, v] : spec.items()) {
        bool ok = k == "type";
        for (const char* a : keys) ok = ok || k == a;
        if (!ok) fail_key(path + "/" + k, "unknown key \"" + k + "\" for checker type \"" + type + "\"");
      }
    };
    if (type == "ftl") {
      allow({"delay_ms"});
      FtlChecker::Options o;
      o.cache = std::make_shared<BlockCache>(c.cache_capacity);
      if (spec.contains("delay_ms")) o.delay_ms = static_cast<long>(number(spec["delay_ms"], path + "/delay_ms", 0, 600'000));
      r.add_checker(id, std::make_shared<FtlChecker>(std::move(o)));
    } else if (type == "bib") {
      allow({});
      r.add_checker(id, std::make_shared<BibChecker>(std::make_shared<BlockCache>(c.cache_capacity)));
    } else if (type == "external") {
      allow({"command"});
      if (!spec.contains("command")) fail(path, "external checker \"" + id + "\" lacks \"command\"");
      ExternalChecker::Options o;
      o.checker_id = id;
      o.command_template = nonempty(spec["command"], path + "/command");
      o.deadline = c.cancel_deadline;
      r.add_checker(id, std::make_shared<ExternalChecker>(std::move(o)));
    } else {
      fail(path + "/type", "unknown checker type \"" + type + "\" (expected ftl, bib or external)");
    }
  }

  const std::string& text_;
  std::filesystem::path base_;
  std::unique_ptr<LocatingSax> sax_;
};

}  // namespace

Config default_config() {
  Config c;
  c.registry = std::make_shared<CheckerRegistry>();
  c.registry->add_checker("ftl", std::make_shared<FtlChecker>());
  c.registry->add_checker("bib", std::make_shared<BibChecker>());
  c.registry->register_format({"ftl", "ftl", {}});
  c.registry->register_format({"bib", "bib", {}});
  return c;
}

Config parse_config(const std::string& text, const std::filesystem::path& base) {
  return Reader(text, base).read();
}

Config load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config " + file.string());
  std::stringstream s;
  s << in.rdbuf();
  return parse_config(s.str(), file.parent_path());
}

}  // namespace pide::cli
