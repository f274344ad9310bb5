#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

namespace pide {

struct CommandAttrs {
  bool is_load_command = false;
  /// Default file extension for the file argument of a load command.
  std::optional<std::string> file_extension;

  friend bool operator==(const CommandAttrs&, const CommandAttrs&) = default;
};

class KeywordConflict : public std::runtime_error {
 public:
  explicit KeywordConflict(const std::string& command)
      : std::runtime_error("conflicting declarations for command \"" + command + "\""),
        command_(command) {}
  const std::string& command() const noexcept { return command_; }

 private:
  std::string command_;
};

/// Outer-syntax keywords. Names are UTF-8.
class KeywordTable {
 public:
  KeywordTable() = default;

  KeywordTable& add_command(const std::string& name, CommandAttrs attrs = {});
  KeywordTable& add_minor(const std::string& name);

  bool is_command(const std::string& name) const { return commands_.contains(name); }
  bool is_minor(const std::string& name) const { return minor_.contains(name); }
  const CommandAttrs* command(const std::string& name) const;

  const std::map<std::string, CommandAttrs>& commands() const noexcept { return commands_; }
  const std::set<std::string>& minor() const noexcept { return minor_; }

  /// Longest minor keyword length (in characters) for symbolic matching.
  std::size_t max_minor_length() const noexcept { return max_minor_length_; }

  /// Set union; throws KeywordConflict when the same command carries
  /// different attributes on both sides.
  static KeywordTable merge(const KeywordTable& a, const KeywordTable& b);

  friend bool operator==(const KeywordTable& a, const KeywordTable& b) {
    return a.commands_ == b.commands_ && a.minor_ == b.minor_;
  }

 private:
  std::map<std::string, CommandAttrs> commands_;
  std::set<std::string> minor_;
  std::size_t max_minor_length_ = 0;
};

/// Keywords of the bundled demo theory language: the theory header words,
/// document markup commands, and the handful of commands understood by the
/// demo theory checker.
const KeywordTable& demo_keywords();

}  // namespace pide
