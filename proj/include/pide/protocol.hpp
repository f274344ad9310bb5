#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "pide/checker.hpp"
#include "pide/document.hpp"
#include "pide/execution.hpp"
#include "pide/pretty.hpp"

namespace pide::protocol {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A name chunk followed by argument chunks of arbitrary bytes.
struct Message {
  std::vector<std::string> chunks;

  Message() = default;
  Message(std::string name, std::vector<std::string> args = {});

  const std::string& name() const { return chunks.at(0); }
  std::size_t arity() const noexcept { return chunks.empty() ? 0 : chunks.size() - 1; }
  const std::string& arg(std::size_t i) const { return chunks.at(i + 1); }

  friend bool operator==(const Message&, const Message&) = default;
};

/// Header of decimal chunk lengths joined by ',' and ended by '\n', then
/// the chunks back to back. Throws std::invalid_argument for no chunks.
std::string encode(const Message& message);

/// Incremental inverse of encode over an arbitrarily split byte stream.
class Decoder {
 public:
  static constexpr std::size_t max_header = 64 * 1024;
  static constexpr std::size_t max_chunk = std::size_t{1} << 30;

  /// Throws ProtocolError on a malformed header; the decoder stays failed.
  void feed(std::string_view bytes);
  std::optional<Message> next();

  /// No partial message is buffered.
  bool idle() const noexcept { return buffer_.size() == pos_ && !lengths_; }
  bool failed() const noexcept { return failed_; }

 private:
  void parse();
  [[noreturn]] void fail(const std::string& what);

  std::string buffer_;
  std::size_t pos_ = 0;
  std::optional<std::vector<std::size_t>> lengths_;
  std::deque<Message> ready_;
  bool failed_ = false;
};

namespace yxml {

inline constexpr char X = '\x05';
inline constexpr char Y = '\x06';

struct Tree;
using Body = std::vector<Tree>;
using Attributes = std::vector<std::pair<std::string, std::string>>;

struct Element {
  std::string name;
  Attributes attributes;
  Body body;

  const std::string* attribute(std::string_view key) const;

  friend bool operator==(const Element&, const Element&) = default;
};

struct Tree {
  std::variant<Element, std::string> node;

  friend bool operator==(const Tree&, const Tree&) = default;
};

Tree elem(std::string name, Attributes attributes = {}, Body body = {});
Tree text(std::string text);

/// Element: X Y name (Y key=value)* X body X Y X. Text is raw.
/// Throws std::invalid_argument for control bytes in names, keys, values or
/// text, an empty name, or '=' in a key.
std::string encode(const Body& body);
/// Adjacent texts come back merged and empty texts vanish.
Body parse(std::string_view bytes);

/// Replaces X and Y by '?'.
std::string clean(std::string_view text);

}  // namespace yxml

// Payload codecs; decoders throw ProtocolError.

yxml::Body encode_edits(const std::vector<NodeEdit>& edits);
std::vector<NodeEdit> decode_edits(const yxml::Body& body);

yxml::Body encode_assignment(const Assignment& assignment);
std::map<NodeName, std::vector<AssignedSpan>> decode_assignment(const yxml::Body& body);

yxml::Body encode_pretty(const pretty::Tree& tree);
pretty::Tree decode_pretty(const yxml::Body& body);

struct Report {
  std::optional<NodeName> node;  // absent for protocol errors
  CheckerMessage message;        // range in node text

  friend bool operator==(const Report&, const Report&) = default;
};

yxml::Body encode_report(const Report& report);
Report decode_report(const yxml::Body& body);

/// Message constructors of the vocabulary.
namespace msg {

Message session_start(const std::string& session = {});
Message node_edits(std::optional<VersionId> version, const std::vector<NodeEdit>& edits);
Message blob_update(std::optional<VersionId> version, const std::string& path, std::string content);
Message dialog_result(const std::string& id, const std::string& result);

Message assigned(VersionId version, const Assignment& assignment);
Message report(ExecId exec, const Report& report);
Message status(ExecId exec, ExecStatus status);
Message removed_versions(const std::vector<VersionId>& ids);
/// A report for exec id 0.
Message protocol_error(const std::string& text);

}  // namespace msg

std::uint64_t parse_number(std::string_view s, std::string_view what);

}  // namespace pide::protocol
