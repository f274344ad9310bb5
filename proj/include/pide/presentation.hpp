#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pide/keywords.hpp"
#include "pide/text.hpp"

namespace pide::presentation {

enum class Format { latex, html };

std::string_view to_string(Format f);
std::optional<Format> parse_format(std::string_view s);

struct SymbolInfo {
  std::string macro;    // LaTeX
  std::string display;  // UTF-8 for HTML
};

/// Named and control symbols by their full source form, e.g. "\<alpha>".
class SymbolTable {
 public:
  void add(const std::string& symbol, SymbolInfo info);
  const SymbolInfo* find(const std::string& symbol) const;
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, SymbolInfo>& entries() const noexcept { return entries_; }

  static const SymbolTable& bundled();

 private:
  std::map<std::string, SymbolInfo> entries_;
};

struct Antiquotation {
  std::string name;
  std::string argument;  // source between the name and the closing brace, trimmed
  Range range;           // whole `@{...}` in node text
};

/// The argument with one layer of string quotes or cartouche removed, if
/// it consists of exactly one such literal.
std::string antiquotation_payload(const std::string& argument);

using AntiquotationHandler = std::function<std::string(const Antiquotation&, Format)>;

class Antiquotations {
 public:
  /// Throws std::invalid_argument for a duplicate name.
  void add(const std::string& name, AntiquotationHandler handler);
  const AntiquotationHandler* find(const std::string& name) const;
  std::vector<std::string> names() const;

  /// "url" and "verbatim".
  static Antiquotations defaults();

 private:
  std::map<std::string, AntiquotationHandler> handlers_;
};

class PresentationError : public std::runtime_error {
 public:
  PresentationError(const std::string& message, Range range);
  Range range() const noexcept { return range_; }

 private:
  Range range_;
};

enum class ListKind { item, enumerate, description };

enum class EventKind {
  open_heading,  // level: 0 chapter .. 4 paragraph
  close_heading,
  open_text,
  close_text,
  open_list,  // level: ListKind
  close_list,
  open_item,
  close_item,
  open_label,  // description items only
  close_label,
  open_code,
  close_code,
  open_comment,
  close_comment,
  text,     // source text, escaped by the writer
  symbol,   // text: LaTeX macro, display: UTF-8
  output,   // antiquotation output, written as is
  syntax,   // consumed source that produces no output
};

struct Event {
  EventKind kind = EventKind::text;
  std::string text;
  std::string display;
  int level = 0;
  Range source;  // empty for structural events

  friend bool operator==(const Event&, const Event&) = default;
};

/// Shallow presentation as an event stream. Leaf events (text, symbol,
/// output, syntax) tile the input text in order.
std::vector<Event> events(TextView text, const KeywordTable& keywords, const SymbolTable& symbols,
                          const Antiquotations& handlers, Format format);

std::string write(const std::vector<Event>& events, Format format);

std::string present(TextView text, const KeywordTable& keywords, const SymbolTable& symbols,
                    const Antiquotations& handlers, Format format);

std::string escape(std::string_view text, Format format);
/// Inverse of escape on its image.
std::string unescape(std::string_view text, Format format);

}  // namespace pide::presentation
