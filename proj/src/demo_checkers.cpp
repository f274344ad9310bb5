#include "pide/demo_checkers.hpp"

#include <map>
#include <set>

#include "pide/arith.hpp"

namespace pide {
namespace {

bool is_blank(char32_t c) { return c == U' ' || c == U'\t' || c == U'\r' || c == U'\n' || c == U'\f'; }

struct KindWord {
  std::u32string_view word;
  FtlBlock::Kind kind;
};
constexpr KindWord kind_words[] = {
    {U"Proposition.", FtlBlock::Kind::proposition},
    {U"Definition.", FtlBlock::Kind::definition},
    {U"Axiom.", FtlBlock::Kind::axiom},
};

std::string_view kind_name(FtlBlock::Kind k) {
  switch (k) {
    case FtlBlock::Kind::proposition: return "Proposition";
    case FtlBlock::Kind::definition: return "Definition";
    case FtlBlock::Kind::axiom: return "Axiom";
  }
  return "?";
}

std::string show(std::int64_t v) { return std::to_string(v); }

// Semantic evaluation of one block; ranges relative to the block start.
BlockCache::Value evaluate_block(TextView block_text, const FtlBlock& block) {
  const Range whole{0, block_text.size()};
  BlockCache::Value out;
  if (block.kind == FtlBlock::Kind::definition) {
    out.push_back(make_message(Severity::writeln, whole, "definition accepted"));
    return out;
  }
  if (block.kind == FtlBlock::Kind::axiom) {
    out.push_back(make_message(Severity::writeln, whole, "axiom assumed"));
    return out;
  }
  const Offset body_start = block.body.begin - block.range.begin;
  const TextView body = block_text.substr(body_start, block.body.length());
  auto parsed = arith::parse_claim(body);
  const auto& claim = std::get<arith::Claim>(parsed);
  auto lhs = arith::evaluate(claim.lhs);
  auto rhs = arith::evaluate(claim.rhs);
  for (const auto* side : {&lhs, &rhs}) {
    if (const auto* err = std::get_if<arith::EvalError>(side)) {
      out.push_back(make_message(Severity::error, err->range.shifted(body_start),
                                 "evaluation failed: " + err->message));
      return out;
    }
  }
  const std::int64_t l = std::get<std::int64_t>(lhs);
  const std::int64_t r = std::get<std::int64_t>(rhs);
  if (arith::holds(claim.relation, l, r)) {
    out.push_back(make_message(Severity::writeln, whole, "checked"));
    return out;
  }
  CheckerMessage msg = make_message(
      Severity::error, whole,
      "false proposition: " + show(l) + " " + std::string(arith::to_string(claim.relation)) + " " +
          show(r) + " does not hold");
  if (claim.relation == arith::Relation::eq && claim.rhs.kind == arith::Expr::Kind::number) {
    msg.fix = ActiveFix{claim.rhs.range.shifted(body_start), show(l),
                        "replace " + show(r) + " by " + show(l)};
  }
  out.push_back(std::move(msg));
  return out;
}

}  // namespace

std::vector<FtlBlock> ftl_blocks(TextView text) {
  std::vector<FtlBlock> blocks;
  std::size_t pos = 0;
  const std::size_t n = text.size();
  while (pos < n) {
    // Paragraph: maximal run of non-blank lines.
    std::size_t line = pos;
    while (line < n) {
      std::size_t end = text.find(U'\n', line);
      if (end == TextView::npos) end = n;
      bool blank = true;
      for (std::size_t i = line; i < end; ++i) blank = blank && is_blank(text[i]);
      if (!blank) break;
      line = end + 1;
    }
    if (line >= n) break;
    std::size_t para_end = line;
    while (para_end < n) {
      std::size_t end = text.find(U'\n', para_end);
      if (end == TextView::npos) end = n;
      bool blank = true;
      for (std::size_t i = para_end; i < end; ++i) blank = blank && is_blank(text[i]);
      if (blank) break;
      para_end = end == n ? n : end + 1;
    }
    std::size_t first = line;
    while (first < para_end && is_blank(text[first])) ++first;
    std::size_t last = para_end;
    while (last > first && is_blank(text[last - 1])) --last;
    pos = para_end;

    for (const auto& kw : kind_words) {
      if (text.substr(first, kw.word.size()) != kw.word) continue;
      FtlBlock b;
      b.kind = kw.kind;
      b.range = {first, last};
      b.keyword = {first, first + kw.word.size()};
      std::size_t body_end = last;
      b.terminated = body_end > b.keyword.end && text[body_end - 1] == U'.';
      if (b.terminated) --body_end;
      std::size_t body_begin = b.keyword.end;
      while (body_begin < body_end && is_blank(text[body_begin])) ++body_begin;
      while (body_end > body_begin && is_blank(text[body_end - 1])) --body_end;
      b.body = {body_begin, body_end};
      blocks.push_back(b);
      break;
    }
  }
  return blocks;
}

CheckOutcome FtlChecker::check(TextView content, std::stop_token cancel, const MessageSink& emit) {
  const auto blocks = ftl_blocks(content);
  std::vector<bool> valid(blocks.size(), true);

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const FtlBlock& b = blocks[i];
    emit(make_message(Severity::status, b.keyword, std::string(kind_name(b.kind)), Phase::syntax));
    if (!b.terminated) {
      valid[i] = false;
      emit(make_message(Severity::error, {b.range.end, b.range.end},
                        "block must end with \".\"", Phase::syntax));
      continue;
    }
    if (b.kind != FtlBlock::Kind::proposition) continue;
    auto parsed = arith::parse_claim(content.substr(b.body.begin, b.body.length()));
    if (const auto* err = std::get_if<arith::ParseError>(&parsed)) {
      valid[i] = false;
      const Offset at = b.body.begin + err->offset;
      emit(make_message(Severity::error, {at, std::min(at + 1, b.body.end)},
                        "syntax error: " + err->message, Phase::syntax));
    }
  }

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!valid[i]) continue;
    if (cancel.stop_requested()) return CheckOutcome::cancelled;
    const FtlBlock& b = blocks[i];
    const TextView source = content.substr(b.range.begin, b.range.length());
    auto result = options_.cache->get_or_compute(
        Digest::of(source),
        [&]() -> std::optional<BlockCache::Value> {
          if (options_.delay_ms > 0 && !interruptible_sleep(cancel, options_.delay_ms)) {
            return std::nullopt;
          }
          return evaluate_block(source, b);
        },
        cancel);
    if (!result) return CheckOutcome::cancelled;
    for (CheckerMessage msg : *result) {
      msg.range = msg.range.shifted(b.range.begin);
      if (msg.fix) msg.fix->range = msg.fix->range.shifted(b.range.begin);
      emit(msg);
    }
  }
  return cancel.stop_requested() ? CheckOutcome::cancelled : CheckOutcome::finished;
}

namespace {

struct BibEntry {
  std::string type;  // lower case
  std::string key;
  Range range;
  Range key_range;
  std::map<std::string, std::string> fields;
};

struct BibError {
  std::string message;
  Range range;
};

class BibParser {
 public:
  explicit BibParser(TextView text) : text_(text) {}

  void run(std::vector<BibEntry>& entries, std::vector<BibError>& errors) {
    while (true) {
      pos_ = text_.find(U'@', pos_);
      if (pos_ == TextView::npos) return;
      const std::size_t start = pos_;
      try {
        auto entry = parse_entry();
        if (entry) entries.push_back(std::move(*entry));
      } catch (const BibError& e) {
        errors.push_back(e);
        pos_ = std::max(pos_, start + 1);
      }
    }
  }

 private:
  TextView text_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg) {
    throw BibError{msg, {pos_, std::min(pos_ + 1, text_.size())}};
  }

  void skip() {
    while (pos_ < text_.size() && is_blank(text_[pos_])) ++pos_;
  }

  static bool word_char(char32_t c) {
    return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9') ||
           c == U'_' || c == U'-' || c == U':' || c == U'.' || c == U'/' || c == U'+';
  }

  std::string word() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && word_char(text_[pos_])) ++pos_;
    return utf8::encode(text_.substr(start, pos_ - start));
  }

  std::string braced(char32_t open, char32_t close) {
    const std::size_t start = ++pos_;
    int depth = 1;
    while (pos_ < text_.size()) {
      if (text_[pos_] == open && open != close) {
        ++depth;
      } else if (text_[pos_] == close) {
        if (--depth == 0) {
          ++pos_;
          return utf8::encode(text_.substr(start, pos_ - 1 - start));
        }
      }
      ++pos_;
    }
    fail("unterminated field value");
  }

  std::string value() {
    std::string out;
    while (true) {
      skip();
      if (pos_ >= text_.size()) fail("missing field value");
      if (text_[pos_] == U'{') {
        out += braced(U'{', U'}');
      } else if (text_[pos_] == U'"') {
        out += braced(U'"', U'"');
      } else {
        std::string w = word();
        if (w.empty()) fail("malformed field value");
        out += w;
      }
      skip();
      if (pos_ < text_.size() && text_[pos_] == U'#') {
        ++pos_;
        continue;
      }
      return out;
    }
  }

  std::optional<BibEntry> parse_entry() {
    BibEntry e;
    e.range.begin = pos_;
    ++pos_;
    std::string type = word();
    if (type.empty()) fail("missing entry type after \"@\"");
    for (auto& c : type) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    skip();
    if (pos_ >= text_.size() || (text_[pos_] != U'{' && text_[pos_] != U'(')) {
      fail("expected \"{\" after entry type");
    }
    const char32_t close = text_[pos_] == U'{' ? U'}' : U')';
    if (type == "comment" || type == "preamble" || type == "string") {
      braced(text_[pos_], close);
      return std::nullopt;
    }
    ++pos_;
    skip();
    const std::size_t key_start = pos_;
    e.key = word();
    if (e.key.empty()) fail("missing entry key");
    e.key_range = {key_start, pos_};
    e.type = type;
    skip();
    while (true) {
      if (pos_ >= text_.size()) fail("unterminated entry");
      if (text_[pos_] == close) {
        ++pos_;
        break;
      }
      if (text_[pos_] != U',') fail("expected \",\" or end of entry");
      ++pos_;
      skip();
      if (pos_ < text_.size() && text_[pos_] == close) continue;
      std::string name = word();
      if (name.empty()) fail("expected field name");
      for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      skip();
      if (pos_ >= text_.size() || text_[pos_] != U'=') fail("expected \"=\" after field name");
      ++pos_;
      e.fields[name] = value();
      skip();
    }
    e.range.end = pos_;
    return e;
  }
};

const std::map<std::string, std::vector<std::string>>& required_fields() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"article", {"author", "title", "journal", "year"}},
      {"book", {"title", "publisher", "year"}},
      {"booklet", {"title"}},
      {"inbook", {"title", "publisher", "year"}},
      {"incollection", {"author", "title", "booktitle", "year"}},
      {"inproceedings", {"author", "title", "booktitle", "year"}},
      {"manual", {"title"}},
      {"mastersthesis", {"author", "title", "school", "year"}},
      {"misc", {}},
      {"online", {"title", "url"}},
      {"phdthesis", {"author", "title", "school", "year"}},
      {"proceedings", {"title", "year"}},
      {"techreport", {"author", "title", "institution", "year"}},
      {"unpublished", {"author", "title", "note"}},
  };
  return table;
}

BlockCache::Value check_entry(const BibEntry& e) {
  BlockCache::Value out;
  const Range whole{0, e.range.length()};
  const auto& table = required_fields();
  auto it = table.find(e.type);
  if (it == table.end()) {
    out.push_back(make_message(Severity::warning, whole, "unknown entry type \"" + e.type + "\""));
    return out;
  }
  std::string missing;
  for (const auto& f : it->second) {
    if (e.fields.contains(f)) continue;
    if (!missing.empty()) missing += ", ";
    missing += f;
  }
  if (!missing.empty()) {
    out.push_back(make_message(Severity::warning, whole,
                               "entry \"" + e.key + "\" lacks required field(s): " + missing));
  }
  return out;
}

}  // namespace

CheckOutcome BibChecker::check(TextView content, std::stop_token cancel, const MessageSink& emit) {
  std::vector<BibEntry> entries;
  std::vector<BibError> errors;
  BibParser(content).run(entries, errors);
  for (const auto& e : entries) {
    emit(make_message(Severity::status, e.key_range, "entry " + e.key, Phase::syntax));
  }
  for (const auto& err : errors) emit(make_message(Severity::error, err.range, err.message, Phase::syntax));

  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (cancel.stop_requested()) return CheckOutcome::cancelled;
    const TextView source = content.substr(e.range.begin, e.range.length());
    auto result = cache_->get_or_compute(
        Digest::of(source), [&]() -> std::optional<BlockCache::Value> { return check_entry(e); },
        cancel);
    if (!result) return CheckOutcome::cancelled;
    for (CheckerMessage msg : *result) {
      msg.range = msg.range.shifted(e.range.begin);
      emit(msg);
    }
    if (!seen.insert(e.key).second) {
      emit(make_message(Severity::error, e.key_range, "duplicate entry key \"" + e.key + "\""));
    }
  }
  return CheckOutcome::finished;
}

}  // namespace pide
