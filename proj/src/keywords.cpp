#include "pide/keywords.hpp"

#include "pide/text.hpp"

namespace pide {

KeywordTable& KeywordTable::add_command(const std::string& name, CommandAttrs attrs) {
  auto [it, inserted] = commands_.emplace(name, attrs);
  if (!inserted && !(it->second == attrs)) throw KeywordConflict(name);
  return *this;
}

KeywordTable& KeywordTable::add_minor(const std::string& name) {
  if (minor_.insert(name).second) {
    max_minor_length_ = std::max(max_minor_length_, utf8::decode(name).size());
  }
  return *this;
}

const CommandAttrs* KeywordTable::command(const std::string& name) const {
  auto it = commands_.find(name);
  return it == commands_.end() ? nullptr : &it->second;
}

KeywordTable KeywordTable::merge(const KeywordTable& a, const KeywordTable& b) {
  KeywordTable out = a;
  for (const auto& [name, attrs] : b.commands_) out.add_command(name, attrs);
  for (const auto& name : b.minor_) out.add_minor(name);
  return out;
}

const KeywordTable& demo_keywords() {
  static const KeywordTable table = [] {
    KeywordTable t;
    for (const char* minor : {"theory", "imports", "keywords", "begin", "and", "::", "=", "(", ")"}) {
      t.add_minor(minor);
    }
    for (const char* cmd : {"chapter", "section", "subsection", "subsubsection", "paragraph",
                            "text", "txt", "text_raw", "definition", "lemma", "ML", "export_file",
                            "end"}) {
      t.add_command(cmd);
    }
    t.add_command("ML_file", {true, "ML"});
    return t;
  }();
  return table;
}

}  // namespace pide
