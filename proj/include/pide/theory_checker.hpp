#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stop_token>
#include <string>
#include <vector>

#include "pide/checker.hpp"
#include "pide/document.hpp"
#include "pide/exports.hpp"

namespace pide {

/// Logical context threaded through the spans of a theory.
struct TheoryContext {
  std::map<std::string, std::int64_t> constants;

  friend bool operator==(const TheoryContext&, const TheoryContext&) = default;
};

/// First-wins union of the imported contexts.
std::shared_ptr<const TheoryContext> merge_theory_contexts(
    const std::vector<std::shared_ptr<const TheoryContext>>& imports);

struct SpanInput {
  const Node& node;
  const CommandSpan& span;
  std::shared_ptr<const TheoryContext> context;
  /// Imports of the node that do not exist in the version (prelude only).
  std::vector<NodeName> missing_imports;
};

struct SpanOutput {
  std::shared_ptr<const TheoryContext> context;
  std::vector<ExportEntry> exports;  // session left empty
};

/// Demo checker for theory spans. Messages are relative to the span.
///
///   definition NAME = "EXPR"      integer constant
///   lemma "CLAIM"                 arithmetic claim over constants
///   ML ‹sleep N›  ML ‹crash›      interruptible delay, checker crash
///   export_file "NAME" ‹TEXT›     session export
///   ML_file "FILE"                load command
CheckOutcome check_theory_span(const SpanInput& input, std::stop_token cancel,
                               const MessageSink& emit, SpanOutput& output);

}  // namespace pide
