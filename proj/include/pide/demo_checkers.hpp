#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pide/checker.hpp"

namespace pide {

/// A paragraph of ForTheL-like text starting with `Proposition.`,
/// `Definition.` or `Axiom.` and ending at a blank line.
struct FtlBlock {
  enum class Kind { proposition, definition, axiom };
  Kind kind = Kind::proposition;
  Range range;    // keyword through the last non-blank character
  Range keyword;  // e.g. "Proposition."
  Range body;     // between keyword and final '.', trimmed
  bool terminated = true;
};

std::vector<FtlBlock> ftl_blocks(TextView text);

/// Checks integer arithmetic claims in Proposition blocks. Syntax messages
/// for all blocks are emitted before any block is evaluated; each block's
/// evaluation goes through the cache and, when configured, takes
/// `delay_ms` of interruptible time.
class FtlChecker final : public Checker {
 public:
  struct Options {
    long delay_ms = 0;
    std::shared_ptr<BlockCache> cache = std::make_shared<BlockCache>();
  };

  FtlChecker() : FtlChecker(Options{}) {}
  explicit FtlChecker(Options options) : options_(std::move(options)) {}

  CheckOutcome check(TextView content, std::stop_token cancel, const MessageSink& emit) override;

  BlockCache& cache() { return *options_.cache; }

 private:
  Options options_;
};

/// Per-entry diagnostics for bibtex databases: malformed entries, unknown
/// entry types, missing required fields, duplicate keys.
class BibChecker final : public Checker {
 public:
  explicit BibChecker(std::shared_ptr<BlockCache> cache = std::make_shared<BlockCache>())
      : cache_(std::move(cache)) {}

  CheckOutcome check(TextView content, std::stop_token cancel, const MessageSink& emit) override;

  BlockCache& cache() { return *cache_; }

 private:
  std::shared_ptr<BlockCache> cache_;
};

}  // namespace pide
