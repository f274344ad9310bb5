#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pide/checker.hpp"

namespace pide {

/// One line of external tool output: `SEVERITY<TAB>START<TAB>END<TAB>body`,
/// offsets in characters of the checked content. Returns nullopt for lines
/// that do not follow the grammar.
std::optional<CheckerMessage> parse_message_line(std::string_view line);

/// Environment variable consulted to override the executable of `checker_id`:
/// PIDE_TOOL_<ID> with the id upper-cased and non-alphanumerics as '_'.
std::string tool_override_variable(std::string_view checker_id);

/// Runs an external program per check. The command template is split on
/// whitespace; `{file}` is replaced by a fresh temporary file holding the
/// content, otherwise the content is written to the program's stdin.
/// Cancellation sends SIGINT to the program's process group and SIGKILL
/// once the deadline has passed.
class ExternalChecker final : public Checker {
 public:
  struct Options {
    std::string checker_id;
    std::string command_template;
    std::chrono::milliseconds deadline{2000};
    std::filesystem::path temp_root;  // empty: system temp directory
  };

  explicit ExternalChecker(Options options);

  CheckOutcome check(TextView content, std::stop_token cancel, const MessageSink& emit) override;

 private:
  Options options_;
};

}  // namespace pide
