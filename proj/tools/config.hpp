#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "pide/checker.hpp"

namespace pide::cli {

/// Config problem at a 1-based line and column of the config file.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, std::size_t line, std::size_t column)
      : std::runtime_error(message), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct Config {
  unsigned workers = 0;
  std::size_t cache_capacity = 0;
  std::chrono::milliseconds cancel_deadline{2000};
  std::string session = "Draft";
  std::optional<std::filesystem::path> exports;
  std::shared_ptr<CheckerRegistry> registry;
};

/// The bundled checkers: ftl and bib, each for its own extension.
Config default_config();

/// Parses the config text; relative paths are taken from `base`.
/// Throws ConfigError.
Config parse_config(const std::string& text, const std::filesystem::path& base);

/// Reads and parses a config file. Throws ConfigError, or
/// std::runtime_error when the file cannot be read.
Config load_config(const std::filesystem::path& file);

}  // namespace pide::cli
