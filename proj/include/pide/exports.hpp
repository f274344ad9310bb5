#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace pide {

struct ExportEntry {
  std::string session;
  std::string theory;
  std::string name;  // slash-separated path
  std::string payload;
  bool compressed = false;

  friend bool operator==(const ExportEntry&, const ExportEntry&) = default;
};

class ExportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace xz {
std::string compress(std::string_view data);
/// Throws ExportError on corrupt input.
std::string decompress(std::string_view data);
}  // namespace xz

/// Glob over slash-separated names: `*` matches within one segment,
/// `**` matches any number of segments.
bool match_export_pattern(std::string_view pattern, std::string_view name);

/// Throws ExportError unless `name` is a relative path of nonempty segments
/// without "." or "..".
void check_export_name(std::string_view name);

/// Session export database. Entries are unique per (session, theory, name);
/// the first writer wins and later writers get an ExportError.
class ExportStore {
 public:
  virtual ~ExportStore() = default;

  void export_blob(const ExportEntry& entry);

  /// Entries of `session` whose theory and name match the patterns,
  /// decompressed, ordered by (theory, name).
  std::vector<ExportEntry> retrieve(const std::string& session, std::string_view theory_pattern,
                                    std::string_view name_pattern) const;

  /// (theory, name) pairs stored for `session`.
  std::vector<std::pair<std::string, std::string>> list(const std::string& session) const;

  /// Bytes held for one entry (after compression); 0 if absent.
  std::size_t stored_size(const std::string& session, const std::string& theory,
                          const std::string& name) const;

 protected:
  struct Record {
    std::string session;
    std::string theory;
    std::string name;
    std::string data;  // flag byte + payload (compressed if flag = 1)
  };

  /// Returns false if the key already exists.
  virtual bool insert(Record record) = 0;
  virtual std::vector<Record> records(const std::string& session) const = 0;
};

/// Interactive mode: kept in memory for the lifetime of the process.
class MemoryExportStore final : public ExportStore {
 protected:
  bool insert(Record record) override;
  std::vector<Record> records(const std::string& session) const override;

 private:
  mutable std::mutex mutex_;
  std::map<std::tuple<std::string, std::string, std::string>, std::string> entries_;
};

/// Batch mode: single-file SQLite database.
class SqliteExportStore final : public ExportStore {
 public:
  explicit SqliteExportStore(const std::filesystem::path& file);
  ~SqliteExportStore() override;
  SqliteExportStore(const SqliteExportStore&) = delete;
  SqliteExportStore& operator=(const SqliteExportStore&) = delete;

  /// Removes all entries of `session` (before a fresh batch build).
  void clear_session(const std::string& session);

 protected:
  bool insert(Record record) override;
  std::vector<Record> records(const std::string& session) const override;

 private:
  struct Db;
  std::unique_ptr<Db> db_;
  mutable std::mutex mutex_;
};

}  // namespace pide
