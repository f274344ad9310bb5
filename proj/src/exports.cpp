#include "pide/exports.hpp"

#include <lzma.h>
#include <sqlite3.h>

#include <algorithm>

namespace pide {
namespace xz {

std::string compress(std::string_view data) {
  std::string out(lzma_stream_buffer_bound(data.size()), '\0');
  std::size_t pos = 0;
  const lzma_ret ret = lzma_easy_buffer_encode(
      6, LZMA_CHECK_CRC64, nullptr, reinterpret_cast<const uint8_t*>(data.data()), data.size(),
      reinterpret_cast<uint8_t*>(out.data()), &pos, out.size());
  if (ret != LZMA_OK) throw ExportError("xz compression failed (code " + std::to_string(ret) + ")");
  out.resize(pos);
  return out;
}

std::string decompress(std::string_view data) {
  lzma_stream strm = LZMA_STREAM_INIT;
  if (lzma_stream_decoder(&strm, UINT64_MAX, 0) != LZMA_OK) {
    throw ExportError("xz decoder initialization failed");
  }
  std::string out;
  char buffer[1 << 16];
  strm.next_in = reinterpret_cast<const uint8_t*>(data.data());
  strm.avail_in = data.size();
  lzma_ret ret = LZMA_OK;
  while (ret == LZMA_OK) {
    strm.next_out = reinterpret_cast<uint8_t*>(buffer);
    strm.avail_out = sizeof buffer;
    ret = lzma_code(&strm, LZMA_FINISH);
    out.append(buffer, sizeof buffer - strm.avail_out);
  }
  lzma_end(&strm);
  if (ret != LZMA_STREAM_END) throw ExportError("corrupt xz data (code " + std::to_string(ret) + ")");
  return out;
}

}  // namespace xz

namespace {

std::vector<std::string_view> segments(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (true) {
    const std::size_t j = s.find('/', i);
    out.push_back(s.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i));
    if (j == std::string_view::npos) break;
    i = j + 1;
  }
  return out;
}

bool match_segment(std::string_view p, std::string_view s) {
  // '*' within a segment: classic backtracking glob.
  std::size_t pi = 0, si = 0, star = std::string_view::npos, mark = 0;
  while (si < s.size()) {
    if (pi < p.size() && p[pi] == '*') {
      star = pi++;
      mark = si;
    } else if (pi < p.size() && p[pi] == s[si]) {
      ++pi, ++si;
    } else if (star != std::string_view::npos) {
      pi = star + 1;
      si = ++mark;
    } else {
      return false;
    }
  }
  while (pi < p.size() && p[pi] == '*') ++pi;
  return pi == p.size();
}

bool match_segments(const std::vector<std::string_view>& p, std::size_t pi,
                    const std::vector<std::string_view>& s, std::size_t si) {
  if (pi == p.size()) return si == s.size();
  if (p[pi] == "**") {
    for (std::size_t k = si; k <= s.size(); ++k) {
      if (match_segments(p, pi + 1, s, k)) return true;
    }
    return false;
  }
  return si < s.size() && match_segment(p[pi], s[si]) && match_segments(p, pi + 1, s, si + 1);
}

}  // namespace

bool match_export_pattern(std::string_view pattern, std::string_view name) {
  return match_segments(segments(pattern), 0, segments(name), 0);
}

void check_export_name(std::string_view name) {
  for (auto seg : segments(name)) {
    if (seg.empty() || seg == "." || seg == "..") {
      throw ExportError("invalid export name \"" + std::string(name) + "\"");
    }
  }
}

void ExportStore::export_blob(const ExportEntry& entry) {
  check_export_name(entry.name);
  Record r{entry.session, entry.theory, entry.name, {}};
  r.data.push_back(entry.compressed ? '\1' : '\0');
  r.data += entry.compressed ? xz::compress(entry.payload) : entry.payload;
  if (!insert(std::move(r))) {
    throw ExportError("duplicate export " + entry.session + ":" + entry.theory + "/" + entry.name);
  }
}

std::vector<ExportEntry> ExportStore::retrieve(const std::string& session,
                                               std::string_view theory_pattern,
                                               std::string_view name_pattern) const {
  std::vector<ExportEntry> out;
  for (auto& r : records(session)) {
    if (!match_export_pattern(theory_pattern, r.theory) || !match_export_pattern(name_pattern, r.name)) {
      continue;
    }
    if (r.data.empty()) throw ExportError("corrupt export record " + r.theory + "/" + r.name);
    const bool compressed = r.data[0] == '\1';
    std::string_view body = std::string_view(r.data).substr(1);
    out.push_back({r.session, r.theory, r.name,
                   compressed ? xz::decompress(body) : std::string(body), compressed});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.theory, a.name) < std::tie(b.theory, b.name);
  });
  return out;
}

std::vector<std::pair<std::string, std::string>> ExportStore::list(const std::string& session) const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& r : records(session)) out.emplace_back(r.theory, r.name);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t ExportStore::stored_size(const std::string& session, const std::string& theory,
                                     const std::string& name) const {
  for (const auto& r : records(session)) {
    if (r.theory == theory && r.name == name) return r.data.size() - 1;
  }
  return 0;
}

bool MemoryExportStore::insert(Record record) {
  std::lock_guard lock(mutex_);
  return entries_
      .emplace(std::tuple(record.session, record.theory, record.name), std::move(record.data))
      .second;
}

std::vector<ExportStore::Record> MemoryExportStore::records(const std::string& session) const {
  std::lock_guard lock(mutex_);
  std::vector<Record> out;
  for (const auto& [key, data] : entries_) {
    if (std::get<0>(key) == session) out.push_back({session, std::get<1>(key), std::get<2>(key), data});
  }
  return out;
}

struct SqliteExportStore::Db {
  sqlite3* handle = nullptr;

  void exec(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(handle, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown error";
      sqlite3_free(err);
      throw ExportError("export database: " + msg);
    }
  }
};

namespace {

struct Statement {
  sqlite3_stmt* stmt = nullptr;
  Statement(sqlite3* db, const char* sql) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt, nullptr) != SQLITE_OK) {
      throw ExportError(std::string("export database: ") + sqlite3_errmsg(db));
    }
  }
  ~Statement() { sqlite3_finalize(stmt); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  void bind(int i, const std::string& s) {
    sqlite3_bind_blob(stmt, i, s.data(), static_cast<int>(s.size()), SQLITE_TRANSIENT);
  }
  std::string column(int i) {
    const auto* p = static_cast<const char*>(sqlite3_column_blob(stmt, i));
    return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt, i))) : std::string();
  }
};

}  // namespace

SqliteExportStore::SqliteExportStore(const std::filesystem::path& file) : db_(std::make_unique<Db>()) {
  if (sqlite3_open(file.c_str(), &db_->handle) != SQLITE_OK) {
    std::string msg = db_->handle ? sqlite3_errmsg(db_->handle) : "out of memory";
    sqlite3_close(db_->handle);
    throw ExportError("cannot open export database " + file.string() + ": " + msg);
  }
  sqlite3_busy_timeout(db_->handle, 5000);
  db_->exec(
      "CREATE TABLE IF NOT EXISTS exports (session_name BLOB NOT NULL, theory_name BLOB NOT NULL, "
      "name BLOB NOT NULL, data BLOB NOT NULL, PRIMARY KEY (session_name, theory_name, name))");
}

SqliteExportStore::~SqliteExportStore() { sqlite3_close(db_->handle); }

void SqliteExportStore::clear_session(const std::string& session) {
  std::lock_guard lock(mutex_);
  Statement st(db_->handle, "DELETE FROM exports WHERE session_name = ?");
  st.bind(1, session);
  if (sqlite3_step(st.stmt) != SQLITE_DONE) {
    throw ExportError(std::string("export database: ") + sqlite3_errmsg(db_->handle));
  }
}

bool SqliteExportStore::insert(Record record) {
  std::lock_guard lock(mutex_);
  Statement st(db_->handle,
               "INSERT OR IGNORE INTO exports (session_name, theory_name, name, data) VALUES (?, ?, ?, ?)");
  st.bind(1, record.session);
  st.bind(2, record.theory);
  st.bind(3, record.name);
  st.bind(4, record.data);
  if (sqlite3_step(st.stmt) != SQLITE_DONE) {
    throw ExportError(std::string("export database: ") + sqlite3_errmsg(db_->handle));
  }
  return sqlite3_changes(db_->handle) == 1;
}

std::vector<ExportStore::Record> SqliteExportStore::records(const std::string& session) const {
  std::lock_guard lock(mutex_);
  Statement st(db_->handle,
               "SELECT theory_name, name, data FROM exports WHERE session_name = ? "
               "ORDER BY theory_name, name");
  st.bind(1, session);
  std::vector<Record> out;
  while (sqlite3_step(st.stmt) == SQLITE_ROW) {
    out.push_back({session, st.column(0), st.column(1), st.column(2)});
  }
  return out;
}

}  // namespace pide
