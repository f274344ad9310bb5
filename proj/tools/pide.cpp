#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "config.hpp"
#include "pide/execution.hpp"
#include "pide/exports.hpp"
#include "pide/presentation.hpp"
#include "pide/pretty.hpp"
#include "pide/protocol.hpp"
#include "pide/server.hpp"
#include "pide/token.hpp"

namespace fs = std::filesystem;
using namespace pide;
using namespace std::chrono_literals;

namespace {

protocol::WakePipe* interrupt_pipe = nullptr;

extern "C" void on_interrupt(int) {
  if (interrupt_pipe) interrupt_pipe->signal();
}

void install_signal_handlers() {
  struct sigaction sa {};
  sa.sa_handler = on_interrupt;
  sigemptyset(&sa.sa_mask);
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
  signal(SIGPIPE, SIG_IGN);
}

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::stringstream s;
    s << std::cin.rdbuf();
    return s.str();
  }
  auto text = read_file(path);
  if (!text) throw std::runtime_error("cannot read " + path);
  return *text;
}

void write_output(const std::string& path, const std::string& data) {
  if (path == "-") {
    std::cout << data;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << data;
  if (!out) throw std::runtime_error("cannot write " + path);
}

DocumentState::Options state_options(const cli::Config& c) {
  DocumentState::Options o;
  o.engine.workers = c.workers;
  o.engine.cancel_deadline = c.cancel_deadline;
  o.engine.session = c.session;
  return o;
}

std::optional<fs::path> export_db(const cli::Config& c, const std::string& flag) {
  if (!flag.empty()) return fs::path(flag);
  if (const char* env = std::getenv("PIDE_EXPORT_DB"); env && *env) return fs::path(env);
  return c.exports;
}

// serve

int run_serve(const cli::Config& config, const std::string& socket, bool stdio, protocol::WakePipe& wake) {
  protocol::ServeOptions o{config.registry, state_options(config), &wake};
  protocol::ServeEnd end = protocol::ServeEnd::eof;
  if (stdio) {
    end = protocol::serve(STDIN_FILENO, STDOUT_FILENO, o);
  } else {
    const int listener = protocol::listen_unix(socket);
    std::cerr << "listening on " << socket << std::endl;
    const int fd = protocol::accept_one(listener, &wake);
    if (fd >= 0) {
      end = protocol::serve(fd, fd, o);
      ::close(fd);
    } else {
      end = protocol::ServeEnd::interrupted;
    }
    ::close(listener);
    fs::remove(socket);
  }
  if (end == protocol::ServeEnd::interrupted) return 130;
  return end == protocol::ServeEnd::protocol_error ? 1 : 0;
}

// check

struct BatchFile {
  std::string display;
  fs::path disk;
};

int run_check(const cli::Config& config, const std::vector<std::string>& files, const std::string& exports_flag,
              protocol::WakePipe& wake) {
  std::size_t errors = 0;
  auto report = [&](const std::string& file, Range r, Severity s, const std::string& body) {
    std::cout << file << ':' << r.begin << '-' << r.end << ": " << to_string(s) << ": " << body << '\n';
    if (s == Severity::error) ++errors;
  };

  std::map<NodeName, BatchFile> nodes;
  std::vector<NodeName> listed;
  std::vector<NodeEdit> edits;
  auto add = [&](const fs::path& disk, const std::string& display, const NodeName& node) {
    auto text = read_file(disk);
    if (!text) {
      report(display, {0, 0}, Severity::error, "cannot read file");
      return false;
    }
    nodes[node] = {display, disk};
    edits.push_back({node, edit::SetNode{utf8::decode(*text)}});
    edits.push_back({node, edit::Perspective{{}, true}});
    return true;
  };
  for (const auto& file : files) {
    const fs::path disk = fs::absolute(file).lexically_normal();
    const std::string path = canonical_path(disk.generic_string());
    const std::string ext = disk.extension().string();
    NodeName node;
    if (ext == ".thy") {
      node = NodeName::theory(path);
    } else if (!ext.empty() && config.registry->format_for(ext.substr(1))) {
      node = NodeName::file(path);
    } else {
      report(file, {0, 0}, Severity::error,
             ext.empty() ? "no checker registered for files without extension"
                         : "no checker registered for extension \"" + ext + "\"");
      continue;
    }
    if (nodes.contains(node)) continue;
    if (add(disk, file, node)) listed.push_back(node);
  }

  DocumentState state(config.registry, state_options(config));
  // Load imported theories found next to their importers.
  std::set<NodeName> missing;
  while (!edits.empty()) {
    state.apply(edits);
    edits.clear();
    for (const auto& [name, node] : state.latest()->nodes) {
      for (const auto& imp : node->imports) {
        if (nodes.contains(imp) || missing.contains(imp)) continue;
        const fs::path disk = fs::path("/") / imp.path;
        if (!fs::exists(disk) || !add(disk, disk.string(), imp)) missing.insert(imp);
      }
    }
  }

  bool interrupted = false;
  while (!state.await_quiescence(50ms)) {
    if (wake.signalled()) {
      interrupted = true;
      break;
    }
  }
  if (interrupted) {
    std::cerr << "interrupted" << std::endl;
    return 130;
  }

  std::vector<NodeName> order = listed;
  for (const auto& [name, f] : nodes) {
    if (std::find(listed.begin(), listed.end(), name) == listed.end()) order.push_back(name);
  }
  for (const auto& name : order) {
    const auto& display = nodes.at(name).display;
    auto messages = state.messages(name);
    std::stable_sort(messages.begin(), messages.end(),
                     [](const NodeMessage& a, const NodeMessage& b) { return a.range < b.range; });
    for (const auto& m : messages) {
      if (m.message.severity == Severity::status) continue;
      report(display, m.range, m.message.severity, m.message.text());
    }
    bool failed = false;
    for (const auto& r : state.span_results(name)) failed = failed || r.status == ExecStatus::failed;
    std::cout << display << ": " << (failed ? "failed" : "checked") << '\n';
  }

  if (const auto db = export_db(config, exports_flag)) {
    try {
      SqliteExportStore store(*db);
      store.clear_session(config.session);
      for (const auto& e : state.exports()) store.export_blob(e);
    } catch (const std::exception& e) {
      report(db->string(), {0, 0}, Severity::error, e.what());
    }
  }
  std::cout.flush();
  return errors == 0 ? 0 : 1;
}

// tokens

std::string escape_source(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20 || c == 0x7f) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\x%02x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

KeywordTable read_keywords(const std::string& file) {
  const std::string text = read_input(file);
  KeywordTable k;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    std::istringstream words(line);
    std::vector<std::string> w;
    for (std::string x; words >> x;) w.push_back(x);
    if (w.empty() || w[0].starts_with('#')) continue;
    if (w[0] == "command" && w.size() == 2) {
      k.add_command(w[1]);
    } else if (w[0] == "load" && w.size() == 3) {
      k.add_command(w[1], {true, w[2]});
    } else if (w[0] == "minor" && w.size() == 2) {
      k.add_minor(w[1]);
    } else {
      throw std::runtime_error(file + ":" + std::to_string(line_no) +
                               ": expected \"command NAME\", \"load NAME EXT\" or \"minor NAME\"");
    }
  }
  return k;
}

int run_tokens(const std::string& file, const std::string& keywords_file) {
  const KeywordTable keywords = keywords_file.empty() ? demo_keywords() : read_keywords(keywords_file);
  const Text text = utf8::decode(read_input(file));
  for (const auto& t : tokenize(text, keywords)) {
    std::cout << to_string(t.kind) << '\t' << t.range.begin << '\t' << t.range.end << '\t'
              << escape_source(utf8::encode(TextView(text).substr(t.range.begin, t.range.length()))) << '\n';
  }
  return 0;
}

// format

int run_format(const std::string& file, double margin) {
  const auto tree = protocol::decode_pretty(protocol::yxml::parse(read_input(file)));
  pretty::validate(tree);
  for (const auto& line : pretty::format(tree, margin)) std::cout << line << '\n';
  return 0;
}

// present

int run_present(const std::string& file, const std::string& format_name, const std::string& out) {
  const auto format = presentation::parse_format(format_name);
  if (!format) throw std::runtime_error("unknown format \"" + format_name + "\"");
  const Text text = utf8::decode(read_input(file));
  try {
    write_output(out, presentation::present(text, demo_keywords(), presentation::SymbolTable::bundled(),
                                            presentation::Antiquotations::defaults(), *format));
  } catch (const presentation::PresentationError& e) {
    std::cout << file << ':' << e.range().begin << '-' << e.range().end << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

// export

int run_export(const cli::Config& config, const std::string& db_flag, const std::string& session, bool list,
               const std::string& pattern, const std::string& out) {
  const auto db = export_db(config, db_flag);
  if (!db) throw std::runtime_error("no export database (use --db, PIDE_EXPORT_DB or \"exports\" in the config)");
  if (!fs::exists(*db)) throw std::runtime_error("no export database at " + db->string());
  SqliteExportStore store(*db);
  if (list) {
    for (const auto& [theory, name] : store.list(session)) std::cout << theory << ':' << name << '\n';
    return 0;
  }
  if (pattern.empty()) throw std::runtime_error("give --list or a THEORY:NAME pattern");
  const auto colon = pattern.find(':');
  const std::string theory_pattern = colon == std::string::npos ? "*" : pattern.substr(0, colon);
  const std::string name_pattern = colon == std::string::npos ? pattern : pattern.substr(colon + 1);
  const auto entries = store.retrieve(session, theory_pattern, name_pattern);
  if (entries.empty()) {
    std::cerr << "no export matches \"" << pattern << "\" in session " << session << '\n';
    return 1;
  }
  if (pattern.find('*') == std::string::npos && entries.size() == 1) {
    write_output(out, entries.front().payload);
    return 0;
  }
  if (out == "-") throw std::runtime_error("a wildcard pattern needs -o DIRECTORY");
  for (const auto& e : entries) {
    const fs::path target = fs::path(out) / e.theory / e.name;
    fs::create_directories(target.parent_path());
    write_output(target.string(), e.payload);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prover-agnostic document model: interactive server and batch tools", "pide"};
  app.set_version_flag("--version", std::string("pide ") + PIDE_VERSION);
  app.require_subcommand(1);
  std::string config_file;
  app.add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "Serve one protocol connection");
  std::string socket;
  bool stdio = false;
  auto* socket_opt = serve->add_option("--socket", socket, "Unix socket path");
  auto* stdio_opt = serve->add_flag("--stdio", stdio, "Use standard input and output");
  socket_opt->excludes(stdio_opt);
  stdio_opt->excludes(socket_opt);

  auto* check = app.add_subcommand("check", "Check files and print diagnostics");
  std::vector<std::string> files;
  std::string check_exports;
  check->add_option("files", files, "Theory and auxiliary files")->required();
  check->add_option("--exports", check_exports, "Export database to write");

  auto* tokens = app.add_subcommand("tokens", "Print the tokens of a file");
  std::string token_file;
  std::string keywords_file;
  tokens->add_option("file", token_file, "Input file, - for stdin")->required();
  tokens->add_option("--keywords", keywords_file, "Keyword declarations");

  auto* format = app.add_subcommand("format", "Pretty-print a serialized message body");
  std::string format_file = "-";
  double margin = 76;
  format->add_option("file", format_file, "Serialized tree, - for stdin");
  format->add_option("--margin", margin, "Line width")->check(CLI::PositiveNumber);

  auto* present = app.add_subcommand("present", "Render a theory as LaTeX or HTML");
  std::string present_file;
  std::string present_format = "latex";
  std::string present_out = "-";
  present->add_option("file", present_file, "Theory file")->required();
  present->add_option("--format", present_format, "latex or html")->check(CLI::IsMember({"latex", "html"}));
  present->add_option("-o", present_out, "Output file, - for stdout");

  auto* exp = app.add_subcommand("export", "List or extract exports of a batch check");
  std::string export_session = "Draft";
  std::string export_db_flag;
  std::string export_pattern;
  std::string export_out = "-";
  bool export_list = false;
  exp->add_option("--session", export_session, "Session name");
  exp->add_option("--db", export_db_flag, "Export database");
  exp->add_flag("--list", export_list, "List entries as THEORY:NAME");
  exp->add_option("pattern", export_pattern, "THEORY:NAME with * and ** wildcards");
  exp->add_option("-o", export_out, "Output file (or directory for wildcards), - for stdout");

  CLI11_PARSE(app, argc, argv);

  cli::Config config;
  try {
    config = config_file.empty() ? cli::default_config() : cli::load_config(config_file);
  } catch (const cli::ConfigError& e) {
    std::cerr << config_file << ':' << e.line() << ':' << e.column() << ": error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }

  protocol::WakePipe wake;
  interrupt_pipe = &wake;
  install_signal_handlers();

  try {
    if (*serve) {
      if (!stdio && socket.empty()) throw CLI::RequiredError("--socket or --stdio");
      return run_serve(config, socket, stdio, wake);
    }
    if (*check) return run_check(config, files, check_exports, wake);
    if (*tokens) return run_tokens(token_file, keywords_file);
    if (*format) return run_format(format_file, margin);
    if (*present) return run_present(present_file, present_format, present_out);
    if (*exp) return run_export(config, export_db_flag, export_session, export_list, export_pattern, export_out);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
