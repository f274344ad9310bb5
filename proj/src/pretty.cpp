#include "pide/pretty.hpp"

#include <cmath>
#include <stdexcept>

namespace pide::pretty {
namespace {

class Formatter {
 public:
  Formatter(double margin, const Metric& metric)
      : margin_(margin), metric_(metric), space_(metric(" ")) {}

  std::vector<std::string> run(const Tree& tree) {
    lines_.clear();
    line_.clear();
    pos_ = 0;
    const std::vector<Tree> top{tree};
    emit(top, 0, 0, false);
    lines_.push_back(line_);
    return lines_;
  }

 private:
  double margin_;
  const Metric& metric_;
  double space_;
  std::vector<std::string> lines_;
  std::string line_;
  double pos_ = 0;

  double width(const Tree& t) const {
    return std::visit(
        [&](const auto& n) -> double {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Str>) {
            return n.width ? *n.width : metric_(n.text);
          } else if constexpr (std::is_same_v<T, Break>) {
            return n.spaces * space_;
          } else {
            double w = 0;
            for (const auto& c : n.body) w += width(c);
            return w;
          }
        },
        t.node);
  }

  // Distance from items[from] to the next break in this list, or to the
  // end plus `after`.
  double break_distance(const std::vector<Tree>& items, std::size_t from, double after) const {
    double d = 0;
    for (std::size_t i = from; i < items.size(); ++i) {
      if (std::holds_alternative<Break>(items[i].node)) return d;
      d += width(items[i]);
    }
    return d + after;
  }

  void newline(double indent) {
    lines_.push_back(line_);
    const auto n = static_cast<std::size_t>(std::max(0.0, std::floor(indent / space_ + 1e-9)));
    line_.assign(n, ' ');
    pos_ = n * space_;
  }

  void emit(const std::vector<Tree>& items, double block_indent, double after, bool force) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      const double dist = break_distance(items, i + 1, after);
      std::visit(
          [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Str>) {
              line_ += n.text;
              pos_ += n.width ? *n.width : metric_(n.text);
            } else if constexpr (std::is_same_v<T, Break>) {
              if (force || pos_ + n.spaces * space_ + dist > margin_) {
                newline(block_indent + n.indent * space_);
              } else {
                line_.append(n.spaces, ' ');
                pos_ += n.spaces * space_;
              }
            } else {
              const bool fits = pos_ + width(items[i]) + dist <= margin_;
              emit(n.body, pos_ + n.indent * space_, dist, n.consistent && !fits);
            }
          },
          items[i].node);
    }
  }
};

void unbroken_into(const Tree& t, std::string& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Str>) {
          out += n.text;
        } else if constexpr (std::is_same_v<T, Break>) {
          out.append(n.spaces, ' ');
        } else {
          for (const auto& c : n.body) unbroken_into(c, out);
        }
      },
      t.node);
}

}  // namespace

Metric unit_metric() {
  return [](std::string_view s) { return static_cast<double>(utf8::decode(s).size()); };
}

Metric proportional_metric(std::map<char32_t, double> widths, double fallback) {
  return [widths = std::move(widths), fallback](std::string_view s) {
    double w = 0;
    for (char32_t c : utf8::decode(s)) {
      auto it = widths.find(c);
      w += it == widths.end() ? fallback : it->second;
    }
    return w;
  };
}

Tree str(std::string text) { return {Str{std::move(text), std::nullopt, std::nullopt}}; }
Tree brk(unsigned spaces, unsigned indent) { return {Break{spaces, indent}}; }
Tree block(unsigned indent, std::vector<Tree> body, bool consistent) {
  return {Block{indent, std::move(body), consistent}};
}

Tree paragraph(std::string_view text, unsigned indent) {
  std::vector<Tree> body;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\n' || text[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\n' && text[j] != '\t') ++j;
    if (j > i) {
      if (!body.empty()) body.push_back(brk());
      body.push_back(str(std::string(text.substr(i, j - i))));
    }
    i = j;
  }
  return block(indent, std::move(body), false);
}

std::string unbroken(const Tree& tree) {
  std::string out;
  unbroken_into(tree, out);
  return out;
}

std::vector<std::string> format(const Tree& tree, double margin, const Metric& metric) {
  if (!(margin > 0)) throw std::invalid_argument("margin must be positive");
  return Formatter(margin, metric).run(tree);
}

void validate(const Tree& tree) {
  std::visit(
      [](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Str>) {
          if (n.text.find_first_of("\r\n") != std::string::npos) {
            throw std::invalid_argument("line separator inside pretty string");
          }
          if (n.width && *n.width < 0) throw std::invalid_argument("negative string width");
        } else if constexpr (std::is_same_v<T, Block>) {
          for (const auto& c : n.body) validate(c);
        }
      },
      tree.node);
}

}  // namespace pide::pretty
