#include "gmmcache/model_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "gmmcache/error.hpp"

namespace gmmcache {

namespace {

constexpr std::string_view kMagic = "gmmcache-gmm";
constexpr int kVersion = 1;

// Splits the input into non-comment lines of whitespace-separated tokens.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Returns false at end of input.
  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      tokens.clear();
      std::istringstream ss(line);
      for (std::string tok; ss >> tok;) tokens.push_back(tok);
      return true;
    }
    return false;
  }

  std::vector<std::string> expect(std::string_view keyword, std::size_t count) {
    std::vector<std::string> tokens;
    if (!next(tokens)) throw ParseError(line_no_, fmt::format("missing '{}' line", keyword));
    if (tokens.front() != keyword || tokens.size() != count) {
      throw ParseError(line_no_, fmt::format("expected '{}' with {} fields", keyword, count - 1));
    }
    return tokens;
  }

  double real(const std::string& tok) const {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError(line_no_, fmt::format("malformed number '{}'", tok));
    }
    return v;
  }

  template <typename Int>
  Int integer(const std::string& tok) const {
    Int v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError(line_no_, fmt::format("malformed integer '{}'", tok));
    }
    return v;
  }

  void require(const std::string& tok, std::string_view word) const {
    if (tok != word) throw ParseError(line_no_, fmt::format("expected '{}', got '{}'", word, tok));
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace

void write_model(std::ostream& out, const GmmModel& model,
                 const std::optional<FeatureWindows>& windows) {
  std::string buf;
  auto it = std::back_inserter(buf);
  fmt::format_to(it, "{} {}\n", kMagic, kVersion);
  if (windows) {
    fmt::format_to(it, "features len_window {} len_access_shot {}\n", windows->len_window,
                   windows->len_access_shot);
  }
  fmt::format_to(it, "K {}\n", model.size());
  const auto& s = model.standardizer();
  fmt::format_to(it, "standardizer mean {:.17g} {:.17g} scale {:.17g} {:.17g}\n", s.mean[0],
                 s.mean[1], s.scale[0], s.scale[1]);
  for (std::size_t k = 0; k < model.size(); ++k) {
    const auto& g = model.components()[k];
    fmt::format_to(it, "component {:.17g} mean {:.17g} {:.17g} cov {:.17g} {:.17g} {:.17g}\n",
                   model.weights()[k], g.mean[0], g.mean[1], g.cov.pp, g.cov.pt, g.cov.tt);
  }
  if (model.threshold()) {
    fmt::format_to(it, "threshold {:.17g}\n", *model.threshold());
  } else {
    fmt::format_to(it, "threshold none\n");
  }
  out << buf;
}

ModelFile read_model(std::istream& in) {
  LineReader reader(in);
  std::vector<std::string> tokens;
  if (!reader.next(tokens)) throw EmptyInputError("model file is empty");
  if (tokens.size() != 2 || tokens[0] != kMagic) {
    throw ParseError(reader.line_no(), "not a gmmcache model file");
  }
  if (reader.integer<int>(tokens[1]) != kVersion) {
    throw ParseError(reader.line_no(), fmt::format("unsupported model version {}", tokens[1]));
  }

  if (!reader.next(tokens)) throw ParseError(reader.line_no(), "truncated model file");
  std::optional<FeatureWindows> windows;
  if (tokens[0] == "features") {
    if (tokens.size() != 5) throw ParseError(reader.line_no(), "malformed features line");
    reader.require(tokens[1], "len_window");
    reader.require(tokens[3], "len_access_shot");
    windows = FeatureWindows{reader.integer<std::uint32_t>(tokens[2]),
                             reader.integer<std::uint32_t>(tokens[4])};
    if (!reader.next(tokens)) throw ParseError(reader.line_no(), "truncated model file");
  }
  if (tokens.size() != 2 || tokens[0] != "K") throw ParseError(reader.line_no(), "expected 'K <count>'");
  const auto k = reader.integer<std::size_t>(tokens[1]);
  if (k == 0) throw ParseError(reader.line_no(), "K must be at least 1");

  tokens = reader.expect("standardizer", 7);
  reader.require(tokens[1], "mean");
  reader.require(tokens[4], "scale");
  Standardizer standardizer{{reader.real(tokens[2]), reader.real(tokens[3])},
                            {reader.real(tokens[5]), reader.real(tokens[6])}};

  std::vector<double> weights;
  std::vector<Gaussian2> components;
  for (std::size_t c = 0; c < k; ++c) {
    tokens = reader.expect("component", 9);
    reader.require(tokens[2], "mean");
    reader.require(tokens[5], "cov");
    weights.push_back(reader.real(tokens[1]));
    components.push_back({{reader.real(tokens[3]), reader.real(tokens[4])},
                          {reader.real(tokens[6]), reader.real(tokens[7]), reader.real(tokens[8])}});
  }

  tokens = reader.expect("threshold", 2);
  std::optional<double> threshold;
  if (tokens[1] != "none") threshold = reader.real(tokens[1]);

  if (reader.next(tokens)) throw ParseError(reader.line_no(), "trailing content after threshold");
  return {GmmModel(std::move(weights), std::move(components), standardizer, threshold), windows};
}

void save_model(const std::string& path, const GmmModel& model,
                const std::optional<FeatureWindows>& windows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write model file '{}'", path));
  write_model(out, model, windows);
  if (!out) throw DataError(fmt::format("failed writing model file '{}'", path));
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open model file '{}'", path));
  return read_model(in);
}

}  // namespace gmmcache
