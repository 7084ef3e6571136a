#include <endocert/error.hpp>
#include <endocert/map_io.hpp>

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace endocert {

double TextValue::number() const {
  if (!is_number()) throw Error(ErrorCode::kMapFormat, "map_io", "expected a number");
  return std::get<double>(data);
}

const std::string& TextValue::string() const {
  if (!is_string()) throw Error(ErrorCode::kMapFormat, "map_io", "expected a string");
  return std::get<std::string>(data);
}

const std::vector<TextValue>& TextValue::array() const {
  if (!is_array()) throw Error(ErrorCode::kMapFormat, "map_io", "expected an array");
  return std::get<std::vector<TextValue>>(data);
}

std::vector<const TextTable*> TextDocument::blocks_named(std::string_view name) const {
  std::vector<const TextTable*> out;
  for (const auto& [n, t] : blocks)
    if (n == name) out.push_back(&t);
  return out;
}

namespace {

class ValueParser {
 public:
  ValueParser(std::string_view s, int line) : s_(s), line_(line) {}

  TextValue parse() {
    TextValue v = value();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::kMapFormat, "map_io", "line " + std::to_string(line_) + ": " + what);
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  TextValue value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '[') return array();
    if (c == '"') return string();
    return number();
  }
  TextValue array() {
    ++pos_;
    std::vector<TextValue> items;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return {items};
    }
    for (;;) {
      items.push_back(value());
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return {items};
      }
      fail("expected ',' or ']'");
    }
  }
  TextValue string() {
    const auto end = s_.find('"', pos_ + 1);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string out(s_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return {out};
  }
  TextValue number() {
    const char* first = s_.data() + pos_;
    const char* last = s_.data() + s_.size();
    if (*first == '+') ++first;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc()) fail("bad number near '" + std::string(s_.substr(pos_, 12)) + "'");
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    return {v};
  }

  std::string_view s_;
  int line_;
  std::size_t pos_ = 0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

const TextValue& require(const TextTable& t, std::string_view key, std::string_view where) {
  const auto it = t.find(key);
  if (it == t.end())
    throw Error(ErrorCode::kMapFormat, "map_io",
                "missing key '" + std::string(key) + "' in " + std::string(where));
  return it->second;
}

std::int64_t as_integer(const TextValue& v, std::string_view what) {
  const double d = v.number();
  if (d != std::floor(d) || std::abs(d) > 1e15)
    throw Error(ErrorCode::kMapFormat, "map_io", std::string(what) + " must be an integer");
  return static_cast<std::int64_t>(d);
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TextDocument parse_text_document(std::string_view text) {
  TextDocument doc;
  TextTable* current = &doc.root;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const std::string_view line = trim(strip_comment(text.substr(start, end - start)));
    start = end + 1;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.starts_with("[[")) {
      if (!line.ends_with("]]"))
        throw Error(ErrorCode::kMapFormat, "map_io", "line " + std::to_string(line_no) + ": bad block header");
      doc.blocks.emplace_back(std::string(trim(line.substr(2, line.size() - 4))), TextTable{});
      current = &doc.blocks.back().second;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::kMapFormat, "map_io", "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty())
      throw Error(ErrorCode::kMapFormat, "map_io", "line " + std::to_string(line_no) + ": empty key");
    if (current->contains(key))
      throw Error(ErrorCode::kMapFormat, "map_io", "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    (*current)[key] = ValueParser(line.substr(eq + 1), line_no).parse();
    if (end == text.size()) break;
  }
  return doc;
}

SurfaceEndomorphism parse_map(std::string_view text) {
  const TextDocument doc = parse_text_document(text);
  std::string name = "unnamed";
  if (auto it = doc.root.find("name"); it != doc.root.end()) name = it->second.string();

  const auto& rows = require(doc.root, "linear", "map").array();
  if (rows.size() != 2 || rows[0].array().size() != 2 || rows[1].array().size() != 2)
    throw Error(ErrorCode::kMapFormat, "map_io", "linear must be a 2x2 array");
  LinearPart a{as_integer(rows[0].array()[0], "linear entry"), as_integer(rows[0].array()[1], "linear entry"),
               as_integer(rows[1].array()[0], "linear entry"), as_integer(rows[1].array()[1], "linear entry")};

  TrigPerturbation phi;
  for (const TextTable* block : doc.blocks_named("term")) {
    TrigTerm t;
    t.coord = static_cast<int>(as_integer(require(*block, "coord", "term"), "coord"));
    if (t.coord != 1 && t.coord != 2) throw Error(ErrorCode::kMapFormat, "map_io", "coord must be 1 or 2");
    t.amplitude = require(*block, "amplitude", "term").number();
    const auto& freq = require(*block, "freq", "term").array();
    if (freq.size() != 2) throw Error(ErrorCode::kMapFormat, "map_io", "freq must be [p, q]");
    t.p = static_cast<int>(as_integer(freq[0], "freq"));
    t.q = static_cast<int>(as_integer(freq[1], "freq"));
    if (auto it = block->find("phase"); it != block->end()) t.phase = it->second.number();
    const std::string mode = require(*block, "mode", "term").string();
    if (mode == "sin") {
      t.mode = TrigMode::kSin;
    } else if (mode == "cos") {
      t.mode = TrigMode::kCos;
    } else {
      throw Error(ErrorCode::kMapFormat, "map_io", "mode must be \"sin\" or \"cos\"");
    }
    if (!std::isfinite(t.amplitude) || !std::isfinite(t.phase))
      throw Error(ErrorCode::kMapFormat, "map_io", "non-finite term parameter");
    phi.terms.push_back(t);
  }
  for (const auto& [n, _] : doc.blocks)
    if (n != "term") throw Error(ErrorCode::kMapFormat, "map_io", "unknown block [[" + n + "]]");
  return SurfaceEndomorphism(a, std::move(phi), std::move(name));
}

SurfaceEndomorphism load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "map_io", "cannot open map file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_map(ss.str());
}

std::string format_map(const SurfaceEndomorphism& f) {
  std::ostringstream os;
  const auto& a = f.linear_part();
  os << "name = \"" << f.name() << "\"\n";
  os << "linear = [[" << a.a11 << ", " << a.a12 << "], [" << a.a21 << ", " << a.a22 << "]]\n";
  for (const auto& t : f.perturbation().terms) {
    os << "\n[[term]]\n";
    os << "coord = " << t.coord << '\n';
    os << "amplitude = " << fmt17(t.amplitude) << '\n';
    os << "freq = [" << t.p << ", " << t.q << "]\n";
    os << "phase = " << fmt17(t.phase) << '\n';
    os << "mode = \"" << (t.mode == TrigMode::kSin ? "sin" : "cos") << "\"\n";
  }
  return os.str();
}

std::vector<std::string> canonical_map_names() { return {"cat", "exp", "diag", "shearcrit", "idhom"}; }

SurfaceEndomorphism linear_map(const LinearPart& a, std::string name) {
  return SurfaceEndomorphism(a, {}, std::move(name));
}

SurfaceEndomorphism translation_map(const Vec2& shift, std::string name) {
  TrigPerturbation phi;
  phi.terms.push_back({1, shift.x, 0, 0, 0.0, TrigMode::kCos});
  phi.terms.push_back({2, shift.y, 0, 0, 0.0, TrigMode::kCos});
  return SurfaceEndomorphism({1, 0, 0, 1}, std::move(phi), std::move(name));
}

SurfaceEndomorphism canonical_map(std::string_view name) {
  if (name == "cat") return linear_map({2, 1, 1, 1}, "cat");
  if (name == "exp") return linear_map({3, 1, 1, 2}, "exp");
  if (name == "diag") return linear_map({2, 0, 0, 1}, "diag");
  if (name == "shearcrit") {
    TrigPerturbation phi;
    phi.terms.push_back({2, 3.0 / kTwoPi, 0, 1, 0.0, TrigMode::kSin});
    return SurfaceEndomorphism({2, 1, 0, 2}, std::move(phi), "shearcrit");
  }
  if (name == "idhom") {
    TrigPerturbation phi;
    phi.terms.push_back({1, 0.1, 0, 1, 0.0, TrigMode::kSin});
    phi.terms.push_back({2, 0.1, 1, 0, 0.0, TrigMode::kSin});
    return SurfaceEndomorphism({1, 0, 0, 1}, std::move(phi), "idhom");
  }
  throw Error(ErrorCode::kConfig, "map_io", "unknown canonical map '" + std::string(name) + "'");
}

std::vector<std::string> demo_map_names() { return {"shearcycle", "neutralcrit"}; }

SurfaceEndomorphism demo_map(std::string_view name) {
  if (name == "shearcycle") {
    // Period-3 orbit p1 -> p2 -> z -> p1 with p1 and p2 on the critical set.
    TrigPerturbation phi;
    phi.terms.push_back({2, 3.0 / kTwoPi, 0, 1, 0.0, TrigMode::kSin});
    phi.terms.push_back({2, 0.1788881091609762831, 1, 0, 0.0, TrigMode::kSin});
    phi.terms.push_back({2, 0.92877612486802969294, 0, 0, 0.0, TrigMode::kCos});
    return SurfaceEndomorphism({2, 1, 0, 2}, std::move(phi), "shearcycle");
  }
  if (name == "neutralcrit") {
    // Fixed point (0,0) with Df = diag(1.01, 1.02); critical circles where
    // cos(2 pi y + psi) = -2/3.
    const double psi = std::acos(-0.98 / 3.0);
    TrigPerturbation phi;
    phi.terms.push_back({1, 0.01 / kTwoPi, 1, 0, 0.0, TrigMode::kSin});
    phi.terms.push_back({2, 3.0 / kTwoPi, 0, 1, psi, TrigMode::kSin});
    phi.terms.push_back({2, -3.0 / kTwoPi * std::sin(psi), 0, 0, 0.0, TrigMode::kCos});
    return SurfaceEndomorphism({1, 0, 0, 2}, std::move(phi), "neutralcrit");
  }
  throw Error(ErrorCode::kConfig, "map_io", "unknown demo map '" + std::string(name) + "'");
}

SurfaceEndomorphism resolve_map(const std::string& name_or_path) {
  for (const auto& n : canonical_map_names())
    if (n == name_or_path) return canonical_map(n);
  for (const auto& n : demo_map_names())
    if (n == name_or_path) return demo_map(n);
  return load_map(name_or_path);
}

std::string map_hash(const TorusMap& f) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : f.canonical_text()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace endocert
