#include "cef/pattern.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace cef {

namespace {

std::string formatNumber(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, end) : std::to_string(v);
}

// ---------------------------------------------------------------------------
// Lexer

enum class Tok {
  Ident, Number, String,
  LParen, RParen, LBracket, RBracket, Comma,
  Concat, Bar, Star, Plus,
  And, Or, Not, Where, Partition, By,
  End
};

struct Token {
  Tok kind;
  std::string text;
  double number = 0.0;
  std::size_t line = 1;
  std::size_t col = 1;
};

class Lexer {
 public:
  Lexer(std::string_view src, std::size_t firstLine) : src_(src), line_(firstLine) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skipSpaceAndComments();
      Token t;
      t.line = line_;
      t.col = col_;
      if (pos_ >= src_.size()) {
        t.kind = Tok::End;
        out.push_back(t);
        return out;
      }
      lexOne(t);
      out.push_back(std::move(t));
    }
  }

 private:
  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i, ++pos_) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
    }
  }

  bool startsWith(std::string_view s) const { return src_.substr(pos_).starts_with(s); }

  void skipSpaceAndComments() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        return;
      }
    }
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, col_, what); }

  void lexOne(Token& t) {
    static const std::pair<std::string_view, Tok> symbols[] = {
        {"\xC2\xB7", Tok::Concat}, {"\xE2\x88\xA7", Tok::And}, {"\xE2\x88\xA8", Tok::Or},
        {"\xC2\xAC", Tok::Not},    {"(", Tok::LParen},         {")", Tok::RParen},
        {"[", Tok::LBracket},      {"]", Tok::RBracket},       {",", Tok::Comma},
        {";", Tok::Concat},        {"|", Tok::Bar},            {"*", Tok::Star},
        {"+", Tok::Plus},
    };
    for (const auto& [sym, kind] : symbols) {
      if (startsWith(sym)) {
        t.kind = kind;
        t.text = std::string(sym);
        advance(sym.size());
        return;
      }
    }

    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        ((c == '-' || c == '.') && pos_ + 1 < src_.size() &&
         (std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])) || src_[pos_ + 1] == '.'))) {
      const char* first = src_.data() + pos_;
      const char* last = src_.data() + src_.size();
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc{}) fail("malformed number");
      t.kind = Tok::Number;
      t.number = v;
      t.text = std::string(first, ptr);
      advance(static_cast<std::size_t>(ptr - first));
      return;
    }
    if (c == '"') {
      advance();
      std::string s;
      while (pos_ < src_.size() && src_[pos_] != '"') {
        if (src_[pos_] == '\n') fail("unterminated string");
        s += src_[pos_];
        advance();
      }
      if (pos_ >= src_.size()) fail("unterminated string");
      advance();
      t.kind = Tok::String;
      t.text = std::move(s);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string s;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        s += src_[pos_];
        advance();
      }
      static const std::map<std::string, Tok, std::less<>> keywords = {
          {"WHERE", Tok::Where}, {"AND", Tok::And}, {"OR", Tok::Or},
          {"NOT", Tok::Not},     {"PARTITION", Tok::Partition}, {"BY", Tok::By}};
      auto it = keywords.find(s);
      t.kind = it == keywords.end() ? Tok::Ident : it->second;
      t.text = std::move(s);
      return;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_;
  std::size_t col_ = 1;
};

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  Parser(std::vector<Token> tokens, const PredicateRegistry& registry)
      : toks_(std::move(tokens)), registry_(registry) {}

  PatternNode regex() {
    std::vector<PatternNode> alts{concat()};
    while (accept(Tok::Bar)) alts.push_back(concat());
    return alts.size() == 1 ? std::move(alts.front()) : PatternNode::alternation(std::move(alts));
  }

  Formula formula() {
    std::vector<Formula> parts{conjunction()};
    while (accept(Tok::Or)) parts.push_back(conjunction());
    return Formula::disjunction(std::move(parts));
  }

  std::vector<PredicateAtom> atomList() {
    std::vector<PredicateAtom> out;
    const bool bracketed = accept(Tok::LBracket);
    if (!(bracketed && peek().kind == Tok::RBracket)) {
      do {
        const Token& name = expect(Tok::Ident, "predicate name");
        out.push_back(atom(name));
      } while (accept(Tok::Comma));
    }
    if (bracketed) expect(Tok::RBracket, "']'");
    return out;
  }

  const Token& peek() const { return toks_[pos_]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++pos_;
    return true;
  }
  const Token& expect(Tok k, const char* what) {
    if (peek().kind != k) fail(std::string("expected ") + what);
    return toks_[pos_++];
  }
  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = peek();
    throw ParseError(t.line, t.col, what + (t.kind == Tok::End ? " at end of input" : ", found '" + t.text + "'"));
  }

  std::vector<std::pair<std::string, Formula>>& inlineBindings() { return inline_; }

 private:
  PatternNode concat() {
    std::vector<PatternNode> parts{postfix()};
    while (accept(Tok::Concat)) parts.push_back(postfix());
    return parts.size() == 1 ? std::move(parts.front()) : PatternNode::concat(std::move(parts));
  }

  PatternNode postfix() {
    PatternNode n = primary();
    for (;;) {
      if (accept(Tok::Star)) {
        n = PatternNode::star(std::move(n));
      } else if (accept(Tok::Plus)) {
        n = PatternNode::plus(std::move(n));
      } else {
        return n;
      }
    }
  }

  PatternNode primary() {
    if (accept(Tok::LParen)) {
      PatternNode n = regex();
      expect(Tok::RParen, "')'");
      return n;
    }
    const Token& id = expect(Tok::Ident, "variable or predicate");
    if (peek().kind != Tok::LParen) return PatternNode::leaf(id.text);
    // A predicate written directly in the regular part binds a fresh variable.
    PredicateAtom a = atom(id);
    std::string var = "_" + std::to_string(inline_.size() + 1);
    a.var = var;
    inline_.emplace_back(var, Formula::atom(std::move(a)));
    return PatternNode::leaf(var);
  }

  Formula conjunction() {
    std::vector<Formula> parts{unary()};
    while (accept(Tok::And)) parts.push_back(unary());
    return Formula::conjunction(std::move(parts));
  }

  Formula unary() {
    if (accept(Tok::Not)) return Formula::negate(unary());
    if (accept(Tok::LParen)) {
      Formula f = formula();
      expect(Tok::RParen, "')'");
      return f;
    }
    const Token& name = expect(Tok::Ident, "predicate");
    if (name.text == "True" || name.text == "False" || name.text == "TRUE" || name.text == "FALSE") {
      expect(Tok::LParen, "'('");
      const Token& var = expect(Tok::Ident, "event variable");
      expect(Tok::RParen, "')'");
      return Formula::constant(name.text == "True" || name.text == "TRUE", var.text);
    }
    return Formula::atom(atom(name));
  }

  PredicateAtom atom(const Token& name) {
    expect(Tok::LParen, "'(' after predicate name");
    const Token& var = expect(Tok::Ident, "event variable as first argument");
    std::vector<Constant> args;
    while (accept(Tok::Comma)) args.push_back(constant());
    expect(Tok::RParen, "')'");
    if (!registry_.contains(name.text)) throw UnknownPredicate(name.text);
    try {
      return registry_.make(name.text, var.text, std::move(args));
    } catch (const UnknownPredicate&) {
      throw;
    } catch (const DataError& e) {
      throw ParseError(name.line, name.col, e.what());
    }
  }

  Constant constant() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Number:
        ++pos_;
        return Constant::number(t.number);
      case Tok::Ident:
        ++pos_;
        return Constant::identifier(t.text);
      case Tok::String:
        ++pos_;
        return Constant::string(t.text);
      case Tok::LParen: {
        ++pos_;
        const double a = expect(Tok::Number, "number").number;
        expect(Tok::Comma, "','");
        const double b = expect(Tok::Number, "number").number;
        expect(Tok::RParen, "')'");
        return Constant::pair(a, b);
      }
      default:
        fail("expected constant argument");
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const PredicateRegistry& registry_;
  std::vector<std::pair<std::string, Formula>> inline_;
};

void collectVars(const PatternNode& n, std::vector<std::string>& out) {
  if (n.kind == PatternNode::Kind::Leaf) {
    if (std::find(out.begin(), out.end(), n.var) == out.end()) out.push_back(n.var);
    return;
  }
  for (const auto& c : n.children) collectVars(c, out);
}

// Splits on conjunctions until every piece mentions a single variable.
void splitConjuncts(const Formula& f, std::vector<Formula>& out, std::size_t line) {
  const auto vars = f.variables();
  if (vars.size() <= 1) {
    if (vars.empty()) throw ParseError(line, 1, "WHERE conjunct " + f.toString() + " mentions no variable");
    out.push_back(f);
    return;
  }
  if (f.kind() != Formula::Kind::And)
    throw ParseError(line, 1, "WHERE conjunct " + f.toString() + " relates several event variables");
  for (const auto& c : f.children()) splitConjuncts(c, out, line);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string stripComment(std::string_view line) {
  const auto hash = line.find('#');
  return trim(hash == std::string_view::npos ? line : line.substr(0, hash));
}

void parseConfig(std::string_view text, std::size_t firstLine, PatternSpec& spec,
                 const PredicateRegistry& registry) {
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineNo = firstLine;
  while (std::getline(in, raw)) {
    const std::size_t startLine = lineNo++;
    std::string line = stripComment(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(startLine, 1, "expected key = value in [config]");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "extras") {
      // Allow the list to continue over several lines.
      auto balance = [](const std::string& s) {
        return std::count(s.begin(), s.end(), '[') - std::count(s.begin(), s.end(), ']');
      };
      while (balance(value) > 0 && std::getline(in, raw)) {
        ++lineNo;
        value += " " + stripComment(raw);
      }
      Parser p(Lexer(value, startLine).run(), registry);
      spec.extras = p.atomList();
      if (p.peek().kind != Tok::End) p.fail("unexpected trailing input in extras");
      continue;
    }
    auto parseNumber = [&](double& out) {
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
      if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ParseError(startLine, eq + 2, "malformed number for '" + key + "'");
    };
    double v = 0.0;
    if (key == "order") {
      parseNumber(v);
      if (v < 0 || v != static_cast<int>(v)) throw ParseError(startLine, eq + 2, "order must be a non-negative integer");
      spec.order = static_cast<int>(v);
    } else if (key == "theta") {
      parseNumber(v);
      if (!(v > 0.0 && v <= 1.0)) throw ParseError(startLine, eq + 2, "theta must lie in (0, 1]");
      spec.theta = v;
    } else if (key == "horizon") {
      parseNumber(v);
      if (v < 1 || v != static_cast<int>(v)) throw ParseError(startLine, eq + 2, "horizon must be a positive integer");
      spec.horizon = static_cast<int>(v);
    } else {
      throw ParseError(startLine, 1, "unknown config key '" + key + "'");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

PatternNode desugar(const PatternNode& node) {
  using K = PatternNode::Kind;
  switch (node.kind) {
    case K::Leaf:
      return node;
    case K::Star:
      return PatternNode::star(desugar(node.children.front()));
    case K::Plus: {
      PatternNode inner = desugar(node.children.front());
      return desugar(PatternNode::concat({inner, PatternNode::star(inner)}));
    }
    case K::Concat:
    case K::Union: {
      std::vector<PatternNode> parts;
      for (const auto& c : node.children) {
        PatternNode d = desugar(c);
        if (d.kind == node.kind) {
          for (auto& g : d.children) parts.push_back(std::move(g));
        } else {
          parts.push_back(std::move(d));
        }
      }
      return node.kind == K::Concat ? PatternNode::concat(std::move(parts))
                                    : PatternNode::alternation(std::move(parts));
    }
  }
  return node;
}

std::string toString(const PatternNode& node) {
  using K = PatternNode::Kind;
  auto wrapped = [](const PatternNode& c, bool needParens) {
    return needParens ? "(" + toString(c) + ")" : toString(c);
  };
  switch (node.kind) {
    case K::Leaf:
      return node.var;
    case K::Star:
    case K::Plus: {
      const auto& c = node.children.front();
      return wrapped(c, c.kind == K::Concat || c.kind == K::Union) + (node.kind == K::Star ? "*" : "+");
    }
    case K::Concat: {
      std::string s;
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        if (i) s += " \xC2\xB7 ";
        const auto& c = node.children[i];
        s += wrapped(c, c.kind == K::Union || c.kind == K::Concat);
      }
      return s;
    }
    case K::Union: {
      std::string s;
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        if (i) s += " | ";
        s += wrapped(node.children[i], node.children[i].kind == K::Union);
      }
      return s;
    }
  }
  return {};
}

const Formula& PatternSpec::binding(std::string_view var) const {
  for (const auto& [v, f] : bindings)
    if (v == var) return f;
  throw UnboundVariable(std::string(var));
}

std::vector<PredicateAtom> PatternSpec::patternAtoms() const {
  std::vector<PredicateAtom> atoms;
  for (const auto& [v, f] : bindings) f.collectAtoms(atoms);
  return atoms;
}

std::vector<PredicateAtom> PatternSpec::alphabetAtoms() const {
  auto atoms = patternAtoms();
  atoms.insert(atoms.end(), extras.begin(), extras.end());
  return atoms;
}

PatternSpec parsePattern(std::string_view text, const PredicateRegistry& registry) {
  // Split off the [config] section.
  std::string_view body = text;
  std::string_view config;
  std::size_t configLine = 0;
  {
    std::size_t pos = 0;
    std::size_t line = 1;
    while (pos <= text.size()) {
      const auto nl = text.find('\n', pos);
      const auto end = nl == std::string_view::npos ? text.size() : nl;
      if (stripComment(text.substr(pos, end - pos)) == "[config]") {
        body = text.substr(0, pos);
        config = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        configLine = line + 1;
        break;
      }
      if (nl == std::string_view::npos) break;
      pos = nl + 1;
      ++line;
    }
  }

  Parser p(Lexer(body, 1).run(), registry);
  PatternSpec spec;
  PatternNode raw = p.regex();
  const std::size_t whereLine = p.peek().line;
  std::optional<Formula> where;
  if (p.accept(Tok::Where)) where = p.formula();
  if (p.accept(Tok::Partition)) {
    p.expect(Tok::By, "BY");
    spec.partitionAttribute = p.expect(Tok::Ident, "partition attribute").text;
  }
  if (p.peek().kind != Tok::End) p.fail("unexpected input after pattern");

  spec.ast = desugar(raw);

  std::vector<std::string> vars;
  collectVars(spec.ast, vars);

  std::map<std::string, std::vector<Formula>> grouped;
  if (where) {
    std::vector<Formula> conjuncts;
    splitConjuncts(*where, conjuncts, whereLine);
    for (auto& c : conjuncts) grouped[c.variables().front()].push_back(std::move(c));
  }
  for (auto& [var, f] : p.inlineBindings()) grouped[var].push_back(f);

  for (const auto& var : vars) {
    auto it = grouped.find(var);
    if (it == grouped.end()) throw UnboundVariable(var);
    spec.bindings.emplace_back(var, Formula::conjunction(std::move(it->second)));
    grouped.erase(it);
  }
  if (!grouped.empty())
    throw ParseError(whereLine, 1, "binding for variable '" + grouped.begin()->first +
                                       "' which does not occur in the regular expression");

  if (!config.empty()) parseConfig(config, configLine, spec, registry);

  std::set<std::string> keys;
  for (const auto& a : spec.patternAtoms()) keys.insert(a.key());
  std::set<std::string> extraKeys;
  for (const auto& a : spec.extras) {
    if (keys.count(a.key())) throw DataError("extra feature " + a.key() + " already occurs in the pattern");
    if (!extraKeys.insert(a.key()).second) throw DataError("duplicate extra feature " + a.key());
  }
  return spec;
}

PatternSpec loadPattern(const std::string& path, const PredicateRegistry& registry) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open pattern file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parsePattern(ss.str(), registry);
}

std::vector<PredicateAtom> parseAtomList(std::string_view text, const PredicateRegistry& registry) {
  Parser p(Lexer(text, 1).run(), registry);
  if (p.peek().kind == Tok::End) return {};
  auto atoms = p.atomList();
  if (p.peek().kind != Tok::End) p.fail("unexpected trailing input");
  return atoms;
}

std::string toString(const PatternSpec& spec) {
  std::string s = toString(spec.ast) + "\nWHERE ";
  for (std::size_t i = 0; i < spec.bindings.size(); ++i) {
    if (i) s += "\n  AND ";
    s += spec.bindings[i].second.toString();
  }
  s += "\nPARTITION BY " + spec.partitionAttribute + "\n[config]\n";
  s += "order = " + std::to_string(spec.order) + "\n";
  s += "theta = " + formatNumber(spec.theta) + "\n";
  if (spec.horizon) s += "horizon = " + std::to_string(*spec.horizon) + "\n";
  if (!spec.extras.empty()) {
    s += "extras = [";
    for (std::size_t i = 0; i < spec.extras.size(); ++i) {
      if (i) s += ", ";
      s += spec.extras[i].toString();
    }
    s += "]\n";
  }
  return s;
}

}  // namespace cef
