#include "swsched/expr_parser.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#include <fmt/format.h>

#include "swsched/error.hpp"

namespace swsched {
namespace {

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool accept(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  void expect(char c) {
    if (!accept(c)) fail(fmt::format("expected '{}'", c));
  }

  bool peek_ident() {
    const char c = peek();
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }

  bool peek_number() {
    const char c = peek();
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-';
  }

  std::string ident() {
    skip_space();
    const size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
            text_[pos_] == '.'))
      ++pos_;
    if (start == pos_) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  double number() {
    skip_space();
    const std::string rest(text_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) fail("expected number");
    pos_ += static_cast<size_t>(end - rest.c_str());
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(fmt::format("{} at column {} in '{}'", what, pos_ + 1, text_));
  }

 private:
  std::string_view text_;
  size_t pos_ = 0;
};

VarId lookup_var(Lexer& lex, std::span<const IterVar> vars, const std::string& name) {
  for (size_t i = 0; i < vars.size(); ++i)
    if (vars[i].name == name) return VarId{static_cast<int>(i)};
  lex.fail(fmt::format("unknown loop variable '{}'", name));
}

int64_t integer(Lexer& lex) {
  const double v = lex.number();
  if (v < 0 || v != static_cast<double>(static_cast<int64_t>(v)))
    lex.fail("index coefficients must be non-negative integers");
  return static_cast<int64_t>(v);
}

// index := term ('+' term)* ; term := int | var | int '*' var | var '*' int
AffineIndex index_from(Lexer& lex, std::span<const IterVar> vars) {
  AffineIndex idx;
  do {
    if (lex.peek_ident()) {
      const VarId v = lookup_var(lex, vars, lex.ident());
      int64_t c = 1;
      if (lex.accept('*')) c = integer(lex);
      idx.add(v, c);
    } else {
      const int64_t c = integer(lex);
      if (lex.accept('*')) {
        idx.add(lookup_var(lex, vars, lex.ident()), c);
      } else {
        idx.constant += c;
      }
    }
  } while (lex.accept('+'));
  return idx;
}

TensorAccess access_from(Lexer& lex, const std::string& tensor_name, const TensorRegistry& tensors,
                         std::span<const IterVar> vars) {
  const TensorDecl* t = tensors.find(tensor_name);
  if (!t) lex.fail(fmt::format("unknown tensor '{}'", tensor_name));
  std::vector<AffineIndex> outer_first;
  while (lex.accept('[')) {
    outer_first.push_back(index_from(lex, vars));
    lex.expect(']');
  }
  if (static_cast<int>(outer_first.size()) != t->rank())
    lex.fail(fmt::format("'{}' has rank {} but {} subscripts", t->name, t->rank(), outer_first.size()));
  TensorAccess acc;
  acc.tensor = *t;
  acc.indices.assign(outer_first.rbegin(), outer_first.rend());
  return acc;
}

class ExprParser {
 public:
  ExprParser(Lexer& lex, const TensorRegistry& tensors, std::span<const IterVar> vars,
             std::vector<TensorAccess>& inputs)
      : lex_(lex), tensors_(tensors), vars_(vars), inputs_(inputs) {}

  Expr sum() {
    Expr e = product();
    while (lex_.accept('+')) e = Expr::add(std::move(e), product());
    return e;
  }

 private:
  Expr product() {
    Expr e = factor();
    while (lex_.accept('*')) e = Expr::mul(std::move(e), factor());
    return e;
  }

  Expr factor() {
    if (lex_.accept('(')) {
      Expr e = sum();
      lex_.expect(')');
      return e;
    }
    if (lex_.peek_number()) return Expr::constant(lex_.number());
    const std::string name = lex_.ident();
    if (name == "max" || name == "select") {
      lex_.expect('(');
      std::vector<Expr> args{sum()};
      while (lex_.accept(',')) args.push_back(sum());
      lex_.expect(')');
      if (name == "max") {
        if (args.size() != 2) lex_.fail("max takes two arguments");
        return Expr::max(std::move(args[0]), std::move(args[1]));
      }
      if (args.size() != 3) lex_.fail("select takes three arguments");
      return Expr::select(std::move(args[0]), std::move(args[1]), std::move(args[2]));
    }
    TensorAccess acc = access_from(lex_, name, tensors_, vars_);
    for (size_t i = 0; i < inputs_.size(); ++i)
      if (inputs_[i].tensor.name == acc.tensor.name && inputs_[i].indices == acc.indices)
        return Expr::load(static_cast<int>(i));
    inputs_.push_back(std::move(acc));
    return Expr::load(static_cast<int>(inputs_.size() - 1));
  }

  Lexer& lex_;
  const TensorRegistry& tensors_;
  std::span<const IterVar> vars_;
  std::vector<TensorAccess>& inputs_;
};

}  // namespace

AffineIndex parse_index(std::string_view text, std::span<const IterVar> vars) {
  Lexer lex(text);
  AffineIndex idx = index_from(lex, vars);
  if (!lex.at_end()) lex.fail("trailing characters");
  return idx;
}

TensorAccess parse_access(std::string_view text, const TensorRegistry& tensors,
                          std::span<const IterVar> vars) {
  Lexer lex(text);
  const std::string name = lex.ident();
  TensorAccess acc = access_from(lex, name, tensors, vars);
  if (!lex.at_end()) lex.fail("trailing characters");
  return acc;
}

Expr parse_expr(std::string_view text, const TensorRegistry& tensors, std::span<const IterVar> vars,
                std::vector<TensorAccess>& inputs) {
  Lexer lex(text);
  ExprParser p(lex, tensors, vars, inputs);
  Expr e = p.sum();
  if (!lex.at_end()) lex.fail("trailing characters");
  return e;
}

ComputeDef parse_compute(const ComputeText& text, const TensorRegistry& tensors) {
  ComputeDef def;
  def.name = text.name;
  def.vars = text.vars;
  def.output = parse_access(text.output, tensors, def.vars);
  def.output.mode = AccessMode::write;
  def.expr = parse_expr(text.expr, tensors, def.vars, def.inputs);
  def.reduce = text.reduce;
  def.init = text.init;
  def.epilogue = text.epilogue;
  if (!text.bias.empty()) def.bias = parse_access(text.bias, tensors, def.vars);
  try {
    def.validate();
  } catch (const IrError& e) {
    throw ParseError(e.what());
  }
  return def;
}

}  // namespace swsched
