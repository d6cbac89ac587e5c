// ============================================================================
// parse.hpp
//
// Text format for analysis models (.stpa) and its parser.
//
//   controller <Id> {
//     processModel {
//       <var>: { <value> ["=" <range>] ("," ...)* }
//     }
//     controlActions { <Id> ("," <Id>)* }
//     ucas {
//       <RuleId> { action <Id> type <kind> contexts { <CtxId> [ <var> = <value>, ... ] ... } }
//     }
//     dcas { ... }                      // kinds restricted to provided/notProvided
//   }
//
//   range := true | false | "[" bound "]" | ("["|"(") bound "," bound (")"|"]")
//   bound := MIN | MAX | number | <Id>
//
// "//" starts a line comment. A value named true/false with no range is a
// boolean literal. Parsing never throws on arbitrary input; it collects
// positioned errors and returns a model only when there are none.
// ============================================================================
#ifndef SBM_PARSE_HPP
#define SBM_PARSE_HPP

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "sbm/stpa.hpp"

namespace sbm {

// ── Locations and errors ────────────────────────────────────────────────────

/// 1-based source position of a token.
struct SourceSpan {
  std::size_t line = 1;
  std::size_t column = 1;
  std::size_t length = 1;

  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

struct ParseError {
  SourceSpan span;
  std::string message;

  friend bool operator==(const ParseError&, const ParseError&) = default;
};

struct ParseResult {
  std::optional<StpaModel> model;  // set iff errors is empty
  std::vector<ParseError> errors;
};

namespace detail {

// ── Lexer ───────────────────────────────────────────────────────────────────

enum class TokKind {
  Ident, Number, LBrace, RBrace, LBracket, RBracket, LParen, RParen,
  Colon, Comma, Equals, End, Bad
};

struct Token {
  TokKind kind = TokKind::End;
  std::size_t offset = 0;
  std::size_t length = 0;
  std::string_view text;
};

inline bool ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
inline bool digit(char c) { return c >= '0' && c <= '9'; }

inline std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto push = [&](TokKind k, std::size_t begin, std::size_t end) {
    out.push_back({k, begin, end - begin, src.substr(begin, end - begin)});
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') { ++i; continue; }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    std::size_t begin = i;
    if (ident_start(c)) {
      while (i < src.size() && ident_char(src[i])) ++i;
      push(TokKind::Ident, begin, i);
      continue;
    }
    if (digit(c) || (c == '-' && i + 1 < src.size() && digit(src[i + 1]))) {
      ++i;
      while (i < src.size() && digit(src[i])) ++i;
      if (i + 1 < src.size() && src[i] == '.' && digit(src[i + 1])) {
        ++i;
        while (i < src.size() && digit(src[i])) ++i;
      }
      push(TokKind::Number, begin, i);
      continue;
    }
    TokKind k = TokKind::Bad;
    switch (c) {
      case '{': k = TokKind::LBrace; break;
      case '}': k = TokKind::RBrace; break;
      case '[': k = TokKind::LBracket; break;
      case ']': k = TokKind::RBracket; break;
      case '(': k = TokKind::LParen; break;
      case ')': k = TokKind::RParen; break;
      case ':': k = TokKind::Colon; break;
      case ',': k = TokKind::Comma; break;
      case '=': k = TokKind::Equals; break;
      default: break;
    }
    ++i;
    push(k, begin, i);
  }
  push(TokKind::End, src.size(), src.size());
  return out;
}

/// Byte offset -> 1-based line/column, counting bytes within the line.
inline SourceSpan span_at(std::string_view src, std::size_t offset, std::size_t length) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < src.size(); ++i) {
    if (src[i] == '\n') { ++line; col = 1; } else { ++col; }
  }
  return {line, col, length == 0 ? 1 : length};
}

// ── Parser ──────────────────────────────────────────────────────────────────

class Parser {
 public:
  Parser(std::string_view src) : src_(src), toks_(lex(src)) {}

  ParseResult run() {
    parse_model();
    ParseResult r;
    r.errors = std::move(errors_);
    if (r.errors.empty()) r.model = std::move(model_);
    return r;
  }

 private:
  static constexpr std::size_t kMaxErrors = 64;

  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  const Token& advance() {
    const Token& t = peek();
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool at(TokKind k) const { return peek().kind == k; }
  bool at_word(std::string_view w) const { return at(TokKind::Ident) && peek().text == w; }

  void error_at(const Token& t, std::string msg) {
    if (errors_.size() >= kMaxErrors) return;
    errors_.push_back({span_at(src_, t.offset, t.length), std::move(msg)});
  }

  bool expect(TokKind k, const char* what) {
    if (at(k)) { advance(); return true; }
    error_at(peek(), std::string("expected ") + what);
    return false;
  }
  bool expect_word(std::string_view w) {
    if (at_word(w)) { advance(); return true; }
    error_at(peek(), "expected '" + std::string(w) + "'");
    return false;
  }

  /// Skip until one of the given kinds at brace depth zero relative to here.
  void sync_to(std::initializer_list<TokKind> kinds) {
    int depth = 0;
    while (!at(TokKind::End)) {
      TokKind k = peek().kind;
      if (depth == 0)
        for (TokKind want : kinds)
          if (k == want) return;
      if (k == TokKind::LBrace || k == TokKind::LBracket || k == TokKind::LParen) ++depth;
      if (k == TokKind::RBrace || k == TokKind::RBracket || k == TokKind::RParen) {
        if (depth == 0) return;
        --depth;
      }
      advance();
    }
  }

  // model := "controller" Id "{" section* "}"
  void parse_model() {
    if (!expect_word("controller")) return;
    if (at(TokKind::Ident)) model_.controller = std::string(advance().text);
    else { error_at(peek(), "expected controller name"); return; }
    if (!expect(TokKind::LBrace, "'{'")) return;
    bool saw_pm = false, saw_ca = false, saw_ucas = false, saw_dcas = false;
    while (!at(TokKind::RBrace) && !at(TokKind::End)) {
      if (at_word("processModel")) {
        if (saw_pm) error_at(peek(), "duplicate processModel section");
        saw_pm = true;
        advance();
        parse_process_model();
      } else if (at_word("controlActions")) {
        if (saw_ca) error_at(peek(), "duplicate controlActions section");
        saw_ca = true;
        advance();
        parse_control_actions();
      } else if (at_word("ucas")) {
        if (saw_ucas) error_at(peek(), "duplicate ucas section");
        saw_ucas = true;
        advance();
        parse_rules(/*dca=*/false);
      } else if (at_word("dcas")) {
        if (saw_dcas) error_at(peek(), "duplicate dcas section");
        saw_dcas = true;
        advance();
        parse_rules(/*dca=*/true);
      } else {
        error_at(peek(), "expected a section (processModel, controlActions, ucas, dcas)");
        advance();
        sync_to({});
      }
    }
    if (expect(TokKind::RBrace, "'}'") && !at(TokKind::End))
      error_at(peek(), "unexpected input after the controller block");
    resolve_references();
  }

  void parse_process_model() {
    if (!expect(TokKind::LBrace, "'{'")) return;
    while (!at(TokKind::RBrace) && !at(TokKind::End)) {
      ProcessModelVariable var;
      if (at(TokKind::Ident)) var.name = std::string(advance().text);
      else {
        error_at(peek(), "expected variable name");
        advance();
        sync_to({});
        continue;
      }
      if (!expect(TokKind::Colon, "':'") || !expect(TokKind::LBrace, "'{'")) {
        sync_to({});
        continue;
      }
      while (true) {
        AbstractValue val;
        if (!at(TokKind::Ident)) {
          error_at(peek(), "expected value name");
          sync_to({TokKind::Comma});
          if (at(TokKind::Comma)) { advance(); continue; }
          break;
        }
        const Token& name_tok = advance();
        val.name = std::string(name_tok.text);
        if (at(TokKind::Equals)) {
          advance();
          val.range = parse_range();
        } else if (val.name == "true" || val.name == "false") {
          val.range = ValueRange::boolean_literal(val.name == "true");
        }
        var.values.push_back(std::move(val));
        if (at(TokKind::Comma)) { advance(); continue; }
        break;
      }
      expect(TokKind::RBrace, "'}' after value list");
      if (var.values.empty())
        error_at(peek(), "variable '" + var.name + "' declares no values");
      model_.variables.push_back(std::move(var));
    }
    expect(TokKind::RBrace, "'}'");
  }

  ValueRange parse_range() {
    if (at_word("true") || at_word("false")) {
      bool b = peek().text == "true";
      advance();
      return ValueRange::boolean_literal(b);
    }
    bool open_paren = at(TokKind::LParen);
    if (!at(TokKind::LBracket) && !open_paren) {
      error_at(peek(), "expected a value range");
      return ValueRange::opaque();
    }
    advance();
    Bound lo = parse_bound();
    if (at(TokKind::RBracket) && !open_paren) {  // singleton [v]
      if (lo.kind == Bound::Kind::Min || lo.kind == Bound::Kind::Max)
        error_at(peek(), "MIN/MAX cannot be a singleton value");
      advance();
      return ValueRange::singleton(lo);
    }
    if (!expect(TokKind::Comma, "',' in range")) return ValueRange::opaque();
    Bound hi = parse_bound();
    bool close_bracket = at(TokKind::RBracket);
    if (!close_bracket && !at(TokKind::RParen)) {
      error_at(peek(), "expected ')' or ']' to close range");
      return ValueRange::opaque();
    }
    if (lo.kind == Bound::Kind::Max || hi.kind == Bound::Kind::Min)
      error_at(peek(), "range has MIN/MAX on the wrong side");
    advance();
    return ValueRange::interval(lo, !open_paren, hi, close_bracket);
  }

  Bound parse_bound() {
    if (at_word("MIN")) { advance(); return Bound::min(); }
    if (at_word("MAX")) { advance(); return Bound::max(); }
    if (at(TokKind::Number)) {
      const Token& t = advance();
      double v = 0.0;
      std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
      return Bound::num(v);
    }
    if (at(TokKind::Ident)) return Bound::ref(std::string(advance().text));
    error_at(peek(), "expected a range bound (MIN, MAX, number, or name)");
    advance();
    return Bound::num(0);
  }

  void parse_control_actions() {
    if (!expect(TokKind::LBrace, "'{'")) return;
    while (at(TokKind::Ident)) {
      model_.actions.push_back(std::string(advance().text));
      if (at(TokKind::Comma)) advance();
      else break;
    }
    expect(TokKind::RBrace, "'}'");
  }

  void parse_rules(bool dca) {
    if (!expect(TokKind::LBrace, "'{'")) return;
    while (!at(TokKind::RBrace) && !at(TokKind::End)) {
      if (!at(TokKind::Ident)) {
        error_at(peek(), "expected rule id");
        advance();
        sync_to({});
        continue;
      }
      parse_rule(dca);
    }
    expect(TokKind::RBrace, "'}'");
  }

  // rule := Id "{" "action" Id "type" kind "contexts" "{" ctx* "}" "}"
  void parse_rule(bool dca) {
    std::string id(advance().text);
    std::string action;
    std::vector<Context> contexts;
    UcaKind ukind = UcaKind::Provided;
    DcaKind dkind = DcaKind::Provided;
    if (!expect(TokKind::LBrace, "'{'")) { sync_to({}); return; }
    if (expect_word("action")) {
      if (at(TokKind::Ident)) {
        action_tokens_.push_back({&model_, peek(), id});
        action = std::string(advance().text);
      } else error_at(peek(), "expected action name");
    }
    if (expect_word("type")) {
      if (at(TokKind::Ident)) {
        const Token& t = advance();
        bool ok = true;
        if (t.text == "provided") { ukind = UcaKind::Provided; dkind = DcaKind::Provided; }
        else if (t.text == "notProvided") { ukind = UcaKind::NotProvided; dkind = DcaKind::NotProvided; }
        else if (dca) ok = false;
        else if (t.text == "tooEarly") ukind = UcaKind::TooEarly;
        else if (t.text == "tooLate") ukind = UcaKind::TooLate;
        else if (t.text == "appliedTooLong") ukind = UcaKind::AppliedTooLong;
        else if (t.text == "stoppedTooSoon") ukind = UcaKind::StoppedTooSoon;
        else ok = false;
        if (!ok)
          error_at(t, dca ? "dca type must be provided or notProvided"
                          : "unknown rule type '" + std::string(t.text) + "'");
      } else error_at(peek(), "expected rule type");
    }
    if (expect_word("contexts") && expect(TokKind::LBrace, "'{'")) {
      while (!at(TokKind::RBrace) && !at(TokKind::End)) {
        if (!at(TokKind::Ident)) {
          error_at(peek(), "expected context id");
          advance();
          sync_to({});
          continue;
        }
        Context ctx;
        ctx.id = std::string(advance().text);
        if (!expect(TokKind::LBracket, "'['")) { sync_to({}); continue; }
        while (true) {
          if (!at(TokKind::Ident)) {
            error_at(peek(), "expected variable name in context");
            break;
          }
          const Token& var_tok = advance();
          if (!expect(TokKind::Equals, "'='")) break;
          if (!at(TokKind::Ident)) {
            error_at(peek(), "expected value name in context");
            break;
          }
          const Token& val_tok = advance();
          context_tokens_.push_back({var_tok, val_tok});
          ctx.assignments.emplace_back(std::string(var_tok.text), std::string(val_tok.text));
          if (at(TokKind::Comma)) { advance(); continue; }
          break;
        }
        expect(TokKind::RBracket, "']'");
        if (ctx.assignments.empty())
          error_at(peek(), "context '" + ctx.id + "' must contain at least one assignment");
        contexts.push_back(std::move(ctx));
      }
      expect(TokKind::RBrace, "'}' after contexts");
    }
    expect(TokKind::RBrace, "'}' after rule");
    if (dca) model_.dcas.push_back({id, action, dkind, std::move(contexts)});
    else model_.ucas.push_back({id, action, ukind, std::move(contexts)});
  }

  /// Name resolution with token positions; runs after all sections so that
  /// section order in the file does not matter.
  void resolve_references() {
    for (const auto& [var_tok, val_tok] : context_tokens_) {
      const auto* var = model_.find_variable(std::string(var_tok.text));
      if (!var) {
        error_at(var_tok, "unknown variable '" + std::string(var_tok.text) + "'");
        continue;
      }
      bool found = false;
      for (const auto& v : var->values) found |= v.name == val_tok.text;
      if (!found)
        error_at(val_tok, "variable '" + var->name + "' has no value '" +
                              std::string(val_tok.text) + "'");
    }
    for (const auto& rec : action_tokens_) {
      const auto& actions = model_.actions;
      if (std::find(actions.begin(), actions.end(), std::string(rec.tok.text)) == actions.end())
        error_at(rec.tok, "unknown control action '" + std::string(rec.tok.text) + "'");
    }
    std::sort(errors_.begin(), errors_.end(), [](const ParseError& a, const ParseError& b) {
      if (a.span.line != b.span.line) return a.span.line < b.span.line;
      if (a.span.column != b.span.column) return a.span.column < b.span.column;
      return a.message < b.message;
    });
  }

  struct ActionRef {
    const StpaModel* model;
    Token tok;
    std::string rule;
  };

  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  StpaModel model_;
  std::vector<ParseError> errors_;
  std::vector<std::pair<Token, Token>> context_tokens_;
  std::vector<ActionRef> action_tokens_;
};

}  // namespace detail

/// Parse model text. Returns a model exactly when no errors were found.
inline ParseResult parse_model(std::string_view source) {
  return detail::Parser(source).run();
}

/// Render errors with one underlined source snippet each, ordered by position.
inline std::string format_diagnostics(std::string_view source, const std::vector<ParseError>& errors) {
  std::string out;
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= source.size(); ++i) {
    if (i == source.size() || source[i] == '\n') {
      lines.push_back(source.substr(start, i - start));
      start = i + 1;
    }
  }
  for (const auto& err : errors) {
    out += std::to_string(err.span.line) + ":" + std::to_string(err.span.column) +
           ": error: " + err.message + "\n";
    if (err.span.line - 1 < lines.size()) {
      std::string_view line = lines[err.span.line - 1];
      out += "  ";
      out += std::string(line);
      out += "\n  ";
      for (std::size_t i = 1; i < err.span.column; ++i)
        out += (i - 1 < line.size() && line[i - 1] == '\t') ? '\t' : ' ';
      out += '^';
      for (std::size_t i = 1; i < err.span.length; ++i) out += '~';
      out += '\n';
    }
  }
  return out;
}

// ── Pretty printing ─────────────────────────────────────────────────────────

namespace detail {

inline std::string range_text(const ValueRange& r) {
  switch (r.kind) {
    case ValueRange::Kind::Opaque: return {};
    case ValueRange::Kind::BooleanLiteral: return r.boolean ? "true" : "false";
    case ValueRange::Kind::Singleton: return "[" + to_text(r.point) + "]";
    case ValueRange::Kind::Interval:
      return std::string(r.lower_inclusive ? "[" : "(") + to_text(r.lower) + ", " +
             to_text(r.upper) + (r.upper_inclusive ? "]" : ")");
  }
  return {};
}

inline std::string value_text(const AbstractValue& v) {
  // A boolean literal whose name matches itself round-trips as the bare name.
  if (v.range.kind == ValueRange::Kind::BooleanLiteral &&
      v.name == (v.range.boolean ? "true" : "false"))
    return v.name;
  if (v.range.kind == ValueRange::Kind::Opaque) return v.name;
  return v.name + " = " + range_text(v.range);
}

}  // namespace detail

/// Canonical text for a model; parse(pretty_print(m)) == m.
inline std::string pretty_print(const StpaModel& model) {
  std::string out = "controller " + model.controller + " {\n";
  out += "  processModel {\n";
  for (const auto& var : model.variables) {
    bool ranged = false;
    for (const auto& v : var.values) ranged |= v.range.is_numeric();
    if (!ranged) {
      out += "    " + var.name + ": { ";
      for (std::size_t i = 0; i < var.values.size(); ++i)
        out += (i ? ", " : "") + detail::value_text(var.values[i]);
      out += " }\n";
    } else {
      out += "    " + var.name + ": {\n";
      for (std::size_t i = 0; i < var.values.size(); ++i)
        out += "      " + detail::value_text(var.values[i]) +
               (i + 1 < var.values.size() ? ",\n" : "\n");
      out += "    }\n";
    }
  }
  out += "  }\n";
  out += "  controlActions { ";
  for (std::size_t i = 0; i < model.actions.size(); ++i)
    out += (i ? ", " : "") + model.actions[i];
  out += model.actions.empty() ? "}\n" : " }\n";
  auto print_rules = [&](const char* section, const auto& rules) {
    if (rules.empty()) return;
    out += std::string("  ") + section + " {\n";
    for (const auto& r : rules) {
      out += "    " + r.id + " {\n";
      out += "      action " + r.action + "\n";
      out += std::string("      type ") + to_keyword(r.kind) + "\n";
      out += "      contexts {\n";
      for (const auto& ctx : r.contexts) {
        out += "        " + ctx.id + " [";
        for (std::size_t i = 0; i < ctx.assignments.size(); ++i)
          out += (i ? ", " : "") + ctx.assignments[i].first + " = " + ctx.assignments[i].second;
        out += "]\n";
      }
      out += "      }\n";
      out += "    }\n";
    }
    out += "  }\n";
  };
  print_rules("ucas", model.ucas);
  print_rules("dcas", model.dcas);
  out += "}\n";
  return out;
}

}  // namespace sbm

#endif  // SBM_PARSE_HPP
