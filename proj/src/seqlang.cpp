#include "quadtune/seqlang.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <set>
#include <stdexcept>

#include "quadtune/spin.hpp"

namespace quadtune {

namespace {

enum class Dim { none, frequency, time, field, angle, efg, area };

const char* dim_name(Dim d) {
  switch (d) {
    case Dim::frequency: return "a frequency";
    case Dim::time: return "a time";
    case Dim::field: return "a magnetic field";
    case Dim::angle: return "an angle";
    case Dim::efg: return "a gradient-elastic value";
    case Dim::area: return "an area";
    default: return "a plain number";
  }
}

struct UnitDef {
  Dim dim;
  double factor;
};

const UnitDef* lookup_unit(const std::string& u) {
  static const std::map<std::string, UnitDef> table = {
      {"Hz", {Dim::frequency, 1.0}},        {"kHz", {Dim::frequency, 1e3}},
      {"MHz", {Dim::frequency, 1e6}},       {"GHz", {Dim::frequency, 1e9}},
      {"s", {Dim::time, 1.0}},              {"ms", {Dim::time, 1e-3}},
      {"us", {Dim::time, 1e-6}},            {"ns", {Dim::time, 1e-9}},
      {"T", {Dim::field, 1.0}},             {"Tesla", {Dim::field, 1.0}},
      {"mT", {Dim::field, 1e-3}},           {"uT", {Dim::field, 1e-6}},
      {"G", {Dim::field, 1e-4}},            {"rad", {Dim::angle, 1.0}},
      {"mrad", {Dim::angle, 1e-3}},         {"deg", {Dim::angle, M_PI / 180.0}},
      {"V/m^2", {Dim::efg, 1.0}},           {"m^2", {Dim::area, 1.0}},
      {"fm^2", {Dim::area, 1e-30}},         {"barn", {Dim::area, 1e-28}},
  };
  const auto it = table.find(u);
  return it == table.end() ? nullptr : &it->second;
}

// "pi", "pi/2", "pi/4"... -> value in radians
bool parse_pi_form(const std::string& s, double& out) {
  if (s == "pi") {
    out = M_PI;
    return true;
  }
  if (s.rfind("pi/", 0) == 0) {
    char* end = nullptr;
    const double d = std::strtod(s.c_str() + 3, &end);
    if (end && *end == '\0' && d != 0.0) {
      out = M_PI / d;
      return true;
    }
  }
  return false;
}

struct Token {
  enum class Kind {
    ident,
    number,
    str,
    lbracket,
    rbracket,
    equals,
    lparen,
    rparen,
    lbrace,
    rbrace,
    comma,
    slash,
    dotdot,
    newline,
    end,
    bad
  };
  Kind kind = Kind::end;
  std::string text;
  double value = 0.0;
  int line = 1, column = 1;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_cont(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
         c == '+' || c == '/' || c == '^';
}

std::vector<Token> lex(const std::string& text, std::vector<ParseDiagnostic>& diags) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  const size_t n = text.size();

  const auto push = [&](Token::Kind k, std::string t, double v, int l, int c) {
    out.push_back({k, std::move(t), v, l, c});
  };

  while (i < n) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      ++col;
      continue;
    }
    if (c == '#') {
      while (i < n && text[i] != '\n') ++i;
      continue;
    }
    if (c == '\n') {
      push(Token::Kind::newline, "\n", 0, line, col);
      ++i;
      ++line;
      col = 1;
      continue;
    }
    const int tl = line, tc = col;
    if (c == '"') {
      size_t j = i + 1;
      while (j < n && text[j] != '"' && text[j] != '\n') ++j;
      if (j >= n || text[j] != '"') {
        diags.push_back({ParseDiagnostic::Severity::error, tl, tc,
                         "unterminated string", "\""});
        push(Token::Kind::bad, "\"", 0, tl, tc);
        i = j;
        col += static_cast<int>(j - i);
        continue;
      }
      push(Token::Kind::str, text.substr(i + 1, j - i - 1), 0, tl, tc);
      col += static_cast<int>(j + 1 - i);
      i = j + 1;
      continue;
    }
    if (ident_start(c)) {
      size_t j = i + 1;
      while (j < n && ident_cont(text[j])) ++j;
      push(Token::Kind::ident, text.substr(i, j - i), 0, tl, tc);
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    const bool num_start =
        std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(text[i + 1]))) ||
        ((c == '-' || c == '+') && i + 1 < n &&
         (std::isdigit(static_cast<unsigned char>(text[i + 1])) ||
          (text[i + 1] == '.' && i + 2 < n &&
           std::isdigit(static_cast<unsigned char>(text[i + 2])))));
    if (num_start) {
      size_t j = i;
      if (text[j] == '-' || text[j] == '+') ++j;
      while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      // a '.' followed by another '.' belongs to the range operator
      if (j < n && text[j] == '.' && !(j + 1 < n && text[j + 1] == '.')) {
        ++j;
        while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      }
      if (j < n && (text[j] == 'e' || text[j] == 'E')) {
        size_t k = j + 1;
        if (k < n && (text[k] == '-' || text[k] == '+')) ++k;
        if (k < n && std::isdigit(static_cast<unsigned char>(text[k]))) {
          ++k;
          while (k < n && std::isdigit(static_cast<unsigned char>(text[k]))) ++k;
          j = k;
        }
      }
      const std::string lex = text.substr(i, j - i);
      push(Token::Kind::number, lex, std::strtod(lex.c_str(), nullptr), tl, tc);
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    if (c == '.' && i + 1 < n && text[i + 1] == '.') {
      push(Token::Kind::dotdot, "..", 0, tl, tc);
      i += 2;
      col += 2;
      continue;
    }
    Token::Kind k = Token::Kind::bad;
    switch (c) {
      case '[': k = Token::Kind::lbracket; break;
      case ']': k = Token::Kind::rbracket; break;
      case '=': k = Token::Kind::equals; break;
      case '(': k = Token::Kind::lparen; break;
      case ')': k = Token::Kind::rparen; break;
      case '{': k = Token::Kind::lbrace; break;
      case '}': k = Token::Kind::rbrace; break;
      case ',': k = Token::Kind::comma; break;
      case '/': k = Token::Kind::slash; break;
      default: break;
    }
    if (k == Token::Kind::bad)
      diags.push_back({ParseDiagnostic::Severity::error, tl, tc,
                       "unexpected character", std::string(1, c)});
    push(k, std::string(1, c), 0, tl, tc);
    ++i;
    ++col;
  }
  push(Token::Kind::end, "", 0, line, col);
  return out;
}

class Parser {
 public:
  Parser(std::vector<Token> toks, std::vector<ParseDiagnostic>& diags)
      : toks_(std::move(toks)), diags_(diags) {}

  ExperimentConfig run() {
    while (peek().kind != Token::Kind::end) {
      skip_newlines();
      if (peek().kind == Token::Kind::end) break;
      if (peek().kind == Token::Kind::lbracket) {
        parse_section();
      } else {
        error(peek(), "expected a section header like [system]");
        sync_to_newline();
      }
    }
    return cfg_;
  }

 private:
  std::vector<Token> toks_;
  std::vector<ParseDiagnostic>& diags_;
  ExperimentConfig cfg_;
  size_t pos_ = 0;
  std::set<std::string> seen_sections_;
  std::set<std::string> seen_keys_;  // "<section>.<key>"
  std::string section_;

  const Token& peek(size_t ahead = 0) const {
    const size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  const Token& next() {
    const Token& t = peek();
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool accept(Token::Kind k) {
    if (peek().kind != k) return false;
    next();
    return true;
  }
  void error(const Token& at, const std::string& msg) {
    diags_.push_back({ParseDiagnostic::Severity::error, at.line, at.column, msg, at.text});
  }
  void skip_newlines() {
    while (peek().kind == Token::Kind::newline) next();
  }
  void sync_to_newline() {
    while (peek().kind != Token::Kind::newline && peek().kind != Token::Kind::end)
      next();
  }
  bool end_of_line() {
    if (peek().kind == Token::Kind::newline || peek().kind == Token::Kind::end)
      return true;
    error(peek(), "unexpected trailing input on this line");
    sync_to_newline();
    return false;
  }

  // scalar := number [unit] | number '/' number | [number] pi-form
  bool parse_scalar(Dim dim, double& out) {
    double pi_val;
    if (peek().kind == Token::Kind::ident && parse_pi_form(peek().text, pi_val)) {
      if (dim != Dim::angle && dim != Dim::none) {
        error(peek(), std::string("expected ") + dim_name(dim));
        next();
        return false;
      }
      next();
      out = pi_val;
      return true;
    }
    if (peek().kind != Token::Kind::number) {
      error(peek(), std::string("expected ") + dim_name(dim));
      return false;
    }
    const Token num = next();
    // fraction: 3/2
    if (peek().kind == Token::Kind::slash && peek(1).kind == Token::Kind::number) {
      next();
      const Token den = next();
      if (den.value == 0.0) {
        error(den, "fraction with zero denominator");
        return false;
      }
      out = num.value / den.value;
      return true;
    }
    // number followed by a pi-form: 2pi, 3 pi/2
    if (peek().kind == Token::Kind::ident && parse_pi_form(peek().text, pi_val) &&
        (dim == Dim::angle || dim == Dim::none)) {
      next();
      out = num.value * pi_val;
      return true;
    }
    if (peek().kind == Token::Kind::ident) {
      const Token unit = peek();
      const UnitDef* def = lookup_unit(unit.text);
      if (!def) {
        error(unit, "unknown unit");
        next();
        return false;
      }
      if (def->dim != dim) {
        error(unit, std::string("unit mismatch: expected ") + dim_name(dim));
        next();
        return false;
      }
      next();
      out = num.value * def->factor;
      return true;
    }
    if (dim == Dim::none || dim == Dim::angle) {
      out = num.value;  // bare numbers are dimensionless or radians
      return true;
    }
    error(num, std::string("missing unit: expected ") + dim_name(dim));
    return false;
  }

  bool parse_int(int& out, int min_value) {
    double v;
    if (!parse_scalar(Dim::none, v)) return false;
    if (v != std::floor(v) || v < min_value) {
      char msg[80];
      std::snprintf(msg, sizeof msg, "expected an integer >= %d", min_value);
      error(peek(), msg);
      return false;
    }
    out = static_cast<int>(v);
    return true;
  }

  bool parse_ident(std::string& out) {
    if (peek().kind != Token::Kind::ident) {
      error(peek(), "expected an identifier");
      return false;
    }
    out = next().text;
    return true;
  }

  bool parse_vector3(Eigen::Vector3d& out) {
    for (int k = 0; k < 3; ++k) {
      double v;
      if (!parse_scalar(Dim::none, v)) return false;
      out(k) = v;
    }
    return true;
  }

  void parse_section() {
    const Token open = next();  // '['
    std::string name, seq_name;
    if (!parse_ident(name)) {
      sync_to_newline();
      return;
    }
    if (name == "sequence") {
      if (!parse_ident(seq_name)) {
        sync_to_newline();
        return;
      }
    }
    if (!accept(Token::Kind::rbracket)) {
      error(peek(), "expected ']' to close the section header");
      sync_to_newline();
      return;
    }
    const std::string full = name == "sequence" ? name + " " + seq_name : name;
    if (!seen_sections_.insert(full).second)
      error(open, "duplicate section [" + full + "]");
    section_ = full;
    end_of_line();

    static const std::set<std::string> known = {
        "system", "field", "strain", "tensor-S", "broadening",
        "noise",  "sweep", "endor",  "output",   "sequence"};
    if (!known.count(name)) {
      error(open, "unknown section [" + name + "]");
      skip_section_body();
      return;
    }
    if (name == "sequence") {
      parse_sequence_body(cfg_.sequences[seq_name]);
    } else {
      parse_entries(name);
    }
  }

  void skip_section_body() {
    while (peek().kind != Token::Kind::end) {
      skip_newlines();
      if (peek().kind == Token::Kind::lbracket || peek().kind == Token::Kind::end)
        return;
      sync_to_newline();
    }
  }

  void parse_entries(const std::string& section) {
    while (true) {
      skip_newlines();
      if (peek().kind == Token::Kind::lbracket || peek().kind == Token::Kind::end)
        return;
      const Token key = peek();
      std::string k;
      if (!parse_ident(k)) {
        sync_to_newline();
        continue;
      }
      if (!accept(Token::Kind::equals)) {
        error(peek(), "expected '=' after key '" + k + "'");
        sync_to_newline();
        continue;
      }
      if (!seen_keys_.insert(section_ + "." + k).second)
        error(key, "duplicate key '" + k + "' in [" + section + "]");
      if (dispatch_entry(section, k, key)) end_of_line();
    }
  }

  // returns false when the handler already resynchronized
  bool dispatch_entry(const std::string& sec, const std::string& key, const Token& at) {
    double v;
    int iv;
    std::string id;
    const auto bad_key = [&] {
      error(at, "unknown key '" + key + "' in [" + sec + "]");
      sync_to_newline();
      return false;
    };
    const auto fail = [&] {
      sync_to_newline();
      return false;
    };

    if (sec == "system") {
      if (key == "spin") return parse_scalar(Dim::none, cfg_.system.spin) || fail();
      if (key == "g_n") return parse_scalar(Dim::none, cfg_.system.g_n) || fail();
      if (key == "g_n_free")
        return parse_scalar(Dim::none, cfg_.system.g_n_free) || fail();
      if (key == "q") return parse_scalar(Dim::area, cfg_.system.q) || fail();
      return bad_key();
    }
    if (sec == "field") {
      if (key == "B0") return parse_scalar(Dim::field, cfg_.field.b0_t) || fail();
      if (key == "orientation") return parse_vector3(cfg_.field.orientation) || fail();
      if (key == "theta") return parse_scalar(Dim::angle, cfg_.field.theta_rad) || fail();
      return bad_key();
    }
    if (sec == "strain") {
      auto& st = cfg_.strain;
      if (key == "mode") return parse_ident(st.mode) || fail();
      if (key == "eps_parallel") return parse_scalar(Dim::none, st.eps_parallel) || fail();
      if (key == "eps_perp") {
        if (!parse_scalar(Dim::none, st.eps_perp)) return fail();
        st.eps_perp_given = true;
        return true;
      }
      if (key == "eps_trans") return parse_scalar(Dim::none, st.eps_trans) || fail();
      if (key == "axis") return parse_vector3(st.axis) || fail();
      if (key == "f_q") return parse_scalar(Dim::frequency, st.fq_hz) || fail();
      if (key == "exx") return parse_scalar(Dim::none, st.tensor(0, 0)) || fail();
      if (key == "eyy") return parse_scalar(Dim::none, st.tensor(1, 1)) || fail();
      if (key == "ezz") return parse_scalar(Dim::none, st.tensor(2, 2)) || fail();
      if (key == "exy") {
        if (!parse_scalar(Dim::none, v)) return fail();
        st.tensor(0, 1) = st.tensor(1, 0) = v;
        return true;
      }
      if (key == "exz") {
        if (!parse_scalar(Dim::none, v)) return fail();
        st.tensor(0, 2) = st.tensor(2, 0) = v;
        return true;
      }
      if (key == "eyz") {
        if (!parse_scalar(Dim::none, v)) return fail();
        st.tensor(1, 2) = st.tensor(2, 1) = v;
        return true;
      }
      return bad_key();
    }
    if (sec == "tensor-S") {
      if (key == "S11") return parse_scalar(Dim::efg, cfg_.tensor_s.s11) || fail();
      if (key == "S44") return parse_scalar(Dim::efg, cfg_.tensor_s.s44) || fail();
      if (key == "shear_convention") {
        if (!parse_ident(id)) return fail();
        if (id == "tensor")
          cfg_.tensor_s.convention = ShearConvention::tensor;
        else if (id == "engineering")
          cfg_.tensor_s.convention = ShearConvention::engineering;
        else {
          error(at, "shear_convention must be 'tensor' or 'engineering'");
          return false;
        }
        return true;
      }
      return bad_key();
    }
    if (sec == "broadening") {
      auto& b = cfg_.broadening;
      if (key == "spread") return parse_scalar(Dim::frequency, b.spread_hz) || fail();
      if (key == "asymmetry") return parse_scalar(Dim::none, b.asymmetry) || fail();
      if (key == "nodes") {
        if (!parse_int(iv, 1)) return fail();
        b.nodes = iv;
        return true;
      }
      if (key == "shape") {
        if (!parse_ident(id)) return fail();
        if (id == "gaussian")
          b.shape = BroadeningModel::Shape::gaussian;
        else if (id == "one-sided-exponential")
          b.shape = BroadeningModel::Shape::one_sided_exponential;
        else {
          error(at, "shape must be 'gaussian' or 'one-sided-exponential'");
          return false;
        }
        return true;
      }
      return bad_key();
    }
    if (sec == "noise") {
      auto& nz = cfg_.noise;
      nz.present = true;
      if (key == "alpha") return parse_scalar(Dim::none, nz.alpha) || fail();
      if (key == "amplitude") return parse_scalar(Dim::none, nz.amplitude) || fail();
      if (key == "f_low") return parse_scalar(Dim::frequency, nz.f_low_hz) || fail();
      if (key == "f_high") return parse_scalar(Dim::frequency, nz.f_high_hz) || fail();
      if (key == "t2_calibration")
        return parse_scalar(Dim::time, nz.t2_calibration_s) || fail();
      if (key == "n_calibration") {
        if (!parse_int(iv, 1)) return fail();
        nz.n_calibration = iv;
        return true;
      }
      if (key == "t_points") {
        if (!parse_int(iv, 2)) return fail();
        nz.t_points = iv;
        return true;
      }
      if (key == "n_pulses") {
        nz.n_pulses.clear();
        while (peek().kind == Token::Kind::number) {
          if (!parse_int(iv, 1)) return fail();
          nz.n_pulses.push_back(iv);
        }
        if (nz.n_pulses.empty()) {
          error(peek(), "n_pulses needs at least one integer");
          return fail();
        }
        return true;
      }
      return bad_key();
    }
    if (sec == "sweep") {
      auto& sw = cfg_.sweep;
      sw.present = true;
      if (key == "variable") return parse_ident(sw.variable) || fail();
      if (key == "points") {
        if (!parse_int(iv, 2)) return fail();
        sw.points = iv;
        return true;
      }
      if (key == "range") {
        if (!parse_sweep_scalar(sw.start)) return fail();
        if (!accept(Token::Kind::dotdot)) {
          error(peek(), "expected '..' between the range endpoints");
          return fail();
        }
        if (!parse_sweep_scalar(sw.stop)) return fail();
        return true;
      }
      return bad_key();
    }
    if (sec == "endor") {
      auto& e = cfg_.endor;
      if (key == "efficiency") return parse_scalar(Dim::none, e.efficiency) || fail();
      if (key == "rf_duration")
        return parse_scalar(Dim::time, e.rf_duration_s) || fail();
      if (key == "rf_start") return parse_scalar(Dim::frequency, e.rf_start_hz) || fail();
      if (key == "rf_stop") return parse_scalar(Dim::frequency, e.rf_stop_hz) || fail();
      if (key == "points") {
        if (!parse_int(iv, 10)) return fail();
        e.points = iv;
        return true;
      }
      return bad_key();
    }
    if (sec == "output") {
      if (key == "prefix") {
        if (peek().kind != Token::Kind::str) {
          error(peek(), "prefix must be a quoted string");
          return fail();
        }
        cfg_.output.prefix = next().text;
        return true;
      }
      if (key == "format") {
        if (!parse_ident(id)) return fail();
        if (id != "csv" && id != "json") {
          error(at, "format must be 'csv' or 'json'");
          return false;
        }
        cfg_.output.format = id;
        return true;
      }
      return bad_key();
    }
    return bad_key();
  }

  // sweep ranges accept any unit; the dimension is fixed by the variable and
  // cross-checked in validate_config
  bool parse_sweep_scalar(double& out) {
    if (peek().kind != Token::Kind::number) {
      error(peek(), "expected a number in the sweep range");
      return false;
    }
    const Token num = next();
    out = num.value;
    if (peek().kind == Token::Kind::ident) {
      const UnitDef* def = lookup_unit(peek().text);
      if (!def) {
        error(peek(), "unknown unit");
        next();
        return false;
      }
      next();
      out = num.value * def->factor;
    }
    return true;
  }

  void parse_sequence_body(PulseSequence& seq) {
    while (true) {
      skip_newlines();
      if (peek().kind == Token::Kind::lbracket || peek().kind == Token::Kind::end)
        return;
      PulseSequence::Event ev;
      if (parse_statement(ev))
        seq.events.push_back(std::move(ev));
      else
        sync_to_newline();
    }
  }

  bool parse_statement(PulseSequence::Event& ev) {
    std::string word;
    if (!parse_ident(word)) return false;
    if (word == "pulse") return parse_pulse(ev);
    if (word == "wait") {
      double d;
      if (!accept(Token::Kind::lparen)) {
        error(peek(), "expected '(' after wait");
        return false;
      }
      if (!parse_scalar(Dim::time, d)) return false;
      if (!accept(Token::Kind::rparen)) {
        error(peek(), "expected ')' after the wait duration");
        return false;
      }
      ev = PulseSequence::Event::make_delay(d);
      return true;
    }
    if (word == "repeat") {
      int count;
      if (!parse_int(count, 1)) return false;
      if (!accept(Token::Kind::lbrace)) {
        error(peek(), "expected '{' after repeat count");
        return false;
      }
      std::vector<PulseSequence::Event> body;
      while (true) {
        skip_newlines();
        if (peek().kind == Token::Kind::rbrace) {
          next();
          break;
        }
        if (peek().kind == Token::Kind::end) {
          error(peek(), "unclosed repeat block");
          return false;
        }
        PulseSequence::Event inner;
        if (parse_statement(inner))
          body.push_back(std::move(inner));
        else
          sync_to_newline();
      }
      ev = PulseSequence::Event::make_loop(count, std::move(body));
      return true;
    }
    error(peek(), "unknown statement '" + word + "' (pulse, wait or repeat)");
    return false;
  }

  bool parse_pulse(PulseSequence::Event& ev) {
    Pulse p;
    const Token open = peek();
    if (!accept(Token::Kind::lparen)) {
      error(open, "expected '(' after pulse");
      return false;
    }
    const Token trans = peek();
    if (!parse_ident(p.transition)) return false;
    try {
      transition_label_m_hi(p.transition);
    } catch (const std::exception&) {
      error(trans, "unknown transition (inner, outer+ or outer-)");
    }
    if (!accept(Token::Kind::comma)) {
      error(peek(), "expected ',' after the transition");
      return false;
    }
    if (!parse_scalar(Dim::angle, p.flip_rad)) return false;
    if (!accept(Token::Kind::comma)) {
      error(peek(), "expected ',' after the flip angle");
      return false;
    }
    if (!parse_scalar(Dim::time, p.duration_s)) return false;
    if (!accept(Token::Kind::comma)) {
      error(peek(), "expected ',' after the duration");
      return false;
    }
    if (!parse_scalar(Dim::angle, p.phase_rad)) return false;
    if (!accept(Token::Kind::rparen)) {
      error(peek(), "expected ')' to close pulse(...)");
      return false;
    }
    ev = PulseSequence::Event::make_pulse(p);
    return true;
  }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void serialize_events(std::string& out, const std::vector<PulseSequence::Event>& events,
                      int indent) {
  const std::string pad(indent, ' ');
  for (const auto& ev : events) {
    switch (ev.kind) {
      case PulseSequence::Event::Kind::pulse:
        out += pad + "pulse(" + ev.pulse.transition + ", " + fmt(ev.pulse.flip_rad) +
               ", " + fmt(ev.pulse.duration_s) + " s, " + fmt(ev.pulse.phase_rad) + ")\n";
        break;
      case PulseSequence::Event::Kind::delay:
        out += pad + "wait(" + fmt(ev.delay_s) + " s)\n";
        break;
      case PulseSequence::Event::Kind::loop:
        out += pad + "repeat " + std::to_string(ev.count) + " {\n";
        serialize_events(out, ev.body, indent + 2);
        out += pad + "}\n";
        break;
    }
  }
}

void check_sequence(const std::vector<PulseSequence::Event>& events,
                    const std::string& name, std::vector<ParseDiagnostic>& diags) {
  for (const auto& ev : events) {
    switch (ev.kind) {
      case PulseSequence::Event::Kind::pulse:
        try {
          transition_label_m_hi(ev.pulse.transition);
        } catch (const std::exception&) {
          diags.push_back({ParseDiagnostic::Severity::error, 1, 1,
                           "sequence '" + name + "': unresolvable transition",
                           ev.pulse.transition});
        }
        if (!(ev.pulse.duration_s > 0.0))
          diags.push_back({ParseDiagnostic::Severity::error, 1, 1,
                           "sequence '" + name + "': pulse duration must be > 0", ""});
        break;
      case PulseSequence::Event::Kind::delay:
        if (ev.delay_s < 0.0)
          diags.push_back({ParseDiagnostic::Severity::error, 1, 1,
                           "sequence '" + name + "': negative wait", ""});
        break;
      case PulseSequence::Event::Kind::loop:
        if (ev.count < 1)
          diags.push_back({ParseDiagnostic::Severity::error, 1, 1,
                           "sequence '" + name + "': repeat count must be >= 1", ""});
        check_sequence(ev.body, name, diags);
        break;
    }
  }
}

}  // namespace

bool ParseResult::ok() const {
  for (const auto& d : diagnostics)
    if (d.severity == ParseDiagnostic::Severity::error) return false;
  return true;
}

ParseResult parse_config(const std::string& text) {
  ParseResult res;
  auto tokens = lex(text, res.diagnostics);
  Parser parser(std::move(tokens), res.diagnostics);
  res.config = parser.run();
  return res;
}

double config_f0_hz(const ExperimentConfig& cfg, const PhysicalConstants& k) {
  const FieldConfig field = make_field(cfg.field.b0_t, cfg.field.orientation);
  return larmor_frequency(cfg.system, field, k);
}

QuadrupoleCoupling config_fq(const ExperimentConfig& cfg) {
  const StrainSection& st = cfg.strain;
  QuadrupoleCoupling qc;
  if (st.mode == "none") return qc;
  if (st.mode == "direct") {
    qc.fq_hz = st.fq_hz;
    return qc;
  }
  Eigen::Matrix3d eps;
  if (st.mode == "stack-100" || st.mode == "stack-111") {
    const StackOrientation o =
        st.mode == "stack-100" ? StackOrientation::s100 : StackOrientation::s111;
    eps = st.eps_perp_given ? biaxial_thermal_strain(st.eps_parallel, st.eps_perp, o)
                            : biaxial_thermal_strain(st.eps_parallel, o);
  } else if (st.mode == "uniaxial") {
    eps = uniaxial_strain(st.eps_parallel, st.eps_trans, st.axis);
  } else if (st.mode == "tensor") {
    eps = 0.5 * (st.tensor + st.tensor.transpose());
  } else {
    throw std::invalid_argument("unknown strain mode '" + st.mode + "'");
  }
  return coupling_fq(efg_from_strain(eps, cfg.tensor_s), cfg.system);
}

std::vector<ParseDiagnostic> validate_config(ExperimentConfig& cfg,
                                             const PhysicalConstants& k) {
  std::vector<ParseDiagnostic> diags;
  const auto err = [&](const std::string& msg, const std::string& tok = "") {
    diags.push_back({ParseDiagnostic::Severity::error, 1, 1, msg, tok});
  };
  const auto warn = [&](const std::string& msg) {
    diags.push_back({ParseDiagnostic::Severity::warning, 1, 1, msg, ""});
  };

  if (!is_half_integer_spin(cfg.system.spin))
    err("spin must be a positive half-integer");
  if (!(cfg.system.g_n > 0.0)) err("g_n must be > 0");
  if (!(cfg.field.b0_t >= 0.0)) err("B0 must be >= 0");
  if (!(cfg.field.orientation.norm() > 0.0)) err("field orientation must be nonzero");

  static const std::set<std::string> modes = {"none",     "stack-100", "stack-111",
                                              "uniaxial", "tensor",    "direct"};
  if (!modes.count(cfg.strain.mode)) {
    err("unknown strain mode", cfg.strain.mode);
  } else {
    if ((cfg.strain.mode == "stack-100" || cfg.strain.mode == "stack-111") &&
        !cfg.strain.eps_perp_given) {
      const StackOrientation o = cfg.strain.mode == "stack-100"
                                     ? StackOrientation::s100
                                     : StackOrientation::s111;
      cfg.strain.eps_perp = cfg.strain.eps_parallel * biaxial_perp_ratio(o);
      cfg.strain.eps_perp_given = true;
    }
    if (cfg.strain.mode == "uniaxial" && !(cfg.strain.axis.norm() > 0.0))
      err("uniaxial strain needs a nonzero axis");
    if (cfg.strain.mode == "tensor" &&
        (cfg.strain.tensor - cfg.strain.tensor.transpose()).norm() >
            1e-12 * (1.0 + cfg.strain.tensor.norm())) {
      warn("strain tensor was symmetrized");
      cfg.strain.tensor = 0.5 * (cfg.strain.tensor + cfg.strain.tensor.transpose());
    }
  }

  if (!(cfg.broadening.spread_hz >= 0.0)) err("broadening spread must be >= 0");
  if (!(cfg.broadening.asymmetry >= -1.0 && cfg.broadening.asymmetry <= 1.0))
    err("broadening asymmetry must lie in [-1, 1]");
  if (cfg.broadening.nodes < 32) err("broadening needs >= 32 quadrature nodes");

  if (cfg.noise.present) {
    if (!(cfg.noise.alpha > 0.0)) err("noise alpha must be > 0");
    if (!(cfg.noise.amplitude >= 0.0)) err("noise amplitude must be >= 0");
    if (!(cfg.noise.f_low_hz > 0.0 && cfg.noise.f_high_hz > cfg.noise.f_low_hz))
      err("noise band needs 0 < f_low < f_high");
    if (cfg.noise.t2_calibration_s < 0.0) err("t2_calibration must be >= 0");
    for (int n : cfg.noise.n_pulses)
      if (n < 1) err("n_pulses entries must be >= 1");
  }

  if (cfg.sweep.present) {
    if (cfg.sweep.variable != "theta" && cfg.sweep.variable != "strain" &&
        cfg.sweep.variable != "B0")
      err("sweep variable must be theta, strain or B0", cfg.sweep.variable);
    if (cfg.sweep.points < 2) err("sweep needs >= 2 points");
    if (!(cfg.sweep.stop != cfg.sweep.start)) err("sweep range is empty");
  }

  if (!(cfg.endor.efficiency >= 0.0 && cfg.endor.efficiency <= 1.0))
    err("endor efficiency must lie in [0, 1]");
  if (!(cfg.endor.rf_duration_s > 0.0)) err("endor rf_duration must be > 0");
  const bool auto_range = cfg.endor.rf_start_hz == 0.0 && cfg.endor.rf_stop_hz == 0.0;
  if (!auto_range && !(cfg.endor.rf_stop_hz > cfg.endor.rf_start_hz))
    err("endor rf range needs stop > start");
  if (cfg.endor.points < 10) err("endor sweep needs >= 10 points");

  if (cfg.output.format != "csv" && cfg.output.format != "json")
    err("output format must be csv or json", cfg.output.format);

  for (const auto& [name, seq] : cfg.sequences) check_sequence(seq.events, name, diags);

  // perturbative-regime warning, mirroring the transition-table guard
  try {
    const double f0 = config_f0_hz(cfg, k);
    const double fq = config_fq(cfg).fq_hz;
    if (f0 > 0.0 && std::abs(fq) / f0 > 0.3)
      warn("f_Q/f0 exceeds 0.3; perturbative line assignments are unreliable");
  } catch (const std::exception&) {
    // config errors already reported above
  }
  return diags;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  out += "[system]\n";
  out += "spin = " + fmt(cfg.system.spin) + "\n";
  out += "g_n = " + fmt(cfg.system.g_n) + "\n";
  out += "g_n_free = " + fmt(cfg.system.g_n_free) + "\n";
  out += "q = " + fmt(cfg.system.q) + " m^2\n";

  out += "\n[field]\n";
  out += "B0 = " + fmt(cfg.field.b0_t) + " T\n";
  out += "orientation = " + fmt(cfg.field.orientation(0)) + " " +
         fmt(cfg.field.orientation(1)) + " " + fmt(cfg.field.orientation(2)) + "\n";
  out += "theta = " + fmt(cfg.field.theta_rad) + " rad\n";

  if (cfg.strain.mode != "none") {
    out += "\n[strain]\n";
    out += "mode = " + cfg.strain.mode + "\n";
    if (cfg.strain.mode == "direct") {
      out += "f_q = " + fmt(cfg.strain.fq_hz) + " Hz\n";
    } else if (cfg.strain.mode == "tensor") {
      out += "exx = " + fmt(cfg.strain.tensor(0, 0)) + "\n";
      out += "eyy = " + fmt(cfg.strain.tensor(1, 1)) + "\n";
      out += "ezz = " + fmt(cfg.strain.tensor(2, 2)) + "\n";
      out += "exy = " + fmt(cfg.strain.tensor(0, 1)) + "\n";
      out += "exz = " + fmt(cfg.strain.tensor(0, 2)) + "\n";
      out += "eyz = " + fmt(cfg.strain.tensor(1, 2)) + "\n";
    } else {
      out += "eps_parallel = " + fmt(cfg.strain.eps_parallel) + "\n";
      if (cfg.strain.eps_perp_given)
        out += "eps_perp = " + fmt(cfg.strain.eps_perp) + "\n";
      if (cfg.strain.mode == "uniaxial") {
        out += "eps_trans = " + fmt(cfg.strain.eps_trans) + "\n";
        out += "axis = " + fmt(cfg.strain.axis(0)) + " " + fmt(cfg.strain.axis(1)) +
               " " + fmt(cfg.strain.axis(2)) + "\n";
      }
    }
  }

  out += "\n[tensor-S]\n";
  out += "S11 = " + fmt(cfg.tensor_s.s11) + " V/m^2\n";
  out += "S44 = " + fmt(cfg.tensor_s.s44) + " V/m^2\n";
  out += std::string("shear_convention = ") +
         (cfg.tensor_s.convention == ShearConvention::tensor ? "tensor" : "engineering") +
         "\n";

  out += "\n[broadening]\n";
  out += "spread = " + fmt(cfg.broadening.spread_hz) + " Hz\n";
  out += "asymmetry = " + fmt(cfg.broadening.asymmetry) + "\n";
  out += std::string("shape = ") +
         (cfg.broadening.shape == BroadeningModel::Shape::gaussian
              ? "gaussian"
              : "one-sided-exponential") +
         "\n";
  out += "nodes = " + std::to_string(cfg.broadening.nodes) + "\n";

  if (cfg.noise.present) {
    out += "\n[noise]\n";
    out += "alpha = " + fmt(cfg.noise.alpha) + "\n";
    out += "amplitude = " + fmt(cfg.noise.amplitude) + "\n";
    out += "f_low = " + fmt(cfg.noise.f_low_hz) + " Hz\n";
    out += "f_high = " + fmt(cfg.noise.f_high_hz) + " Hz\n";
    out += "t2_calibration = " + fmt(cfg.noise.t2_calibration_s) + " s\n";
    out += "n_calibration = " + std::to_string(cfg.noise.n_calibration) + "\n";
    out += "n_pulses =";
    for (int n : cfg.noise.n_pulses) out += " " + std::to_string(n);
    out += "\n";
    out += "t_points = " + std::to_string(cfg.noise.t_points) + "\n";
  }

  if (cfg.sweep.present) {
    out += "\n[sweep]\n";
    out += "variable = " + cfg.sweep.variable + "\n";
    out += "range = " + fmt(cfg.sweep.start) + " .. " + fmt(cfg.sweep.stop) + "\n";
    out += "points = " + std::to_string(cfg.sweep.points) + "\n";
  }

  out += "\n[endor]\n";
  out += "efficiency = " + fmt(cfg.endor.efficiency) + "\n";
  out += "rf_duration = " + fmt(cfg.endor.rf_duration_s) + " s\n";
  out += "rf_start = " + fmt(cfg.endor.rf_start_hz) + " Hz\n";
  out += "rf_stop = " + fmt(cfg.endor.rf_stop_hz) + " Hz\n";
  out += "points = " + std::to_string(cfg.endor.points) + "\n";

  out += "\n[output]\n";
  out += "prefix = \"" + cfg.output.prefix + "\"\n";
  out += "format = " + cfg.output.format + "\n";

  for (const auto& [name, seq] : cfg.sequences) {
    out += "\n[sequence " + name + "]\n";
    serialize_events(out, seq.events, 0);
  }
  return out;
}

}  // namespace quadtune
