#include "pgam/formula.hpp"

#include <algorithm>
#include <cctype>

#include "pgam/error.hpp"

namespace pgam {

namespace {

[[noreturn]] void parse_fail(const std::string& msg, std::size_t pos) {
  throw Error("model_spec", "parse", msg + " (at position " + std::to_string(pos) + ")");
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

std::string trim(const std::string& s, std::size_t* lead = nullptr) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  if (lead) *lead = b;
  return s.substr(b, e - b);
}

// Split "day, by=animal, k=9" into trimmed argument strings at top level.
std::vector<std::string> split_args(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string last = trim(cur);
  if (!last.empty() || !out.empty()) out.push_back(last);
  return out;
}

int parse_k(const std::string& val, std::size_t pos) {
  try {
    std::size_t used = 0;
    const int k = std::stoi(val, &used);
    if (used != val.size() || k < 1) parse_fail("bad basis dimension '" + val + "'", pos);
    return k;
  } catch (const Error&) {
    throw;
  } catch (...) {
    parse_fail("bad basis dimension '" + val + "'", pos);
  }
}

TermSpec parse_call(const std::string& fn, const std::string& argstr,
                    std::size_t pos) {
  TermSpec t;
  t.position = pos;
  if (fn == "s") {
    t.kind = TermKind::smooth;
  } else if (fn == "sz") {
    t.kind = TermKind::fs_interaction;
  } else if (fn == "fs") {
    t.kind = TermKind::random_smooth;
  } else if (fn == "ri") {
    t.kind = TermKind::random_intercept;
  } else {
    parse_fail("unknown term function '" + fn + "'", pos);
  }

  int positional = 0;
  for (const std::string& arg : split_args(argstr)) {
    if (arg.empty()) parse_fail("empty argument in " + fn + "(...)", pos);
    const auto eq = arg.find('=');
    if (eq != std::string::npos) {
      const std::string key = trim(arg.substr(0, eq));
      const std::string val = trim(arg.substr(eq + 1));
      if (key == "k") {
        t.k = parse_k(val, pos);
        t.k_given = true;
      } else if (key == "by") {
        if (t.kind != TermKind::smooth) {
          parse_fail("'by=' applies only to s(...)", pos);
        }
        t.kind = TermKind::by_smooth;
        t.factors.push_back(val);
      } else if (key == "bs") {
        if (val != "bs" && val != "tp") {
          parse_fail("unknown basis type '" + val + "' (use bs or tp)", pos);
        }
        t.basis_kind = val;
      } else {
        parse_fail("unknown argument '" + key + "' in " + fn + "(...)", pos);
      }
      continue;
    }
    // positional
    if (t.kind == TermKind::random_intercept) {
      if (positional > 0) parse_fail("ri(...) takes a single factor", pos);
      t.factors.push_back(arg);
    } else if (positional == 0) {
      t.covariate = arg;
    } else {
      if (t.kind == TermKind::smooth || t.kind == TermKind::by_smooth) {
        parse_fail("s(...) takes one covariate; use by=, sz(...) or fs(...)", pos);
      }
      t.factors.push_back(arg);
    }
    ++positional;
  }

  if (t.kind == TermKind::random_intercept) {
    if (t.factors.size() != 1) parse_fail("ri(...) needs a factor", pos);
  } else if (t.covariate.empty()) {
    parse_fail(fn + "(...) needs a covariate", pos);
  }
  if (t.kind == TermKind::fs_interaction &&
      (t.factors.empty() || t.factors.size() > 2)) {
    parse_fail("sz(...) needs one or two factors", pos);
  }
  if (t.kind == TermKind::random_smooth && t.factors.size() != 1) {
    parse_fail("fs(...) needs exactly one factor", pos);
  }

  // label for summaries and term references
  t.label = fn + "(" + t.covariate;
  if (t.kind == TermKind::random_intercept) t.label = fn + "(" + t.factors[0];
  if (t.kind == TermKind::by_smooth) t.label += ",by=" + t.factors[0];
  if (t.kind == TermKind::fs_interaction || t.kind == TermKind::random_smooth) {
    for (const auto& f : t.factors) t.label += "," + f;
  }
  t.label += ")";
  return t;
}

}  // namespace

Formula parse_formula(const std::string& text) {
  const auto tilde = text.find('~');
  if (tilde == std::string::npos) {
    parse_fail("formula needs 'response ~ terms'", 0);
  }
  Formula f;
  f.text = text;
  f.response = trim(text.substr(0, tilde));
  if (f.response.empty() ||
      !std::all_of(f.response.begin(), f.response.end(), is_ident_char)) {
    parse_fail("bad response name '" + f.response + "'", 0);
  }

  // split the right side on top-level '+'
  std::vector<std::pair<std::string, std::size_t>> raw_terms;
  {
    std::string cur;
    int depth = 0;
    std::size_t start = tilde + 1;
    for (std::size_t i = tilde + 1; i <= text.size(); ++i) {
      const char c = i < text.size() ? text[i] : '+';
      if (c == '(') ++depth;
      if (c == ')') --depth;
      if (c == '+' && depth == 0) {
        raw_terms.emplace_back(cur, start);
        cur.clear();
        start = i + 1;
      } else {
        cur += c;
      }
    }
  }

  bool have_intercept = false;
  for (auto& [raw, off] : raw_terms) {
    std::size_t lead = 0;
    const std::string body = trim(raw, &lead);
    const std::size_t pos = off + lead;
    if (body.empty()) parse_fail("empty term", pos);

    if (body == "1") {
      if (have_intercept) parse_fail("duplicate intercept", pos);
      have_intercept = true;
      TermSpec t;
      t.kind = TermKind::intercept;
      t.label = "(Intercept)";
      t.position = pos;
      f.terms.push_back(t);
      continue;
    }

    const auto paren = body.find('(');
    if (paren == std::string::npos) {
      if (!std::all_of(body.begin(), body.end(), is_ident_char)) {
        parse_fail("bad term '" + body + "'", pos);
      }
      TermSpec t;
      t.kind = TermKind::main;
      t.covariate = body;
      t.label = body;
      t.position = pos;
      f.terms.push_back(t);
      continue;
    }
    if (body.back() != ')') parse_fail("missing ')' in '" + body + "'", pos);
    const std::string fn = trim(body.substr(0, paren));
    const std::string args = body.substr(paren + 1, body.size() - paren - 2);
    f.terms.push_back(parse_call(fn, args, pos));
  }

  if (!have_intercept) {
    parse_fail("model needs an explicit intercept term '1'", tilde + 1);
  }
  return f;
}

}  // namespace pgam
