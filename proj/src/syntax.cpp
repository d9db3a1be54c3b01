#include "qinv/syntax.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace qinv {

// ---------------------------------------------------------------------------
// Reader

namespace {

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  std::vector<SExpr> read_all() {
    std::vector<SExpr> out;
    for (;;) {
      skip();
      if (pos_ >= text_.size()) break;
      out.push_back(read());
    }
    return out;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  SExpr read() {
    skip();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", line_, col_);
    SExpr e;
    e.line = line_;
    e.col = col_;
    char c = text_[pos_];
    if (c == ')') throw ParseError("unexpected ')'", line_, col_);
    if (c == '(') {
      e.is_atom = false;
      advance();
      for (;;) {
        skip();
        if (pos_ >= text_.size()) throw ParseError("unclosed '('", e.line, e.col);
        if (text_[pos_] == ')') {
          advance();
          break;
        }
        e.list.push_back(read());
      }
      return e;
    }
    std::size_t start = pos_;
    while (pos_ < text_.size()) {
      char d = text_[pos_];
      if (d == '(' || d == ')' || d == ';' || std::isspace(static_cast<unsigned char>(d))) break;
      advance();
    }
    e.atom = std::string(text_.substr(start, pos_ - start));
    return e;
  }
};

const std::set<std::string>& keywords() {
  static const std::set<std::string> k = {"and", "or", "not", "=>", "=", "forall", "exists",
                                          "true", "false"};
  return k;
}

ParseError error_at(const SExpr& e, const std::string& msg) { return ParseError(msg, e.line, e.col); }

bool is_primed(const std::string& s) { return !s.empty() && s.back() == '\''; }

// ---------------------------------------------------------------------------
// Formula parsing

class FormulaParser {
 public:
  explicit FormulaParser(const Signature& sig) : sig_(sig) {}

  FormulaPtr formula(const SExpr& e) {
    if (e.is_atom) {
      if (e.atom == "true") return truth();
      if (e.atom == "false") return falsity();
      auto id = symbol(e, e.atom);
      if (!id || sig_.symbol(*id).kind != SymbolKind::Relation || !sig_.symbol(*id).args.empty())
        throw error_at(e, "expected a formula, got '" + e.atom + "'");
      return rel(e.atom);
    }
    if (e.list.empty()) throw error_at(e, "empty form");
    const SExpr& head = e.list[0];
    if (!head.is_atom) throw error_at(head, "expected an operator");
    const std::string& op = head.atom;
    auto args = [&](std::size_t from) {
      std::vector<FormulaPtr> out;
      for (std::size_t i = from; i < e.list.size(); ++i) out.push_back(formula(e.list[i]));
      return out;
    };
    auto arity = [&](std::size_t n) {
      if (e.list.size() != n + 1)
        throw error_at(e, "'" + op + "' expects " + std::to_string(n) + " argument(s)");
    };
    if (op == "and") return conj(args(1));
    if (op == "or") return disj(args(1));
    if (op == "not") {
      arity(1);
      return negate(formula(e.list[1]));
    }
    if (op == "=>") {
      arity(2);
      return implies(formula(e.list[1]), formula(e.list[2]));
    }
    if (op == "=") {
      arity(2);
      if (looks_like_formula(e.list[1]))
        return iff(formula(e.list[1]), formula(e.list[2]));
      TermPtr a = term(e.list[1]);
      TermPtr b = term(e.list[2]);
      return equals(std::move(a), std::move(b));
    }
    if (op == "forall" || op == "exists") {
      arity(2);
      const SExpr& binders = e.list[1];
      if (binders.is_atom || binders.list.empty()) throw error_at(binders, "expected ((var sort)+)");
      std::vector<VarDecl> vars;
      std::size_t mark = scope_.size();
      for (const auto& b : binders.list) {
        if (b.is_atom || b.list.size() != 2 || !b.list[0].is_atom || !b.list[1].is_atom)
          throw error_at(b, "expected (var sort)");
        const std::string& name = b.list[0].atom;
        if (keywords().count(name) || is_primed(name)) throw error_at(b, "bad variable name '" + name + "'");
        auto sort = sig_.find_sort(b.list[1].atom);
        if (!sort) throw error_at(b.list[1], "undeclared sort '" + b.list[1].atom + "'");
        vars.push_back({name, b.list[1].atom});
        scope_.emplace_back(name, *sort);
      }
      FormulaPtr body = formula(e.list[2]);
      scope_.resize(mark);
      return op == "forall" ? forall(std::move(vars), body) : exists(std::move(vars), body);
    }
    auto id = symbol(head, op);
    if (!id) throw error_at(head, "unknown relation '" + op + "'");
    if (sig_.symbol(*id).kind != SymbolKind::Relation)
      throw error_at(head, "'" + op + "' is not a relation");
    std::vector<TermPtr> ts;
    for (std::size_t i = 1; i < e.list.size(); ++i) ts.push_back(term(e.list[i]));
    return rel(op, std::move(ts));
  }

  TermPtr term(const SExpr& e) {
    if (e.is_atom) {
      for (auto it = scope_.rbegin(); it != scope_.rend(); ++it)
        if (it->first == e.atom) return var(e.atom);
      auto id = symbol(e, e.atom);
      if (!id) throw error_at(e, "unknown identifier '" + e.atom + "'");
      if (sig_.symbol(*id).kind != SymbolKind::Constant)
        throw error_at(e, "'" + e.atom + "' is not a constant");
      return app(e.atom);
    }
    if (e.list.empty() || !e.list[0].is_atom) throw error_at(e, "expected a term");
    const std::string& f = e.list[0].atom;
    auto id = symbol(e.list[0], f);
    if (!id) throw error_at(e.list[0], "unknown function '" + f + "'");
    if (sig_.symbol(*id).kind != SymbolKind::Function) throw error_at(e.list[0], "'" + f + "' is not a function");
    std::vector<TermPtr> args;
    for (std::size_t i = 1; i < e.list.size(); ++i) args.push_back(term(e.list[i]));
    return app(f, std::move(args));
  }

 private:
  const Signature& sig_;
  std::vector<std::pair<std::string, SortId>> scope_;

  std::optional<SymbolId> symbol(const SExpr& at, const std::string& name) {
    if (is_primed(name) && !sig_.is_doubled())
      throw error_at(at, "primed symbol '" + name + "' is only allowed inside a transition");
    return sig_.find_symbol(name);
  }

  bool looks_like_formula(const SExpr& e) {
    if (e.is_atom) {
      if (e.atom == "true" || e.atom == "false") return true;
      for (const auto& [name, sort] : scope_)
        if (name == e.atom) return false;
      auto id = sig_.find_symbol(e.atom);
      return id && sig_.symbol(*id).kind == SymbolKind::Relation;
    }
    if (e.list.empty() || !e.list[0].is_atom) return false;
    const std::string& op = e.list[0].atom;
    if (keywords().count(op)) return true;
    auto id = sig_.find_symbol(op);
    return id && sig_.symbol(*id).kind == SymbolKind::Relation;
  }
};

bool parse_mutability(const SExpr& e) {
  if (!e.is_atom || (e.atom != "mutable" && e.atom != "immutable"))
    throw error_at(e, "expected 'mutable' or 'immutable'");
  return e.atom == "mutable";
}

const std::string& atom_of(const SExpr& e, const char* what) {
  if (!e.is_atom) throw error_at(e, std::string("expected ") + what);
  return e.atom;
}

FormulaPtr checked(const SExpr& e, const Signature& sig) {
  FormulaParser p(sig);
  FormulaPtr f = p.formula(e);
  sort_check(*f, sig);
  return f;
}

}  // namespace

std::vector<SExpr> read_sexprs(std::string_view text) { return Reader(text).read_all(); }

// ---------------------------------------------------------------------------
// Systems

namespace {

FormulaPtr conj_or_single(const std::vector<FormulaPtr>& fs) {
  if (fs.size() == 1) return fs[0];
  return conj(fs);
}

}  // namespace

FormulaPtr TransitionSystem::tr() const {
  std::vector<FormulaPtr> ts;
  for (const auto& t : transitions) ts.push_back(t.formula);
  if (ts.size() == 1) return ts[0];
  return disj(std::move(ts));
}

FormulaPtr TransitionSystem::ax() const { return conj_or_single(axioms); }
FormulaPtr TransitionSystem::ax_primed() const { return prime(ax(), *sig); }
FormulaPtr TransitionSystem::init() const { return conj_or_single(inits); }
FormulaPtr TransitionSystem::safe() const { return conj_or_single(safeties); }

TransitionSystem parse_system(std::string_view text, std::string name) {
  std::vector<SExpr> forms = read_sexprs(text);
  TransitionSystem sys;
  sys.name = std::move(name);
  {
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      auto p = line.find_first_not_of(" \t");
      if (p != std::string::npos && line[p] == ';') sys.comments.push_back(line.substr(p));
    }
  }
  auto sig = std::make_shared<Signature>();
  auto head = [](const SExpr& f) -> const std::string& {
    if (f.is_atom || f.list.empty() || !f.list[0].is_atom) throw error_at(f, "expected a declaration");
    return f.list[0].atom;
  };
  auto check_name = [](const SExpr& at, const std::string& n) {
    if (keywords().count(n) || is_primed(n) || n.empty()) throw error_at(at, "bad name '" + n + "'");
  };

  for (const auto& f : forms) {
    if (head(f) != "sort") continue;
    if (f.list.size() != 2) throw error_at(f, "expected (sort NAME)");
    const std::string& n = atom_of(f.list[1], "a sort name");
    check_name(f.list[1], n);
    if (sig->find_sort(n)) throw error_at(f, "duplicate sort '" + n + "'");
    sig->add_sort(n);
  }
  auto sort_ref = [&](const SExpr& e) {
    const std::string& n = atom_of(e, "a sort name");
    auto s = sig->find_sort(n);
    if (!s) throw error_at(e, "undeclared sort '" + n + "'");
    return *s;
  };
  auto sort_list = [&](const SExpr& e) {
    if (e.is_atom) throw error_at(e, "expected a list of sorts");
    std::vector<SortId> out;
    for (const auto& s : e.list) out.push_back(sort_ref(s));
    return out;
  };
  for (const auto& f : forms) {
    const std::string& h = head(f);
    if (h != "constant" && h != "relation" && h != "function") continue;
    Symbol sym;
    if (f.list.size() < 2) throw error_at(f, "missing symbol name");
    sym.name = atom_of(f.list[1], "a symbol name");
    check_name(f.list[1], sym.name);
    if (h == "constant") {
      if (f.list.size() != 4) throw error_at(f, "expected (constant NAME SORT mutable|immutable)");
      sym.kind = SymbolKind::Constant;
      sym.result = sort_ref(f.list[2]);
      sym.is_mutable = parse_mutability(f.list[3]);
    } else if (h == "relation") {
      if (f.list.size() != 4) throw error_at(f, "expected (relation NAME (SORT*) mutable|immutable)");
      sym.kind = SymbolKind::Relation;
      sym.args = sort_list(f.list[2]);
      sym.is_mutable = parse_mutability(f.list[3]);
    } else {
      if (f.list.size() != 5) throw error_at(f, "expected (function NAME (SORT+) SORT mutable|immutable)");
      sym.kind = SymbolKind::Function;
      sym.args = sort_list(f.list[2]);
      if (sym.args.empty()) throw error_at(f.list[2], "functions need at least one argument");
      sym.result = sort_ref(f.list[3]);
      sym.is_mutable = parse_mutability(f.list[4]);
    }
    if (sig->find_symbol(sym.name) || sig->find_sort(sym.name))
      throw error_at(f, "duplicate name '" + sym.name + "'");
    sig->add_symbol(std::move(sym));
  }
  sys.sig = sig;
  sys.sig2 = make_doubled(sig);

  for (const auto& f : forms) {
    const std::string& h = head(f);
    if (h == "sort" || h == "constant" || h == "relation" || h == "function") continue;
    if (h == "axiom" || h == "init" || h == "safety") {
      if (f.list.size() != 2) throw error_at(f, "expected (" + h + " F)");
      FormulaPtr g = checked(f.list[1], *sys.sig);
      (h == "axiom" ? sys.axioms : h == "init" ? sys.inits : sys.safeties).push_back(g);
    } else if (h == "transition") {
      if (f.list.size() != 3) throw error_at(f, "expected (transition NAME F)");
      sys.transitions.push_back({atom_of(f.list[1], "a transition name"), checked(f.list[2], *sys.sig2)});
    } else if (h == "epr-edge") {
      if (f.list.size() != 3) throw error_at(f, "expected (epr-edge SORT SORT)");
      sys.epr_edges.emplace_back(sort_ref(f.list[1]), sort_ref(f.list[2]));
    } else {
      throw error_at(f, "unknown declaration '" + h + "'");
    }
  }
  if (sys.transitions.empty()) throw ParseError("system has no transitions", 1, 1);
  return sys;
}

TransitionSystem load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string name = path;
  if (auto p = name.find_last_of('/'); p != std::string::npos) name = name.substr(p + 1);
  if (auto p = name.rfind(".fol"); p != std::string::npos) name = name.substr(0, p);
  return parse_system(ss.str(), name);
}

FormulaPtr parse_formula(const SExpr& e, const Signature& sig) { return checked(e, sig); }

FormulaPtr parse_formula(std::string_view text, const Signature& sig) {
  auto forms = read_sexprs(text);
  if (forms.size() != 1) throw ParseError("expected exactly one formula", 1, 1);
  return checked(forms[0], sig);
}

std::vector<FormulaPtr> parse_formula_list(std::string_view text, const Signature& sig) {
  std::vector<FormulaPtr> out;
  for (const auto& e : read_sexprs(text)) {
    if (!e.is_atom && e.list.size() == 2 && e.list[0].is_atom && e.list[0].atom == "invariant")
      out.push_back(checked(e.list[1], sig));
    else
      out.push_back(checked(e, sig));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Printer

std::string print_term(const Term& t) {
  if (t.kind == Term::Kind::Var || t.args.empty()) return t.name;
  std::string s = "(" + t.name;
  for (const auto& a : t.args) s += " " + print_term(*a);
  return s + ")";
}

namespace {

void print(const Formula& f, std::string& out) {
  auto kids = [&](const char* op) {
    out += "(";
    out += op;
    for (const auto& k : f.kids) {
      out += " ";
      print(*k, out);
    }
    out += ")";
  };
  switch (f.kind) {
    case Formula::Kind::And:
      return kids("and");
    case Formula::Kind::Or:
      return kids("or");
    case Formula::Kind::Not:
      return kids("not");
    case Formula::Kind::Implies:
      return kids("=>");
    case Formula::Kind::Iff:
      return kids("=");
    case Formula::Kind::Eq:
      out += "(= " + print_term(*f.terms[0]) + " " + print_term(*f.terms[1]) + ")";
      return;
    case Formula::Kind::Rel:
      if (f.terms.empty()) {
        out += f.name;
        return;
      }
      out += "(" + f.name;
      for (const auto& t : f.terms) out += " " + print_term(*t);
      out += ")";
      return;
    case Formula::Kind::Forall:
    case Formula::Kind::Exists:
      out += f.kind == Formula::Kind::Forall ? "(forall (" : "(exists (";
      for (std::size_t i = 0; i < f.vars.size(); ++i) {
        if (i) out += " ";
        out += "(" + f.vars[i].name + " " + f.vars[i].sort + ")";
      }
      out += ") ";
      print(*f.kids[0], out);
      out += ")";
      return;
  }
}

}  // namespace

std::string print_formula(const Formula& f) {
  std::string out;
  print(f, out);
  return out;
}

}  // namespace qinv
