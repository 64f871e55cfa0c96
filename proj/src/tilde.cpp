#include "rb2/tilde.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace rb2 {

namespace {

Substitution query_binding(const GroundAtom& query) {
  Substitution theta(query.args.size());
  for (size_t i = 0; i < query.args.size(); ++i)
    theta.bind(static_cast<VarId>(i), query.args[i]);
  return theta;
}

Conjunction concat(const Conjunction& a, const Conjunction& b) {
  Conjunction out = a;
  out.atoms.insert(out.atoms.end(), b.atoms.begin(), b.atoms.end());
  return out;
}

}  // namespace

double RelationalTree::evaluate(const GroundAtom& query, const FactStore& store) const {
  if (query.pred != target_)
    throw UsageError("tree evaluated on predicate '" + store.schema().pred(query.pred).name +
                     "', trained for '" + store.schema().pred(target_).name + "'");
  if (nodes_.empty()) return 0.0;
  Substitution theta = query_binding(query);
  theta.ensure_size(static_cast<size_t>(num_vars_));
  Conjunction path;
  int cur = 0;
  while (!nodes_[cur].is_leaf()) {
    const TreeNode& n = nodes_[cur];
    Conjunction extended = concat(path, n.test);
    if (satisfies(extended, theta, store)) {
      path = std::move(extended);
      cur = n.yes;
    } else {
      cur = n.no;
    }
  }
  return nodes_[cur].value;
}

int RelationalTree::depth() const {
  if (nodes_.empty()) return 0;
  // depth = max number of inner nodes along a root-to-leaf path
  std::vector<int> d(nodes_.size(), 0);
  int best = 0;
  // nodes are created parent-before-child, so a forward pass works
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const TreeNode& n = nodes_[i];
    if (n.is_leaf()) {
      best = std::max(best, d[i]);
    } else {
      d[n.yes] = d[i] + 1;
      d[n.no] = d[i] + 1;
    }
  }
  return best;
}

size_t RelationalTree::num_leaves() const {
  size_t c = 0;
  for (const TreeNode& n : nodes_)
    if (n.is_leaf()) ++c;
  return c;
}

bool RelationalTree::mentions(PredId p) const {
  for (const TreeNode& n : nodes_)
    for (const Atom& a : n.test.atoms)
      if (a.pred == p) return true;
  return false;
}

namespace {

void pretty_rec(const RelationalTree& tree, int node, int indent, const Schema& schema,
                std::ostream& os) {
  std::string pad(static_cast<size_t>(indent) * 2, ' ');
  const TreeNode& n = tree.nodes()[node];
  if (n.is_leaf()) {
    os << pad << n.value << "  [n=" << n.n_examples << "]\n";
    return;
  }
  os << pad << "if " << to_string(n.test, schema) << " then\n";
  pretty_rec(tree, n.yes, indent + 1, schema, os);
  os << pad << "else\n";
  pretty_rec(tree, n.no, indent + 1, schema, os);
}

}  // namespace

std::string RelationalTree::pretty(const Schema& schema) const {
  std::ostringstream os;
  if (nodes_.empty()) {
    os << "0  [n=0]\n";
    return os.str();
  }
  os.precision(6);
  pretty_rec(*this, 0, 0, schema, os);
  return os.str();
}

namespace {

struct LiteralChoice {
  Atom atom;
  std::vector<TypeId> var_types;  // scope typing after adding this literal
  std::string key;
};

std::string literal_key(const Atom& a, const Schema& schema) {
  std::string k = schema.pred(a.pred).name;
  k += '(';
  for (size_t i = 0; i < a.args.size(); ++i) {
    if (i) k += ',';
    if (a.args[i].is_var())
      k += 'v' + std::to_string(a.args[i].id);
    else
      k += 'c' + schema.constant_name(a.args[i].id);
  }
  k += ')';
  return k;
}

// All instantiations of one mode declaration against the given scope.
std::vector<LiteralChoice> instantiate_mode(const ModeDeclaration& decl,
                                            const std::vector<TypeId>& var_types,
                                            const FactStore& store, const TreeParams& params) {
  const Schema& schema = store.schema();
  const PredicateSignature& sig = schema.pred(decl.pred);
  std::vector<std::vector<Term>> choices(sig.arity());
  std::vector<TypeId> fresh_types;
  for (int pos = 0; pos < sig.arity(); ++pos) {
    TypeId t = sig.arg_types[pos];
    switch (decl.position_modes[pos]) {
      case ArgMode::kInput:
        for (size_t v = 0; v < var_types.size(); ++v)
          if (var_types[v] == t) choices[pos].push_back(Term::variable(static_cast<VarId>(v)));
        break;
      case ArgMode::kOutput: {
        VarId fresh = static_cast<VarId>(var_types.size() + fresh_types.size());
        fresh_types.push_back(t);
        choices[pos].push_back(Term::variable(fresh));
        break;
      }
      case ArgMode::kConstant:
        for (ConstId c : store.constants_by_frequency(
                 t, static_cast<size_t>(params.candidate_constants_per_position)))
          choices[pos].push_back(Term::constant(c));
        break;
    }
    if (choices[pos].empty()) return {};
  }
  std::vector<LiteralChoice> out;
  std::vector<size_t> pick(sig.arity(), 0);
  for (;;) {
    Atom a;
    a.pred = decl.pred;
    for (int pos = 0; pos < sig.arity(); ++pos) a.args.push_back(choices[pos][pick[pos]]);
    LiteralChoice lc;
    lc.atom = a;
    lc.var_types = var_types;
    lc.var_types.insert(lc.var_types.end(), fresh_types.begin(), fresh_types.end());
    lc.key = literal_key(a, schema);
    out.push_back(std::move(lc));
    int pos = sig.arity() - 1;
    while (pos >= 0 && ++pick[pos] == choices[pos].size()) {
      pick[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return out;
}

bool contains_atom(const Conjunction& c, const Atom& a) {
  return std::find(c.atoms.begin(), c.atoms.end(), a) != c.atoms.end();
}

int occurrences_of(PredId p, const Conjunction& path, const Conjunction& cand) {
  int n = 0;
  for (const Atom& a : path.atoms) n += (a.pred == p);
  for (const Atom& a : cand.atoms) n += (a.pred == p);
  return n;
}

bool uses_var_in_range(const Atom& a, VarId lo, VarId hi) {
  for (const Term& t : a.args)
    if (t.is_var() && t.id >= lo && t.id < hi) return true;
  return false;
}

}  // namespace

std::vector<RefinementCandidate> refinements(const Conjunction& path,
                                             const std::vector<TypeId>& var_types,
                                             const ModeSet& modes, const FactStore& store,
                                             const TreeParams& params) {
  std::vector<RefinementCandidate> result;
  VarId base_scope = static_cast<VarId>(var_types.size());

  struct Partial {
    Conjunction lits;
    std::vector<TypeId> var_types;
    std::vector<std::string> keys;
  };
  std::vector<Partial> frontier;
  frontier.push_back({{}, var_types, {}});

  for (int len = 1; len <= params.max_literals_per_test; ++len) {
    std::vector<Partial> next;
    for (const Partial& p : frontier) {
      for (const ModeDeclaration& decl : modes.decls) {
        if (occurrences_of(decl.pred, path, p.lits) >= decl.max_occurrences) continue;
        for (LiteralChoice& lc : instantiate_mode(decl, p.var_types, store, params)) {
          if (contains_atom(path, lc.atom) || contains_atom(p.lits, lc.atom)) continue;
          // avoid permutation duplicates: a further literal must either chain
          // on a variable an earlier candidate literal introduced (ids in
          // [base_scope, current scope)) or advance in key order
          if (!p.lits.atoms.empty()) {
            bool chains =
                uses_var_in_range(lc.atom, base_scope, static_cast<VarId>(p.var_types.size()));
            if (!chains && lc.key <= p.keys.back()) continue;
          }
          Partial q;
          q.lits = p.lits;
          q.lits.atoms.push_back(lc.atom);
          q.var_types = lc.var_types;
          q.keys = p.keys;
          q.keys.push_back(lc.key);
          next.push_back(std::move(q));
        }
      }
    }
    for (const Partial& p : next) {
      RefinementCandidate c;
      c.literals = p.lits;
      c.var_types = p.var_types;
      std::string k;
      for (const std::string& s : p.keys) {
        k += s;
        k += ';';
      }
      c.sort_key = std::move(k);
      result.push_back(std::move(c));
    }
    frontier = std::move(next);
    if (frontier.empty()) break;
  }

  std::sort(result.begin(), result.end(), [](const RefinementCandidate& a,
                                             const RefinementCandidate& b) {
    if (a.literals.atoms.size() != b.literals.atoms.size())
      return a.literals.atoms.size() < b.literals.atoms.size();
    return a.sort_key < b.sort_key;
  });
  result.erase(std::unique(result.begin(), result.end(),
                           [](const RefinementCandidate& a, const RefinementCandidate& b) {
                             return a.sort_key == b.sort_key;
                           }),
               result.end());
  return result;
}

namespace {

// Weighted sum of squared errors about the weighted mean, from sufficient
// statistics. Equals W * Var_w.
double weighted_sse(std::span<const RegressionExample> examples,
                    std::span<const uint32_t> subset) {
  double sw = 0, swy = 0, swyy = 0;
  for (uint32_t i : subset) {
    const RegressionExample& e = examples[i];
    sw += e.weight;
    swy += e.weight * e.target;
    swyy += e.weight * e.target * e.target;
  }
  if (sw <= 0) return 0.0;
  double sse = swyy - swy * swy / sw;
  return std::max(0.0, sse);
}

double leaf_value(std::span<const RegressionExample> examples, std::span<const uint32_t> subset,
                  LeafRule rule) {
  if (rule == LeafRule::kWeightedMean) {
    double sw = 0, swy = 0;
    for (uint32_t i : subset) {
      sw += examples[i].weight;
      swy += examples[i].weight * examples[i].target;
    }
    return sw > 0 ? swy / sw : 0.0;
  }
  // gradient step: sum of gradients over summed |g|(1-|g|) curvature
  double num = 0, den = 0;
  for (uint32_t i : subset) {
    double g = examples[i].target;
    double w = examples[i].weight;
    num += w * g;
    den += w * std::fabs(g) * (1.0 - std::fabs(g));
  }
  den = std::max(den, 1e-6);
  return num / den;
}

}  // namespace

SplitScore score_split(const Conjunction& path, const Conjunction& candidate,
                       std::span<const RegressionExample> examples,
                       std::span<const uint32_t> subset, int min_examples_leaf) {
  SplitScore s;
  Conjunction combined = concat(path, candidate);
  for (uint32_t i : subset) {
    const RegressionExample& e = examples[i];
    Substitution theta = query_binding(e.query);
    if (satisfies(combined, theta, *e.store))
      s.true_idx.push_back(i);
    else
      s.false_idx.push_back(i);
  }
  s.weighted_variance_after =
      weighted_sse(examples, s.true_idx) + weighted_sse(examples, s.false_idx);
  s.feasible = s.true_idx.size() >= static_cast<size_t>(min_examples_leaf) &&
               s.false_idx.size() >= static_cast<size_t>(min_examples_leaf);
  return s;
}

namespace {

struct Builder {
  std::span<const RegressionExample> examples;
  const ModeSet* modes;
  const TreeParams* params;
  LeafRule leaf_rule;
  RelationalTree* tree;
  int max_var_seen = 0;

  int build(const std::vector<uint32_t>& subset, const Conjunction& path,
            const std::vector<TypeId>& var_types, int depth) {
    int self = static_cast<int>(tree->nodes().size());
    tree->nodes().emplace_back();
    double sse_before = weighted_sse(examples, subset);
    bool stop = depth >= params->max_depth ||
                subset.size() < 2 * static_cast<size_t>(params->min_examples_leaf) ||
                sse_before <= 1e-12;
    if (!stop) {
      const FactStore& store = *examples[subset.front()].store;
      auto candidates = refinements(path, var_types, *modes, store, *params);
      const RefinementCandidate* best = nullptr;
      SplitScore best_score;
      for (const RefinementCandidate& c : candidates) {
        SplitScore sc =
            score_split(path, c.literals, examples, subset, params->min_examples_leaf);
        if (!sc.feasible) continue;
        if (!best || sc.weighted_variance_after < best_score.weighted_variance_after) {
          best = &c;
          best_score = std::move(sc);
        }
      }
      if (best && best_score.weighted_variance_after < sse_before - 1e-12) {
        Conjunction extended = concat(path, best->literals);
        max_var_seen = std::max(max_var_seen, static_cast<int>(best->var_types.size()));
        Conjunction test = best->literals;
        std::vector<TypeId> yes_types = best->var_types;
        std::vector<uint32_t> t_idx = std::move(best_score.true_idx);
        std::vector<uint32_t> f_idx = std::move(best_score.false_idx);
        int yes = build(t_idx, extended, yes_types, depth + 1);
        int no = build(f_idx, path, var_types, depth + 1);
        TreeNode& n = tree->nodes()[self];
        n.test = std::move(test);
        n.yes = yes;
        n.no = no;
        n.n_examples = subset.size();
        return self;
      }
    }
    TreeNode& n = tree->nodes()[self];
    n.value = leaf_value(examples, subset, leaf_rule);
    n.n_examples = subset.size();
    return self;
  }
};

}  // namespace

RelationalTree learn_tree(std::span<const RegressionExample> examples, const ModeSet& modes,
                          const TreeParams& params, LeafRule leaf_rule) {
  if (examples.empty()) throw UsageError("learn_tree: no examples");
  PredId target = examples[0].query.pred;
  for (const RegressionExample& e : examples)
    if (e.query.pred != target) throw UsageError("learn_tree: mixed target predicates");
  const Schema& schema = examples[0].store->schema();
  const PredicateSignature& sig = schema.pred(target);

  RelationalTree tree(target, sig.arity());
  Builder b{examples, &modes, &params, leaf_rule, &tree, sig.arity()};
  std::vector<uint32_t> all(examples.size());
  for (uint32_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<TypeId> var_types = sig.arg_types;  // query variables 0..arity-1
  b.build(all, Conjunction{}, var_types, 0);
  tree.set_num_vars(b.max_var_seen);
  return tree;
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

ParsedModes parse_modes_file(std::istream& in, Schema& schema) {
  ParsedModes out;
  std::string line;
  std::string target_name;
  int target_arity = -1;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t cmt = line.find('%');
    if (cmt != std::string::npos) line = line.substr(0, cmt);
    line = trim(line);
    if (line.empty()) continue;
    auto err = [&](const std::string& msg) {
      throw ParseError("modes line " + std::to_string(lineno) + ": " + msg);
    };
    if (line.back() != '.') err("missing trailing '.'");
    line.pop_back();
    line = trim(line);
    if (line.rfind("target:", 0) == 0) {
      std::string rest = trim(line.substr(7));
      size_t slash = rest.find('/');
      if (slash == std::string::npos) err("expected 'target: pred/arity'");
      target_name = lower(trim(rest.substr(0, slash)));
      try {
        target_arity = std::stoi(rest.substr(slash + 1));
      } catch (const std::exception&) {
        err("bad target arity");
      }
      continue;
    }
    if (line.rfind("mode:", 0) != 0) err("expected 'mode:' or 'target:' declaration");
    std::string rest = trim(line.substr(5));
    // optional trailing max=N
    int max_occ = 2;
    size_t close = rest.rfind(')');
    if (close == std::string::npos) err("missing ')'");
    std::string suffix = trim(rest.substr(close + 1));
    if (!suffix.empty()) {
      if (suffix.rfind("max=", 0) != 0) err("unexpected trailing text '" + suffix + "'");
      try {
        max_occ = std::stoi(suffix.substr(4));
      } catch (const std::exception&) {
        err("bad max= value");
      }
      if (max_occ < 0) err("max= must be >= 0");
    }
    size_t open = rest.find('(');
    if (open == std::string::npos || open >= close) err("expected pred(modes)");
    std::string pname = lower(trim(rest.substr(0, open)));
    if (pname.empty()) err("empty predicate name");
    std::string args = rest.substr(open + 1, close - open - 1);
    std::vector<ArgMode> pmodes;
    std::vector<TypeId> ptypes;
    std::istringstream as(args);
    std::string tok;
    while (std::getline(as, tok, ',')) {
      tok = trim(tok);
      if (tok.size() < 2) err("bad argument mode '" + tok + "'");
      ArgMode m;
      switch (tok[0]) {
        case '+': m = ArgMode::kInput; break;
        case '-': m = ArgMode::kOutput; break;
        case '#': m = ArgMode::kConstant; break;
        default: err("argument mode must start with +, - or #"); m = ArgMode::kInput;
      }
      pmodes.push_back(m);
      ptypes.push_back(schema.add_type(lower(tok.substr(1))));
    }
    if (pmodes.empty()) err("predicate must have arity >= 1");
    PredId pid = schema.add_predicate(pname, ptypes);
    if (out.modes.find(pid)) err("duplicate mode for predicate '" + pname + "'");
    out.modes.decls.push_back({pid, std::move(pmodes), max_occ});
  }
  if (target_name.empty()) throw ParseError("modes file: missing 'target:' declaration");
  auto pid = schema.find_predicate(target_name);
  if (!pid)
    throw ParseError("modes file: target predicate '" + target_name + "' has no mode line");
  if (schema.pred(*pid).arity() != target_arity)
    throw ParseError("modes file: target arity mismatch for '" + target_name + "'");
  out.target = *pid;
  // the target predicate itself is never a refinement literal
  std::erase_if(out.modes.decls, [&](const ModeDeclaration& d) { return d.pred == out.target; });
  return out;
}

void write_modes_file(std::ostream& out, const ModeSet& modes, PredId target,
                      const Schema& schema) {
  auto write_decl = [&](PredId pred, const std::vector<ArgMode>* pmodes, int max_occ) {
    const PredicateSignature& sig = schema.pred(pred);
    out << "mode: " << sig.name << '(';
    for (int i = 0; i < sig.arity(); ++i) {
      if (i) out << ',';
      char m = '+';
      if (pmodes) {
        switch ((*pmodes)[i]) {
          case ArgMode::kInput: m = '+'; break;
          case ArgMode::kOutput: m = '-'; break;
          case ArgMode::kConstant: m = '#'; break;
        }
      }
      out << m << schema.type_name(sig.arg_types[i]);
    }
    out << ')';
    if (max_occ != 2) out << " max=" << max_occ;
    out << ".\n";
  };
  write_decl(target, nullptr, 2);
  for (const ModeDeclaration& d : modes.decls) write_decl(d.pred, &d.position_modes, d.max_occurrences);
  out << "target: " << schema.pred(target).name << '/' << schema.pred(target).arity() << ".\n";
}

}  // namespace rb2
