#include "rb2/logic.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace rb2 {

TypeId Schema::add_type(const std::string& name) {
  auto it = type_ids_.find(name);
  if (it != type_ids_.end()) return it->second;
  TypeId id = static_cast<TypeId>(type_names_.size());
  type_names_.push_back(name);
  type_ids_.emplace(name, id);
  by_type_.emplace_back();
  return id;
}

std::optional<TypeId> Schema::find_type(const std::string& name) const {
  auto it = type_ids_.find(name);
  if (it == type_ids_.end()) return std::nullopt;
  return it->second;
}

PredId Schema::add_predicate(const std::string& name, std::vector<TypeId> arg_types) {
  if (arg_types.empty()) throw ValidationError("predicate '" + name + "' must have arity >= 1");
  auto it = pred_ids_.find(name);
  if (it != pred_ids_.end()) {
    const PredicateSignature& sig = preds_[it->second];
    if (sig.arg_types != arg_types)
      throw ValidationError("predicate '" + name + "' redeclared with a different signature");
    return it->second;
  }
  PredId id = static_cast<PredId>(preds_.size());
  preds_.push_back({name, std::move(arg_types)});
  pred_ids_.emplace(name, id);
  return id;
}

std::optional<PredId> Schema::find_predicate(const std::string& name) const {
  auto it = pred_ids_.find(name);
  if (it == pred_ids_.end()) return std::nullopt;
  return it->second;
}

ConstId Schema::add_constant(const std::string& symbol, TypeId type) {
  auto it = const_ids_.find(symbol);
  if (it != const_ids_.end()) {
    if (const_types_[it->second] != type)
      throw ValidationError("constant '" + symbol + "' used with two types: '" +
                            type_name(const_types_[it->second]) + "' and '" + type_name(type) +
                            "'");
    return it->second;
  }
  ConstId id = static_cast<ConstId>(const_names_.size());
  const_names_.push_back(symbol);
  const_types_.push_back(type);
  const_ids_.emplace(symbol, id);
  by_type_.at(type).push_back(id);
  return id;
}

std::optional<ConstId> Schema::find_constant(const std::string& symbol) const {
  auto it = const_ids_.find(symbol);
  if (it == const_ids_.end()) return std::nullopt;
  return it->second;
}

Atom GroundAtom::as_atom() const {
  Atom a;
  a.pred = pred;
  a.args.reserve(args.size());
  for (ConstId c : args) a.args.push_back(Term::constant(c));
  return a;
}

VarId Conjunction::max_var() const {
  VarId m = -1;
  for (const Atom& a : atoms)
    for (const Term& t : a.args)
      if (t.is_var()) m = std::max(m, t.id);
  return m;
}

FactStore::FactStore(std::shared_ptr<const Schema> schema) : schema_(std::move(schema)) {
  preds_.resize(schema_->num_predicates());
  for (PredId p = 0; p < schema_->num_predicates(); ++p)
    preds_[p].index.resize(schema_->pred(p).arity());
}

void FactStore::validate(const GroundAtom& fact) const {
  if (fact.pred < 0 || fact.pred >= static_cast<PredId>(preds_.size()))
    throw SchemaError("unknown predicate id " + std::to_string(fact.pred));
  const PredicateSignature& sig = schema_->pred(fact.pred);
  if (static_cast<int>(fact.args.size()) != sig.arity())
    throw ValidationError("arity mismatch for '" + sig.name + "': got " +
                          std::to_string(fact.args.size()) + ", declared " +
                          std::to_string(sig.arity()));
  for (size_t i = 0; i < fact.args.size(); ++i) {
    ConstId c = fact.args[i];
    if (c < 0 || c >= schema_->num_constants())
      throw ValidationError("unknown constant id in fact for '" + sig.name + "'");
    if (schema_->constant_type(c) != sig.arg_types[i])
      throw ValidationError("type mismatch at position " + std::to_string(i) + " of '" +
                            sig.name + "': constant '" + schema_->constant_name(c) + "' has type '" +
                            schema_->type_name(schema_->constant_type(c)) + "', expected '" +
                            schema_->type_name(sig.arg_types[i]) + "'");
  }
}

size_t FactStore::add_facts(std::span<const GroundAtom> facts) {
  for (const GroundAtom& f : facts) validate(f);
  size_t inserted = 0;
  for (const GroundAtom& f : facts) {
    PredData& pd = preds_[f.pred];
    if (!pd.set.insert(f).second) continue;
    uint32_t idx = static_cast<uint32_t>(pd.facts.size());
    pd.facts.push_back(f);
    for (size_t pos = 0; pos < f.args.size(); ++pos)
      pd.index[pos][f.args[pos]].push_back(idx);
    ++inserted;
    ++size_;
  }
  if (inserted > 0) ++revision_;
  return inserted;
}

bool FactStore::contains(const GroundAtom& fact) const {
  if (fact.pred < 0 || fact.pred >= static_cast<PredId>(preds_.size())) return false;
  return preds_[fact.pred].set.contains(fact);
}

const std::vector<GroundAtom>& FactStore::facts(PredId p) const { return preds_.at(p).facts; }

std::span<const uint32_t> FactStore::lookup(PredId p, int pos, ConstId c) const {
  const auto& m = preds_.at(p).index.at(pos);
  auto it = m.find(c);
  if (it == m.end()) return {};
  return it->second;
}

std::vector<ConstId> FactStore::constants_by_frequency(TypeId t, size_t cap) const {
  std::unordered_map<ConstId, size_t> freq;
  for (PredId p = 0; p < static_cast<PredId>(preds_.size()); ++p) {
    const PredicateSignature& sig = schema_->pred(p);
    for (int pos = 0; pos < sig.arity(); ++pos) {
      if (sig.arg_types[pos] != t) continue;
      for (const auto& [c, idxs] : preds_[p].index[pos]) freq[c] += idxs.size();
    }
  }
  std::vector<std::pair<ConstId, size_t>> order(freq.begin(), freq.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (order.size() > cap) order.resize(cap);
  std::vector<ConstId> out;
  out.reserve(order.size());
  for (const auto& [c, n] : order) out.push_back(c);
  return out;
}

namespace {

// Attempt to unify `atom` (under theta) with `fact`; on success records the
// newly bound variables in `undo` and returns true.
bool unify_with_fact(const Atom& atom, const GroundAtom& fact, Substitution& theta,
                     std::vector<VarId>& undo) {
  size_t undo_mark = undo.size();
  bool ok = true;
  for (size_t i = 0; ok && i < atom.args.size(); ++i) {
    const Term& t = atom.args[i];
    ConstId fc = fact.args[i];
    if (t.is_const()) {
      ok = (t.id == fc);
    } else {
      ConstId b = theta.lookup(t.id);
      if (b == kUnbound) {
        theta.bind(t.id, fc);
        undo.push_back(t.id);
      } else {
        ok = (b == fc);
      }
    }
  }
  if (!ok) {
    while (undo.size() > undo_mark) {
      theta.unbind(undo.back());
      undo.pop_back();
    }
  }
  return ok;
}

// Candidate facts for `atom` given current bindings: the narrowest
// position index among bound positions, else the whole predicate list.
// Returns nullptr and fills `via_index` when an index span is used.
const std::vector<GroundAtom>* candidate_facts(const Atom& atom, const Substitution& theta,
                                               const FactStore& store,
                                               std::span<const uint32_t>& via_index,
                                               bool& use_index) {
  use_index = false;
  size_t best = std::numeric_limits<size_t>::max();
  for (size_t i = 0; i < atom.args.size(); ++i) {
    const Term& t = atom.args[i];
    ConstId c = kUnbound;
    if (t.is_const())
      c = t.id;
    else if (theta.bound(t.id))
      c = theta.lookup(t.id);
    if (c == kUnbound) continue;
    auto span = store.lookup(atom.pred, static_cast<int>(i), c);
    if (span.size() < best) {
      best = span.size();
      via_index = span;
      use_index = true;
    }
  }
  return &store.facts(atom.pred);
}

bool match_impl(const Atom& atom, Substitution& theta, const FactStore& store,
                const std::function<bool(const Substitution&)>& fn) {
  std::span<const uint32_t> span;
  bool use_index = false;
  const std::vector<GroundAtom>* all = candidate_facts(atom, theta, store, span, use_index);
  std::vector<VarId> undo;
  auto try_fact = [&](const GroundAtom& f) -> bool {
    undo.clear();
    if (!unify_with_fact(atom, f, theta, undo)) return true;
    bool cont = fn(theta);
    for (VarId v : undo) theta.unbind(v);
    return cont;
  };
  if (use_index) {
    for (uint32_t idx : span)
      if (!try_fact((*all)[idx])) return false;
  } else {
    for (const GroundAtom& f : *all)
      if (!try_fact(f)) return false;
  }
  return true;
}

bool satisfies_from(const Conjunction& conj, size_t lit, Substitution& theta,
                    const FactStore& store) {
  if (lit == conj.atoms.size()) return true;
  bool found = false;
  match_impl(conj.atoms[lit], theta, store, [&](const Substitution&) {
    if (satisfies_from(conj, lit + 1, theta, store)) {
      found = true;
      return false;  // short-circuit on first witness
    }
    return true;
  });
  return found;
}

void count_from(const Conjunction& conj, size_t lit, Substitution& theta, const FactStore& store,
                long& count) {
  if (lit == conj.atoms.size()) {
    ++count;
    return;
  }
  match_impl(conj.atoms[lit], theta, store, [&](const Substitution&) {
    count_from(conj, lit + 1, theta, store, count);
    return true;
  });
}

}  // namespace

bool for_each_match(const Atom& atom, Substitution& theta, const FactStore& store,
                    const std::function<bool(const Substitution&)>& fn) {
  VarId m = -1;
  for (const Term& t : atom.args)
    if (t.is_var()) m = std::max(m, t.id);
  theta.ensure_size(static_cast<size_t>(m + 1));
  return match_impl(atom, theta, store, fn);
}

std::vector<Substitution> match(const Atom& atom, const Substitution& theta,
                                const FactStore& store) {
  Substitution work = theta;
  std::vector<Substitution> out;
  for_each_match(atom, work, store, [&](const Substitution& s) {
    out.push_back(s);
    return true;
  });
  return out;
}

bool satisfies(const Conjunction& conj, const Substitution& theta, const FactStore& store) {
  Substitution work = theta;
  work.ensure_size(static_cast<size_t>(conj.max_var() + 1));
  return satisfies_from(conj, 0, work, store);
}

long count_groundings(const Conjunction& conj, const Substitution& theta,
                      const FactStore& store) {
  Substitution work = theta;
  work.ensure_size(static_cast<size_t>(conj.max_var() + 1));
  long count = 0;
  count_from(conj, 0, work, store, count);
  return count;
}

namespace {
std::string term_str(const Term& t, const Schema& schema) {
  if (t.is_const()) return schema.constant_name(t.id);
  // Query variables print as A,B,C...; later variables as V<k>.
  if (t.id < 26) return std::string(1, static_cast<char>('A' + t.id));
  return "V" + std::to_string(t.id);
}
}  // namespace

std::string to_string(const Atom& atom, const Schema& schema) {
  std::ostringstream os;
  os << schema.pred(atom.pred).name << '(';
  for (size_t i = 0; i < atom.args.size(); ++i) {
    if (i) os << ',';
    os << term_str(atom.args[i], schema);
  }
  os << ')';
  return os.str();
}

std::string to_string(const GroundAtom& atom, const Schema& schema) {
  return to_string(atom.as_atom(), schema);
}

std::string to_string(const Conjunction& conj, const Schema& schema) {
  std::ostringstream os;
  for (size_t i = 0; i < conj.atoms.size(); ++i) {
    if (i) os << ", ";
    os << to_string(conj.atoms[i], schema);
  }
  return os.str();
}

}  // namespace rb2
