#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace rb2 {

using PredId = int32_t;
using TypeId = int32_t;
using ConstId = int32_t;
using VarId = int32_t;

inline constexpr ConstId kUnbound = -1;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Unknown predicate / undeclared symbol.
struct SchemaError : Error {
  using Error::Error;
};
// Arity or type mismatch on otherwise known symbols.
struct ValidationError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
// API misuse (e.g. evaluating a tree on the wrong predicate).
struct UsageError : Error {
  using Error::Error;
};

struct PredicateSignature {
  std::string name;
  std::vector<TypeId> arg_types;
  int arity() const { return static_cast<int>(arg_types.size()); }
};

/// Interning table for types, predicates and constants. Constants carry
/// exactly one type; re-declaring a constant under a different type is a
/// ValidationError.
class Schema {
 public:
  TypeId add_type(const std::string& name);
  std::optional<TypeId> find_type(const std::string& name) const;
  const std::string& type_name(TypeId t) const { return type_names_.at(t); }
  int num_types() const { return static_cast<int>(type_names_.size()); }

  PredId add_predicate(const std::string& name, std::vector<TypeId> arg_types);
  std::optional<PredId> find_predicate(const std::string& name) const;
  const PredicateSignature& pred(PredId p) const { return preds_.at(p); }
  int num_predicates() const { return static_cast<int>(preds_.size()); }

  ConstId add_constant(const std::string& symbol, TypeId type);
  std::optional<ConstId> find_constant(const std::string& symbol) const;
  const std::string& constant_name(ConstId c) const { return const_names_.at(c); }
  TypeId constant_type(ConstId c) const { return const_types_.at(c); }
  int num_constants() const { return static_cast<int>(const_names_.size()); }
  const std::vector<ConstId>& constants_of_type(TypeId t) const { return by_type_.at(t); }

 private:
  std::vector<std::string> type_names_;
  std::unordered_map<std::string, TypeId> type_ids_;
  std::vector<PredicateSignature> preds_;
  std::unordered_map<std::string, PredId> pred_ids_;
  std::vector<std::string> const_names_;
  std::vector<TypeId> const_types_;
  std::unordered_map<std::string, ConstId> const_ids_;
  std::vector<std::vector<ConstId>> by_type_;
};

/// Either a constant or a logical variable. Variables are small integers
/// scoped to the conjunction/tree that owns them.
struct Term {
  enum class Kind : uint8_t { kConstant, kVariable };
  Kind kind;
  int32_t id;

  static Term constant(ConstId c) { return {Kind::kConstant, c}; }
  static Term variable(VarId v) { return {Kind::kVariable, v}; }
  bool is_var() const { return kind == Kind::kVariable; }
  bool is_const() const { return kind == Kind::kConstant; }
  friend bool operator==(const Term& a, const Term& b) {
    return a.kind == b.kind && a.id == b.id;
  }
};

struct Atom {
  PredId pred;
  std::vector<Term> args;
  friend bool operator==(const Atom& a, const Atom& b) {
    return a.pred == b.pred && a.args == b.args;
  }
};

struct GroundAtom {
  PredId pred;
  std::vector<ConstId> args;
  friend bool operator==(const GroundAtom& a, const GroundAtom& b) {
    return a.pred == b.pred && a.args == b.args;
  }
  Atom as_atom() const;
};

struct GroundAtomHash {
  size_t operator()(const GroundAtom& g) const {
    size_t h = std::hash<int32_t>()(g.pred);
    for (ConstId c : g.args) h = h * 1000003u + static_cast<size_t>(c) + 0x9e3779b9;
    return h;
  }
};

/// Ordered list of positive literals. Variable ids index into the owning
/// scope's substitution.
struct Conjunction {
  std::vector<Atom> atoms;
  bool empty() const { return atoms.empty(); }
  VarId max_var() const;  // -1 when no variables occur
  friend bool operator==(const Conjunction& a, const Conjunction& b) {
    return a.atoms == b.atoms;
  }
};

/// Dense variable binding map. A variable is bound at most once; bind()
/// refuses to rebind to a different constant.
class Substitution {
 public:
  Substitution() = default;
  explicit Substitution(size_t num_vars) : bind_(num_vars, kUnbound) {}

  size_t size() const { return bind_.size(); }
  void ensure_size(size_t n) {
    if (bind_.size() < n) bind_.resize(n, kUnbound);
  }
  bool bound(VarId v) const {
    return v >= 0 && static_cast<size_t>(v) < bind_.size() && bind_[v] != kUnbound;
  }
  ConstId lookup(VarId v) const { return bound(v) ? bind_[v] : kUnbound; }
  bool bind(VarId v, ConstId c) {
    ensure_size(static_cast<size_t>(v) + 1);
    if (bind_[v] != kUnbound) return bind_[v] == c;
    bind_[v] = c;
    return true;
  }
  void unbind(VarId v) { bind_[v] = kUnbound; }

  friend bool operator==(const Substitution& a, const Substitution& b) {
    size_t n = std::max(a.bind_.size(), b.bind_.size());
    for (size_t i = 0; i < n; ++i) {
      ConstId ca = i < a.bind_.size() ? a.bind_[i] : kUnbound;
      ConstId cb = i < b.bind_.size() ? b.bind_[i] : kUnbound;
      if (ca != cb) return false;
    }
    return true;
  }

 private:
  std::vector<ConstId> bind_;
};

/// Indexed set of ground atoms (the background knowledge B). Lookups go
/// through a per-predicate list plus a (predicate, position, constant)
/// index. One writer or many readers; the revision counter tags snapshots.
class FactStore {
 public:
  explicit FactStore(std::shared_ptr<const Schema> schema);

  const Schema& schema() const { return *schema_; }
  std::shared_ptr<const Schema> schema_ptr() const { return schema_; }

  /// Inserts well-typed facts; duplicates are ignored. Returns the number
  /// actually inserted. The revision bumps only when the set changed.
  size_t add_facts(std::span<const GroundAtom> facts);
  size_t add_fact(const GroundAtom& fact) { return add_facts({&fact, 1}); }

  bool contains(const GroundAtom& fact) const;
  size_t size() const { return size_; }
  uint64_t revision() const { return revision_; }

  const std::vector<GroundAtom>& facts(PredId p) const;
  /// Fact indices (into facts(p)) whose argument at `pos` equals `c`.
  std::span<const uint32_t> lookup(PredId p, int pos, ConstId c) const;

  /// Constants of the given type observed anywhere in the store, most
  /// frequent first (ties by constant id). Used for `#` mode expansion.
  std::vector<ConstId> constants_by_frequency(TypeId t, size_t cap) const;

  void validate(const GroundAtom& fact) const;

 private:
  struct PredData {
    std::vector<GroundAtom> facts;
    std::unordered_set<GroundAtom, GroundAtomHash> set;
    // one map per argument position
    std::vector<std::unordered_map<ConstId, std::vector<uint32_t>>> index;
  };
  std::shared_ptr<const Schema> schema_;
  std::vector<PredData> preds_;
  size_t size_ = 0;
  uint64_t revision_ = 0;
};

/// Enumerates every extension of `theta` under which `atom` unifies with
/// some fact in `store`. `fn` returning false stops the enumeration early;
/// the return value is false iff stopped early.
bool for_each_match(const Atom& atom, Substitution& theta, const FactStore& store,
                    const std::function<bool(const Substitution&)>& fn);

std::vector<Substitution> match(const Atom& atom, const Substitution& theta,
                                const FactStore& store);

/// Existential satisfaction: true iff some extension of `theta` grounds
/// every literal of `conj` to a store fact. Short-circuits on the first
/// witness.
bool satisfies(const Conjunction& conj, const Substitution& theta, const FactStore& store);

/// Exact number of distinct satisfying substitutions over the free
/// variables of `conj`.
long count_groundings(const Conjunction& conj, const Substitution& theta,
                      const FactStore& store);

std::string to_string(const Atom& atom, const Schema& schema);
std::string to_string(const GroundAtom& atom, const Schema& schema);
std::string to_string(const Conjunction& conj, const Schema& schema);

}  // namespace rb2
