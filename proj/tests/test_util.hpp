// Shared fixtures for the unit tests: a tiny social-network schema plus
// literal/atom builders and random store generators.
#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rb2/logic.hpp"
#include "rb2/tilde.hpp"

namespace rb2::testutil {

struct SocialFixture {
  std::shared_ptr<Schema> schema = std::make_shared<Schema>();
  TypeId t_person;
  PredId p_friends, p_smokes, p_knows;
  std::vector<ConstId> people;

  explicit SocialFixture(int n_people = 8) {
    t_person = schema->add_type("person");
    p_friends = schema->add_predicate("friends", {t_person, t_person});
    p_smokes = schema->add_predicate("smokes", {t_person});
    p_knows = schema->add_predicate("knows", {t_person, t_person});
    for (int i = 0; i < n_people; ++i)
      people.push_back(schema->add_constant("p" + std::to_string(i), t_person));
  }

  GroundAtom friends(int a, int b) const { return {p_friends, {people[a], people[b]}}; }
  GroundAtom smokes(int a) const { return {p_smokes, {people[a]}}; }
  GroundAtom knows(int a, int b) const { return {p_knows, {people[a], people[b]}}; }
  FactStore store() const { return FactStore(schema); }
};

inline Term V(VarId v) { return Term::variable(v); }
inline Term C(ConstId c) { return Term::constant(c); }

inline Atom atom(PredId p, std::vector<Term> args) { return {p, std::move(args)}; }
inline Conjunction conj(std::vector<Atom> atoms) { return {std::move(atoms)}; }

// Random store over the social fixture's predicates.
inline void fill_random(FactStore& store, const SocialFixture& fx, int n_facts,
                        std::mt19937_64& rng) {
  std::uniform_int_distribution<int> person(0, static_cast<int>(fx.people.size()) - 1);
  std::uniform_int_distribution<int> pred(0, 2);
  std::vector<GroundAtom> facts;
  for (int i = 0; i < n_facts; ++i) {
    switch (pred(rng)) {
      case 0: facts.push_back(fx.friends(person(rng), person(rng))); break;
      case 1: facts.push_back(fx.smokes(person(rng))); break;
      default: facts.push_back(fx.knows(person(rng), person(rng))); break;
    }
  }
  store.add_facts(facts);
}

// Random conjunction of 1..3 literals over variables 0..3.
inline Conjunction random_conjunction(const SocialFixture& fx, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_lits(1, 3);
  std::uniform_int_distribution<int> var(0, 3);
  std::uniform_int_distribution<int> pred(0, 2);
  std::uniform_int_distribution<int> kind(0, 3);  // 3:1 variable vs constant
  std::uniform_int_distribution<int> person(0, static_cast<int>(fx.people.size()) - 1);
  auto term = [&]() {
    if (kind(rng) == 0) return C(fx.people[person(rng)]);
    return V(var(rng));
  };
  Conjunction out;
  int n = n_lits(rng);
  for (int i = 0; i < n; ++i) {
    switch (pred(rng)) {
      case 0: out.atoms.push_back(atom(fx.p_friends, {term(), term()})); break;
      case 1: out.atoms.push_back(atom(fx.p_smokes, {term()})); break;
      default: out.atoms.push_back(atom(fx.p_knows, {term(), term()})); break;
    }
  }
  return out;
}

}  // namespace rb2::testutil
