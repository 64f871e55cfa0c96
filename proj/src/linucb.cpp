#include "rb2/linucb.hpp"

#include <algorithm>
#include <map>
#include <ostream>

namespace rb2 {

FeatureEncoder FeatureEncoder::build(const FactStore& store,
                                     std::span<const TypeId> context_types, int max_dim) {
  const Schema& schema = store.schema();
  // deterministic counting: ordered by (slot, pred, pos, rest)
  std::map<std::tuple<int, PredId, int, std::vector<ConstId>>, size_t> counts;
  for (int slot = 0; slot < static_cast<int>(context_types.size()); ++slot) {
    TypeId t = context_types[slot];
    for (PredId p = 0; p < schema.num_predicates(); ++p) {
      const PredicateSignature& sig = schema.pred(p);
      for (int pos = 0; pos < sig.arity(); ++pos) {
        if (sig.arg_types[pos] != t) continue;
        for (const GroundAtom& f : store.facts(p)) {
          std::vector<ConstId> rest;
          for (int i = 0; i < sig.arity(); ++i)
            if (i != pos) rest.push_back(f.args[i]);
          ++counts[{slot, p, pos, std::move(rest)}];
        }
      }
    }
  }
  std::vector<std::pair<size_t, const std::tuple<int, PredId, int, std::vector<ConstId>>*>>
      order;
  order.reserve(counts.size());
  for (const auto& [key, n] : counts) order.emplace_back(n, &key);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  if (max_dim > 0 && order.size() > static_cast<size_t>(max_dim))
    order.resize(static_cast<size_t>(max_dim));

  FeatureEncoder enc;
  for (const auto& [n, key] : order) {
    Template t{std::get<0>(*key), std::get<1>(*key), std::get<2>(*key), std::get<3>(*key)};
    enc.index_.emplace(t, static_cast<int>(enc.templates_.size()));
    enc.templates_.push_back(std::move(t));
  }
  return enc;
}

std::vector<int> FeatureEncoder::encode_indices(std::span<const ConstId> context,
                                                const FactStore& store) const {
  const Schema& schema = store.schema();
  std::vector<int> cols;
  for (int slot = 0; slot < static_cast<int>(context.size()); ++slot) {
    ConstId entity = context[slot];
    for (PredId p = 0; p < schema.num_predicates(); ++p) {
      const PredicateSignature& sig = schema.pred(p);
      for (int pos = 0; pos < sig.arity(); ++pos) {
        if (sig.arg_types[pos] != schema.constant_type(entity)) continue;
        for (uint32_t fi : store.lookup(p, pos, entity)) {
          const GroundAtom& f = store.facts(p)[fi];
          Template t;
          t.slot = slot;
          t.pred = p;
          t.pos = pos;
          for (int i = 0; i < sig.arity(); ++i)
            if (i != pos) t.rest.push_back(f.args[i]);
          auto it = index_.find(t);
          if (it != index_.end()) cols.push_back(it->second);
        }
      }
    }
  }
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  return cols;
}

Eigen::VectorXd FeatureEncoder::encode(std::span<const ConstId> context,
                                       const FactStore& store) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dimension());
  for (int c : encode_indices(context, store)) x[c] = 1.0;
  return x;
}

void FeatureEncoder::dump_vocabulary(std::ostream& out, const Schema& schema) const {
  for (size_t i = 0; i < templates_.size(); ++i) {
    const Template& t = templates_[i];
    const PredicateSignature& sig = schema.pred(t.pred);
    out << i << '\t' << "slot" << t.slot << '\t' << sig.name << '(';
    size_t rest_i = 0;
    for (int pos = 0; pos < sig.arity(); ++pos) {
      if (pos) out << ',';
      if (pos == t.pos)
        out << '_';
      else
        out << schema.constant_name(t.rest[rest_i++]);
    }
    out << ")\n";
  }
}

LinUCBArmState::LinUCBArmState(int dim, double alpha)
    : dim_(dim),
      alpha_(alpha),
      llt_(Eigen::MatrixXd::Identity(dim, dim)),
      b_(Eigen::VectorXd::Zero(dim)),
      theta_cache_(Eigen::VectorXd::Zero(dim)),
      theta_dirty_(false) {}

Eigen::VectorXd LinUCBArmState::theta() const {
  if (theta_dirty_) {
    theta_cache_ = llt_.solve(b_);
    theta_dirty_ = false;
  }
  return theta_cache_;
}

Eigen::MatrixXd LinUCBArmState::a_matrix() const {
  Eigen::MatrixXd l = llt_.matrixL();
  return l * l.transpose();
}

double LinUCBArmState::width_squared(const Eigen::VectorXd& x) const {
  Eigen::VectorXd z = llt_.matrixL().solve(x);
  return z.squaredNorm();
}

double LinUCBArmState::ucb(const Eigen::VectorXd& x) const {
  return theta().dot(x) + alpha_ * std::sqrt(std::max(0.0, width_squared(x)));
}

void LinUCBArmState::update(const Eigen::VectorXd& x, double reward) {
  llt_.rankUpdate(x, 1.0);
  if (llt_.info() != Eigen::Success)
    throw Error("LinUCB: Cholesky update failed; A is no longer positive definite");
  b_ += reward * x;
  theta_dirty_ = true;
}

int linucb_select(std::span<const LinUCBArmState> arm_states, const Eigen::VectorXd& x) {
  int best = 0;
  double best_ucb = arm_states[0].ucb(x);
  for (size_t a = 1; a < arm_states.size(); ++a) {
    double u = arm_states[a].ucb(x);
    if (u > best_ucb) {
      best_ucb = u;
      best = static_cast<int>(a);
    }
  }
  return best;
}

RunResult run_linucb(BanditEnvironment& env, const LinUCBConfig& config) {
  const Schema& schema = env.schema();
  const PredicateSignature& sig = schema.pred(env.target());
  std::vector<TypeId> context_types;
  for (int pos = 0; pos < sig.arity(); ++pos)
    if (pos != env.label_position()) context_types.push_back(sig.arg_types[pos]);

  FeatureEncoder encoder = FeatureEncoder::build(env.store(), context_types, config.max_dim);
  std::vector<LinUCBArmState> arms(env.arms().size(),
                                   LinUCBArmState(encoder.dimension(), config.alpha));

  // prime from the cold-start logged data
  for (const LabeledQuery& lq : env.logged()) {
    std::vector<ConstId> context;
    ConstId label = -1;
    for (int pos = 0; pos < static_cast<int>(lq.query.args.size()); ++pos) {
      if (pos == env.label_position())
        label = lq.query.args[pos];
      else
        context.push_back(lq.query.args[pos]);
    }
    auto it = std::find(env.arms().begin(), env.arms().end(), label);
    if (it == env.arms().end()) continue;
    Eigen::VectorXd x = encoder.encode(context, env.store());
    arms[static_cast<size_t>(it - env.arms().begin())].update(x, lq.indicator);
  }

  RunResult result;
  long regret = 0;
  for (size_t pos = 0; pos < env.num_rounds(); ++pos) {
    long t = static_cast<long>(pos) + 1;
    Eigen::VectorXd x = encoder.encode(env.context(pos).context, env.store());
    int a = linucb_select(arms, x);
    // p_chosen carries the decision-time point estimate theta'x
    double estimate = arms[static_cast<size_t>(a)].theta().dot(x);
    int r = env.reward(pos, env.arms()[a]);
    regret += 1 - r;
    arms[static_cast<size_t>(a)].update(x, r);
    env.apply_deltas_up_to(t);
    result.rounds.push_back({t, 0, env.context_id(pos), a, r, regret, estimate});
    result.regret_series.push_back(regret);
  }
  return result;
}

}  // namespace rb2
