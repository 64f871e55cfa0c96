#include "rb2/boosting.hpp"

#include <cassert>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "rb2/numeric.hpp"

namespace rb2 {

double BoostedModel::predict_psi(const GroundAtom& query, const FactStore& store) const {
  if (target_ >= 0 && query.pred != target_)
    throw UsageError("model queried on predicate '" + store.schema().pred(query.pred).name +
                     "', trained for '" + store.schema().pred(target_).name + "'");
  double psi = psi0_;
  for (const BoostStage& s : stages_) psi += s.eta * s.tree.evaluate(query, store);
  return psi;
}

double BoostedModel::predict_prob(const GroundAtom& query, const FactStore& store) const {
  return stable_sigmoid(predict_psi(query, store));
}

std::vector<GradientPoint> compute_gradients(const BoostedModel& model,
                                             std::span<const LabeledQuery> batch,
                                             const FactStore& store) {
  std::vector<GradientPoint> out;
  out.reserve(batch.size());
  for (const LabeledQuery& lq : batch) {
    GradientPoint g;
    g.query = lq.query;
    g.indicator = lq.indicator;
    g.p = model.predict_prob(lq.query, store);
    g.gradient = static_cast<double>(lq.indicator) - g.p;
    out.push_back(std::move(g));
  }
  return out;
}

namespace {

double nll_from_psi(std::span<const LabeledQuery> batch, std::span<const double> psi) {
  double nll = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    double p = stable_sigmoid(psi[i]);
    nll -= batch[i].indicator ? std::log(p) : std::log(1.0 - p);
  }
  return nll;
}

}  // namespace

double batch_nll(const BoostedModel& model, std::span<const LabeledQuery> batch,
                 const FactStore& store) {
  std::vector<double> psi(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) psi[i] = model.predict_psi(batch[i].query, store);
  return nll_from_psi(batch, psi);
}

BoostedModel fit_stage(BoostedModel model, std::span<const LabeledQuery> batch,
                       const FactStore& store, int k_trees, double eta,
                       const TreeParams& params, const ModeSet& modes, FitStats* stats) {
  if (batch.empty()) throw UsageError("fit_stage: empty batch");
  if (k_trees < 1) throw UsageError("fit_stage: k_trees must be >= 1");
  if (k_trees < 4 || k_trees > 10)
    std::fprintf(stderr, "warning: trees per batch K=%d outside the usual 4..10 range\n",
                 k_trees);

  // psi per example, updated incrementally as trees are appended
  std::vector<double> psi(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) psi[i] = model.predict_psi(batch[i].query, store);

  double prev_nll = nll_from_psi(batch, psi);
  if (stats) stats->nll.push_back(prev_nll);

  std::vector<RegressionExample> examples(batch.size());
  for (int k = 0; k < k_trees; ++k) {
    for (size_t i = 0; i < batch.size(); ++i) {
      double p = stable_sigmoid(psi[i]);
      examples[i] = {batch[i].query, &store, static_cast<double>(batch[i].indicator) - p, 1.0};
    }
    RelationalTree tree = learn_tree(examples, modes, params, LeafRule::kGradientStep);
    for (size_t i = 0; i < batch.size(); ++i)
      psi[i] += eta * tree.evaluate(batch[i].query, store);
    model.append_stage(std::move(tree), eta);

    double nll = nll_from_psi(batch, psi);
    assert(nll <= prev_nll + 1e-9);
    if (stats) stats->nll.push_back(nll);
    prev_nll = nll;
  }
  return model;
}

BoostedModel cold_start(std::span<const LabeledQuery> logged, const FactStore& store,
                        int k_trees, double eta, const TreeParams& params, const ModeSet& modes,
                        FitStats* stats) {
  if (logged.empty()) throw ConfigError("cold_start: no logged data");
  size_t positives = 0;
  for (const LabeledQuery& lq : logged) positives += lq.indicator ? 1u : 0u;
  double rate = static_cast<double>(positives) / static_cast<double>(logged.size());
  double psi0 = 0.0;
  if (rate > 0.0 && rate < 1.0) psi0 = std::log(rate / (1.0 - rate));
  else if (rate == 1.0) psi0 = 4.0;
  else psi0 = -4.0;
  psi0 = std::clamp(psi0, -4.0, 4.0);

  BoostedModel model(logged[0].query.pred, psi0);
  return fit_stage(std::move(model), logged, store, k_trees, eta, params, modes, stats);
}

namespace {

void format_double(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

void write_term(std::ostream& out, const Term& t, const Schema& schema) {
  if (t.is_var())
    out << 'V' << t.id;
  else
    out << schema.constant_name(t.id);
}

void write_tree(std::ostream& out, const RelationalTree& tree, const Schema& schema) {
  const PredicateSignature& sig = schema.pred(tree.target());
  out << "tree target " << sig.name << '/' << sig.arity() << " vars " << tree.num_vars()
      << " nodes " << tree.nodes().size() << '\n';
  for (size_t i = 0; i < tree.nodes().size(); ++i) {
    const TreeNode& n = tree.nodes()[i];
    if (n.is_leaf()) {
      out << "node " << i << " leaf ";
      format_double(out, n.value);
      out << ' ' << n.n_examples << '\n';
    } else {
      out << "node " << i << " inner " << n.yes << ' ' << n.no << ' ' << n.n_examples << ' '
          << n.test.atoms.size();
      for (const Atom& a : n.test.atoms) {
        out << ' ' << schema.pred(a.pred).name << '/' << a.args.size();
        for (const Term& t : a.args) {
          out << ' ';
          write_term(out, t, schema);
        }
      }
      out << '\n';
    }
  }
  std::istringstream pretty(tree.pretty(schema));
  std::string line;
  while (std::getline(pretty, line)) out << "# " << line << '\n';
}

struct TokenReader {
  std::istringstream in;
  std::string line_desc;
  explicit TokenReader(std::string line, std::string desc)
      : in(std::move(line)), line_desc(std::move(desc)) {}
  std::string word() {
    std::string w;
    if (!(in >> w)) throw ParseError("model: truncated " + line_desc);
    return w;
  }
  long integer() {
    try {
      return std::stol(word());
    } catch (const std::exception&) {
      throw ParseError("model: bad integer in " + line_desc);
    }
  }
  double real() {
    try {
      return std::stod(word());
    } catch (const std::exception&) {
      throw ParseError("model: bad number in " + line_desc);
    }
  }
};

std::string next_content_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    return line;
  }
  throw ParseError("model: unexpected end of file");
}

PredId parse_pred_ref(const std::string& token, const Schema& schema) {
  size_t slash = token.find('/');
  if (slash == std::string::npos) throw ParseError("model: expected pred/arity, got " + token);
  std::string name = token.substr(0, slash);
  auto pid = schema.find_predicate(name);
  if (!pid) throw ParseError("model: unknown predicate '" + name + "'");
  int arity = std::stoi(token.substr(slash + 1));
  if (schema.pred(*pid).arity() != arity)
    throw ParseError("model: arity mismatch for '" + name + "'");
  return *pid;
}

Term parse_term(const std::string& token, TypeId expected_type, Schema& schema) {
  if (token.size() >= 2 && token[0] == 'V' &&
      token.find_first_not_of("0123456789", 1) == std::string::npos)
    return Term::variable(std::stoi(token.substr(1)));
  return Term::constant(schema.add_constant(token, expected_type));
}

RelationalTree read_tree(std::istream& in, Schema& schema) {
  TokenReader hdr(next_content_line(in), "tree header");
  if (hdr.word() != "tree" || hdr.word() != "target")
    throw ParseError("model: expected tree header");
  PredId target = parse_pred_ref(hdr.word(), schema);
  if (hdr.word() != "vars") throw ParseError("model: expected 'vars'");
  int num_vars = static_cast<int>(hdr.integer());
  if (hdr.word() != "nodes") throw ParseError("model: expected 'nodes'");
  long n_nodes = hdr.integer();

  RelationalTree tree(target, num_vars);
  for (long i = 0; i < n_nodes; ++i) {
    TokenReader tr(next_content_line(in), "tree node");
    if (tr.word() != "node" || tr.integer() != i)
      throw ParseError("model: nodes out of order");
    TreeNode node;
    std::string kind = tr.word();
    if (kind == "leaf") {
      node.value = tr.real();
      node.n_examples = static_cast<size_t>(tr.integer());
    } else if (kind == "inner") {
      node.yes = static_cast<int>(tr.integer());
      node.no = static_cast<int>(tr.integer());
      node.n_examples = static_cast<size_t>(tr.integer());
      long n_lits = tr.integer();
      for (long l = 0; l < n_lits; ++l) {
        Atom a;
        a.pred = parse_pred_ref(tr.word(), schema);
        const PredicateSignature& sig = schema.pred(a.pred);
        for (int pos = 0; pos < sig.arity(); ++pos)
          a.args.push_back(parse_term(tr.word(), sig.arg_types[pos], schema));
        node.test.atoms.push_back(std::move(a));
      }
    } else {
      throw ParseError("model: unknown node kind '" + kind + "'");
    }
    tree.nodes().push_back(std::move(node));
  }
  return tree;
}

}  // namespace

void write_model(const BoostedModel& model, const Schema& schema, std::ostream& out) {
  const PredicateSignature& sig = schema.pred(model.target());
  out << "rb2-model v1\n";
  out << "target " << sig.name << '/' << sig.arity() << '\n';
  out << "psi0 ";
  format_double(out, model.psi0());
  out << '\n';
  out << "stages " << model.stages().size() << '\n';
  for (size_t i = 0; i < model.stages().size(); ++i) {
    out << "stage " << i << " eta ";
    format_double(out, model.stages()[i].eta);
    out << '\n';
    write_tree(out, model.stages()[i].tree, schema);
  }
}

BoostedModel read_model(std::istream& in, Schema& schema) {
  std::string header = next_content_line(in);
  if (header != "rb2-model v1") throw ParseError("model: bad header '" + header + "'");
  TokenReader tl(next_content_line(in), "target line");
  if (tl.word() != "target") throw ParseError("model: expected 'target'");
  PredId target = parse_pred_ref(tl.word(), schema);
  TokenReader pl(next_content_line(in), "psi0 line");
  if (pl.word() != "psi0") throw ParseError("model: expected 'psi0'");
  double psi0 = pl.real();
  TokenReader sl(next_content_line(in), "stages line");
  if (sl.word() != "stages") throw ParseError("model: expected 'stages'");
  long n_stages = sl.integer();

  BoostedModel model(target, psi0);
  for (long i = 0; i < n_stages; ++i) {
    TokenReader st(next_content_line(in), "stage line");
    if (st.word() != "stage" || st.integer() != i) throw ParseError("model: stages out of order");
    if (st.word() != "eta") throw ParseError("model: expected 'eta'");
    double eta = st.real();
    model.append_stage(read_tree(in, schema), eta);
  }
  return model;
}

}  // namespace rb2
