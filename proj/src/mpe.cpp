#include "focs/mpe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "focs/error.hpp"
#include "focs/numeric.hpp"

namespace focs {

namespace {

const StepNetwork& step_scorer(const FoCSCpt& cpt) {
  const auto* net = std::get_if<StepNetwork>(&cpt.scorer());
  if (!net) throw ValidationError("MPE encoding needs step-network scorers (convert with to_step)");
  if (!net->single_hidden_layer()) throw ValidationError("MPE encoding needs a single hidden layer");
  return *net;
}

/// Interval endpoint mapped from scorer-output space to pre-activation space.
double to_preactivation(const StepNetwork& net, double bound) {
  if (!net.sigmoid_output() || std::isinf(bound)) return bound;
  if (bound <= 0.0) return -kInf;
  if (bound >= 1.0) return kInf;
  return logit(bound);
}

}  // namespace

PboProblem encode(std::span<const Observation> families, std::span<const double> prior, double epsilon) {
  if (!(epsilon > 0)) throw ValidationError("epsilon must be positive");
  PboProblem p;
  p.epsilon = epsilon;
  p.num_message_bits = prior.size();
  p.prior.assign(prior.begin(), prior.end());

  for (std::size_t j = 0; j < prior.size(); ++j) {
    double pj = prior[j];
    if (!(pj > 0.0 && pj < 1.0))
      throw ValidationError("prior for bit " + std::to_string(j) + " must lie strictly inside (0,1)");
    p.variables.push_back({"u" + std::to_string(j), VarKind::message});
    p.objective.push_back(std::log(pj) - std::log(1.0 - pj));
    p.objective_constant += std::log(1.0 - pj);
  }

  for (std::size_t i = 0; i < families.size(); ++i) {
    const Observation& obs = families[i];
    const StepNetwork& net = step_scorer(obs.cpt);
    if (net.arity() != prior.size())
      throw ValidationError("family " + std::to_string(i) + " has arity " + std::to_string(net.arity()) +
                            " but there are " + std::to_string(prior.size()) + " message bits");
    if (obs.x > 1) throw ValidationError("observations must be 0 or 1");
    const Layer& hidden = net.layers()[0];
    const Layer& out = net.layers()[1];
    const std::string tag = std::to_string(i);

    EncodedFamily fam{obs.cpt, obs.x, {}, p.variables.size(), 0};
    for (std::size_t j = 0; j < hidden.outputs; ++j) {
      p.variables.push_back({"h" + tag + "_" + std::to_string(j), VarKind::hidden});
      p.objective.push_back(0.0);
    }
    fam.first_selector = p.variables.size();
    for (std::size_t c = 0; c < obs.cpt.size(); ++c) {
      double lt = std::log(obs.cpt.columns()[c].probability(obs.x));
      fam.log_theta.push_back(lt);
      p.variables.push_back({"z" + tag + "_" + std::to_string(c), VarKind::selector});
      p.objective.push_back(lt);
    }

    // Step units: h = 1 iff w.u + b >= 0.
    for (std::size_t j = 0; j < hidden.outputs; ++j) {
      const double b = hidden.bias[j];
      double big_m = std::abs(b) + 1.0 + epsilon;
      std::vector<Term> terms;
      for (std::size_t k = 0; k < hidden.inputs; ++k) {
        terms.push_back({k, hidden.weight(j, k)});
        big_m += std::abs(hidden.weight(j, k));
      }
      const std::size_t h = fam.first_hidden + j;
      const std::string name = "h" + tag + "_" + std::to_string(j);
      auto on = terms;
      on.push_back({h, -big_m});
      p.constraints.push_back({name + "_on", on, Sense::ge, -big_m - b});
      auto off = terms;
      off.push_back({h, -big_m});
      p.constraints.push_back({name + "_off", off, Sense::le, -epsilon - b});
    }

    // Context selectors: z_c = 1 forces o = v.h + c0 into (a_c, b_c].
    const double c0 = out.bias[0];
    double out_m = std::abs(c0) + 1.0 + epsilon;
    for (double v : out.weights) out_m += std::abs(v);
    double widest = 0.0;
    for (const auto& ctx : obs.cpt.contexts()) {
      for (double e : {to_preactivation(net, ctx.lo), to_preactivation(net, ctx.hi)}) {
        if (std::isfinite(e)) widest = std::max(widest, std::abs(e));
      }
    }
    out_m += widest;
    std::vector<Term> one;
    for (std::size_t c = 0; c < obs.cpt.size(); ++c) {
      const std::size_t z = fam.first_selector + c;
      const std::string name = "z" + tag + "_" + std::to_string(c);
      const double a = to_preactivation(net, obs.cpt.contexts()[c].lo);
      const double bnd = to_preactivation(net, obs.cpt.contexts()[c].hi);
      std::vector<Term> terms;
      for (std::size_t j = 0; j < hidden.outputs; ++j) terms.push_back({fam.first_hidden + j, out.weights[j]});
      if (std::isfinite(a)) {
        auto lo = terms;
        lo.push_back({z, -out_m});
        p.constraints.push_back({name + "_lo", lo, Sense::ge, epsilon + a - c0 - out_m});
      }
      if (std::isfinite(bnd)) {
        auto hi = terms;
        hi.push_back({z, out_m});
        p.constraints.push_back({name + "_hi", hi, Sense::le, bnd - c0 + out_m});
      }
      one.push_back({z, 1.0});
    }
    p.constraints.push_back({"z" + tag + "_one", one, Sense::eq, 1.0});
    p.families.push_back(std::move(fam));
  }
  return p;
}

double log_probability(const PboProblem& p, std::span<const uint8_t> u) {
  if (u.size() != p.num_message_bits) throw std::invalid_argument("message has the wrong length");
  double total = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) total += std::log(u[j] ? p.prior[j] : 1.0 - p.prior[j]);
  for (const auto& fam : p.families) total += std::log(fam.cpt.predict(u).probability(fam.observed));
  return total;
}

std::vector<uint8_t> complete_assignment(const PboProblem& p, std::span<const uint8_t> u) {
  std::vector<uint8_t> full(p.variables.size(), 0);
  std::copy(u.begin(), u.end(), full.begin());
  for (const auto& fam : p.families) {
    const auto& net = std::get<StepNetwork>(fam.cpt.scorer());
    auto h = net.hidden(u);
    std::copy(h.begin(), h.end(), full.begin() + std::ptrdiff_t(fam.first_hidden));
    full[fam.first_selector + fam.cpt.context_of(u)] = 1;
  }
  return full;
}

double objective_value(const PboProblem& p, std::span<const uint8_t> assignment) {
  double total = p.objective_constant;
  for (std::size_t v = 0; v < p.objective.size(); ++v) {
    if (assignment[v]) total += p.objective[v];
  }
  return total;
}

bool satisfies_constraints(const PboProblem& p, std::span<const uint8_t> assignment, double tolerance) {
  for (const auto& row : p.constraints) {
    double lhs = 0.0;
    for (const auto& t : row.terms) lhs += t.coef * assignment[t.var];
    bool ok = row.sense == Sense::le   ? lhs <= row.rhs + tolerance
              : row.sense == Sense::ge ? lhs >= row.rhs - tolerance
                                       : std::abs(lhs - row.rhs) <= tolerance;
    if (!ok) return false;
  }
  return true;
}

namespace {

struct FamilyBounds {
  const StepNetwork* net;
  std::size_t hidden;
  std::vector<double> weights;  // hidden x bits, row-major
  std::vector<double> bias;
  std::vector<double> hidden_slack;
  std::vector<double> out_weights;
  double out_bias;
  double out_slack;
  const std::vector<Context>* contexts;
  const std::vector<double>* log_theta;
};

/// Per-hidden-unit partial sums: fixed part and the range still open.
struct UnitState {
  double fixed;
  double open_min;
  double open_max;
};

class Search {
public:
  Search(const PboProblem& p, const SolveOptions& opts) : p_(p), opts_(opts), n_(p.num_message_bits) {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::vector<double> strength(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      log1_.push_back(std::log(p.prior[j]));
      log0_.push_back(std::log(1.0 - p.prior[j]));
      strength[j] = std::abs(log1_[j] - log0_[j]);
    }
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return strength[a] > strength[b]; });
    best_rest_.assign(n_ + 1, 0.0);
    for (std::size_t d = n_; d-- > 0;) best_rest_[d] = best_rest_[d + 1] + std::max(log1_[order_[d]], log0_[order_[d]]);

    std::vector<UnitState> root;
    for (const auto& fam : p.families) {
      const StepNetwork& net = std::get<StepNetwork>(fam.cpt.scorer());
      const Layer& hid = net.layers()[0];
      const Layer& out = net.layers()[1];
      FamilyBounds fb{&net, hid.outputs, hid.weights, hid.bias, {}, out.weights, out.bias[0], 0.0,
                      &fam.cpt.contexts(), &fam.log_theta};
      for (std::size_t j = 0; j < hid.outputs; ++j) {
        UnitState s{hid.bias[j], 0.0, 0.0};
        double scale = std::abs(hid.bias[j]) + 1.0;
        for (std::size_t k = 0; k < hid.inputs; ++k) {
          double w = hid.weight(j, k);
          s.open_min += std::min(0.0, w);
          s.open_max += std::max(0.0, w);
          scale += std::abs(w);
        }
        fb.hidden_slack.push_back(1e-9 * scale);
        root.push_back(s);
      }
      double oscale = std::abs(out.bias[0]) + 1.0;
      for (double v : out.weights) oscale += std::abs(v);
      fb.out_slack = 1e-9 * oscale;
      families_.push_back(std::move(fb));
    }
    states_.assign(n_ + 1, root);
    assigned_sum_.assign(n_ + 1, 0.0);
    u_.assign(n_, 0);
  }

  MpeSolution run() {
    const auto start = std::chrono::steady_clock::now();
    start_ = start;
    // Seed the incumbent with the prior's preferred assignment.
    std::vector<uint8_t> seed(n_);
    for (std::size_t j = 0; j < n_; ++j) seed[j] = log1_[j] >= log0_[j] ? 1 : 0;
    offer(seed);
    bool complete = dfs(0);
    MpeSolution s;
    s.u = best_u_;
    s.log_prob = best_;
    s.optimal = complete;
    s.nodes = nodes_;
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    s.incumbent_trace = std::move(trace_);
    return s;
  }

private:
  double tie_tolerance(double v) const { return 1e-12 * (1.0 + std::abs(v)); }

  void offer(const std::vector<uint8_t>& u) {
    double v = log_probability(p_, u);
    if (best_u_.empty() || v > best_ + tie_tolerance(best_) ||
        (std::abs(v - best_) <= tie_tolerance(best_) && u < best_u_)) {
      best_ = v;
      best_u_ = u;
      trace_.push_back(best_);
    }
  }

  double family_bound(std::size_t i, const std::vector<UnitState>& units, std::size_t offset) const {
    const FamilyBounds& f = families_[i];
    double omin = f.out_bias, omax = f.out_bias;
    for (std::size_t j = 0; j < f.hidden; ++j) {
      const UnitState& s = units[offset + j];
      double lo = s.fixed + s.open_min, hi = s.fixed + s.open_max;
      double v = f.out_weights[j];
      if (lo - f.hidden_slack[j] >= 0.0) {
        omin += v;
        omax += v;
      } else if (hi + f.hidden_slack[j] < 0.0) {
        // unit is off
      } else {
        omin += std::min(0.0, v);
        omax += std::max(0.0, v);
      }
    }
    double fmin = f.net->transform(omin - f.out_slack);
    double fmax = f.net->transform(omax + f.out_slack);
    double best = -kInf;
    for (std::size_t c = 0; c < f.contexts->size(); ++c) {
      const Context& ctx = (*f.contexts)[c];
      if (ctx.lo < fmax && ctx.hi >= fmin) best = std::max(best, (*f.log_theta)[c]);
    }
    if (best == -kInf) throw Error("internal error: no context reachable during MPE search");
    return best;
  }

  double bound(std::size_t depth) const {
    double b = assigned_sum_[depth] + best_rest_[depth];
    std::size_t offset = 0;
    for (std::size_t i = 0; i < families_.size(); ++i) {
      b += family_bound(i, states_[depth], offset);
      offset += families_[i].hidden;
    }
    return b;
  }

  /// Lexicographically smallest completion of the current partial assignment.
  std::vector<uint8_t> smallest_completion(std::size_t depth) const {
    std::vector<uint8_t> c(n_, 0);
    for (std::size_t d = 0; d < depth; ++d) c[order_[d]] = u_[order_[d]];
    return c;
  }

  double enumerate_best(std::size_t depth) {
    std::vector<uint8_t> u = smallest_completion(depth);
    std::vector<std::size_t> open(order_.begin() + std::ptrdiff_t(depth), order_.end());
    double best = -kInf;
    for (uint64_t mask = 0; mask < (uint64_t(1) << open.size()); ++mask) {
      for (std::size_t k = 0; k < open.size(); ++k) u[open[k]] = (mask >> k) & 1;
      best = std::max(best, log_probability(p_, u));
    }
    return best;
  }

  void assign(std::size_t depth, uint8_t value) {
    const std::size_t bit = order_[depth];
    u_[bit] = value;
    assigned_sum_[depth + 1] = assigned_sum_[depth] + (value ? log1_[bit] : log0_[bit]);
    auto& next = states_[depth + 1];
    next = states_[depth];
    std::size_t offset = 0;
    for (const auto& f : families_) {
      for (std::size_t j = 0; j < f.hidden; ++j) {
        double w = f.weights[j * n_ + bit];
        UnitState& s = next[offset + j];
        s.open_min -= std::min(0.0, w);
        s.open_max -= std::max(0.0, w);
        if (value) s.fixed += w;
      }
      offset += f.hidden;
    }
  }

  bool out_of_time() {
    if (nodes_ % 1024 != 1) return timed_out_;  // clock read on nodes 1, 1025, ...
    if (std::chrono::steady_clock::now() - start_ > opts_.time_budget) timed_out_ = true;
    return timed_out_;
  }

  /// Returns false if the search was cut short by the time budget.
  bool dfs(std::size_t depth) {
    if (depth == n_) {
      offer(u_);
      return true;
    }
    double b = bound(depth);
    if (opts_.check_bounds) {
      double truth = enumerate_best(depth);
      if (b < truth - 1e-9) throw Error("internal error: inadmissible MPE bound");
    }
    if (b < best_ - tie_tolerance(best_)) return true;
    if (b <= best_ + tie_tolerance(best_) && !(smallest_completion(depth) < best_u_)) return true;

    ++nodes_;
    if (out_of_time()) return false;
    const std::size_t bit = order_[depth];
    const uint8_t first = log1_[bit] >= log0_[bit] ? 1 : 0;
    for (uint8_t value : {first, uint8_t(1 - first)}) {
      assign(depth, value);
      if (!dfs(depth + 1)) return false;
    }
    u_[bit] = 0;
    return true;
  }

  const PboProblem& p_;
  const SolveOptions& opts_;
  std::size_t n_;
  std::vector<std::size_t> order_;
  std::vector<double> log1_, log0_, best_rest_, assigned_sum_;
  std::vector<FamilyBounds> families_;
  std::vector<std::vector<UnitState>> states_;
  std::vector<uint8_t> u_;
  std::vector<uint8_t> best_u_;
  double best_ = -kInf;
  std::vector<double> trace_;
  uint64_t nodes_ = 0;
  bool timed_out_ = false;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

MpeSolution solve(const PboProblem& p, const SolveOptions& opts) {
  if (p.prior.size() != p.num_message_bits) throw ValidationError("problem has no prior for its message bits");
  if (p.num_message_bits > 63) throw ValidationError("at most 63 message bits are supported");
  Search search(p, opts);
  return search.run();
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_terms(std::ostream& out, const PboProblem& p, const std::vector<Term>& terms) {
  for (const auto& t : terms) {
    out << (t.coef < 0 || std::signbit(t.coef) ? " - " : " + ") << num(std::abs(t.coef)) << ' '
        << p.variables[t.var].name;
  }
}

VarKind kind_of(const std::string& name) {
  if (!name.empty() && name[0] == 'h') return VarKind::hidden;
  if (!name.empty() && name[0] == 'z') return VarKind::selector;
  return VarKind::message;
}

}  // namespace

void write_lp(std::ostream& out, const PboProblem& p) {
  out << "\\ MPE program: maximize ln Pr(u) + sum_i ln Pr(x_i | u)\n";
  out << "\\ objective constant: " << num(p.objective_constant) << '\n';
  out << "\\ epsilon: " << num(p.epsilon) << '\n';
  out << "Maximize\n obj:";
  std::vector<Term> obj;
  for (std::size_t v = 0; v < p.variables.size(); ++v) obj.push_back({v, p.objective[v]});
  if (obj.empty()) out << " 0";
  write_terms(out, p, obj);
  out << "\nSubject To\n";
  for (const auto& row : p.constraints) {
    out << ' ' << row.name << ':';
    write_terms(out, p, row.terms);
    out << (row.sense == Sense::le ? " <= " : row.sense == Sense::ge ? " >= " : " = ") << num(row.rhs) << '\n';
  }
  out << "Binary\n";
  for (const auto& v : p.variables) out << ' ' << v.name << '\n';
  out << "End\n";
}

void export_lp(const PboProblem& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  write_lp(out, p);
  if (!out) throw Error("I/O error writing '" + path.string() + "'");
}

PboProblem read_lp(std::istream& in) {
  PboProblem p;
  enum class Section { none, objective, constraints, binary, done } section = Section::none;
  std::vector<std::pair<std::string, double>> objective_terms;
  struct RawRow {
    std::string name;
    std::vector<std::pair<std::string, double>> terms;
    Sense sense;
    double rhs;
  };
  std::vector<RawRow> rows;
  std::vector<std::string> binaries;

  auto parse_terms = [](std::istringstream& ss, std::vector<std::pair<std::string, double>>& terms,
                        std::string* stop) {
    std::string tok;
    double sign = 1.0;
    while (ss >> tok) {
      if (tok == "<=" || tok == ">=" || tok == "=") {
        if (stop) *stop = tok;
        return;
      }
      if (tok == "+") { sign = 1.0; continue; }
      if (tok == "-") { sign = -1.0; continue; }
      std::string name;
      if (!(ss >> name)) throw ValidationError("LP parse error: dangling coefficient '" + tok + "'");
      double coef = std::stod(tok);
      terms.emplace_back(name, sign * coef);
      sign = 1.0;
    }
  };

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("\\", 0) == 0) {
      auto grab = [&](const std::string& key, double& dst) {
        auto pos = line.find(key);
        if (pos != std::string::npos) dst = std::stod(line.substr(pos + key.size()));
      };
      grab("objective constant:", p.objective_constant);
      grab("epsilon:", p.epsilon);
      continue;
    }
    if (line == "Maximize") { section = Section::objective; continue; }
    if (line == "Subject To") { section = Section::constraints; continue; }
    if (line == "Binary" || line == "Binaries") { section = Section::binary; continue; }
    if (line == "End") { section = Section::done; continue; }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    std::istringstream ss(line);
    switch (section) {
      case Section::objective: {
        std::string label;
        ss >> label;  // "obj:"
        std::string rest;
        std::getline(ss, rest);
        std::istringstream terms(rest == " 0" ? std::string{} : rest);
        parse_terms(terms, objective_terms, nullptr);
        break;
      }
      case Section::constraints: {
        RawRow row;
        ss >> row.name;
        if (row.name.empty() || row.name.back() != ':') throw ValidationError("LP parse error: unnamed constraint");
        row.name.pop_back();
        std::string sense;
        parse_terms(ss, row.terms, &sense);
        if (sense.empty()) throw ValidationError("LP parse error: constraint '" + row.name + "' has no sense");
        row.sense = sense == "<=" ? Sense::le : sense == ">=" ? Sense::ge : Sense::eq;
        if (!(ss >> row.rhs)) throw ValidationError("LP parse error: constraint '" + row.name + "' has no rhs");
        rows.push_back(std::move(row));
        break;
      }
      case Section::binary: {
        std::string name;
        while (ss >> name) binaries.push_back(name);
        break;
      }
      default:
        throw ValidationError("LP parse error: unexpected line '" + line + "'");
    }
  }
  if (section != Section::done) throw ValidationError("LP parse error: missing End");

  std::map<std::string, std::size_t> index;
  for (const auto& name : binaries) {
    index.emplace(name, p.variables.size());
    p.variables.push_back({name, kind_of(name)});
    if (kind_of(name) == VarKind::message) ++p.num_message_bits;
  }
  auto lookup = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw ValidationError("LP parse error: undeclared variable '" + name + "'");
    return it->second;
  };
  p.objective.assign(p.variables.size(), 0.0);
  for (const auto& [name, coef] : objective_terms) p.objective[lookup(name)] += coef;
  for (const auto& row : rows) {
    LinearConstraint c{row.name, {}, row.sense, row.rhs};
    for (const auto& [name, coef] : row.terms) c.terms.push_back({lookup(name), coef});
    p.constraints.push_back(std::move(c));
  }
  return p;
}

nlohmann::json to_json(const MpeSolution& s) {
  std::vector<int> u(s.u.begin(), s.u.end());
  return {{"u", u}, {"logp", s.log_prob}, {"optimal", s.optimal}, {"nodes", s.nodes}, {"seconds", s.seconds}};
}

}  // namespace focs
