// focs: learn functional context-specific CPTs and reason with them.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "focs/codec.hpp"
#include "focs/compile.hpp"
#include "focs/curve.hpp"
#include "focs/data.hpp"
#include "focs/error.hpp"
#include "focs/focs_cpt.hpp"
#include "focs/mlp.hpp"
#include "focs/mpe.hpp"
#include "focs/tree_cpt.hpp"

using nlohmann::json;
using namespace focs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitBudget = 2;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("not a number: '" + item + "'");
    }
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

/// Family for a model: its recorded parents if any, else every non-child column.
FamilyView family_for(std::shared_ptr<const Dataset> data, const std::string& child,
                      const std::vector<std::string>& parents) {
  if (parents.empty()) return FamilyView::all_parents(std::move(data), child);
  std::vector<std::size_t> idx;
  for (const auto& p : parents) idx.push_back(data->index_of(p));
  std::size_t c = data->index_of(child);
  return FamilyView(std::move(data), c, std::move(idx));
}

/// Seeded split of record indices into (train, validation).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout(std::size_t n, double frac, uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto cut = static_cast<std::size_t>(std::llround(double(n) * (1.0 - frac)));
  return {std::vector<std::size_t>(perm.begin(), perm.begin() + std::ptrdiff_t(cut)),
          std::vector<std::size_t>(perm.begin() + std::ptrdiff_t(cut), perm.end())};
}

Activation parse_activation(const std::string& s) {
  Activation a = activation_from_string(s);
  if (a != Activation::relu && a != Activation::sigmoid) throw ValidationError("hidden activation must be relu or sigmoid");
  return a;
}

Optimizer parse_optimizer(const std::string& s) {
  if (s == "momentum") return Optimizer::momentum;
  if (s == "adam") return Optimizer::adam;
  throw ValidationError("optimizer must be momentum or adam");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn functional context-specific CPTs and reason with them"};
  app.require_subcommand(1);

  uint64_t seed = 1;
  std::size_t threads = 1;
  auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", seed, "RNG seed")->envname("FOCS_SEED"); };

  // gen
  auto* gen = app.add_subcommand("gen", "Generate datasets");
  gen->require_subcommand(1);
  std::size_t n = 16, k = 2, count = 10000, window = 3;
  double flip_prob = 0.05, prior_p = 0.8;
  std::string out_path;
  auto* gen_synth = gen->add_subcommand("synth", "Cardinality benchmark dataset");
  gen_synth->add_option("--n", n, "Number of parents")->capture_default_str();
  gen_synth->add_option("--k", k, "Context divisor")->capture_default_str();
  gen_synth->add_option("--count", count, "Records")->capture_default_str();
  gen_synth->add_option("--out", out_path, "Output CSV")->required();
  add_seed(gen_synth);
  auto* gen_code = gen->add_subcommand("code", "Message/received-word pairs of the cyclic parity code");
  gen_code->add_option("--n", n, "Message bits")->capture_default_str();
  gen_code->add_option("--window", window, "Parity window")->capture_default_str();
  gen_code->add_option("--flip-prob", flip_prob, "Channel flip probability")->capture_default_str();
  gen_code->add_option("--prior", prior_p, "Pr(u_i = 1)")->capture_default_str();
  gen_code->add_option("--count", count, "Pairs")->capture_default_str();
  gen_code->add_option("--out", out_path, "Output CSV")->required();
  add_seed(gen_code);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train scorers");
  train_cmd->require_subcommand(1);
  std::string data_path, child, activation = "relu", optimizer = "momentum";
  TrainConfig tcfg;
  auto* train_mlp = train_cmd->add_subcommand("mlp", "Train a single-hidden-layer MLP on one family");
  train_mlp->add_option("--data", data_path, "Training CSV")->required();
  train_mlp->add_option("--child", child, "Child column")->required();
  train_mlp->add_option("--hidden", tcfg.hidden_units, "Hidden units")->capture_default_str();
  train_mlp->add_option("--activation", activation, "relu or sigmoid")->capture_default_str();
  train_mlp->add_option("--epochs", tcfg.epochs, "Epochs")->capture_default_str();
  train_mlp->add_option("--lr", tcfg.learning_rate, "Learning rate")->capture_default_str();
  train_mlp->add_option("--batch", tcfg.batch_size, "Minibatch size")->capture_default_str();
  train_mlp->add_option("--optimizer", optimizer, "momentum or adam")->capture_default_str();
  train_mlp->add_option("--out", out_path, "Output model JSON")->required();
  add_seed(train_mlp);

  // learn
  auto* learn = app.add_subcommand("learn", "Learn CPTs");
  learn->require_subcommand(1);
  std::string mlp_path;
  std::size_t max_contexts = 2, max_depth = 2;
  double min_gain = 0.0, val_frac = 0.0;
  bool step = false;
  auto* learn_focs_cmd = learn->add_subcommand("focs", "Learn contexts by thresholding a trained scorer");
  learn_focs_cmd->add_option("--data", data_path, "Training CSV")->required();
  learn_focs_cmd->add_option("--child", child, "Child column")->required();
  learn_focs_cmd->add_option("--mlp", mlp_path, "Scorer JSON")->required();
  learn_focs_cmd->add_option("--max-contexts", max_contexts, "Context budget")->capture_default_str();
  learn_focs_cmd->add_option("--min-gain", min_gain, "Minimum per-record CLL gain per split")->capture_default_str();
  learn_focs_cmd->add_option("--val-frac", val_frac, "Fraction held out for the stopping rule")->capture_default_str();
  learn_focs_cmd->add_flag("--step", step, "Convert the scorer to a step network first (needed for compile/mpe)");
  learn_focs_cmd->add_option("--out", out_path, "Output model JSON")->required();
  add_seed(learn_focs_cmd);
  auto* learn_tree_cmd = learn->add_subcommand("tree", "Learn a depth-bounded decision-tree CPT");
  learn_tree_cmd->add_option("--data", data_path, "Training CSV")->required();
  learn_tree_cmd->add_option("--child", child, "Child column")->required();
  learn_tree_cmd->add_option("--max-depth", max_depth, "Depth bound")->capture_default_str();
  learn_tree_cmd->add_option("--out", out_path, "Output model JSON")->required();

  // eval
  std::string model_path;
  auto* eval_cmd = app.add_subcommand("eval", "Negated CLL per record of a model on a dataset");
  eval_cmd->add_option("--data", data_path, "CSV")->required();
  eval_cmd->add_option("--child", child, "Child column")->required();
  eval_cmd->add_option("--model", model_path, "FoCS, tree or MLP JSON")->required();

  // curve
  std::string test_path;
  auto* curve_cmd = app.add_subcommand("curve", "Contexts vs negated CLL for FoCS, tree and MLP CPTs");
  curve_cmd->add_option("--data", data_path, "Training CSV")->required();
  curve_cmd->add_option("--child", child, "Child column")->required();
  curve_cmd->add_option("--mlp", mlp_path, "Trained MLP JSON")->required();
  curve_cmd->add_option("--max-contexts", max_contexts, "Largest context budget")->capture_default_str();
  curve_cmd->add_option("--test", test_path, "Evaluation CSV (default: training data)");
  curve_cmd->add_flag("--step", step, "Threshold the step-converted scorer");
  curve_cmd->add_option("--out", out_path, "Output CSV")->required();

  // compile
  std::string dot_path;
  bool stats = false;
  std::size_t budget = kDefaultNodeBudget;
  auto* compile_cmd = app.add_subcommand("compile", "Compile the contexts of a FoCS model to OBDDs");
  compile_cmd->add_option("--model", model_path, "FoCS JSON with a step-network scorer")->required();
  compile_cmd->add_option("--out-dot", dot_path, "Graphviz output");
  compile_cmd->add_flag("--stats", stats, "Print JSON statistics");
  compile_cmd->add_option("--node-budget", budget, "Maximum OBDD nodes")->capture_default_str();

  // marginal
  std::string prior_str = "0.5";
  auto* marginal_cmd = app.add_subcommand("marginal", "Pr(x=1) under a factorized prior over the parents");
  marginal_cmd->add_option("--model", model_path, "FoCS JSON with a step-network scorer")->required();
  marginal_cmd->add_option("--prior", prior_str, "One probability, or one per parent (comma-separated)")
      ->capture_default_str();

  // mpe
  std::string models_str, evidence, lp_path;
  double time_budget = 3600.0;
  auto* mpe_cmd = app.add_subcommand("mpe", "Most probable message given observed children");
  mpe_cmd->add_option("--models", models_str, "Comma-separated FoCS JSON files, one per observed child")->required();
  mpe_cmd->add_option("--evidence", evidence, "Observed child bits, e.g. 0110")->required();
  mpe_cmd->add_option("--prior", prior_str, "One probability, or one per message bit")->capture_default_str();
  mpe_cmd->add_option("--export-lp", lp_path, "Write the 0/1 program in LP format");
  mpe_cmd->add_option("--time-budget", time_budget, "Seconds")->capture_default_str();

  // study
  auto* study = app.add_subcommand("study", "Experiments");
  study->require_subcommand(1);
  StudyConfig scfg;
  bool header = false;
  auto* study_coding = study->add_subcommand("coding", "Learn-to-decode cross validation; prints one CSV row");
  study_coding->add_option("--n", scfg.spec.n, "Message bits")->capture_default_str();
  study_coding->add_option("--window", scfg.spec.window, "Parity window")->capture_default_str();
  study_coding->add_option("--flip-prob", scfg.spec.flip_prob, "Channel flip probability")->capture_default_str();
  study_coding->add_option("--prior", scfg.spec.prior_p, "Pr(u_i = 1)")->capture_default_str();
  study_coding->add_option("--count", scfg.count, "Pairs")->capture_default_str();
  study_coding->add_option("--folds", scfg.folds, "Cross-validation folds")->capture_default_str();
  study_coding->add_option("--epochs", scfg.decoder.train.epochs, "Training epochs per bit")->capture_default_str();
  study_coding->add_flag("--header", header, "Print the CSV header first");
  add_seed(study_coding);

  app.add_option("--threads", threads, "Worker threads for folds/instances")->envname("FOCS_THREADS");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (gen_synth->parsed()) {
      FamilyView v = gen_cardinality(n, k, count, seed);
      save_csv(out_path, v.dataset());
    } else if (gen_code->parsed()) {
      CodeSpec spec{n, window, flip_prob, prior_p};
      save_csv(out_path, *make_pairs(spec, count, seed).data);
    } else if (train_mlp->parsed()) {
      tcfg.hidden_activation = parse_activation(activation);
      tcfg.optimizer = parse_optimizer(optimizer);
      tcfg.seed = seed;
      FamilyView v = load_csv(data_path, child);
      write_json(out_path, to_json(train(v, tcfg)));
    } else if (learn_focs_cmd->parsed()) {
      if (val_frac < 0.0 || val_frac >= 1.0) throw ValidationError("--val-frac must lie in [0,1)");
      FamilyView all = load_csv(data_path, child);
      Scorer scorer = scorer_from_json(read_json(mlp_path));
      if (step) {
        if (auto* m = std::get_if<Mlp>(&scorer)) scorer = to_step(*m);
      }
      LearnOptions opts{max_contexts, min_gain};
      if (val_frac > 0.0) {
        auto [tr, va] = holdout(all.size(), val_frac, seed);
        FamilyView train_view = all.subset(tr), val_view = all.subset(va);
        write_json(out_path, to_json(learn_focs(train_view, scorer, opts, &val_view)));
      } else {
        write_json(out_path, to_json(learn_focs(all, scorer, opts)));
      }
    } else if (learn_tree_cmd->parsed()) {
      write_json(out_path, to_json(learn_tree(load_csv(data_path, child), max_depth)));
    } else if (eval_cmd->parsed()) {
      auto data = std::make_shared<const Dataset>(read_csv(data_path));
      json j = read_json(model_path);
      double ncll;
      if (j.contains("contexts")) {
        FoCSCpt cpt = focs_from_json(j);
        FamilyView v = family_for(data, child, cpt.parents());
        ncll = negated_cll_per_record(cll(v, cpt), v);
      } else if (j.contains("tree")) {
        FamilyView v = FamilyView::all_parents(data, child);
        ncll = negated_cll_per_record(tree_cll(v, tree_from_json(j)), v);
      } else {
        Scorer s = scorer_from_json(j);
        const auto* mlp = std::get_if<Mlp>(&s);
        if (!mlp) throw ValidationError("a step network is not a probabilistic model; evaluate a FoCS model instead");
        FamilyView v = FamilyView::all_parents(data, child);
        ncll = negated_cll_per_record(mlp_cll(v, *mlp), v);
      }
      std::cout << fmt(ncll) << '\n';
    } else if (curve_cmd->parsed()) {
      FamilyView train_view = load_csv(data_path, child);
      FamilyView eval_view = test_path.empty() ? train_view : load_csv(test_path, child);
      Scorer s = scorer_from_json(read_json(mlp_path));
      const auto* mlp = std::get_if<Mlp>(&s);
      if (!mlp) throw ValidationError("curve needs a trained MLP, not a step network");
      std::ostringstream csv;
      csv << "contexts,focs_ncll,tree_ncll,mlp_ncll\n";
      for (const auto& row : contexts_curve(train_view, eval_view, *mlp, max_contexts, step)) {
        csv << row.contexts << ',' << fmt(row.focs_ncll) << ',' << fmt(row.tree_ncll) << ',' << fmt(row.mlp_ncll)
            << '\n';
      }
      write_text(out_path, csv.str());
    } else if (compile_cmd->parsed()) {
      FoCSCpt cpt = focs_from_json(read_json(model_path));
      auto diagrams = compile_contexts(cpt, budget);
      std::vector<std::string> names = cpt.parents();
      if (!dot_path.empty()) {
        std::string dot;
        for (std::size_t i = 0; i < diagrams.size(); ++i) dot += diagrams[i].to_dot(names, "context" + std::to_string(i));
        write_text(dot_path, dot);
      }
      if (stats) {
        json ctx = json::array();
        for (std::size_t i = 0; i < diagrams.size(); ++i) {
          ctx.push_back({{"index", i},
                         {"lo", bound_to_json(cpt.contexts()[i].lo)},
                         {"hi", bound_to_json(cpt.contexts()[i].hi)},
                         {"nodes", diagrams[i].node_count()},
                         {"models", diagrams[i].model_count()}});
        }
        std::vector<std::string> order;
        for (std::size_t v : diagrams.front().order()) order.push_back(v < names.size() ? names[v] : "x" + std::to_string(v));
        std::cout << json{{"order", order}, {"contexts", ctx}}.dump(2) << '\n';
      }
    } else if (marginal_cmd->parsed()) {
      FoCSCpt cpt = focs_from_json(read_json(model_path));
      std::size_t arity_n = arity(cpt.scorer());
      auto prior = parse_doubles(prior_str);
      if (prior.size() == 1) prior.assign(arity_n, prior.front());
      if (prior.size() != arity_n) throw ValidationError("--prior needs 1 or " + std::to_string(arity_n) + " values");
      for (double p : prior) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("prior probabilities must lie in [0,1]");
      }
      Marginal m = marginal(cpt, prior);
      std::cout << json{{"p1", m.p1}, {"masses", m.masses}}.dump(2) << '\n';
    } else if (mpe_cmd->parsed()) {
      std::vector<Observation> obs;
      auto files = split_commas(models_str);
      if (files.size() != evidence.size())
        throw ValidationError("--evidence needs one bit per model (" + std::to_string(files.size()) + ")");
      for (std::size_t i = 0; i < files.size(); ++i) {
        if (evidence[i] != '0' && evidence[i] != '1') throw ValidationError("--evidence must be a 0/1 string");
        obs.push_back({focs_from_json(read_json(files[i])), uint8_t(evidence[i] - '0')});
      }
      std::size_t bits = arity(obs.front().cpt.scorer());
      auto prior = parse_doubles(prior_str);
      if (prior.size() == 1) prior.assign(bits, prior.front());
      if (prior.size() != bits) throw ValidationError("--prior needs 1 or " + std::to_string(bits) + " values");
      PboProblem problem = encode(obs, prior);
      if (!lp_path.empty()) export_lp(problem, lp_path);
      SolveOptions so;
      so.time_budget = std::chrono::duration<double>(time_budget);
      MpeSolution sol = solve(problem, so);
      std::cout << to_json(sol).dump() << '\n';
      if (!sol.optimal) return kExitBudget;
    } else if (study_coding->parsed()) {
      scfg.seed = seed;
      scfg.decoder.threads = threads;
      Metrics m = run_study(scfg);
      if (header) std::cout << metrics_csv_header() << '\n';
      std::cout << metrics_csv_row(scfg, m) << '\n';
      if (!m.all_optimal) return kExitBudget;
    }
  } catch (const BudgetExceeded& e) {
    std::cerr << "focs: " << e.what() << '\n';
    return kExitBudget;
  } catch (const std::exception& e) {
    std::cerr << "focs: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitOk;
}
