#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "poseuq/dataset.hpp"
#include "poseuq/errors.hpp"
#include "poseuq/evaluation.hpp"
#include "poseuq/pipeline.hpp"
#include "poseuq/report.hpp"
#include "poseuq/simulation.hpp"

namespace poseuq::cli {

namespace {

std::vector<std::string> split_list(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) out.push_back(tok);
    }
  }
  return out;
}

// `references` allows the always-reported oracle and random rows to be named.
std::vector<UqMethod> parse_methods(const std::vector<std::string>& raw, bool references = false) {
  std::vector<UqMethod> methods;
  std::size_t named = 0;
  for (const auto& tok : split_list(raw)) {
    ++named;
    if (references && (tok == "oracle" || tok == "random")) continue;
    auto m = parse_uq_method(tok);
    if (!m) throw ValidationError("unknown method '" + tok + "'");
    methods.push_back(*m);
  }
  if (named == 0) throw ValidationError("no methods requested");
  return methods;
}

struct EvalFlags {
  std::string data;
  std::vector<std::string> learned_params;
  std::vector<std::string> ensemble;
  int guapo_samples = 50;
  double guapo_sigma_scale = 1.0;
  std::string guapo_reduction = "rms_add";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_eval_flags(CLI::App* cmd, EvalFlags& f) {
  cmd->add_option("--data", f.data, "Dataset file (JSON Lines)")->required();
  cmd->add_option("--learned-params", f.learned_params,
                  "Learned metric parameter files (repeatable or comma separated)");
  cmd->add_option("--ensemble", f.ensemble,
                  "Ensemble estimator ids (default: first two in the registry)");
  cmd->add_option("--guapo-samples", f.guapo_samples, "GUAPO sample count T")
      ->check(CLI::Range(2, 100000));
  cmd->add_option("--guapo-sigma-scale", f.guapo_sigma_scale, "Scale applied to keypoint sigmas")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--guapo-reduction", f.guapo_reduction, "rms_add or translation_std");
  cmd->add_option("--seed", f.seed, "Seed for GUAPO sampling / random reference (default: dataset seed)")
      ->each([&](const std::string&) { f.seed_set = true; });
}

struct LoadedEval {
  Dataset dataset;
  std::unique_ptr<UqEvaluator> evaluator;
  std::set<FrameKey> training_frames;
  std::size_t learned_count = 0;
};

LoadedEval load_eval(const EvalFlags& f) {
  LoadedEval le;
  le.dataset = load_dataset(f.data);
  UqEvaluator::Options opts;
  opts.ensemble = split_list(f.ensemble);
  opts.guapo.samples = f.guapo_samples;
  opts.guapo.sigma_scale = f.guapo_sigma_scale;
  auto red = parse_guapo_reduction(f.guapo_reduction);
  if (!red) throw ValidationError("unknown GUAPO reduction '" + f.guapo_reduction + "'");
  opts.guapo.reduction = *red;
  opts.seed = f.seed_set ? f.seed : le.dataset.scenario.seed;
  le.evaluator = std::make_unique<UqEvaluator>(le.dataset, opts);

  std::vector<std::string> ens_ids;
  for (std::size_t e : le.evaluator->ensemble()) ens_ids.push_back(le.dataset.scenario.estimators[e].id);
  for (const auto& path : split_list(f.learned_params)) {
    auto file = load_learned_metric(path);
    if (file.ensemble != ens_ids) {
      throw ValidationError(path + ": trained for a different ensemble");
    }
    for (const auto& [s, fr] : file.training_frames) {
      le.training_frames.insert({s, fr, file.params.object_id});
    }
    le.evaluator->add_learned(file.target_estimator_id, std::move(file.params));
    ++le.learned_count;
  }
  return le;
}

std::string fmt(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

int cmd_gen(const std::string& config_path, const std::string& out_path,
            std::optional<std::uint64_t> seed, unsigned threads, std::ostream& out) {
  ScenarioConfig cfg = config_path.empty() ? default_scenario() : load_scenario(config_path);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  Dataset ds{cfg, generate_dataset(cfg, {threads})};
  save_dataset(ds, out_path);

  out << "records: " << ds.records.size() << '\n';
  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    std::size_t hit = 0;
    for (const auto& r : ds.records) hit += r.estimates[e].detected() ? 1 : 0;
    const double rate = ds.records.empty() ? 0.0 : static_cast<double>(hit) / ds.records.size();
    out << "detection rate " << cfg.estimators[e].id << ": " << fmt(rate, 4) << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ensemble-disagreement uncertainty quantification for 6-DoF pose estimates"};
  app.name(args.empty() ? "poseuq" : args[0]);
  app.require_subcommand(1);

  // gen
  std::string gen_config, gen_out;
  std::uint64_t gen_seed = 0;
  unsigned gen_threads = 1;
  auto* gen = app.add_subcommand("gen", "Generate a simulated multi-view dataset");
  gen->add_option("--config", gen_config, "Scenario config JSON (default: built-in scenario)");
  gen->add_option("--out", gen_out, "Output dataset path")->required();
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "Override the config's master seed");
  gen->add_option("--threads", gen_threads, "Worker threads")->check(CLI::Range(1u, 256u));

  // train-metric
  EvalFlags tr_flags;
  std::string tr_object, tr_estimator, tr_out;
  double tr_split = 0.333;
  TrainingConfig tr_cfg;
  auto* tr = app.add_subcommand("train-metric", "Train a learned disagreement metric");
  tr->add_option("--data", tr_flags.data, "Dataset file")->required();
  tr->add_option("--object", tr_object, "Object id")->required();
  tr->add_option("--estimator", tr_estimator, "Target estimator id (an ensemble member)")->required();
  tr->add_option("--ensemble", tr_flags.ensemble, "Ensemble estimator ids");
  tr->add_option("--split", tr_split, "Fraction of usable frames used for training");
  tr->add_option("--epochs", tr_cfg.epochs, "Training epochs")->check(CLI::PositiveNumber);
  tr->add_option("--lr", tr_cfg.learning_rate, "SGD learning rate")->check(CLI::NonNegativeNumber);
  tr->add_option("--batch-size", tr_cfg.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  tr->add_option("--seed", tr_cfg.seed, "Seed for split, initialization and shuffling");
  std::string tr_norm = "pair";
  tr->add_option("--normalization", tr_norm, "Input map: none, standardize, whiten or pair");
  tr->add_option("--out", tr_out, "Output parameter file")->required();

  // eval-corr
  EvalFlags ec_flags;
  std::vector<std::string> ec_methods{"confidence,guapo,d_translational,d_rotational,d_add"};
  std::vector<std::string> ec_estimators;
  std::string ec_out, ec_text;
  bool ec_heldout = false;
  auto* ec = app.add_subcommand("eval-corr", "Spearman correlation between UQ and ADD error");
  add_eval_flags(ec, ec_flags);
  ec->add_option("--methods", ec_methods,
                 "Comma separated: confidence,guapo,d_translational,d_rotational,d_add,d_learned");
  ec->add_option("--estimators", ec_estimators, "Target estimators (default: ensemble members)");
  ec->add_option("--out", ec_out, "Report JSON path")->required();
  ec->add_option("--text-out", ec_text, "Also write the text table here");
  ec->add_flag("--heldout-only", ec_heldout,
               "Skip frames used to train any loaded learned metric");

  // select-view
  EvalFlags sv_flags;
  std::vector<std::string> sv_methods{"d_add"};
  std::string sv_estimator, sv_out, sv_text;
  auto* sv = app.add_subcommand("select-view", "Pick the least-uncertain frame per object and sequence");
  add_eval_flags(sv, sv_flags);
  sv->add_option("--method", sv_methods, "Comma separated UQ methods (oracle and random are always reported)");
  sv->add_option("--estimator", sv_estimator, "Target estimator (default: first ensemble member)");
  sv->add_option("--out", sv_out, "Report JSON path")->required();
  sv->add_option("--text-out", sv_text, "Also write the text table here");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), const_cast<char**>(argv.data()));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (gen->parsed()) {
      std::optional<std::uint64_t> seed;
      if (gen_seed_opt->count() > 0) seed = gen_seed;
      return cmd_gen(gen_config, gen_out, seed, gen_threads, out);
    }

    if (tr->parsed()) {
      auto norm = parse_input_normalization(tr_norm);
      if (!norm) throw ValidationError("unknown normalization '" + tr_norm + "'");
      tr_cfg.normalization = *norm;
      const Dataset ds = load_dataset(tr_flags.data);
      UqEvaluator::Options opts;
      opts.ensemble = split_list(tr_flags.ensemble);
      const UqEvaluator evaluator(ds, opts);
      const auto file =
          train_learned_metric(ds, evaluator, tr_object, tr_estimator, tr_split, tr_cfg);
      write_file_atomic(tr_out, to_json(file).dump() + "\n");
      const auto n_train = static_cast<double>(file.training_frames.size());
      out << "training frames: " << file.training_frames.size() << '\n'
          << "initial training loss: " << fmt(file.initial_loss, 8)
          << " (per frame " << fmt(file.initial_loss / n_train, 8) << ")\n"
          << "final training loss: " << fmt(file.final_loss, 8)
          << " (per frame " << fmt(file.final_loss / n_train, 8) << ")\n"
          << "held-out loss: " << fmt(file.heldout_loss, 8) << '\n';
      return kExitOk;
    }

    if (ec->parsed()) {
      const auto methods = parse_methods(ec_methods);
      auto le = load_eval(ec_flags);
      CorrelationOptions opts;
      opts.methods = methods;
      opts.estimators = split_list(ec_estimators);
      if (ec_heldout) opts.excluded_frames = le.training_frames;
      if (std::find(methods.begin(), methods.end(), UqMethod::kLearned) != methods.end() &&
          le.learned_count == 0) {
        throw ValidationError("d_learned requires --learned-params");
      }
      const auto report = correlation_analysis(le.dataset, *le.evaluator, opts);
      write_file_atomic(ec_out, to_json(report).dump(2) + "\n");
      const std::string text = format_table(report);
      if (!ec_text.empty()) write_file_atomic(ec_text, text);
      out << text;
      for (const auto& w : report.warnings) err << "warning: " << w << '\n';
      return kExitOk;
    }

    if (sv->parsed()) {
      const auto methods = parse_methods(sv_methods, true);
      auto le = load_eval(sv_flags);
      if (std::find(methods.begin(), methods.end(), UqMethod::kLearned) != methods.end() &&
          le.learned_count == 0) {
        throw ValidationError("d_learned requires --learned-params");
      }
      SelectionOptions opts;
      opts.methods = methods;
      opts.estimator = sv_estimator;
      opts.seed = sv_flags.seed_set ? sv_flags.seed : le.dataset.scenario.seed;
      const auto report = select_views(le.dataset, *le.evaluator, opts);
      write_file_atomic(sv_out, to_json(report).dump(2) + "\n");
      const std::string text = format_table(report);
      if (!sv_text.empty()) write_file_atomic(sv_text, text);
      out << text;
      for (const auto& w : report.warnings) err << "warning: " << w << '\n';
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitValidation;
}

}  // namespace poseuq::cli
