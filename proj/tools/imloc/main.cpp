// imloc: command-line front end for training, evaluation, prediction,
// robustness sweeps and dataset utilities.
//
// Exit codes: 0 success, 1 invalid input or arguments, 2 runtime failure.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <iostream>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "imloc/checkpoint.hpp"
#include "imloc/manifest.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Image manipulation localization toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "imloc 0.1.0");

  imloc::cli::TrainOptions train;
  imloc::cli::EvalOptions eval;
  imloc::cli::PredictOptions predict;
  imloc::cli::AttackOptions attack;
  imloc::cli::EdgeMaskOptions edge;
  imloc::cli::VizOptions viz;
  imloc::cli::SynthOptions synth;

  auto* c_train = imloc::cli::add_train(app, train);
  auto* c_eval = imloc::cli::add_eval(app, eval);
  auto* c_predict = imloc::cli::add_predict(app, predict);
  auto* c_attack = imloc::cli::add_attack(app, attack);
  auto* c_edge = imloc::cli::add_edge_mask(app, edge);
  auto* c_viz = imloc::cli::add_viz(app, viz);
  auto* c_synth = imloc::cli::add_synth(app, synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (c_train->parsed()) return imloc::cli::run_train(train);
    if (c_eval->parsed()) return imloc::cli::run_eval(eval);
    if (c_predict->parsed()) return imloc::cli::run_predict(predict);
    if (c_attack->parsed()) return imloc::cli::run_attack(attack);
    if (c_edge->parsed()) return imloc::cli::run_edge_mask(edge);
    if (c_viz->parsed()) return imloc::cli::run_viz(viz);
    if (c_synth->parsed()) return imloc::cli::run_synth(synth);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const imloc::ManifestError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: invalid configuration: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
