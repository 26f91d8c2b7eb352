/*
 * Copyright 2026 The hardmine Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// hardmine CLI: generate | train | evaluate | compare | report
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
// Every command honors the config seed (or --seed) and writes
// byte-reproducible outputs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hardmine/dataset.hpp"
#include "hardmine/detector.hpp"
#include "hardmine/evaluation.hpp"
#include "hardmine/io.hpp"
#include "hardmine/reports.hpp"
#include "hardmine/targets.hpp"
#include "hardmine/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  std::uint64_t seed = 7;
  int count = 512;
  hardmine::SceneSpec scene;
  hardmine::GridSpec grid;
  hardmine::TrainConfig train;
  hardmine::EvalConfig eval;
  std::string dataset_dir = "data";
  std::string model_path = "model.bin";
  std::string log_path;  // defaults to <model>.train.jsonl
  std::string out_dir = "out";
};

void reject_unknown(const json& j, const std::string& prefix,
                    const std::set<std::string>& allowed) {
  for (const auto& item : j.items())
    if (allowed.find(item.key()) == allowed.end())
      throw hardmine::ConfigError("unknown config key: " + prefix + item.key());
}

template <typename T>
void read_field(const json& j, const char* key, T& into) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw hardmine::ConfigError(std::string("config key has wrong type: ") +
                                key);
  }
}

void read_range(const json& j, const std::string& prefix, const char* key,
                int& lo, int& hi) {
  if (!j.contains(key)) return;
  const json& r = j.at(key);
  if (!r.is_array() || r.size() != 2)
    throw hardmine::ConfigError("config key must be [min,max]: " + prefix +
                                key);
  lo = r[0].get<int>();
  hi = r[1].get<int>();
}

void apply_config(const json& j, RunConfig& rc) {
  reject_unknown(j, "", {"seed", "count", "scene", "grid", "loss", "train",
                         "eval", "paths"});
  read_field(j, "seed", rc.seed);
  read_field(j, "count", rc.count);

  if (j.contains("scene")) {
    const json& s = j.at("scene");
    reject_unknown(s, "scene.",
                   {"image_size", "presence_prob", "target_size",
                    "distractors", "noise"});
    read_field(s, "image_size", rc.scene.image_size);
    read_field(s, "presence_prob", rc.scene.presence_prob);
    read_range(s, "scene.", "target_size", rc.scene.target_size_min,
               rc.scene.target_size_max);
    read_range(s, "scene.", "distractors", rc.scene.distractor_min,
               rc.scene.distractor_max);
    read_field(s, "noise", rc.scene.noise);
  }
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    reject_unknown(g, "grid.", {"cells"});
    if (g.contains("cells")) {
      const auto cells = g.at("cells").get<std::vector<int>>();
      if (cells.size() != hardmine::kNumScales)
        throw hardmine::ConfigError("grid.cells must list three sizes");
      for (int s = 0; s < hardmine::kNumScales; ++s)
        rc.grid.cells[s] = cells[s];
    }
  }
  if (j.contains("loss")) {
    const json& l = j.at("loss");
    reject_unknown(l, "loss.",
                   {"variant", "alpha", "gamma", "xi", "rank_b", "eps"});
    if (l.contains("variant"))
      rc.train.loss.variant =
          hardmine::parse_variant(l.at("variant").get<std::string>());
    read_field(l, "alpha", rc.train.loss.alpha);
    read_field(l, "gamma", rc.train.loss.gamma);
    read_field(l, "xi", rc.train.loss.xi);
    read_field(l, "rank_b", rc.train.loss.rank_b);
    read_field(l, "eps", rc.train.loss.eps);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t, "train.",
                   {"lambda_box", "learning_rate", "epochs", "batch_size",
                    "channels"});
    read_field(t, "lambda_box", rc.train.lambda_box);
    read_field(t, "learning_rate", rc.train.learning_rate);
    read_field(t, "epochs", rc.train.epochs);
    read_field(t, "batch_size", rc.train.batch_size);
    read_field(t, "channels", rc.train.channels);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    reject_unknown(e, "eval.", {"conf_thr", "iou_thr", "min_confidence"});
    read_field(e, "conf_thr", rc.eval.conf_thr);
    read_field(e, "iou_thr", rc.eval.iou_thr);
    read_field(e, "min_confidence", rc.eval.min_confidence);
  }
  if (j.contains("paths")) {
    const json& p = j.at("paths");
    reject_unknown(p, "paths.", {"dataset", "model", "log", "out"});
    read_field(p, "dataset", rc.dataset_dir);
    read_field(p, "model", rc.model_path);
    read_field(p, "log", rc.log_path);
    read_field(p, "out", rc.out_dir);
  }
}

RunConfig load_run_config(const std::string& path) {
  RunConfig rc;
  if (path.empty()) return rc;
  std::ifstream f(path);
  if (!f) throw hardmine::ConfigError("cannot open config file: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw hardmine::ConfigError("config is not valid JSON: " +
                                std::string(e.what()));
  }
  apply_config(j, rc);
  return rc;
}

// The grid always runs at the scene resolution; the scene seed is the run
// seed so one value pins the whole pipeline.
void finalize(RunConfig& rc) {
  rc.scene.seed = rc.seed;
  rc.train.seed = rc.seed;
  rc.grid.image_size = rc.scene.image_size;
  if (rc.log_path.empty()) rc.log_path = rc.model_path + ".train.jsonl";
}

int cmd_generate(const RunConfig& rc) {
  const hardmine::Dataset data =
      hardmine::generate_dataset(rc.scene, rc.count);
  hardmine::export_dataset(data, rc.dataset_dir);
  std::size_t positives = 0;
  for (const auto& f : data.frames) positives += f.box.has_value() ? 1 : 0;
  std::cout << "wrote " << data.frames.size() << " frames to "
            << rc.dataset_dir << " (" << positives << " with targets, "
            << hardmine::detail::fixed2(
                   100.0 * positives / data.frames.size())
            << "% positive)\n";
  return 0;
}

int cmd_train(const RunConfig& rc) {
  const hardmine::Dataset data = hardmine::import_dataset(rc.dataset_dir);
  hardmine::GridSpec grid = rc.grid;
  grid.image_size = data.image_size;
  const hardmine::TrainResult result = hardmine::train(data, grid, rc.train);
  hardmine::save_model(result.model, rc.model_path);
  hardmine::write_training_log(rc.log_path, result.history);
  const auto& last = result.history.back();
  std::cout << "trained variant=" << hardmine::to_string(rc.train.loss.variant)
            << " for " << result.history.size() << " epochs; final loss "
            << last.total << " (objectness " << last.objectness << ", box "
            << last.box << ")\n"
            << "model: " << rc.model_path << "\nlog: " << rc.log_path << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& rc, const std::string& method_name) {
  const hardmine::DetectorModel model = hardmine::load_model(rc.model_path);
  const hardmine::Dataset data = hardmine::import_dataset(rc.dataset_dir);
  if (data.image_size != model.grid.image_size)
    throw hardmine::DataError("evaluate: model and dataset image sizes differ");

  const auto dets =
      hardmine::detect_dataset(model, data, rc.eval.min_confidence);
  const auto gts = hardmine::dataset_ground_truth(data);
  const hardmine::MetricsReport metrics =
      hardmine::compute_metrics(dets, gts, rc.eval);

  fs::create_directories(rc.out_dir);
  hardmine::write_detections(fs::path(rc.out_dir) / "detections.jsonl", dets);
  {
    std::ofstream csv(fs::path(rc.out_dir) / "metrics.csv");
    csv << hardmine::render_metrics_csv(metrics, method_name);
  }
  std::cout << hardmine::render_metrics_table(metrics, method_name);
  std::cout << "detections: " << (fs::path(rc.out_dir) / "detections.jsonl").string()
            << "\n";
  return 0;
}

int cmd_compare(const RunConfig& rc, const std::string& m1_path,
                const std::string& m2_path, const std::string& gt_path,
                const std::string& name_m1, const std::string& name_m2,
                const std::string& out_dir) {
  const auto gts = hardmine::read_ground_truth(gt_path);
  const auto dets1 = hardmine::read_detections(m1_path);
  const auto dets2 = hardmine::read_detections(m2_path);
  const auto outcomes1 = hardmine::classify_all(dets1, gts, rc.eval);
  const auto outcomes2 = hardmine::classify_all(dets2, gts, rc.eval);
  const auto pairs = hardmine::pair_outcomes(outcomes1, outcomes2);
  const hardmine::PairwiseReport rep = hardmine::pairwise_report(pairs);
  std::cout << hardmine::render_pairwise_table(rep, name_m1, name_m2);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "pairwise.csv");
    csv << hardmine::render_pairwise_csv(rep);
  }
  return 0;
}

int cmd_report(const RunConfig& rc, const std::string& det_path,
               const std::string& gt_path, const std::string& method_name,
               const std::string& out_dir) {
  const auto gts = hardmine::read_ground_truth(gt_path);
  const auto dets = hardmine::read_detections(det_path);
  const hardmine::MetricsReport metrics =
      hardmine::compute_metrics(dets, gts, rc.eval);
  std::cout << hardmine::render_metrics_table(metrics, method_name);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "metrics.csv");
    csv << hardmine::render_metrics_csv(metrics, method_name);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "hardmine: hard-example-mining objectness losses, a toy single-shot "
      "grid detector, and head-to-head detection evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string variant_override;
  std::uint64_t seed_override = 0;
  bool seed_given = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--seed", seed_override, "seed override")
        ->each([&](const std::string&) { seed_given = true; });
  };

  CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset");
  std::string out_override;
  int count_override = 0;
  add_common(generate);
  generate->add_option("--out", out_override, "dataset directory");
  generate->add_option("--count", count_override, "number of frames");

  CLI::App* train = app.add_subcommand("train", "train a detector");
  std::string dataset_override, model_override;
  add_common(train);
  train->add_option("--dataset", dataset_override, "dataset directory");
  train->add_option("--model", model_override, "model output path");
  train->add_option("--variant", variant_override,
                    "loss variant: bce|focal|balanced_focal|lrm|combined");

  CLI::App* evaluate = app.add_subcommand("evaluate", "run a model over a dataset");
  std::string eval_name = "model";
  add_common(evaluate);
  evaluate->add_option("--dataset", dataset_override, "dataset directory");
  evaluate->add_option("--model", model_override, "model path");
  evaluate->add_option("--out", out_override, "output directory");
  evaluate->add_option("--name", eval_name, "method label in reports");

  CLI::App* compare = app.add_subcommand(
      "compare", "pair two detection files frame by frame");
  std::string m1_path, m2_path, gt_path, name_m1 = "M1", name_m2 = "M2";
  add_common(compare);
  compare->add_option("--m1", m1_path, "detections of method 1")->required();
  compare->add_option("--m2", m2_path, "detections of method 2")->required();
  compare->add_option("--gt", gt_path, "ground-truth JSON-lines")->required();
  compare->add_option("--name-m1", name_m1, "label for method 1");
  compare->add_option("--name-m2", name_m2, "label for method 2");
  compare->add_option("--out", out_override, "directory for pairwise.csv");

  CLI::App* report = app.add_subcommand(
      "report", "metrics from a saved detection file");
  std::string det_path, report_name = "model";
  add_common(report);
  report->add_option("--detections", det_path, "detections JSON-lines")
      ->required();
  report->add_option("--gt", gt_path, "ground-truth JSON-lines")->required();
  report->add_option("--name", report_name, "method label in reports");
  report->add_option("--out", out_override, "directory for metrics.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunConfig rc = load_run_config(config_path);
    if (seed_given) rc.seed = seed_override;
    if (!variant_override.empty())
      rc.train.loss.variant = hardmine::parse_variant(variant_override);
    if (!dataset_override.empty()) rc.dataset_dir = dataset_override;
    if (!model_override.empty()) rc.model_path = model_override;
    finalize(rc);

    if (generate->parsed()) {
      if (!out_override.empty()) rc.dataset_dir = out_override;
      if (count_override > 0) rc.count = count_override;
      return cmd_generate(rc);
    }
    if (train->parsed()) return cmd_train(rc);
    if (evaluate->parsed()) {
      if (!out_override.empty()) rc.out_dir = out_override;
      return cmd_evaluate(rc, eval_name);
    }
    if (compare->parsed())
      return cmd_compare(rc, m1_path, m2_path, gt_path, name_m1, name_m2,
                         out_override);
    if (report->parsed())
      return cmd_report(rc, det_path, gt_path, report_name, out_override);
    return 2;
  } catch (const hardmine::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const hardmine::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const hardmine::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::domain_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
