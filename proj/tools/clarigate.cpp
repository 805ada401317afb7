// Copyright 2026 The Clarigate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// clarigate: generate, train, eval, ablate, predict, gradcheck.
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 check failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "clarigate/clarigate.hpp"

namespace fs = std::filesystem;
using namespace clarigate;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCheck = 4;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config:
    case ErrorCode::UntrainableVariant:
      return kExitConfig;
    default:
      return kExitData;
  }
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string variant;
  std::string flags;
  std::string out;
  std::optional<double> threshold;
  std::string data;
  std::vector<std::string> checkpoints;
  std::string test;
  std::string input;
};

AppConfig load(const Options& o) {
  AppConfig c = o.config.empty() ? AppConfig{} : load_config(o.config);
  if (o.seed) {
    c.train.seed = *o.seed;
    c.generator.seed = *o.seed;
  }
  if (!o.variant.empty()) c.model.variant = variant_from_string(o.variant);
  if (!o.flags.empty()) c.model.flags = AblationFlags::parse(o.flags);
  if (o.threshold) c.model.threshold = *o.threshold;
  c.generator.detector = c.detector;
  c.generator.snr_bounds = c.snr_bounds;
  c.validate();
  return c;
}

fs::path out_dir(const Options& o) {
  fs::path p = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(p);
  return p;
}

nlohmann::json rates_json(const std::array<double, 5>& r) {
  nlohmann::json j;
  for (auto t : kOccurrenceTypes) j[std::string(to_string(t))] = r[index_of(t)];
  return j;
}

int cmd_generate(const Options& o) {
  const AppConfig c = load(o);
  const DatasetSplits s = generate_dataset(c.generator, resolve_threads());
  const fs::path dir = out_dir(o);
  write_dataset((dir / "train.jsonl").string(), s.train);
  write_dataset((dir / "valid.jsonl").string(), s.valid);
  write_dataset((dir / "test.jsonl").string(), s.test);
  nlohmann::json m;
  m["seed"] = c.generator.seed;
  m["n_examples"] = c.generator.n_examples;
  m["injection_rates"] = rates_json(c.generator.injection_rates);
  m["ask_rates"] = rates_json(c.generator.ask_rates);
  m["flip_rate"] = c.generator.flip_rate;
  m["co_occurrence"] = c.generator.co_occurrence;
  for (const auto& [name, part] : {std::pair{"train", &s.train}, {"valid", &s.valid}, {"test", &s.test}}) {
    m["counts"][name] = part->size();
    m["ask_rate"][name] = ask_rate(*part);
  }
  std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';
  std::cout << "wrote " << s.train.size() << "/" << s.valid.size() << "/" << s.test.size()
            << " train/valid/test examples to " << dir.string() << '\n';
  return kExitOk;
}

Vocabularies vocab_from(const Dataset& d) {
  Vocabularies v;
  for (const auto& r : d) v.observe(r);
  return v;
}

int cmd_train(const Options& o) {
  AppConfig c = load(o);
  const fs::path data(o.data);
  const Dataset train_records = read_dataset((data / "train.jsonl").string());
  const Dataset valid_records = read_dataset((data / "valid.jsonl").string());
  const fs::path dir = out_dir(o);
  const Vocabularies vocabs = vocab_from(train_records);
  nlohmann::json m;
  m["variant"] = std::string(to_string(c.model.variant));
  m["flags"] = c.model.flags.to_string();
  m["seed"] = c.train.seed;
  if (c.model.variant == Variant::ALWAYS) {
    save_checkpoint((dir / "model.ckpt").string(), ClarificationModel(c.model, vocabs, c.train.seed));
    m["best_epoch"] = 0;
  } else {
    const auto train_set = to_labeled(train_records, c.snr_bounds);
    const auto valid_set = to_labeled(valid_records, c.snr_bounds);
    auto result = train(train_set, valid_set, c.model, vocabs, c.train, [](const EpochMetrics& e) {
      std::cout << "epoch " << e.epoch << " loss " << e.loss << " valid_F1 " << e.valid.f1 << '\n';
    });
    save_checkpoint((dir / "model.ckpt").string(), result.best);
    std::ofstream metrics(dir / "metrics.csv");
    write_metrics_csv(metrics, result.history);
    m["best_epoch"] = result.best_epoch;
    m["best_valid_f1"] = result.history[result.best_epoch - 1].valid.f1;
  }
  std::ofstream(dir / "train_manifest.json") << m.dump(2) << '\n';
  std::cout << "checkpoint written to " << (dir / "model.ckpt").string() << '\n';
  return kExitOk;
}

std::vector<bool> predict_decisions(const ClarificationModel& model,
                                    const std::vector<LabeledExample>& data) {
  if (!model.trainable()) return std::vector<bool>(data.size(), true);
  return decisions(predict_all(model, data));
}

ReportRow row_for(const std::string& name, const std::string& flags, const std::vector<bool>& preds,
                  const std::vector<LabeledExample>& data) {
  return ReportRow{name, flags, per_type_f1(preds, data)};
}

void emit_report(const Report& report, const Options& o, const std::string& stem) {
  std::cout << report.to_text();
  if (o.out.empty()) return;
  const fs::path dir = out_dir(o);
  std::ofstream(dir / (stem + ".txt")) << report.to_text();
  std::ofstream(dir / (stem + ".csv")) << report.to_csv();
}

int cmd_eval(const Options& o) {
  const AppConfig c = o.config.empty() ? AppConfig{} : load(o);
  const auto test = to_labeled(read_dataset(o.test), c.snr_bounds);
  if (test.empty()) throw Error(ErrorCode::EmptyDataset, "test set is empty");
  const ReportRow always =
      row_for(std::string(to_string(Variant::ALWAYS)), "none", std::vector<bool>(test.size(), true), test);
  std::vector<ReportRow> rows;
  for (const auto& path : o.checkpoints) {
    ClarificationModel model = load_checkpoint(path);
    if (o.threshold) {
      ModelConfig cfg = model.config();
      cfg.threshold = *o.threshold;
      ClarificationModel adjusted(cfg, model.vocabularies(), model.seed());
      adjusted.params() = model.params();
      model = std::move(adjusted);
    }
    rows.push_back(row_for(std::string(to_string(model.variant())), model.config().flags.to_string(),
                           predict_decisions(model, test), test));
  }
  emit_report(make_report(always, rows), o, "report");
  return kExitOk;
}

int cmd_ablate(const Options& o) {
  AppConfig c = load(o);
  const fs::path data(o.data);
  const Dataset train_records = read_dataset((data / "train.jsonl").string());
  const auto train_set = to_labeled(train_records, c.snr_bounds);
  const auto valid_set = to_labeled(read_dataset((data / "valid.jsonl").string()), c.snr_bounds);
  const auto test_set = to_labeled(read_dataset((data / "test.jsonl").string()), c.snr_bounds);
  if (test_set.empty()) throw Error(ErrorCode::EmptyDataset, "test set is empty");
  const Vocabularies vocabs = vocab_from(train_records);
  auto run = [&](AblationFlags flags) {
    ModelConfig mc = c.model;
    mc.variant = Variant::SELF_ATT2;
    mc.flags = flags;
    auto result = train(train_set, valid_set, mc, vocabs, c.train);
    return row_for(std::string(to_string(Variant::SELF_ATT2)), flags.to_string(),
                   decisions(predict_all(result.best, test_set)), test_set);
  };
  const ReportRow base = run({});
  std::cout << "trained unablated " << to_string(Variant::SELF_ATT2) << '\n';
  std::vector<ReportRow> rows;
  for (const auto& [name, flags] : kSingleAblations) {
    rows.push_back(run(flags));
    std::cout << "trained " << name << '\n';
  }
  emit_report(make_report(base, rows), o, "ablation");
  return kExitOk;
}

int cmd_predict(const Options& o) {
  const ClarificationModel model = load_checkpoint(o.checkpoints.at(0));
  const double threshold = o.threshold.value_or(model.config().threshold);
  std::ifstream file;
  std::istream* in = &std::cin;
  if (!o.input.empty() && o.input != "-") {
    file.open(o.input);
    if (!file) throw Error(ErrorCode::Io, "cannot open " + o.input);
    in = &file;
  }
  std::ofstream out_file;
  std::ostream* out = &std::cout;
  if (!o.out.empty()) {
    out_file.open(o.out);
    if (!out_file) throw Error(ErrorCode::Io, "cannot write " + o.out);
    out = &out_file;
  }
  const SnrBounds bounds = o.config.empty() ? SnrBounds{} : load(o).snr_bounds;
  std::string line;
  for (std::size_t line_no = 1; std::getline(*in, line); ++line_no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ExampleRecord rec;
    try {
      rec = record_from_json(nlohmann::json::parse(line), false);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line_no) + ": " + e.message());
    }
    const LabeledExample ex = to_labeled(rec, bounds);
    const double p = model.trainable() ? model.predict(ex.input).p_ask : 1.0;
    nlohmann::json j = {{"p_ask", p}, {"decision", p >= threshold}};
    *out << j.dump() << '\n';
  }
  return kExitOk;
}

int cmd_gradcheck(const Options& o) {
  const Variant v = o.variant.empty() ? Variant::SELF_ATT2 : variant_from_string(o.variant);
  if (v == Variant::ALWAYS) throw Error(ErrorCode::UntrainableVariant, "ALWAYS has no gradients to check");
  const AblationFlags f = AblationFlags::parse(o.flags.empty() ? "none" : o.flags);
  f.validate();
  const auto report = grad_check(v, f, o.seed.value_or(1));
  std::cout << "variant " << to_string(v) << " flags " << f.to_string() << '\n';
  for (const auto& g : report.groups)
    std::cout << "  " << g.name << "  checked " << g.checked << "  skipped " << g.skipped_kinks
              << "  max_rel " << g.max_rel_error << '\n';
  std::cout << "max relative error " << report.max_rel_error() << " (tolerance " << report.tolerance
            << "): " << (report.passed() ? "PASS" : "FAIL") << '\n';
  return report.passed() ? kExitOk : kExitCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clarification decisions for ambiguous spoken-language turns"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "INI configuration file");
    sub->add_option("--seed", o.seed, "overrides train and generator seeds");
    sub->add_option("--out", o.out, "output directory (file for predict)");
  };
  auto model_opts = [&](CLI::App* sub) {
    sub->add_option("--variant", o.variant, "ALWAYS, NO_ALT, ALT_AVG, CRS_ATT, SELF_SUM, SELF_ATT, SELF_ATT2");
    sub->add_option("--flags", o.flags, "comma list of no_hyp, asr_only, no_sent, diff_att, no_rpt");
    sub->add_option("--threshold", o.threshold, "decision threshold on p_ask");
  };

  auto* gen = app.add_subcommand("generate", "write a synthetic train/valid/test dataset");
  common(gen);
  auto* tr = app.add_subcommand("train", "train one variant and write its checkpoint");
  common(tr);
  model_opts(tr);
  tr->add_option("--data", o.data, "directory with train.jsonl and valid.jsonl")->required();
  auto* ev = app.add_subcommand("eval", "relative F1 report of checkpoints on a test set");
  common(ev);
  ev->add_option("--checkpoint", o.checkpoints, "checkpoint file (repeatable)")->required();
  ev->add_option("--test", o.test, "test JSON-lines file")->required();
  ev->add_option("--threshold", o.threshold, "decision threshold on p_ask");
  auto* ab = app.add_subcommand("ablate", "ablation report for SELF_ATT2");
  common(ab);
  ab->add_option("--data", o.data, "directory with train/valid/test JSON lines")->required();
  auto* pr = app.add_subcommand("predict", "p_ask and decision per input line");
  common(pr);
  pr->add_option("--checkpoint", o.checkpoints, "checkpoint file")->required()->expected(1);
  pr->add_option("--input", o.input, "JSON-lines input, '-' for stdin");
  pr->add_option("--threshold", o.threshold, "decision threshold on p_ask");
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gc->add_option("--seed", o.seed, "micro-batch and initialization seed");
  model_opts(gc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_generate(o);
    if (*tr) return cmd_train(o);
    if (*ev) return cmd_eval(o);
    if (*ab) return cmd_ablate(o);
    if (*pr) return cmd_predict(o);
    if (*gc) return cmd_gradcheck(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitConfig;
}
