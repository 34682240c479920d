// tools/inkrover.cc
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Exit codes: 0 success, 2 invalid input or
// configuration, 1 anything else.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "inkrover/error.h"
#include "inkrover/experiment.h"
#include "inkrover/ink.h"
#include "inkrover/preprocess.h"
#include "inkrover/recognizer.h"
#include "inkrover/rover.h"
#include "inkrover/scoring.h"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace inkrover;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kModelVersion = 1;

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const ojson& doc) { write_file(path, doc.dump(2) + "\n"); }

std::string data_path(const std::string& dir, const std::string& id) { return (fs::path(dir) / (id + ".json")).string(); }

std::vector<std::string> stage_ids(const DatasetSplit& split, const std::string& stage) {
  if (stage == "train") return split.train;
  if (stage == "validation_meta") return split.validation_meta;
  if (stage == "validation_lm") return split.validation_lm;
  if (stage == "test") return split.test;
  throw ConfigError("unknown stage '" + stage + "'");
}

std::vector<InkTrace> load_stage(const std::string& dir, const std::vector<std::string>& ids) {
  std::vector<InkTrace> lines;
  for (const auto& id : ids) {
    lines.push_back(read_ink_file(data_path(dir, id)));
    if (lines.back().sample_id != id) throw InvariantError(data_path(dir, id) + " holds sample '" + lines.back().sample_id + "'");
  }
  return lines;
}

std::vector<std::string> read_ids(const std::string& path) {
  std::vector<std::string> ids;
  std::istringstream in(read_file(path));
  for (std::string id; in >> id;) ids.push_back(id);
  return ids;
}

ojson normalizer_to_json(const NormalizerStats& n) { return {{"mean", n.mean}, {"stddev", n.stddev}}; }

NormalizerStats normalizer_from_json(const json& doc) {
  NormalizerStats n;
  try {
    n.mean = doc.at("mean").get<std::vector<double>>();
    n.stddev = doc.at("stddev").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("normalizer: ") + e.what());
  }
  if (n.mean.size() != n.stddev.size()) throw ParseError("normalizer: mean and stddev differ in length");
  return n;
}

struct TrainedSystem {
  VariantConfig variant;
  NormalizerStats normalizer;
  Alphabet alphabet;
  ModelBank bank;
};

TrainedSystem load_model(const std::string& path) {
  const auto doc = read_json(path);
  if (!doc.is_object() || doc.value("version", 0) != kModelVersion)
    throw ParseError(path + ": expected a model document with \"version\": 1");
  TrainedSystem s;
  try {
    s.variant = variant_config_from_json(doc.at("variant"));
    s.normalizer = normalizer_from_json(doc.at("normalizer"));
    s.alphabet = parse_alphabet(doc.at("alphabet").get<std::string>());
    s.bank = bank_from_json(doc.at("bank"));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return s;
}

std::vector<HypothesisTranscript> read_ctm(const std::string& path) { return parse_ctm(read_file(path)); }

std::map<std::string, std::vector<std::string>> references(const std::string& dir, const std::vector<std::string>& ids) {
  std::map<std::string, std::vector<std::string>> refs;
  for (auto& line : load_stage(dir, ids)) {
    if (!line.transcript) throw InvariantError("sample '" + line.sample_id + "' has no transcript");
    refs[line.sample_id] = *line.transcript;
  }
  return refs;
}

// ---- subcommands

struct SynthArgs {
  std::string config, out_dir;
  std::optional<std::uint64_t> seed;
};

void run_synth(const SynthArgs& a) {
  auto cfg = load_experiment_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  const auto gen = synthesize_experiment_data(cfg);
  fs::create_directories(a.out_dir);
  std::string ids;
  for (const auto& line : gen.data.lines) {
    write_ink_file(data_path(a.out_dir, line.sample_id), line);
    ids += line.sample_id + "\n";
  }
  const fs::path dir(a.out_dir);
  write_file((dir / "ids.txt").string(), ids);
  write_file((dir / "lexicon.txt").string(), format_lexicon(gen.lexicon));
  write_file((dir / "alphabet.txt").string(), format_alphabet(gen.alphabet));
  ojson info;
  info["seed"] = cfg.seed;
  info["synth"] = synth_config_to_json(cfg.synth);
  info["strokes"] = gen.data.stats.strokes;
  info["hooks"] = gen.data.stats.hooks;
  info["gaps"] = gen.data.stats.gaps;
  info["writers"] = gen.data.writer;
  info["writer_slant_deg"] = gen.data.writer_slant_deg;
  write_json((dir / "synth.json").string(), info);
  std::cout << "wrote " << gen.data.lines.size() << " lines to " << a.out_dir << "\n";
}

struct SplitArgs {
  std::string ids, out;
  std::uint64_t seed = 1;
  std::vector<double> ratios{kDefaultSplitRatios.begin(), kDefaultSplitRatios.end()};
};

void run_split(const SplitArgs& a) {
  if (a.ratios.size() != 4) throw ConfigError("--ratios takes four values");
  const auto split = split_four_stages(read_ids(a.ids), {a.ratios[0], a.ratios[1], a.ratios[2], a.ratios[3]}, a.seed);
  write_json(a.out, split_to_json(split));
  std::cout << split.train.size() << " train, " << split.validation_meta.size() << " validation_meta, "
            << split.validation_lm.size() << " validation_lm, " << split.test.size() << " test\n";
}

struct TrainArgs {
  std::string data, split, variant, recognizer, alphabet, out;
};

void run_train(const TrainArgs& a) {
  const auto variant = variant_config_from_json(read_json(a.variant));
  const auto rcfg = a.recognizer.empty() ? RecognizerConfig{} : recognizer_config_from_json(read_json(a.recognizer));
  const auto alphabet = parse_alphabet(read_file(a.alphabet.empty() ? (fs::path(a.data) / "alphabet.txt").string() : a.alphabet));
  const auto split = split_from_json(read_json(a.split));
  const auto lines = load_stage(a.data, split.train);
  std::vector<FeatureSequence> feats;
  for (const auto& line : lines) feats.push_back(extract_variant_features(line, variant));
  const auto norm = fit_normalizer(feats);
  std::vector<TrainingSample> samples;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!lines[i].transcript) throw InvariantError("training sample '" + lines[i].sample_id + "' has no transcript");
    samples.push_back({apply_normalizer(feats[i], norm), *lines[i].transcript});
  }
  const auto trained = train_models(samples, alphabet, rcfg);
  ojson doc;
  doc["version"] = kModelVersion;
  doc["variant"] = variant_config_to_json(variant);
  doc["normalizer"] = normalizer_to_json(norm);
  doc["alphabet"] = format_alphabet(alphabet);
  doc["bank"] = bank_to_json(trained.bank);
  write_json(a.out, doc);
  std::cout << "trained " << trained.bank.forms.size() << " forms on " << samples.size() << " lines";
  if (trained.skipped) std::cout << " (" << trained.skipped << " skipped)";
  if (!trained.bank.uncovered.empty()) std::cout << ", " << trained.bank.uncovered.size() << " forms uncovered";
  std::cout << "\n";
}

struct RecognizeArgs {
  std::string data, split, stage = "test", model, lexicon, system, out;
  std::size_t workers = 0;
};

void run_recognize(const RecognizeArgs& a) {
  const auto sys = load_model(a.model);
  const auto lexicon = parse_lexicon(read_file(a.lexicon.empty() ? (fs::path(a.data) / "lexicon.txt").string() : a.lexicon));
  const auto ids = stage_ids(split_from_json(read_json(a.split)), a.stage);
  const auto lines = load_stage(a.data, ids);
  const std::string system = a.system.empty() ? sys.variant.name : a.system;
  std::vector<HypothesisTranscript> hyps(lines.size());
  parallel_for(lines.size(), a.workers, [&](std::size_t i) {
    const auto feats = apply_normalizer(extract_variant_features(lines[i], sys.variant), sys.normalizer);
    hyps[i] = recognize_line(feats, lexicon, sys.bank, sys.alphabet);
    hyps[i].sample_id = lines[i].sample_id;
    hyps[i].system_id = system;
  });
  write_file(a.out, format_ctm(hyps));
  std::cout << "recognized " << hyps.size() << " lines as " << system << "\n";
}

struct CombineArgs {
  std::vector<std::string> hyps;
  std::string ranking, time_mode = "off", alignment, system = "rover", out;
};

void run_combine(const CombineArgs& a) {
  if (a.hyps.size() < 2) throw ConfigError("combine needs at least two hypothesis files");
  AlignmentParams params = a.alignment.empty() ? AlignmentParams{} : alignment_params_from_json(read_json(a.alignment));
  if (a.time_mode == "strict") {
    const double overlap = a.alignment.empty() ? AlignmentParams::strict().time_overlap_min : params.time_overlap_min;
    params.time_mode = TimeMode::kStrict;
    params.time_overlap_min = overlap;
  } else if (a.time_mode != "off") {
    throw ConfigError("--time-mode must be off or strict");
  }
  const auto ranking = parse_ranking(read_file(a.ranking));
  std::map<std::string, std::vector<HypothesisTranscript>> by_sample;
  std::vector<std::string> order;
  std::set<std::string> systems;
  for (const auto& path : a.hyps) {
    for (auto& h : read_ctm(path)) {
      systems.insert(h.system_id);
      if (!by_sample.count(h.sample_id)) order.push_back(h.sample_id);
      by_sample[h.sample_id].push_back(std::move(h));
    }
  }
  std::vector<HypothesisTranscript> out;
  for (const auto& id : order) {
    const auto& group = by_sample[id];
    if (group.size() != systems.size())
      throw MismatchedSample("sample '" + id + "' has " + std::to_string(group.size()) + " of " +
                             std::to_string(systems.size()) + " system transcripts");
    out.push_back(combine(group, params, ranking, a.system));
  }
  write_file(a.out, format_ctm(out));
  std::cout << "combined " << systems.size() << " systems over " << out.size() << " lines\n";
}

struct EvaluateArgs {
  std::vector<std::string> hyps;
  std::string data, split, stage = "test", combined = "rover", out_md, out_json, ranking_out, title = "Results";
};

void run_evaluate(const EvaluateArgs& a) {
  std::vector<std::string> ids;
  if (!a.split.empty()) {
    ids = stage_ids(split_from_json(read_json(a.split)), a.stage);
  } else {
    ids = read_ids((fs::path(a.data) / "ids.txt").string());
  }
  const auto refs = references(a.data, ids);
  std::map<std::string, std::map<std::string, std::vector<std::string>>> by_system;
  std::vector<std::string> systems;
  for (const auto& path : a.hyps) {
    for (const auto& h : read_ctm(path)) {
      if (!refs.count(h.sample_id)) throw MismatchedSample("sample '" + h.sample_id + "' is not in the evaluated stage");
      if (!by_system.count(h.system_id)) systems.push_back(h.system_id);
      if (!by_system[h.system_id].emplace(h.sample_id, h.word_strings()).second)
        throw DuplicateSystem("system '" + h.system_id + "' has two transcripts for '" + h.sample_id + "'");
    }
  }
  if (systems.empty()) throw ConfigError("no hypotheses to evaluate");
  std::vector<SystemScore> scores;
  for (const auto& sys : systems) {
    ScoreReport total;
    total.recognition_rate = total.accuracy = 100.0;
    for (const auto& [id, ref] : refs) {
      const auto it = by_system[sys].find(id);
      total += recognition_rate(it == by_system[sys].end() ? std::vector<std::string>{} : it->second, ref);
    }
    scores.push_back({sys, total});
  }
  std::string md = format_system_table("## " + a.title, scores);
  ojson doc;
  doc["stage"] = a.split.empty() ? "all" : a.stage;
  doc["lines"] = refs.size();
  doc["systems"] = ojson::array();
  for (const auto& s : scores) doc["systems"].push_back({{"name", s.name}, {"score", score_to_json(s.report)}});

  std::vector<SystemScore> singles;
  const SystemScore* combined = nullptr;
  for (const auto& s : scores) {
    if (s.name == a.combined) combined = &s;
    else singles.push_back(s);
  }
  std::stable_sort(singles.begin(), singles.end(), [](const SystemScore& x, const SystemScore& y) {
    if (x.report.recognition_rate != y.report.recognition_rate) return x.report.recognition_rate > y.report.recognition_rate;
    return x.report.accuracy > y.report.accuracy;
  });
  doc["ranking"] = ojson::array();
  for (const auto& s : singles) doc["ranking"].push_back(s.name);
  if (combined && !singles.empty()) {
    md += "\n" + format_combination_table("## Combination", singles.front(),
                                          {"ROVER combination (" + std::to_string(singles.size()) + " systems)",
                                           combined->report});
    doc["best_system"] = singles.front().name;
    doc["delta_recognition_rate"] = combined->report.recognition_rate - singles.front().report.recognition_rate;
    doc["delta_accuracy"] = combined->report.accuracy - singles.front().report.accuracy;
  }
  if (!a.ranking_out.empty()) {
    SystemRanking ranking;
    for (const auto& s : singles) ranking.push_back(s.name);
    write_file(a.ranking_out, format_ranking(ranking));
  }
  if (!a.out_md.empty()) write_file(a.out_md, md);
  if (!a.out_json.empty()) write_json(a.out_json, doc);
  std::cout << md;
}

struct ExperimentArgs {
  std::string config, out_md, out_json, out_ctm;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
};

void run_experiment_cmd(const ExperimentArgs& a) {
  auto cfg = load_experiment_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.workers) cfg.workers = *a.workers;
  const auto report = run_experiment(cfg);
  const auto md = format_experiment_markdown(report);
  if (!a.out_md.empty()) write_file(a.out_md, md);
  if (!a.out_json.empty()) write_json(a.out_json, experiment_report_to_json(report));
  if (!a.out_ctm.empty()) {
    std::vector<HypothesisTranscript> all;
    for (const auto& s : report.systems) all.insert(all.end(), s.test_hypotheses.begin(), s.test_hypotheses.end());
    all.insert(all.end(), report.combined_hypotheses.begin(), report.combined_hypotheses.end());
    write_file(a.out_ctm, format_ctm(all));
  }
  std::cout << md;
}

struct PreprocessArgs {
  std::string in, out, config, render;
  double scale = 1.0;
  int pen_width = 2, margin = 4;
};

void run_preprocess(const PreprocessArgs& a) {
  const auto cfg = a.config.empty() ? PreprocessConfig{} : preprocess_config_from_json(read_file(a.config));
  const auto clean = run_online_pipeline(read_ink_file(a.in), cfg);
  write_ink_file(a.out, clean);
  if (!a.render.empty()) write_pgm_file(a.render, render_offline(clean, a.scale, a.pen_width, a.margin));
}

struct FeaturesArgs {
  std::string in, out;
  double resample = 1.0;
  int window = 1, step = 1;
  bool raw = false;
};

void run_features(const FeaturesArgs& a) {
  FeatureSequence seq;
  if (fs::path(a.in).extension() == ".pgm") {
    const auto image = read_pgm_file(a.in);
    seq = extract_offline_windows(image, a.window, a.step);
    if (!a.raw) seq = shift_to_baseline(std::move(seq), estimate_baseline(image).row);
  } else {
    seq = extract_online_features(read_ink_file(a.in), a.resample);
  }
  write_file(a.out, write_feature_dump(seq));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Handwriting recognition with HMMs and ROVER combination"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c = app.add_subcommand("synth", "generate a synthetic line corpus");
  c->add_option("--config", synth.config, "experiment config (synth, lexicon and line settings)")->required();
  c->add_option("--seed", synth.seed, "override the config seed");
  c->add_option("--out-dir", synth.out_dir, "directory for ink files, ids.txt, lexicon.txt, alphabet.txt")->required();
  c->callback([&] { run_synth(synth); });

  SplitArgs split;
  c = app.add_subcommand("split", "four-stage split of sample ids");
  c->add_option("--ids", split.ids, "file of sample ids")->required();
  c->add_option("--seed", split.seed);
  c->add_option("--ratios", split.ratios, "train validation_meta validation_lm test")->expected(4);
  c->add_option("--out", split.out)->required();
  c->callback([&] { run_split(split); });

  TrainArgs train;
  c = app.add_subcommand("train", "train one recognizer variant");
  c->add_option("--data", train.data, "corpus directory")->required();
  c->add_option("--split", train.split)->required();
  c->add_option("--variant", train.variant, "variant config")->required();
  c->add_option("--recognizer", train.recognizer, "recognizer config");
  c->add_option("--alphabet", train.alphabet, "alphabet file, default <data>/alphabet.txt");
  c->add_option("--out", train.out, "model file")->required();
  c->callback([&] { run_train(train); });

  RecognizeArgs rec;
  c = app.add_subcommand("recognize", "decode one split stage");
  c->add_option("--data", rec.data)->required();
  c->add_option("--split", rec.split)->required();
  c->add_option("--stage", rec.stage);
  c->add_option("--model", rec.model)->required();
  c->add_option("--lexicon", rec.lexicon, "lexicon file, default <data>/lexicon.txt");
  c->add_option("--system", rec.system, "system id, default the variant name");
  c->add_option("--workers", rec.workers);
  c->add_option("--out", rec.out, "CTM file")->required();
  c->callback([&] { run_recognize(rec); });

  CombineArgs comb;
  c = app.add_subcommand("combine", "ROVER combination of CTM files");
  c->add_option("--hyps", comb.hyps)->required()->expected(1, -1);
  c->add_option("--ranking", comb.ranking, "system ids, best first")->required();
  c->add_option("--time-mode", comb.time_mode, "off or strict");
  c->add_option("--alignment", comb.alignment, "alignment config");
  c->add_option("--system", comb.system);
  c->add_option("--out", comb.out)->required();
  c->callback([&] { run_combine(comb); });

  EvaluateArgs ev;
  c = app.add_subcommand("evaluate", "score CTM files against transcripts");
  c->add_option("--hyps", ev.hyps)->required()->expected(1, -1);
  c->add_option("--data", ev.data)->required();
  c->add_option("--split", ev.split);
  c->add_option("--stage", ev.stage);
  c->add_option("--combined", ev.combined, "system id of the combination");
  c->add_option("--title", ev.title);
  c->add_option("--ranking-out", ev.ranking_out, "write single systems best first");
  c->add_option("--out-md", ev.out_md);
  c->add_option("--out-json", ev.out_json);
  c->callback([&] { run_evaluate(ev); });

  ExperimentArgs exp;
  c = app.add_subcommand("experiment", "synthesize, train, recognize, combine and score");
  c->add_option("--config", exp.config)->required();
  c->add_option("--seed", exp.seed);
  c->add_option("--workers", exp.workers);
  c->add_option("--out-md", exp.out_md);
  c->add_option("--out-json", exp.out_json);
  c->add_option("--out-ctm", exp.out_ctm, "test hypotheses of every system");
  c->callback([&] { run_experiment_cmd(exp); });

  PreprocessArgs pre;
  c = app.add_subcommand("preprocess", "online preprocessing of one ink file");
  c->add_option("--in", pre.in)->required();
  c->add_option("--out", pre.out)->required();
  c->add_option("--config", pre.config);
  c->add_option("--render", pre.render, "also write a PGM rendering");
  c->add_option("--scale", pre.scale);
  c->add_option("--pen-width", pre.pen_width);
  c->add_option("--margin", pre.margin);
  c->callback([&] { run_preprocess(pre); });

  FeaturesArgs feat;
  c = app.add_subcommand("features", "dump features of an ink file or PGM image");
  c->add_option("--in", feat.in)->required();
  c->add_option("--out", feat.out)->required();
  c->add_option("--resample", feat.resample, "online resampling distance");
  c->add_option("--window", feat.window);
  c->add_option("--step", feat.step);
  c->add_flag("--no-baseline", feat.raw, "keep row coordinates absolute");
  c->callback([&] { run_features(feat); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
