// src/experiment.cc
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

#include "inkrover/experiment.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "inkrover/error.h"
#include "inkrover/ink.h"

namespace inkrover {

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

void reject_unknown(const nlohmann::json& doc, const std::set<std::string>& known, const std::string& what) {
  if (!doc.is_object()) throw ConfigError(what + " must be an object");
  for (const auto& [key, value] : doc.items())
    if (!known.count(key)) throw ConfigError("unknown " + what + " key '" + key + "'");
}

}  // namespace

void VariantConfig::validate() const {
  if (name.empty()) throw ConfigError("variant needs a name");
  preprocessing.validate();
  if (!(resample_distance > 0.0)) throw ConfigError("resample_distance must be positive");
  if (!(scale > 0.0)) throw ConfigError("scale must be positive");
  if (pen_width < 1 || margin < 0) throw ConfigError("pen_width must be positive and margin non-negative");
  if (window_width < 1 || window_step < 1) throw ConfigError("window width and step must be positive");
}

VariantConfig variant_config_from_json(const nlohmann::json& doc) {
  reject_unknown(doc,
                 {"name", "source", "preprocess", "preprocessing", "resample_distance", "scale", "pen_width",
                  "margin", "correct_skew", "correct_slant", "window_width", "window_step"},
                 "variant");
  VariantConfig v;
  try {
    v.name = doc.at("name").get<std::string>();
    v.source = feature_source_from_string(doc.value("source", std::string("online")));
    v.preprocess = doc.value("preprocess", v.preprocess);
    if (doc.contains("preprocessing")) v.preprocessing = preprocess_config_from_json(doc["preprocessing"].dump());
    v.resample_distance = doc.value("resample_distance", v.resample_distance);
    v.scale = doc.value("scale", v.scale);
    v.pen_width = doc.value("pen_width", v.pen_width);
    v.margin = doc.value("margin", v.margin);
    v.correct_skew = doc.value("correct_skew", v.correct_skew);
    v.correct_slant = doc.value("correct_slant", v.correct_slant);
    v.window_width = doc.value("window_width", v.window_width);
    v.window_step = doc.value("window_step", v.window_step);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("variant: ") + e.what());
  }
  v.validate();
  return v;
}

nlohmann::ordered_json variant_config_to_json(const VariantConfig& v) {
  nlohmann::ordered_json doc;
  doc["name"] = v.name;
  doc["source"] = std::string(to_string(v.source));
  if (v.source == FeatureSource::kOnline) {
    doc["preprocess"] = v.preprocess;
    doc["preprocessing"] = nlohmann::ordered_json::parse(preprocess_config_to_json(v.preprocessing));
    doc["resample_distance"] = v.resample_distance;
  } else {
    doc["scale"] = v.scale;
    doc["pen_width"] = v.pen_width;
    doc["margin"] = v.margin;
    doc["correct_skew"] = v.correct_skew;
    doc["correct_slant"] = v.correct_slant;
    doc["window_width"] = v.window_width;
    doc["window_step"] = v.window_step;
  }
  return doc;
}

namespace {

RasterImage crop_to_ink(const RasterImage& img, int margin) {
  int x0 = img.width, y0 = img.height, x1 = -1, y1 = -1;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (img.is_ink(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) throw BlankImage("image has no ink");
  RasterImage out(x1 - x0 + 1 + 2 * margin, y1 - y0 + 1 + 2 * margin);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) out.at(x - x0 + margin, y - y0 + margin) = img.at(x, y);
  return out;
}

}  // namespace

FeatureSequence extract_variant_features(const InkTrace& trace, const VariantConfig& cfg) {
  if (cfg.source == FeatureSource::kOnline) {
    const InkTrace ink = cfg.preprocess ? run_online_pipeline(trace, cfg.preprocessing) : trace;
    return extract_online_features(ink, cfg.resample_distance);
  }
  RasterImage img = render_offline(trace, cfg.scale, cfg.pen_width, cfg.margin);
  if (cfg.correct_skew) img = correct_skew(img, estimate_baseline(img).skew_deg);
  if (cfg.correct_slant) img = correct_slant(img);
  img = crop_to_ink(img, cfg.margin);
  const int baseline = estimate_baseline(img).row;
  return shift_to_baseline(extract_offline_windows(img, cfg.window_width, cfg.window_step), baseline);
}

void ExperimentConfig::validate() const {
  synth.validate();
  recognizer.validate();
  alignment.validate();
  if (lexicon_size < 1) throw ConfigError("lexicon_size must be positive");
  if (word_min_length < 1 || word_max_length < word_min_length)
    throw ConfigError("need 1 <= word_min_length <= word_max_length");
  if (lines < 4) throw ConfigError("need at least 4 lines");
  if (variants.size() < 2) throw ConfigError("need at least two variants to combine");
  double total = 0;
  for (double r : split_ratios) {
    if (!(r > 0)) throw ConfigError("split ratios must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  std::set<std::string> names;
  for (const auto& v : variants) {
    v.validate();
    if (!names.insert(v.name).second) throw ConfigError("duplicate variant name '" + v.name + "'");
    if (v.name == "rover") throw ConfigError("'rover' is reserved for the combination");
  }
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& doc) {
  reject_unknown(doc,
                 {"seed", "synth", "lexicon_size", "word_min_length", "word_max_length", "lines", "split_ratios",
                  "recognizer", "variants", "alignment", "workers"},
                 "experiment");
  ExperimentConfig cfg;
  try {
    cfg.seed = doc.value("seed", cfg.seed);
    if (doc.contains("synth")) cfg.synth = synth_config_from_json(doc["synth"]);
    cfg.lexicon_size = doc.value("lexicon_size", cfg.lexicon_size);
    cfg.word_min_length = doc.value("word_min_length", cfg.word_min_length);
    cfg.word_max_length = doc.value("word_max_length", cfg.word_max_length);
    cfg.lines = doc.value("lines", cfg.lines);
    if (doc.contains("split_ratios")) {
      const auto r = doc["split_ratios"].get<std::vector<double>>();
      if (r.size() != 4) throw ConfigError("split_ratios needs four values");
      std::copy(r.begin(), r.end(), cfg.split_ratios.begin());
    }
    if (doc.contains("recognizer")) cfg.recognizer = recognizer_config_from_json(doc["recognizer"]);
    if (doc.contains("variants"))
      for (const auto& v : doc["variants"]) cfg.variants.push_back(variant_config_from_json(v));
    if (doc.contains("alignment")) cfg.alignment = alignment_params_from_json(doc["alignment"]);
    cfg.workers = doc.value("workers", cfg.workers);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["seed"] = cfg.seed;
  doc["synth"] = synth_config_to_json(cfg.synth);
  doc["lexicon_size"] = cfg.lexicon_size;
  doc["word_min_length"] = cfg.word_min_length;
  doc["word_max_length"] = cfg.word_max_length;
  doc["lines"] = cfg.lines;
  doc["split_ratios"] = cfg.split_ratios;
  doc["recognizer"] = recognizer_config_to_json(cfg.recognizer);
  doc["variants"] = nlohmann::ordered_json::array();
  for (const auto& v : cfg.variants) doc["variants"].push_back(variant_config_to_json(v));
  doc["alignment"] = alignment_params_to_json(cfg.alignment);
  doc["workers"] = cfg.workers;
  return doc;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const auto text = read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return experiment_config_from_json(doc);
}

ExperimentData synthesize_experiment_data(const ExperimentConfig& cfg) {
  SynthConfig synth = cfg.synth;
  synth.seed = cfg.seed;
  ExperimentData out;
  out.alphabet = synth_alphabet(synth.alphabet_size);
  out.lexicon = make_lexicon(out.alphabet, cfg.lexicon_size, cfg.word_min_length, cfg.word_max_length, cfg.seed);
  out.data = synth_dataset(synth, out.lexicon, cfg.lines);
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto generated = synthesize_experiment_data(cfg);
  const auto& alphabet = generated.alphabet;
  const auto& lexicon = generated.lexicon;
  const auto& data = generated.data;

  std::vector<std::string> ids;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < data.lines.size(); ++i) {
    ids.push_back(data.lines[i].sample_id);
    index[ids.back()] = i;
  }
  ExperimentReport report;
  report.seed = cfg.seed;
  report.split = split_four_stages(ids, cfg.split_ratios, cfg.seed);
  const auto& split = report.split;

  auto decode = [&](const std::vector<std::string>& stage, const std::vector<FeatureSequence>& feats,
                    const ModelBank& bank, const std::string& system) {
    std::vector<HypothesisTranscript> hyps(stage.size());
    parallel_for(stage.size(), cfg.workers, [&](std::size_t k) {
      hyps[k] = recognize_line(feats[index.at(stage[k])], lexicon, bank, alphabet);
      hyps[k].sample_id = stage[k];
      hyps[k].system_id = system;
    });
    return hyps;
  };
  auto score = [&](const std::vector<HypothesisTranscript>& hyps) {
    ScoreReport total;
    total.recognition_rate = total.accuracy = 100.0;
    for (const auto& h : hyps) total += recognition_rate(h.word_strings(), *data.lines[index.at(h.sample_id)].transcript);
    return total;
  };

  for (const auto& variant : cfg.variants) {
    std::vector<FeatureSequence> feats(data.lines.size());
    parallel_for(data.lines.size(), cfg.workers,
                 [&](std::size_t i) { feats[i] = extract_variant_features(data.lines[i], variant); });
    std::vector<FeatureSequence> train_feats;
    for (const auto& id : split.train) train_feats.push_back(feats[index.at(id)]);
    const auto norm = fit_normalizer(train_feats);
    for (auto& f : feats) f = apply_normalizer(f, norm);

    std::vector<TrainingSample> samples;
    for (const auto& id : split.train) samples.push_back({feats[index.at(id)], *data.lines[index.at(id)].transcript});
    const auto trained = train_models(samples, alphabet, cfg.recognizer);

    SystemResult r;
    r.name = variant.name;
    r.skipped_training_samples = trained.skipped;
    r.validation = score(decode(split.validation_meta, feats, trained.bank, variant.name));
    r.test_hypotheses = decode(split.test, feats, trained.bank, variant.name);
    r.test = score(r.test_hypotheses);
    report.systems.push_back(std::move(r));
  }

  std::vector<std::size_t> order(report.systems.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = report.systems[a].validation;
    const auto& y = report.systems[b].validation;
    if (x.recognition_rate != y.recognition_rate) return x.recognition_rate > y.recognition_rate;
    return x.accuracy > y.accuracy;
  });
  for (std::size_t k : order) report.ranking.push_back(report.systems[k].name);

  const auto best = std::min_element(report.systems.begin(), report.systems.end(), [](const auto& a, const auto& b) {
    if (a.test.recognition_rate != b.test.recognition_rate) return a.test.recognition_rate > b.test.recognition_rate;
    return a.test.accuracy > b.test.accuracy;
  });
  report.best_system = best->name;
  report.best = best->test;

  report.combined_hypotheses.resize(split.test.size());
  parallel_for(split.test.size(), cfg.workers, [&](std::size_t k) {
    std::vector<HypothesisTranscript> hyps;
    for (const auto& s : report.systems) hyps.push_back(s.test_hypotheses[k]);
    report.combined_hypotheses[k] = combine(hyps, cfg.alignment, report.ranking, "rover");
  });
  report.combined = score(report.combined_hypotheses);
  return report;
}

std::string format_experiment_markdown(const ExperimentReport& report) {
  std::vector<SystemScore> rows;
  for (const auto& s : report.systems) rows.push_back({s.name, s.test});
  std::string out = "# Experiment (seed " + std::to_string(report.seed) + ")\n\n";
  out += "Split: " + std::to_string(report.split.train.size()) + " train, " +
         std::to_string(report.split.validation_meta.size()) + " validation_meta, " +
         std::to_string(report.split.validation_lm.size()) + " validation_lm, " +
         std::to_string(report.split.test.size()) + " test lines.\n\n";
  out += format_system_table("## Single systems (test stage)", rows) + "\n";
  out += "Ranking from validation_meta: ";
  for (std::size_t k = 0; k < report.ranking.size(); ++k) out += (k ? " > " : "") + report.ranking[k];
  out += "\n\n";
  out += format_combination_table("## Combination (test stage)", {report.best_system, report.best},
                                  {"ROVER combination (" + std::to_string(report.systems.size()) + " systems)",
                                   report.combined});
  return out;
}

nlohmann::ordered_json experiment_report_to_json(const ExperimentReport& report) {
  nlohmann::ordered_json doc;
  doc["seed"] = report.seed;
  doc["split"] = split_to_json(report.split);
  doc["systems"] = nlohmann::ordered_json::array();
  for (const auto& s : report.systems) {
    nlohmann::ordered_json row;
    row["name"] = s.name;
    row["validation"] = score_to_json(s.validation);
    row["test"] = score_to_json(s.test);
    row["skipped_training_samples"] = s.skipped_training_samples;
    doc["systems"].push_back(row);
  }
  doc["ranking"] = report.ranking;
  doc["best_system"] = report.best_system;
  doc["combined"] = score_to_json(report.combined);
  doc["delta_recognition_rate"] = report.delta_rate();
  doc["delta_accuracy"] = report.delta_accuracy();
  return doc;
}

}  // namespace inkrover
