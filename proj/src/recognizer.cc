// src/recognizer.cc
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

#include "inkrover/recognizer.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "inkrover/error.h"
#include "inkrover/hmm_io.h"
#include "inkrover/ink.h"

namespace inkrover {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

// Byte length of the UTF-8 sequence starting with `lead`.
std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> content_lines(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    out.push_back(std::move(t));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string_view to_string(Position pos) {
  switch (pos) {
    case Position::kIsolated: return "isolated";
    case Position::kInitial: return "initial";
    case Position::kMedial: return "medial";
    case Position::kFinal: return "final";
  }
  return "isolated";
}

Position position_from_string(std::string_view name) {
  for (Position p : {Position::kIsolated, Position::kInitial, Position::kMedial, Position::kFinal}) {
    if (to_string(p) == name) return p;
  }
  throw ParseError("unknown positional form '" + std::string(name) + "'");
}

std::string FormKey::name() const { return ch + ":" + std::string(to_string(pos)); }

Alphabet::Alphabet(std::vector<std::string> chars, std::vector<JoiningClass> classes)
    : chars_(std::move(chars)), classes_(std::move(classes)) {
  if (chars_.size() != classes_.size()) throw InvariantError("every character needs a joining class");
  std::set<std::string> seen;
  for (const auto& c : chars_) {
    if (c.empty()) throw InvariantError("alphabet contains an empty character");
    if (utf8_length(static_cast<unsigned char>(c[0])) != c.size())
      throw InvariantError("alphabet character '" + c + "' is not a single code point");
    if (!seen.insert(c).second) throw InvariantError("duplicate alphabet character '" + c + "'");
  }
}

Alphabet Alphabet::arabic() {
  const std::vector<std::string> letters{"ا", "ب", "ت", "ث", "ج", "ح", "خ", "د", "ذ", "ر",
                                         "ز", "س", "ش", "ص", "ض", "ط", "ظ", "ع", "غ", "ف",
                                         "ق", "ك", "ل", "م", "ن", "ه", "و", "ي"};
  const std::set<std::string> right{"ا", "د", "ذ", "ر", "ز", "و"};
  std::vector<JoiningClass> classes;
  for (const auto& l : letters) classes.push_back(right.count(l) ? JoiningClass::kRight : JoiningClass::kDual);
  return Alphabet(letters, classes);
}

Alphabet Alphabet::synthetic() {
  std::vector<std::string> letters;
  std::vector<JoiningClass> classes;
  for (char c = 'a'; c <= 'j'; ++c) {
    letters.emplace_back(1, c);
    classes.push_back(c == 'd' || c == 'g' ? JoiningClass::kRight : JoiningClass::kDual);
  }
  return Alphabet(letters, classes);
}

bool Alphabet::contains(std::string_view ch) const {
  return std::find(chars_.begin(), chars_.end(), ch) != chars_.end();
}

JoiningClass Alphabet::joining(std::string_view ch) const {
  const auto it = std::find(chars_.begin(), chars_.end(), ch);
  if (it == chars_.end()) throw UnknownCharacter("character '" + std::string(ch) + "' is not in the alphabet");
  return classes_[static_cast<std::size_t>(it - chars_.begin())];
}

std::vector<Position> Alphabet::forms_of(std::string_view ch) const {
  if (joining(ch) == JoiningClass::kDual)
    return {Position::kIsolated, Position::kInitial, Position::kMedial, Position::kFinal};
  return {Position::kIsolated, Position::kFinal};
}

std::vector<FormKey> Alphabet::all_forms() const {
  std::vector<FormKey> out;
  for (const auto& c : chars_)
    for (Position p : forms_of(c)) out.push_back({c, p});
  return out;
}

std::vector<std::string> Alphabet::split(std::string_view word) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < word.size();) {
    const std::size_t n = std::min(utf8_length(static_cast<unsigned char>(word[i])), word.size() - i);
    std::string ch(word.substr(i, n));
    if (!contains(ch)) throw UnknownCharacter("character '" + ch + "' in '" + std::string(word) + "' is not in the alphabet");
    out.push_back(std::move(ch));
    i += n;
  }
  return out;
}

Alphabet parse_alphabet(std::string_view text) {
  std::vector<std::string> chars;
  std::vector<JoiningClass> classes;
  for (const auto& line : content_lines(text)) {
    std::istringstream ls(line);
    std::string ch, cls, extra;
    if (!(ls >> ch >> cls) || (ls >> extra)) throw ParseError("alphabet line '" + line + "' must read '<char> dual|right'");
    if (cls == "dual") {
      classes.push_back(JoiningClass::kDual);
    } else if (cls == "right") {
      classes.push_back(JoiningClass::kRight);
    } else {
      throw ParseError("unknown joining class '" + cls + "'");
    }
    chars.push_back(ch);
  }
  if (chars.empty()) throw ParseError("alphabet file lists no characters");
  return Alphabet(chars, classes);
}

std::string format_alphabet(const Alphabet& alphabet) {
  std::string out;
  for (const auto& c : alphabet.chars())
    out += c + (alphabet.joining(c) == JoiningClass::kDual ? " dual\n" : " right\n");
  return out;
}

std::vector<FormKey> expand_positional_forms(std::string_view word, const Alphabet& alphabet) {
  const auto chars = alphabet.split(word);
  std::vector<FormKey> out;
  out.reserve(chars.size());
  for (std::size_t i = 0; i < chars.size(); ++i) {
    const bool joins_prev = i > 0 && alphabet.joining(chars[i - 1]) == JoiningClass::kDual;
    const bool joins_next = i + 1 < chars.size() && alphabet.joining(chars[i]) == JoiningClass::kDual;
    Position p = Position::kIsolated;
    if (joins_prev && joins_next) {
      p = Position::kMedial;
    } else if (joins_prev) {
      p = Position::kFinal;
    } else if (joins_next) {
      p = Position::kInitial;
    }
    out.push_back({chars[i], p});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model bank

const HmmModel& ModelBank::at(const FormKey& key) const {
  const auto it = forms.find(key);
  if (it == forms.end()) throw MissingForm("model bank has no model for " + key.name());
  return it->second;
}

void ModelBank::validate() const {
  auto check = [&](const HmmModel& m, const std::string& what) {
    m.validate(1e-6);
    if (m.topology != Topology::kLeftToRight) throw InvariantError(what + " is not left-to-right");
    if (m.pi.empty() || m.pi[0] != 1.0) throw InvariantError(what + " must start in its first state");
    if (m.is_gaussian() && m.gmm().dim != dim)
      throw InvariantError(what + " has dimension " + std::to_string(m.gmm().dim) + ", bank has " +
                           std::to_string(dim));
  };
  for (const auto& [key, m] : forms) check(m, key.name());
  if (gap) check(*gap, "gap model");
}

nlohmann::ordered_json bank_to_json(const ModelBank& bank) {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["dim"] = bank.dim;
  auto forms = nlohmann::ordered_json::array();
  for (const auto& [key, m] : bank.forms) {
    nlohmann::ordered_json f;
    f["char"] = key.ch;
    f["position"] = to_string(key.pos);
    f["model"] = model_to_json(m);
    forms.push_back(std::move(f));
  }
  doc["forms"] = std::move(forms);
  doc["gap"] = bank.gap ? model_to_json(*bank.gap) : nlohmann::ordered_json(nullptr);
  auto uncovered = nlohmann::ordered_json::array();
  for (const auto& k : bank.uncovered) uncovered.push_back(k.name());
  doc["uncovered"] = std::move(uncovered);
  return doc;
}

ModelBank bank_from_json(const nlohmann::json& doc) {
  ModelBank bank;
  try {
    if (doc.at("version").get<int>() != 1) throw ParseError("unsupported model bank version");
    bank.dim = doc.at("dim").get<std::size_t>();
    for (const auto& f : doc.at("forms")) {
      FormKey key{f.at("char").get<std::string>(), position_from_string(f.at("position").get<std::string>())};
      bank.forms.emplace(std::move(key), model_from_json(f.at("model")));
    }
    if (doc.contains("gap") && !doc["gap"].is_null()) bank.gap = model_from_json(doc["gap"]);
    if (doc.contains("uncovered")) {
      for (const auto& name : doc["uncovered"]) {
        const auto s = name.get<std::string>();
        const auto colon = s.rfind(':');
        if (colon == std::string::npos) throw ParseError("bad form name '" + s + "'");
        bank.uncovered.push_back({s.substr(0, colon), position_from_string(s.substr(colon + 1))});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model bank: ") + e.what());
  }
  bank.validate();
  return bank;
}

void save_bank(const std::string& path, const ModelBank& bank) {
  write_file(path, bank_to_json(bank).dump() + "\n");
}

ModelBank load_bank(const std::string& path) {
  const auto text = read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return bank_from_json(doc);
}

ChainedModel chain_models(const std::vector<const HmmModel*>& parts) {
  if (parts.empty()) throw InvariantError("nothing to chain");
  ChainedModel out;
  std::size_t total = 0;
  for (const HmmModel* m : parts) {
    out.offsets.push_back(total);
    total += m->num_states();
  }
  HmmModel& m = out.model;
  m.pi.assign(total, 0.0);
  m.trans = Matrix(total, total);
  m.topology = Topology::kLeftToRight;
  const bool gaussian = parts.front()->is_gaussian();
  GaussianMixtureEmission g;
  DiscreteEmission d;
  if (gaussian) g.dim = parts.front()->gmm().dim;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const HmmModel& part = *parts[k];
    const std::size_t off = out.offsets[k];
    const std::size_t n = part.num_states();
    if (part.topology != Topology::kLeftToRight) m.topology = Topology::kErgodic;
    if (k == 0) {
      for (std::size_t i = 0; i < n; ++i) m.pi[i] = part.pi[i];
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m.trans(off + i, off + j) = part.trans(i, j);
    if (k + 1 < parts.size()) {
      const HmmModel& next = *parts[k + 1];
      for (std::size_t j = 0; j < next.num_states(); ++j)
        m.trans(off + n - 1, off + n + j) += part.exit * next.pi[j];
    } else {
      m.exit = part.exit;
    }
    if (part.is_gaussian() != gaussian) throw DimensionMismatch("cannot chain discrete and Gaussian models");
    if (gaussian) {
      if (part.gmm().dim != g.dim) throw DimensionMismatch("chained models differ in feature dimension");
      g.states.insert(g.states.end(), part.gmm().states.begin(), part.gmm().states.end());
    } else {
      const auto& probs = part.discrete().probs;
      if (!d.probs.empty() && probs.front().size() != d.probs.front().size())
        throw DimensionMismatch("chained models differ in symbol count");
      d.probs.insert(d.probs.end(), probs.begin(), probs.end());
    }
  }
  if (gaussian) {
    m.emission = std::move(g);
  } else {
    m.emission = std::move(d);
  }
  return out;
}

ChainedModel build_word_model(const std::vector<FormKey>& forms, const ModelBank& bank) {
  std::vector<const HmmModel*> parts;
  for (const auto& f : forms) parts.push_back(&bank.at(f));
  return chain_models(parts);
}

// ---------------------------------------------------------------------------
// Training

void RecognizerConfig::validate() const {
  hmm.validate();
  if (states_per_form == 0) throw ConfigError("states_per_form must be positive");
}

RecognizerConfig recognizer_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("recognizer config must be an object");
  for (const auto& [key, value] : doc.items())
    if (key != "states_per_form" && key != "gap_states" && key != "hmm")
      throw ConfigError("unknown recognizer setting '" + key + "'");
  RecognizerConfig cfg;
  try {
    cfg.states_per_form = doc.value("states_per_form", cfg.states_per_form);
    cfg.gap_states = doc.value("gap_states", cfg.gap_states);
    if (doc.contains("hmm")) cfg.hmm = train_config_from_json(doc["hmm"]);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("recognizer config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json recognizer_config_to_json(const RecognizerConfig& cfg) {
  return {{"states_per_form", cfg.states_per_form},
          {"gap_states", cfg.gap_states},
          {"hmm", train_config_to_json(cfg.hmm)}};
}

namespace {

// A transcript unit: a positional form, or the gap between two words.
using Unit = std::optional<FormKey>;

std::vector<Unit> transcript_units(const std::vector<std::string>& words, const Alphabet& alphabet,
                                   bool with_gaps) {
  std::vector<Unit> units;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (w > 0 && with_gaps) units.emplace_back(std::nullopt);
    for (auto& f : expand_positional_forms(words[w], alphabet)) units.emplace_back(std::move(f));
  }
  return units;
}

// Model with every state at the global mean and variance of the data.
HmmModel generic_model(std::size_t states, const std::vector<double>& mean, const std::vector<double>& var,
                       double leave) {
  HmmModel m;
  m.topology = Topology::kLeftToRight;
  m.pi.assign(states, 0.0);
  m.pi[0] = 1.0;
  m.trans = Matrix(states, states);
  for (std::size_t i = 0; i < states; ++i) {
    m.trans(i, i) = 1.0 - leave;
    if (i + 1 < states) m.trans(i, i + 1) = leave;
  }
  m.exit = leave;
  GaussianMixtureEmission g;
  g.dim = mean.size();
  g.states.assign(states, {Gaussian{1.0, mean, var}});
  m.emission = std::move(g);
  return m;
}

struct Prepared {
  const FeatureSequence* features;
  std::vector<Unit> units;
};

}  // namespace

EmbeddedTrainResult train_models(const std::vector<TrainingSample>& samples, const Alphabet& alphabet,
                                 const RecognizerConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw NoDecodableSequences("no training samples");
  const bool with_gap = cfg.gap_states > 0;
  const std::size_t dim = samples.front().features.dim;

  EmbeddedTrainResult result;
  std::vector<Prepared> data;
  for (const auto& s : samples) {
    if (s.features.dim != dim) throw DimensionMismatch("training samples mix feature dimensions");
    if (s.words.empty()) {
      ++result.skipped;
      continue;
    }
    auto units = transcript_units(s.words, alphabet, with_gap);
    std::size_t states = 0;
    for (const auto& u : units) states += u ? cfg.states_per_form : cfg.gap_states;
    if (s.features.size() < states) {
      ++result.skipped;
      continue;
    }
    data.push_back({&s.features, std::move(units)});
  }
  if (data.empty()) throw NoDecodableSequences("no training sample is long enough for its transcript");

  // Flat start: cut each sample into units in proportion to their state counts.
  std::map<FormKey, std::vector<FeatureSequence>> segments;
  std::vector<FeatureSequence> gap_segments;
  std::vector<double> mean(dim, 0.0), sq(dim, 0.0);
  double frames = 0.0;
  for (const auto& p : data) {
    const auto& fr = p.features->frames;
    std::size_t states = 0;
    for (const auto& u : p.units) states += u ? cfg.states_per_form : cfg.gap_states;
    std::size_t cum = 0;
    for (const auto& u : p.units) {
      const std::size_t lo = fr.size() * cum / states;
      cum += u ? cfg.states_per_form : cfg.gap_states;
      const std::size_t hi = fr.size() * cum / states;
      FeatureSequence seg;
      seg.dim = dim;
      seg.source = p.features->source;
      seg.frames.assign(fr.begin() + static_cast<std::ptrdiff_t>(lo), fr.begin() + static_cast<std::ptrdiff_t>(hi));
      (u ? segments[*u] : gap_segments).push_back(std::move(seg));
    }
    for (const auto& f : fr) {
      for (std::size_t d = 0; d < dim; ++d) {
        mean[d] += f[d];
        sq[d] += f[d] * f[d];
      }
      frames += 1.0;
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    mean[d] /= frames;
    sq[d] = std::max(cfg.hmm.variance_floor, sq[d] / frames - mean[d] * mean[d]);
  }

  ModelBank& bank = result.bank;
  bank.dim = dim;
  double leave_sum = 0.0;
  for (auto& [key, segs] : segments) {
    bank.forms.emplace(key, flat_start(segs, cfg.states_per_form, cfg.hmm.variance_floor));
    leave_sum += bank.forms.at(key).exit;
  }
  const double leave = segments.empty() ? 0.5 : leave_sum / static_cast<double>(segments.size());
  for (const auto& key : alphabet.all_forms()) {
    if (bank.forms.count(key)) continue;
    bank.forms.emplace(key, generic_model(cfg.states_per_form, mean, sq, leave));
    bank.uncovered.push_back(key);
  }
  if (with_gap) bank.gap = flat_start(gap_segments, cfg.gap_states, cfg.hmm.variance_floor);

  // Embedded Baum-Welch.
  const TrellisOptions trellis{true};
  const ReestimateOptions ropts{trellis, cfg.hmm.variance_floor};
  struct Pooled {
    std::map<FormKey, SufficientStats> forms;
    std::optional<SufficientStats> gap;
    double log_likelihood = 0.0;
    std::size_t used = 0;
  };
  auto e_step = [&](const ModelBank& b) {
    Pooled pooled;
    for (const auto& [key, m] : b.forms) pooled.forms.emplace(key, SufficientStats(m));
    if (b.gap) pooled.gap.emplace(*b.gap);
    for (const auto& p : data) {
      std::vector<const HmmModel*> parts;
      for (const auto& u : p.units) parts.push_back(u ? &b.forms.at(*u) : &*b.gap);
      const auto chained = chain_models(parts);
      SufficientStats whole(chained.model);
      whole.accumulate(chained.model, *p.features, trellis);
      if (whole.used == 0) continue;
      ++pooled.used;
      pooled.log_likelihood += whole.log_likelihood;
      for (std::size_t k = 0; k < p.units.size(); ++k) {
        auto& dst = p.units[k] ? pooled.forms.at(*p.units[k]) : *pooled.gap;
        dst.add_block(whole, chained.offsets[k]);
      }
    }
    if (pooled.used == 0) throw NoDecodableSequences("no training sample is decodable");
    return pooled;
  };
  auto m_step = [&](const ModelBank& b, const Pooled& pooled) {
    ModelBank next = b;
    for (auto& [key, m] : next.forms) m = pooled.forms.at(key).maximize(m, ropts);
    if (next.gap) next.gap = pooled.gap->maximize(*next.gap, ropts);
    return next;
  };

  std::size_t components = 1;
  for (std::size_t round = 0;; ++round) {
    Pooled stats = e_step(bank);
    result.log.push_back({round, components, 0, stats.log_likelihood});
    for (std::size_t it = 1; it <= cfg.hmm.max_iterations; ++it) {
      ModelBank next = m_step(bank, stats);
      Pooled next_stats = e_step(next);
      const double gain = next_stats.log_likelihood - stats.log_likelihood;
      bank = std::move(next);
      stats = std::move(next_stats);
      result.log.push_back({round, components, it, stats.log_likelihood});
      if (gain < cfg.hmm.theta) break;
    }
    result.skipped = samples.size() - stats.used;
    if (components >= cfg.hmm.target_components) break;
    ++components;
    for (auto& [key, m] : bank.forms) m = split_mixtures(m, components);
    if (bank.gap) bank.gap = split_mixtures(*bank.gap, components);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Decoding

std::vector<std::string> HypothesisTranscript::word_strings() const {
  std::vector<std::string> out;
  for (const auto& w : words) out.push_back(w.word);
  return out;
}

Lexicon parse_lexicon(std::string_view text) { return content_lines(text); }

std::string format_lexicon(const Lexicon& lexicon) {
  std::string out;
  for (const auto& w : lexicon) out += w + "\n";
  return out;
}

namespace {

// One decodable unit of the network: a lexicon word or the gap.
struct NetUnit {
  std::size_t offset = 0;  // first network state
  std::size_t size = 0;
  double log_exit = kNegInf;
  std::vector<std::vector<std::pair<std::size_t, double>>> in;  // local arcs: (from, log a)
  std::vector<std::size_t> emit;  // emission column per local state
};

}  // namespace

HypothesisTranscript recognize_line(const FeatureSequence& features, const Lexicon& lexicon,
                                    const ModelBank& bank, const Alphabet& alphabet) {
  Lexicon words;
  for (const auto& w : lexicon) {
    if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
  }
  if (words.empty()) throw EmptyLexicon("lexicon has no words");
  const std::size_t len = features.size();
  if (len == 0) throw DegenerateTrace("cannot recognize an empty feature sequence");
  if (features.dim != bank.dim) throw DimensionMismatch("features do not match the model bank dimension");

  // Every distinct model state gets one emission column.
  std::vector<const HmmModel*> models;
  std::map<FormKey, std::size_t> model_index;
  std::vector<std::size_t> column_base;
  std::size_t columns = 0;
  auto add_model = [&](const HmmModel* m) {
    models.push_back(m);
    column_base.push_back(columns);
    columns += m->num_states();
    return models.size() - 1;
  };
  std::vector<NetUnit> units;
  std::size_t net_states = 0;
  auto add_unit = [&](const std::vector<std::size_t>& parts) {
    std::vector<const HmmModel*> ms;
    for (std::size_t p : parts) ms.push_back(models[p]);
    const auto chained = chain_models(ms);
    NetUnit u;
    u.offset = net_states;
    u.size = chained.model.num_states();
    u.log_exit = safe_log(chained.model.exit);
    u.in.resize(u.size);
    for (std::size_t j = 0; j < u.size; ++j)
      for (std::size_t i = 0; i < u.size; ++i)
        if (chained.model.trans(i, j) > 0.0) u.in[j].emplace_back(i, std::log(chained.model.trans(i, j)));
    for (std::size_t k = 0; k < parts.size(); ++k)
      for (std::size_t s = 0; s < models[parts[k]]->num_states(); ++s) u.emit.push_back(column_base[parts[k]] + s);
    net_states += u.size;
    units.push_back(std::move(u));
  };
  for (const auto& w : words) {
    std::vector<std::size_t> parts;
    for (const auto& f : expand_positional_forms(w, alphabet)) {
      auto it = model_index.find(f);
      if (it == model_index.end()) it = model_index.emplace(f, add_model(&bank.at(f))).first;
      parts.push_back(it->second);
    }
    add_unit(parts);
  }
  const bool has_gap = bank.gap.has_value();
  if (has_gap) add_unit({add_model(&*bank.gap)});
  const std::size_t num_words = words.size();
  const std::size_t gap_unit = num_words;

  // Emission table.
  Matrix log_b(len, columns);
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto& g = models[k]->gmm();
    for (std::size_t s = 0; s < g.states.size(); ++s) {
      const CompiledMixture mix(g.states[s]);
      for (std::size_t t = 0; t < len; ++t) {
        if (features.frames[t].size() != g.dim) throw DimensionMismatch("frame dimension does not match the model bank");
        log_b(t, column_base[k] + s) = mix.log_density(features.frames[t]);
      }
    }
  }

  const double p_gap = has_gap ? 0.5 : 0.0;
  const double log_word_after_word = std::log((1.0 - p_gap) / static_cast<double>(num_words));
  const double log_gap_after_word = safe_log(p_gap);
  const double log_word_after_gap = std::log(1.0 / static_cast<double>(num_words));

  // Viterbi. back(t, s) holds the predecessor state, or -1 at t = 0.
  std::vector<double> delta(net_states, kNegInf), next(net_states, kNegInf);
  std::vector<std::int32_t> back(len * net_states, -1);
  std::vector<std::uint8_t> entry(len * net_states, 0);  // reached through a unit boundary
  auto enter = [&](std::size_t t, std::size_t u, double score, std::int32_t from) {
    const std::size_t s = units[u].offset;
    const double v = score + log_b(t, units[u].emit[0]);
    if (v > next[s]) {
      next[s] = v;
      back[t * net_states + s] = from;
      entry[t * net_states + s] = 1;
    }
  };
  std::fill(next.begin(), next.end(), kNegInf);
  for (std::size_t w = 0; w < num_words; ++w) enter(0, w, log_word_after_word, -1);
  if (has_gap) enter(0, gap_unit, log_gap_after_word, -1);
  delta.swap(next);

  for (std::size_t t = 1; t < len; ++t) {
    std::fill(next.begin(), next.end(), kNegInf);
    for (const auto& u : units) {
      for (std::size_t j = 0; j < u.size; ++j) {
        double best = kNegInf;
        std::int32_t arg = -1;
        for (const auto& [i, la] : u.in[j]) {
          const double v = delta[u.offset + i] + la;
          if (v > best) {
            best = v;
            arg = static_cast<std::int32_t>(u.offset + i);
          }
        }
        if (arg >= 0) {
          next[u.offset + j] = best + log_b(t, u.emit[j]);
          back[t * net_states + u.offset + j] = arg;
        }
      }
    }
    // Unit boundaries.
    double word_end = kNegInf;
    std::int32_t word_end_state = -1;
    for (std::size_t w = 0; w < num_words; ++w) {
      const auto& u = units[w];
      const double v = delta[u.offset + u.size - 1] + u.log_exit;
      if (v > word_end) {
        word_end = v;
        word_end_state = static_cast<std::int32_t>(u.offset + u.size - 1);
      }
    }
    double gap_end = kNegInf;
    std::int32_t gap_end_state = -1;
    if (has_gap) {
      const auto& u = units[gap_unit];
      gap_end = delta[u.offset + u.size - 1] + u.log_exit;
      gap_end_state = static_cast<std::int32_t>(u.offset + u.size - 1);
    }
    for (std::size_t w = 0; w < num_words; ++w) {
      if (word_end_state >= 0) enter(t, w, word_end + log_word_after_word, word_end_state);
      if (gap_end_state >= 0) enter(t, w, gap_end + log_word_after_gap, gap_end_state);
    }
    if (has_gap && word_end_state >= 0) enter(t, gap_unit, word_end + log_gap_after_word, word_end_state);
    delta.swap(next);
  }

  double best = kNegInf;
  std::int32_t state = -1;
  for (const auto& u : units) {
    const double v = delta[u.offset + u.size - 1] + u.log_exit;
    if (v > best) {
      best = v;
      state = static_cast<std::int32_t>(u.offset + u.size - 1);
    }
  }
  if (state < 0) throw ZeroProbability("no path through the word network", len - 1);

  std::vector<std::int32_t> path(len);
  for (std::size_t t = len; t-- > 0;) {
    path[t] = state;
    state = back[t * net_states + static_cast<std::size_t>(state)];
  }
  auto unit_of = [&](std::int32_t s) {
    std::size_t u = 0;
    while (u + 1 < units.size() && static_cast<std::size_t>(s) >= units[u + 1].offset) ++u;
    return u;
  };

  struct Segment {
    std::size_t unit, start, end;
  };
  std::vector<Segment> segs;
  for (std::size_t t = 0; t < len; ++t) {
    if (t > 0 && !entry[t * net_states + static_cast<std::size_t>(path[t])]) continue;
    if (!segs.empty()) segs.back().end = t;
    segs.push_back({unit_of(path[t]), t, len});
  }

  HypothesisTranscript out;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    if (segs[k].unit == gap_unit && has_gap) continue;
    HypothesisWord hw;
    hw.word = words[segs[k].unit];
    hw.t_start = segs[k].start;
    double sum = 0.0;
    for (std::size_t t = segs[k].start; t < segs[k].end; ++t) {
      const auto& u = units[segs[k].unit];
      const double own = log_b(t, u.emit[static_cast<std::size_t>(path[t]) - u.offset]);
      double mx = kNegInf;
      for (std::size_t c = 0; c < columns; ++c) mx = std::max(mx, log_b(t, c));
      double z = 0.0;
      for (std::size_t c = 0; c < columns; ++c) z += std::exp(log_b(t, c) - mx);
      sum += own - (mx + std::log(z));
    }
    hw.confidence = std::clamp(std::exp(sum / static_cast<double>(segs[k].end - segs[k].start)), 0.0, 1.0);
    out.words.push_back(std::move(hw));
  }
  // Extents tile the line: gaps go to the word before them, a leading gap
  // to the first word.
  for (std::size_t k = 0; k < out.words.size(); ++k) {
    out.words[k].t_end = k + 1 < out.words.size() ? out.words[k + 1].t_start : len;
  }
  if (!out.words.empty()) out.words.front().t_start = 0;
  return out;
}

// ---------------------------------------------------------------------------
// CTM

std::string format_ctm(const std::vector<HypothesisTranscript>& transcripts) {
  std::string out;
  for (const auto& tr : transcripts) {
    for (const auto& w : tr.words) {
      out += tr.sample_id + " " + tr.system_id + " " + std::to_string(w.t_start) + " " +
             std::to_string(w.t_end) + " " + w.word + " " + format_double(w.confidence) + "\n";
    }
  }
  return out;
}

std::vector<HypothesisTranscript> parse_ctm(std::string_view text) {
  std::vector<HypothesisTranscript> out;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::string sample, system, word, extra;
    long long start = 0, end = 0;
    double conf = 0.0;
    if (!(ls >> sample >> system >> start >> end >> word >> conf) || (ls >> extra))
      throw ParseError("ctm line " + std::to_string(line_no) + ": expected 'sample system start end word confidence'");
    if (start < 0 || end <= start) throw ParseError("ctm line " + std::to_string(line_no) + ": bad frame extent");
    if (out.empty() || out.back().sample_id != sample || out.back().system_id != system) {
      out.push_back({sample, system, {}});
    }
    auto& words = out.back().words;
    if (!words.empty() && static_cast<std::size_t>(start) < words.back().t_end)
      throw ParseError("ctm line " + std::to_string(line_no) + ": words overlap or are out of order");
    words.push_back({word, static_cast<std::size_t>(start), static_cast<std::size_t>(end), conf});
  }
  return out;
}

}  // namespace inkrover
