// include/inkrover/recognizer.h
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

#ifndef INKROVER_RECOGNIZER_H_
#define INKROVER_RECOGNIZER_H_

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "inkrover/features.h"
#include "inkrover/hmm.h"
#include "json.hpp"

namespace inkrover {

enum class JoiningClass { kDual, kRight };
enum class Position { kIsolated, kInitial, kMedial, kFinal };

std::string_view to_string(Position pos);
Position position_from_string(std::string_view name);

/// One positional form of a base character.
struct FormKey {
  std::string ch;
  Position pos = Position::kIsolated;

  std::string name() const;  // "ch:initial"
  friend auto operator<=>(const FormKey&, const FormKey&) = default;
};

/// Base characters with their joining classes. Dual-joining characters have
/// all four positional forms; right-joining ones only isolated and final.
class Alphabet {
 public:
  Alphabet() = default;
  /// Throws InvariantError on duplicate or empty characters.
  Alphabet(std::vector<std::string> chars, std::vector<JoiningClass> classes);

  /// The 28 Arabic letters; alef, dal, thal, reh, zain and waw are
  /// right-joining, which gives 100 positional forms.
  static Alphabet arabic();
  /// Ten Latin letters a..j where d and g are right-joining (36 forms).
  static Alphabet synthetic();

  const std::vector<std::string>& chars() const { return chars_; }
  std::size_t size() const { return chars_.size(); }
  bool contains(std::string_view ch) const;
  JoiningClass joining(std::string_view ch) const;
  std::vector<Position> forms_of(std::string_view ch) const;
  /// All forms in character order.
  std::vector<FormKey> all_forms() const;

  /// Splits a word into characters of this alphabet (UTF-8 code points).
  /// Throws UnknownCharacter.
  std::vector<std::string> split(std::string_view word) const;

  friend bool operator==(const Alphabet&, const Alphabet&) = default;

 private:
  std::vector<std::string> chars_;
  std::vector<JoiningClass> classes_;
};

/// Alphabet file: one character per line followed by "dual" or "right".
Alphabet parse_alphabet(std::string_view text);
std::string format_alphabet(const Alphabet& alphabet);

/// Positional forms of a word: a character is initial, medial or final when
/// it connects to its neighbours, and right-joining characters never connect
/// to the character after them.
std::vector<FormKey> expand_positional_forms(std::string_view word, const Alphabet& alphabet);

/// Character models keyed by positional form, plus an optional model for the
/// space between words.
struct ModelBank {
  std::map<FormKey, HmmModel> forms;
  std::optional<HmmModel> gap;
  std::size_t dim = 0;
  /// Forms that never occurred in training and kept their initial models.
  std::vector<FormKey> uncovered;

  const HmmModel& at(const FormKey& key) const;  // throws MissingForm
  /// Throws InvariantError when a model is not left-to-right or dimensions
  /// disagree.
  void validate() const;
};

nlohmann::ordered_json bank_to_json(const ModelBank& bank);
ModelBank bank_from_json(const nlohmann::json& doc);
void save_bank(const std::string& path, const ModelBank& bank);
ModelBank load_bank(const std::string& path);

/// A left-to-right model made by chaining models: the final state of block k
/// leaves into the first state of block k + 1 with block k's exit
/// probability.
struct ChainedModel {
  HmmModel model;
  std::vector<std::size_t> offsets;  // first state of each block
};

ChainedModel chain_models(const std::vector<const HmmModel*>& parts);
ChainedModel build_word_model(const std::vector<FormKey>& forms, const ModelBank& bank);

struct RecognizerConfig {
  std::size_t states_per_form = 8;
  /// States of the inter-word gap model; 0 disables it.
  std::size_t gap_states = 2;
  /// Baum-Welch settings for each embedded round. Mixtures grow by one split
  /// per round until hmm.target_components is reached.
  TrainConfig hmm;

  void validate() const;
};

RecognizerConfig recognizer_config_from_json(const nlohmann::json& doc);
nlohmann::ordered_json recognizer_config_to_json(const RecognizerConfig& cfg);

struct TrainingSample {
  FeatureSequence features;
  std::vector<std::string> words;
};

struct EmbeddedTrainLog {
  std::size_t round = 0;
  std::size_t components = 1;
  std::size_t iteration = 0;
  double log_likelihood = 0.0;
};

struct EmbeddedTrainResult {
  ModelBank bank;
  std::vector<EmbeddedTrainLog> log;
  std::size_t skipped = 0;  // samples shorter than their transcript model
};

/// Flat start from uniform segmentation of each transcript, then embedded
/// Baum-Welch on the concatenated transcript models with statistics pooled
/// per form.
EmbeddedTrainResult train_models(const std::vector<TrainingSample>& samples,
                                 const Alphabet& alphabet, const RecognizerConfig& cfg);

struct HypothesisWord {
  std::string word;
  std::size_t t_start = 0;  // first frame
  std::size_t t_end = 0;    // one past the last frame
  double confidence = 0.0;

  friend bool operator==(const HypothesisWord&, const HypothesisWord&) = default;
};

struct HypothesisTranscript {
  std::string sample_id;
  std::string system_id;
  std::vector<HypothesisWord> words;

  std::vector<std::string> word_strings() const;
  friend bool operator==(const HypothesisTranscript&, const HypothesisTranscript&) = default;
};

using Lexicon = std::vector<std::string>;

Lexicon parse_lexicon(std::string_view text);
std::string format_lexicon(const Lexicon& lexicon);

/// Viterbi decoding over a loop of lexicon words with uniform priors.
/// Word extents are half-open frame ranges that tile [0, T); a gap is
/// credited to the word before it (the first word also takes a leading gap).
HypothesisTranscript recognize_line(const FeatureSequence& features, const Lexicon& lexicon,
                                    const ModelBank& bank, const Alphabet& alphabet);

/// CTM-style lines: "sample_id system_id t_start t_end word confidence".
std::string format_ctm(const std::vector<HypothesisTranscript>& transcripts);
std::vector<HypothesisTranscript> parse_ctm(std::string_view text);

}  // namespace inkrover

#endif  // INKROVER_RECOGNIZER_H_
