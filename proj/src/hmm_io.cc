// src/hmm_io.cc
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

#include "inkrover/hmm_io.h"

#include "inkrover/error.h"

namespace inkrover {

nlohmann::ordered_json model_to_json(const HmmModel& model) {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["type"] = model.is_gaussian() ? "gmm" : "discrete";
  doc["topology"] = model.topology == Topology::kLeftToRight ? "ltr" : "ergodic";
  doc["pi"] = model.pi;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < model.trans.rows(); ++i) {
    const auto r = model.trans.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  doc["A"] = std::move(rows);
  doc["exit"] = model.exit;
  auto emissions = nlohmann::ordered_json::array();
  if (model.is_gaussian()) {
    for (const auto& mix : model.gmm().states) {
      auto comps = nlohmann::ordered_json::array();
      for (const auto& c : mix) {
        comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"var", c.var}});
      }
      emissions.push_back(std::move(comps));
    }
  } else {
    for (const auto& row : model.discrete().probs) emissions.push_back(row);
  }
  doc["emissions"] = std::move(emissions);
  return doc;
}

HmmModel model_from_json(const nlohmann::json& doc) {
  HmmModel model;
  try {
    if (doc.at("version").get<int>() != 1) throw ParseError("unsupported model version");
    const auto type = doc.at("type").get<std::string>();
    const auto topology = doc.at("topology").get<std::string>();
    if (topology == "ltr") {
      model.topology = Topology::kLeftToRight;
    } else if (topology == "ergodic") {
      model.topology = Topology::kErgodic;
    } else {
      throw ParseError("unknown topology '" + topology + "'");
    }
    model.pi = doc.at("pi").get<std::vector<double>>();
    const auto rows = doc.at("A").get<std::vector<std::vector<double>>>();
    const std::size_t n = model.pi.size();
    if (rows.size() != n) throw ParseError("A has " + std::to_string(rows.size()) + " rows, pi has " + std::to_string(n));
    model.trans = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      if (rows[i].size() != n) throw ParseError("row " + std::to_string(i) + " of A has wrong length");
      for (std::size_t j = 0; j < n; ++j) model.trans(i, j) = rows[i][j];
    }
    model.exit = doc.value("exit", 0.0);
    const auto& em = doc.at("emissions");
    if (type == "discrete") {
      model.emission = DiscreteEmission{em.get<std::vector<std::vector<double>>>()};
    } else if (type == "gmm") {
      GaussianMixtureEmission g;
      for (const auto& state : em) {
        std::vector<Gaussian> mix;
        for (const auto& c : state) {
          mix.push_back({c.at("weight").get<double>(), c.at("mean").get<std::vector<double>>(),
                         c.at("var").get<std::vector<double>>()});
        }
        g.states.push_back(std::move(mix));
      }
      if (!g.states.empty() && !g.states.front().empty()) g.dim = g.states.front().front().mean.size();
      model.emission = std::move(g);
    } else {
      throw ParseError("unknown model type '" + type + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model document: ") + e.what());
  }
  model.validate(1e-9);
  return model;
}

std::string save_model(const HmmModel& model) { return model_to_json(model).dump() + "\n"; }

HmmModel load_model(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model document is not valid JSON: ") + e.what());
  }
  return model_from_json(doc);
}

TrainConfig train_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("train config must be an object");
  for (const auto& [key, value] : doc.items())
    if (key != "theta" && key != "max_iterations" && key != "variance_floor" && key != "target_components")
      throw ConfigError("unknown train setting '" + key + "'");
  TrainConfig cfg;
  try {
    cfg.theta = doc.value("theta", cfg.theta);
    cfg.max_iterations = doc.value("max_iterations", cfg.max_iterations);
    cfg.variance_floor = doc.value("variance_floor", cfg.variance_floor);
    cfg.target_components = doc.value("target_components", cfg.target_components);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
  return {{"theta", cfg.theta},
          {"max_iterations", cfg.max_iterations},
          {"variance_floor", cfg.variance_floor},
          {"target_components", cfg.target_components}};
}

}  // namespace inkrover
