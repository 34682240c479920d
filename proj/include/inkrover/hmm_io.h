// include/inkrover/hmm_io.h
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

#ifndef INKROVER_HMM_IO_H_
#define INKROVER_HMM_IO_H_

#include <string>
#include <string_view>

#include "inkrover/hmm.h"
#include "json.hpp"

namespace inkrover {

// Model document:
//   {"version":1, "type":"discrete"|"gmm", "topology":"ltr"|"ergodic",
//    "pi":[...], "A":[[...]], "exit":p, "emissions":[...]}
// Discrete emissions are one probability row per state; GMM emissions are
// one list of {"weight","mean","var"} components per state.

nlohmann::ordered_json model_to_json(const HmmModel& model);
HmmModel model_from_json(const nlohmann::json& doc);

std::string save_model(const HmmModel& model);
HmmModel load_model(std::string_view text);

TrainConfig train_config_from_json(const nlohmann::json& doc);
nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);

}  // namespace inkrover

#endif  // INKROVER_HMM_IO_H_
