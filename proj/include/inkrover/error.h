// include/inkrover/error.h
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

#ifndef INKROVER_ERROR_H_
#define INKROVER_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace inkrover {

/// Root of every error thrown by the library. The CLI maps these to exit
/// code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define INKROVER_DEFINE_ERROR(Name)          \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

INKROVER_DEFINE_ERROR(ParseError);
INKROVER_DEFINE_ERROR(InvariantError);
INKROVER_DEFINE_ERROR(EmptyTrace);
INKROVER_DEFINE_ERROR(BlankImage);
INKROVER_DEFINE_ERROR(DegenerateTrace);
INKROVER_DEFINE_ERROR(DimensionMismatch);
INKROVER_DEFINE_ERROR(EmissionMismatch);
INKROVER_DEFINE_ERROR(NoDecodableSequences);
INKROVER_DEFINE_ERROR(NotGaussian);
INKROVER_DEFINE_ERROR(UnknownCharacter);
INKROVER_DEFINE_ERROR(MissingForm);
INKROVER_DEFINE_ERROR(EmptyLexicon);
INKROVER_DEFINE_ERROR(DuplicateSystem);
INKROVER_DEFINE_ERROR(IncompleteRanking);
INKROVER_DEFINE_ERROR(MismatchedSample);
INKROVER_DEFINE_ERROR(TooFewSamples);
INKROVER_DEFINE_ERROR(ConfigError);

#undef INKROVER_DEFINE_ERROR

/// Raised when no state sequence can explain the observations. `frame` is the
/// first frame at which all probability mass vanished.
class ZeroProbability : public Error {
 public:
  ZeroProbability(const std::string& what, std::size_t frame)
      : Error(what), frame_(frame) {}
  std::size_t frame() const { return frame_; }

 private:
  std::size_t frame_;
};

}  // namespace inkrover

#endif  // INKROVER_ERROR_H_
