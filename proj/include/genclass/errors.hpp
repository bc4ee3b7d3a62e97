/*
 * Copyright 2026 The genclass Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GENCLASS_ERRORS_HPP
#define GENCLASS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace genclass {

/// Base of every error raised by the library. `name()` is the stable
/// identifier printed by the CLI next to the message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* name() const noexcept { return "Error"; }
};

#define GENCLASS_DEFINE_ERROR(Type)                              \
  class Type : public Error {                                    \
   public:                                                       \
    using Error::Error;                                          \
    const char* name() const noexcept override { return #Type; } \
  }

GENCLASS_DEFINE_ERROR(ArgumentError);
GENCLASS_DEFINE_ERROR(ConfigError);
GENCLASS_DEFINE_ERROR(DecodeError);
GENCLASS_DEFINE_ERROR(DegenerateLabelsError);
GENCLASS_DEFINE_ERROR(DegenerateResidualError);
GENCLASS_DEFINE_ERROR(DuplicateClassError);
GENCLASS_DEFINE_ERROR(EmptyClassError);
GENCLASS_DEFINE_ERROR(EmptyLibraryError);
GENCLASS_DEFINE_ERROR(EmptyTripletError);
GENCLASS_DEFINE_ERROR(FormatError);
GENCLASS_DEFINE_ERROR(LabelError);
GENCLASS_DEFINE_ERROR(ManifestError);
GENCLASS_DEFINE_ERROR(RangeError);
GENCLASS_DEFINE_ERROR(ShapeError);
GENCLASS_DEFINE_ERROR(VersionError);

#undef GENCLASS_DEFINE_ERROR

}  // namespace genclass

#endif  // GENCLASS_ERRORS_HPP
