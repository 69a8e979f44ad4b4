/*
 * Copyright 2026 the atomtable authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace atomtable {

/// Base class for all errors raised by the library.
class AtomError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Handle index outside the encodable range.
class EncodingError : public AtomError {
 public:
  using AtomError::AtomError;
};

/// Atom array or handle index space exhausted, or an allocation failed.
class CapacityError : public AtomError {
 public:
  using AtomError::AtomError;
};

/// Index outside the published range of the atom array.
class LookupError : public AtomError {
 public:
  using AtomError::AtomError;
};

/// An API precondition was broken by the caller.
class ContractViolation : public AtomError {
 public:
  using AtomError::AtomError;
};

/// Operation on a handle whose atom has been invalidated.
class StaleHandleError : public AtomError {
 public:
  using AtomError::AtomError;
};

/// Invalid benchmark or table configuration.
class ConfigError : public AtomError {
 public:
  using AtomError::AtomError;
};

}  // namespace atomtable
