/**
 * Copyright 2026 The dtsnl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
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

namespace dtsnl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad shape, non-finite value...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Configuration could not be resolved; the message lists every offending key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File or directory could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Training hit a non-finite loss; `what()` carries the dumped loss report.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

#define DTSNL_CHECK(cond, msg)                                   \
  do {                                                           \
    if (!(cond)) throw ::dtsnl::InvalidArgument(std::string(msg)); \
  } while (0)

}  // namespace dtsnl
