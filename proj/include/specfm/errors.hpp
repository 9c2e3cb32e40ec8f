/*
Copyright 2026, the specfm authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#pragma once

#include <stdexcept>
#include <string>

namespace specfm {

// Base class for all toolkit errors. Subclasses distinguish usage/config
// problems (exit code 1 in the CLI) from data problems (exit code 2).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class InvalidPeptide : public DataError {
 public:
  using DataError::DataError;
};

class InvalidCharge : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class DuplicateLabel : public DataError {
 public:
  using DataError::DataError;
};

class EmptySpectrum : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public DataError {
 public:
  using DataError::DataError;
};

class VocabError : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateLabels : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateValidation : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateInput : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace specfm
