// Copyright 2026 The wkam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace wkam {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or precondition on user-supplied input.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// An integrated orbit left the velocity box.
class VelocityEscape : public Error {
 public:
  using Error::Error;
};

/// Every minimizer of a dynamic-programming step sits on the velocity-box boundary.
class BoxSaturation : public Error {
 public:
  using Error::Error;
};

/// An iterative procedure did not reach its tolerance.
class NotConverged : public Error {
 public:
  using Error::Error;
};

class EmptyAubry : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

class Unbounded : public Error {
 public:
  using Error::Error;
};

/// A one-form's support meets the (dilated) Aubry estimate.
class SupportOverlap : public Error {
 public:
  using Error::Error;
};

/// Smoothing a subsolution pushed its defect above tolerance.
class MollificationTooCoarse : public Error {
 public:
  using Error::Error;
};

/// No horizon inside the barrier window satisfies the N(eps) condition.
class WindowExhausted : public Error {
 public:
  using Error::Error;
};

}  // namespace wkam
