/*
 * Copyright 2026 The dvppsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
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

namespace dvppsim {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised for malformed configuration input (files, CLI values, schemas).
/// The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Raised when a simulation cannot continue (solver failure, non-finite
/// state, model fault). Carries the simulation time and the offending
/// device name when known. The CLI maps this to exit code 1.
class SimError : public Error {
public:
  SimError(const std::string& msg, double t = -1.0, std::string device = {})
      : Error(format(msg, t, device)), t_(t), device_(std::move(device)) {}

  double sim_time() const { return t_; }
  const std::string& device() const { return device_; }

private:
  static std::string format(const std::string& msg, double t,
                            const std::string& device) {
    std::string out = msg;
    if (t >= 0.0) out += " [t=" + std::to_string(t) + " s]";
    if (!device.empty()) out += " [device=" + device + "]";
    return out;
  }

  double t_;
  std::string device_;
};

}  // namespace dvppsim
