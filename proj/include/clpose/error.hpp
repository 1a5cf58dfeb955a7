/* Copyright 2026 clpose contributors
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
 *
 */

#pragma once

#include <stdexcept>
#include <string>

namespace clpose {

// Error categories double as process exit codes for the CLI.
enum class ErrorCategory : int {
  config = 2,
  input = 3,
  numerical = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, const std::string& module, const std::string& what)
    : std::runtime_error(module + ": " + what), cat_(cat)
  {
  }

  ErrorCategory category() const { return cat_; }
  int exit_code() const { return static_cast<int>(cat_); }

 private:
  ErrorCategory cat_;
};

inline Error config_error(const std::string& what) { return Error(ErrorCategory::config, "config", what); }

inline Error input_error(const std::string& module, const std::string& what)
{
  return Error(ErrorCategory::input, module, what);
}

inline Error numerical_error(const std::string& module, const std::string& what)
{
  return Error(ErrorCategory::numerical, module, what);
}

}  // namespace clpose
