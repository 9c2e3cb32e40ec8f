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
#include "specfm/spectrum.hpp"

#include "specfm/errors.hpp"

namespace specfm {

const char* task_name(Task t) {
  switch (t) {
    case Task::quality: return "quality";
    case Task::chimera: return "chimera";
    case Task::phospho: return "phospho";
    case Task::glyco: return "glyco";
  }
  return "?";
}

Task task_from_name(const std::string& name) {
  if (name == "quality") return Task::quality;
  if (name == "chimera") return Task::chimera;
  if (name == "phospho") return Task::phospho;
  if (name == "glyco") return Task::glyco;
  throw ConfigError("unknown task '" + name + "'");
}

}  // namespace specfm
