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

#include <string>
#include <vector>

namespace specfm {

struct Peak {
  double mz = 0.0;
  double intensity = 0.0;
};

// One MS/MS scan: precursor description plus a peak list sorted ascending
// by m/z.
struct Spectrum {
  std::string run_id;
  std::string scan_id;
  double precursor_mz = 0.0;
  int precursor_charge = 0;  // 0 = unknown
  std::vector<Peak> peaks;
};

enum class Task { quality, chimera, phospho, glyco };

const char* task_name(Task t);
Task task_from_name(const std::string& name);  // throws ConfigError

struct LabelRecord {
  std::string run_id;
  std::string scan_id;
  Task task = Task::quality;
  int label = 0;  // 0 or 1
};

}  // namespace specfm
