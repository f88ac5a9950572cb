// Copyright 2026 The regseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "regseg/log.hpp"

#include <iostream>
#include <utility>

namespace regseg {

namespace {

WarningSink& sink() {
  static WarningSink current = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return current;
}

}  // namespace

WarningSink set_warning_sink(WarningSink next) { return std::exchange(sink(), std::move(next)); }

void warn(const std::string& message) {
  if (sink()) sink()(message);
}

}  // namespace regseg
