/*
   Copyright 2026 The ahflow Authors

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

#include <cstdlib>
#include <iostream>

#include "ahflow/acceptance.hpp"

int main(int argc, char** argv) {
    std::vector<int> filter;
    for (int i = 1; i < argc; ++i) filter.push_back(std::atoi(argv[i]));
    const int failures = ahflow::acceptance::run_all(std::cout, filter);
    if (failures) std::cout << failures << " criteria FAILED\n";
    else std::cout << "all criteria passed\n";
    return failures == 0 ? 0 : 1;
}
