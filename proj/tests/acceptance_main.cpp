// Acceptance battery: one line per criterion, exit nonzero on any failure.
#include <iostream>

#include "iml/acceptance.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> only;
    for (int i = 1; i < argc; ++i) only.emplace_back(argv[i]);
    const auto summary = iml::run_acceptance(only, 0, &std::cout);
    if (summary.any_warn) std::cout << "note: warnings present\n";
    std::cout << (summary.all_pass ? "ACCEPTANCE: PASS" : "ACCEPTANCE: FAIL") << std::endl;
    return summary.all_pass ? 0 : 1;
}
