// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Exit status is non-zero when any criterion fails.
#include <cstdlib>
#include <exception>
#include <iostream>

#include "mvg/verify.hpp"

int main(int argc, char** argv) {
  mvg::VerifyOptions options;
  if (argc > 1) options.seed = std::strtoull(argv[1], nullptr, 10);
  try {
    const auto results = mvg::run_verification(options);
    bool ok = results.size() == mvg::verification_criteria().size();
    for (const auto& r : results) {
      std::cout << mvg::format_result(r) << "\n";
      ok = ok && r.passed;
    }
    std::cout << (ok ? "all criteria passed" : "some criteria failed") << std::endl;
    return ok ? EXIT_SUCCESS : EXIT_FAILURE;
  } catch (const std::exception& e) {
    std::cerr << "acceptance run aborted: " << e.what() << std::endl;
    return EXIT_FAILURE;
  }
}
