// Full acceptance run: every criterion at its stated budget, one line each.
#include <iostream>

#include "optexec/verify.hpp"

int main() {
    using namespace optexec;
    ExperimentConfig cfg;
    cfg.workers = 1;
    VerifyReport report;
    try {
        report = run_verification(cfg, &std::cerr);
    } catch (const std::exception& e) {
        std::cout << "acceptance aborted: " << e.what() << "\n";
        return 3;
    }
    int failed = 0;
    for (const auto& c : report.checks) {
        std::cout << summary_line(c) << "\n";
        failed += !c.passed && !c.informational;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
