#pragma once

#include <string>
#include <vector>

namespace pnpqn {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail; // worst slack / counterexample, human-oriented
};

struct SuiteReport {
    std::string suite;
    std::vector<CheckResult> checks;
    bool all_passed() const;
};

// Registered suite names, in execution order for "all".
const std::vector<std::string>& verify_suite_names();

// Runs one suite, or every suite for "all". Unknown name: ParameterError.
// Checks never throw; a thrown error inside a check is converted into a
// failed CheckResult carrying the message.
std::vector<SuiteReport> run_verify(const std::string& suite);

// One line per check, one summary line per suite.
std::string format_reports(const std::vector<SuiteReport>& reports);

} // namespace pnpqn
