// Command-line front end. `run_cli` is the whole program minus process setup,
// so tests can drive it in-process.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace avo::cli {

// Stable exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,         // bad arguments, unknown arm, wrong joint count
  kLoad = 3,          // missing or malformed input file
  kPlan = 4,          // IK / trajectory / reposition failure, harvest plan_fail
  kHarvestFailed = 5, // harvest ran but ended in fixer_fail or gripper_fail
  kIo = 6,            // output could not be written
  kRuntime = 7,       // any other error (perception pipeline, domain errors)
};

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace avo::cli
