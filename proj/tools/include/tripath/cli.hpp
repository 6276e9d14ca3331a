#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tripath/orchestrator.hpp"
#include "tripath/transport.hpp"

namespace tripath::cli {

/// Process-level hooks; tests swap the transport, sleeper and environment.
struct Environment {
  Transport* transport = nullptr;  // null: real HTTP
  Sleeper sleeper = real_sleeper();
  EnvLookup env = process_env();
};

/// Runs one subcommand. `args` excludes the program name. Returns the exit
/// code: 0 success, 1 usage error, 2 data error, 3 endpoint error. Failures
/// write one JSON object line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Environment& env = {});

int main(int argc, char** argv);

}  // namespace tripath::cli
