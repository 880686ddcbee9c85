#pragma once

#include <ostream>

namespace hitlbo::cli {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,     // unknown verb or flag, bad argument syntax
  kDomain = 2,    // rejected by a precondition or invariant
  kIo = 3,        // unreadable / unparseable / incompatible file
  kInternal = 4,  // numerical failure or unexpected error
};

// Environment variable naming the default campaign file.
inline constexpr const char* kCampaignEnv = "HITLBO_CAMPAIGN";

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hitlbo::cli
