#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace poseuq::cli {

// Exit codes: 0 success, 1 I/O failure, 2 validation failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitValidation = 2;

/// Runs one `poseuq` invocation; args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace poseuq::cli
