#pragma once

#include <iosfwd>

namespace ipic {

/// Entry point of the ipic command line. Returns 0 on success, 1 on usage
/// errors and 2 on runtime failures.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ipic
