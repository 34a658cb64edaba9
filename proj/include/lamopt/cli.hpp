#pragma once

#include <iosfwd>

namespace lamopt {

/// Command-line frontend. Returns the process exit status: 0 on success
/// (and for --help), 1 for unparsable arguments, 2 for an invalid
/// configuration, 3 for I/O failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace lamopt
