#ifndef WARPCO_CLI_HPP_
#define WARPCO_CLI_HPP_

namespace warpco {

// Runs one tool invocation. Returns 0 on success, 1 on usage errors
// (usage text on stderr), 2 on data/format/config errors.
int cli_dispatch(int argc, const char* const* argv);

}  // namespace warpco

#endif  // WARPCO_CLI_HPP_
