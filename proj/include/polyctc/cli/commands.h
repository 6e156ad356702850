// polyctc/cli/commands.h
//
// SPDX-License-Identifier: Apache-2.0
//
// Subcommands: gen-data, pretrain, train, eval, decode, gradcheck. Every run
// with an output directory writes resolved_config.json there.

#ifndef POLYCTC_CLI_COMMANDS_H_
#define POLYCTC_CLI_COMMANDS_H_

#include <ostream>

namespace polyctc {

// Exit status: 0 on success; 1 when a run fails (divergence, failed
// tolerance); 2 for usage and configuration errors.
int RunCli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

}  // namespace polyctc

#endif  // POLYCTC_CLI_COMMANDS_H_
