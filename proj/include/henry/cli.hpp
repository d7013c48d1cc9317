#pragma once
// Command-line front end: subcommands solve | pilot | plan | run | compare |
// qmc | report over a shared JSON configuration with per-flag overrides.

namespace henry {

int run_cli(int argc, char** argv);

}  // namespace henry
