#include "henry/cli.hpp"

int main(int argc, char** argv) { return henry::run_cli(argc, argv); }
