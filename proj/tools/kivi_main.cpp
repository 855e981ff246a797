#include "kivi/cli.hpp"

int main(int argc, char** argv) { return kivi::run_cli(argc, argv); }
