#include "crowdflow/cli.hpp"

int main(int argc, char** argv) { return crowdflow::run_cli(argc, argv); }
