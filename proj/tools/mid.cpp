#include "mid/cli/app.hpp"

int main(int argc, char** argv) { return mid::run_cli(argc, argv); }
