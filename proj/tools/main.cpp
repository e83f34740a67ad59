#include "trajpred/cli.hpp"

int main(int argc, char** argv) { return trajpred::run_cli(argc, argv); }
