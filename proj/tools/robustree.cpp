#include "robustree/cli.hpp"

int main(int argc, char** argv) { return robustree::run_cli(argc, argv); }
