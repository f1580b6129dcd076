#include "tsfpp/cli.hpp"

int main(int argc, char** argv) { return tsfpp::run_cli(argc, argv); }
