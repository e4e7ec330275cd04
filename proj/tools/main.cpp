#include "lplr/io.hpp"

// Command-line front end; all behavior lives in the library's run_cli.
int main(int argc, char** argv) { return lplr::run_cli(argc, argv); }
