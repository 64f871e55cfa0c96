#include "rb2/cli.hpp"

int main(int argc, char** argv) { return rb2::run_cli(argc, argv); }
