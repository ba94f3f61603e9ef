#include "warpco/cli.hpp"

int main(int argc, char** argv) { return warpco::cli_dispatch(argc, argv); }
