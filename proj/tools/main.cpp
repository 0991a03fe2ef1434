#include "fundalpha/cli.hpp"

int main(int argc, char** argv) { return fundalpha::cli_main(argc, argv); }
