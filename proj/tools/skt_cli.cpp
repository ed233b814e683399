#include "skt/harness.hpp"

int main(int argc, char** argv) { return skt::cli_main(argc, argv); }
