#include "qkg/cli.hpp"

int main(int argc, char** argv) { return qkg::cli::dispatch(argc, argv); }
