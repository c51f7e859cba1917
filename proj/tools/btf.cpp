#include "btf/cli/cli.hpp"

int main(int argc, char** argv) { return btf::cli::run(argc, argv); }
