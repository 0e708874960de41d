#include "pinnsearch/cli.hpp"

int main(int argc, char** argv) {
    return pinnsearch::cli::run_cli(argc, argv);
}
