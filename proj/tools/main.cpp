#include "cli.hpp"

int main(int argc, char** argv) {
    return mou::cli::main_entry(argc, argv);
}
