#include "cli_app.hpp"

int main(int argc, char** argv) { return cqad::cli::main_entry(argc, argv); }
