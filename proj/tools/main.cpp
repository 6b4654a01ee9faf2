#include "app.hpp"

int main(int argc, char** argv) { return opdyn::cli::run(argc, argv); }
