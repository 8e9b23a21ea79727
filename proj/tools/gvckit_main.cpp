#include "gvckit/app.hpp"

int main(int argc, char** argv) { return gvckit::app::run_cli(argc, argv); }
