#include "dqma/cli_app.hpp"

int main(int argc, char** argv) { return dqma::cli::dispatch(argc, argv); }
