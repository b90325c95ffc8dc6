#include "agecurves_cli/commands.hpp"

int main(int argc, char** argv)
{
    return agecurves::cli::run_cli(argc, argv);
}
