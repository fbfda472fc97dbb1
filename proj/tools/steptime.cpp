#include <steptime/cli.h>

#include <iostream>

int main(int argc, char ** argv)
{
  return steptime::run_cli(argc, argv, std::cout, std::cerr);
}
