#include <iostream>

int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::cerr << "ctxnmt: no subcommands wired up yet\n";
  return 2;
}
