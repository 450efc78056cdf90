#include <string>
#include <vector>

#include "serlab/commands.hpp"

int main(int argc, char** argv) {
  return serlab::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
