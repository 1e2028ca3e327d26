// Writes the built-in scenario pack as one JSON file per scenario.

#include <filesystem>
#include <iostream>

#include "combidose/harness.hpp"
#include "combidose/io.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "scenarios";
  try {
    std::filesystem::create_directories(dir);
    for (const combidose::Scenario& s : combidose::scenario_pack()) {
      combidose::save_scenario(s, dir / (s.name + ".json"));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
