// Writes the synthetic headline corpus used for toy runs.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "rsum/error.hpp"
#include "rsum/toy.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write a synthetic template corpus, one sentence per line", "rsum-synth"};
  std::size_t count = 5000;
  std::uint64_t seed = 0;
  std::string out;
  app.add_option("--count", count, "sentences")->capture_default_str();
  app.add_option("--seed", seed, "generator seed")->capture_default_str();
  app.add_option("--out", out, "output path")->required();
  CLI11_PARSE(app, argc, argv);
  try {
    std::ofstream file(out);
    for (const auto& t : rsum::toy::synthetic_corpus(count, seed)) file << t.raw << "\n";
    if (!file) throw rsum::IoError("cannot write '" + out + "'");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
