// Regenerates the bundled synthetic dataset under data/synth/.
#include "ksgrank/synth.hpp"

#include <cstdio>
#include <string>

int main(int argc, char** argv) {
  std::string out_dir = "data/synth";
  if (argc > 1) out_dir = argv[1];
  ksgrank::synth::write(ksgrank::synth::generate(), out_dir);
  std::printf("wrote synthetic fixture to %s\n", out_dir.c_str());
  return 0;
}
