// Writes the bundled synthetic mini-corpus as lead-sheet JSON files.

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "surprisenet/corpus.hpp"
#include "surprisenet/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic lead-sheet mini-corpus"};
  std::string out_dir = "data/mini_corpus";
  surprisenet::SynthOptions opts;
  app.add_option("--out-dir", out_dir, "Destination directory");
  app.add_option("--pieces", opts.pieces, "Number of lead sheets")->check(CLI::PositiveNumber);
  app.add_option("--seed", opts.seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  const auto sheets = surprisenet::synthesize_corpus(opts);
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < sheets.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "synth_%03zu.json", i);
    surprisenet::write_file(out_dir + "/" + name, surprisenet::serialize_leadsheet(sheets[i]) + "\n");
  }
  std::printf("wrote %zu lead sheets to %s\n", sheets.size(), out_dir.c_str());
  return 0;
}
