// Removes a watermark from one image given its mask:
//   remove_one <watermarked.png> <mask.png> <out.png> [d]

#include <cstdlib>
#include <iostream>

#include "morphomod/morphomod.hpp"

int main(int argc, char** argv) {
  if (argc < 4) {
    std::cerr << "usage: " << argv[0] << " <watermarked.png> <mask.png> <out.png> [d]\n";
    return 1;
  }
  try {
    const morphomod::Image x = morphomod::io::load_image(argv[1]);
    morphomod::PipelineConfig cfg;
    if (argc > 4) cfg.d = std::atoi(argv[4]);
    const auto result = morphomod::morphomod(x, morphomod::source::FromFile{argv[2]}, cfg);
    morphomod::io::save_png(result.restored, argv[3]);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "mask coverage " << morphomod::coverage(result.mask) * 100.0 << "%\n";
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }
  return 0;
}
