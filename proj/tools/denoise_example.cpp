// Minimal library use: noise a test image, denoise it with each variant and
// print the PSNR gain.

#include <cstdio>
#include <cstdlib>

#include "dcsc/dcsc.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s image.{png,pgm} [sigma]\n", argv[0]);
    return 2;
  }
  const double sigma = argc > 2 ? std::atof(argv[2]) : 20.0;
  const dcsc::ImageGrid clean = dcsc::read_image(argv[1]);
  const dcsc::ImageGrid noisy = dcsc::add_gaussian_noise(clean, {sigma, 0});
  const dcsc::Dictionary dict = dcsc::fallback_dictionary(8, 8, 0);
  std::printf("noisy  %.2f dB\n", dcsc::psnr(noisy, clean));
  for (auto variant : {dcsc::Variant::csc, dcsc::Variant::scsc, dcsc::Variant::dcsc}) {
    dcsc::SolverConfig cfg;
    cfg.variant = variant;
    const dcsc::SolveResult result = dcsc::solve(noisy, dict, cfg);
    std::printf("%-6s %.2f dB after %zu iterations\n", dcsc::to_string(variant).c_str(),
                dcsc::psnr(result.reconstruction, clean), result.iterations);
  }
  return 0;
}
