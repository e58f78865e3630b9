// Copyright (c) 2026, The cfts-gan authors
// SPDX-License-Identifier: Apache-2.0
//
// Regenerates the shipped feature-extractor weight blob from its fixed seed.

#include <exception>
#include <iostream>

#include "cfts/metrics.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: cfts_export_extractor OUT.bin\n";
    return 2;
  }
  try {
    cfts::FeatureExtractor::from_seed().save(argv[1]);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  }
  return 0;
}
