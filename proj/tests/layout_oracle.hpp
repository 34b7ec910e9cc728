// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include <stb_truetype.h>

#include "memeforge/jsonl.hpp"
#include "test_support.hpp"

namespace memeforge::testing {

// Re-measures ASCII text straight from the font tables, sharing no code with
// the library's Font class.
class MetricsOracle {
 public:
  MetricsOracle() : data_(read_file(font_path())) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data_.data());
    if (!stbtt_InitFont(&info_, bytes, stbtt_GetFontOffsetForIndex(bytes, 0))) {
      throw std::runtime_error("font");
    }
  }

  double width(const std::string& s, int px) const {
    const double scale = stbtt_ScaleForPixelHeight(&info_, static_cast<float>(px));
    double w = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      int adv = 0, lsb = 0;
      stbtt_GetCodepointHMetrics(&info_, static_cast<unsigned char>(s[i]), &adv, &lsb);
      w += adv * scale;
      if (i + 1 < s.size()) {
        w += stbtt_GetCodepointKernAdvance(&info_, static_cast<unsigned char>(s[i]),
                                           static_cast<unsigned char>(s[i + 1])) *
             scale;
      }
    }
    return w;
  }

  int line_height(int px) const {
    int a = 0, d = 0, g = 0;
    stbtt_GetFontVMetrics(&info_, &a, &d, &g);
    return static_cast<int>(std::ceil((a - d + g) * stbtt_ScaleForPixelHeight(&info_, static_cast<float>(px))));
  }

 private:
  std::string data_;
  stbtt_fontinfo info_{};
};

inline std::string random_words(std::mt19937_64& gen, int n) {
  static const std::string letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ?!',";
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    const int len = 1 + static_cast<int>(gen() % 12);
    for (int k = 0; k < len; ++k) s += letters[gen() % letters.size()];
  }
  return s;
}

}  // namespace memeforge::testing
