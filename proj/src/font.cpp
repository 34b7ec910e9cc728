// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#define STB_TRUETYPE_IMPLEMENTATION
#include <stb_truetype.h>

#include <algorithm>
#include <cmath>

#include "memeforge/compositor.hpp"
#include "memeforge/digest.hpp"
#include "memeforge/error.hpp"
#include "memeforge/jsonl.hpp"
#include "memeforge/text.hpp"

namespace memeforge {

struct Font::Impl {
  std::string data;
  stbtt_fontinfo info{};
  int ascent = 0;
  int descent = 0;
  int line_gap = 0;

  float scale(int font_px) const {
    return stbtt_ScaleForPixelHeight(&info, static_cast<float>(font_px));
  }
};

std::shared_ptr<const Font> Font::load(const std::filesystem::path& path) {
  std::string data;
  try {
    data = read_file(path);
  } catch (const Error& e) {
    throw Error(Errc::FontLoadError, "cannot read font " + path.string() + ": " + e.what());
  }
  auto impl = std::make_unique<Impl>();
  impl->data = std::move(data);
  const auto* bytes = reinterpret_cast<const unsigned char*>(impl->data.data());
  const int offset = stbtt_GetFontOffsetForIndex(bytes, 0);
  if (offset < 0 || !stbtt_InitFont(&impl->info, bytes, offset)) {
    throw Error(Errc::FontLoadError, "not a TrueType font: " + path.string());
  }
  stbtt_GetFontVMetrics(&impl->info, &impl->ascent, &impl->descent, &impl->line_gap);
  std::shared_ptr<Font> font(new Font());
  font->digest_ = sha256_hex(impl->data);
  font->impl_ = std::move(impl);
  return font;
}

Font::~Font() = default;

double Font::advance_width(std::string_view s, int font_px) const {
  const float scale = impl_->scale(font_px);
  const auto cps = text::decode_utf8(s);
  double x = 0.0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    int advance = 0, lsb = 0;
    stbtt_GetCodepointHMetrics(&impl_->info, static_cast<int>(cps[i]), &advance, &lsb);
    x += advance * static_cast<double>(scale);
    if (i + 1 < cps.size()) {
      x += stbtt_GetCodepointKernAdvance(&impl_->info, static_cast<int>(cps[i]),
                                         static_cast<int>(cps[i + 1])) *
           static_cast<double>(scale);
    }
  }
  return x;
}

int Font::line_height(int font_px) const {
  const float scale = impl_->scale(font_px);
  return static_cast<int>(
      std::ceil((impl_->ascent - impl_->descent + impl_->line_gap) * static_cast<double>(scale)));
}

int Font::ascent(int font_px) const {
  return static_cast<int>(std::lround(impl_->ascent * static_cast<double>(impl_->scale(font_px))));
}

void Font::draw(std::string_view s, int font_px, double x, int baseline,
                std::vector<std::uint8_t>& mask, int width, int height) const {
  const float scale = impl_->scale(font_px);
  const auto cps = text::decode_utf8(s);
  std::vector<unsigned char> glyph;
  double pen = x;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const int cp = static_cast<int>(cps[i]);
    const double pen_floor = std::floor(pen);
    const float shift = static_cast<float>(pen - pen_floor);
    int x0, y0, x1, y1;
    stbtt_GetCodepointBitmapBoxSubpixel(&impl_->info, cp, scale, scale, shift, 0.0f, &x0, &y0,
                                        &x1, &y1);
    const int gw = x1 - x0;
    const int gh = y1 - y0;
    if (gw > 0 && gh > 0) {
      glyph.assign(static_cast<std::size_t>(gw) * gh, 0);
      stbtt_MakeCodepointBitmapSubpixel(&impl_->info, glyph.data(), gw, gh, gw, scale, scale,
                                        shift, 0.0f, cp);
      const int ox = static_cast<int>(pen_floor) + x0;
      const int oy = baseline + y0;
      for (int gy = 0; gy < gh; ++gy) {
        const int py = oy + gy;
        if (py < 0 || py >= height) continue;
        for (int gx = 0; gx < gw; ++gx) {
          const int px = ox + gx;
          if (px < 0 || px >= width) continue;
          auto& dst = mask[static_cast<std::size_t>(py) * width + px];
          dst = std::max(dst, glyph[static_cast<std::size_t>(gy) * gw + gx]);
        }
      }
    }
    int advance = 0, lsb = 0;
    stbtt_GetCodepointHMetrics(&impl_->info, cp, &advance, &lsb);
    pen += advance * static_cast<double>(scale);
    if (i + 1 < cps.size()) {
      pen += stbtt_GetCodepointKernAdvance(&impl_->info, cp, static_cast<int>(cps[i + 1])) *
             static_cast<double>(scale);
    }
  }
}

}  // namespace memeforge
