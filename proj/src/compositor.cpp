// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#define STB_IMAGE_IMPLEMENTATION
#define STBI_NO_STDIO
#define STBI_ONLY_PNG
#define STBI_ONLY_JPEG
#define STBI_ONLY_BMP
#define STBI_ONLY_GIF
#include <stb_image.h>

#define STB_IMAGE_WRITE_IMPLEMENTATION
#include <stb_image_write.h>

#include "memeforge/compositor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "memeforge/digest.hpp"
#include "memeforge/error.hpp"
#include "memeforge/text.hpp"

namespace memeforge {

using json = nlohmann::json;

void validate(const RenderStyle& s) {
  if (s.min_font_px < 1) throw Error(Errc::ConfigError, "min_font_px must be >= 1");
  if (!(s.max_font_frac > 0.0 && s.max_font_frac <= 0.5)) {
    throw Error(Errc::ConfigError, "max_font_frac must lie in (0, 0.5]");
  }
  if (!(s.stroke_width_frac >= 0.0 && s.stroke_width_frac <= 0.5)) {
    throw Error(Errc::ConfigError, "stroke_width_frac must lie in [0, 0.5]");
  }
  if (!(s.margin_frac >= 0.0 && s.margin_frac < 0.25)) {
    throw Error(Errc::ConfigError, "margin_frac must lie in [0, 0.25)");
  }
  if (!(s.band_frac > 0.0 && s.band_frac <= 0.5)) {
    throw Error(Errc::ConfigError, "band_frac must lie in (0, 0.5]");
  }
}

namespace {

json color_json(const Rgba& c) { return json::array({c[0], c[1], c[2], c[3]}); }

Rgba color_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(Errc::ConfigError, "colors are [r, g, b, a] arrays");
  }
  Rgba c{};
  for (std::size_t i = 0; i < 4; ++i) {
    const int v = j[i].get<int>();
    if (v < 0 || v > 255) throw Error(Errc::ConfigError, "color component out of range");
    c[i] = static_cast<std::uint8_t>(v);
  }
  return c;
}

}  // namespace

json to_json(const RenderStyle& s) {
  return {{"font_ref", s.font_ref},
          {"fill_color", color_json(s.fill_color)},
          {"stroke_color", color_json(s.stroke_color)},
          {"stroke_width_frac", s.stroke_width_frac},
          {"max_font_frac", s.max_font_frac},
          {"min_font_px", s.min_font_px},
          {"margin_frac", s.margin_frac},
          {"uppercase", s.uppercase},
          {"band_frac", s.band_frac}};
}

RenderStyle render_style_from_json(const json& j, const RenderStyle& defaults) {
  RenderStyle s = defaults;
  try {
    s.font_ref = j.value("font_ref", s.font_ref);
    if (j.contains("fill_color")) s.fill_color = color_from_json(j["fill_color"]);
    if (j.contains("stroke_color")) s.stroke_color = color_from_json(j["stroke_color"]);
    s.stroke_width_frac = j.value("stroke_width_frac", s.stroke_width_frac);
    s.max_font_frac = j.value("max_font_frac", s.max_font_frac);
    s.min_font_px = j.value("min_font_px", s.min_font_px);
    s.margin_frac = j.value("margin_frac", s.margin_frac);
    s.uppercase = j.value("uppercase", s.uppercase);
    s.band_frac = j.value("band_frac", s.band_frac);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("render style: ") + e.what());
  }
  validate(s);
  return s;
}

// ---------------------------------------------------------------------------
// Layout

namespace {

bool fits(const Font& font, std::string_view line, int px, int width) {
  return font.advance_width(line, px) <= static_cast<double>(width);
}

// Greedy wrap. Returns false when some single word is wider than the box.
bool wrap(const std::vector<std::string>& words, const Font& font, int px, int width,
          std::vector<std::string>& lines) {
  lines.clear();
  std::string current;
  for (const auto& w : words) {
    if (!fits(font, w, px, width)) return false;
    std::string candidate = current.empty() ? w : current + " " + w;
    if (fits(font, candidate, px, width)) {
      current = std::move(candidate);
    } else {
      lines.push_back(std::move(current));
      current = w;
    }
  }
  if (!current.empty()) lines.push_back(std::move(current));
  return true;
}

// Splits a word into pieces that each fit `width` (at least one code point
// per piece).
std::vector<std::string> hard_break(const std::string& word, const Font& font, int px,
                                    int width) {
  std::vector<std::string> pieces;
  std::string_view rest = word;
  while (!rest.empty()) {
    const std::size_t total = text::utf8_length(rest);
    std::size_t take = 1;
    while (take < total && fits(font, text::utf8_prefix(rest, take + 1), px, width)) ++take;
    std::string_view piece = text::utf8_prefix(rest, take);
    pieces.emplace_back(piece);
    rest.remove_prefix(piece.size());
  }
  return pieces;
}

// Removes the final code point of `s`.
void pop_code_point(std::string& s) {
  if (s.empty()) return;
  std::size_t n = s.size() - 1;
  while (n > 0 && (static_cast<unsigned char>(s[n]) & 0xC0) == 0x80) --n;
  s.erase(n);
}

}  // namespace

LayoutResult layout_caption(std::string_view raw, int box_width_px, int box_height_px,
                            const RenderStyle& style, const Font& font, int image_height_px) {
  if (box_width_px <= 0 || box_height_px <= 0) {
    throw Error(Errc::ConfigError, "caption box must have positive size");
  }
  std::string caption = text::collapse_whitespace(raw);
  if (caption.empty()) throw Error(Errc::EmptyText, "caption text is empty");
  if (style.uppercase) caption = text::to_upper_ascii(caption);
  const auto words = text::split_words(caption);

  const int basis = image_height_px > 0 ? image_height_px : box_height_px;
  const int cap = std::max(style.min_font_px,
                           static_cast<int>(std::floor(style.max_font_frac * basis)));

  LayoutResult out;
  out.box = {0, 0, box_width_px, box_height_px};
  std::vector<std::string> lines;
  for (int px = cap; px >= style.min_font_px; --px) {
    if (!wrap(words, font, px, box_width_px, lines)) continue;
    if (static_cast<long>(lines.size()) * font.line_height(px) <= box_height_px) {
      out.lines = std::move(lines);
      out.font_px = px;
      return out;
    }
  }

  // Overflow at the smallest size: hard-break, keep what fits, ellipsize.
  const int px = style.min_font_px;
  std::vector<std::string> pieces;
  for (const auto& w : words) {
    for (auto& p : hard_break(w, font, px, box_width_px)) pieces.push_back(std::move(p));
  }
  wrap(pieces, font, px, box_width_px, lines);
  const std::size_t max_lines =
      std::max<std::size_t>(1, static_cast<std::size_t>(box_height_px / font.line_height(px)));
  if (lines.size() > max_lines) lines.resize(max_lines);
  std::string& last = lines.back();
  while (!last.empty() && !fits(font, last + std::string(kEllipsis), px, box_width_px)) {
    pop_code_point(last);
  }
  last = std::string(text::trim(last)) + std::string(kEllipsis);
  out.lines = std::move(lines);
  out.font_px = px;
  out.truncated = true;
  return out;
}

PixelRect top_band(int width, int height, const RenderStyle& style) {
  const int mx = static_cast<int>(std::lround(style.margin_frac * width));
  const int my = static_cast<int>(std::lround(style.margin_frac * height));
  const int band = static_cast<int>(std::lround(style.band_frac * height));
  return {mx, my, std::max(1, width - 2 * mx), std::max(1, band - my)};
}

PixelRect bottom_band(int width, int height, const RenderStyle& style) {
  const int mx = static_cast<int>(std::lround(style.margin_frac * width));
  const int my = static_cast<int>(std::lround(style.margin_frac * height));
  const int band = static_cast<int>(std::lround(style.band_frac * height));
  return {mx, height - band, std::max(1, width - 2 * mx), std::max(1, band - my)};
}

// ---------------------------------------------------------------------------
// Raster

RgbaImage decode_image(std::string_view bytes) {
  int w = 0, h = 0, channels = 0;
  unsigned char* data =
      stbi_load_from_memory(reinterpret_cast<const stbi_uc*>(bytes.data()),
                            static_cast<int>(bytes.size()), &w, &h, &channels, 4);
  if (!data) {
    throw Error(Errc::ImageDecodeError,
                std::string("cannot decode image: ") + stbi_failure_reason());
  }
  RgbaImage img;
  img.width = w;
  img.height = h;
  img.pixels.assign(data, data + static_cast<std::size_t>(w) * h * 4);
  stbi_image_free(data);
  return img;
}

namespace {

void append_bytes(void* ctx, void* data, int size) {
  auto* out = static_cast<std::string*>(ctx);
  out->append(static_cast<const char*>(data), static_cast<std::size_t>(size));
}

// Max filter over a disc of radius r.
std::vector<std::uint8_t> dilate(const std::vector<std::uint8_t>& mask, int w, int h, int r) {
  if (r <= 0) return mask;
  std::vector<std::pair<int, int>> disc;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy <= r * r) disc.emplace_back(dx, dy);
    }
  }
  std::vector<std::uint8_t> out(mask.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t v = mask[static_cast<std::size_t>(y) * w + x];
      if (v == 0) continue;
      for (auto [dx, dy] : disc) {
        const int px = x + dx, py = y + dy;
        if (px < 0 || py < 0 || px >= w || py >= h) continue;
        auto& d = out[static_cast<std::size_t>(py) * w + px];
        d = std::max(d, v);
      }
    }
  }
  return out;
}

void composite(RgbaImage& img, const std::vector<std::uint8_t>& mask, const Rgba& color) {
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned a = (static_cast<unsigned>(mask[i]) * color[3] + 127) / 255;
    if (a == 0) continue;
    std::uint8_t* p = &img.pixels[i * 4];
    for (int c = 0; c < 3; ++c) {
      p[c] = static_cast<std::uint8_t>((p[c] * (255 - a) + color[c] * a + 127) / 255);
    }
    p[3] = static_cast<std::uint8_t>(a + (p[3] * (255 - a) + 127) / 255);
  }
}

void draw_caption(RgbaImage& img, const std::string& caption, const PixelRect& band,
                  bool anchor_bottom, const RenderStyle& style, const Font& font) {
  const LayoutResult layout =
      layout_caption(caption, band.width, band.height, style, font, img.height);
  const int lh = font.line_height(layout.font_px);
  const int total = lh * static_cast<int>(layout.lines.size());
  const int top = anchor_bottom ? band.y + band.height - total : band.y;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(img.width) * img.height, 0);
  for (std::size_t i = 0; i < layout.lines.size(); ++i) {
    const double adv = font.advance_width(layout.lines[i], layout.font_px);
    const double x = band.x + (band.width - adv) / 2.0;
    const int baseline = top + static_cast<int>(i) * lh + font.ascent(layout.font_px);
    font.draw(layout.lines[i], layout.font_px, x, baseline, mask, img.width, img.height);
  }
  int radius = static_cast<int>(std::lround(style.stroke_width_frac * layout.font_px));
  if (style.stroke_width_frac > 0.0) radius = std::max(1, radius);
  if (radius > 0) composite(img, dilate(mask, img.width, img.height, radius), style.stroke_color);
  composite(img, mask, style.fill_color);
}

}  // namespace

std::string encode_png(const RgbaImage& image) {
  std::string out;
  if (!stbi_write_png_to_func(append_bytes, &out, image.width, image.height, 4,
                              image.pixels.data(), image.width * 4)) {
    throw Error(Errc::IoError, "PNG encoding failed");
  }
  return out;
}

RenderedMeme render_meme(const std::string& image_bytes, const CaptionPair& captions,
                         const RenderStyle& style, const Font& font) {
  validate(style);
  RgbaImage img = decode_image(image_bytes);
  draw_caption(img, captions.top, top_band(img.width, img.height, style), false, style, font);
  if (captions.bottom && !text::trim(*captions.bottom).empty()) {
    draw_caption(img, *captions.bottom, bottom_band(img.width, img.height, style), true, style,
                 font);
  }
  RenderedMeme out;
  out.png_bytes = encode_png(img);
  out.digest = sha256_hex(out.png_bytes);
  out.width = img.width;
  out.height = img.height;
  return out;
}

RenderedMeme render_meme(const MemeTemplate& tmpl, const CaptionPair& captions,
                         const RenderStyle& style, const Font& font) {
  return render_meme(load_template_image(tmpl), captions, style, font);
}

// ---------------------------------------------------------------------------
// Remote overlay

std::string encode_form(const std::vector<std::pair<std::string, std::string>>& fields) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  auto encode = [](const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
      if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
        out.push_back(static_cast<char>(c));
      } else if (c == ' ') {
        out.push_back('+');
      } else {
        out.push_back('%');
        out.push_back(kHex[c >> 4]);
        out.push_back(kHex[c & 15]);
      }
    }
    return out;
  };
  std::string body;
  for (const auto& [k, v] : fields) {
    if (!body.empty()) body.push_back('&');
    body += encode(k) + "=" + encode(v);
  }
  return body;
}

std::string remote_overlay(const std::string& template_id, const CaptionPair& captions,
                           const OverlayServiceConfig& config, Transport& transport) {
  const std::string body = encode_form(
      {{"template_id", template_id}, {"text0", captions.top}, {"text1", captions.bottom.value_or("")}});
  HttpReply reply = transport.post(config.endpoint_url, {}, "application/x-www-form-urlencoded",
                                   body, std::chrono::milliseconds(config.timeout_ms));
  if (reply.timed_out) throw Error(Errc::ServiceError, "overlay service unreachable");
  auto j = json::parse(reply.body, nullptr, false);
  const bool ok = reply.status >= 200 && reply.status < 300;
  if (ok && j.is_object() && j.contains("url") && j["url"].is_string()) {
    return j["url"].get<std::string>();
  }
  std::string message = "overlay service returned HTTP " + std::to_string(reply.status);
  if (j.is_object()) {
    if (j.contains("message") && j["message"].is_string()) message = j["message"].get<std::string>();
    if (j.value("code", "") == "unknown_template") throw Error(Errc::UnknownTemplate, message);
  }
  throw Error(Errc::ServiceError, message);
}

}  // namespace memeforge
