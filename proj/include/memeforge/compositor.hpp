// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "memeforge/captions.hpp"
#include "memeforge/catalog.hpp"
#include "memeforge/gateway.hpp"

namespace memeforge {

using Rgba = std::array<std::uint8_t, 4>;

struct RenderStyle {
  std::string font_ref;
  Rgba fill_color{255, 255, 255, 255};
  Rgba stroke_color{0, 0, 0, 255};
  double stroke_width_frac = 0.08;
  double max_font_frac = 0.10;
  int min_font_px = 12;
  double margin_frac = 0.02;
  bool uppercase = true;
  /// Height of each caption band as a fraction of image height.
  double band_frac = 0.25;
};

/// Throws Error{ConfigError}.
void validate(const RenderStyle& style);
nlohmann::json to_json(const RenderStyle& style);
RenderStyle render_style_from_json(const nlohmann::json& j,
                                   const RenderStyle& defaults = {});

/// A TrueType font loaded from disk. Immutable and shareable across threads.
class Font {
 public:
  /// Throws Error{FontLoadError}.
  static std::shared_ptr<const Font> load(const std::filesystem::path& path);

  ~Font();
  Font(const Font&) = delete;
  Font& operator=(const Font&) = delete;

  /// Advance width in pixels of `text` at pixel height `font_px`, including
  /// kerning, measured from the pen origin.
  double advance_width(std::string_view text, int font_px) const;
  /// Distance between baselines at `font_px`.
  int line_height(int font_px) const;
  /// Ascent in pixels at `font_px`.
  int ascent(int font_px) const;

  /// Renders `text` into an 8-bit coverage mask of size width x height with
  /// the pen starting at (x, baseline). Pixels outside the mask are clipped.
  void draw(std::string_view text, int font_px, double x, int baseline,
            std::vector<std::uint8_t>& mask, int width, int height) const;

  const std::string& digest() const { return digest_; }

 private:
  Font() = default;
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string digest_;
};

struct PixelRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

struct LayoutResult {
  std::vector<std::string> lines;
  int font_px = 0;
  PixelRect box;
  bool truncated = false;
};

inline constexpr std::string_view kEllipsis = "...";

/// Greedy word wrap at the largest font size (capped by max_font_frac of
/// `image_height_px`, or of the box height when zero) whose lines all fit
/// the box width and whose stacked line heights fit the box height. When
/// even min_font_px overflows, words are hard-broken, trailing text is
/// dropped and the last line ends with an ellipsis. Throws Error{EmptyText}.
LayoutResult layout_caption(std::string_view text, int box_width_px,
                            int box_height_px, const RenderStyle& style,
                            const Font& font, int image_height_px = 0);

/// Top and bottom caption bands for an image.
PixelRect top_band(int width, int height, const RenderStyle& style);
PixelRect bottom_band(int width, int height, const RenderStyle& style);

struct RgbaImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGBA
};

/// Throws Error{ImageDecodeError}.
RgbaImage decode_image(std::string_view bytes);
std::string encode_png(const RgbaImage& image);

struct RenderedMeme {
  std::string png_bytes;
  std::string digest;  // SHA-256 of png_bytes
  int width = 0;
  int height = 0;
};

/// Draws the captions onto the template image: top caption centered in the
/// top band, bottom (if any) in the bottom band, with a contrast stroke.
/// Byte-deterministic for identical inputs. Throws Error{ImageDecodeError,
/// FontLoadError, FileMissing}.
RenderedMeme render_meme(const std::string& image_bytes,
                         const CaptionPair& captions, const RenderStyle& style,
                         const Font& font);
RenderedMeme render_meme(const MemeTemplate& tmpl, const CaptionPair& captions,
                         const RenderStyle& style, const Font& font);

struct OverlayServiceConfig {
  std::string endpoint_url;
  int timeout_ms = 30'000;
};

/// Client for a hosted text-overlay service: form POST
/// `template_id, text0, text1`, JSON reply `{url}`; errors carry
/// `{code, message}`. Throws Error{ServiceError, UnknownTemplate}.
std::string remote_overlay(const std::string& template_id,
                           const CaptionPair& captions,
                           const OverlayServiceConfig& config,
                           Transport& transport);

/// URL-encodes form fields (application/x-www-form-urlencoded).
std::string encode_form(
    const std::vector<std::pair<std::string, std::string>>& fields);

}  // namespace memeforge
