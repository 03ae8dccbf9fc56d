// Box algebra, layout rasterization, spatial-relation predicates and
// plan-to-scene grounding.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "planrl/core.hpp"

namespace planrl {

inline double iou(const Box& a, const Box& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0 || ih <= 0) return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

// -------- relation predicates --------

inline constexpr double kRelationMargin = 2.0;  // canvas units, on box centers

inline bool relation_satisfied(RelationKind kind, const Box& subject, const Box& object,
                               double margin = kRelationMargin) {
    switch (kind) {
        case RelationKind::left_of: return subject.cx() <= object.cx() - margin;
        case RelationKind::right_of: return subject.cx() >= object.cx() + margin;
        case RelationKind::above: return subject.cy() <= object.cy() - margin;
        case RelationKind::below: return subject.cy() >= object.cy() + margin;
    }
    throw ArgumentError("invalid relation kind");
}

// -------- rasterization --------

struct RenderConfig {
    int scale = 4;  // canvas unit -> pixels; default renders 256x256

    int pixels() const { return kCanvasSize * scale; }
};

// One cell per pixel: 0 blank, 1+2k outline of object k, 2+2k label of
// object k. Later draws overwrite earlier ones.
struct Canvas {
    int width = 0;
    int height = 0;
    std::vector<int32_t> cells;

    static constexpr int32_t kBlank = 0;
    static int32_t outline_code(int k) { return 1 + 2 * k; }
    static int32_t label_code(int k) { return 2 + 2 * k; }

    int32_t at(int x, int y) const { return cells[static_cast<size_t>(y) * width + x]; }

    friend bool operator==(const Canvas&, const Canvas&) = default;
};

namespace detail {

// 5x7 glyphs, low 5 bits per row, bit 4 leftmost. Index 0..25 = a..z
// (rendered with uppercase shapes).
inline constexpr uint8_t kFont5x7[26][7] = {
    {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // a
    {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},  // b
    {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E},  // c
    {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E},  // d
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F},  // e
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},  // f
    {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F},  // g
    {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // h
    {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E},  // i
    {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},  // j
    {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11},  // k
    {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},  // l
    {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11},  // m
    {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11},  // n
    {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E},  // o
    {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},  // p
    {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D},  // q
    {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},  // r
    {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E},  // s
    {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},  // t
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E},  // u
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},  // v
    {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11},  // w
    {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},  // x
    {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04},  // y
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F},  // z
};

inline constexpr int kRingThickness = 2;   // pixels
inline constexpr int kLabelInset = 4;      // pixels from the box corner
inline constexpr int kGlyphAdvance = 6;    // 5 px glyph + 1 px spacing

struct PixelRect {
    int x1, y1, x2, y2;
};

inline PixelRect to_pixels(const Box& b, int scale) {
    return {static_cast<int>(std::lround(b.x1 * scale)),
            static_cast<int>(std::lround(b.y1 * scale)),
            static_cast<int>(std::lround(b.x2 * scale)),
            static_cast<int>(std::lround(b.y2 * scale))};
}

// Visits the cells of a 2 px ring just inside the pixel rect.
template <typename Fn>
inline void for_ring_cells(const PixelRect& r, Fn&& fn) {
    const int t = kRingThickness;
    const int top_end = std::min(r.y1 + t, r.y2);
    const int bot_begin = std::max(r.y2 - t, top_end);
    for (int y = r.y1; y < top_end; ++y)
        for (int x = r.x1; x < r.x2; ++x) fn(x, y);
    for (int y = bot_begin; y < r.y2; ++y)
        for (int x = r.x1; x < r.x2; ++x) fn(x, y);
    const int left_end = std::min(r.x1 + t, r.x2);
    const int right_begin = std::max(r.x2 - t, left_end);
    for (int y = top_end; y < bot_begin; ++y) {
        for (int x = r.x1; x < left_end; ++x) fn(x, y);
        for (int x = right_begin; x < r.x2; ++x) fn(x, y);
    }
}

// Visits the cells of the label text anchored at the rect's top-left,
// clipped to the canvas.
template <typename Fn>
inline void for_label_cells(const PixelRect& r, const std::string& text, int canvas_w,
                            int canvas_h, Fn&& fn) {
    int ox = r.x1 + kLabelInset;
    const int oy = r.y1 + kLabelInset;
    for (char ch : text) {
        if (ch >= 'a' && ch <= 'z') {
            const uint8_t* glyph = kFont5x7[ch - 'a'];
            for (int row = 0; row < 7; ++row) {
                const int y = oy + row;
                if (y < 0 || y >= canvas_h) continue;
                for (int col = 0; col < 5; ++col) {
                    if (!(glyph[row] & (0x10 >> col))) continue;
                    const int x = ox + col;
                    if (x >= 0 && x < canvas_w) fn(x, y);
                }
            }
        }
        ox += kGlyphAdvance;
    }
}

}  // namespace detail

inline void render_layout_into(const ReasoningChain& chain, const RenderConfig& cfg,
                               Canvas& canvas) {
    if (chain.planned.empty()) throw ArgumentError("cannot render an empty chain");
    const int side = cfg.pixels();
    canvas.width = side;
    canvas.height = side;
    canvas.cells.assign(static_cast<size_t>(side) * side, Canvas::kBlank);
    for (size_t k = 0; k < chain.planned.size(); ++k) {
        const auto& obj = chain.planned[k];
        const auto rect = detail::to_pixels(obj.box, cfg.scale);
        const int32_t oc = Canvas::outline_code(static_cast<int>(k));
        detail::for_ring_cells(rect, [&](int x, int y) {
            canvas.cells[static_cast<size_t>(y) * side + x] = oc;
        });
        const int32_t lc = Canvas::label_code(static_cast<int>(k));
        detail::for_label_cells(rect, entity_name(obj.entity), side, side,
                                [&](int x, int y) {
                                    canvas.cells[static_cast<size_t>(y) * side + x] = lc;
                                });
    }
}

inline Canvas render_layout(const ReasoningChain& chain, const RenderConfig& cfg = {}) {
    Canvas canvas;
    render_layout_into(chain, cfg, canvas);
    return canvas;
}

// Reconstructs each object's box from its visible outline cells. Objects are
// processed from the last drawn backwards; cells claimed by later draws are
// excluded, so each anchor candidate can be checked against exactly the
// cells the renderer would have left visible.
inline std::vector<Box> recover_planned_boxes(const Canvas& canvas,
                                              const std::vector<EntitySpec>& entities,
                                              const RenderConfig& cfg = {}) {
    const int n = static_cast<int>(entities.size());
    const int side = canvas.width;
    std::vector<int> outline_count(n, 0), label_count(n, 0);
    for (int32_t v : canvas.cells) {
        if (v == Canvas::kBlank) continue;
        const int k = (v - 1) / 2;
        if (k >= n) throw ArgumentError("canvas references more objects than entities");
        if (v == Canvas::outline_code(k)) ++outline_count[k];
        else ++label_count[k];
    }

    std::vector<uint8_t> covered(canvas.cells.size(), 0);
    std::vector<Box> boxes(n);
    for (int k = n - 1; k >= 0; --k) {
        const int32_t oc = Canvas::outline_code(k);
        const int32_t lc = Canvas::label_code(k);
        const std::string name = entity_name(entities[k]);
        int chosen = -1;
        for (int a = 0; a < kNumAnchors && chosen < 0; ++a) {
            const auto rect = detail::to_pixels(anchor_box(a), cfg.scale);
            bool ok = true;
            int seen_outline = 0;
            detail::for_ring_cells(rect, [&](int x, int y) {
                if (!ok) return;
                const size_t idx = static_cast<size_t>(y) * side + x;
                if (covered[idx]) return;
                const int32_t v = canvas.cells[idx];
                if (v == oc) ++seen_outline;
                else if (v != lc) ok = false;  // own label may cover own ring
            });
            if (!ok || seen_outline != outline_count[k]) continue;
            int seen_label = 0;
            detail::for_label_cells(rect, name, side, side, [&](int x, int y) {
                if (!ok) return;
                const size_t idx = static_cast<size_t>(y) * side + x;
                if (covered[idx]) return;
                if (canvas.cells[idx] == lc) ++seen_label;
                else ok = false;
            });
            if (ok && seen_label == label_count[k]) chosen = a;
        }
        if (chosen < 0) throw Error("failed to recover a box from the canvas");
        boxes[k] = anchor_box(chosen);
        const auto rect = detail::to_pixels(boxes[k], cfg.scale);
        detail::for_ring_cells(rect, [&](int x, int y) {
            covered[static_cast<size_t>(y) * side + x] = 1;
        });
        detail::for_label_cells(rect, name, side, side, [&](int x, int y) {
            covered[static_cast<size_t>(y) * side + x] = 1;
        });
    }
    return boxes;
}

// -------- grounding --------

struct GroundingResult {
    struct Entry {
        std::optional<Box> matched;
        double iou = 0;
    };
    std::vector<Entry> entries;
    double mean_iou = 0;
};

// Greedy matching in plan order: among unused scene objects with the same
// (category, attribute), take the max-IoU one; no identity match leaves the
// planned object unmatched with IoU 0.
inline GroundingResult ground_objects(const ReasoningChain& chain, const Scene& scene) {
    GroundingResult result;
    std::vector<bool> used(scene.placed.size(), false);
    double total = 0;
    for (const auto& planned : chain.planned) {
        GroundingResult::Entry entry;
        int best = -1;
        double best_iou = -1;
        for (size_t j = 0; j < scene.placed.size(); ++j) {
            if (used[j] || !(scene.placed[j].entity == planned.entity)) continue;
            const double v = iou(planned.box, scene.placed[j].box);
            if (v > best_iou) {
                best_iou = v;
                best = static_cast<int>(j);
            }
        }
        if (best >= 0) {
            used[best] = true;
            entry.matched = scene.placed[best].box;
            entry.iou = best_iou;
        }
        total += entry.iou;
        result.entries.push_back(entry);
    }
    result.mean_iou = chain.planned.empty() ? 0 : total / chain.planned.size();
    return result;
}

// -------- image export --------

inline std::string export_ppm(const Canvas& canvas) {
    std::string out = "P6\n" + std::to_string(canvas.width) + " " +
                      std::to_string(canvas.height) + "\n255\n";
    out.reserve(out.size() + canvas.cells.size() * 3);
    for (int32_t v : canvas.cells) {
        const char c = v == Canvas::kBlank ? static_cast<char>(0xFF) : 0;
        out.push_back(c);
        out.push_back(c);
        out.push_back(c);
    }
    return out;
}

namespace detail {

inline uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int b = 0; b < 8; ++b) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc ^= 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

inline uint32_t adler32(const uint8_t* data, size_t len) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < len; ++i) {
        a = (a + data[i]) % 65521;
        b = (b + a) % 65521;
    }
    return (b << 16) | a;
}

inline void put_u32_be(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v >> 24));
    out.push_back(static_cast<char>(v >> 16));
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v));
}

inline void put_chunk(std::string& out, const char type[4], const std::string& data) {
    put_u32_be(out, static_cast<uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    put_u32_be(out, crc32(reinterpret_cast<const uint8_t*>(body.data()), body.size()));
}

}  // namespace detail

// Minimal deterministic PNG: 8-bit RGB, zlib stream of stored deflate blocks.
inline std::string export_png(const Canvas& canvas) {
    std::string raw;
    raw.reserve(static_cast<size_t>(canvas.height) * (1 + canvas.width * 3));
    for (int y = 0; y < canvas.height; ++y) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < canvas.width; ++x) {
            const char c = canvas.at(x, y) == Canvas::kBlank ? static_cast<char>(0xFF) : 0;
            raw.push_back(c);
            raw.push_back(c);
            raw.push_back(c);
        }
    }

    std::string idat;
    idat.push_back(0x78);
    idat.push_back(0x01);
    size_t pos = 0;
    while (pos < raw.size()) {
        const size_t chunk = std::min<size_t>(65535, raw.size() - pos);
        const bool last = pos + chunk == raw.size();
        idat.push_back(last ? 1 : 0);
        idat.push_back(static_cast<char>(chunk & 0xFF));
        idat.push_back(static_cast<char>(chunk >> 8));
        idat.push_back(static_cast<char>(~chunk & 0xFF));
        idat.push_back(static_cast<char>((~chunk >> 8) & 0xFF));
        idat.append(raw, pos, chunk);
        pos += chunk;
    }
    detail::put_u32_be(idat,
                       detail::adler32(reinterpret_cast<const uint8_t*>(raw.data()),
                                       raw.size()));

    std::string ihdr;
    detail::put_u32_be(ihdr, static_cast<uint32_t>(canvas.width));
    detail::put_u32_be(ihdr, static_cast<uint32_t>(canvas.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);

    std::string png = "\x89PNG\r\n\x1a\n";
    detail::put_chunk(png, "IHDR", ihdr);
    detail::put_chunk(png, "IDAT", idat);
    detail::put_chunk(png, "IEND", "");
    return png;
}

}  // namespace planrl
