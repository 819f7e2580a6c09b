#include <algorithm>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "ppkit/color.hpp"
#include "ppkit/enhance.hpp"
#include "ppkit/tiling.hpp"
#include "ppkit/yuv.hpp"

using namespace ppkit;
using testkit::TempDir;
using testkit::random_frame;
using testkit::slurp;
using testkit::spit;

namespace {

// RGB image with every value an exact multiple of 1/256 so the [-1,1] block
// mapping and back is exact in float arithmetic.
RgbImage quantized_rgb(std::int64_t w, std::int64_t h, Rng& rng, std::uint64_t lo = 0,
                       std::uint64_t hi = 256) {
  RgbImage img = make_rgb_image(w, h);
  for (auto* p : {&img.r, &img.g, &img.b})
    for (auto& v : *p) v = static_cast<float>(lo + rng.below(hi - lo + 1)) / 256.0f;
  return img;
}

// Same, but constant over each 2x2 quad so chroma subsampling is lossless.
RgbImage quad_constant_rgb(std::int64_t w, std::int64_t h, Rng& rng, std::uint64_t lo,
                           std::uint64_t hi) {
  RgbImage img = make_rgb_image(w, h);
  for (std::int64_t y = 0; y < h; y += 2)
    for (std::int64_t x = 0; x < w; x += 2)
      for (int c = 0; c < 3; ++c) {
        const float v = static_cast<float>(lo + rng.below(hi - lo + 1)) / 256.0f;
        img.plane_at(c, y, x) = v;
        img.plane_at(c, y, x + 1) = v;
        img.plane_at(c, y + 1, x) = v;
        img.plane_at(c, y + 1, x + 1) = v;
      }
  return img;
}

double max_plane_diff(const RgbImage& a, const RgbImage& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.r.size(); ++i) {
    worst = std::max(worst, std::fabs(static_cast<double>(a.r[i]) - b.r[i]));
    worst = std::max(worst, std::fabs(static_cast<double>(a.g[i]) - b.g[i]));
    worst = std::max(worst, std::fabs(static_cast<double>(a.b[i]) - b.b[i]));
  }
  return worst;
}

std::int64_t max_code_diff(const std::vector<std::uint16_t>& a,
                           const std::vector<std::uint16_t>& b) {
  std::int64_t worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max<std::int64_t>(
        worst, std::llabs(static_cast<std::int64_t>(a[i]) - static_cast<std::int64_t>(b[i])));
  return worst;
}

}  // namespace

TEST_SUITE("frames") {
  TEST_CASE("frame byte size") {
    CHECK(frame_byte_size(16, 8, 8) == 192);    // 128 luma + 2*32 chroma
    CHECK(frame_byte_size(16, 8, 10) == 384);   // two bytes per sample
    CHECK(frame_byte_size(1920, 1080, 8) == 1920 * 1080 * 3 / 2);
    CHECK_THROWS_AS(frame_byte_size(15, 8, 8), ValidationError);
    CHECK_THROWS_AS(frame_byte_size(16, 9, 8), ValidationError);
    CHECK_THROWS_AS(frame_byte_size(16, 8, 12), ValidationError);
    CHECK_THROWS_AS(frame_byte_size(0, 8, 8), ValidationError);
    CHECK_THROWS_AS(frame_byte_size(-16, 8, 8), ValidationError);
  }

  TEST_CASE("yuv write and read round trip") {
    TempDir dir;
    Rng rng(31);
    for (const int depth : {8, 10}) {
      const std::string path = dir.file(depth == 8 ? "a8.yuv" : "a10.yuv");
      std::vector<PlanarFrame420> frames;
      for (int i = 0; i < 3; ++i) frames.push_back(random_frame(16, 8, depth, rng));
      write_yuv(path, frames[0], /*append=*/false);
      write_yuv(path, frames[1], /*append=*/true);
      write_yuv(path, frames[2], /*append=*/true);
      CHECK(static_cast<std::int64_t>(slurp(path).size()) == 3 * frame_byte_size(16, 8, depth));
      CHECK(count_yuv_frames(path, 16, 8, depth) == 3);
      for (int i = 0; i < 3; ++i) {
        const PlanarFrame420 f = read_yuv(path, 16, 8, depth, i);
        CHECK(f.width == 16);
        CHECK(f.height == 8);
        CHECK(f.bit_depth == depth);
        CHECK(f.y == frames[static_cast<std::size_t>(i)].y);
        CHECK(f.cb == frames[static_cast<std::size_t>(i)].cb);
        CHECK(f.cr == frames[static_cast<std::size_t>(i)].cr);
      }
      // append=false truncates
      write_yuv(path, frames[2], /*append=*/false);
      CHECK(count_yuv_frames(path, 16, 8, depth) == 1);
      CHECK(read_yuv(path, 16, 8, depth, 0).y == frames[2].y);
    }
  }

  TEST_CASE("yuv error taxonomy") {
    TempDir dir;
    Rng rng(32);
    CHECK_THROWS_AS(count_yuv_frames(dir.file("missing.yuv"), 16, 8, 8), IoError);
    CHECK_THROWS_AS(read_yuv(dir.file("missing.yuv"), 16, 8, 8, 0), IoError);

    const std::string path = dir.file("clip.yuv");
    const PlanarFrame420 f = random_frame(16, 8, 8, rng);
    write_yuv(path, f, false);
    write_yuv(path, f, true);
    CHECK(count_yuv_frames(path, 16, 8, 8) == 2);
    CHECK_THROWS_AS(read_yuv(path, 16, 8, 8, 2), FormatError);
    CHECK_THROWS_AS(read_yuv(path, 16, 8, 8, -1), ValidationError);

    // trailing partial frame
    spit(path, slurp(path) + "xyz");
    CHECK_THROWS_AS(count_yuv_frames(path, 16, 8, 8), FormatError);

    // out-of-range 10-bit sample on disk
    const std::string p10 = dir.file("clip10.yuv");
    write_yuv(p10, random_frame(16, 8, 10, rng), false);
    std::string bytes = slurp(p10);
    bytes[0] = static_cast<char>(0xff);
    bytes[1] = static_cast<char>(0x07);  // 2047 > 1023
    spit(p10, bytes);
    CHECK_THROWS_AS(read_yuv(p10, 16, 8, 10, 0), FormatError);

    // out-of-range sample refused on write
    PlanarFrame420 bad = random_frame(16, 8, 10, rng);
    bad.y[0] = 1024;
    CHECK_THROWS_AS(write_yuv(dir.file("bad.yuv"), bad, false), ValidationError);
  }

  TEST_CASE("color conversion hits the limited-range anchors") {
    auto anchors = [](int depth, std::uint16_t y, std::uint16_t c, float expect) {
      PlanarFrame420 f = make_frame(4, 2, depth);
      std::fill(f.y.begin(), f.y.end(), y);
      std::fill(f.cb.begin(), f.cb.end(), c);
      std::fill(f.cr.begin(), f.cr.end(), c);
      const RgbImage img = ycbcr_to_rgb(f);
      for (std::size_t i = 0; i < img.r.size(); ++i) {
        CHECK(img.r[i] == expect);
        CHECK(img.g[i] == expect);
        CHECK(img.b[i] == expect);
      }
    };
    anchors(8, 235, 128, 1.0f);   // reference white
    anchors(8, 16, 128, 0.0f);    // reference black
    anchors(10, 940, 512, 1.0f);
    anchors(10, 64, 512, 0.0f);

    // saturated red, 8-bit: the standard code triple is (63, 102, 240)
    RgbImage red = make_rgb_image(4, 2);
    std::fill(red.r.begin(), red.r.end(), 1.0f);
    const PlanarFrame420 fr = rgb_to_ycbcr(red, 8);
    CHECK(fr.y[0] == 63);
    CHECK(fr.cb[0] == 102);
    CHECK(fr.cr[0] == 240);
  }

  TEST_CASE("color matrix round trips") {
    Rng rng(33);
    // rgb -> ycbcr -> rgb, chroma constant per quad so subsampling is lossless
    const RgbImage rgb = quad_constant_rgb(16, 8, rng, 13, 243);
    const RgbImage back10 = ycbcr_to_rgb(rgb_to_ycbcr(rgb, 10));
    CHECK(max_plane_diff(rgb, back10) < 0.004);
    const RgbImage back8 = ycbcr_to_rgb(rgb_to_ycbcr(rgb, 8));
    CHECK(max_plane_diff(rgb, back8) < 0.012);

    // ycbcr -> rgb -> ycbcr on an in-gamut frame stays within quantization
    const PlanarFrame420 f = rgb_to_ycbcr(rgb, 10);
    const PlanarFrame420 f2 = rgb_to_ycbcr(ycbcr_to_rgb(f), 10);
    CHECK(max_code_diff(f.y, f2.y) <= 2);
    CHECK(max_code_diff(f.cb, f2.cb) <= 2);
    CHECK(max_code_diff(f.cr, f2.cr) <= 2);
  }

  TEST_CASE("block plan layout") {
    SUBCASE("exact fits and clamped tails") {
      const BlockGrid g1 = plan_blocks(96, 96);
      CHECK(g1.xs == std::vector<std::int64_t>{0});
      CHECK(g1.ys == std::vector<std::int64_t>{0});
      CHECK(g1.block_count() == 1);

      const BlockGrid g2 = plan_blocks(100, 96);
      CHECK(g2.xs == std::vector<std::int64_t>{0, 4});
      CHECK(g2.ys == std::vector<std::int64_t>{0});

      const BlockGrid g3 = plan_blocks(188, 190);
      CHECK(g3.xs == std::vector<std::int64_t>{0, 92});
      CHECK(g3.ys == std::vector<std::int64_t>{0, 92, 94});

      const BlockGrid g4 = plan_blocks(20, 20, 8, 2);
      CHECK(g4.xs == std::vector<std::int64_t>{0, 6, 12});
    }

    SUBCASE("full HD block count") {
      const BlockGrid g = plan_blocks(1920, 1080);
      CHECK(g.xs.size() == 21);
      CHECK(g.ys.size() == 12);
      CHECK(g.block_count() == 252);
      CHECK(g.xs.front() == 0);
      CHECK(g.xs.back() == 1824);
      CHECK(g.ys.back() == 984);
    }

    SUBCASE("coverage properties on random sizes") {
      Rng rng(34);
      for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t w = 96 + static_cast<std::int64_t>(rng.below(405));
        const std::int64_t h = 96 + static_cast<std::int64_t>(rng.below(405));
        const BlockGrid g = plan_blocks(w, h);
        for (const auto* axis : {&g.xs, &g.ys}) {
          const std::int64_t dim = axis == &g.xs ? w : h;
          REQUIRE(!axis->empty());
          CHECK(axis->front() == 0);
          CHECK(axis->back() == dim - 96);
          for (std::size_t i = 1; i < axis->size(); ++i) {
            CHECK((*axis)[i] > (*axis)[i - 1]);            // ascending
            CHECK((*axis)[i] - (*axis)[i - 1] <= 92);      // at least 4 overlap or less gap
          }
        }
        const auto counts = coverage_counts(g);
        CHECK(*std::min_element(counts.begin(), counts.end()) >= 1);
      }
    }

    SUBCASE("validation") {
      CHECK_THROWS_AS(plan_blocks(95, 100), ValidationError);
      CHECK_THROWS_AS(plan_blocks(100, 95), ValidationError);
      CHECK_THROWS_AS(plan_blocks(100, 100, 96, 96), ValidationError);
      CHECK_THROWS_AS(plan_blocks(100, 100, 96, -1), ValidationError);
      CHECK_THROWS_AS(plan_blocks(100, 100, 0, 0), ValidationError);
    }
  }

  TEST_CASE("coverage counts match a counting oracle") {
    const BlockGrid g = plan_blocks(280, 188);
    REQUIRE(g.xs == std::vector<std::int64_t>{0, 92, 184});
    REQUIRE(g.ys == std::vector<std::int64_t>{0, 92});
    const auto counts = coverage_counts(g);
    std::vector<std::int32_t> oracle(static_cast<std::size_t>(280 * 188), 0);
    for (std::int64_t by : g.ys)
      for (std::int64_t bx : g.xs)
        for (std::int64_t y = by; y < by + 96; ++y)
          for (std::int64_t x = bx; x < bx + 96; ++x)
            ++oracle[static_cast<std::size_t>(y * 280 + x)];
    CHECK(counts == oracle);
    std::int64_t sum = 0;
    for (const auto c : counts) {
      CHECK((c == 1 || c == 2 || c == 4));
      sum += c;
    }
    CHECK(sum == g.block_count() * 96 * 96);
  }

  TEST_CASE("extract and aggregate are inverse for quantized pixels") {
    Rng rng(35);
    const RgbImage img = quantized_rgb(280, 188, rng);
    const BlockGrid grid = plan_blocks(280, 188);
    const Tensor4f blocks = extract_blocks(img, grid);
    REQUIRE(blocks.dims() == Dims4{6, 3, 96, 96});
    // spot-check the [-1,1] mapping at the first block
    CHECK(blocks.at(0, 0, 0, 0) == 2.0f * img.r[0] - 1.0f);
    CHECK(blocks.at(0, 1, 2, 3) == 2.0f * img.plane_at(1, 2, 3) - 1.0f);
    const RgbImage back = aggregate_blocks(blocks, grid);
    CHECK(back.r == img.r);
    CHECK(back.g == img.g);
    CHECK(back.b == img.b);
  }

  TEST_CASE("extract and aggregate on arbitrary floats") {
    Rng rng(36);
    RgbImage img = make_rgb_image(188, 100);
    for (auto* p : {&img.r, &img.g, &img.b})
      for (auto& v : *p) v = static_cast<float>(rng.uniform(0.0, 1.0));
    const BlockGrid grid = plan_blocks(188, 100);
    const RgbImage back = aggregate_blocks(extract_blocks(img, grid), grid);
    CHECK(max_plane_diff(img, back) < 2e-7);

    RgbImage wrong = make_rgb_image(190, 100);
    CHECK_THROWS_AS(extract_blocks(wrong, grid), ValidationError);
    CHECK_THROWS_AS(aggregate_blocks(Tensor4f({5, 3, 96, 96}), grid), ValidationError);
  }

  TEST_CASE("aggregate averages overlapping contributions and clamps") {
    const BlockGrid g = plan_blocks(14, 8, 8, 2);
    REQUIRE(g.xs == std::vector<std::int64_t>{0, 6});
    REQUIRE(g.ys == std::vector<std::int64_t>{0});
    Tensor4f blocks({2, 3, 8, 8});
    for (std::int64_t i = 0; i < blocks.size() / 2; ++i) blocks[i] = -1.0f;
    for (std::int64_t i = blocks.size() / 2; i < blocks.size(); ++i) blocks[i] = 1.0f;
    const RgbImage img = aggregate_blocks(blocks, g);
    for (std::int64_t y = 0; y < 8; ++y)
      for (std::int64_t x = 0; x < 14; ++x) {
        const float expect = x < 6 ? 0.0f : (x < 8 ? 0.5f : 1.0f);
        CHECK(img.plane_at(0, y, x) == expect);
        CHECK(img.plane_at(2, y, x) == expect);
      }

    // out-of-range block values clamp on the way back to pixels
    Tensor4f hot({2, 3, 8, 8});
    hot.fill(3.0f);
    const RgbImage clamped = aggregate_blocks(hot, g);
    for (float v : clamped.g) CHECK(v == 1.0f);
  }

  TEST_CASE("enhance_image pass-through is the identity") {
    Rng rng(37);
    const RgbImage img = quantized_rgb(280, 188, rng);
    std::vector<Dims4> seen;
    const BlockTransform identity = [&](const Tensor4f& b) {
      seen.push_back(b.dims());
      return b;
    };
    const RgbImage out = enhance_image(img, identity, 96, 4, /*blocks_per_batch=*/4);
    CHECK(out.r == img.r);
    CHECK(out.g == img.g);
    CHECK(out.b == img.b);
    // six blocks split into one full and one partial batch
    REQUIRE(seen.size() == 2);
    CHECK(seen[0] == Dims4{4, 3, 96, 96});
    CHECK(seen[1] == Dims4{2, 3, 96, 96});

    const BlockTransform bad_shape = [](const Tensor4f& b) {
      return Tensor4f({b.dims().n, 3, 48, 48});
    };
    CHECK_THROWS_AS(enhance_image(img, bad_shape), ValidationError);
    CHECK_THROWS_AS(enhance_image(img, identity, 96, 4, 0), ValidationError);
  }

  TEST_CASE("enhance_frame_with preserves geometry and content") {
    Rng rng(38);
    const RgbImage rgb = quad_constant_rgb(192, 96, rng, 13, 243);
    for (const int depth : {8, 10}) {
      const PlanarFrame420 f = rgb_to_ycbcr(rgb, depth);
      const PlanarFrame420 out =
          enhance_frame_with([](const Tensor4f& b) { return b; }, f);
      CHECK(out.width == 192);
      CHECK(out.height == 96);
      CHECK(out.bit_depth == depth);
      const std::int64_t tol = 2;
      CHECK(max_code_diff(f.y, out.y) <= tol);
      CHECK(max_code_diff(f.cb, out.cb) <= tol);
      CHECK(max_code_diff(f.cr, out.cr) <= tol);
    }
  }

  TEST_CASE("enhance_frame runs a generator bundle end to end") {
    GeneratorConfig cfg;
    cfg.num_residual_blocks = 1;
    cfg.feature_width = 4;
    ModelBundle bundle;
    bundle.gen_config = cfg;
    bundle.gen_params = init_params<float>(generator_param_specs(cfg), 3);

    Rng rng(39);
    const PlanarFrame420 f = rgb_to_ycbcr(quad_constant_rgb(192, 96, rng, 13, 243), 10);
    const PlanarFrame420 a = enhance_frame(bundle, f);
    CHECK(a.width == f.width);
    CHECK(a.height == f.height);
    CHECK(a.bit_depth == 10);
    CHECK(a.y.size() == f.y.size());
    const PlanarFrame420 b = enhance_frame(bundle, f);
    CHECK(a.y == b.y);  // deterministic
    CHECK(a.cb == b.cb);
    CHECK(a.cr == b.cr);
  }
}
