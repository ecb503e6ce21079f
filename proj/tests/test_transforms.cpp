#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "mixforge/core.hpp"
#include "mixforge/rng.hpp"
#include "mixforge/transforms.hpp"

using namespace mixforge;

namespace {

Image random_unit_image(int h, int w, int c, RngStream& rng) {
  std::vector<float> data(static_cast<std::size_t>(h) * w * c);
  for (auto& v : data) v = static_cast<float>(rng.next_double());
  return Image(h, w, c, std::move(data));
}

bool bitwise_equal(const Image& a, const Image& b) {
  return a.same_shape(b) && a.range_tag() == b.range_tag() &&
         std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST_CASE("forced horizontal flip reverses columns") {
  const Image img(2, 2, 1, {0.1f, 0.2f, 0.3f, 0.4f});
  RngStream rng(1, 1);
  const Image out = apply_transform(img, HorizontalFlip{1.0}, rng);
  REQUIRE(out.at(0, 0, 0) == 0.2f);
  REQUIRE(out.at(0, 1, 0) == 0.1f);
  REQUIRE(out.at(1, 0, 0) == 0.4f);
  REQUIRE(out.at(1, 1, 0) == 0.3f);

  RngStream rng2(1, 1);
  const Image none = apply_transform(img, HorizontalFlip{0.0}, rng2);
  REQUIRE(bitwise_equal(none, img));
  REQUIRE(rng2.draws() == 1);  // the coin is drawn even when p = 0
}

TEST_CASE("normalize maps constant 0.5 to constant 0.0") {
  const Image img = Image::constant(4, 4, 3, 0.5f);
  RngStream rng(1, 2);
  const Image out = apply_transform(img, Normalize{{0.5f, 0.5f, 0.5f}, {0.5f, 0.5f, 0.5f}}, rng);
  REQUIRE(out.range_tag() == RangeTag::normalized);
  for (float v : out.data()) REQUIRE(v == 0.0f);
}

TEST_CASE("normalize applied twice raises RangeTagError") {
  const Image img = Image::constant(4, 4, 1, 0.5f);
  RngStream rng(1, 3);
  const Normalize norm{{0.5f}, {0.5f}};
  const Image once = apply_transform(img, norm, rng);
  REQUIRE_THROWS_AS(apply_transform(once, norm, rng), RangeTagError);
}

TEST_CASE("pad_random_crop equals an explicit pad-then-slice oracle") {
  RngStream data_rng(5, 0);
  const Image img = random_unit_image(32, 32, 3, data_rng);
  const int pad = 4;

  for (std::uint64_t id = 0; id < 8; ++id) {
    RngStream impl_rng(99, id);
    const Image out = apply_transform(img, PadRandomCrop{pad}, impl_rng);
    REQUIRE(out.same_shape(img));

    // replay the same stream to learn the offsets, then slice by hand
    RngStream replay(99, id);
    const int dy = static_cast<int>(replay.uniform_int(2 * pad + 1));
    const int dx = static_cast<int>(replay.uniform_int(2 * pad + 1));
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        for (int c = 0; c < 3; ++c) {
          const int sy = y + dy - pad, sx = x + dx - pad;
          const float expected =
              (sy >= 0 && sy < 32 && sx >= 0 && sx < 32) ? img.at(sy, sx, c) : 0.0f;
          REQUIRE(out.at(y, x, c) == expected);
        }
      }
    }
  }
}

TEST_CASE("pad_random_crop with offsets (0,0) is the padded image's top-left window") {
  RngStream data_rng(5, 1);
  const Image img = random_unit_image(8, 8, 1, data_rng);
  // find a stream whose first two draws are both zero offsets
  std::uint64_t id = 0;
  for (;; ++id) {
    RngStream probe(17, id);
    if (probe.uniform_int(9) == 0 && probe.uniform_int(9) == 0) break;
    REQUIRE(id < 1000000);
  }
  RngStream rng(17, id);
  const Image out = apply_transform(img, PadRandomCrop{4}, rng);
  // offset (0,0) reads the padded image's top-left window: out(y,x) = padded(y,x)
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const int sy = y - 4, sx = x - 4;
      const float expected = (sy >= 0 && sx >= 0) ? img.at(sy, sx, 0) : 0.0f;
      REQUIRE(out.at(y, x, 0) == expected);
    }
  }
}

TEST_CASE("center_crop takes the central window and rejects oversize") {
  const Image img = Image::constant(6, 6, 1, 0.5f);
  RngStream rng(2, 0);
  const Image out = apply_transform(img, CenterCrop{4}, rng);
  REQUIRE(out.height() == 4);
  REQUIRE(out.width() == 4);
  REQUIRE_THROWS_AS(apply_transform(img, CenterCrop{7}, rng), ShapeError);
}

TEST_CASE("photometric ops require unit range") {
  const Image norm = Image::constant(4, 4, 1, 0.5f, RangeTag::normalized);
  RngStream rng(3, 0);
  REQUIRE_THROWS_AS(apply_transform(norm, Posterize{4}, rng), RangeTagError);
  REQUIRE_THROWS_AS(apply_transform(norm, Solarize{0.5}, rng), RangeTagError);
  REQUIRE_THROWS_AS(apply_transform(norm, Autocontrast{}, rng), RangeTagError);
  REQUIRE_THROWS_AS(apply_transform(norm, Equalize{}, rng), RangeTagError);
}

TEST_CASE("solarize inverts values at or above the threshold") {
  const Image img(1, 4, 1, {0.1f, 0.4f, 0.6f, 0.9f});
  RngStream rng(3, 1);
  const Image out = apply_transform(img, Solarize{0.5}, rng);
  REQUIRE(out.at(0, 0, 0) == 0.1f);
  REQUIRE(out.at(0, 1, 0) == 0.4f);
  REQUIRE(out.at(0, 2, 0) == Catch::Approx(0.4f));
  REQUIRE(out.at(0, 3, 0) == Catch::Approx(0.1f));
}

TEST_CASE("autocontrast stretches each channel to full range") {
  const Image img(1, 3, 1, {0.2f, 0.4f, 0.6f});
  RngStream rng(3, 2);
  const Image out = apply_transform(img, Autocontrast{}, rng);
  REQUIRE(out.at(0, 0, 0) == 0.0f);
  REQUIRE(out.at(0, 1, 0) == Catch::Approx(0.5f));
  REQUIRE(out.at(0, 2, 0) == 1.0f);

  // flat channels are left alone
  const Image flat = Image::constant(2, 2, 1, 0.3f);
  const Image same = apply_transform(flat, Autocontrast{}, rng);
  REQUIRE(bitwise_equal(same, flat));
}

TEST_CASE("posterize quantizes to the drawn bit depth") {
  const Image img = Image::constant(2, 2, 1, 37.0f / 255.0f);
  // min_bits = 8 forces bits = 8: value snaps to the byte grid unchanged
  RngStream rng(3, 3);
  const Image out = apply_transform(img, Posterize{8}, rng);
  REQUIRE(out.at(0, 0, 0) == 37.0f / 255.0f);
  // min_bits = 1 with a fixed stream: recompute the mask by replay
  RngStream rng2(3, 4);
  const Image out2 = apply_transform(img, Posterize{1}, rng2);
  RngStream replay(3, 4);
  const int bits = 1 + static_cast<int>(replay.uniform_int(8));
  const int mask = (0xFF << (8 - bits)) & 0xFF;
  REQUIRE(out2.at(0, 0, 0) == static_cast<float>(37 & mask) / 255.0f);
}

TEST_CASE("equalize keeps values in range and equal inputs equal") {
  std::vector<float> data;
  for (int i = 0; i < 32; ++i) data.push_back(i < 16 ? 0.25f : 0.75f);
  const Image img(4, 8, 1, std::move(data));
  RngStream rng(3, 5);
  const Image out = apply_transform(img, Equalize{}, rng);
  REQUIRE(out.same_shape(img));
  for (float v : out.data()) {
    REQUIRE(v >= 0.0f);
    REQUIRE(v <= 1.0f);
  }
  // pixels of equal input value stay equal
  REQUIRE(out.at(0, 0, 0) == out.at(1, 1, 0));
  REQUIRE(out.at(3, 7, 0) == out.at(2, 0, 0));
}

TEST_CASE("geometric warps preserve shape and unit range") {
  RngStream data_rng(5, 2);
  const Image img = random_unit_image(16, 16, 3, data_rng);
  RngStream rng(4, 0);
  for (const TransformSpec spec :
       {TransformSpec{Rotate{30.0}}, TransformSpec{TranslateX{0.3}},
        TransformSpec{TranslateY{0.3}}, TransformSpec{ShearX{0.3}},
        TransformSpec{ShearY{0.3}}}) {
    const Image out = apply_transform(img, spec, rng);
    REQUIRE(out.same_shape(img));
    for (float v : out.data()) {
      REQUIRE(v >= 0.0f);
      REQUIRE(v <= 1.0f);
    }
  }
}

TEST_CASE("rotate by max_degrees=0 is the identity") {
  RngStream data_rng(5, 3);
  const Image img = random_unit_image(9, 9, 1, data_rng);
  RngStream rng(4, 1);
  const Image out = apply_transform(img, Rotate{0.0}, rng);
  REQUIRE(bitwise_equal(out, img));
}

TEST_CASE("flip preserves the pixel-value multiset exactly") {
  RngStream data_rng(5, 4);
  const Image img = random_unit_image(7, 5, 3, data_rng);
  RngStream rng(4, 2);
  const Image out = apply_transform(img, HorizontalFlip{1.0}, rng);
  std::multiset<float> before(img.data().begin(), img.data().end());
  std::multiset<float> after(out.data().begin(), out.data().end());
  REQUIRE(before == after);
}

TEST_CASE("every op is deterministic under a fixed stream") {
  RngStream data_rng(5, 5);
  const Image img = random_unit_image(10, 10, 1, data_rng);
  const std::vector<TransformSpec> ops = {
      PadRandomCrop{2}, HorizontalFlip{0.5}, Rotate{20.0}, TranslateX{0.2},
      TranslateY{0.2},  ShearX{0.2},         ShearY{0.2},  Posterize{4},
      Solarize{0.6},    Autocontrast{},      Equalize{}};
  for (std::size_t i = 0; i < ops.size(); ++i) {
    RngStream r1(50, i), r2(50, i);
    const Image o1 = apply_transform(img, ops[i], r1);
    const Image o2 = apply_transform(img, ops[i], r2);
    REQUIRE(bitwise_equal(o1, o2));
    REQUIRE(r1.draws() == r2.draws());
    REQUIRE(static_cast<int>(r1.draws()) == draw_count(ops[i]));
  }
}

TEST_CASE("empty chain is the identity") {
  RngStream data_rng(5, 6);
  const Image img = random_unit_image(6, 6, 1, data_rng);
  RngStream rng(6, 0);
  const Image out = apply_chain(img, TransformChain{}, rng);
  REQUIRE(bitwise_equal(out, img));
  REQUIRE(rng.draws() == 0);
}

TEST_CASE("two forced flips are the identity") {
  RngStream data_rng(5, 7);
  const Image img = random_unit_image(6, 6, 3, data_rng);
  RngStream rng(6, 1);
  const TransformChain chain{HorizontalFlip{1.0}, HorizontalFlip{1.0}};
  const Image out = apply_chain(img, chain, rng);
  REQUIRE(bitwise_equal(out, img));
}

TEST_CASE("chain equals manual composition on the same stream") {
  RngStream data_rng(5, 8);
  const Image img = random_unit_image(32, 32, 3, data_rng);
  const TransformChain chain{PadRandomCrop{4}, HorizontalFlip{0.5},
                             Normalize{{0.5f, 0.5f, 0.5f}, {0.25f, 0.25f, 0.25f}}};
  RngStream chain_rng(7, 0);
  const Image composed = apply_chain(img, chain, chain_rng);

  RngStream manual_rng(7, 0);
  Image manual = apply_transform(img, PadRandomCrop{4}, manual_rng);
  manual = apply_transform(manual, HorizontalFlip{0.5}, manual_rng);
  manual = apply_transform(manual, Normalize{{0.5f, 0.5f, 0.5f}, {0.25f, 0.25f, 0.25f}},
                           manual_rng);
  REQUIRE(bitwise_equal(composed, manual));
  REQUIRE(chain_rng.draws() == manual_rng.draws());
}

TEST_CASE("chain draw ledger: consumed draws equal the documented sum") {
  RngStream meta(8, 0);
  const std::vector<TransformSpec> pool = {
      PadRandomCrop{3}, HorizontalFlip{0.5}, Rotate{15.0}, TranslateX{0.1},
      TranslateY{0.1},  ShearX{0.1},         ShearY{0.1},  Posterize{4},
      Solarize{0.7},    Autocontrast{},      Equalize{}};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TransformSpec> specs;
    const int len = static_cast<int>(meta.uniform_int(6));
    for (int i = 0; i < len; ++i) {
      specs.push_back(pool[static_cast<std::size_t>(
          meta.uniform_int(static_cast<std::int64_t>(pool.size())))]);
    }
    const TransformChain chain(specs);
    RngStream data_rng(8, static_cast<std::uint64_t>(trial) + 1);
    const Image img = random_unit_image(12, 12, 1, data_rng);
    RngStream rng(9, static_cast<std::uint64_t>(trial));
    apply_chain(img, chain, rng);
    REQUIRE(rng.draws() == static_cast<std::uint64_t>(chain.total_draw_count()));
  }
}

TEST_CASE("chain ordering invariant rejects misplaced normalize") {
  const Normalize norm{{0.5f}, {0.5f}};
  REQUIRE_THROWS_AS(
      TransformChain({TransformSpec{norm}, TransformSpec{HorizontalFlip{0.5}}}),
      ConfigError);
  REQUIRE_THROWS_AS(TransformChain({TransformSpec{norm}, TransformSpec{norm}}), ConfigError);
  REQUIRE_NOTHROW(TransformChain({TransformSpec{HorizontalFlip{0.5}}, TransformSpec{norm}}));
}

TEST_CASE("transform parameter validation") {
  RngStream rng(10, 0);
  const Image img = Image::constant(4, 4, 1, 0.5f);
  REQUIRE_THROWS_AS(apply_transform(img, PadRandomCrop{-1}, rng), ConfigError);
  REQUIRE_THROWS_AS(apply_transform(img, HorizontalFlip{1.5}, rng), ConfigError);
  REQUIRE_THROWS_AS(apply_transform(img, Normalize{{0.5f}, {0.0f}}, rng), ConfigError);
  REQUIRE_THROWS_AS(apply_transform(img, Posterize{0}, rng), ConfigError);
  REQUIRE_THROWS_AS(apply_transform(img, Posterize{9}, rng), ConfigError);
}

TEST_CASE("eval_chain_of keeps only the deterministic tail") {
  const Normalize norm{{0.5f}, {0.25f}};
  const TransformChain base{PadRandomCrop{4}, HorizontalFlip{0.5}, CenterCrop{28},
                            TransformSpec{norm}};
  const TransformChain eval = eval_chain_of(base);
  REQUIRE(eval.specs().size() == 2);
  REQUIRE(std::holds_alternative<CenterCrop>(eval.specs()[0]));
  REQUIRE(std::holds_alternative<Normalize>(eval.specs()[1]));
  REQUIRE(eval.total_draw_count() == 0);
  REQUIRE(eval_chain_of(TransformChain{HorizontalFlip{0.5}}).empty());
}

TEST_CASE("augmix level mapping hits the conventional maxima") {
  REQUIRE(std::get<Rotate>(make_augmix_op(AugmixOp::rotate, 1.0)).max_degrees == 30.0);
  REQUIRE(std::get<TranslateX>(make_augmix_op(AugmixOp::translate_x, 1.0)).max_fraction ==
          Catch::Approx(1.0 / 3.0));
  REQUIRE(std::get<ShearY>(make_augmix_op(AugmixOp::shear_y, 1.0)).max_factor ==
          Catch::Approx(0.3));
  REQUIRE(std::get<Posterize>(make_augmix_op(AugmixOp::posterize, 1.0)).min_bits == 4);
  REQUIRE(std::get<Posterize>(make_augmix_op(AugmixOp::posterize, 0.0)).min_bits == 8);
  REQUIRE(std::get<Solarize>(make_augmix_op(AugmixOp::solarize, 0.25)).threshold ==
          Catch::Approx(0.75));

  // every generated op is valid and keeps a unit image unit
  RngStream data_rng(5, 9);
  const Image img = random_unit_image(8, 8, 1, data_rng);
  RngStream rng(11, 0);
  for (AugmixOp op : kAugmixDefaultOps) {
    for (double level : {0.0, 0.37, 1.0}) {
      const Image out = apply_transform(img, make_augmix_op(op, level), rng);
      REQUIRE(out.range_tag() == RangeTag::unit);
      REQUIRE(out.same_shape(img));
    }
  }
}
