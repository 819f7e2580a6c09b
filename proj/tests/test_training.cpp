#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "ppkit/bytes.hpp"
#include "ppkit/dataset.hpp"
#include "ppkit/training.hpp"

using namespace ppkit;
using testkit::TempDir;
using testkit::rel_err;
using testkit::slurp;
using testkit::spit;

namespace {

// Thrown from a hook to abandon a run mid-flight, leaving the last
// epoch-boundary checkpoint on disk.
struct AbortRun {};

TrainConfig tiny_l1_config() {
  TrainConfig c;
  c.method = "l1";
  c.epochs = 4;
  c.batch_size = 4;
  c.learning_rate = 1e-3;
  c.seed = 17;
  c.generator.num_residual_blocks = 1;
  c.generator.feature_width = 4;
  c.generator.input_block_size = 16;
  return c;
}

TrainConfig tiny_perceptual_config() {
  TrainConfig c = tiny_l1_config();
  c.method = "perceptual";
  c.stage1_epochs = 2;
  c.discriminator.input_size = 16;
  c.discriminator.base_width = 2;
  c.discriminator.dense_width = 4;
  return c;
}

// Pairs where the compressed side is a coarsely quantized copy of the
// original, so there is structure for the generator to learn.
BlockPairDataset tiny_dataset(const TempDir& dir, std::uint64_t seed = 3) {
  Rng rng(seed);
  const std::string orig_path = dir.file("orig.yuv");
  const std::string comp_path = dir.file("comp.yuv");
  for (int f = 0; f < 2; ++f) {
    PlanarFrame420 orig = testkit::random_frame(16, 16, 8, rng);
    PlanarFrame420 comp = orig;
    for (auto& v : comp.y) v = static_cast<std::uint16_t>(v & ~15);
    write_yuv(orig_path, orig, f > 0);
    write_yuv(comp_path, comp, f > 0);
  }
  const std::vector<SequenceSpec> pairs = {{comp_path, orig_path, 16, 16, 8}};
  return BlockPairDataset::build(pairs, /*blocks_per_frame=*/4, 5, {"VVC", "QP32"}, 16);
}

void check_same_params(const ParameterSetF& a, const ParameterSetF& b,
                       const std::vector<ParamSpec>& specs) {
  for (const ParamSpec& s : specs) CHECK(a.at(s.name).vec() == b.at(s.name).vec());
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("learning rate schedule") {
    TrainConfig c;  // lr 1e-4, decay 0.1 every 100 epochs, 200 epochs
    CHECK(lr_at_epoch(c, 0) == 1e-4);
    CHECK(lr_at_epoch(c, 99) == 1e-4);
    CHECK(rel_err(lr_at_epoch(c, 100), 1e-5) < 1e-12);
    CHECK(rel_err(lr_at_epoch(c, 199), 1e-5) < 1e-12);
    CHECK_THROWS_AS(lr_at_epoch(c, -1), ValidationError);
    CHECK_THROWS_AS(lr_at_epoch(c, 200), ValidationError);

    c.epochs = 300;
    CHECK(rel_err(lr_at_epoch(c, 250), 1e-6) < 1e-12);
    c.lr_step_epochs = 30;
    c.lr_decay = 0.5;
    CHECK(rel_err(lr_at_epoch(c, 65), 1e-4 * 0.25) < 1e-12);
  }

  TEST_CASE("stage-1 epoch resolution") {
    TrainConfig c;
    c.epochs = 10;
    c.stage1_epochs = -1;
    CHECK(resolve_stage1_epochs(c) == 5);
    c.epochs = 9;
    CHECK(resolve_stage1_epochs(c) == 4);
    c.stage1_epochs = 3;
    CHECK(resolve_stage1_epochs(c) == 3);
    c.stage1_epochs = 0;
    CHECK(resolve_stage1_epochs(c) == 0);
  }

  TEST_CASE("config validation") {
    CHECK_NOTHROW(validate_train_config(tiny_l1_config()));
    CHECK_NOTHROW(validate_train_config(tiny_perceptual_config()));

    auto expect_bad = [](TrainConfig c) {
      CHECK_THROWS_AS(validate_train_config(c), ValidationError);
    };
    {
      TrainConfig c = tiny_l1_config();
      c.learning_rate = 0;
      expect_bad(c);
    }
    {
      TrainConfig c = tiny_l1_config();
      c.lr_decay = 0;
      expect_bad(c);
      c.lr_decay = 1.5;
      expect_bad(c);
    }
    {
      TrainConfig c = tiny_l1_config();
      c.lr_step_epochs = 0;
      expect_bad(c);
    }
    {
      TrainConfig c = tiny_l1_config();
      c.epochs = 0;
      expect_bad(c);
    }
    {
      TrainConfig c = tiny_l1_config();
      c.beta1 = 1.0;
      expect_bad(c);
      c.beta1 = 0.9;
      c.beta2 = -0.1;
      expect_bad(c);
    }
    {
      TrainConfig c = tiny_l1_config();
      c.batch_size = 0;
      expect_bad(c);
    }
    {
      TrainConfig c = tiny_l1_config();
      c.method = "l2";
      expect_bad(c);
    }
    {
      TrainConfig c = tiny_l1_config();
      c.weights.alpha = -1;
      expect_bad(c);
    }
    {
      TrainConfig c = tiny_perceptual_config();
      c.discriminator.input_size = 32;  // != generator block size
      expect_bad(c);
    }
    {
      TrainConfig c = tiny_perceptual_config();
      c.stage1_epochs = -2;
      expect_bad(c);
      c.stage1_epochs = c.epochs + 1;
      expect_bad(c);
    }
    {
      TrainConfig c = tiny_perceptual_config();
      c.ssim.window = 10;
      expect_bad(c);
    }
    {
      TrainConfig c = tiny_perceptual_config();
      c.ssim.scale_weights.clear();
      expect_bad(c);
    }
    {
      // discriminator geometry is irrelevant for plain l1 training
      TrainConfig c = tiny_l1_config();
      c.discriminator.input_size = 40;
      CHECK_NOTHROW(validate_train_config(c));
    }
  }

  TEST_CASE("log formatting") {
    CHECK(train_log_header() == "epoch,step,loss_total,loss_ssim,loss_l1,loss_adv,lr");
    TrainLogRow r;
    r.epoch = 2;
    r.step = 34;
    r.loss_total = 0.5;
    r.loss_ssim = 0.25;
    r.loss_l1 = 0.125;
    r.loss_adv = 1.0;
    r.lr = 1e-4;
    CHECK(format_train_log_row(r) == "2,34,0.5,0.25,0.125,1,0.0001");
  }

  TEST_CASE("method guards") {
    TempDir dir;
    const BlockPairDataset ds = tiny_dataset(dir);
    TrainConfig l1 = tiny_l1_config();
    TrainConfig pc = tiny_perceptual_config();
    CHECK_THROWS_AS(train_l1(ds, pc), ValidationError);
    CHECK_THROWS_AS(train_perceptual(ds, l1), ValidationError);
  }

  TEST_CASE("dataset and generator block sizes must agree") {
    TempDir dir;
    Rng rng(8);
    const std::string a = dir.file("a.yuv"), b = dir.file("b.yuv");
    write_yuv(a, testkit::random_frame(16, 16, 8, rng), false);
    write_yuv(b, testkit::random_frame(16, 16, 8, rng), false);
    const BlockPairDataset ds =
        BlockPairDataset::build({{a, b, 16, 16, 8}}, 2, 1, {}, 8);  // 8-pixel blocks
    CHECK_THROWS_AS(train(ds, tiny_l1_config()), ValidationError);
  }

  TEST_CASE("l1 training reduces the loss and is deterministic") {
    TempDir dir;
    const BlockPairDataset ds = tiny_dataset(dir);
    const TrainConfig cfg = tiny_l1_config();

    std::vector<std::string> rows_a;
    std::map<std::int64_t, std::pair<double, int>> by_epoch;
    const ModelBundle a = train(ds, cfg, [&](const TrainLogRow& r) {
      rows_a.push_back(format_train_log_row(r));
      auto& [sum, n] = by_epoch[r.epoch];
      sum += r.loss_total;
      ++n;
      CHECK(r.loss_ssim == 0.0);  // l1 runs only populate the l1 column
      CHECK(r.loss_adv == 0.0);
      CHECK(r.loss_total == r.loss_l1);
      CHECK(r.lr == 1e-3);
    });
    REQUIRE(rows_a.size() == 8);  // 8 blocks / batch 4 = 2 steps x 4 epochs
    REQUIRE(by_epoch.size() == 4);
    const double first = by_epoch[0].first / by_epoch[0].second;
    const double last = by_epoch[3].first / by_epoch[3].second;
    CHECK(last < first);

    CHECK(a.codec == "VVC");  // bundle tags come from the dataset metadata
    CHECK(a.qp_group == "QP32");
    CHECK(a.method == "l1");
    CHECK_FALSE(a.has_discriminator);
    CHECK_NOTHROW(validate_bundle(a));

    // identical seed, identical run
    std::vector<std::string> rows_b;
    const ModelBundle b =
        train(ds, cfg, [&](const TrainLogRow& r) { rows_b.push_back(format_train_log_row(r)); });
    CHECK(rows_b == rows_a);
    check_same_params(a.gen_params, b.gen_params, generator_param_specs(cfg.generator));

    // a different seed changes the trajectory
    TrainConfig other = cfg;
    other.seed = 18;
    std::vector<std::string> rows_c;
    train(ds, other, [&](const TrainLogRow& r) { rows_c.push_back(format_train_log_row(r)); });
    CHECK(rows_c != rows_a);
  }

  TEST_CASE("checkpoint files round trip") {
    TempDir dir;
    const BlockPairDataset ds = tiny_dataset(dir);
    TrainConfig cfg = tiny_l1_config();
    cfg.epochs = 2;
    cfg.checkpoint_path = dir.file("run.ppkc");
    train(ds, cfg);

    const Checkpoint ck = load_checkpoint(cfg.checkpoint_path);
    CHECK(ck.stage == 1);
    CHECK(ck.next_epoch == 2);
    CHECK(ck.global_step == 4);
    CHECK(ck.config.method == "l1");
    CHECK(ck.config.seed == 17);
    CHECK(ck.config.epochs == 2);
    CHECK(ck.config.generator.feature_width == 4);
    CHECK_FALSE(ck.rng_state.empty());
    CHECK(ck.adam_g.step_count() == 4);
    CHECK_FALSE(ck.has_discriminator);
    CHECK(std::isfinite(ck.last_epoch_mean_loss));

    // save(load(x)) is byte-identical
    save_checkpoint(ck, dir.file("copy.ppkc"));
    CHECK(slurp(dir.file("copy.ppkc")) == slurp(cfg.checkpoint_path));

    SUBCASE("stage-2 state requires a discriminator") {
      Checkpoint bad = load_checkpoint(cfg.checkpoint_path);
      bad.stage = 2;
      bad.has_discriminator = false;
      CHECK_THROWS_AS(save_checkpoint(bad, dir.file("bad.ppkc")), ValidationError);
    }
    SUBCASE("corruption detection") {
      std::string bytes = slurp(cfg.checkpoint_path);
      bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x20);
      spit(cfg.checkpoint_path, bytes);
      CHECK_THROWS_AS(load_checkpoint(cfg.checkpoint_path), FormatError);
    }
    SUBCASE("truncation and version checks") {
      const std::string bytes = slurp(cfg.checkpoint_path);
      spit(cfg.checkpoint_path, bytes.substr(0, bytes.size() / 3));
      CHECK_THROWS_AS(load_checkpoint(cfg.checkpoint_path), FormatError);
      ByteWriter w;
      w.raw("PPKC", 4);
      w.u16(77);
      w.u64(w.checksum());
      w.write_file(cfg.checkpoint_path);
      try {
        load_checkpoint(cfg.checkpoint_path);
        FAIL("expected FormatError");
      } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("version") != std::string::npos);
      }
      CHECK_THROWS_AS(load_checkpoint(dir.file("never.ppkc")), IoError);
    }
  }

  TEST_CASE("resume rejects a mismatched config") {
    TempDir dir;
    const BlockPairDataset ds = tiny_dataset(dir);
    TrainConfig cfg = tiny_l1_config();
    cfg.epochs = 1;
    cfg.checkpoint_path = dir.file("run.ppkc");
    train(ds, cfg);

    TrainConfig other = cfg;
    other.seed = 99;
    try {
      train(ds, other, nullptr, cfg.checkpoint_path);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("seed") != std::string::npos);
    }
    // a different checkpoint destination is explicitly allowed
    TrainConfig moved = cfg;
    moved.checkpoint_path = dir.file("elsewhere.ppkc");
    CHECK_NOTHROW(train(ds, moved, nullptr, cfg.checkpoint_path));
  }

  TEST_CASE("interrupted l1 run resumes bit-exactly") {
    TempDir dir;
    const BlockPairDataset ds = tiny_dataset(dir);
    const TrainConfig base = tiny_l1_config();

    // uninterrupted reference run, no checkpointing
    std::vector<std::string> ref_rows;
    const ModelBundle ref = train(ds, base, [&](const TrainLogRow& r) {
      ref_rows.push_back(format_train_log_row(r));
    });

    // run that dies at the start of epoch 2
    TrainConfig ck_cfg = base;
    ck_cfg.checkpoint_path = dir.file("wip.ppkc");
    try {
      train(ds, ck_cfg, [&](const TrainLogRow& r) {
        if (r.epoch == 2) throw AbortRun{};
      });
      FAIL("expected AbortRun");
    } catch (const AbortRun&) {
    }
    CHECK(load_checkpoint(ck_cfg.checkpoint_path).next_epoch == 2);

    // resumed run must replay epochs 2..3 exactly
    std::vector<std::string> resumed_rows;
    const ModelBundle resumed = train(ds, ck_cfg, [&](const TrainLogRow& r) {
      resumed_rows.push_back(format_train_log_row(r));
    }, ck_cfg.checkpoint_path);
    const std::vector<std::string> ref_tail(ref_rows.begin() + 4, ref_rows.end());
    CHECK(resumed_rows == ref_tail);
    check_same_params(resumed.gen_params, ref.gen_params,
                      generator_param_specs(base.generator));
  }

  TEST_CASE("perceptual training stages and alternation") {
    TempDir dir;
    const BlockPairDataset ds = tiny_dataset(dir);
    TrainConfig cfg = tiny_perceptual_config();
    cfg.epochs = 2;
    cfg.stage1_epochs = 1;
    cfg.checkpoint_path = dir.file("run.ppkc");

    bool copied = false;
    std::vector<TrainLogRow> rows;
    const ModelBundle bundle = train(ds, cfg, [&](const TrainLogRow& r) {
      if (r.epoch == 1 && !copied) {
        // first adversarial-stage row: the file still holds the stage-1 state
        std::filesystem::copy_file(cfg.checkpoint_path, dir.file("stage1.ppkc"));
        copied = true;
      }
      rows.push_back(r);
    });
    REQUIRE(copied);
    REQUIRE(rows.size() == 4);

    for (std::size_t i = 0; i < rows.size(); ++i)
      CHECK(rows[i].step == static_cast<std::int64_t>(i + 1));  // one G update per batch
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(rows[i].epoch == 0);
      CHECK(rows[i].loss_total == rows[i].loss_ssim);  // stage 1 is ssim-only
      CHECK(rows[i].loss_l1 == 0.0);
      CHECK(rows[i].loss_adv == 0.0);
    }
    for (std::size_t i = 2; i < 4; ++i) {
      CHECK(rows[i].epoch == 1);
      CHECK(rows[i].loss_l1 > 0.0);
      CHECK(rows[i].loss_adv != 0.0);
      const double recomposed = rows[i].loss_ssim + cfg.weights.alpha * rows[i].loss_l1 +
                                cfg.weights.beta * rows[i].loss_adv;
      CHECK(rel_err(rows[i].loss_total, recomposed) < 1e-5);
    }

    const Checkpoint s1 = load_checkpoint(dir.file("stage1.ppkc"));
    CHECK(s1.stage == 1);
    CHECK_FALSE(s1.has_discriminator);
    CHECK(s1.adam_g.step_count() == 2);

    const Checkpoint s2 = load_checkpoint(cfg.checkpoint_path);
    CHECK(s2.stage == 2);
    CHECK(s2.has_discriminator);
    CHECK(s2.adam_g.step_count() == 2);  // optimizer state restarted at the stage switch
    CHECK(s2.adam_d.step_count() == 2);  // exactly one discriminator update per batch
    CHECK(s2.global_step == 4);

    CHECK(bundle.method == "perceptual");
    CHECK(bundle.has_discriminator);
    CHECK_NOTHROW(validate_bundle(bundle));
  }

  TEST_CASE("perceptual resume crosses the stage boundary bit-exactly") {
    TempDir dir;
    const BlockPairDataset ds = tiny_dataset(dir);
    const TrainConfig base = tiny_perceptual_config();  // 4 epochs, stage 1 for 2

    std::vector<std::string> ref_rows;
    const ModelBundle ref = train(ds, base, [&](const TrainLogRow& r) {
      ref_rows.push_back(format_train_log_row(r));
    });
    REQUIRE(ref_rows.size() == 8);

    for (const std::int64_t stop_epoch : {2, 3}) {
      CAPTURE(stop_epoch);
      TrainConfig ck_cfg = base;
      ck_cfg.checkpoint_path = dir.file("wip" + std::to_string(stop_epoch) + ".ppkc");
      try {
        train(ds, ck_cfg, [&](const TrainLogRow& r) {
          if (r.epoch == stop_epoch) throw AbortRun{};
        });
        FAIL("expected AbortRun");
      } catch (const AbortRun&) {
      }

      std::vector<std::string> resumed_rows;
      const ModelBundle resumed = train(ds, ck_cfg, [&](const TrainLogRow& r) {
        resumed_rows.push_back(format_train_log_row(r));
      }, ck_cfg.checkpoint_path);
      const std::vector<std::string> ref_tail(
          ref_rows.begin() + static_cast<std::ptrdiff_t>(2 * stop_epoch), ref_rows.end());
      CHECK(resumed_rows == ref_tail);
      check_same_params(resumed.gen_params, ref.gen_params,
                        generator_param_specs(base.generator));
      REQUIRE(resumed.has_discriminator);
      check_same_params(resumed.disc_params, ref.disc_params,
                        discriminator_param_specs(base.discriminator));
    }
  }

  TEST_CASE("zero auxiliary weights collapse the combined loss to ssim") {
    TempDir dir;
    const BlockPairDataset ds = tiny_dataset(dir);
    TrainConfig cfg = tiny_perceptual_config();
    cfg.epochs = 2;
    cfg.stage1_epochs = 0;  // adversarial from the start
    cfg.weights.alpha = 0.0;
    cfg.weights.beta = 0.0;
    train(ds, cfg, [&](const TrainLogRow& r) {
      CHECK(r.loss_total == r.loss_ssim);
      CHECK(r.loss_l1 > 0.0);   // still reported, just unweighted
    });
  }
}
