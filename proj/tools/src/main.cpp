#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ppkit/bdrate.hpp"
#include "ppkit/dataset.hpp"
#include "ppkit/dispatch.hpp"
#include "ppkit/enhance.hpp"
#include "ppkit/errors.hpp"
#include "ppkit/metrics.hpp"
#include "ppkit/model_io.hpp"
#include "ppkit/report.hpp"
#include "ppkit/training.hpp"
#include "ppkit/yuv.hpp"

namespace {

using namespace ppkit;

// ---- dataset build ----

struct DatasetArgs {
  std::string pairs_file;
  std::string output;
  std::string codec = "VVC";
  std::string qp_group = "QP32";
  std::int64_t width = 0;
  std::int64_t height = 0;
  int bit_depth = 8;
  std::int64_t blocks_per_frame = 8;
  std::int64_t block_size = 96;
  std::uint64_t seed = 0;
};

// One pair per line: <compressed.yuv> <original.yuv>. '#' starts a comment.
// Paths are resolved relative to the list file.
std::vector<SequenceSpec> parse_pairs_file(const DatasetArgs& a) {
  std::ifstream in(a.pairs_file);
  if (!in) throw IoError("cannot open pair list: " + a.pairs_file);
  const auto base = std::filesystem::path(a.pairs_file).parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  std::vector<SequenceSpec> specs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string comp, orig, extra;
    if (!(ls >> comp)) continue;  // blank
    if (!(ls >> orig))
      throw FormatError(a.pairs_file + ":" + std::to_string(lineno) +
                        ": expected two paths per line");
    if (ls >> extra)
      throw FormatError(a.pairs_file + ":" + std::to_string(lineno) +
                        ": unexpected trailing field '" + extra + "'");
    specs.push_back({resolve(comp), resolve(orig), a.width, a.height, a.bit_depth});
  }
  if (specs.empty()) throw ValidationError("pair list is empty: " + a.pairs_file);
  return specs;
}

void cmd_dataset_build(const DatasetArgs& a) {
  const auto specs = parse_pairs_file(a);
  const auto ds = BlockPairDataset::build(specs, a.blocks_per_frame, a.seed,
                                          DatasetMeta{a.codec, a.qp_group}, a.block_size);
  ds.save(a.output);
  std::printf("dataset: %lld pairs from %zu sequences (%lldx%lld, %d-bit stored)\n",
              static_cast<long long>(ds.size()), specs.size(),
              static_cast<long long>(ds.block_size()),
              static_cast<long long>(ds.block_size()), ds.sample_depth());
  std::printf("wrote %s\n", a.output.c_str());
}

// ---- train ----

struct TrainArgs {
  std::string dataset;
  std::string output;
  std::string log_path;
  std::string checkpoint;
  std::string resume;
  TrainConfig config;
};

void cmd_train(const TrainArgs& a) {
  const auto data = BlockPairDataset::load(a.dataset);
  TrainConfig config = a.config;
  config.generator.input_block_size = data.block_size();
  config.discriminator.input_size = data.block_size();
  validate_train_config(config);

  std::ofstream log;
  if (!a.log_path.empty()) {
    const bool fresh =
        !std::filesystem::exists(a.log_path) || std::filesystem::file_size(a.log_path) == 0;
    log.open(a.log_path, std::ios::app);
    if (!log) throw IoError("cannot open log for append: " + a.log_path);
    if (fresh) log << train_log_header() << "\n";
  }
  TrainHook hook;
  if (log.is_open())
    hook = [&log](const TrainLogRow& row) { log << format_train_log_row(row) << "\n"; };

  const ModelBundle bundle = train(data, config, hook, a.resume);
  save_model(bundle, a.output);
  std::printf("trained %s model for %s %s\n", bundle.method.c_str(), bundle.codec.c_str(),
              bundle.qp_group.c_str());
  std::printf("wrote %s\n", a.output.c_str());
}

// ---- enhance ----

struct EnhanceArgs {
  std::string input;
  std::string output;
  std::string models;
  std::string codec = "VVC";
  std::string method = "l1";
  double qp = 32;
  std::int64_t width = 0;
  std::int64_t height = 0;
  int bit_depth = 8;
  std::int64_t frames = -1;  // -1 = all
};

void cmd_enhance(const EnhanceArgs& a) {
  const auto registry = ModelRegistry::load(a.models);
  const ModelBundle bundle = registry.resolve(a.codec, a.qp, a.method);
  validate_frame_geometry(a.width, a.height, a.bit_depth);
  std::int64_t n = count_yuv_frames(a.input, a.width, a.height, a.bit_depth);
  if (n == 0) throw ValidationError("input has no frames: " + a.input);
  if (a.frames >= 0) n = std::min(n, a.frames);
  for (std::int64_t i = 0; i < n; ++i) {
    const PlanarFrame420 frame = read_yuv(a.input, a.width, a.height, a.bit_depth, i);
    write_yuv(a.output, enhance_frame(bundle, frame), /*append=*/i > 0);
  }
  std::printf("enhanced %lld frames with %s %s (%s)\n", static_cast<long long>(n),
              bundle.codec.c_str(), bundle.qp_group.c_str(), bundle.method.c_str());
  std::printf("wrote %s\n", a.output.c_str());
}

// ---- quality ----

struct QualityArgs {
  std::string ref;
  std::string test;
  std::int64_t width = 0;
  std::int64_t height = 0;
  int bit_depth = 8;
  std::int64_t frames = -1;
};

void cmd_quality(const QualityArgs& a) {
  validate_frame_geometry(a.width, a.height, a.bit_depth);
  const std::int64_t n_ref = count_yuv_frames(a.ref, a.width, a.height, a.bit_depth);
  const std::int64_t n_test = count_yuv_frames(a.test, a.width, a.height, a.bit_depth);
  std::int64_t n = std::min(n_ref, n_test);
  if (a.frames >= 0)
    n = std::min(n, a.frames);
  else if (n_ref != n_test)
    throw ValidationError("frame count mismatch: ref has " + std::to_string(n_ref) +
                          ", test has " + std::to_string(n_test));
  if (n == 0) throw ValidationError("no frames to compare");

  std::printf("frame,psnr_y,ssim_y\n");
  double psnr_sum = 0, ssim_sum = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const PlanarFrame420 r = read_yuv(a.ref, a.width, a.height, a.bit_depth, i);
    const PlanarFrame420 t = read_yuv(a.test, a.width, a.height, a.bit_depth, i);
    const double p = psnr(r, t);
    const double s = ssim_metric(r, t);
    psnr_sum += p;
    ssim_sum += s;
    std::printf("%lld,%.6f,%.6f\n", static_cast<long long>(i), p, s);
  }
  std::printf("mean,%.6f,%.6f\n", psnr_sum / static_cast<double>(n),
              ssim_sum / static_cast<double>(n));
}

// ---- bdrate ----

struct BdrateArgs {
  std::string anchor;
  std::string test;
  std::string table;
  std::string qp_range;  // "", "low", "high"
  bool csv = false;
};

// Table list: CSV lines `class,sequence,anchor.csv,test.csv`, '#' comments,
// paths relative to the list file.
std::vector<BdSequenceResult> run_table(const BdrateArgs& a) {
  std::ifstream in(a.table);
  if (!in) throw IoError("cannot open table list: " + a.table);
  const auto base = std::filesystem::path(a.table).parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  std::vector<BdSequenceResult> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() != 4)
      throw FormatError(a.table + ":" + std::to_string(lineno) +
                        ": expected `class,sequence,anchor.csv,test.csv`");
    RateQualityCurve anchor = curve_from_csv(resolve(fields[2]));
    RateQualityCurve test = curve_from_csv(resolve(fields[3]));
    if (!a.qp_range.empty()) {
      anchor = qp_subrange(anchor, a.qp_range);
      test = qp_subrange(test, a.qp_range);
    }
    rows.push_back({fields[0], fields[1], bd_rate(anchor, test)});
  }
  if (rows.empty()) throw ValidationError("table list is empty: " + a.table);
  return rows;
}

void cmd_bdrate(const BdrateArgs& a) {
  const bool single = !a.anchor.empty() || !a.test.empty();
  const bool table = !a.table.empty();
  if (single == table)
    throw ValidationError("use either --anchor/--test or --table, not both");
  if (table) {
    const BdReport report = build_bd_report(run_table(a));
    std::fputs((a.csv ? render_bd_csv(report) : render_bd_table(report)).c_str(), stdout);
    return;
  }
  if (a.anchor.empty() || a.test.empty())
    throw ValidationError("--anchor and --test are both required");
  RateQualityCurve anchor = curve_from_csv(a.anchor);
  RateQualityCurve test = curve_from_csv(a.test);
  if (!a.qp_range.empty()) {
    anchor = qp_subrange(anchor, a.qp_range);
    test = qp_subrange(test, a.qp_range);
  }
  std::printf("%.4f%%\n", bd_rate(anchor, test));
}

// ---- curves ----

struct CurvesArgs {
  std::vector<std::string> inputs;
  std::string output_stem;
};

void cmd_curves(const CurvesArgs& a) {
  std::vector<RateQualityCurve> curves;
  for (const std::string& path : a.inputs) curves.push_back(curve_from_csv(path));

  const std::string csv_path = a.output_stem + ".csv";
  const std::string dat_path = a.output_stem + ".dat";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot open for writing: " + csv_path);
  std::ofstream dat(dat_path);
  if (!dat) throw IoError("cannot open for writing: " + dat_path);

  char buf[160];
  csv << "label,bitrate_kbps,quality,qp\n";
  std::int64_t rows = 0;
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const RateQualityCurve& c = curves[ci];
    if (ci > 0) dat << "\n\n";  // gnuplot index separator
    dat << "# " << c.label << "\n";
    for (const RateQualityPoint& p : c.points) {
      if (p.qp)
        std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g", p.bitrate_kbps, p.quality, *p.qp);
      else
        std::snprintf(buf, sizeof(buf), "%.6g,%.6g,", p.bitrate_kbps, p.quality);
      csv << c.label << "," << buf << "\n";
      std::snprintf(buf, sizeof(buf), "%.6g %.6g", p.bitrate_kbps, p.quality);
      dat << buf << "\n";
      ++rows;
    }
  }
  std::printf("wrote %lld rows for %zu curves to %s and %s\n", static_cast<long long>(rows),
              curves.size(), csv_path.c_str(), dat_path.c_str());
}

// ---- wiring ----

void add_geometry(CLI::App* cmd, std::int64_t* width, std::int64_t* height, int* bit_depth) {
  cmd->add_option("--width", *width, "Frame width in pixels")->required();
  cmd->add_option("--height", *height, "Frame height in pixels")->required();
  cmd->add_option("--bit-depth", *bit_depth, "Sample bit depth")
      ->check(CLI::IsMember({8, 10}))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CNN post-processing toolkit for compressed video"};
  app.require_subcommand(1);

  DatasetArgs da;
  auto* dataset = app.add_subcommand("dataset", "Dataset operations");
  dataset->require_subcommand(1);
  auto* build = dataset->add_subcommand("build", "Pack co-located block pairs from YUV pairs");
  build->add_option("--pairs", da.pairs_file,
                    "Text file with one `compressed.yuv original.yuv` pair per line")
      ->required();
  build->add_option("-o,--output", da.output, "Output dataset file (.ppkd)")->required();
  add_geometry(build, &da.width, &da.height, &da.bit_depth);
  build->add_option("--codec", da.codec, "Source codec tag (VVC or AV1)")
      ->capture_default_str();
  build->add_option("--qp-group", da.qp_group, "QP group tag, e.g. QP32")
      ->capture_default_str();
  build->add_option("--blocks-per-frame", da.blocks_per_frame, "Random crops per frame")
      ->capture_default_str();
  build->add_option("--block-size", da.block_size, "Square crop size")->capture_default_str();
  build->add_option("--seed", da.seed, "Crop/rotation RNG seed")->capture_default_str();
  build->callback([&da] { cmd_dataset_build(da); });

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train an enhancement model on a dataset");
  train_cmd->add_option("--dataset", ta.dataset, "Dataset file from `dataset build`")
      ->required();
  train_cmd->add_option("-o,--output", ta.output, "Output model file (.ppkm)")->required();
  train_cmd->add_option("--method", ta.config.method, "Training method: l1 or perceptual")
      ->check(CLI::IsMember({"l1", "perceptual"}))
      ->capture_default_str();
  train_cmd->add_option("--epochs", ta.config.epochs, "Total epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", ta.config.batch_size, "Mini-batch size")
      ->capture_default_str();
  train_cmd->add_option("--lr", ta.config.learning_rate, "Initial learning rate")
      ->capture_default_str();
  train_cmd->add_option("--lr-decay", ta.config.lr_decay, "Step decay factor")
      ->capture_default_str();
  train_cmd->add_option("--lr-step", ta.config.lr_step_epochs, "Epochs between decays")
      ->capture_default_str();
  train_cmd
      ->add_option("--stage1-epochs", ta.config.stage1_epochs,
                   "Perceptual: SSIM-only epochs before the adversarial stage (-1 = half)")
      ->capture_default_str();
  train_cmd->add_option("--blocks", ta.config.generator.num_residual_blocks,
                        "Generator residual blocks")
      ->capture_default_str();
  train_cmd->add_option("--feature-width", ta.config.generator.feature_width,
                        "Generator feature channels")
      ->capture_default_str();
  train_cmd->add_option("--disc-base-width", ta.config.discriminator.base_width,
                        "Discriminator first-layer channels")
      ->capture_default_str();
  train_cmd->add_option("--disc-dense-width", ta.config.discriminator.dense_width,
                        "Discriminator dense layer width")
      ->capture_default_str();
  train_cmd->add_option("--alpha", ta.config.weights.alpha, "l1 weight in the combined loss")
      ->capture_default_str();
  train_cmd
      ->add_option("--beta", ta.config.weights.beta, "Adversarial weight in the combined loss")
      ->capture_default_str();
  train_cmd->add_option("--seed", ta.config.seed, "Init/shuffle RNG seed")
      ->capture_default_str();
  train_cmd->add_option("--log", ta.log_path, "Append per-step loss CSV here");
  train_cmd->add_option("--checkpoint", ta.checkpoint,
                        "Write a resumable checkpoint here after every epoch");
  train_cmd->add_option("--resume", ta.resume, "Resume from this checkpoint");
  train_cmd->callback([&ta] {
    ta.config.checkpoint_path = ta.checkpoint;
    cmd_train(ta);
  });

  EnhanceArgs ea;
  auto* enhance = app.add_subcommand("enhance", "Post-process a decoded YUV file");
  enhance->add_option("-i,--input", ea.input, "Decoded 4:2:0 YUV input")->required();
  enhance->add_option("-o,--output", ea.output, "Enhanced YUV output")->required();
  add_geometry(enhance, &ea.width, &ea.height, &ea.bit_depth);
  enhance->add_option("--models", ea.models, "Model registry manifest")->required();
  enhance->add_option("--codec", ea.codec, "Codec the input was decoded from")
      ->capture_default_str();
  enhance->add_option("--qp", ea.qp, "Evaluation QP used to pick the model group")
      ->required();
  enhance->add_option("--method", ea.method, "Model flavor: l1 or perceptual")
      ->capture_default_str();
  enhance->add_option("--frames", ea.frames, "Process only the first N frames");
  enhance->callback([&ea] { cmd_enhance(ea); });

  QualityArgs qa;
  auto* quality = app.add_subcommand("quality", "Per-frame Y-PSNR / Y-SSIM report");
  quality->add_option("--ref", qa.ref, "Reference YUV")->required();
  quality->add_option("--test", qa.test, "Test YUV")->required();
  add_geometry(quality, &qa.width, &qa.height, &qa.bit_depth);
  quality->add_option("--frames", qa.frames, "Compare only the first N frames");
  quality->callback([&qa] { cmd_quality(qa); });

  BdrateArgs ba;
  auto* bdrate = app.add_subcommand("bdrate", "Bjontegaard delta rate between curves");
  bdrate->add_option("--anchor", ba.anchor, "Anchor rate-quality CSV");
  bdrate->add_option("--test", ba.test, "Test rate-quality CSV");
  bdrate->add_option("--table", ba.table,
                     "List CSV `class,sequence,anchor.csv,test.csv` for a full report");
  bdrate->add_option("--qp-range", ba.qp_range, "Restrict to a QP subrange: low or high")
      ->check(CLI::IsMember({"low", "high"}));
  bdrate->add_flag("--csv", ba.csv, "Emit the table report as CSV instead of aligned text");
  bdrate->callback([&ba] { cmd_bdrate(ba); });

  CurvesArgs ca;
  auto* curves = app.add_subcommand("curves", "Merge curve CSVs into plot data");
  curves->add_option("inputs", ca.inputs, "Rate-quality curve CSVs")
      ->required()
      ->expected(-1);
  curves->add_option("-o,--output", ca.output_stem,
                     "Output stem; writes <stem>.csv and <stem>.dat")
      ->required();
  curves->callback([&ca] { cmd_curves(ca); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // bad/missing arguments are validation failures
  } catch (const ModelNotFoundError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
