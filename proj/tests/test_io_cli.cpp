#include <doctest.h>
#include <sys/wait.h>
#include <unistd.h>
#include <iomanip>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "grd/errors.hpp"
#include "grd/io.hpp"
#include "grd/synth.hpp"

using namespace grd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("grd_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

struct RunResult {
  int exit_code = 0;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

RunResult run_tool(const std::string& arguments, const TempDir& dir) {
  const fs::path out_file = dir.path / "stdout.txt";
  const fs::path err_file = dir.path / "stderr.txt";
  const std::string command = std::string(GRDTOOL_PATH) + " " + arguments +
                              " > " + out_file.string() + " 2> " +
                              err_file.string();
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

GrdGrid sample_grid() {
  synth::SynthParams params;
  params.seed = 11;
  params.axes = desk_axes();
  params.count = 1;
  return synth::generate(params).front();
}

}  // namespace

TEST_SUITE("io_cli") {

TEST_CASE("grid json round-trip preserves values and metadata") {
  const GrdGrid grid = sample_grid();
  const GrdGrid back = io::grid_from_json(io::grid_to_json(grid));
  CHECK(back.axes.same_labels(grid.axes));
  CHECK((back.values - grid.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.metadata.at("content_id") == grid.metadata.at("content_id"));
}

TEST_CASE("grid json rejects malformed input") {
  CHECK_THROWS_AS(io::grid_from_json("not json"), Error);
  CHECK_THROWS_AS(io::grid_from_json("{}"), Error);
  const std::string missing_row =
      R"({"bitrates_kbps":[100,200],"resolutions_diag":[400,800],
          "values":[[1,2]]})";
  CHECK_THROWS_AS(io::grid_from_json(missing_row), Error);
}

TEST_CASE("basis json round-trip") {
  synth::SynthParams params;
  params.seed = 3;
  params.axes = desk_axes();
  params.count = 8;
  const auto corpus = synth::generate(params);
  const auto basis = basis::pca_train(corpus, 4);
  const auto back = io::basis_from_json(io::basis_to_json(basis));
  CHECK(back.kind == basis.kind);
  CHECK(back.training_count == basis.training_count);
  CHECK((back.mean - basis.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.components - basis.components).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.eigenvalues - basis.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.total_variance == basis.total_variance);
}

TEST_CASE("rd basis json round-trip") {
  synth::SynthParams params;
  params.seed = 4;
  params.axes = desk_axes();
  params.count = 6;
  const auto rd = codec::train_rd_basis(synth::generate(params), 3);
  const auto back = io::rd_basis_from_json(io::rd_basis_to_json(rd));
  CHECK(back.bitrates_kbps == rd.bitrates_kbps);
  CHECK((back.mean - rd.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.components - rd.components).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample csv demands exact axis labels") {
  TempDir dir;
  const AxisSpec axes = desk_axes();
  const fs::path csv = dir.path / "samples.csv";
  {
    std::ofstream out(csv);
    out << "bitrate_kbps,resolution_diag,quality\n";
    out << "1000,400,50\n3000,2203,80\n";
  }
  const SampleSet samples = io::load_samples_csv(csv, axes);
  REQUIRE(samples.entries.size() == 2);
  CHECK(samples.entries[0].bitrate_index == 0);
  CHECK(samples.entries[0].resolution_index == 0);
  CHECK(samples.entries[1].bitrate_index == 2);
  CHECK(samples.entries[1].resolution_index == 5);

  {
    std::ofstream out(csv);
    out << "bitrate_kbps,resolution_diag,quality\n";
    out << "1050,400,50\n";  // off-lattice bitrate
  }
  CHECK_THROWS_AS(io::load_samples_csv(csv, axes), Error);

  {
    std::ofstream out(csv);
    out << "wrong,header,here\n";
  }
  CHECK_THROWS_AS(io::load_samples_csv(csv, axes), Error);
}

TEST_CASE("sample csv round-trip") {
  TempDir dir;
  const GrdGrid grid = sample_grid();
  const SampleSet samples = samples_from_grid(grid, {0, 7, 35, 53});
  const fs::path csv = dir.path / "s.csv";
  io::save_samples_csv(samples, csv);
  const SampleSet back = io::load_samples_csv(csv, grid.axes);
  REQUIRE(back.entries.size() == samples.entries.size());
  for (std::size_t i = 0; i < back.entries.size(); ++i) {
    CHECK(back.entries[i].bitrate_index == samples.entries[i].bitrate_index);
    CHECK(back.entries[i].resolution_index ==
          samples.entries[i].resolution_index);
    CHECK(back.entries[i].quality ==
          doctest::Approx(samples.entries[i].quality).epsilon(1e-15));
  }
}

TEST_CASE("pairs csv groups contents and codecs") {
  TempDir dir;
  const fs::path csv = dir.path / "pairs.csv";
  {
    std::ofstream out(csv);
    out << "content_id,codec,bitrate_kbps,quality\n";
    out << "clip1,x264,100,20\nclip1,x264,300,45\n";
    out << "clip1,vp9,110,25\nclip1,vp9,290,48\n";
    out << "clip2,x264,100,30\nclip2,vp9,100,35\n";
  }
  const auto pairs = io::load_pairs_csv(csv);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].content_id == "clip1");
  CHECK(pairs[0].codec_a.size() == 2);
  CHECK(pairs[0].codec_b.size() == 2);
  CHECK(pairs[1].codec_a.size() == 1);

  // Explicit codec selection swaps the roles.
  const auto swapped = io::load_pairs_csv(csv, "vp9", "x264");
  CHECK(swapped[0].codec_a[0].quality == 25);

  {
    std::ofstream out(csv);
    out << "content_id,codec,bitrate_kbps,quality\n";
    out << "clip1,x264,100,20\nclip1,vp9,100,25\nclip1,av1,100,30\n";
  }
  CHECK_THROWS_AS(io::load_pairs_csv(csv), Error);  // three labels
}

TEST_CASE("atomic writes leave no partial artifact behind") {
  TempDir dir;
  const fs::path target = dir.path / "artifact.json";
  io::write_text_atomic(target, "{}\n");
  CHECK(slurp(target) == "{}\n");
  CHECK_FALSE(fs::exists(dir.path / "artifact.json.tmp"));
}

TEST_CASE("cli pipeline: synth, train, order, reconstruct") {
  TempDir dir;
  const std::string data = (dir.path / "data").string();

  auto synth = run_tool("synth --seed 1 --count 6 --axes desk --output " +
                            data + " --train-frac 1.0",
                        dir);
  REQUIRE(synth.exit_code == 0);

  auto train = run_tool("train --manifest " + data +
                            "/manifest.json --family eigen --n 5 --output " +
                            data + "/basis.json",
                        dir);
  REQUIRE(train.exit_code == 0);
  CHECK(train.out.find("cumulative energy") != std::string::npos);

  auto order = run_tool("sample-order --manifest " + data +
                            "/manifest.json --count 54 --output " + data +
                            "/order.json",
                        dir);
  REQUIRE(order.exit_code == 0);

  // Sample a training surface at every cell and reconstruct it.
  const GrdGrid truth = io::load_grid(data + "/grid_0000.json");
  std::vector<int> cells(truth.axes.cell_count());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i] = static_cast<int>(i);
  }
  io::save_samples_csv(samples_from_grid(truth, cells),
                       dir.path / "full.csv");
  auto recon = run_tool("reconstruct --basis " + data +
                            "/basis.json --samples " +
                            (dir.path / "full.csv").string() +
                            " --n match --output " + data + "/recon.json",
                        dir);
  REQUIRE(recon.exit_code == 0);
  const GrdGrid estimate = io::load_grid(data + "/recon.json");
  CHECK(rmse(estimate, truth) < 1e-6);

  // Diagnostics were written alongside.
  CHECK(fs::exists(data + "/recon.json.diag.json"));
}

TEST_CASE("cli eval over a degenerate split reports zero error") {
  TempDir dir;
  const std::string data = (dir.path / "data").string();
  REQUIRE(run_tool("synth --seed 2 --count 5 --axes desk --output " + data,
                   dir)
              .exit_code == 0);

  // Test set equal to the training set: tag everything both ways via a
  // hand-written manifest.
  io::Dataset dataset = io::load_manifest(data + "/manifest.json");
  io::Dataset doubled;
  doubled.directory = dataset.directory;
  for (const auto& e : dataset.entries) {
    doubled.entries.push_back({e.file, "train"});
    doubled.entries.push_back({e.file, "test"});
  }
  io::save_manifest(doubled, data + "/degenerate.json");

  auto eval = run_tool("eval --manifest " + data +
                           "/degenerate.json --mode n-sweep --n-values 4 "
                           "--output " +
                           data + "/table.json",
                       dir);
  REQUIRE(eval.exit_code == 0);
  // Rank of 5 centered training grids is 4, so the n = 4 row is exact.
  const auto table = slurp(data + "/table.json");
  const auto key = table.find("\"mean_rmse\": ");
  REQUIRE(key != std::string::npos);
  const double value = std::stod(table.substr(key + 13));
  CHECK(value < 1e-6);
}

TEST_CASE("cli rejects unknown flags without writing anything") {
  TempDir dir;
  auto result = run_tool("synth --count 2 --bogus-flag 3 --output " +
                             (dir.path / "x").string(),
                         dir);
  CHECK(result.exit_code == 1);
  CHECK(result.err.find("Usage") != std::string::npos);
  CHECK_FALSE(fs::exists(dir.path / "x"));
}

TEST_CASE("cli reports structured errors with distinct codes") {
  TempDir dir;
  auto io_error = run_tool(
      "train --manifest /nonexistent/manifest.json --output " +
          (dir.path / "b.json").string(),
      dir);
  CHECK(io_error.exit_code == 2);
  CHECK(io_error.err.find("\"error\"") != std::string::npos);

  const fs::path bad = dir.path / "bad.json";
  {
    std::ofstream out(bad);
    out << "{ this is not json";
  }
  auto parse_error = run_tool("train --manifest " + bad.string() +
                                  " --output " + (dir.path / "b.json").string(),
                              dir);
  CHECK(parse_error.exit_code == 3);
}

TEST_CASE("cli artifacts are byte-identical across reruns") {
  TempDir dir;
  const std::string a = (dir.path / "a").string();
  const std::string b = (dir.path / "b").string();
  REQUIRE(run_tool("synth --seed 9 --count 4 --axes desk --output " + a, dir)
              .exit_code == 0);
  REQUIRE(run_tool("synth --seed 9 --count 4 --axes desk --output " + b, dir)
              .exit_code == 0);
  for (int i = 0; i < 4; ++i) {
    std::ostringstream name;
    name << "grid_" << std::setw(4) << std::setfill('0') << i << ".json";
    CHECK(slurp(fs::path(a) / name.str()) == slurp(fs::path(b) / name.str()));
  }
  CHECK(slurp(fs::path(a) / "manifest.json") ==
        slurp(fs::path(b) / "manifest.json"));
}

TEST_CASE("cli sample-order variants and train rerun determinism") {
  TempDir dir;
  const std::string data = (dir.path / "data").string();
  REQUIRE(run_tool("synth --seed 3 --count 8 --axes desk --output " + data +
                       " --train-frac 1.0",
                   dir)
              .exit_code == 0);
  REQUIRE(run_tool("train --manifest " + data +
                       "/manifest.json --n 4 --output " + data + "/b1.json",
                   dir)
              .exit_code == 0);
  REQUIRE(run_tool("train --manifest " + data +
                       "/manifest.json --n 4 --output " + data + "/b2.json",
                   dir)
              .exit_code == 0);
  CHECK(slurp(data + "/b1.json") == slurp(data + "/b2.json"));

  // Order from the basis file's low-rank covariance.
  REQUIRE(run_tool("sample-order --basis " + data +
                       "/b1.json --count 10 --output " + data +
                       "/order_basis.json",
                   dir)
              .exit_code == 0);
  // Order from the manifest's empirical covariance.
  REQUIRE(run_tool("sample-order --manifest " + data +
                       "/manifest.json --count 10 --output " + data +
                       "/order_data.json",
                   dir)
              .exit_code == 0);
  // Uniform log-bitrate baseline.
  auto uniform = run_tool("sample-order --manifest " + data +
                              "/manifest.json --uniform --count 4 --output " +
                              data + "/order_uniform.json",
                          dir);
  REQUIRE(uniform.exit_code == 0);
  const std::string text = slurp(data + "/order_uniform.json");
  CHECK(text.find("1000.0") != std::string::npos);
  CHECK(text.find("9000.0") != std::string::npos);
}

TEST_CASE("cli eval with repeated random splits") {
  TempDir dir;
  const std::string data = (dir.path / "data").string();
  REQUIRE(run_tool("synth --seed 4 --count 12 --axes desk --output " + data,
                   dir)
              .exit_code == 0);
  auto eval = run_tool("eval --manifest " + data +
                           "/manifest.json --mode s-sweep --s-values 1,4 "
                           "--splits 3 --train-frac 0.75 --seed 5 "
                           "--format csv --output " +
                           data + "/sweep.csv",
                       dir);
  REQUIRE(eval.exit_code == 0);
  const std::string csv = slurp(data + "/sweep.csv");
  CHECK(csv.find("median_mean_rmse") != std::string::npos);
  // Header plus one row per sample budget.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("cli compare with the eigen-model fitter end to end") {
  TempDir dir;
  const std::string data = (dir.path / "data").string();
  REQUIRE(run_tool("synth --seed 6 --count 10 --output " + data +
                       " --train-frac 1.0",
                   dir)
              .exit_code == 0);
  REQUIRE(run_tool("train --manifest " + data +
                       "/manifest.json --rd1d --n 8 --output " + data +
                       "/rd.json",
                   dir)
              .exit_code == 0);

  const fs::path csv = dir.path / "pairs.csv";
  {
    std::ofstream out(csv);
    out << "content_id,codec,bitrate_kbps,quality\n";
    for (const auto& [x, z] : std::vector<std::pair<double, double>>{
             {100, 20}, {300, 45}, {900, 62}, {2800, 71}}) {
      out << "clip,x264," << x << ',' << z << '\n';
      out << "clip,vp9," << x << ',' << z + 3.0 << '\n';
    }
  }
  auto result = run_tool("compare --samples " + csv.string() +
                             " --fitter egrd --dr-mode exact --rd-basis " +
                             data + "/rd.json --output " +
                             (dir.path / "report.json").string(),
                         dir);
  REQUIRE(result.exit_code == 0);
  CHECK(slurp(dir.path / "report.json").find("\"dr_mode\": \"exact\"") !=
        std::string::npos);

  // The egrd fitter demands its basis file.
  auto missing = run_tool("compare --samples " + csv.string() +
                              " --fitter egrd --output " +
                              (dir.path / "r2.json").string(),
                          dir);
  CHECK(missing.exit_code == 4);
}

TEST_CASE("cli compare writes report and curves") {
  TempDir dir;
  const fs::path csv = dir.path / "pairs.csv";
  {
    std::ofstream out(csv);
    out << "content_id,codec,bitrate_kbps,quality\n";
    for (const auto& [x, z] : std::vector<std::pair<double, double>>{
             {100, 20}, {300, 45}, {900, 62}, {2800, 71}}) {
      out << "clip,x264," << x << ',' << z << '\n';
    }
    for (const auto& [x, z] : std::vector<std::pair<double, double>>{
             {110, 24}, {320, 50}, {880, 66}, {2750, 74}}) {
      out << "clip,vp9," << x << ',' << z << '\n';
    }
  }
  auto result = run_tool("compare --samples " + csv.string() +
                             " --fitter pchip --dr-mode log --output " +
                             (dir.path / "report.json").string(),
                         dir);
  REQUIRE(result.exit_code == 0);
  const std::string report = slurp(dir.path / "report.json");
  CHECK(report.find("mean_delta_q") != std::string::npos);
  CHECK(fs::exists(dir.path / "report_curves" / "clip.csv"));
}

}  // TEST_SUITE
