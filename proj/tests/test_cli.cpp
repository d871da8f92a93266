#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#include "mesim/config.hpp"
#include "mesim/report_io.hpp"

namespace fs = std::filesystem;
using namespace mesim;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Sandbox {
 public:
  Sandbox() {
    dir_ = fs::temp_directory_path() / ("mesim_cli_" + std::to_string(::getpid()) + "_" + std::to_string(count_++));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Sandbox() { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  Result run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string("\"") + MESIM_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
  }

 private:
  static inline int count_ = 0;
  fs::path dir_;
};

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("simulate writes a complete run directory") {
  Sandbox box;
  box.write("fig3b.json", R"({"protocol": "staircase"})");
  const Result r = box.run("simulate " + q(box.path("fig3b.json")) + " --out " + q(box.path("run")));
  REQUIRE(r.code == 0);
  for (const char* f : {"report.json", "trace.csv", "spectrum.csv", "plotdata/fig3b.csv"})
    CHECK(fs::exists(box.path("run") / f));
  const Json j = Json::parse(slurp(box.path("run/report.json")));
  CHECK(j["payload"]["lod_dc"]["lod_mean_t_per_rthz"].get<double>() > 0.0);
}

TEST_CASE("same config and seed give byte-identical reports") {
  Sandbox box;
  box.write("s.json", R"({"protocol": "staircase", "seed": 5})");
  REQUIRE(box.run("simulate " + q(box.path("s.json")) + " --out " + q(box.path("a"))).code == 0);
  REQUIRE(box.run("simulate " + q(box.path("s.json")) + " --out " + q(box.path("b"))).code == 0);
  CHECK(slurp(box.path("a/report.json")) == slurp(box.path("b/report.json")));
  CHECK(slurp(box.path("a/trace.csv")) == slurp(box.path("b/trace.csv")));
  REQUIRE(box.run("simulate " + q(box.path("s.json")) + " --seed 6 --out " + q(box.path("c"))).code == 0);
  CHECK(slurp(box.path("a/report.json")) != slurp(box.path("c/report.json")));
}

TEST_CASE("bias outside the curve span is a config error naming the span") {
  Sandbox box;
  box.write("bad.json", R"({"staircase": {"bias_ut": 400}})");
  const Result r = box.run("simulate " + q(box.path("bad.json")) + " --out " + q(box.path("run")));
  CHECK(r.code == 2);
  CHECK(r.err.find("span") != std::string::npos);
  CHECK(r.err.find("staircase.bias_ut") != std::string::npos);
  CHECK_FALSE(fs::exists(box.path("run/report.json")));
}

TEST_CASE("unknown key is a config error") {
  Sandbox box;
  box.write("bad.json", R"({"chain": {"gain_db": 20}})");
  const Result r = box.run("simulate " + q(box.path("bad.json")));
  CHECK(r.code == 2);
  CHECK(r.err.find("chain.gain_db") != std::string::npos);
}

TEST_CASE("malformed JSON and bad flags are config errors") {
  Sandbox box;
  box.write("bad.json", "{\"protocol\": ");
  CHECK(box.run("simulate " + q(box.path("bad.json"))).code == 2);
  CHECK(box.run("frobnicate").code == 2);
  CHECK(box.run("analyze x.csv --kind bogus").code == 2);
}

TEST_CASE("empty trace file reports line 1") {
  Sandbox box;
  box.write("empty.csv", "");
  const Result r =
      box.run("analyze " + q(box.path("empty.csv")) + " --kind staircase --sensitivity-v-per-t 171000");
  CHECK(r.code == 3);
  CHECK(r.err.find("line 1") != std::string::npos);
}

TEST_CASE("malformed row reports its line") {
  Sandbox box;
  box.write("bad.csv", "t_s,v_volt\n0,1\n0.001,abc\n");
  const Result r = box.run("analyze " + q(box.path("bad.csv")) + " --kind staircase --sensitivity-v-per-t 1");
  CHECK(r.code == 3);
  CHECK(r.err.find("line 3") != std::string::npos);
}

TEST_CASE("analyze staircase on a lab-style trace") {
  // Ten 5 s plateaus at 1 kHz whose settled part has sigma = 7.5 uV.
  Sandbox box;
  std::ostringstream csv;
  csv << "t_s,v_volt\n";
  const double sigma = 7.5e-6;
  for (int p = 0; p < 10; ++p)
    for (int k = 0; k < 5000; ++k) {
      const double v = 1e-3 * p + (k % 2 ? sigma : -sigma);
      csv << format_double((p * 5000 + k) / 1000.0) << ',' << format_double(v) << '\n';
    }
  box.write("lab.csv", csv.str());
  const Result r = box.run("analyze " + q(box.path("lab.csv")) + " --kind staircase --sensitivity-v-per-t 171000");
  REQUIRE(r.code == 0);
  const Json j = Json::parse(r.out);
  CHECK(j["included"].get<int>() == 10);
  CHECK(j["lod_mean_t_per_rthz"].get<double>() == doctest::Approx(15.6e-12).epsilon(0.01));
}

TEST_CASE("analyze reproduces the simulate-time staircase report") {
  Sandbox box;
  box.write("st.json", R"({"protocol": "staircase", "seed": 3})");
  REQUIRE(box.run("simulate " + q(box.path("st.json")) + " --out " + q(box.path("run"))).code == 0);
  const Json report = Json::parse(slurp(box.path("run/report.json")));
  const Json& sim = report["payload"]["lod_dc"];
  const Result r = box.run("analyze " + q(box.path("run/trace.csv")) + " --kind staircase --sensitivity-v-per-t " +
                           format_double(sim["sensitivity_v_per_t"].get<double>()));
  REQUIRE(r.code == 0);
  const Json ana = Json::parse(r.out);
  REQUIRE(ana["plateaus"].size() == sim["plateaus"].size());
  const auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); };
  CHECK(close(ana["lod_mean_t_per_rthz"].get<double>(), sim["lod_mean_t_per_rthz"].get<double>()));
  CHECK(close(ana["lod_std_t_per_rthz"].get<double>(), sim["lod_std_t_per_rthz"].get<double>()));
  for (std::size_t i = 0; i < sim["plateaus"].size(); ++i) {
    CHECK(close(ana["plateaus"][i]["sigma_v"].get<double>(), sim["plateaus"][i]["sigma_v"].get<double>()));
    CHECK(close(ana["plateaus"][i]["mean_v"].get<double>(), sim["plateaus"][i]["mean_v"].get<double>()));
    CHECK(ana["plateaus"][i]["samples"] == sim["plateaus"][i]["samples"]);
  }
}

TEST_CASE("analyze sweep finds the carrier minima of a simulated sweep") {
  Sandbox box;
  box.write("cs.json", R"({"protocol": "carrier_suppression", "carrier_suppression": {"duration_s": 5}})");
  REQUIRE(box.run("simulate " + q(box.path("cs.json")) + " --out " + q(box.path("run"))).code == 0);
  const Result r = box.run("analyze " + q(box.path("run/plotdata/sfig1a.csv")) + " --kind sweep --reference-ut 0");
  REQUIRE(r.code == 0);
  CHECK(Json::parse(r.out)["carrier_minima"]["minima"].size() == 3);
}

TEST_CASE("report compares presets and tolerates missing runs") {
  Sandbox box;
  box.write("ml.json", R"({"protocol": "bias_sweep"})");
  box.write("sl.json", R"({"protocol": "bias_sweep", "sensor": {"preset": "sl-paper"}})");
  REQUIRE(box.run("simulate " + q(box.path("ml.json")) + " " + q(box.path("sl.json")) + " --jobs 2 --out " +
                  q(box.path("runs")))
              .code == 0);
  const Result r = box.run("report " + q(box.path("runs/ml")) + " " + q(box.path("runs/sl")) + " " +
                           q(box.path("runs/none")) + " --compare");
  CHECK(r.code == 0);
  CHECK(r.out.find("missing") != std::string::npos);
  CHECK(r.out.find("3.9") != std::string::npos);  // 169 / 42.7

  const Result single = box.run("report " + q(box.path("runs/ml")));
  CHECK(single.code == 0);
  CHECK(std::count(single.out.begin(), single.out.end(), '\n') == 2);

  CHECK(box.run("report " + q(box.path("runs/none"))).code == 3);
}

TEST_CASE("MESIM_OUT_ROOT sets the default output root") {
  Sandbox box;
  box.write("st.json", R"({"staircase": {"dwell_s": 1}})");
  const std::string cmd = "MESIM_OUT_ROOT=" + q(box.path("root")) + " ";
  const fs::path out = box.path("stdout.txt");
  REQUIRE(std::system((cmd + "\"" + MESIM_CLI + "\" simulate " + q(box.path("st.json")) + " >" + q(out)).c_str()) ==
          0);
  CHECK(fs::exists(box.path("root/st/report.json")));
}

TEST_CASE("config-template output is accepted by simulate") {
  Sandbox box;
  const Result t = box.run("config-template --protocol frequency_series --preset sl-paper");
  REQUIRE(t.code == 0);
  box.write("t.json", t.out);
  CHECK(box.run("simulate " + q(box.path("t.json")) + " --out " + q(box.path("run"))).code == 0);
  CHECK(box.run("config-reference").out.find("frequency_series.tones_hz") != std::string::npos);
}

}
