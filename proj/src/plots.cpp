#include "kacov/plots.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "kacov/error.hpp"
#include "kacov/io.hpp"

namespace kacov {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) {}

  void file(const std::string& name, const std::string& body) {
    const fs::path p = dir_ / name;
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error(ErrorCode::io, "cannot write " + p.string());
    os << body;
    written_.push_back(p);
  }

  std::vector<fs::path> done() { return std::move(written_); }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
};

std::string num(double x) { return format_double(x); }

void error_curve(Writer& w, const json& agg, const std::string& ylabel) {
  std::ostringstream dat;
  dat << "# n median q25 q75\n";
  for (const auto& p : agg.value("curve", json::array())) {
    dat << p.at("n").get<std::size_t>() << ' ' << num(p.at("median").get<double>()) << ' '
        << num(p.at("q25").get<double>()) << ' ' << num(p.at("q75").get<double>()) << '\n';
  }
  w.file("error_vs_n.dat", dat.str());
  w.file("error_vs_n.gp",
         "set logscale xy\n"
         "set xlabel 'n'\n"
         "set ylabel '" + ylabel + "'\n"
         "set key top right\n"
         "plot 'error_vs_n.dat' using 1:3:4 with filledcurves title 'interquartile', \\\n"
         "     '' using 1:2 with linespoints title 'median'\n");
}

void gamma_decay(Writer& w, const json& agg) {
  std::ostringstream dat;
  dat << "# j lambda_j jlogj\n";
  const json spec = agg.value("spectrum", json::array());
  for (std::size_t j = 0; j < spec.size(); ++j) {
    const double jj = static_cast<double>(j + 1);
    dat << j + 1 << ' ' << num(spec[j].get<double>()) << ' ' << num(jj * std::log(jj)) << '\n';
  }
  w.file("gamma_decay.dat", dat.str());
  w.file("gamma_decay.gp",
         "set logscale y\n"
         "set xlabel 'j log j'\n"
         "set ylabel 'lambda_j'\n"
         "plot 'gamma_decay.dat' using 3:2 with points title 'eigenvalues'\n");
}

void qq(Writer& w, const json& agg) {
  std::ostringstream dat;
  dat << "# theoretical empirical\n";
  for (const auto& p : agg.value("qq", json::array())) {
    dat << num(p.at(0).get<double>()) << ' ' << num(p.at(1).get<double>()) << '\n';
  }
  w.file("clt_qq.dat", dat.str());
  w.file("clt_qq.gp",
         "set xlabel 'standard normal quantile'\n"
         "set ylabel 'sample quantile'\n"
         "set key top left\n"
         "plot 'clt_qq.dat' using 1:2 with points title 'statistic', x with lines title 'y = x'\n");
}

}  // namespace

std::vector<fs::path> emit_plots(const fs::path& report, const fs::path& out_dir) {
  std::ifstream in(report);
  if (!in) throw Error(ErrorCode::io, "missing report " + report.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  json r;
  const std::string text = ss.str();
  if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
    try {
      r = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::io, "malformed report " + report.string() + ": " + e.what());
    }
  }
  if (!r.is_object()) r = json::object();

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + out_dir.string());

  Writer w(out_dir);
  const std::string exp = r.value("experiment", "");
  const json agg = r.value("aggregate", json::object());
  // A report with no recognizable experiment gets every figure, header-only.
  const bool all = exp.empty();
  if (all || exp == "convergence" || exp == "lil" || exp == "cme") {
    error_curve(w, agg, exp == "lil" ? "rescaled error" : "error");
  }
  if (all || exp == "gamma") gamma_decay(w, agg);
  if (all || exp == "clt") qq(w, agg);
  return w.done();
}

}  // namespace kacov
