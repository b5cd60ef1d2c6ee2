#include "kacov/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "kacov/error.hpp"
#include "kacov/rng.hpp"

namespace kacov {

namespace {

constexpr std::uint64_t kModelStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kKernelStream = 0xc2b2ae3d27d4eb4fULL;

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const toml::node* node, const std::string& msg) const {
    std::string where = source_;
    if (node != nullptr && node->source().begin.line > 0) {
      where += ":" + std::to_string(node->source().begin.line);
    }
    throw Error(ErrorCode::config_parse, where + ": " + msg);
  }

  const toml::table& table(const toml::table& parent, std::string_view key) const {
    const toml::node* n = parent.get(key);
    if (n == nullptr) fail(&parent, "missing table [" + std::string(key) + "]");
    if (!n->is_table()) fail(n, "'" + std::string(key) + "' must be a table");
    return *n->as_table();
  }

  double number(const toml::node* n, std::string_view what) const {
    if (n == nullptr) fail(nullptr, "missing '" + std::string(what) + "'");
    if (auto v = n->value<double>()) return *v;
    fail(n, "'" + std::string(what) + "' must be a number");
  }

  double number(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    if (n == nullptr) fail(&t, "missing key '" + std::string(key) + "'");
    return number(n, key);
  }

  double number_or(const toml::table& t, std::string_view key, double fallback) const {
    return t.contains(key) ? number(t, key) : fallback;
  }

  std::int64_t integer(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    if (n == nullptr) fail(&t, "missing key '" + std::string(key) + "'");
    if (!n->is_integer()) fail(n, "'" + std::string(key) + "' must be an integer");
    return n->as_integer()->get();
  }

  std::size_t count(const toml::table& t, std::string_view key, std::int64_t min) const {
    const std::int64_t v = integer(t, key);
    if (v < min) {
      fail(t.get(key), "'" + std::string(key) + "' must be >= " + std::to_string(min));
    }
    return static_cast<std::size_t>(v);
  }

  std::string string(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    if (n == nullptr) fail(&t, "missing key '" + std::string(key) + "'");
    if (!n->is_string()) fail(n, "'" + std::string(key) + "' must be a string");
    return n->as_string()->get();
  }

  Eigen::MatrixXd matrix(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    if (n == nullptr) fail(&t, "missing key '" + std::string(key) + "'");
    const toml::array* rows = n->as_array();
    if (rows == nullptr || rows->empty()) fail(n, "'" + std::string(key) + "' must be a nonempty array of rows");
    Eigen::MatrixXd m;
    for (std::size_t i = 0; i < rows->size(); ++i) {
      const toml::array* row = rows->get(i)->as_array();
      if (row == nullptr) fail(rows->get(i), "matrix rows must be arrays");
      if (i == 0) m.resize(static_cast<Eigen::Index>(rows->size()), static_cast<Eigen::Index>(row->size()));
      if (static_cast<Eigen::Index>(row->size()) != m.cols()) fail(row, "matrix rows differ in length");
      for (std::size_t j = 0; j < row->size(); ++j) {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number(row->get(j), key);
      }
    }
    return m;
  }

  PointList points(const toml::table& t, std::string_view key) const {
    const toml::node* n = t.get(key);
    const toml::array* arr = n ? n->as_array() : nullptr;
    if (arr == nullptr || arr->empty()) fail(n ? n : &t, "'" + std::string(key) + "' must be a nonempty array");
    PointList out;
    for (const toml::node& e : *arr) {
      if (const toml::array* v = e.as_array()) {
        std::vector<double> c;
        for (const toml::node& x : *v) c.push_back(number(&x, key));
        out.push_back(Point::at(std::move(c)));
      } else {
        out.push_back(Point::at(number(&e, key)));
      }
    }
    return out;
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
};

nlohmann::json to_json_value(const toml::node& node) {
  std::ostringstream os;
  if (const toml::table* t = node.as_table()) {
    os << toml::json_formatter{*t};
  } else if (const toml::array* a = node.as_array()) {
    os << toml::json_formatter{*a};
  } else {
    toml::table wrap;
    wrap.insert("v", node);
    os << toml::json_formatter{wrap};
    return nlohmann::json::parse(os.str()).at("v");
  }
  return nlohmann::json::parse(os.str());
}

ModelSpec parse_model(const Reader& r, const toml::table& t) {
  const std::string type = r.string(t, "type");
  const auto states = [&]() { return t.contains("states") ? r.points(t, "states") : PointList{}; };
  if (type == "two_state") {
    const double p = r.number(t, "p");
    if (!(p > 0.0 && p < 1.0)) r.fail(t.get("p"), "flip probability must lie in (0,1)");
    Eigen::MatrixXd tr(2, 2);
    tr << 1.0 - p, p, p, 1.0 - p;
    return MarkovSpec{tr, states()};
  }
  if (type == "markov") return MarkovSpec{r.matrix(t, "transition"), states()};
  if (type == "random_markov") return RandomMarkovSpec{r.count(t, "size", 2)};
  if (type == "ar1") {
    AR1Model m{r.number(t, "a"), r.number_or(t, "noise_std", 1.0)};
    if (!(std::abs(m.a) < 1.0)) r.fail(t.get("a"), "AR(1) coefficient must satisfy |a| < 1");
    if (!(m.noise_std > 0.0)) r.fail(t.get("noise_std"), "noise_std must be positive");
    return m;
  }
  if (type == "noisy_map") {
    NoisyMapModel m;
    const std::string map = t.contains("map") ? r.string(t, "map") : "logistic";
    if (map == "logistic") {
      m.map = MapKind::logistic;
    } else if (map == "doubling") {
      m.map = MapKind::doubling;
    } else {
      r.fail(t.get("map"), "unknown map '" + map + "'");
    }
    m.r = r.number_or(t, "r", 4.0);
    m.noise_std = r.number_or(t, "noise_std", 0.01);
    return m;
  }
  r.fail(t.get("type"), "unknown model type '" + type + "'");
}

KernelChoice parse_kernel(const Reader& r, const toml::table& t) {
  const std::string type = r.string(t, "type");
  try {
    if (type == "gaussian") return KernelSpec::gaussian(r.number(t, "sigma"));
    if (type == "linear") {
      if (t.contains("radius")) return KernelSpec::linear(r.number(t, "radius"));
      return KernelSpec::linear();
    }
    if (type == "table") return KernelSpec::table(r.matrix(t, "gram"));
    if (type == "identity") {
      const auto m = static_cast<Eigen::Index>(r.count(t, "size", 1));
      return KernelSpec::table(Eigen::MatrixXd::Identity(m, m));
    }
    if (type == "random_table") return RandomTableSpec{r.count(t, "size", 1)};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::config_parse) throw;
    r.fail(&t, e.what());
  }
  r.fail(t.get("type"), "unknown kernel type '" + type + "'");
}

PointKind model_domain(const ModelSpec& m) {
  if (const auto* mk = std::get_if<MarkovSpec>(&m)) {
    return mk->states.empty() ? PointKind::state : mk->states.front().kind();
  }
  if (std::holds_alternative<RandomMarkovSpec>(m)) return PointKind::state;
  return PointKind::coordinates;
}

PointKind kernel_domain(const KernelChoice& k) {
  if (const auto* spec = std::get_if<KernelSpec>(&k)) return spec->domain_kind();
  return PointKind::state;
}

}  // namespace

std::string_view to_string(ExperimentKind e) noexcept {
  switch (e) {
    case ExperimentKind::convergence: return "convergence";
    case ExperimentKind::clt: return "clt";
    case ExperimentKind::lil: return "lil";
    case ExperimentKind::pca: return "pca";
    case ExperimentKind::cme: return "cme";
    case ExperimentKind::koopman: return "koopman";
    case ExperimentKind::gamma: return "gamma";
    case ExperimentKind::bound: return "bound";
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_experiment(std::string_view name) {
  for (const auto e : {ExperimentKind::convergence, ExperimentKind::clt, ExperimentKind::lil,
                       ExperimentKind::pca, ExperimentKind::cme, ExperimentKind::koopman,
                       ExperimentKind::gamma, ExperimentKind::bound}) {
    if (to_string(e) == name) return e;
  }
  return std::nullopt;
}

double GammaSchedule::operator()(std::size_t n) const {
  return scale * std::pow(static_cast<double>(n), exponent);
}

ExperimentConfig parse_config(std::string_view text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    throw Error(ErrorCode::config_parse, source + ":" + std::to_string(e.source().begin.line) +
                                             ": " + std::string(e.description()));
  }
  const Reader r(source);
  ExperimentConfig cfg;
  cfg.echo = to_json_value(root);

  const std::string name = r.string(root, "experiment");
  const auto kind = parse_experiment(name);
  if (!kind) r.fail(root.get("experiment"), "unknown experiment '" + name + "'");
  cfg.experiment = *kind;

  cfg.model = parse_model(r, r.table(root, "model"));
  cfg.kernel = parse_kernel(r, r.table(root, "kernel"));
  if (model_domain(cfg.model) != kernel_domain(cfg.kernel)) {
    r.fail(root.get("kernel"), "kernel domain does not match the model's state space");
  }

  cfg.eta = root.contains("eta") ? r.count(root, "eta", 0) : 1;

  const toml::node* grid = root.get("n_grid");
  const toml::array* arr = grid ? grid->as_array() : nullptr;
  if (arr == nullptr || arr->empty()) r.fail(grid ? grid : &root, "'n_grid' must be a nonempty array");
  for (const toml::node& e : *arr) {
    if (!e.is_integer() || e.as_integer()->get() < 2) r.fail(&e, "n_grid entries must be integers >= 2");
    const auto n = static_cast<std::size_t>(e.as_integer()->get());
    if (!cfg.n_grid.empty() && n <= cfg.n_grid.back()) r.fail(&e, "n_grid must be strictly increasing");
    cfg.n_grid.push_back(n);
  }

  if (root.contains("seeds")) {
    const toml::table& s = r.table(root, "seeds");
    if (s.contains("base")) cfg.base_seed = r.count(s, "base", 0);
    if (s.contains("replicates")) cfg.replicates = r.count(s, "replicates", 1);
  }

  if (root.contains("gamma")) {
    const toml::table& g = r.table(root, "gamma");
    if (g.contains("value")) {
      cfg.gamma = GammaSchedule{r.number(g, "value"), 0.0};
    } else {
      cfg.gamma = GammaSchedule{r.number_or(g, "scale", 1.0), r.number_or(g, "exponent", -1.0 / 6.0)};
    }
    if (!(cfg.gamma.scale > 0.0)) r.fail(&g, "gamma must be positive");
  }

  if (root.contains("output")) cfg.output = r.string(root, "output");
  if (root.contains("params")) cfg.params = to_json_value(r.table(root, "params"));
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

MarkovChainModel random_markov_chain(std::size_t m, std::uint64_t seed) {
  CounterRng rng(seed);
  Eigen::MatrixXd p(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) p(i, j) = 0.05 + 0.95 * rng.uniform();
    p.row(i) /= p.row(i).sum();
  }
  return MarkovChainModel::create(std::move(p));
}

KernelSpec random_table_kernel(std::size_t m, std::uint64_t seed) {
  CounterRng rng(seed);
  const auto mm = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd a(mm, mm);
  for (Eigen::Index i = 0; i < mm; ++i) {
    for (Eigen::Index j = 0; j < mm; ++j) a(i, j) = rng.normal();
  }
  Eigen::MatrixXd g = a * a.transpose() / static_cast<double>(m);
  g = 0.5 * (g + g.transpose()).eval();
  return KernelSpec::table(std::move(g));
}

MarkovChainModel markov_model(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (const auto* mk = std::get_if<MarkovSpec>(&cfg.model)) {
    return MarkovChainModel::create(mk->transition, mk->states);
  }
  if (const auto* rm = std::get_if<RandomMarkovSpec>(&cfg.model)) {
    return random_markov_chain(rm->size, seed + kModelStream);
  }
  throw Error(ErrorCode::invalid_argument,
              std::string(to_string(cfg.experiment)) + " needs a finite Markov chain model");
}

KernelSpec kernel_for(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (const auto* k = std::get_if<KernelSpec>(&cfg.kernel)) return *k;
  const auto& rt = std::get<RandomTableSpec>(cfg.kernel);
  return random_table_kernel(rt.size, seed + kKernelStream);
}

}  // namespace kacov
