#include "gpsmem/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gpsmem/serialize.hpp"

namespace gpsmem {

namespace fs = std::filesystem;

namespace {

constexpr double kInfSentinel = 1e300;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config field '" + field + "': " + why);
}

long parse_int(const std::string& field, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) bad_field(field, "not an integer: '" + v + "'");
    return x;
  } catch (const std::invalid_argument&) {
    bad_field(field, "not an integer: '" + v + "'");
  } catch (const std::out_of_range&) {
    bad_field(field, "out of range: '" + v + "'");
  }
}

double parse_double(const std::string& field, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) bad_field(field, "not a number: '" + v + "'");
    return x;
  } catch (const std::invalid_argument&) {
    bad_field(field, "not a number: '" + v + "'");
  } catch (const std::out_of_range&) {
    bad_field(field, "out of range: '" + v + "'");
  }
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) bad_field(section + ".?", "empty key");
    kv[section.empty() ? key : section + "." + key] = value;
  }
  return kv;
}

RunConfig config_from_text(const std::string& text) {
  RunConfig cfg;
  cfg.raw_text = text;
  for (const auto& [key, value] : parse_config_text(text)) {
    if (key == "experiment.task") {
      cfg.task = value;
    } else if (key == "experiment.method") {
      cfg.method = value;
    } else if (key == "experiment.seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "experiment.iters") {
      cfg.iters = static_cast<int>(parse_int(key, value));
    } else if (key == "experiment.out") {
      cfg.out_dir = value;
    } else if (key == "memory.d_h") {
      cfg.d_h = static_cast<int>(parse_int(key, value));
    } else if (key == "memory.sigma2") {
      cfg.sigma2 = parse_double(key, value);
    } else if (key == "gps.num_samples") {
      cfg.num_samples = static_cast<int>(parse_int(key, value));
    } else if (key == "rwr.num_samples") {
      cfg.rwr_samples = static_cast<int>(parse_int(key, value));
    } else {
      bad_field(key, "unknown key");
    }
  }
  if (cfg.task != "nav" && cfg.task != "pegsort")
    bad_field("experiment.task", "must be nav or pegsort, got '" + cfg.task +
                                     "'");
  if (cfg.method != "memgps" && cfg.method != "feedforward" &&
      cfg.method != "rwr")
    bad_field("experiment.method",
              "must be memgps, feedforward, or rwr, got '" + cfg.method + "'");
  if (cfg.iters < 1) bad_field("experiment.iters", "must be >= 1");
  if (cfg.num_samples < 1) bad_field("gps.num_samples", "must be >= 1");
  if (cfg.rwr_samples < 2) bad_field("rwr.num_samples", "must be >= 2");
  if (cfg.d_h && *cfg.d_h < 0) bad_field("memory.d_h", "must be >= 0");
  if (cfg.sigma2 <= 0.0) bad_field("memory.sigma2", "must be > 0");
  return cfg;
}

RunConfig config_from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return config_from_text(ss.str());
}

int resolved_memory_dim(const RunConfig& cfg) {
  if (cfg.d_h) return *cfg.d_h;
  return cfg.method == "feedforward" ? 0 : 4;
}

GpsOptions gps_options_for(const RunConfig& cfg) {
  GpsOptions opt;
  opt.seed = cfg.seed;
  opt.num_samples = cfg.num_samples;
  opt.outer_iters = cfg.iters;
  opt.hidden = (cfg.task == "pegsort") ? std::vector<int>{40, 40}
                                       : std::vector<int>{10};
  // tuned training setup shared by both tasks
  opt.memory_reg = 1.0;
  opt.train.steps = 6000;
  opt.train.learn_rate = 2e-3;
  opt.eps_tolerance = 0.05;
  return opt;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
  os << "iter,samples,condition,distance\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.9f", r.distance);
    os << r.iter << ',' << r.samples << ',' << r.condition << ',' << buf
       << '\n';
  }
}

void write_metrics_svg(std::ostream& os, const std::vector<MetricRow>& rows,
                       int num_conditions) {
  const int W = 640, H = 400, ML = 60, MR = 20, MT = 20, MB = 45;
  double max_x = 1.0, max_y = 1e-9;
  for (const auto& r : rows) {
    max_x = std::max(max_x, static_cast<double>(r.samples));
    max_y = std::max(max_y, r.distance);
  }
  max_y *= 1.05;
  auto px = [&](double samples) {
    return ML + (W - ML - MR) * samples / max_x;
  };
  auto py = [&](double dist) { return H - MB - (H - MT - MB) * dist / max_y; };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
     << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR
     << "\" y2=\"" << H - MB << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML
     << "\" y2=\"" << H - MB << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (ML + W - MR) / 2 << "\" y=\"" << H - 10
     << "\" text-anchor=\"middle\" font-size=\"13\">samples</text>\n";
  os << "<text x=\"15\" y=\"" << (MT + H - MB) / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 15 "
     << (MT + H - MB) / 2 << ")\">distance</text>\n";
  os << "<text x=\"" << ML << "\" y=\"" << H - MB + 15
     << "\" font-size=\"11\">0</text>\n";
  os << "<text x=\"" << W - MR << "\" y=\"" << H - MB + 15
     << "\" text-anchor=\"end\" font-size=\"11\">" << static_cast<int>(max_x)
     << "</text>\n";
  os << "<text x=\"" << ML - 5 << "\" y=\"" << MT + 5
     << "\" text-anchor=\"end\" font-size=\"11\">" << std::setprecision(3)
     << max_y << "</text>\n";

  for (int c = 0; c < num_conditions; ++c) {
    os << "<polyline fill=\"none\" stroke=\"" << palette[c % 8]
       << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& r : rows)
      if (r.condition == c) os << px(r.samples) << ',' << py(r.distance) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << W - MR - 5 << "\" y=\"" << MT + 15 + 15 * c
       << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << palette[c % 8]
       << "\">condition " << c << "</text>\n";
  }
  os << "</svg>\n";
}

namespace {

void save_policy(std::ostream& os, const MemoryPolicy& p) {
  write_scalar(os, "num_layers", static_cast<double>(p.layers().size()));
  for (const auto& l : p.layers()) {
    write_matrix(os, "W", l.W);
    write_vector(os, "b", l.b);
  }
  write_matrix(os, "action_cov", p.action_cov());
  write_vector(os, "norm_shift", p.norm_shift());
  write_vector(os, "norm_scale", p.norm_scale());
}

MemoryPolicy load_policy(std::istream& is) {
  MemoryPolicy p;
  const int n = static_cast<int>(read_scalar(is, "num_layers"));
  for (int l = 0; l < n; ++l) {
    MemoryPolicy::Layer layer;
    layer.W = read_matrix(is, "W");
    layer.b = read_vector(is, "b");
    p.layers().push_back(std::move(layer));
  }
  p.set_action_cov(read_matrix(is, "action_cov"));
  const VectorXd shift = read_vector(is, "norm_shift");
  const VectorXd scale = read_vector(is, "norm_scale");
  if (shift.size() > 0) p.set_normalization(shift, scale);
  return p;
}

void save_checkpoint_struct(std::ostream& os, const Checkpoint& ck) {
  os << kCheckpointHeader << '\n';
  os << "task " << ck.cfg.task << '\n';
  os << "method " << ck.cfg.method << '\n';
  os << "seed " << ck.cfg.seed << '\n';
  write_scalar(os, "iters", ck.cfg.iters);
  write_scalar(os, "num_samples", ck.cfg.num_samples);
  write_scalar(os, "rwr_samples", ck.cfg.rwr_samples);
  write_scalar(os, "d_h", ck.aspec.d_h);
  write_scalar(os, "sigma2", ck.aspec.sigma2);
  write_scalar(os, "eps", ck.eps);
  write_scalar(os, "prev_cost",
               std::isfinite(ck.prev_cost) ? ck.prev_cost : kInfSentinel);
  write_scalar(os, "iter", ck.iter);
  write_scalar(os, "norm_frozen", ck.norm_frozen ? 1.0 : 0.0);
  write_vector(os, "nu", Eigen::Map<const VectorXd>(
                             ck.nu.data(), static_cast<Eigen::Index>(ck.nu.size())));
  save_policy(os, ck.policy);
  write_scalar(os, "num_conditions", static_cast<double>(ck.conds.size()));
  for (const auto& c : ck.conds) {
    write_scalar(os, "T", c.ctrl.horizon());
    for (int t = 0; t < c.ctrl.horizon(); ++t) {
      write_matrix(os, "K", c.ctrl.K[t]);
      write_vector(os, "k", c.ctrl.k[t]);
      write_matrix(os, "C", c.ctrl.C[t]);
      write_vector(os, "lambda", c.lambda[t]);
    }
  }
}

}  // namespace

void save_checkpoint(std::ostream& os, const RunConfig& cfg,
                     const GpsRun& run) {
  Checkpoint ck;
  ck.cfg = cfg;
  ck.aspec = run.aspec();
  ck.policy = run.policy();
  ck.conds = run.conditions();
  ck.nu = run.nu();
  ck.eps = run.eps();
  ck.iter = run.iteration();
  ck.prev_cost = run.prev_cost();
  ck.norm_frozen = run.normalization_frozen();
  for (auto& c : ck.conds) {  // samples and dynamics are not persisted
    c.samples.clear();
    c.dyn = LinearDynamics();
  }
  save_checkpoint_struct(os, ck);
}

Checkpoint load_checkpoint(std::istream& is) {
  std::string word, version;
  if (!(is >> word >> version) || word + " " + version != kCheckpointHeader)
    throw std::runtime_error(
        "checkpoint: version mismatch in header (expected '" +
        std::string(kCheckpointHeader) + "')");
  Checkpoint ck;
  std::string tag;
  is >> tag >> ck.cfg.task;
  if (tag != "task") throw std::runtime_error("checkpoint: missing task");
  is >> tag >> ck.cfg.method;
  if (tag != "method") throw std::runtime_error("checkpoint: missing method");
  is >> tag >> ck.cfg.seed;
  if (tag != "seed") throw std::runtime_error("checkpoint: missing seed");
  ck.cfg.iters = static_cast<int>(read_scalar(is, "iters"));
  ck.cfg.num_samples = static_cast<int>(read_scalar(is, "num_samples"));
  ck.cfg.rwr_samples = static_cast<int>(read_scalar(is, "rwr_samples"));
  ck.cfg.d_h = static_cast<int>(read_scalar(is, "d_h"));
  ck.cfg.sigma2 = read_scalar(is, "sigma2");
  ck.eps = read_scalar(is, "eps");
  ck.prev_cost = read_scalar(is, "prev_cost");
  if (ck.prev_cost >= kInfSentinel)
    ck.prev_cost = std::numeric_limits<double>::infinity();
  ck.iter = static_cast<int>(read_scalar(is, "iter"));
  ck.norm_frozen = read_scalar(is, "norm_frozen") != 0.0;
  const VectorXd nu = read_vector(is, "nu");
  ck.nu.assign(nu.data(), nu.data() + nu.size());
  ck.policy = load_policy(is);
  const int nc = static_cast<int>(read_scalar(is, "num_conditions"));
  ck.conds.resize(nc);
  for (auto& c : ck.conds) {
    const int T = static_cast<int>(read_scalar(is, "T"));
    for (int t = 0; t < T; ++t) {
      c.ctrl.K.push_back(read_matrix(is, "K"));
      c.ctrl.k.push_back(read_vector(is, "k"));
      c.ctrl.C.push_back(read_matrix(is, "C"));
      c.lambda.push_back(read_vector(is, "lambda"));
    }
  }
  const auto env = make_environment(ck.cfg.task);
  ck.aspec = AugmentedSpec(env->spec(), *ck.cfg.d_h, ck.cfg.sigma2);
  return ck;
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream f(path);
  if (!f)
    throw std::runtime_error("cannot open checkpoint '" + path + "'");
  return load_checkpoint(f);
}

namespace {

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  std::vector<MetricRow> rows;
  std::ifstream f(path);
  if (!f) return rows;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    MetricRow r;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%lf", &r.iter, &r.samples,
                    &r.condition, &r.distance) == 4)
      rows.push_back(r);
  }
  return rows;
}

void flush_artifacts(const RunConfig& cfg, const std::vector<MetricRow>& rows,
                     int num_conditions) {
  {
    std::ofstream csv(fs::path(cfg.out_dir) / "metrics.csv");
    write_metrics_csv(csv, rows);
  }
  {
    std::ofstream svg(fs::path(cfg.out_dir) / "plot.svg");
    write_metrics_svg(svg, rows, num_conditions);
  }
}

void write_run_info(const RunConfig& cfg) {
  std::ofstream info(fs::path(cfg.out_dir) / "run_info.txt");
  info << "version " << kVersion << '\n'
       << "task " << cfg.task << '\n'
       << "method " << cfg.method << '\n'
       << "seed " << cfg.seed << '\n'
       << "iters " << cfg.iters << '\n'
       << "d_h " << resolved_memory_dim(cfg) << '\n';
  std::ofstream copy(fs::path(cfg.out_dir) / "config.txt");
  copy << cfg.raw_text;
}

std::string checkpoint_name(int iter) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "checkpoint_iter_%03d.txt", iter);
  return buf;
}

int run_gps(const RunConfig& cfg, const std::string& resume,
            std::ostream* log) {
  const auto env = make_environment(cfg.task);
  const AugmentedSpec aspec(env->spec(), resolved_memory_dim(cfg), cfg.sigma2);
  GpsRun run(*env, aspec, gps_options_for(cfg));

  std::vector<MetricRow> rows;
  if (!resume.empty()) {
    Checkpoint ck = load_checkpoint_file(resume);
    if (ck.cfg.task != cfg.task || ck.cfg.method != cfg.method)
      throw std::runtime_error("checkpoint task/method does not match config");
    run.policy() = ck.policy;
    run.nu() = ck.nu;
    run.eps() = ck.eps;
    run.iteration() = ck.iter;
    run.prev_cost() = ck.prev_cost;
    run.normalization_frozen() = ck.norm_frozen;
    for (std::size_t i = 0; i < ck.conds.size(); ++i) {
      run.conditions()[i].ctrl = ck.conds[i].ctrl;
      run.conditions()[i].lambda = ck.conds[i].lambda;
    }
    rows = read_metrics_csv((fs::path(cfg.out_dir) / "metrics.csv").string());
  }

  const int nc = env->spec().num_conditions();
  while (run.iteration() < cfg.iters) {
    const IterationMetrics m = run.outer_iteration();
    for (int c = 0; c < nc; ++c)
      rows.push_back({m.iter, m.cumulative_samples, c, m.distances[c]});
    flush_artifacts(cfg, rows, nc);
    {
      std::ofstream ck(fs::path(cfg.out_dir) / checkpoint_name(m.iter));
      save_checkpoint(ck, cfg, run);
      std::ofstream latest(fs::path(cfg.out_dir) / "checkpoint_latest.txt");
      save_checkpoint(latest, cfg, run);
    }
    if (log) {
      *log << "iter " << m.iter << " cost " << m.mean_sample_cost
           << " eps " << m.eps << " nu " << m.nu << " agree_kl "
           << m.mean_agreement_kl << " dist";
      for (double d : m.distances) *log << ' ' << d;
      *log << std::endl;
    }
  }
  return 0;
}

int run_rwr(const RunConfig& cfg, const std::string& resume,
            std::ostream* log) {
  const auto env = make_environment(cfg.task);
  const AugmentedSpec aspec(env->spec(), resolved_memory_dim(cfg), cfg.sigma2);
  const int nc = env->spec().num_conditions();

  LinearPolicy pol;
  pol.W = MatrixXd::Zero(aspec.d_ua(), aspec.d_oa());
  pol.b = VectorXd::Zero(aspec.d_ua());
  pol.cov = 0.1 * MatrixXd::Identity(aspec.d_ua(), aspec.d_ua());

  int start = 0;
  std::vector<MetricRow> rows;
  if (!resume.empty()) {
    Checkpoint ck = load_checkpoint_file(resume);
    if (ck.cfg.method != "rwr" || ck.cfg.task != cfg.task)
      throw std::runtime_error("checkpoint task/method does not match config");
    pol.W = ck.policy.layers()[0].W;
    pol.b = ck.policy.layers()[0].b;
    pol.cov = ck.policy.action_cov();
    start = ck.iter;
    rows = read_metrics_csv((fs::path(cfg.out_dir) / "metrics.csv").string());
  }

  RwrOptions opt;
  opt.num_samples = cfg.rwr_samples;
  for (int it = start; it < cfg.iters; ++it) {
    Rng rng = Rng::derive(cfg.seed, 4, it);
    rwr_iteration(pol, *env, aspec, opt, rng);
    const std::vector<double> dist = evaluate_linear(*env, aspec, pol);
    for (int c = 0; c < nc; ++c)
      rows.push_back({it, (it + 1) * opt.num_samples, c, dist[c]});
    flush_artifacts(cfg, rows, nc);

    Checkpoint ck;
    ck.cfg = cfg;
    ck.aspec = aspec;
    MemoryPolicy::Layer layer{pol.W, pol.b};
    ck.policy.layers().push_back(layer);
    ck.policy.set_action_cov(pol.cov);
    ck.iter = it + 1;
    {
      std::ofstream f(fs::path(cfg.out_dir) / checkpoint_name(it));
      save_checkpoint_struct(f, ck);
      std::ofstream latest(fs::path(cfg.out_dir) / "checkpoint_latest.txt");
      save_checkpoint_struct(latest, ck);
    }
    if (log) {
      *log << "iter " << it << " dist";
      for (double d : dist) *log << ' ' << d;
      *log << std::endl;
    }
  }
  return 0;
}

}  // namespace

int run_experiment(const RunConfig& cfg, const std::string& resume_checkpoint,
                   std::ostream* log) {
  try {
    fs::create_directories(cfg.out_dir);
    write_run_info(cfg);
    if (cfg.method == "rwr") return run_rwr(cfg, resume_checkpoint, log);
    return run_gps(cfg, resume_checkpoint, log);
  } catch (const std::exception& e) {
    if (log) *log << "error: " << e.what() << std::endl;
    else std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}

int replay(const std::string& checkpoint_path, int condition,
           std::ostream& os) {
  const Checkpoint ck = load_checkpoint_file(checkpoint_path);
  const auto env = make_environment(ck.cfg.task);
  if (condition < 0 || condition >= env->spec().num_conditions())
    throw std::invalid_argument("replay: condition index out of range");

  const int d_x = ck.aspec.d_x, d_u = ck.aspec.d_u, d_h = ck.aspec.d_h;
  Actor actor;
  if (ck.cfg.method == "rwr") {
    // single affine layer stored as the policy
    actor = [&ck](int, const VectorXd&, const VectorXd& o, Rng&) {
      return VectorXd(ck.policy.layers()[0].W * o + ck.policy.layers()[0].b);
    };
  } else {
    actor = policy_actor(ck.policy, /*stochastic=*/false);
  }
  Rng rng(0);
  const TrajectorySample roll = augment_rollout(
      *env, ck.aspec, actor, condition, rng, /*zero_memory_noise=*/true);

  auto print_vec = [&os](const VectorXd& v) {
    os << '[';
    for (int i = 0; i < v.size(); ++i) {
      if (i) os << ' ';
      os << std::setw(9) << std::setprecision(4) << std::fixed << v(i);
    }
    os << ']';
  };
  os << "replay: task=" << ck.cfg.task << " method=" << ck.cfg.method
     << " condition=" << condition << " iter=" << ck.iter << '\n';
  os << "t x o h u m cost\n";
  for (int t = 0; t < roll.horizon(); ++t) {
    os << std::setw(3) << t << ' ';
    print_vec(roll.states[t].head(d_x));
    os << ' ';
    print_vec(roll.observations[t].head(ck.aspec.d_o));
    os << ' ';
    print_vec(roll.states[t].tail(d_h));
    os << ' ';
    print_vec(roll.actions[t].head(d_u));
    os << ' ';
    print_vec(roll.actions[t].tail(d_h));
    os << ' ' << std::setprecision(6) << std::fixed << roll.costs[t] << '\n';
  }
  os << "metric " << std::setprecision(6) << std::fixed
     << evaluate_metric(roll, *env, condition) << '\n';
  return 0;
}

}  // namespace gpsmem
