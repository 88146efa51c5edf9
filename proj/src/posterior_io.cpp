#include "caedp/posterior_io.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "caedp/textio.hpp"

namespace caedp {
namespace {

class RowWriter {
 public:
  explicit RowWriter(std::ostream& out) : out_(out) {}

  void begin(int iteration, const char* block, long index) {
    out_ << iteration << ',' << block << ',' << index;
  }
  void put(double v) { out_ << ',' << format_double(v); }
  void put(const Eigen::VectorXd& v) {
    for (Eigen::Index t = 0; t < v.size(); ++t) put(v[t]);
  }
  void end() { out_ << '\n'; }

 private:
  std::ostream& out_;
};

struct Meta {
  int K, L, M, p, q, binary, clusters, individuals, keep, has_loglik;
};

class RowReader {
 public:
  RowReader(std::vector<std::string_view> fields, long line) : f_(std::move(fields)), line_(line) {}

  double next() {
    if (pos_ >= f_.size()) fail("row has too few values");
    const std::size_t at = pos_++;
    try {
      return parse_double(f_[at], "value " + std::to_string(at - 2));
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  Eigen::VectorXd next_vector(int n) {
    Eigen::VectorXd v(n);
    for (int t = 0; t < n; ++t) v[t] = next();
    return v;
  }
  void finish() const {
    if (pos_ != f_.size()) fail("row has too many values");
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("posterior file line " + std::to_string(line_) + ": " + what);
  }

 private:
  std::vector<std::string_view> f_;
  std::size_t pos_ = 3;
  long line_;
};

}  // namespace

void write_posterior(std::ostream& out, const PosteriorSample& sample) {
  if (sample.states.empty()) throw std::invalid_argument("cannot write an empty posterior");
  const auto& first = sample.states.front();
  const auto lv = first.levels();
  const auto& d = sample.design;
  const int clusters = static_cast<int>(first.indicators.zeta_n.size());
  const int individuals = static_cast<int>(first.indicators.zeta_y.size());
  const bool has_loglik = sample.loglik.rows() == sample.keep() && sample.keep() > 0 &&
                          sample.loglik.cols() == individuals;
  out << "# caedp posterior v1\n";
  out << "meta," << lv.K << ',' << lv.L << ',' << lv.M << ',' << d.p << ',' << d.q << ','
      << (d.binary_d ? 1 : 0) << ',' << clusters << ',' << individuals << ',' << sample.keep()
      << ',' << (has_loglik ? 1 : 0) << '\n';
  out << "iteration,block,index,values\n";
  RowWriter w(out);
  for (int it = 0; it < sample.keep(); ++it) {
    const auto& s = sample.states[it];
    const auto& c = s.conc;
    w.begin(it, "conc", 0);
    for (double v : {c.alpha_star, c.alpha_theta, c.alpha_phi, c.prior_star.shape,
                     c.prior_star.rate, c.prior_theta.shape, c.prior_theta.rate,
                     c.prior_phi.shape, c.prior_phi.rate}) {
      w.put(v);
    }
    w.end();
    w.begin(it, "sstar", 0);
    w.put(s.weights.s_star);
    w.end();
    for (int k = 0; k < lv.K; ++k) {
      w.begin(it, "vtheta", k);
      w.put(Eigen::VectorXd(s.weights.v_theta.row(k).transpose()));
      w.end();
    }
    for (int k = 0; k < lv.K; ++k) {
      for (int l = 0; l < lv.L; ++l) {
        w.begin(it, "vphi", static_cast<long>(k) * lv.L + l);
        const auto idx = s.weights.phi_index(k, l, 0);
        for (int m = 0; m < lv.M; ++m) w.put(s.weights.v_phi[idx + m]);
        w.end();
      }
    }
    for (int l = 0; l < lv.L; ++l) {
      const auto& t = s.theta[l];
      w.begin(it, "theta", l);
      w.put(t.y.beta);
      w.put(t.y.sigma);
      w.put(t.m.beta);
      w.put(t.m.sigma);
      w.put(t.d.beta);
      w.put(t.d.sigma);
      w.end();
    }
    for (int m = 0; m < lv.M; ++m) {
      w.begin(it, "phi", m);
      w.put(s.phi[m].mu);
      w.put(s.phi[m].var);
      w.end();
    }
    for (int k = 0; k < lv.K; ++k) {
      w.begin(it, "eta", k);
      w.put(s.eta[k].lambda_n);
      w.put(s.eta[k].v_mean);
      w.put(s.eta[k].v_var);
      w.end();
    }
    const std::pair<const char*, const std::vector<int>*> blocks[] = {
        {"zn", &s.indicators.zeta_n}, {"zy", &s.indicators.zeta_y}, {"zx", &s.indicators.zeta_x}};
    for (const auto& [name, values] : blocks) {
      out << it << ',' << name << ",0";
      for (int v : *values) out << ',' << v;
      out << '\n';
    }
    if (d.binary_d) {
      w.begin(it, "latent", 0);
      w.put(s.latent_d);
      w.end();
    }
    if (has_loglik) {
      w.begin(it, "loglik", 0);
      w.put(Eigen::VectorXd(sample.loglik.row(it).transpose()));
      w.end();
    }
  }
}

PosteriorSample read_posterior(std::istream& in) {
  std::string line;
  long lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      const auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      return true;
    }
    return false;
  };
  if (!next_line()) throw std::invalid_argument("posterior file is empty");
  const auto mf = split(trim(line));
  if (mf.size() != 11 || mf[0] != "meta") {
    throw std::invalid_argument("posterior file line " + std::to_string(lineno) +
                                ": expected the meta row");
  }
  Meta meta{};
  int* slots[] = {&meta.K,        &meta.L,           &meta.M,    &meta.p,
                  &meta.q,        &meta.binary,      &meta.clusters,
                  &meta.individuals, &meta.keep,     &meta.has_loglik};
  for (int t = 0; t < 10; ++t) *slots[t] = static_cast<int>(parse_int(mf[t + 1], "meta field"));
  if (!next_line() || trim(line).substr(0, 15) != "iteration,block") {
    throw std::invalid_argument("posterior file: missing column header");
  }

  PosteriorSample out;
  out.design = DesignSpec{meta.p, meta.q, meta.binary != 0};
  const auto& d = out.design;
  if (meta.has_loglik) out.loglik.resize(meta.keep, meta.individuals);
  out.states.resize(meta.keep);
  for (auto& s : out.states) {
    s.weights = StickWeights(meta.K, meta.L, meta.M);
    s.theta.resize(meta.L);
    s.phi.resize(meta.M);
    s.eta.resize(meta.K);
  }
  while (next_line()) {
    auto fields = split(trim(line));
    if (fields.size() < 3) {
      throw std::invalid_argument("posterior file line " + std::to_string(lineno) +
                                  ": malformed row");
    }
    const auto it = parse_int(fields[0], "iteration");
    const std::string block(fields[1]);
    const auto index = parse_int(fields[2], "index");
    RowReader r(fields, lineno);
    if (it < 0 || it >= meta.keep) r.fail("iteration out of range");
    auto& s = out.states[it];
    auto check_index = [&](long long bound) {
      if (index < 0 || index >= bound) r.fail("index out of range for block " + block);
    };
    if (block == "conc") {
      auto& c = s.conc;
      for (double* v : {&c.alpha_star, &c.alpha_theta, &c.alpha_phi, &c.prior_star.shape,
                        &c.prior_star.rate, &c.prior_theta.shape, &c.prior_theta.rate,
                        &c.prior_phi.shape, &c.prior_phi.rate}) {
        *v = r.next();
      }
    } else if (block == "sstar") {
      s.weights.s_star = r.next_vector(meta.K);
    } else if (block == "vtheta") {
      check_index(meta.K);
      s.weights.v_theta.row(index) = r.next_vector(meta.L).transpose();
    } else if (block == "vphi") {
      check_index(static_cast<long long>(meta.K) * meta.L);
      const auto base = static_cast<std::size_t>(index) * meta.M;
      for (int m = 0; m < meta.M; ++m) s.weights.v_phi[base + m] = r.next();
    } else if (block == "theta") {
      check_index(meta.L);
      auto& t = s.theta[index];
      t.y.beta = r.next_vector(d.dim_y());
      t.y.sigma = r.next();
      t.m.beta = r.next_vector(d.dim_m());
      t.m.sigma = r.next();
      t.d.beta = r.next_vector(d.dim_d());
      t.d.sigma = r.next();
    } else if (block == "phi") {
      check_index(meta.M);
      s.phi[index].mu = r.next_vector(meta.p);
      s.phi[index].var = r.next_vector(meta.p);
    } else if (block == "eta") {
      check_index(meta.K);
      s.eta[index].lambda_n = r.next();
      s.eta[index].v_mean = r.next_vector(meta.q);
      s.eta[index].v_var = r.next_vector(meta.q);
    } else if (block == "zn" || block == "zy" || block == "zx") {
      const int n = block == "zn" ? meta.clusters : meta.individuals;
      if (static_cast<int>(fields.size()) != n + 3) r.fail("wrong number of indicators");
      std::vector<int> values(n);
      for (int t = 0; t < n; ++t) values[t] = static_cast<int>(parse_int(fields[t + 3], "indicator"));
      (block == "zn" ? s.indicators.zeta_n
                     : block == "zy" ? s.indicators.zeta_y : s.indicators.zeta_x) = std::move(values);
      continue;
    } else if (block == "latent") {
      s.latent_d = r.next_vector(meta.individuals);
    } else if (block == "loglik") {
      if (!meta.has_loglik) r.fail("loglik row without has_loglik");
      out.loglik.row(it) = r.next_vector(meta.individuals).transpose();
    } else {
      r.fail("unknown block '" + block + "'");
    }
    r.finish();
  }
  for (auto& s : out.states) {
    s.weights.close_and_recompute();
    s.validate(d, meta.clusters, meta.individuals);
  }
  return out;
}

}  // namespace caedp
