#include "caedp/dataset.hpp"

#include <cmath>
#include <stdexcept>

namespace caedp {

int ClusterDataset::total_individuals() const {
  int n = 0;
  for (const auto& c : clusters) n += c.size();
  return n;
}

void ClusterDataset::validate() const {
  if (p < 0 || q < 0) throw std::invalid_argument("covariate dimensions must be nonnegative");
  for (const auto& c : clusters) {
    if (c.individuals.empty()) {
      throw std::invalid_argument("cluster '" + c.id + "' has no individuals");
    }
    if (c.treatment != 0 && c.treatment != 1) {
      throw std::invalid_argument("cluster '" + c.id + "' has a non-binary treatment");
    }
    if (c.v.size() != q) {
      throw std::invalid_argument("cluster '" + c.id + "' has cluster covariates of wrong length");
    }
    if (!c.v.allFinite()) throw std::invalid_argument("cluster '" + c.id + "' has non-finite V");
    for (std::size_t j = 0; j < c.individuals.size(); ++j) {
      const auto& ind = c.individuals[j];
      const std::string where = "cluster '" + c.id + "' individual " + std::to_string(j);
      if (ind.x.size() != p) throw std::invalid_argument(where + ": covariates of wrong length");
      if (!ind.x.allFinite() || !std::isfinite(ind.d) || !std::isfinite(ind.m) ||
          !std::isfinite(ind.y)) {
        throw std::invalid_argument(where + ": non-finite value");
      }
      if (binary_d && ind.d != 0.0 && ind.d != 1.0) {
        throw std::invalid_argument(where + ": binary confounder must be 0 or 1");
      }
    }
  }
}

void DesignSpec::fill_base(Eigen::Ref<Eigen::VectorXd> row, int treatment, int cluster_size,
                           const Eigen::VectorXd& x, const Eigen::VectorXd& v) const {
  row[idx_intercept()] = 1.0;
  row[idx_treatment()] = treatment;
  row[idx_size()] = cluster_size;
  for (int t = 0; t < p; ++t) row[idx_x(t)] = x[t];
  for (int t = 0; t < q; ++t) row[idx_v(t)] = v[t];
}

Eigen::VectorXd DesignSpec::row_d(int treatment, int cluster_size, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& v) const {
  Eigen::VectorXd row(dim_d());
  fill_base(row, treatment, cluster_size, x, v);
  return row;
}

Eigen::VectorXd DesignSpec::row_m(int treatment, int cluster_size, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& v, double d_own, double d_loo) const {
  Eigen::VectorXd row(dim_m());
  fill_base(row.head(dim_d()), treatment, cluster_size, x, v);
  row[idx_d_own()] = d_own;
  row[idx_d_loo()] = d_loo;
  return row;
}

Eigen::VectorXd DesignSpec::row_y(int treatment, int cluster_size, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& v, double d_own, double d_loo,
                                  double m_own, double m_loo) const {
  Eigen::VectorXd row(dim_y());
  fill_base(row.head(dim_d()), treatment, cluster_size, x, v);
  row[idx_d_own()] = d_own;
  row[idx_d_loo()] = d_loo;
  row[idx_m_own()] = m_own;
  row[idx_m_loo()] = m_loo;
  return row;
}

double leave_one_out_mean(double total, double own, int n) {
  if (n <= 1) return own;
  return (total - own) / (n - 1);
}

StackedDesign stack_design(const ClusterDataset& data, const DesignSpec& design) {
  const int n = data.total_individuals();
  StackedDesign s;
  s.c_d.resize(n, design.dim_d());
  s.c_m.resize(n, design.dim_m());
  s.c_y.resize(n, design.dim_y());
  s.d.resize(n);
  s.m.resize(n);
  s.y.resize(n);
  s.cluster_of.resize(n);
  s.cluster_start.assign(data.num_clusters() + 1, 0);
  int row = 0;
  for (int i = 0; i < data.num_clusters(); ++i) {
    const auto& c = data.clusters[i];
    s.cluster_start[i] = row;
    const int size = c.size();
    double d_total = 0.0, m_total = 0.0;
    for (const auto& ind : c.individuals) {
      d_total += ind.d;
      m_total += ind.m;
    }
    for (const auto& ind : c.individuals) {
      const double d_loo = leave_one_out_mean(d_total, ind.d, size);
      const double m_loo = leave_one_out_mean(m_total, ind.m, size);
      s.c_d.row(row) = design.row_d(c.treatment, size, ind.x, c.v).transpose();
      s.c_m.row(row) = design.row_m(c.treatment, size, ind.x, c.v, ind.d, d_loo).transpose();
      s.c_y.row(row) =
          design.row_y(c.treatment, size, ind.x, c.v, ind.d, d_loo, ind.m, m_loo).transpose();
      s.d[row] = ind.d;
      s.m[row] = ind.m;
      s.y[row] = ind.y;
      s.cluster_of[row] = i;
      ++row;
    }
  }
  s.cluster_start[data.num_clusters()] = row;
  return s;
}

}  // namespace caedp
