#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace caedp {

struct Individual {
  Eigen::VectorXd x;  // length p
  double d = 0.0;     // confounder (0/1 when the dataset is binary-D)
  double m = 0.0;     // mediator
  double y = 0.0;     // outcome
};

struct ClusterRecord {
  std::string id;
  int treatment = 0;   // A_i
  Eigen::VectorXd v;   // cluster covariates, length q
  std::vector<Individual> individuals;

  int size() const { return static_cast<int>(individuals.size()); }
};

/// Observed trial data. Treatment and cluster covariates are stored once per
/// cluster, so within-cluster consistency holds by construction.
struct ClusterDataset {
  std::vector<ClusterRecord> clusters;
  int p = 0;
  int q = 0;
  bool binary_d = false;

  int num_clusters() const { return static_cast<int>(clusters.size()); }
  int total_individuals() const;

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
};

/// Layout of the three regression design vectors. All three share the
/// prefix (1, A, N, X, V); the mediator design appends the confounder summary
/// (own value, leave-one-out mean) and the outcome design further appends the
/// mediator summary.
struct DesignSpec {
  int p = 0;
  int q = 0;
  bool binary_d = false;

  static DesignSpec for_dataset(const ClusterDataset& data) {
    return DesignSpec{data.p, data.q, data.binary_d};
  }

  int dim_d() const { return 3 + p + q; }
  int dim_m() const { return dim_d() + 2; }
  int dim_y() const { return dim_d() + 4; }

  int idx_intercept() const { return 0; }
  int idx_treatment() const { return 1; }
  int idx_size() const { return 2; }
  int idx_x(int t) const { return 3 + t; }
  int idx_v(int t) const { return 3 + p + t; }
  int idx_d_own() const { return dim_d(); }
  int idx_d_loo() const { return dim_d() + 1; }
  int idx_m_own() const { return dim_d() + 2; }
  int idx_m_loo() const { return dim_d() + 3; }

  /// Fills the shared (1, A, N, X, V) prefix of a design row.
  void fill_base(Eigen::Ref<Eigen::VectorXd> row, int treatment, int cluster_size,
                 const Eigen::VectorXd& x, const Eigen::VectorXd& v) const;

  Eigen::VectorXd row_d(int treatment, int cluster_size, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& v) const;
  Eigen::VectorXd row_m(int treatment, int cluster_size, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& v, double d_own, double d_loo) const;
  Eigen::VectorXd row_y(int treatment, int cluster_size, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& v, double d_own, double d_loo, double m_own,
                        double m_loo) const;
};

/// Leave-one-out mean of values[j] among the others; the own value when the
/// cluster is a singleton.
double leave_one_out_mean(double total, double own, int n);

/// Stacked per-individual design matrices and responses in dataset order.
struct StackedDesign {
  Eigen::MatrixXd c_d, c_m, c_y;  // rows = individuals
  Eigen::VectorXd d, m, y;
  std::vector<int> cluster_of;    // individual -> cluster index
  std::vector<int> cluster_start; // cluster -> first row (size I + 1)
};

StackedDesign stack_design(const ClusterDataset& data, const DesignSpec& design);

}  // namespace caedp
