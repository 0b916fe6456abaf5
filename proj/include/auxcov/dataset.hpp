#pragma once

// Structurally incomplete multivariate data: observation patterns made of K
// observed variable subsets, the derived pair sets, auxiliary per-pair
// covariates, and file ingestion.

#include <Eigen/Dense>

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace auxcov {

using VarSet = std::vector<int>;
using IndexPair = std::pair<int, int>;

/// Which variables are observed in which samples, stored as K distinct
/// subsets with per-subset sample counts. Samples are block-contiguous:
/// rows [offset(k), offset(k) + count(k)) all observe subset(k).
class ObservationPattern {
 public:
  /// Canonicalizes its input: subsets are sorted, duplicates within a subset
  /// removed, and repeated subsets merged by summing their counts (first
  /// appearance fixes block order). Indices are 0-based.
  static ObservationPattern build(int p, std::vector<VarSet> subsets, std::vector<int> counts);

  int p() const noexcept { return p_; }
  int n() const noexcept { return n_; }
  int num_blocks() const noexcept { return static_cast<int>(subsets_.size()); }

  const VarSet& subset(int k) const { return subsets_.at(k); }
  int count(int k) const { return counts_.at(k); }
  int offset(int k) const { return offsets_.at(k); }
  double proportion(int k) const { return static_cast<double>(counts_.at(k)) / n_; }
  bool contains(int k, int var) const { return member_[k][var] != 0; }
  bool contains_all(int k, std::initializer_list<int> vars) const;

  /// n_ij, the joint sample size of the pair. n_ii is the marginal count.
  int pair_count(int i, int j) const;
  /// n_ijkl = |N_ij ∩ N_kl|.
  int quad_count(int i, int j, int k, int l) const;

  /// Sample indices N_ij in ascending order.
  std::vector<int> joint_samples(int i, int j) const;

  const Eigen::MatrixXi& pair_counts() const noexcept { return pair_counts_; }

 private:
  ObservationPattern() = default;
  void check_index(int i) const;

  int p_ = 0;
  int n_ = 0;
  std::vector<VarSet> subsets_;
  std::vector<int> counts_;
  std::vector<int> offsets_;
  std::vector<std::vector<char>> member_;
  Eigen::MatrixXi pair_counts_;
};

/// O, U, Ū and η for a pattern. O holds ordered pairs; the diagonal is
/// always present.
struct PairSets {
  int p = 0;
  std::vector<char> mask;              // p*p, row-major, 1 iff (i,j) ∈ O
  std::vector<IndexPair> upper;        // U, i < j, row-major order
  std::vector<IndexPair> upper_diag;   // Ū, i <= j, row-major order
  std::vector<int> upper_index;        // p*p, position in `upper` or -1
  std::vector<int> upper_diag_index;   // p*p, position in `upper_diag` or -1
  int observed_count = 0;              // |O|
  double eta = 0.0;                    // 1 - |O| / p^2

  bool contains(int i, int j) const { return mask[static_cast<size_t>(i) * p + j] != 0; }
  int missing_count() const { return p * p - observed_count; }
  int u_index(int i, int j) const;
  int ubar_index(int i, int j) const;
};

/// O per the union of V_k × V_k. Off-diagonal pairs with fewer than
/// `min_joint` joint samples are treated as unobserved.
PairSets pair_sets(const ObservationPattern& pattern, int min_joint = 1);

/// The pair set every estimator works on: pairs with n_ij < 2 move to Oᶜ.
inline PairSets estimation_pairs(const ObservationPattern& pattern) { return pair_sets(pattern, 2); }

int quad_sample_size(const ObservationPattern& pattern, int i, int j, int k, int l);

/// n×p values plus variable names, bound to an observation pattern. Entries
/// outside the pattern are stored as NaN.
class IncompleteDataset {
 public:
  IncompleteDataset(std::shared_ptr<const ObservationPattern> pattern, Eigen::MatrixXd values,
                    std::vector<std::string> names = {});

  /// Builds from per-block data; block k is n_k × |subsets[k]| with columns in
  /// the order given by subsets[k]. Repeated subsets are merged.
  static IncompleteDataset from_blocks(int p, const std::vector<VarSet>& subsets,
                                       const std::vector<Eigen::MatrixXd>& blocks,
                                       std::vector<std::string> names = {});

  const ObservationPattern& pattern() const noexcept { return *pattern_; }
  const std::shared_ptr<const ObservationPattern>& pattern_ptr() const noexcept { return pattern_; }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  int p() const noexcept { return pattern_->p(); }
  int n() const noexcept { return pattern_->n(); }

  /// The observed part of block k: count(k) × |subset(k)|.
  Eigen::MatrixXd block(int k) const;

  /// New dataset made of the given rows of each block (block-local indices,
  /// repeats allowed). Blocks with no selected rows are dropped.
  IncompleteDataset select_rows(const std::vector<std::vector<int>>& rows_per_block) const;

 private:
  std::shared_ptr<const ObservationPattern> pattern_;
  Eigen::MatrixXd values_;
  std::vector<std::string> names_;
};

/// Per-pair q-vectors W_ij = W_ji for i != j.
class AuxiliaryCovariates {
 public:
  AuxiliaryCovariates(int p, int q);

  int p() const noexcept { return p_; }
  int q() const noexcept { return q_; }
  static int num_pairs(int p) { return p * (p - 1) / 2; }
  /// Position of {i,j} in the strict upper triangle, row-major.
  static int pair_index(int i, int j, int p);

  void set(int i, int j, std::span<const double> w);
  void set(int i, int j, double w) { set(i, j, std::span<const double>(&w, 1)); }
  bool has(int i, int j) const;
  Eigen::VectorXd get(int i, int j) const;
  bool complete() const;
  int missing_count() const;

  /// Covariate rows for the given pairs, |pairs| × q.
  Eigen::MatrixXd rows(std::span<const IndexPair> pairs) const;

 private:
  int p_;
  int q_;
  Eigen::MatrixXd table_;
  std::vector<char> defined_;
};

enum class DataFormat { kAuto, kLongCsv, kBlockDirectory };

IncompleteDataset load_dataset(const std::filesystem::path& path, DataFormat format = DataFormat::kAuto);
void save_dataset(const IncompleteDataset& data, const std::filesystem::path& path);

/// Reads `i,j,w1,...,wq`; i and j are 1-based indices or variable names.
AuxiliaryCovariates load_aux(const std::filesystem::path& path, const std::vector<std::string>& names);
void save_aux(const AuxiliaryCovariates& aux, const std::filesystem::path& path);

}  // namespace auxcov
