#include "auxcov/dataset.hpp"

#include "auxcov/csv.hpp"
#include "auxcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <unordered_map>

namespace auxcov {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// ObservationPattern

ObservationPattern ObservationPattern::build(int p, std::vector<VarSet> subsets, std::vector<int> counts) {
  if (p < 1) throw Error(ErrorCode::kBadCounts, "p must be positive");
  if (subsets.empty()) throw Error(ErrorCode::kEmptyUnion, "no subsets given");
  if (subsets.size() != counts.size())
    throw Error(ErrorCode::kBadCounts, "subsets and counts differ in length");

  ObservationPattern pat;
  pat.p_ = p;
  std::map<VarSet, int> seen;
  for (size_t k = 0; k < subsets.size(); ++k) {
    if (counts[k] < 1)
      throw Error(ErrorCode::kBadCounts, "subset " + std::to_string(k) + " has count " + std::to_string(counts[k]));
    VarSet s = std::move(subsets[k]);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    if (s.empty()) throw Error(ErrorCode::kEmptyUnion, "subset " + std::to_string(k) + " is empty");
    if (s.front() < 0 || s.back() >= p)
      throw Error(ErrorCode::kIndexOutOfRange, "subset " + std::to_string(k) + " has an index outside [0, p)");
    auto [it, inserted] = seen.emplace(s, static_cast<int>(pat.subsets_.size()));
    if (inserted) {
      pat.subsets_.push_back(std::move(s));
      pat.counts_.push_back(counts[k]);
    } else {
      pat.counts_[it->second] += counts[k];
    }
  }

  const int K = pat.num_blocks();
  pat.member_.assign(K, std::vector<char>(p, 0));
  std::vector<char> covered(p, 0);
  for (int k = 0; k < K; ++k)
    for (int v : pat.subsets_[k]) pat.member_[k][v] = covered[v] = 1;
  for (int v = 0; v < p; ++v)
    if (!covered[v]) throw Error(ErrorCode::kEmptyUnion, "variable " + std::to_string(v + 1) + " is in no subset");

  pat.offsets_.resize(K);
  int off = 0;
  for (int k = 0; k < K; ++k) {
    pat.offsets_[k] = off;
    off += pat.counts_[k];
  }
  pat.n_ = off;

  pat.pair_counts_ = Eigen::MatrixXi::Zero(p, p);
  for (int k = 0; k < K; ++k)
    for (int a : pat.subsets_[k])
      for (int b : pat.subsets_[k]) pat.pair_counts_(a, b) += pat.counts_[k];
  return pat;
}

void ObservationPattern::check_index(int i) const {
  if (i < 0 || i >= p_) throw Error(ErrorCode::kIndexOutOfRange, "variable index " + std::to_string(i));
}

bool ObservationPattern::contains_all(int k, std::initializer_list<int> vars) const {
  for (int v : vars)
    if (!member_[k][v]) return false;
  return true;
}

int ObservationPattern::pair_count(int i, int j) const {
  check_index(i);
  check_index(j);
  return pair_counts_(i, j);
}

int ObservationPattern::quad_count(int i, int j, int k, int l) const {
  check_index(i);
  check_index(j);
  check_index(k);
  check_index(l);
  int total = 0;
  for (int t = 0; t < num_blocks(); ++t)
    if (member_[t][i] && member_[t][j] && member_[t][k] && member_[t][l]) total += counts_[t];
  return total;
}

std::vector<int> ObservationPattern::joint_samples(int i, int j) const {
  check_index(i);
  check_index(j);
  std::vector<int> out;
  for (int t = 0; t < num_blocks(); ++t)
    if (member_[t][i] && member_[t][j])
      for (int r = 0; r < counts_[t]; ++r) out.push_back(offsets_[t] + r);
  return out;
}

int quad_sample_size(const ObservationPattern& pattern, int i, int j, int k, int l) {
  return pattern.quad_count(i, j, k, l);
}

// ---------------------------------------------------------------------------
// PairSets

int PairSets::u_index(int i, int j) const {
  if (i > j) std::swap(i, j);
  return upper_index[static_cast<size_t>(i) * p + j];
}

int PairSets::ubar_index(int i, int j) const {
  if (i > j) std::swap(i, j);
  return upper_diag_index[static_cast<size_t>(i) * p + j];
}

PairSets pair_sets(const ObservationPattern& pattern, int min_joint) {
  const int p = pattern.p();
  PairSets ps;
  ps.p = p;
  ps.mask.assign(static_cast<size_t>(p) * p, 0);
  ps.upper_index.assign(static_cast<size_t>(p) * p, -1);
  ps.upper_diag_index.assign(static_cast<size_t>(p) * p, -1);
  const auto& counts = pattern.pair_counts();
  for (int i = 0; i < p; ++i) {
    for (int j = i; j < p; ++j) {
      const bool in_o = (i == j) ? counts(i, i) >= 1 : counts(i, j) >= std::max(min_joint, 1);
      if (!in_o) continue;
      ps.mask[static_cast<size_t>(i) * p + j] = ps.mask[static_cast<size_t>(j) * p + i] = 1;
      ps.upper_diag_index[static_cast<size_t>(i) * p + j] = static_cast<int>(ps.upper_diag.size());
      ps.upper_diag.emplace_back(i, j);
      if (i < j) {
        ps.upper_index[static_cast<size_t>(i) * p + j] = static_cast<int>(ps.upper.size());
        ps.upper.emplace_back(i, j);
        ps.observed_count += 2;
      } else {
        ps.observed_count += 1;
      }
    }
  }
  ps.eta = 1.0 - static_cast<double>(ps.observed_count) / (static_cast<double>(p) * p);
  return ps;
}

// ---------------------------------------------------------------------------
// IncompleteDataset

IncompleteDataset::IncompleteDataset(std::shared_ptr<const ObservationPattern> pattern, Eigen::MatrixXd values,
                                     std::vector<std::string> names)
    : pattern_(std::move(pattern)), values_(std::move(values)), names_(std::move(names)) {
  const auto& pat = *pattern_;
  if (values_.rows() != pat.n() || values_.cols() != pat.p())
    throw Error(ErrorCode::kDimensionMismatch, "value array is not n x p");
  if (names_.empty()) {
    for (int i = 0; i < pat.p(); ++i) names_.push_back("x" + std::to_string(i + 1));
  } else if (static_cast<int>(names_.size()) != pat.p()) {
    throw Error(ErrorCode::kDimensionMismatch, "expected " + std::to_string(pat.p()) + " variable names");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k < pat.num_blocks(); ++k) {
    for (int r = pat.offset(k); r < pat.offset(k) + pat.count(k); ++r) {
      for (int v = 0; v < pat.p(); ++v) {
        if (pat.contains(k, v)) {
          if (!std::isfinite(values_(r, v)))
            throw Error(ErrorCode::kParseError, "non-finite value at sample " + std::to_string(r + 1) +
                                                    ", variable " + names_[v]);
        } else {
          values_(r, v) = nan;
        }
      }
    }
  }
}

IncompleteDataset IncompleteDataset::from_blocks(int p, const std::vector<VarSet>& subsets,
                                                 const std::vector<Eigen::MatrixXd>& blocks,
                                                 std::vector<std::string> names) {
  if (subsets.size() != blocks.size()) throw Error(ErrorCode::kDimensionMismatch, "one block per subset required");
  std::vector<int> counts;
  int n = 0;
  for (size_t k = 0; k < blocks.size(); ++k) {
    if (blocks[k].cols() != static_cast<Eigen::Index>(subsets[k].size()))
      throw Error(ErrorCode::kInconsistentColumns, "block " + std::to_string(k) + " column count");
    counts.push_back(static_cast<int>(blocks[k].rows()));
    n += static_cast<int>(blocks[k].rows());
  }
  auto pattern = std::make_shared<const ObservationPattern>(ObservationPattern::build(p, subsets, counts));

  // Merged subsets are laid out contiguously, in input order within a block.
  Eigen::MatrixXd values = Eigen::MatrixXd::Constant(n, p, std::numeric_limits<double>::quiet_NaN());
  std::vector<int> fill(pattern->num_blocks(), 0);
  for (size_t k = 0; k < blocks.size(); ++k) {
    VarSet canon = subsets[k];
    std::sort(canon.begin(), canon.end());
    canon.erase(std::unique(canon.begin(), canon.end()), canon.end());
    int target = -1;
    for (int t = 0; t < pattern->num_blocks(); ++t)
      if (pattern->subset(t) == canon) target = t;
    for (Eigen::Index r = 0; r < blocks[k].rows(); ++r) {
      const int row = pattern->offset(target) + fill[target]++;
      for (size_t c = 0; c < subsets[k].size(); ++c) values(row, subsets[k][c]) = blocks[k](r, c);
    }
  }
  return IncompleteDataset(std::move(pattern), std::move(values), std::move(names));
}

Eigen::MatrixXd IncompleteDataset::block(int k) const {
  const auto& pat = *pattern_;
  const auto& vars = pat.subset(k);
  Eigen::MatrixXd out(pat.count(k), static_cast<Eigen::Index>(vars.size()));
  for (int r = 0; r < pat.count(k); ++r)
    for (size_t c = 0; c < vars.size(); ++c) out(r, c) = values_(pat.offset(k) + r, vars[c]);
  return out;
}

IncompleteDataset IncompleteDataset::select_rows(const std::vector<std::vector<int>>& rows_per_block) const {
  const auto& pat = *pattern_;
  if (static_cast<int>(rows_per_block.size()) != pat.num_blocks())
    throw Error(ErrorCode::kDimensionMismatch, "row selection needs one list per block");
  std::vector<VarSet> subsets;
  std::vector<Eigen::MatrixXd> blocks;
  for (int k = 0; k < pat.num_blocks(); ++k) {
    const auto& rows = rows_per_block[k];
    if (rows.empty()) continue;
    const auto& vars = pat.subset(k);
    Eigen::MatrixXd b(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(vars.size()));
    for (size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] < 0 || rows[r] >= pat.count(k)) throw Error(ErrorCode::kIndexOutOfRange, "row selection");
      for (size_t c = 0; c < vars.size(); ++c) b(r, c) = values_(pat.offset(k) + rows[r], vars[c]);
    }
    subsets.push_back(vars);
    blocks.push_back(std::move(b));
  }
  return from_blocks(pat.p(), subsets, blocks, names_);
}

// ---------------------------------------------------------------------------
// AuxiliaryCovariates

AuxiliaryCovariates::AuxiliaryCovariates(int p, int q)
    : p_(p), q_(q), table_(Eigen::MatrixXd::Zero(num_pairs(p), q)), defined_(num_pairs(p), 0) {
  if (p < 2 || q < 1) throw Error(ErrorCode::kDimensionMismatch, "auxiliary covariates need p >= 2, q >= 1");
}

int AuxiliaryCovariates::pair_index(int i, int j, int p) {
  if (i > j) std::swap(i, j);
  // rows 0..i-1 contribute (p-1) + (p-2) + ... + (p-i)
  return i * p - i * (i + 1) / 2 + (j - i - 1);
}

void AuxiliaryCovariates::set(int i, int j, std::span<const double> w) {
  if (i == j || i < 0 || j < 0 || i >= p_ || j >= p_)
    throw Error(ErrorCode::kIndexOutOfRange, "auxiliary pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
  if (static_cast<int>(w.size()) != q_) throw Error(ErrorCode::kDimensionMismatch, "auxiliary vector length");
  const int idx = pair_index(i, j, p_);
  for (int c = 0; c < q_; ++c) {
    if (!std::isfinite(w[c])) throw Error(ErrorCode::kParseError, "non-finite auxiliary value");
    table_(idx, c) = w[c];
  }
  defined_[idx] = 1;
}

bool AuxiliaryCovariates::has(int i, int j) const {
  if (i == j) return false;
  return defined_[pair_index(i, j, p_)] != 0;
}

Eigen::VectorXd AuxiliaryCovariates::get(int i, int j) const {
  if (!has(i, j))
    throw Error(ErrorCode::kNoAuxCoverage, "no covariates for pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
  return table_.row(pair_index(i, j, p_)).transpose();
}

bool AuxiliaryCovariates::complete() const { return missing_count() == 0; }

int AuxiliaryCovariates::missing_count() const {
  return static_cast<int>(std::count(defined_.begin(), defined_.end(), 0));
}

Eigen::MatrixXd AuxiliaryCovariates::rows(std::span<const IndexPair> pairs) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(pairs.size()), q_);
  for (size_t r = 0; r < pairs.size(); ++r) {
    const auto [i, j] = pairs[r];
    if (!has(i, j))
      throw Error(ErrorCode::kNoAuxCoverage, "no covariates for pair (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
    out.row(r) = table_.row(pair_index(i, j, p_));
  }
  return out;
}

// ---------------------------------------------------------------------------
// File ingestion

namespace {

bool is_missing(const std::string& field) { return field.empty() || field == "NA"; }

std::vector<std::string> checked_header(const csv::Row& header, const fs::path& path) {
  std::vector<std::string> names = header.fields;
  for (size_t c = 0; c < names.size(); ++c)
    if (names[c].empty())
      throw Error(ErrorCode::kParseError, path.filename().string() + " line " + std::to_string(header.line) +
                                              ": unnamed column " + std::to_string(c + 1));
  return names;
}

IncompleteDataset load_long_csv(const fs::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw Error(ErrorCode::kParseError, path.filename().string() + ": empty file");
  const auto names = checked_header(rows.front(), path);
  const int p = static_cast<int>(names.size());

  // Group samples by their observed set, in order of first appearance.
  std::map<VarSet, int> group_of;
  std::vector<VarSet> subsets;
  std::vector<std::vector<std::vector<double>>> groups;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (static_cast<int>(row.fields.size()) != p)
      throw Error(ErrorCode::kInconsistentColumns, path.filename().string() + " line " + std::to_string(row.line) +
                                                       ": expected " + std::to_string(p) + " fields, got " +
                                                       std::to_string(row.fields.size()));
    VarSet observed;
    std::vector<double> vals;
    for (int c = 0; c < p; ++c) {
      if (is_missing(row.fields[c])) continue;
      const auto v = csv::parse_double(row.fields[c]);
      if (!v)
        throw Error(ErrorCode::kParseError, path.filename().string() + " line " + std::to_string(row.line) +
                                                ": bad number '" + row.fields[c] + "'");
      observed.push_back(c);
      vals.push_back(*v);
    }
    if (observed.empty()) continue;  // a sample with nothing observed carries no information
    auto [it, inserted] = group_of.emplace(observed, static_cast<int>(subsets.size()));
    if (inserted) {
      subsets.push_back(observed);
      groups.emplace_back();
    }
    groups[it->second].push_back(std::move(vals));
  }
  if (subsets.empty()) throw Error(ErrorCode::kParseError, path.filename().string() + ": no data rows");

  std::vector<char> seen(p, 0);
  for (const auto& s : subsets)
    for (int v : s) seen[v] = 1;
  for (int v = 0; v < p; ++v)
    if (!seen[v]) throw Error(ErrorCode::kNoObservations, "variable '" + names[v] + "' is never observed");

  std::vector<Eigen::MatrixXd> blocks;
  for (size_t g = 0; g < groups.size(); ++g) {
    Eigen::MatrixXd b(static_cast<Eigen::Index>(groups[g].size()), static_cast<Eigen::Index>(subsets[g].size()));
    for (size_t r = 0; r < groups[g].size(); ++r)
      for (size_t c = 0; c < subsets[g].size(); ++c) b(r, c) = groups[g][r][c];
    blocks.push_back(std::move(b));
  }
  return IncompleteDataset::from_blocks(p, subsets, blocks, names);
}

IncompleteDataset load_block_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::kParseError, dir.string() + ": no .csv files");

  std::vector<std::string> names;
  std::unordered_map<std::string, int> index_of;
  std::vector<VarSet> subsets;
  std::vector<Eigen::MatrixXd> blocks;
  for (const auto& file : files) {
    const auto rows = csv::read_file(file);
    if (rows.empty()) throw Error(ErrorCode::kParseError, file.filename().string() + ": empty file");
    const auto header = checked_header(rows.front(), file);
    VarSet vars;
    for (const auto& name : header) {
      auto [it, inserted] = index_of.emplace(name, static_cast<int>(names.size()));
      if (inserted) names.push_back(name);
      if (std::find(vars.begin(), vars.end(), it->second) != vars.end())
        throw Error(ErrorCode::kInconsistentColumns, file.filename().string() + ": duplicate column '" + name + "'");
      vars.push_back(it->second);
    }
    if (rows.size() < 2) throw Error(ErrorCode::kParseError, file.filename().string() + ": no data rows");
    Eigen::MatrixXd b(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(vars.size()));
    for (size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.fields.size() != vars.size())
        throw Error(ErrorCode::kInconsistentColumns, file.filename().string() + " line " + std::to_string(row.line) +
                                                         ": expected " + std::to_string(vars.size()) + " fields");
      for (size_t c = 0; c < vars.size(); ++c) {
        const auto v = csv::parse_double(row.fields[c]);
        if (!v)
          throw Error(ErrorCode::kParseError, file.filename().string() + " line " + std::to_string(row.line) +
                                                  ": bad number '" + row.fields[c] + "'");
        b(r - 1, c) = *v;
      }
    }
    subsets.push_back(std::move(vars));
    blocks.push_back(std::move(b));
  }
  return IncompleteDataset::from_blocks(static_cast<int>(names.size()), subsets, blocks, names);
}

}  // namespace

IncompleteDataset load_dataset(const fs::path& path, DataFormat format) {
  if (format == DataFormat::kAuto) format = fs::is_directory(path) ? DataFormat::kBlockDirectory : DataFormat::kLongCsv;
  if (!fs::exists(path)) throw Error(ErrorCode::kIoError, path.string() + " does not exist");
  return format == DataFormat::kBlockDirectory ? load_block_directory(path) : load_long_csv(path);
}

void save_dataset(const IncompleteDataset& data, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  const auto& names = data.names();
  for (size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << csv::quote_if_needed(names[c]);
  out << '\n';
  const auto& v = data.values();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      if (c) out << ',';
      out << (std::isnan(v(r, c)) ? std::string("NA") : csv::format_double(v(r, c)));
    }
    out << '\n';
  }
}

AuxiliaryCovariates load_aux(const fs::path& path, const std::vector<std::string>& names) {
  const auto rows = csv::read_file(path);
  const std::string fname = path.filename().string();
  if (rows.empty()) throw Error(ErrorCode::kParseError, fname + ": empty file");
  const auto& header = rows.front().fields;
  if (header.size() < 3 || header[0] != "i" || header[1] != "j")
    throw Error(ErrorCode::kParseError, fname + " line " + std::to_string(rows.front().line) +
                                            ": header must be i,j,w1,...,wq");
  const int p = static_cast<int>(names.size());
  const int q = static_cast<int>(header.size()) - 2;
  std::unordered_map<std::string, int> index_of;
  for (int v = 0; v < p; ++v) index_of.emplace(names[v], v);

  auto resolve = [&](const std::string& field, int line) {
    if (auto it = index_of.find(field); it != index_of.end()) return it->second;
    const auto num = csv::parse_double(field);
    if (num && *num == std::floor(*num) && *num >= 1 && *num <= p) return static_cast<int>(*num) - 1;
    throw Error(ErrorCode::kParseError, fname + " line " + std::to_string(line) + ": unknown variable '" + field + "'");
  };

  AuxiliaryCovariates aux(p, q);
  std::vector<double> w(q);
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (static_cast<int>(row.fields.size()) != q + 2)
      throw Error(ErrorCode::kParseError, fname + " line " + std::to_string(row.line) + ": expected " +
                                              std::to_string(q + 2) + " fields");
    const int i = resolve(row.fields[0], row.line);
    const int j = resolve(row.fields[1], row.line);
    if (i == j) throw Error(ErrorCode::kParseError, fname + " line " + std::to_string(row.line) + ": i equals j");
    if (aux.has(i, j)) throw Error(ErrorCode::kParseError, fname + " line " + std::to_string(row.line) + ": duplicate pair");
    for (int c = 0; c < q; ++c) {
      const auto v = csv::parse_double(row.fields[c + 2]);
      if (!v)
        throw Error(ErrorCode::kParseError, fname + " line " + std::to_string(row.line) + ": bad number '" +
                                                row.fields[c + 2] + "'");
      w[c] = *v;
    }
    aux.set(i, j, w);
  }
  return aux;
}

void save_aux(const AuxiliaryCovariates& aux, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "i,j";
  for (int c = 0; c < aux.q(); ++c) out << ",w" << (c + 1);
  out << '\n';
  for (int i = 0; i < aux.p(); ++i) {
    for (int j = i + 1; j < aux.p(); ++j) {
      if (!aux.has(i, j)) continue;
      out << (i + 1) << ',' << (j + 1);
      const auto w = aux.get(i, j);
      for (int c = 0; c < aux.q(); ++c) out << ',' << csv::format_double(w(c));
      out << '\n';
    }
  }
}

}  // namespace auxcov
