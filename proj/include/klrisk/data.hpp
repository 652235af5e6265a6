#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace klrisk {

enum class Status { exact, right_censored };

/// One observed record: either the exact value x (event, delta = 1) or a
/// right-censoring time c (delta = 0), with optional covariates.
struct Observation {
  double time = 0.0;
  Status status = Status::exact;
  std::vector<double> covariates;

  static Observation exact(double x, std::vector<double> z = {}) {
    return {x, Status::exact, std::move(z)};
  }
  static Observation censored(double c, std::vector<double> z = {}) {
    return {c, Status::right_censored, std::move(z)};
  }

  bool is_event() const { return status == Status::exact; }
  bool operator==(const Observation&) const = default;
};

/// Non-empty iid sample with a common covariate dimension.
class Dataset {
 public:
  explicit Dataset(std::vector<Observation> observations);

  std::size_t size() const { return observations_.size(); }
  std::size_t covariate_dim() const { return covariate_dim_; }
  std::size_t events() const;
  bool has_censoring() const { return events() != size(); }
  double max_time() const;
  double total_time() const;

  const Observation& operator[](std::size_t i) const { return observations_[i]; }
  auto begin() const { return observations_.begin(); }
  auto end() const { return observations_.end(); }
  std::span<const Observation> observations() const { return observations_; }

  /// Sub-sample with the given row indices, in the given order.
  Dataset subset(std::span<const std::size_t> rows) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<Observation> observations_;
  std::size_t covariate_dim_ = 0;
};

struct Subject {
  std::string id;
  std::vector<double> outcomes;
  bool operator==(const Subject&) const = default;
};

/// Clustered outcomes, one block per subject.
class GroupedDataset {
 public:
  explicit GroupedDataset(std::vector<Subject> subjects);

  std::size_t size() const { return subjects_.size(); }
  std::size_t total_outcomes() const;
  const Subject& operator[](std::size_t i) const { return subjects_[i]; }
  auto begin() const { return subjects_.begin(); }
  auto end() const { return subjects_.end(); }

  bool operator==(const GroupedDataset&) const = default;

 private:
  std::vector<Subject> subjects_;
};

/// CSV with header `time,status[,z1,...,zk]`; status 1 = event, 0 = censored.
Dataset parse_dataset(std::string_view text);
/// CSV with header `subject,y`; each subject's rows must be contiguous.
GroupedDataset parse_grouped(std::string_view text);

std::string serialize_dataset(const Dataset& data);
std::string serialize_grouped(const GroupedDataset& data);

/// Reads a whole file; FormatError if it cannot be opened.
std::string read_text_file(const std::string& path);

}  // namespace klrisk
