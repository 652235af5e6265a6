#include "klrisk/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "klrisk/error.hpp"

namespace klrisk {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  // trailing blank lines carry no rows
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto end = line.find(',', start);
    if (end == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, end - start)));
    start = end + 1;
  }
  return fields;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::string row_error(std::size_t row, const std::string& what) {
  return "row " + std::to_string(row) + ": " + what;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset::Dataset(std::vector<Observation> observations)
    : observations_(std::move(observations)) {
  if (observations_.empty()) throw EmptyDataError("dataset has no observations");
  covariate_dim_ = observations_.front().covariates.size();
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    const auto& o = observations_[i];
    if (o.covariates.size() != covariate_dim_)
      throw FormatError(row_error(i + 1, "covariate count differs from first row"));
    if (!std::isfinite(o.time))
      throw DomainError(row_error(i + 1, "time is not finite"));
  }
}

std::size_t Dataset::events() const {
  return static_cast<std::size_t>(std::count_if(
      observations_.begin(), observations_.end(),
      [](const Observation& o) { return o.is_event(); }));
}

double Dataset::max_time() const {
  double m = observations_.front().time;
  for (const auto& o : observations_) m = std::max(m, o.time);
  return m;
}

double Dataset::total_time() const {
  double s = 0.0;
  for (const auto& o : observations_) s += o.time;
  return s;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  std::vector<Observation> picked;
  picked.reserve(rows.size());
  for (auto r : rows) picked.push_back(observations_.at(r));
  return Dataset(std::move(picked));
}

GroupedDataset::GroupedDataset(std::vector<Subject> subjects)
    : subjects_(std::move(subjects)) {
  if (subjects_.empty()) throw EmptyDataError("grouped dataset has no subjects");
  for (const auto& s : subjects_) {
    if (s.outcomes.empty())
      throw FormatError("subject " + s.id + " has no outcomes");
    for (double y : s.outcomes)
      if (!std::isfinite(y)) throw DomainError("subject " + s.id + ": outcome not finite");
  }
}

std::size_t GroupedDataset::total_outcomes() const {
  std::size_t n = 0;
  for (const auto& s : subjects_) n += s.outcomes.size();
  return n;
}

Dataset parse_dataset(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw FormatError("missing header line");
  const auto header = split_fields(lines.front());
  if (header.size() < 2 || header[0] != "time" || header[1] != "status")
    throw FormatError("header must start with `time,status`");
  const std::size_t width = header.size();

  std::vector<Observation> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t row = li;
    const auto fields = split_fields(lines[li]);
    if (fields.size() != width)
      throw FormatError(row_error(row, "expected " + std::to_string(width) + " fields"));
    double time = 0.0;
    if (!parse_double(fields[0], time))
      throw FormatError(row_error(row, "time is not a number: `" + std::string(fields[0]) + "`"));
    Status status;
    if (fields[1] == "1") {
      status = Status::exact;
    } else if (fields[1] == "0") {
      status = Status::right_censored;
    } else {
      throw FormatError(row_error(row, "status must be 0 or 1, got `" + std::string(fields[1]) + "`"));
    }
    std::vector<double> z(width - 2);
    for (std::size_t k = 2; k < width; ++k)
      if (!parse_double(fields[k], z[k - 2]))
        throw FormatError(row_error(row, "covariate `" + std::string(header[k]) + "` is not a number"));
    rows.push_back({time, status, std::move(z)});
  }
  if (rows.empty()) throw EmptyDataError("dataset has a header but no rows");
  return Dataset(std::move(rows));
}

GroupedDataset parse_grouped(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw FormatError("missing header line");
  const auto header = split_fields(lines.front());
  if (header.size() != 2 || header[0] != "subject" || header[1] != "y")
    throw FormatError("header must be `subject,y`");

  std::vector<Subject> subjects;
  std::unordered_set<std::string> closed;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_fields(lines[li]);
    if (fields.size() != 2) throw FormatError(row_error(li, "expected 2 fields"));
    if (fields[0].empty()) throw FormatError(row_error(li, "empty subject id"));
    double y = 0.0;
    if (!parse_double(fields[1], y))
      throw FormatError(row_error(li, "y is not a number: `" + std::string(fields[1]) + "`"));
    std::string id(fields[0]);
    if (subjects.empty() || subjects.back().id != id) {
      if (!subjects.empty()) closed.insert(subjects.back().id);
      if (closed.contains(id))
        throw FormatError(row_error(li, "subject " + id + " split into non-contiguous blocks"));
      subjects.push_back({id, {}});
    }
    subjects.back().outcomes.push_back(y);
  }
  if (subjects.empty()) throw EmptyDataError("grouped dataset has a header but no rows");
  return GroupedDataset(std::move(subjects));
}

std::string serialize_dataset(const Dataset& data) {
  std::ostringstream out;
  out << "time,status";
  for (std::size_t k = 0; k < data.covariate_dim(); ++k) out << ",z" << (k + 1);
  out << '\n';
  for (const auto& o : data) {
    out << format_double(o.time) << ',' << (o.is_event() ? '1' : '0');
    for (double z : o.covariates) out << ',' << format_double(z);
    out << '\n';
  }
  return out.str();
}

std::string serialize_grouped(const GroupedDataset& data) {
  std::ostringstream out;
  out << "subject,y\n";
  for (const auto& s : data)
    for (double y : s.outcomes) out << s.id << ',' << format_double(y) << '\n';
  return out.str();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open `" + path + "`");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace klrisk
