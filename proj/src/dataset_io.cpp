#include "ebproxy/dataset_io.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace ebproxy {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    fields.push_back(trim(field));
  }
  if (!line.empty() && line.back() == ',') {
    fields.push_back("");
  }
  return fields;
}

long parse_long(const std::string& token, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const long value = std::strtol(token.c_str(), &end, 10);
  if (token.empty() || end != token.c_str() + token.size() || errno != 0) {
    throw ValidationError(where + ": expected an integer, got '" + token + "'");
  }
  return value;
}

double parse_double(const std::string& token, const std::string& where) {
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(token.c_str(), &end);
  if (token.empty() || end != token.c_str() + token.size() || errno != 0) {
    throw ValidationError(where + ": expected a number, got '" + token + "'");
  }
  return value;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open '" + path + "'");
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

LabeledDataset read_area_dataset(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) {
    throw ValidationError(path + ": file is empty, expected a header line");
  }

  std::vector<std::string> ids;
  std::vector<int> counts;
  std::vector<int> sizes;
  std::vector<std::vector<double>> covariate_rows;
  std::size_t num_covariates = 0;

  for (std::size_t lineno = 2; lineno <= lines.size(); ++lineno) {
    const std::string raw = trim(lines[lineno - 1]);
    if (raw.empty()) {
      continue;
    }
    const std::string where = path + ":" + std::to_string(lineno);
    const auto fields = split_csv(raw);
    if (fields.size() < 3) {
      throw ValidationError(where + ": expected at least 3 columns "
                            "(area_id,count,sample_size), got " +
                            std::to_string(fields.size()));
    }
    if (ids.empty()) {
      num_covariates = fields.size() - 3;
    } else if (fields.size() - 3 != num_covariates) {
      throw ValidationError(where + ": inconsistent column count");
    }
    ids.push_back(fields[0]);
    counts.push_back(static_cast<int>(parse_long(fields[1], where)));
    sizes.push_back(static_cast<int>(parse_long(fields[2], where)));
    std::vector<double> covs;
    for (std::size_t k = 3; k < fields.size(); ++k) {
      covs.push_back(parse_double(fields[k], where));
    }
    covariate_rows.push_back(std::move(covs));
  }

  if (ids.empty()) {
    throw ValidationError(path + ": no data rows");
  }

  const Eigen::Index n = static_cast<Eigen::Index>(ids.size());
  AreaDataset data;
  data.counts.resize(n);
  data.sample_sizes.resize(n);
  data.covariates.resize(n, static_cast<Eigen::Index>(num_covariates));
  for (Eigen::Index i = 0; i < n; ++i) {
    data.counts[i] = counts[static_cast<std::size_t>(i)];
    data.sample_sizes[i] = sizes[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < num_covariates; ++k) {
      data.covariates(i, static_cast<Eigen::Index>(k)) =
          covariate_rows[static_cast<std::size_t>(i)][k];
    }
  }

  LabeledDataset labeled;
  labeled.area_ids = std::move(ids);
  labeled.data = validate_dataset(std::move(data));
  return labeled;
}

Population read_population(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) {
    throw ValidationError(path + ": file is empty, expected a header line");
  }

  std::vector<double> p;
  std::vector<std::string> group_names;
  std::map<std::string, int> group_index;
  std::vector<int> groups;

  for (std::size_t lineno = 2; lineno <= lines.size(); ++lineno) {
    const std::string raw = trim(lines[lineno - 1]);
    if (raw.empty()) {
      continue;
    }
    const std::string where = path + ":" + std::to_string(lineno);
    const auto fields = split_csv(raw);
    if (fields.size() != 3) {
      throw ValidationError(where + ": expected 3 columns "
                            "(area_id,p,subquarter_id), got " +
                            std::to_string(fields.size()));
    }
    const double value = parse_double(fields[1], where);
    if (!(value > 0.0) || !(value < 1.0)) {
      throw ValidationError(where + ": proportion must lie strictly in "
                            "(0,1), got " + fields[1]);
    }
    p.push_back(value);
    auto [it, inserted] =
        group_index.emplace(fields[2], static_cast<int>(group_names.size()));
    if (inserted) {
      group_names.push_back(fields[2]);
    }
    groups.push_back(it->second);
  }

  if (p.size() < 2) {
    throw ValidationError(path + ": need at least 2 areas");
  }

  Population pop;
  pop.p = Eigen::Map<const Vector>(p.data(),
                                   static_cast<Eigen::Index>(p.size()));
  pop.subquarter = std::move(groups);
  compute_spatial_means(pop);
  pop.p_temporal = pop.p;
  return pop;
}

}  // namespace ebproxy
