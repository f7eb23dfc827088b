#include "sepq/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace sepq {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& s, int row, const char* field) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError(row, std::string("cannot parse ") + field + " from '" + s + "'");
  }
}

const char* censor_name(CensorKind k) {
  switch (k) {
    case CensorKind::observed: return "obs";
    case CensorKind::left: return "left";
    case CensorKind::right: return "right";
    case CensorKind::interval: return "interval";
  }
  return "obs";
}

}  // namespace

Dataset Dataset::from_observations(std::vector<Observation> obs,
                                   std::vector<std::string> labels) {
  if (obs.empty()) throw std::invalid_argument("dataset must contain at least one observation");

  int max_subject = 0;
  std::size_t n_cov = obs.front().covariates.size();
  for (const auto& o : obs) {
    if (o.subject < 0) throw std::invalid_argument("subject indices must be nonnegative");
    if (!std::isfinite(o.time)) throw std::invalid_argument("observation times must be finite");
    if (o.covariates.size() != n_cov)
      throw std::invalid_argument("covariate vectors must have a common length");
    if (o.censor == CensorKind::interval && !(o.response < o.upper))
      throw std::invalid_argument("interval censoring requires lower < upper");
    max_subject = std::max(max_subject, o.subject);
  }

  std::stable_sort(obs.begin(), obs.end(),
                   [](const Observation& a, const Observation& b) { return a.subject < b.subject; });

  Dataset ds;
  ds.obs_ = std::move(obs);
  ds.n_cov_ = static_cast<int>(n_cov);
  ds.offsets_.assign(max_subject + 2, 0);
  for (const auto& o : ds.obs_) ds.offsets_[o.subject + 1]++;
  for (int i = 0; i <= max_subject; ++i) {
    if (ds.offsets_[i + 1] == 0)
      throw std::invalid_argument("subject indices must be contiguous from 0 (no empty subjects)");
    ds.offsets_[i + 1] += ds.offsets_[i];
  }

  if (labels.empty()) {
    for (int i = 0; i <= max_subject; ++i) labels.push_back(std::to_string(i + 1));
  }
  if (static_cast<int>(labels.size()) != max_subject + 1)
    throw std::invalid_argument("subject label count does not match subject count");
  ds.labels_ = std::move(labels);
  return ds;
}

Dataset Dataset::read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line)) throw SchemaError(1, "missing header line");
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  if (header.size() < 5 || header[0] != "subject_id" || header[1] != "time" ||
      header[2] != "response" || header[3] != "censor" || header[4] != "bound2")
    throw SchemaError(1, "header must start with subject_id,time,response,censor,bound2");
  const int n_cov = static_cast<int>(header.size()) - 5;

  std::vector<Observation> obs;
  std::vector<std::string> labels;
  std::map<std::string, int> subject_index;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != 5 + n_cov)
      throw SchemaError(row, "expected " + std::to_string(5 + n_cov) + " fields, got " +
                                 std::to_string(fields.size()));
    for (auto& f : fields) f = trim(f);

    Observation o;
    const std::string& label = fields[0];
    if (label.empty()) throw SchemaError(row, "empty subject_id");
    auto it = subject_index.find(label);
    if (it == subject_index.end()) {
      it = subject_index.emplace(label, static_cast<int>(labels.size())).first;
      labels.push_back(label);
    }
    o.subject = it->second;
    o.time = parse_double(fields[1], row, "time");
    o.response = parse_double(fields[2], row, "response");

    const std::string& censor = fields[3];
    if (censor == "obs") o.censor = CensorKind::observed;
    else if (censor == "left") o.censor = CensorKind::left;
    else if (censor == "right") o.censor = CensorKind::right;
    else if (censor == "interval") o.censor = CensorKind::interval;
    else throw SchemaError(row, "censor must be obs|left|right|interval, got '" + censor + "'");

    if (o.censor == CensorKind::interval) {
      if (fields[4].empty()) throw SchemaError(row, "interval rows require bound2");
      o.upper = parse_double(fields[4], row, "bound2");
      if (!(o.response < o.upper)) throw SchemaError(row, "interval requires response < bound2");
    } else if (!fields[4].empty()) {
      throw SchemaError(row, "bound2 must be empty unless censor=interval");
    }

    o.covariates.resize(n_cov);
    for (int k = 0; k < n_cov; ++k)
      o.covariates[k] = parse_double(fields[5 + k], row, header[5 + k].c_str());
    obs.push_back(std::move(o));
  }
  if (obs.empty()) throw SchemaError(row + 1, "no data rows");

  try {
    return from_observations(std::move(obs), std::move(labels));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(row, e.what());
  }
}

void Dataset::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "subject_id,time,response,censor,bound2";
  for (int k = 0; k < n_cov_; ++k) out << ",cov" << k + 1;
  out << "\n";
  for (const auto& o : obs_) {
    out << labels_[o.subject] << ',' << o.time << ',' << o.response << ','
        << censor_name(o.censor) << ',';
    if (o.censor == CensorKind::interval) out << o.upper;
    for (const auto& c : o.covariates) out << ',' << c;
    out << "\n";
  }
}

}  // namespace sepq
