#include "popadj/io.hpp"

#include "popadj/config.hpp"
#include "popadj/error.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>

namespace popadj {

namespace {

void write_row(std::ostream& os, const Eigen::RowVectorXd& row) {
  for (Eigen::Index j = 0; j < row.size(); ++j) os << (j ? "," : "") << row[j];
}

std::string covariate_header(Eigen::Index k) {
  std::string h;
  for (Eigen::Index j = 0; j < k; ++j) h += (j ? ",x" : "x") + std::to_string(j + 1);
  return h;
}

}  // namespace

void write_ipd_csv(std::ostream& os, const IpdTrial& t) {
  os.precision(17);
  os << covariate_header(t.k()) << ",z,y\n";
  for (Eigen::Index i = 0; i < t.n(); ++i) {
    write_row(os, t.x.row(i));
    os << "," << t.z[i] << "," << t.y[i] << "\n";
  }
}

IpdTrial read_ipd_csv(std::istream& is, const IndexSet& em_idx) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("IPD CSV: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_list(line);
  const auto cols = static_cast<Eigen::Index>(header.size());
  if (cols < 3 || header[cols - 2] != "z" || header[cols - 1] != "y")
    throw ConfigError("IPD CSV: header must be x1..xK,z,y");
  for (Eigen::Index j = 0; j < cols - 2; ++j)
    if (header[j] != "x" + std::to_string(j + 1))
      throw ConfigError("IPD CSV: unexpected column '" + header[j] + "'");
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_list(line);
    if (static_cast<Eigen::Index>(fields.size()) != cols)
      throw ConfigError("IPD CSV: row " + std::to_string(rows + 1) + " has " +
                        std::to_string(fields.size()) + " fields, expected " + std::to_string(cols));
    for (Eigen::Index j = 0; j < cols; ++j) values.push_back(parse_double(header[j], fields[j]));
    ++rows;
  }
  const Eigen::MatrixXd m =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), rows, cols);
  IpdTrial t;
  t.x = m.leftCols(cols - 2);
  t.z = m.col(cols - 2);
  t.y = m.col(cols - 1);
  t.em_idx = em_idx;
  validate(t);
  return t;
}

void write_pseudo_csv(std::ostream& os, const PseudoPopulation& p) {
  os.precision(17);
  os << covariate_header(p.xstar.cols()) << "\n";
  for (Eigen::Index i = 0; i < p.n_star(); ++i) {
    write_row(os, p.xstar.row(i));
    os << "\n";
  }
}

std::string ald_to_json(const AldSummary& ald) {
  nlohmann::ordered_json j;
  j["cov_means"] = std::vector<double>(ald.cov_means.data(), ald.cov_means.data() + ald.cov_means.size());
  j["cov_sds"] = std::vector<double>(ald.cov_sds.data(), ald.cov_sds.data() + ald.cov_sds.size());
  std::vector<long> em;
  for (auto i : ald.em_idx) em.push_back(static_cast<long>(i) + 1);
  j["em_idx"] = em;
  j["events_active"] = ald.events_active;
  j["n_active"] = ald.n_active;
  j["events_control"] = ald.events_control;
  j["n_control"] = ald.n_control;
  if (ald.corr) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < ald.corr->rows(); ++r) {
      const Eigen::RowVectorXd row = ald.corr->row(r);
      rows.push_back(std::vector<double>(row.data(), row.data() + row.size()));
    }
    j["corr"] = rows;
  } else {
    j["corr"] = "from-IPD";
  }
  return j.dump(2) + "\n";
}

AldSummary ald_from_json(const std::string& text) {
  AldSummary ald;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto means = j.at("cov_means").get<std::vector<double>>();
    const auto sds = j.at("cov_sds").get<std::vector<double>>();
    ald.cov_means = Eigen::Map<const Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
    ald.cov_sds = Eigen::Map<const Eigen::VectorXd>(sds.data(), static_cast<Eigen::Index>(sds.size()));
    for (long i : j.at("em_idx").get<std::vector<long>>()) ald.em_idx.push_back(i - 1);
    ald.events_active = j.at("events_active").get<int>();
    ald.n_active = j.at("n_active").get<int>();
    ald.events_control = j.at("events_control").get<int>();
    ald.n_control = j.at("n_control").get<int>();
    if (j.contains("corr")) {
      const auto& c = j.at("corr");
      if (c.is_string()) {
        if (c.get<std::string>() != "from-IPD") throw ConfigError("ALD JSON: corr must be a matrix or \"from-IPD\"");
      } else {
        const auto rows = c.get<std::vector<std::vector<double>>>();
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (rows[r].size() != rows.size()) throw ConfigError("ALD JSON: corr must be square");
          for (std::size_t s = 0; s < rows.size(); ++s)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) = rows[r][s];
        }
        ald.corr = m;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ALD JSON: ") + e.what());
  }
  validate(ald);
  return ald;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

void write_scenario_outputs(const std::string& dir, const ScenarioResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "'");
  const std::string base = (std::filesystem::path(dir) / result.config.name()).string();
  const std::span<const ScenarioResult> one(&result, 1);
  std::ostringstream csv, reps;
  write_report_csv(csv, one);
  write_replicates_csv(reps, result);
  write_text_file(base + ".csv", csv.str());
  write_text_file(base + ".json", report_json(one) + "\n");
  write_text_file(base + "_replicates.csv", reps.str());
}

std::optional<ScenarioResult> read_scenario_outputs(const std::string& dir, const ScenarioConfig& cfg) {
  const std::string base = (std::filesystem::path(dir) / cfg.name()).string();
  if (!std::filesystem::exists(base + ".json") || !std::filesystem::exists(base + "_replicates.csv"))
    return std::nullopt;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(base + ".json")).at(0);
    if (j.at("n_replicates").get<int>() != cfg.n_replicates ||
        j.at("master_seed").get<std::uint64_t>() != cfg.master_seed ||
        j.at("settings") != nlohmann::json::parse(settings_json(cfg)))
      return std::nullopt;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
  std::istringstream is(read_text_file(base + "_replicates.csv"));
  ScenarioResult res;
  res.config = cfg;
  res.records = read_replicates_csv(is);
  for (auto m : cfg.methods) {
    const auto it = res.records.find(m);
    if (it == res.records.end() || it->second.size() != static_cast<std::size_t>(cfg.n_replicates))
      return std::nullopt;
  }
  res.report = build_report(res.records);
  res.seconds = j.at("seconds").get<double>();
  return res;
}

}  // namespace popadj
