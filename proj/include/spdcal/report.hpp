#pragma once

// Structured key-value reports. Every line is `key = value`, keys are unique,
// so a report can be read back with KeyValueFile.
//
// Schema (spdcal-report/1):
//   report.schema, report.command        fixed header
//   input.<name>.path / .sha256          one pair per input file
//   calibration.version                  when constants are involved
//   option.<name>                        every analysis choice in effect
//   result.<name>                        values; uncertainties as .u (k=1)
//   budget.<NN>                          component | type | rel_u_% | variance_share_%
//   warning.<NN>                         diagnostics

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "spdcal/debudget.hpp"
#include "spdcal/quantities.hpp"

namespace spdcal {

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const std::string& bytes);

class Report {
public:
  explicit Report(std::string command);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, const Uncertain& x);  // key and key.u
  void input(const std::string& name, const std::filesystem::path& path);
  void budget(const debudget::Budget& b);
  void warnings(const Warnings& w);

  std::string to_text() const;

private:
  std::vector<std::pair<std::string, std::string>> lines_;
  std::size_t n_warnings_ = 0;
};

}  // namespace spdcal
