#include "cads/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cads {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_double(const std::string& s, const std::string& context) {
  double v;
  const auto* end = s.data() + s.size();
  const auto result = std::from_chars(s.data(), end, v);
  if (result.ec != std::errc() || result.ptr != end) {
    throw std::runtime_error("bad numeric field '" + s + "' in " + context);
  }
  return v;
}

int parse_int(const std::string& s, const std::string& context) {
  int v;
  const auto* end = s.data() + s.size();
  const auto result = std::from_chars(s.data(), end, v);
  if (result.ec != std::errc() || result.ptr != end) {
    throw std::runtime_error("bad integer field '" + s + "' in " + context);
  }
  return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open csv: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

void write_samples_csv(const std::filesystem::path& path,
                       const std::vector<ChainResult>& results) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write csv: " + path.string());
  os << "label,chain,x0,x1\n";
  char buf[160];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g\n", r.label, r.chain,
                  r.point[0], r.point[1]);
    os << buf;
  }
  if (!os) throw std::runtime_error("csv write failed: " + path.string());
}

std::vector<ChainResult> read_samples_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "label,chain,x0,x1") {
    throw std::runtime_error("samples csv missing 'label,chain,x0,x1' header: " +
                             path.string());
  }
  std::vector<ChainResult> out;
  out.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_line(lines[i]);
    if (fields.size() != 4) {
      throw std::runtime_error("samples csv row with " +
                               std::to_string(fields.size()) + " fields in " +
                               path.string());
    }
    ChainResult r;
    r.label = parse_int(fields[0], path.string());
    r.chain = parse_int(fields[1], path.string());
    r.point[0] = parse_double(fields[2], path.string());
    r.point[1] = parse_double(fields[3], path.string());
    out.push_back(std::move(r));
  }
  return out;
}

void write_dataset_csv(const std::filesystem::path& path,
                       const std::vector<LabeledSample>& samples) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write csv: " + path.string());
  os << "label,x0,x1\n";
  char buf[128];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", s.label, s.point[0],
                  s.point[1]);
    os << buf;
  }
  if (!os) throw std::runtime_error("csv write failed: " + path.string());
}

std::vector<LabeledSample> read_dataset_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "label,x0,x1") {
    throw std::runtime_error("dataset csv missing 'label,x0,x1' header: " +
                             path.string());
  }
  std::vector<LabeledSample> out;
  out.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_line(lines[i]);
    if (fields.size() != 3) {
      throw std::runtime_error("dataset csv row with " +
                               std::to_string(fields.size()) + " fields in " +
                               path.string());
    }
    LabeledSample s;
    s.label = parse_int(fields[0], path.string());
    s.point[0] = parse_double(fields[1], path.string());
    s.point[1] = parse_double(fields[2], path.string());
    out.push_back(s);
  }
  return out;
}

}  // namespace cads
