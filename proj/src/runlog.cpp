#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "ofs/errors.hpp"
#include "ofs/optimizers.hpp"

namespace ofs {

namespace {

double parse_double(const std::string& s, const std::string& path) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw InvalidInput(path + ": bad number '" + s + "'");
  return v;
}

Candidate parse_genes(const std::string& s, const std::string& path) {
  Candidate c;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) throw InvalidInput(path + ": empty gene");
    c.genes.push_back(static_cast<FilterIndex>(std::stol(item)));
  }
  return c;
}

}  // namespace

std::string runlog_csv(const RunLog& log) {
  fmt::memory_buffer out;
  fmt::format_to(std::back_inserter(out), "t,f,g,genes\n");
  for (const auto& r : log.records)
    fmt::format_to(std::back_inserter(out), "{},{},{},{}\n", r.t, r.f, r.g, fmt::join(r.candidate.genes, ";"));

  nlohmann::json footer{{"best", log.best.genes},
                        {"best_value", log.best_value},
                        {"seed", log.seed},
                        {"config", log.config},
                        {"context", log.context}};
  fmt::format_to(std::back_inserter(out), "# {}\n", footer.dump());
  return fmt::to_string(out);
}

void write_runlog(const RunLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << runlog_csv(log);
  if (!out) throw IoError("write failed for " + path);
}

RunLog read_runlog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  RunLog log;
  std::string line;
  if (!std::getline(in, line) || line != "t,f,g,genes") throw InvalidInput(path + ": missing t,f,g,genes header");
  bool footer = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto j = nlohmann::json::parse(line.substr(2));
      log.best.genes = j.at("best").get<std::vector<FilterIndex>>();
      log.best_value = j.at("best_value").is_null() ? std::numeric_limits<double>::infinity()
                                                    : j.at("best_value").get<double>();
      log.seed = j.at("seed").get<std::uint64_t>();
      log.config = j.at("config");
      log.context = j.at("context");
      footer = true;
      continue;
    }
    std::stringstream ss(line);
    std::string t, f, g, genes;
    if (!std::getline(ss, t, ',') || !std::getline(ss, f, ',') || !std::getline(ss, g, ',') || !std::getline(ss, genes))
      throw InvalidInput(path + ": malformed row '" + line + "'");
    log.records.push_back(LogRecord{static_cast<std::size_t>(std::stoull(t)), parse_double(f, path),
                                    parse_double(g, path), parse_genes(genes, path)});
  }
  if (!footer) throw InvalidInput(path + ": missing JSON footer");
  return log;
}

}  // namespace ofs
