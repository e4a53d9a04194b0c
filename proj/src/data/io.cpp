#include "rfr/data/io.hpp"

#include <fstream>
#include <unordered_map>
#include <vector>

#include "rfr/util/numeric.hpp"

namespace rfr {

namespace {

struct CsvReader {
  std::string path;
  std::ifstream in;
  long line_no = 0;

  explicit CsvReader(const std::string& p) : path(p), in(p) {
    if (!in) throw DataError("cannot open '" + path + "'");
  }

  std::string where() const { return path + ":" + std::to_string(line_no); }

  [[noreturn]] void fail(const std::string& msg) const { throw DataError(where() + ": " + msg); }

  bool next_row(std::vector<std::string>& fields) {
    std::string line;
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fields.clear();
    std::size_t start = 0;
    for (;;) {
      const std::size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    return true;
  }

  void expect_header(const std::string& expected) {
    std::vector<std::string> fields;
    if (!next_row(fields)) fail("missing header row");
    std::string got;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) got += ',';
      got += fields[i];
    }
    if (got != expected) fail("expected header '" + expected + "', got '" + got + "'");
  }

  double number(const std::string& field, const char* what) const {
    try {
      return parse_double(field);
    } catch (const std::invalid_argument&) {
      fail(std::string("bad ") + what + " '" + field + "'");
    }
  }

  long integer(const std::string& field, const char* what) const {
    try {
      return parse_long(field);
    } catch (const std::invalid_argument&) {
      fail(std::string("bad ") + what + " '" + field + "'");
    }
  }
};

}  // namespace

RecurrenceDataset ingest_csv(const std::string& events_path, const std::string& covariates_path,
                             const std::string& sensors_path) {
  RecurrenceDataset data;
  std::unordered_map<std::string, int> index;

  {
    CsvReader cov(covariates_path);
    std::vector<std::string> fields;
    if (!cov.next_row(fields)) cov.fail("missing header row");
    if (fields.size() < 2 || fields[0] != "id" || fields[1] != "censor_time") {
      cov.fail("expected header 'id,censor_time[,name...]'");
    }
    data.covariate_names.assign(fields.begin() + 2, fields.end());
    const std::size_t width = fields.size();
    while (cov.next_row(fields)) {
      if (fields.size() != width) {
        cov.fail("expected " + std::to_string(width) + " fields, got " +
                 std::to_string(fields.size()));
      }
      SystemRecord rec;
      rec.id = fields[0];
      if (rec.id.empty()) cov.fail("empty id");
      rec.censor_time = cov.number(fields[1], "censor_time");
      for (std::size_t j = 2; j < width; ++j) {
        rec.static_covariates.push_back(cov.number(fields[j], "covariate"));
      }
      if (!index.emplace(rec.id, data.n()).second) cov.fail("duplicate id '" + rec.id + "'");
      data.systems.push_back(std::move(rec));
    }
  }

  {
    CsvReader ev(events_path);
    ev.expect_header("id,time");
    std::vector<std::string> fields;
    while (ev.next_row(fields)) {
      if (fields.size() != 2) ev.fail("expected 2 fields, got " + std::to_string(fields.size()));
      auto it = index.find(fields[0]);
      if (it == index.end()) ev.fail("id '" + fields[0] + "' not present in covariates file");
      data.systems[it->second].failure_times.push_back(ev.number(fields[1], "time"));
    }
  }

  if (!sensors_path.empty()) {
    CsvReader sen(sensors_path);
    sen.expect_header("id,channel,time,value");
    std::vector<std::string> fields;
    long max_channel = 0;
    std::vector<std::vector<CovariateSeries>> channels(data.systems.size());
    while (sen.next_row(fields)) {
      if (fields.size() != 4) sen.fail("expected 4 fields, got " + std::to_string(fields.size()));
      auto it = index.find(fields[0]);
      if (it == index.end()) sen.fail("id '" + fields[0] + "' not present in covariates file");
      const long ch = sen.integer(fields[1], "channel");
      if (ch < 1 || ch > 4096) sen.fail("channel must be in 1..4096, got " + fields[1]);
      auto& sys_channels = channels[it->second];
      if (static_cast<long>(sys_channels.size()) < ch) sys_channels.resize(ch);
      max_channel = std::max(max_channel, ch);
      sys_channels[ch - 1].times.push_back(sen.number(fields[2], "time"));
      sys_channels[ch - 1].values.push_back(sen.number(fields[3], "value"));
    }
    if (max_channel > 0) {
      for (std::size_t i = 0; i < data.systems.size(); ++i) {
        channels[i].resize(max_channel);
        for (long ch = 0; ch < max_channel; ++ch) {
          if (channels[i][ch].times.empty()) {
            throw DataError(sensors_path + ": system '" + data.systems[i].id +
                            "' has no samples for channel " + std::to_string(ch + 1));
          }
        }
        data.systems[i].dynamic_covariates = std::move(channels[i]);
      }
    }
  }

  validate_dataset(data);
  return data;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

}  // namespace

void export_csv(const RecurrenceDataset& data, const std::string& events_path,
                const std::string& covariates_path, const std::string& sensors_path) {
  {
    auto out = open_out(covariates_path);
    out << "id,censor_time";
    for (const auto& name : data.covariate_names) out << ',' << name;
    out << '\n';
    for (const auto& rec : data.systems) {
      out << rec.id << ',' << format_double(rec.censor_time);
      for (double x : rec.static_covariates) out << ',' << format_double(x);
      out << '\n';
    }
  }
  {
    auto out = open_out(events_path);
    out << "id,time\n";
    for (const auto& rec : data.systems) {
      for (double t : rec.failure_times) out << rec.id << ',' << format_double(t) << '\n';
    }
  }
  if (data.q() > 0) {
    if (sensors_path.empty()) throw DataError("dataset has dynamic channels but no sensors path");
    auto out = open_out(sensors_path);
    out << "id,channel,time,value\n";
    for (const auto& rec : data.systems) {
      for (std::size_t ch = 0; ch < rec.dynamic_covariates.size(); ++ch) {
        const auto& series = rec.dynamic_covariates[ch];
        for (std::size_t k = 0; k < series.times.size(); ++k) {
          out << rec.id << ',' << (ch + 1) << ',' << format_double(series.times[k]) << ','
              << format_double(series.values[k]) << '\n';
        }
      }
    }
  }
}

}  // namespace rfr
