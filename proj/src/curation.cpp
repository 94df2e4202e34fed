#include "locust/curation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace locust::curation {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::string lower_trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  std::string out = s.substr(a, b - a + 1);
  for (char& ch : out) ch = char(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

IngestResult ingest_presences(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);

  std::string line;
  if (!std::getline(f, line)) {
    throw Error(ErrorCode::MissingColumn, path + ": empty file, no header");
  }
  const std::vector<std::string> want = {"id", "lon", "lat", "date", "stage", "instar"};
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = lower_trim(h);
  for (const std::string& col : want) {
    if (std::find(header.begin(), header.end(), col) == header.end()) {
      throw Error(ErrorCode::MissingColumn, path + ": missing required column '" + col + "'");
    }
  }
  std::size_t idx[6];
  for (std::size_t k = 0; k < 6; ++k) {
    idx[k] = std::size_t(std::find(header.begin(), header.end(), want[k]) - header.begin());
  }

  IngestResult res;
  std::set<std::string> seen_ids;
  std::size_t row_no = 1;
  while (std::getline(f, line)) {
    ++row_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() < header.size()) {
      res.rejected.push_back({row_no, "too few fields"});
      continue;
    }
    const std::string id = cells[idx[0]];
    if (!seen_ids.insert(id).second) {
      std::ostringstream os;
      os << path << ": duplicate id '" << id << "' at row " << row_no;
      throw Error(ErrorCode::DuplicateId, os.str());
    }
    double lon, lat;
    if (!parse_double(cells[idx[1]], lon) || !parse_double(cells[idx[2]], lat)) {
      res.rejected.push_back({row_no, "unparseable coordinates"});
      continue;
    }
    if (lon < -180 || lon > 180 || lat < -90 || lat > 90) {
      res.rejected.push_back({row_no, "coordinates out of range"});
      continue;
    }
    Date d;
    try {
      d = Date::parse(cells[idx[3]]);
    } catch (const Error&) {
      res.rejected.push_back({row_no, "unparseable date"});
      continue;
    }
    const std::string stage = lower_trim(cells[idx[4]]);
    const std::string instar = lower_trim(cells[idx[5]]);
    bool breeding = (stage == "laying") || (instar == "1") || (instar == "2");
    if (!breeding) {
      ++res.discarded;
      continue;
    }
    res.presences.push_back({id, lon, lat, d, 1, Provenance::presence});
  }
  return res;
}

double haversine_km(double lon1, double lat1, double lon2, double lat2) {
  constexpr double kEarthRadiusKm = 6371.0;
  constexpr double deg = std::numbers::pi / 180.0;
  double dlat = (lat2 - lat1) * deg;
  double dlon = (lon2 - lon1) * deg;
  double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
             std::cos(lat1 * deg) * std::cos(lat2 * deg) *
                 std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

std::vector<ObservationRecord> generate_pseudo_absences(
    const std::vector<ObservationRecord>& presences, const CurationConfig& cfg) {
  if (presences.empty()) {
    throw Error(ErrorCode::ConfigInvalid, "pseudo-absence generation needs >= 1 presence");
  }
  if (cfg.buffer_radius_deg <= 0 || cfg.ratio <= 0) {
    throw Error(ErrorCode::ConfigInvalid, "buffer radius and ratio must be positive");
  }
  const BoundingBox& bb = cfg.sampling_bbox;
  if (!(bb.lon_min < bb.lon_max) || !(bb.lat_min < bb.lat_max)) {
    throw Error(ErrorCode::ConfigInvalid, "sampling bbox is degenerate");
  }

  const std::size_t n_abs =
      std::size_t(std::ceil(cfg.ratio * double(presences.size())));
  const double buffer_km = cfg.buffer_radius_deg * kKmPerDegree;

  Rng rng(cfg.rng_seed);

  // Date donors: a random permutation of the presences, cycled. At ratio 1
  // every presence donates its date exactly once, so each date range keeps
  // an equal presence/absence count.
  std::vector<std::size_t> donors(presences.size());
  for (std::size_t i = 0; i < donors.size(); ++i) donors[i] = i;
  shuffle_inplace(donors, rng);

  std::vector<ObservationRecord> out;
  out.reserve(n_abs);
  std::size_t consecutive_rejections = 0;
  for (std::size_t k = 0; k < n_abs; ++k) {
    const ObservationRecord& donor = presences[donors[k % donors.size()]];
    for (;;) {
      double lon = uniform_in(rng, bb.lon_min, bb.lon_max);
      double lat = uniform_in(rng, bb.lat_min, bb.lat_max);
      bool inside_buffer = false;
      for (const ObservationRecord& p : presences) {
        if (haversine_km(lon, lat, p.lon, p.lat) <= buffer_km) {
          inside_buffer = true;
          break;
        }
      }
      if (inside_buffer) {
        if (++consecutive_rejections >= 1000000) {
          throw Error(ErrorCode::Feasibility,
                      "1e6 consecutive rejections: buffer radius too large for bbox");
        }
        continue;
      }
      consecutive_rejections = 0;
      char id[32];
      std::snprintf(id, sizeof(id), "pa-%06zu", k);
      out.push_back({id, lon, lat, donor.obs_date, 0, Provenance::pseudo_absence});
      break;
    }
  }
  return out;
}

void SplitSpec::validate() const {
  auto ok = [](const DateRange& r) { return r.lo <= r.hi; };
  if (!ok(train) || !ok(validation) || !ok(test)) {
    throw Error(ErrorCode::ConfigInvalid, "split date range has lo > hi");
  }
  if (!(train.hi < validation.lo) || !(validation.hi < test.lo)) {
    throw Error(ErrorCode::ConfigInvalid,
                "split ranges must be disjoint and chronologically ordered");
  }
}

SplitResult assign_splits(const std::vector<ObservationRecord>& records,
                          const SplitSpec& spec) {
  spec.validate();
  SplitResult res;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ObservationRecord& r = records[i];
    if (spec.train.contains(r.obs_date)) {
      res.train.push_back(r);
    } else if (spec.validation.contains(r.obs_date)) {
      res.validation.push_back(r);
    } else if (spec.test.contains(r.obs_date)) {
      res.test.push_back(r);
    } else {
      res.rejected.push_back({i, "date " + r.obs_date.to_string() + " outside all split ranges"});
    }
  }
  return res;
}

namespace {

void write_records(std::ofstream& f, const std::vector<ObservationRecord>& recs,
                   const char* split) {
  char buf[160];
  for (const ObservationRecord& r : recs) {
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%s,%d,%s,%s\n", r.id.c_str(),
                  r.lon, r.lat, r.obs_date.to_string().c_str(), r.label,
                  r.provenance == Provenance::presence ? "presence" : "pseudo_absence",
                  split);
    f << buf;
  }
}

}  // namespace

void write_curated_csv(const SplitResult& splits, const std::string& path) {
  std::ofstream f(path, std::ios::binary);  // binary: keep \n exact for checksums
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);
  f << "id,lon,lat,date,label,provenance,split\n";
  write_records(f, splits.train, "train");
  write_records(f, splits.validation, "validation");
  write_records(f, splits.test, "test");
}

std::vector<ObservationRecord> read_curated_csv(const std::string& path,
                                                std::vector<std::string>* split_out) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  if (!std::getline(f, line) ||
      split_csv_line(line) != std::vector<std::string>{"id", "lon", "lat", "date",
                                                       "label", "provenance", "split"}) {
    throw Error(ErrorCode::MalformedHeader, path + ": not a curated CSV");
  }
  std::vector<ObservationRecord> out;
  std::size_t row_no = 1;
  while (std::getline(f, line)) {
    ++row_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> c = split_csv_line(line);
    if (c.size() != 7) {
      std::ostringstream os;
      os << path << ": row " << row_no << " has " << c.size() << " fields, want 7";
      throw Error(ErrorCode::MalformedHeader, os.str());
    }
    ObservationRecord r;
    r.id = c[0];
    if (!parse_double(c[1], r.lon) || !parse_double(c[2], r.lat)) {
      throw Error(ErrorCode::MalformedHeader, path + ": bad coordinates at row " + std::to_string(row_no));
    }
    r.obs_date = Date::parse(c[3]);
    r.label = (c[4] == "1") ? 1 : 0;
    r.provenance = (c[5] == "presence") ? Provenance::presence : Provenance::pseudo_absence;
    out.push_back(std::move(r));
    if (split_out) split_out->push_back(c[6]);
  }
  return out;
}

}  // namespace locust::curation
