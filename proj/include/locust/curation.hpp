#pragma once

#include <string>
#include <vector>

#include "locust/common.hpp"
#include "locust/date.hpp"

namespace locust::curation {

enum class Provenance { presence, pseudo_absence };

struct ObservationRecord {
  std::string id;
  double lon = 0.0;
  double lat = 0.0;
  Date obs_date;
  int label = 0;  // 1 breeding, 0 non-breeding
  Provenance provenance = Provenance::presence;
};

struct RowDiagnostic {
  std::size_t row;  // 1-based CSV line number, header = 1
  std::string reason;
};

struct IngestResult {
  std::vector<ObservationRecord> presences;
  std::vector<RowDiagnostic> rejected;  // unparseable rows
  std::size_t discarded = 0;            // parsed fine but failed the breeding filter
};

// Reads the observation CSV (header id,lon,lat,date,stage,instar) and keeps
// rows whose stage is "laying" or whose instar is 1 or 2. Kept rows become
// label=1 presences. Throws on a missing column or a duplicate id.
IngestResult ingest_presences(const std::string& path);

struct BoundingBox {
  double lon_min, lon_max;
  double lat_min, lat_max;
};

struct CurationConfig {
  double buffer_radius_deg = 0.2;
  BoundingBox sampling_bbox{0, 1, 0, 1};
  double ratio = 1.0;  // pseudo-absences per presence
  std::uint64_t rng_seed = 0;
};

// Great-circle distance in km (haversine).
double haversine_km(double lon1, double lat1, double lon2, double lat2);

constexpr double kKmPerDegree = 111.32;

// Uniform rejection sampling over the bbox; a candidate within
// buffer_radius (in degrees, compared via great-circle km) of any presence
// is resampled. Each absence copies the date of one presence, assigned by a
// seeded random permutation repeated round-robin so that per-date-range
// class balance is exact at integer ratios. Throws Feasibility after 1e6
// consecutive rejections.
std::vector<ObservationRecord> generate_pseudo_absences(
    const std::vector<ObservationRecord>& presences, const CurationConfig& cfg);

struct SplitSpec {
  DateRange train;
  DateRange validation;
  DateRange test;

  void validate() const;  // disjoint and chronologically ordered
};

struct SplitResult {
  std::vector<ObservationRecord> train;
  std::vector<ObservationRecord> validation;
  std::vector<ObservationRecord> test;
  std::vector<RowDiagnostic> rejected;  // record index + reason
};

SplitResult assign_splits(const std::vector<ObservationRecord>& records,
                          const SplitSpec& spec);

// Curated CSV: id,lon,lat,date,label,provenance,split
void write_curated_csv(const SplitResult& splits, const std::string& path);
std::vector<ObservationRecord> read_curated_csv(const std::string& path,
                                                std::vector<std::string>* split_out);

}  // namespace locust::curation
