#pragma once

#include <string>

#include "rfr/data/dataset.hpp"

namespace rfr {

// Reads a dataset from CSV files and validates it.
//
// events: header "id,time", one row per failure, times strictly increasing
//   within each id (rows of different ids may interleave).
// covariates: header "id,censor_time[,name...]", one row per system; the
//   covariate names come from this header. Row order defines dataset order.
// sensors (optional, "" = none): header "id,channel,time,value" with integer
//   channels 1..q; every system must carry every channel.
//
// Files are UTF-8 with '.' decimals; parse errors report the file and line.
RecurrenceDataset ingest_csv(const std::string& events_path, const std::string& covariates_path,
                             const std::string& sensors_path = "");

// Writes the same three files (sensors only when q > 0, path given). Doubles
// are shortest round-trip form, so ingest(export(data)) == data exactly.
void export_csv(const RecurrenceDataset& data, const std::string& events_path,
                const std::string& covariates_path, const std::string& sensors_path = "");

}  // namespace rfr
