#pragma once

#include <iosfwd>
#include <string>

#include "caedp/cli/config.hpp"
#include "caedp/dataset.hpp"

namespace caedp::cli {

/// Parses a header-first CSV into clusters (ordered by first appearance,
/// rows kept in file order within a cluster). Errors are ValidationError
/// messages carrying "<source> row <r>, column '<c>'" where row 1 is the header.
ClusterDataset read_csv(std::istream& in, const ColumnSchema& schema, const std::string& source);
ClusterDataset ingest_csv(const std::string& path, const ColumnSchema& schema);

/// Writes the dataset with columns cluster_id, A, X_1..X_p, V_1..V_q, D, M, Y.
void write_csv(std::ostream& out, const ClusterDataset& data);

}  // namespace caedp::cli
