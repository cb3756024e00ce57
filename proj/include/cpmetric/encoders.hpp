#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpmetric/cpnet.hpp"

namespace cpmetric {

/// Tag written next to every encoded artifact; bump when any convention changes.
inline constexpr const char* kEncodingVersion = "symlap-idxcpt-v1";

/// Interval of [0,1] that `y` falls in: min(floor(y*m), m-1).
int bin_label(double y, int m);

/// 0/1 matrix, entry (i,j) = 1 iff edge Xi -> Xj.
Eigen::MatrixXd adjacency_matrix(const CPNet& net);

/// I - D^-1/2 A D^-1/2 of the symmetrized dependency graph. Isolated
/// vertices get an all-zero row and column, including the diagonal.
Eigen::MatrixXd normalized_laplacian(const CPNet& net);

enum class CptRowOrder { variable_index, topological };

/// n x 2^(n-1) matrix of preferred-value indices.
///
/// Row i describes variable Xi by default. With CptRowOrder::topological,
/// row r describes topological_order(net)[r]; that layout drops which
/// variable a row belongs to, so nets differing only in edge direction can
/// collide, and it is not used by encode_net. Column j encodes an assignment
/// to the other variables in ascending index order, lowest index as the most
/// significant bit, bit value = domain value index.
Eigen::MatrixXd cpt_matrix(const CPNet& net, CptRowOrder order = CptRowOrder::variable_index);

inline std::size_t laplacian_size(int n) { return static_cast<std::size_t>(n) * static_cast<std::size_t>(n); }
inline std::size_t cpt_size(int n) { return static_cast<std::size_t>(n) << (n - 1); }

/// Flattened (row-major) encodings of one net.
struct NetEncoding {
  std::vector<double> laplacian;
  std::vector<double> cpt;

  bool operator==(const NetEncoding&) const = default;
};

NetEncoding encode_net(const CPNet& net);

struct EncodedSample {
  NetEncoding a;
  NetEncoding b;
  double y = 0.0;
  int bin = 0;
};

/// Throws ValidationError if the nets differ in variables or y is outside [0,1].
EncodedSample encode_pair(const CPNet& a, const CPNet& b, double y, int m);

/// Sidecar header of a record file.
struct RecordHeader {
  int n = 0;
  int m = 0;
  std::uint64_t records = 0;
  std::string encoding = kEncodingVersion;

  std::size_t floats_per_record() const { return 2 * (laplacian_size(n) + cpt_size(n)) + 1; }
};

/// Streams records [lapA | cptA | lapB | cptB | y] as little-endian float32.
class RecordWriter {
 public:
  RecordWriter(const std::filesystem::path& path, int n, int m);
  ~RecordWriter();
  RecordWriter(const RecordWriter&) = delete;
  RecordWriter& operator=(const RecordWriter&) = delete;

  void append(const NetEncoding& a, const NetEncoding& b, double y);
  /// Flushes data and writes the "<path>.header.json" sidecar.
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

std::filesystem::path record_header_path(const std::filesystem::path& records);
RecordHeader read_record_header(const std::filesystem::path& records);
/// Reads the label column of every record.
std::vector<float> read_record_labels(const std::filesystem::path& records);
/// Reads one full record as float32 values.
std::vector<float> read_record(const std::filesystem::path& records, std::uint64_t index);

}  // namespace cpmetric
