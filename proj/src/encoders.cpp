#include "cpmetric/encoders.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "cpmetric/cpnet_io.hpp"
#include "cpmetric/error.hpp"
#include "cpmetric/order_metric.hpp"

namespace cpmetric {

int bin_label(double y, int m) {
  if (m < 1) throw ValidationError("bin count must be positive");
  if (!(y >= 0.0 && y <= 1.0)) throw ValidationError("label " + std::to_string(y) + " outside [0,1]");
  return std::min(static_cast<int>(std::floor(y * m)), m - 1);
}

Eigen::MatrixXd adjacency_matrix(const CPNet& net) {
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(net.size(), net.size());
  for (auto [p, c] : net.edges()) adj(p, c) = 1.0;
  return adj;
}

Eigen::MatrixXd normalized_laplacian(const CPNet& net) {
  const int n = net.size();
  Eigen::MatrixXd sym = Eigen::MatrixXd::Zero(n, n);
  for (auto [p, c] : net.edges()) sym(p, c) = sym(c, p) = 1.0;
  Eigen::VectorXd inv_sqrt(n);
  for (int i = 0; i < n; ++i) {
    const double degree = sym.row(i).sum();
    inv_sqrt(i) = degree > 0.0 ? 1.0 / std::sqrt(degree) : 0.0;
  }
  Eigen::MatrixXd lap(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double identity = (i == j && inv_sqrt(i) > 0.0) ? 1.0 : 0.0;
      lap(i, j) = identity - inv_sqrt(i) * sym(i, j) * inv_sqrt(j);
    }
  }
  return lap;
}

Eigen::MatrixXd cpt_matrix(const CPNet& net, CptRowOrder row_order) {
  const int n = net.size();
  const std::size_t cols = std::size_t{1} << (n - 1);
  Eigen::MatrixXd cpt(n, static_cast<Eigen::Index>(cols));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  if (row_order == CptRowOrder::topological) order = topological_order(net);
  for (int r = 0; r < n; ++r) {
    const int var = order[static_cast<std::size_t>(r)];
    std::vector<int> others;
    for (int i = 0; i < n; ++i)
      if (i != var) others.push_back(i);
    for (std::size_t col = 0; col < cols; ++col) {
      std::vector<std::uint8_t> values(static_cast<std::size_t>(n), 0);
      for (std::size_t k = 0; k < others.size(); ++k)
        values[static_cast<std::size_t>(others[k])] =
            static_cast<std::uint8_t>((col >> (others.size() - 1 - k)) & 1U);
      cpt(r, static_cast<Eigen::Index>(col)) = net.preferred_value(var, Outcome(std::move(values)));
    }
  }
  return cpt;
}

namespace {

std::vector<double> flatten_row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out.data(), m.rows(),
                                                                                        m.cols()) = m;
  return out;
}

void write_f32(std::ofstream& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFFU);
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

float decode_f32(const unsigned char* bytes) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

NetEncoding encode_net(const CPNet& net) {
  return NetEncoding{flatten_row_major(normalized_laplacian(net)), flatten_row_major(cpt_matrix(net))};
}

EncodedSample encode_pair(const CPNet& a, const CPNet& b, double y, int m) {
  require_same_variables(a, b);
  EncodedSample s;
  s.bin = bin_label(y, m);
  s.y = y;
  s.a = encode_net(a);
  s.b = encode_net(b);
  return s;
}

struct RecordWriter::Impl {
  std::filesystem::path path;
  std::ofstream out;
  RecordHeader header;
  bool closed = false;
};

RecordWriter::RecordWriter(const std::filesystem::path& path, int n, int m) : impl_(new Impl) {
  impl_->path = path;
  impl_->header.n = n;
  impl_->header.m = m;
  impl_->out.open(path, std::ios::binary | std::ios::trunc);
  if (!impl_->out) {
    delete impl_;
    throw IoError("cannot write " + path.string());
  }
}

RecordWriter::~RecordWriter() {
  try {
    close();
  } catch (...) {
  }
  delete impl_;
}

void RecordWriter::append(const NetEncoding& a, const NetEncoding& b, double y) {
  const int n = impl_->header.n;
  if (a.laplacian.size() != laplacian_size(n) || b.laplacian.size() != laplacian_size(n) ||
      a.cpt.size() != cpt_size(n) || b.cpt.size() != cpt_size(n))
    throw DimensionError("record encoding does not match n=" + std::to_string(n));
  for (double v : a.laplacian) write_f32(impl_->out, v);
  for (double v : a.cpt) write_f32(impl_->out, v);
  for (double v : b.laplacian) write_f32(impl_->out, v);
  for (double v : b.cpt) write_f32(impl_->out, v);
  write_f32(impl_->out, y);
  ++impl_->header.records;
}

void RecordWriter::close() {
  if (impl_->closed) return;
  impl_->closed = true;
  impl_->out.close();
  if (!impl_->out) throw IoError("write failed for " + impl_->path.string());
  const auto& h = impl_->header;
  nlohmann::json doc{{"format", "cpmetric-records"},
                     {"version", 1},
                     {"encoding", h.encoding},
                     {"n", h.n},
                     {"m", h.m},
                     {"records", h.records},
                     {"floats_per_record", h.floats_per_record()},
                     {"byte_order", "little"},
                     {"layout", "lapA|cptA|lapB|cptB|y"}};
  write_text_file(record_header_path(impl_->path), doc.dump(2) + "\n");
}

std::filesystem::path record_header_path(const std::filesystem::path& records) {
  return std::filesystem::path(records.string() + ".header.json");
}

RecordHeader read_record_header(const std::filesystem::path& records) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(record_header_path(records)));
    RecordHeader h;
    h.n = doc.at("n").get<int>();
    h.m = doc.at("m").get<int>();
    h.records = doc.at("records").get<std::uint64_t>();
    h.encoding = doc.at("encoding").get<std::string>();
    if (h.encoding != kEncodingVersion)
      throw ValidationError("record encoding '" + h.encoding + "' is not supported (expected " + kEncodingVersion + ")");
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(record_header_path(records).string() + ": " + e.what());
  }
}

std::vector<float> read_record(const std::filesystem::path& records, std::uint64_t index) {
  const RecordHeader h = read_record_header(records);
  if (index >= h.records) throw ValidationError("record index out of range");
  const std::size_t width = h.floats_per_record();
  std::ifstream in(records, std::ios::binary);
  if (!in) throw IoError("cannot open " + records.string());
  in.seekg(static_cast<std::streamoff>(index * width * 4));
  std::vector<unsigned char> bytes(width * 4);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw IoError("truncated record file " + records.string());
  std::vector<float> out(width);
  for (std::size_t i = 0; i < width; ++i) out[i] = decode_f32(bytes.data() + 4 * i);
  return out;
}

std::vector<float> read_record_labels(const std::filesystem::path& records) {
  const RecordHeader h = read_record_header(records);
  const std::size_t width = h.floats_per_record();
  const std::string data = read_text_file(records);
  if (data.size() != h.records * width * 4)
    throw IoError(records.string() + ": size does not match header record count");
  std::vector<float> labels(h.records);
  const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
  for (std::uint64_t r = 0; r < h.records; ++r) labels[r] = decode_f32(bytes + (r * width + width - 1) * 4);
  return labels;
}

}  // namespace cpmetric
