#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "kdgp/basis.hpp"

namespace kdgp {

/// The matrix a sensor broadcasts during consensus: rows 1..E carry the
/// measurement-matrix columns (one per sensor), row E+1 carries the stacked
/// measurement values, so a single consensus pass transports both H and y.
/// At t=0 only the sender's own (intrinsic) column is nonzero; that column
/// must survive consensus bit-identical.
struct SharedMessage {
  int sensor_id = 1;          ///< r, 1-based
  int iteration = 0;          ///< consensus iteration t
  Eigen::MatrixXd matrix;     ///< (E+1) x R

  int width() const { return static_cast<int>(matrix.cols()); }
  int rows() const { return static_cast<int>(matrix.rows()); }
};

/// Consensus output unpacked for the Kalman update: the E x R measurement
/// matrix and the R measurement values.
struct AssembledMeasurement {
  Eigen::MatrixXd H;  ///< E x R
  Eigen::VectorXd y;  ///< R
};

/// Initial message of sensor r: zero everywhere except column r = [Phi(x); y].
inline SharedMessage build_local_message(int r, int R, const Vec2& x, double y,
                                         const BasisSet& basis) {
  if (r < 1 || r > R) throw std::invalid_argument("build_local_message: sensor id out of range");
  SharedMessage msg;
  msg.sensor_id = r;
  msg.iteration = 0;
  msg.matrix = Eigen::MatrixXd::Zero(basis.E + 1, R);
  msg.matrix.col(r - 1).head(basis.E) = phi_vector(x, basis);
  msg.matrix(basis.E, r - 1) = y;
  return msg;
}

/// Un-stacks a (converged) message back into (H, y).
inline AssembledMeasurement split_message(const SharedMessage& msg) {
  const int E = msg.rows() - 1;
  AssembledMeasurement out;
  out.H = msg.matrix.topRows(E);
  out.y = msg.matrix.row(E).transpose();
  return out;
}

/// Wire encoding: four u32 header fields then the column-major doubles.
/// Byte count is 16 + 8 * (E+1) * R, linear in E at fixed R.
inline std::vector<std::uint8_t> serialize_message(const SharedMessage& msg) {
  const auto n = static_cast<std::size_t>(msg.matrix.size());
  std::vector<std::uint8_t> buf(16 + 8 * n);
  const std::uint32_t header[4] = {
      static_cast<std::uint32_t>(msg.sensor_id), static_cast<std::uint32_t>(msg.iteration),
      static_cast<std::uint32_t>(msg.rows()), static_cast<std::uint32_t>(msg.width())};
  std::memcpy(buf.data(), header, 16);
  std::memcpy(buf.data() + 16, msg.matrix.data(), 8 * n);
  return buf;
}

inline SharedMessage deserialize_message(const std::vector<std::uint8_t>& buf) {
  if (buf.size() < 16) throw std::invalid_argument("deserialize_message: truncated header");
  std::uint32_t header[4];
  std::memcpy(header, buf.data(), 16);
  SharedMessage msg;
  msg.sensor_id = static_cast<int>(header[0]);
  msg.iteration = static_cast<int>(header[1]);
  msg.matrix.resize(header[2], header[3]);
  const auto n = static_cast<std::size_t>(msg.matrix.size());
  if (buf.size() != 16 + 8 * n) throw std::invalid_argument("deserialize_message: size mismatch");
  std::memcpy(msg.matrix.data(), buf.data() + 16, 8 * n);
  return msg;
}

/// Serialized size of a K-DGP consensus message without building one.
inline std::size_t message_byte_size(int E, int R) {
  return 16 + 8 * static_cast<std::size_t>(E + 1) * static_cast<std::size_t>(R);
}

}  // namespace kdgp
