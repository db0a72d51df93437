#pragma once

// Icosphere meshes, graph geodesic distances under e^{2u} g0, and a 3D
// SMACOF embedding of the resulting distance matrix.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "nnn/conformal_net.hpp"
#include "nnn/sphere_geometry.hpp"

namespace nnn {

struct SphereMesh {
  std::vector<UnitPoint> vertices;
  std::vector<std::array<int, 2>> edges;  // i < j, sorted
  std::vector<std::array<int, 3>> faces;  // counter-clockwise seen from outside
};

/// Subdivided icosahedron with 10 * 4^s + 2 vertices.
SphereMesh build_mesh(int subdivisions);

using DistanceMatrix = Eigen::MatrixXd;

/// All-pairs shortest paths with edge weight arc(vi, vj) * e^{(u_i + u_j)/2}.
/// Throws DisconnectedMesh if some pair is unreachable.
DistanceMatrix pairwise_distances(const std::function<double(const UnitPoint&)>& u, const SphereMesh& mesh);
DistanceMatrix pairwise_distances(const NetworkParams& params, const SphereMesh& mesh);
/// Same, from per-vertex values of u.
DistanceMatrix pairwise_distances(const std::vector<double>& u_vertex, const SphereMesh& mesh);

struct MdsOptions {
  int dim = 3;
  int max_iter = 500;
  double tol = 1e-9;  // relative stress improvement
  std::uint64_t seed = 0;
};

struct EmbeddingResult {
  Eigen::MatrixXd coords;  // n x dim
  double stress = 0.0;     // sum over i<j of (|xi - xj| - Dij)^2
  int iterations = 0;
  std::vector<double> stress_history;  // stress of the start and after every update
};

double stress(const Eigen::MatrixXd& coords, const DistanceMatrix& D);

/// SMACOF from a seeded random start.
EmbeddingResult mds_embed(const DistanceMatrix& D, const MdsOptions& opts = {});
/// SMACOF from a given start configuration.
EmbeddingResult mds_embed(const DistanceMatrix& D, const Eigen::MatrixXd& init, const MdsOptions& opts = {});

/// RMS distance between b and the best rotation + translation of a onto b.
double procrustes_rms(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

void export_mesh(const EmbeddingResult& result, const SphereMesh& mesh, const std::filesystem::path& path);
void export_distance_csv(const DistanceMatrix& D, const std::filesystem::path& path);

}  // namespace nnn
