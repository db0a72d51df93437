#include "nnn/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <stdexcept>

#include "nnn/errors.hpp"
#include "nnn/parallel.hpp"
#include "nnn/random.hpp"

namespace nnn {

namespace {

UnitPoint normalised(double x, double y, double z) {
  const double n = std::sqrt(x * x + y * y + z * z);
  return {x / n, y / n, z / n};
}

void collect_edges(SphereMesh& mesh) {
  std::vector<std::array<int, 2>> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = f[k];
      const int b = f[(k + 1) % 3];
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  mesh.edges = std::move(edges);
}

double arc(const UnitPoint& a, const UnitPoint& b) {
  const double cx = a.y * b.z - a.z * b.y;
  const double cy = a.z * b.x - a.x * b.z;
  const double cz = a.x * b.y - a.y * b.x;
  return std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), a.x * b.x + a.y * b.y + a.z * b.z);
}

}  // namespace

SphereMesh build_mesh(int subdivisions) {
  if (subdivisions < 0) throw std::invalid_argument("build_mesh: subdivisions must be non-negative");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  SphereMesh mesh;
  const double raw[12][3] = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                             {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (const auto& v : raw) mesh.vertices.push_back(normalised(v[0], v[1], v[2]));
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const UnitPoint& p = mesh.vertices[static_cast<std::size_t>(a)];
      const UnitPoint& q = mesh.vertices[static_cast<std::size_t>(b)];
      mesh.vertices.push_back(normalised(p.x + q.x, p.y + q.y, p.z + q.z));
      const int idx = static_cast<int>(mesh.vertices.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> faces;
    faces.reserve(mesh.faces.size() * 4);
    for (const auto& f : mesh.faces) {
      const int a = mid(f[0], f[1]);
      const int b = mid(f[1], f[2]);
      const int c = mid(f[2], f[0]);
      faces.push_back({f[0], a, c});
      faces.push_back({f[1], b, a});
      faces.push_back({f[2], c, b});
      faces.push_back({a, b, c});
    }
    mesh.faces = std::move(faces);
  }
  collect_edges(mesh);
  return mesh;
}

DistanceMatrix pairwise_distances(const std::vector<double>& u_vertex, const SphereMesh& mesh) {
  const std::size_t n = mesh.vertices.size();
  if (u_vertex.size() != n) throw std::invalid_argument("pairwise_distances: one u value per vertex required");
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  for (const auto& e : mesh.edges) {
    const auto i = static_cast<std::size_t>(e[0]);
    const auto j = static_cast<std::size_t>(e[1]);
    const double w = arc(mesh.vertices[i], mesh.vertices[j]) * std::exp(0.5 * (u_vertex[i] + u_vertex[j]));
    adj[i].emplace_back(e[1], w);
    adj[j].emplace_back(e[0], w);
  }

  DistanceMatrix D(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  constexpr double inf = std::numeric_limits<double>::infinity();
  parallel_for(n, [&](std::size_t src) {
    std::vector<double> dist(n, inf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[src] = 0.0;
    pq.emplace(0.0, static_cast<int>(src));
    while (!pq.empty()) {
      const auto [d, v] = pq.top();
      pq.pop();
      if (d > dist[static_cast<std::size_t>(v)]) continue;
      for (const auto& [w, len] : adj[static_cast<std::size_t>(v)]) {
        const double nd = d + len;
        if (nd < dist[static_cast<std::size_t>(w)]) {
          dist[static_cast<std::size_t>(w)] = nd;
          pq.emplace(nd, w);
        }
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (dist[j] == inf) throw DisconnectedMesh("mesh graph is disconnected");
      D(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(j)) = dist[j];
    }
  });
  // Runs from i and from j can differ in the last bits.
  DistanceMatrix sym = 0.5 * (D + D.transpose());
  sym.diagonal().setZero();
  return sym;
}

DistanceMatrix pairwise_distances(const std::function<double(const UnitPoint&)>& u, const SphereMesh& mesh) {
  std::vector<double> values(mesh.vertices.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = u(mesh.vertices[i]);
  return pairwise_distances(values, mesh);
}

DistanceMatrix pairwise_distances(const NetworkParams& params, const SphereMesh& mesh) {
  std::vector<double> values(mesh.vertices.size());
  parallel_for(values.size(), [&](std::size_t i) { values[i] = forward_u(params, mesh.vertices[i]); });
  return pairwise_distances(values, mesh);
}

double stress(const Eigen::MatrixXd& coords, const DistanceMatrix& D) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < coords.rows(); ++j) {
      const double d = (coords.row(i) - coords.row(j)).norm() - D(i, j);
      s += d * d;
    }
  }
  return s;
}

EmbeddingResult mds_embed(const DistanceMatrix& D, const MdsOptions& opts) {
  const Eigen::Index n = D.rows();
  std::mt19937_64 rng(mix64(opts.seed ^ 0x510e527fade682d1ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = D.size() > 0 ? D.maxCoeff() / 2.0 : 1.0;
  Eigen::MatrixXd init(n, opts.dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < opts.dim; ++k) init(i, k) = scale * normal(rng);
  }
  return mds_embed(D, init, opts);
}

EmbeddingResult mds_embed(const DistanceMatrix& D, const Eigen::MatrixXd& init, const MdsOptions& opts) {
  const Eigen::Index n = D.rows();
  if (D.cols() != n) throw std::invalid_argument("mds_embed: distance matrix must be square");
  if (init.rows() != n || init.cols() != opts.dim) throw std::invalid_argument("mds_embed: bad initial shape");
  if (opts.max_iter < 0 || !(opts.tol >= 0.0)) throw std::invalid_argument("mds_embed: bad options");

  EmbeddingResult res;
  Eigen::MatrixXd X = init;
  double current = stress(X, D);
  res.stress_history.push_back(current);
  Eigen::MatrixXd next(n, opts.dim);
  for (int it = 0; it < opts.max_iter; ++it) {
    // Guttman transform with unit weights: X <- B(X) X / n.
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t ii) {
      const auto i = static_cast<Eigen::Index>(ii);
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(opts.dim);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = (X.row(i) - X.row(j)).norm();
        const double b = d > 0.0 ? D(i, j) / d : 0.0;
        acc += b * (X.row(i) - X.row(j));
      }
      next.row(i) = acc / static_cast<double>(n);
    });
    const double updated = stress(next, D);
    X.swap(next);
    res.stress_history.push_back(updated);
    res.iterations = it + 1;
    const double improvement = current - updated;
    current = updated;
    if (current == 0.0 || improvement <= opts.tol * std::max(current, std::numeric_limits<double>::min())) break;
  }
  res.coords = X;
  res.stress = current;
  return res;
}

double procrustes_rms(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() == 0) {
    throw std::invalid_argument("procrustes_rms: shapes must match");
  }
  const Eigen::RowVectorXd ca = a.colwise().mean();
  const Eigen::RowVectorXd cb = b.colwise().mean();
  const Eigen::MatrixXd A = a.rowwise() - ca;
  const Eigen::MatrixXd B = b.rowwise() - cb;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A.transpose() * B, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd R = svd.matrixU() * svd.matrixV().transpose();
  const Eigen::MatrixXd diff = A * R - B;
  return std::sqrt(diff.squaredNorm() / static_cast<double>(a.rows()));
}

void export_mesh(const EmbeddingResult& result, const SphereMesh& mesh, const std::filesystem::path& path) {
  if (result.coords.rows() != static_cast<Eigen::Index>(mesh.vertices.size()) || result.coords.cols() != 3) {
    throw std::invalid_argument("export_mesh: coordinates must be n x 3 for the mesh");
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  char buf[128];
  os << "# stress " << result.stress << "\n";
  for (Eigen::Index i = 0; i < result.coords.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", result.coords(i, 0), result.coords(i, 1),
                  result.coords(i, 2));
    os << buf;
  }
  for (const auto& f : mesh.faces) os << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

void export_distance_csv(const DistanceMatrix& D, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  char buf[32];
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    for (Eigen::Index j = 0; j < D.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", D(i, j));
      os << (j ? "," : "") << buf;
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace nnn
