#include "jaclab/collection.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "jaclab/control.hpp"

#include "binio.hpp"

namespace jaclab {

std::vector<double> ou_step(const std::vector<double>& state,
                            const OuConfig& cfg, Rng& rng) {
  std::vector<double> out(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    out[i] = state[i] + cfg.theta * (cfg.mu - state[i]) +
             cfg.sigma * rng.gaussian();
  }
  return out;
}

std::string to_string(CollectionPolicy p) {
  return p == CollectionPolicy::OuExploration ? "ou"
                                              : "true_controller_perturbed";
}

CollectionPolicy collection_policy_from_string(const std::string& s) {
  if (s == "ou") return CollectionPolicy::OuExploration;
  if (s == "true_controller_perturbed") {
    return CollectionPolicy::PerturbedTrueController;
  }
  throw std::invalid_argument("unknown collection policy: " + s);
}

Dataset collect(Environment& env, int n_traj, int traj_len,
                const OuConfig& ou, std::uint64_t seed,
                CollectionPolicy policy) {
  if (n_traj < 1) throw std::invalid_argument("collect: n_traj must be >= 1");
  if (traj_len < 1) throw std::invalid_argument("collect: traj_len >= 1");

  Dataset data;
  data.kind = env.model().kind;
  data.seed = seed;
  data.ou = ou;
  data.n_trajectories = static_cast<std::uint32_t>(n_traj);
  data.trajectory_length = static_cast<std::uint32_t>(traj_len);
  data.policy = policy;
  data.samples.reserve(static_cast<std::size_t>(n_traj) * traj_len);

  ControllerConfig controller;  // lambda = 1.0 during collection
  const std::size_t n = env.model().joint_dim();

  for (int t = 0; t < n_traj; ++t) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(t)));
    std::vector<double> target;
    if (policy == CollectionPolicy::PerturbedTrueController) {
      target = env.sample_target(rng);
    } else {
      // Target is irrelevant for random exploration; park it at the
      // initial-pose features.
      target = env.model().features(env.config().initial_q);
    }
    env.reset(target);
    std::vector<double> ou_state(n, 0.0);

    for (int s = 0; s < traj_len; ++s) {
      const EnvState st = env.state();
      DatasetSample sample;
      sample.trajectory = static_cast<std::uint32_t>(t);
      sample.step = static_cast<std::uint32_t>(s);
      sample.q = st.q;
      sample.x = st.x;
      data.samples.push_back(std::move(sample));

      std::vector<double> cmd;
      if (policy == CollectionPolicy::OuExploration) {
        ou_state = ou_step(ou_state, ou, rng);
        cmd = ou_state;
      } else {
        const Mat j = env.model().jacobian(st.q);
        cmd = control_step(j, st.x, st.x_star, controller);
        if (rng.uniform() < 0.05) {
          for (double& c : cmd) c += 0.1 * rng.gaussian();
        }
      }
      env.step(cmd);
    }
  }
  return data;
}

PairSet build_pairs(const Dataset& data, int k) {
  const std::size_t n = data.samples.size();
  if (k < 1) throw std::invalid_argument("build_pairs: k must be >= 1");
  if (n <= static_cast<std::size_t>(k)) {
    throw std::invalid_argument("build_pairs: dataset too small for k");
  }

  PairSet out;
  out.kind = data.kind;
  out.k = k;
  out.anchors.resize(n);

  std::vector<std::pair<double, std::uint32_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& qi = data.samples[i].q;
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double acc = 0.0;
      const auto& qj = data.samples[j].q;
      for (std::size_t d = 0; d < qi.size(); ++d) {
        const double diff = qi[d] - qj[d];
        acc += diff * diff;
      }
      dist[m++] = {acc, static_cast<std::uint32_t>(j)};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.begin() + m);

    PairAnchor& anchor = out.anchors[i];
    anchor.q = qi;
    anchor.neighbors.resize(k);
    for (int a = 0; a < k; ++a) anchor.neighbors[a] = dist[a].second;

    anchor.pairs.reserve(static_cast<std::size_t>(k) * (k - 1));
    for (int a = 0; a < k; ++a) {
      const auto& sa = data.samples[anchor.neighbors[a]];
      for (int b = 0; b < k; ++b) {
        if (a == b) continue;
        const auto& sb = data.samples[anchor.neighbors[b]];
        anchor.pairs.push_back(
            {vec_sub(sa.x, sb.x), vec_sub(sa.q, sb.q)});
      }
    }
  }
  return out;
}

namespace {

using binio::read_bytes;
using binio::read_pod;
using binio::write_bytes;
using binio::write_pod;

constexpr char kMagic[4] = {'N', 'J', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t kind_code(EnvKind k) {
  switch (k) {
    case EnvKind::SinglePoint7: return 0;
    case EnvKind::MultiPoint7: return 1;
    case EnvKind::Planar2: return 2;
  }
  throw std::logic_error("kind_code");
}

EnvKind kind_from_code(std::uint32_t c) {
  if (c == 0) return EnvKind::SinglePoint7;
  if (c == 1) return EnvKind::MultiPoint7;
  if (c == 2) return EnvKind::Planar2;
  throw std::runtime_error("load_dataset: unknown environment code");
}

}  // namespace

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_dataset: cannot open " + path);

  write_bytes(f, kMagic, 4);
  write_pod(f, kVersion);
  write_pod(f, kind_code(data.kind));
  write_pod(f, static_cast<std::uint32_t>(data.joint_dim()));
  write_pod(f, static_cast<std::uint32_t>(data.feature_dim()));
  write_pod(f, static_cast<std::uint64_t>(data.samples.size()));
  write_pod(f, data.seed);
  write_pod(f, data.ou.sigma);
  write_pod(f, data.ou.mu);
  write_pod(f, data.ou.theta);
  write_pod(f, data.n_trajectories);
  write_pod(f, data.trajectory_length);
  write_pod(f, static_cast<std::uint32_t>(data.policy));

  for (const auto& s : data.samples) {
    write_pod(f, s.trajectory);
    write_pod(f, s.step);
    write_bytes(f, s.q.data(), s.q.size() * sizeof(double));
    write_bytes(f, s.x.data(), s.x.size() * sizeof(double));
  }
  if (!f) throw std::runtime_error("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_dataset: cannot open " + path);

  char magic[4];
  read_bytes(f, magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("load_dataset: bad magic, not a dataset file");
  }
  const auto version = read_pod<std::uint32_t>(f, "version");
  if (version != kVersion) {
    throw std::runtime_error("load_dataset: unsupported format version " +
                             std::to_string(version));
  }

  Dataset data;
  data.kind = kind_from_code(read_pod<std::uint32_t>(f, "env kind"));
  const auto qdim = read_pod<std::uint32_t>(f, "joint dim");
  const auto xdim = read_pod<std::uint32_t>(f, "feature dim");
  if (qdim != data.joint_dim() || xdim != data.feature_dim()) {
    throw std::runtime_error(
        "load_dataset: header dimensions inconsistent with environment kind");
  }
  const auto count = read_pod<std::uint64_t>(f, "sample count");
  data.seed = read_pod<std::uint64_t>(f, "seed");
  data.ou.sigma = read_pod<double>(f, "ou.sigma");
  data.ou.mu = read_pod<double>(f, "ou.mu");
  data.ou.theta = read_pod<double>(f, "ou.theta");
  data.n_trajectories = read_pod<std::uint32_t>(f, "n_trajectories");
  data.trajectory_length = read_pod<std::uint32_t>(f, "trajectory_length");
  const auto policy = read_pod<std::uint32_t>(f, "policy");
  if (policy > 1) throw std::runtime_error("load_dataset: bad policy code");
  data.policy = static_cast<CollectionPolicy>(policy);

  data.samples.resize(count);
  for (auto& s : data.samples) {
    s.trajectory = read_pod<std::uint32_t>(f, "sample trajectory");
    s.step = read_pod<std::uint32_t>(f, "sample step");
    s.q.resize(qdim);
    s.x.resize(xdim);
    read_bytes(f, s.q.data(), qdim * sizeof(double), "sample q");
    read_bytes(f, s.x.data(), xdim * sizeof(double), "sample x");
  }
  binio::expect_eof(f, "load_dataset");
  return data;
}

void export_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("export_dataset_csv: cannot open " + path);
  f << "traj,step";
  for (std::size_t i = 1; i <= data.joint_dim(); ++i) f << ",q" << i;
  for (std::size_t i = 1; i <= data.feature_dim(); ++i) f << ",x" << i;
  f << "\n";
  char buf[32];
  for (const auto& s : data.samples) {
    f << s.trajectory << "," << s.step;
    for (double v : s.q) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      f << "," << buf;
    }
    for (double v : s.x) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      f << "," << buf;
    }
    f << "\n";
  }
}

}  // namespace jaclab
