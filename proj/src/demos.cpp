#include "cmzdril/demos.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cmzdril/rng.hpp"

namespace cmzdril {

int DemoSet::total_pairs() const {
  int n = 0;
  for (const Episode& ep : episodes)
    n += static_cast<int>(ep.observations.rows());
  return n;
}

Mat DemoSet::stacked_observations() const {
  Mat out(total_pairs(), obs_dim);
  Eigen::Index row = 0;
  for (const Episode& ep : episodes) {
    out.middleRows(row, ep.observations.rows()) = ep.observations;
    row += ep.observations.rows();
  }
  return out;
}

Mat DemoSet::stacked_actions() const {
  Mat out(total_pairs(), act_dim);
  Eigen::Index row = 0;
  for (const Episode& ep : episodes) {
    out.middleRows(row, ep.actions.rows()) = ep.actions;
    row += ep.actions.rows();
  }
  return out;
}

DemoSet collect_demos(Env& env, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1)
    throw std::invalid_argument("collect_demos: n_episodes must be >= 1");
  DemoSet demos;
  demos.env_name = env.name();
  demos.obs_dim = env.obs_dim();
  demos.act_dim = env.act_dim();
  for (int e = 0; e < n_episodes; ++e) {
    Episode ep;
    ep.seed = derive_seed(seed, static_cast<std::uint64_t>(e), "demo-episode");
    Vec obs = env.reset(ep.seed);
    std::vector<Vec> obs_rows, act_rows;
    while (!env.done()) {
      const Vec action = env.expert_action();
      obs_rows.push_back(obs);
      act_rows.push_back(action);
      obs = env.step(action).observation;
    }
    ep.observations.resize(static_cast<Eigen::Index>(obs_rows.size()),
                           demos.obs_dim);
    ep.actions.resize(static_cast<Eigen::Index>(act_rows.size()),
                      demos.act_dim);
    for (std::size_t i = 0; i < obs_rows.size(); ++i) {
      ep.observations.row(static_cast<Eigen::Index>(i)) = obs_rows[i];
      ep.actions.row(static_cast<Eigen::Index>(i)) = act_rows[i];
    }
    demos.episodes.push_back(std::move(ep));
  }
  return demos;
}

namespace {

constexpr char kMagic[8] = {'C', 'M', 'Z', 'D', 'E', 'M', 'O', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw std::runtime_error("demo file: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("demo file: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_doubles(std::ostream& out, const Mat& m) {
  // Row-major on disk.
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::uint64_t bits;
      const double v = m(r, c);
      std::memcpy(&bits, &v, 8);
      write_u64(out, bits);
    }
}

Mat read_doubles(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const std::uint64_t bits = read_u64(in);
      double v;
      std::memcpy(&v, &bits, 8);
      m(r, c) = v;
    }
  return m;
}

}  // namespace

void save_demos(const DemoSet& demos, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("demo file: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, static_cast<std::uint32_t>(demos.env_name.size()));
  out.write(demos.env_name.data(),
            static_cast<std::streamsize>(demos.env_name.size()));
  write_u32(out, static_cast<std::uint32_t>(demos.obs_dim));
  write_u32(out, static_cast<std::uint32_t>(demos.act_dim));
  write_u32(out, static_cast<std::uint32_t>(demos.episodes.size()));
  for (const Episode& ep : demos.episodes) {
    write_u32(out, static_cast<std::uint32_t>(ep.observations.rows()));
    write_u64(out, ep.seed);
    write_doubles(out, ep.observations);
    write_doubles(out, ep.actions);
  }
}

DemoSet load_demos(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("demo file: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("demo file: bad magic in " + path);
  DemoSet demos;
  const std::uint32_t name_len = read_u32(in);
  demos.env_name.resize(name_len);
  in.read(demos.env_name.data(), name_len);
  demos.obs_dim = static_cast<int>(read_u32(in));
  demos.act_dim = static_cast<int>(read_u32(in));
  const std::uint32_t n_episodes = read_u32(in);
  for (std::uint32_t e = 0; e < n_episodes; ++e) {
    Episode ep;
    const std::uint32_t steps = read_u32(in);
    ep.seed = read_u64(in);
    ep.observations = read_doubles(in, steps, demos.obs_dim);
    ep.actions = read_doubles(in, steps, demos.act_dim);
    demos.episodes.push_back(std::move(ep));
  }
  return demos;
}

}  // namespace cmzdril
