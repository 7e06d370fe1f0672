#include "cmzdril/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cmzdril {

std::string format_hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str())
    throw std::runtime_error("checkpoint: bad number '" + s + "'");
  return v;
}

namespace {

void write_matrix(std::ostream& out, const Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ' ';
      out << format_hex(m(r, c));
    }
    out << '\n';
  }
}

Mat read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Mat m(rows, cols);
  std::string tok;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated matrix");
      m(r, c) = parse_hex(tok);
    }
  return m;
}

void expect(std::istream& in, const std::string& want) {
  std::string tok;
  if (!(in >> tok) || tok != want)
    throw std::runtime_error("checkpoint: expected '" + want + "', got '" +
                             tok + "'");
}

void write_mlp(std::ostream& out, const Mlp& net) {
  out << "hidden " << net.hidden_dims().size();
  for (const int h : net.hidden_dims()) out << ' ' << h;
  out << '\n';
  for (int l = 0; l < net.layer_count(); ++l) {
    const Tensor& w = net.weight(l);
    out << "layer " << l << ' ' << w.value.rows() << ' ' << w.value.cols()
        << '\n';
    write_matrix(out, w.value);
    write_matrix(out, net.bias(l).value.transpose());
  }
}

void read_mlp_values(std::istream& in, Mlp& net) {
  for (int l = 0; l < net.layer_count(); ++l) {
    expect(in, "layer");
    int idx = 0;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> idx >> rows >> cols) || idx != l)
      throw std::runtime_error("checkpoint: bad layer header");
    if (rows != net.weight(l).value.rows() || cols != net.weight(l).value.cols())
      throw std::runtime_error("checkpoint: layer shape mismatch");
    net.weight(l).value = read_matrix(in, rows, cols);
    net.bias(l).value = read_matrix(in, 1, rows).transpose();
  }
}

std::vector<int> read_hidden(std::istream& in) {
  expect(in, "hidden");
  std::size_t count = 0;
  if (!(in >> count)) throw std::runtime_error("checkpoint: bad hidden count");
  std::vector<int> hidden(count);
  for (auto& h : hidden)
    if (!(in >> h)) throw std::runtime_error("checkpoint: bad hidden dim");
  return hidden;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  return in;
}

}  // namespace

void save_policy(const GaussianPolicy& policy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << "cmzdril-policy v1\n";
  out << "obs_dim " << policy.obs_dim() << '\n';
  out << "act_dim " << policy.act_dim() << '\n';
  out << "log_std";
  const Vec ls = policy.log_std();
  for (Eigen::Index i = 0; i < ls.size(); ++i) out << ' ' << format_hex(ls[i]);
  out << '\n';
  write_mlp(out, policy.net());
}

GaussianPolicy load_policy(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  expect(in, "cmzdril-policy");
  expect(in, "v1");
  int obs_dim = 0, act_dim = 0;
  expect(in, "obs_dim");
  in >> obs_dim;
  expect(in, "act_dim");
  in >> act_dim;
  expect(in, "log_std");
  Vec ls(act_dim);
  std::string tok;
  for (int i = 0; i < act_dim; ++i) {
    in >> tok;
    ls[i] = parse_hex(tok);
  }
  const std::vector<int> hidden = read_hidden(in);
  GaussianPolicy policy(obs_dim, act_dim, hidden, 0);
  policy.set_log_std(ls);
  read_mlp_values(in, policy.net());
  return policy;
}

void save_value_net(const ValueNet& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << "cmzdril-value v1\n";
  out << "obs_dim " << net.obs_dim() << '\n';
  write_mlp(out, net.net());
}

ValueNet load_value_net(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  expect(in, "cmzdril-value");
  expect(in, "v1");
  int obs_dim = 0;
  expect(in, "obs_dim");
  in >> obs_dim;
  const std::vector<int> hidden = read_hidden(in);
  ValueNet net(obs_dim, hidden, 0);
  read_mlp_values(in, net.net());
  return net;
}

}  // namespace cmzdril
