// SPDX-License-Identifier: Apache-2.0
#include "sting/checkpoint.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace sting {
namespace {

constexpr char kMagic[8] = {'S', 'T', 'I', 'N', 'G', 'C', 'K', '1'};
constexpr int kHistoryCols = 8;
constexpr int kEpochCols = 11;

void put_u64(std::ostream &out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i)
    b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char *>(b), 8);
}

std::uint64_t get_u64(std::istream &in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char *>(b), 8))
    throw CheckpointError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream &out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(out, v);
}

double get_f64(std::istream &in) {
  const std::uint64_t v = get_u64(in);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

void put_string(std::ostream &out, const std::string &s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream &in, std::uint64_t limit) {
  const std::uint64_t n = get_u64(in);
  if (n > limit)
    throw CheckpointError("checkpoint: corrupt string length");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw CheckpointError("checkpoint: truncated file");
  return s;
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

using Tensors = std::map<std::string, Matrix>;

Matrix history_matrix(const std::vector<StepLosses> &h) {
  Matrix m(static_cast<Eigen::Index>(h.size()), kHistoryCols);
  for (std::size_t i = 0; i < h.size(); ++i) {
    const StepLosses &s = h[i];
    m.row(i) << (s.adversarial ? 1.0 : 0.0), s.recon_fwd, s.recon_bwd,
        s.consistency, s.adv_fwd, s.adv_bwd, s.gen_total, s.disc;
  }
  return m;
}

StepLosses losses_from(const Matrix &m, Eigen::Index i, Eigen::Index c0) {
  StepLosses s;
  s.adversarial = m(i, c0) != 0.0;
  s.recon_fwd = m(i, c0 + 1);
  s.recon_bwd = m(i, c0 + 2);
  s.consistency = m(i, c0 + 3);
  s.adv_fwd = m(i, c0 + 4);
  s.adv_bwd = m(i, c0 + 5);
  s.gen_total = m(i, c0 + 6);
  s.disc = m(i, c0 + 7);
  return s;
}

Matrix epochs_matrix(const std::vector<EpochMetrics> &e) {
  Matrix m(static_cast<Eigen::Index>(e.size()), kEpochCols);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const StepLosses &s = e[i].mean;
    m.row(i) << static_cast<double>(e[i].epoch),
        static_cast<double>(e[i].step), (e[i].adversarial ? 1.0 : 0.0),
        s.recon_fwd, s.recon_bwd, s.consistency, s.adv_fwd, s.adv_bwd,
        s.gen_total, s.disc, e[i].wall_time;
  }
  return m;
}

void add_optimizer(Tensors &t, const std::string &prefix, const Adam &opt,
                   const ParameterList &params) {
  const bool have = opt.first_moments().size() == params.size();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix zero =
        Matrix::Zero(params[i]->value.rows(), params[i]->value.cols());
    t[prefix + "/m/" + params[i]->name] = have ? opt.first_moments()[i] : zero;
    t[prefix + "/v/" + params[i]->name] = have ? opt.second_moments()[i] : zero;
  }
}

std::map<std::string, std::string> parse_manifest(const std::string &text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

const std::string &need(const std::map<std::string, std::string> &kv,
                        const std::string &key) {
  const auto it = kv.find(key);
  if (it == kv.end())
    throw CheckpointError("checkpoint: manifest lacks '" + key + "'");
  return it->second;
}

template <class T> T number(const std::map<std::string, std::string> &kv,
                            const std::string &key) {
  const std::string &s = need(kv, key);
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw CheckpointError("checkpoint: bad value for '" + key + "'");
  return v;
}

Matrix take(Tensors &t, const std::string &name, Eigen::Index rows,
            Eigen::Index cols) {
  const auto it = t.find(name);
  if (it == t.end())
    throw CheckpointError("checkpoint: missing tensor '" + name + "'");
  if (rows >= 0 && (it->second.rows() != rows || it->second.cols() != cols))
    throw CheckpointError(
        "checkpoint: shape mismatch for '" + name + "': file has " +
        std::to_string(it->second.rows()) + "x" +
        std::to_string(it->second.cols()) + ", model expects " +
        std::to_string(rows) + "x" + std::to_string(cols));
  Matrix m = std::move(it->second);
  t.erase(it);
  return m;
}

void load_optimizer(Tensors &t, const std::string &prefix, Adam &opt,
                    const ParameterList &params) {
  opt.first_moments().clear();
  opt.second_moments().clear();
  for (const Parameter *p : params) {
    opt.first_moments().push_back(take(t, prefix + "/m/" + p->name,
                                       p->value.rows(), p->value.cols()));
    opt.second_moments().push_back(take(t, prefix + "/v/" + p->name,
                                        p->value.rows(), p->value.cols()));
  }
}

} // namespace

void save_checkpoint(std::ostream &out, const Checkpoint &ck) {
  // Parameter lists need non-const access; nothing is modified.
  TrainState &state = const_cast<TrainState &>(ck.state);
  const ModelConfig &mc = state.model.config;

  std::ostringstream man;
  man << "format=1\n";
  man << "model.features=" << mc.features << "\n";
  man << "model.hidden=" << mc.hidden << "\n";
  man << "model.disc_hidden=" << mc.disc_hidden << "\n";
  man << "model.heads=" << mc.heads << "\n";
  man << "model.attention=" << (mc.attention ? 1 : 0) << "\n";
  man << "model.backward=" << (mc.backward ? 1 : 0) << "\n";
  man << "state.epoch=" << state.epoch << "\n";
  man << "state.step=" << state.step << "\n";
  man << "state.d_updates=" << state.d_updates << "\n";
  man << "state.g_updates=" << state.g_updates << "\n";
  man << "adam_g.t=" << state.opt_g.steps() << "\n";
  man << "adam_d.t=" << state.opt_d.steps() << "\n";
  man << "adam_g.lr=" << fmt(state.opt_g.learning_rate()) << "\n";
  man << "adam_d.lr=" << fmt(state.opt_d.learning_rate()) << "\n";
  man << "norm.eps=" << fmt(ck.norm.eps) << "\n";
  std::ostringstream rng;
  rng << state.rng;
  man << "rng=" << rng.str() << "\n";

  Tensors tensors;
  for (const Parameter *p : state.model.all_parameters())
    tensors[p->name] = p->value;
  add_optimizer(tensors, "adam_g", state.opt_g,
                state.model.generator_parameters());
  add_optimizer(tensors, "adam_d", state.opt_d,
                state.model.discriminator_parameters());
  tensors["state/history"] = history_matrix(state.history);
  tensors["state/epochs"] = epochs_matrix(state.epochs);
  const Eigen::Index nf = ck.norm.features();
  Matrix norm(3, nf);
  for (Eigen::Index d = 0; d < nf; ++d) {
    norm(0, d) = ck.norm.min(d);
    norm(1, d) = ck.norm.max(d);
    norm(2, d) = ck.norm.degenerate[d] ? 1.0 : 0.0;
  }
  tensors["norm/stats"] = norm;

  out.write(kMagic, sizeof(kMagic));
  put_string(out, man.str());
  put_u64(out, ck.feature_names.size());
  for (const std::string &n : ck.feature_names)
    put_string(out, n);
  put_string(out, ck.config_text);
  put_u64(out, tensors.size());
  for (const auto &[name, m] : tensors) {
    put_string(out, name);
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        put_f64(out, m(i, j));
  }
  if (!out)
    throw CheckpointError("checkpoint: write failed");
}

void save_checkpoint(const std::string &path, const Checkpoint &ck) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out)
      throw CheckpointError("checkpoint: cannot write '" + tmp + "'");
    save_checkpoint(out, ck);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw CheckpointError("checkpoint: cannot rename to '" + path + "'");
}

Checkpoint load_checkpoint(std::istream &in) {
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("checkpoint: bad magic (not a checkpoint file)");
  constexpr std::uint64_t kMaxText = 1u << 26;
  const auto kv = parse_manifest(get_string(in, kMaxText));
  if (need(kv, "format") != "1")
    throw CheckpointError("checkpoint: unsupported format version");

  Checkpoint ck;
  const std::uint64_t nnames = get_u64(in);
  if (nnames > kMaxText)
    throw CheckpointError("checkpoint: corrupt feature count");
  for (std::uint64_t i = 0; i < nnames; ++i)
    ck.feature_names.push_back(get_string(in, kMaxText));
  ck.config_text = get_string(in, kMaxText);

  Tensors tensors;
  const std::uint64_t count = get_u64(in);
  if (count > kMaxText)
    throw CheckpointError("checkpoint: corrupt tensor count");
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = get_string(in, kMaxText);
    const std::uint64_t rows = get_u64(in);
    const std::uint64_t cols = get_u64(in);
    if (rows > kMaxText || cols > kMaxText || rows * cols > kMaxText)
      throw CheckpointError("checkpoint: corrupt shape for '" + name + "'");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        m(i, j) = get_f64(in);
    tensors[name] = std::move(m);
  }

  ModelConfig mc;
  mc.features = number<long>(kv, "model.features");
  mc.hidden = number<long>(kv, "model.hidden");
  mc.disc_hidden = number<long>(kv, "model.disc_hidden");
  mc.heads = number<long>(kv, "model.heads");
  mc.attention = number<int>(kv, "model.attention") != 0;
  mc.backward = number<int>(kv, "model.backward") != 0;
  if (mc.features < 1 || mc.hidden < 1 || mc.disc_hidden < 1 || mc.heads < 1)
    throw CheckpointError("checkpoint: invalid model shape in manifest");

  TrainState &s = ck.state;
  Rng scratch(0);
  s.model = StingModel::init(mc, scratch);
  for (Parameter *p : s.model.all_parameters()) {
    p->value = take(tensors, p->name, p->value.rows(), p->value.cols());
    p->zero_grad();
  }
  s.opt_g = Adam(number<double>(kv, "adam_g.lr"));
  s.opt_d = Adam(number<double>(kv, "adam_d.lr"));
  s.opt_g.set_steps(number<long>(kv, "adam_g.t"));
  s.opt_d.set_steps(number<long>(kv, "adam_d.t"));
  load_optimizer(tensors, "adam_g", s.opt_g, s.model.generator_parameters());
  load_optimizer(tensors, "adam_d", s.opt_d,
                 s.model.discriminator_parameters());
  s.epoch = number<long>(kv, "state.epoch");
  s.step = number<long>(kv, "state.step");
  s.d_updates = number<long>(kv, "state.d_updates");
  s.g_updates = number<long>(kv, "state.g_updates");
  if (s.epoch < 0 || s.step < 0 || s.d_updates < 0 || s.g_updates < 0)
    throw CheckpointError("checkpoint: negative counters");
  std::istringstream rng(need(kv, "rng"));
  rng >> s.rng;
  if (!rng)
    throw CheckpointError("checkpoint: unreadable rng state");

  const Matrix hist = take(tensors, "state/history", -1, -1);
  if (hist.rows() != s.step || (hist.rows() > 0 && hist.cols() != kHistoryCols))
    throw CheckpointError("checkpoint: loss history does not match step count");
  for (Eigen::Index i = 0; i < hist.rows(); ++i)
    s.history.push_back(losses_from(hist, i, 0));
  const Matrix ep = take(tensors, "state/epochs", -1, -1);
  if (ep.rows() > 0 && ep.cols() != kEpochCols)
    throw CheckpointError("checkpoint: malformed epoch records");
  for (Eigen::Index i = 0; i < ep.rows(); ++i) {
    EpochMetrics m;
    m.epoch = static_cast<long>(ep(i, 0));
    m.step = static_cast<long>(ep(i, 1));
    m.adversarial = ep(i, 2) != 0.0;
    m.mean = losses_from(ep, i, 2);
    m.wall_time = ep(i, 10);
    s.epochs.push_back(m);
  }

  const Matrix norm = take(tensors, "norm/stats", -1, -1);
  if (norm.rows() != 3 || (norm.cols() != mc.features && norm.cols() != 0))
    throw CheckpointError("checkpoint: normalization stats have wrong shape");
  ck.norm.eps = number<double>(kv, "norm.eps");
  ck.norm.min = norm.row(0).transpose();
  ck.norm.max = norm.row(1).transpose();
  ck.norm.degenerate.clear();
  for (Eigen::Index d = 0; d < norm.cols(); ++d)
    ck.norm.degenerate.push_back(norm(2, d) != 0.0);

  if (!tensors.empty())
    throw CheckpointError("checkpoint: unexpected tensor '" +
                          tensors.begin()->first + "'");
  return ck;
}

Checkpoint load_checkpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw CheckpointError("checkpoint: cannot open '" + path + "'");
  return load_checkpoint(in);
}

} // namespace sting
