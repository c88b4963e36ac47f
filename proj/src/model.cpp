#include "ren/model.hpp"

#include "ren/equilibrium.hpp"
#include "ren/errors.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace ren {

int SequenceBatch::input_dim() const {
  return inputs.empty() ? 0 : static_cast<int>(inputs.front().cols());
}

int SequenceBatch::output_dim() const {
  return outputs.empty() ? 0 : static_cast<int>(outputs.front().cols());
}

Eigen::Index SequenceBatch::min_length() const {
  Eigen::Index t = std::numeric_limits<Eigen::Index>::max();
  for (const auto& u : inputs) t = std::min(t, u.rows());
  return inputs.empty() ? 0 : t;
}

Eigen::Index SequenceBatch::total_length() const {
  Eigen::Index t = 0;
  for (const auto& u : inputs) t += u.rows();
  return t;
}

void SequenceBatch::validate() const {
  if (inputs.empty()) throw DimensionError("sequence batch is empty");
  const int m = input_dim();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].rows() < 1) throw DimensionError("sequence " + std::to_string(i) + " is empty");
    if (inputs[i].cols() != m) throw DimensionError("inconsistent input width across sequences");
  }
  if (has_outputs()) {
    if (outputs.size() != inputs.size())
      throw DimensionError("outputs and inputs have different sequence counts");
    const int p = output_dim();
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      if (outputs[i].rows() != inputs[i].rows())
        throw DimensionError("sequence " + std::to_string(i) + ": output length differs from input");
      if (outputs[i].cols() != p) throw DimensionError("inconsistent output width across sequences");
    }
  }
  if (!initial_states.empty() && initial_states.size() != inputs.size())
    throw DimensionError("initial_states must match the number of sequences");
}

namespace {

std::optional<Vector> solver_metric(const ExplicitModel& m) {
  if (m.certificate && m.certificate->Lambda.size() == m.dims.q) return m.certificate->Lambda;
  return std::nullopt;
}

void check_model_input(const ExplicitModel& model, Eigen::Index m_cols) {
  if (m_cols != model.dims.m)
    throw DimensionError("input has " + std::to_string(m_cols) + " columns, model expects " +
                         std::to_string(model.dims.m));
}

}  // namespace

BatchRollout simulate_batch(const ExplicitModel& model, const std::vector<Matrix>& u,
                            const Matrix& x0, const SolverOptions& opts) {
  const auto& d = model.dims;
  const Eigen::Index B = x0.cols();
  if (x0.rows() != d.n) throw DimensionError("initial state has the wrong dimension");
  const bool acyclic = is_acyclic(model.kind) && equilibrium::is_strictly_lower(model.D11);
  const auto metric = solver_metric(model);

  BatchRollout r;
  const std::size_t T = u.size();
  r.x.reserve(T + 1);
  r.v.reserve(T);
  r.w.reserve(T);
  r.y.reserve(T);
  r.x.push_back(x0);
  for (std::size_t t = 0; t < T; ++t) {
    if (u[t].rows() != d.m || u[t].cols() != B) throw DimensionError("input batch has the wrong shape");
    const Matrix& xt = r.x.back();
    Matrix bw = model.C1 * xt + model.D12 * u[t];
    bw.colwise() += model.bv;
    Matrix wt;
    try {
      wt = equilibrium::solve_batch(model.D11, bw, model.activation, acyclic, opts.tolerance,
                                    opts.max_iters, metric, opts.step);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("at t=" + std::to_string(t) + ": " + e.what(), e.residual());
    }
    Matrix vt = bw + model.D11 * wt;
    Matrix xn = model.A * xt + model.B1 * wt + model.B2 * u[t];
    xn.colwise() += model.bx;
    Matrix yt = model.C2 * xt + model.D21 * wt + model.D22 * u[t];
    yt.colwise() += model.by;
    r.v.push_back(std::move(vt));
    r.w.push_back(std::move(wt));
    r.y.push_back(std::move(yt));
    r.x.push_back(std::move(xn));
  }
  return r;
}

BatchCotangent backward_batch(const ExplicitModel& model, const std::vector<Matrix>& u,
                              const BatchRollout& roll, const std::vector<Matrix>& ybar) {
  const auto& d = model.dims;
  const std::size_t T = u.size();
  const Eigen::Index B = roll.x.front().cols();
  const bool acyclic = is_acyclic(model.kind) && equilibrium::is_strictly_lower(model.D11);
  BatchCotangent out;
  out.weights = ModelGradient::zeros(d);
  out.u.assign(T, Matrix());
  auto& g = out.weights;
  Matrix xbar = Matrix::Zero(d.n, B);  // cotangent of x_{t+1}
  for (std::size_t k = T; k-- > 0;) {
    const Matrix& xt = roll.x[k];
    const Matrix& wt = roll.w[k];
    const Matrix& yb = ybar[k];
    g.C2.noalias() += yb * xt.transpose();
    g.D21.noalias() += yb * wt.transpose();
    g.D22.noalias() += yb * u[k].transpose();
    g.by += yb.rowwise().sum();
    g.A.noalias() += xbar * xt.transpose();
    g.B1.noalias() += xbar * wt.transpose();
    g.B2.noalias() += xbar * u[k].transpose();
    g.bx += xbar.rowwise().sum();
    const Matrix wbar = model.D21.transpose() * yb + model.B1.transpose() * xbar;
    const Matrix vbar = equilibrium::vjp_batch(model.D11, roll.v[k], wbar, model.activation, acyclic);
    g.D11.noalias() += vbar * wt.transpose();
    g.C1.noalias() += vbar * xt.transpose();
    g.D12.noalias() += vbar * u[k].transpose();
    g.bv += vbar.rowwise().sum();
    out.u[k] = model.B2.transpose() * xbar + model.D22.transpose() * yb +
               model.D12.transpose() * vbar;
    xbar = model.A.transpose() * xbar + model.C2.transpose() * yb + model.C1.transpose() * vbar;
  }
  out.x0 = xbar;
  return out;
}

Trajectory simulate(const ExplicitModel& model, const Matrix& u, const Vector& x0,
                    const SolverOptions& opts) {
  check_model_input(model, u.cols());
  std::vector<Matrix> us(u.rows());
  for (Eigen::Index t = 0; t < u.rows(); ++t) us[t] = u.row(t).transpose();
  const BatchRollout r = simulate_batch(model, us, x0, opts);
  const auto& d = model.dims;
  Trajectory tr;
  tr.y.resize(u.rows(), d.p);
  tr.w.resize(u.rows(), d.q);
  tr.x.resize(u.rows() + 1, d.n);
  for (Eigen::Index t = 0; t < u.rows(); ++t) {
    tr.y.row(t) = r.y[t].col(0).transpose();
    tr.w.row(t) = r.w[t].col(0).transpose();
  }
  for (Eigen::Index t = 0; t <= u.rows(); ++t) tr.x.row(t) = r.x[t].col(0).transpose();
  return tr;
}

Trajectory simulate(const ExplicitModel& model, const Matrix& u) {
  return simulate(model, u, Vector::Zero(model.dims.n));
}

Vector trajectory_pair_gap(const ExplicitModel& model, const Matrix& u, const Vector& a,
                           const Vector& b, const SolverOptions& opts) {
  const Trajectory ta = simulate(model, u, a, opts);
  const Trajectory tb = simulate(model, u, b, opts);
  return (ta.x - tb.x).rowwise().norm();
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& path, int line) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end)
    throw IoError(path + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  return v;
}

}  // namespace

SequenceBatch read_sequences_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  const auto header = split_csv(line);
  int t_col = -1, id_col = -1;
  std::vector<int> u_cols, y_cols;
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    const std::string& h = header[c];
    if (h == "t") {
      t_col = c;
    } else if (h == "seq_id") {
      id_col = c;
    } else if (h.size() > 1 && (h[0] == 'u' || h[0] == 'y') &&
               h.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int idx = std::stoi(h.substr(1));
      auto& cols = h[0] == 'u' ? u_cols : y_cols;
      if (idx != static_cast<int>(cols.size()) + 1)
        throw IoError(path + ":1: column '" + h + "' out of order");
      cols.push_back(c);
    } else {
      throw IoError(path + ":1: unknown column '" + h + "'");
    }
  }
  if (t_col < 0) throw IoError(path + ":1: missing 't' column");
  if (u_cols.empty()) throw IoError(path + ":1: no input columns");

  // Rows grouped per sequence id, in order of first appearance.
  std::vector<long long> order;
  std::map<long long, std::vector<std::vector<double>>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
    std::vector<double> vals(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) vals[c] = parse_number(cells[c], path, lineno);
    const long long id = id_col >= 0 ? static_cast<long long>(vals[id_col]) : 0;
    if (!rows.count(id)) order.push_back(id);
    rows[id].push_back(std::move(vals));
  }
  if (order.empty()) throw IoError(path + ": no data rows");

  SequenceBatch batch;
  for (long long id : order) {
    const auto& rs = rows[id];
    Matrix u(rs.size(), u_cols.size());
    Matrix y(rs.size(), y_cols.size());
    for (std::size_t r = 0; r < rs.size(); ++r) {
      for (std::size_t c = 0; c < u_cols.size(); ++c) u(r, c) = rs[r][u_cols[c]];
      for (std::size_t c = 0; c < y_cols.size(); ++c) y(r, c) = rs[r][y_cols[c]];
    }
    batch.inputs.push_back(std::move(u));
    if (!y_cols.empty()) batch.outputs.push_back(std::move(y));
  }
  return batch;
}

void write_sequences_csv(const std::string& path, const SequenceBatch& batch) {
  batch.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  const bool multi = batch.size() > 1;
  out << (multi ? "seq_id,t" : "t");
  for (int i = 1; i <= batch.input_dim(); ++i) out << ",u" << i;
  for (int i = 1; i <= batch.output_dim(); ++i) out << ",y" << i;
  out << '\n' << std::setprecision(17);
  for (std::size_t s = 0; s < batch.size(); ++s) {
    for (Eigen::Index t = 0; t < batch.inputs[s].rows(); ++t) {
      if (multi) out << s << ',';
      out << t;
      for (Eigen::Index c = 0; c < batch.inputs[s].cols(); ++c) out << ',' << batch.inputs[s](t, c);
      if (batch.has_outputs())
        for (Eigen::Index c = 0; c < batch.outputs[s].cols(); ++c)
          out << ',' << batch.outputs[s](t, c);
      out << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace ren
