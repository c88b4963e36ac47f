#include "ren/serialize.hpp"

#include "ren/errors.hpp"

#include <cmath>
#include <fstream>

namespace ren {

using nlohmann::json;

namespace {

double finite_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw IoError(what + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw IoError(what + ": non-finite value");
  return v;
}

const json& field(const json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) throw IoError(ctx + ": missing field '" + key + "'");
  return j.at(key);
}

int dim_field(const json& j, const char* key) {
  const json& v = field(j, key, "dims");
  if (!v.is_number_integer() || v.get<long long>() < 0 || v.get<long long>() > 100000)
    throw IoError(std::string("dims.") + key + ": expected a non-negative integer");
  return v.get<int>();
}

}  // namespace

json matrix_to_json(const Matrix& a) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < a.cols(); ++k) r.push_back(a(i, k));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols,
                        const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw IoError(what + ": expected " + std::to_string(rows) + " rows");
  Matrix a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& r = j[i];
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols)
      throw IoError(what + ": row " + std::to_string(i) + " should have " + std::to_string(cols) +
                    " entries");
    for (Eigen::Index k = 0; k < cols; ++k) a(i, k) = finite_number(r[k], what);
  }
  return a;
}

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from_json(const json& j, Eigen::Index size, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
    throw IoError(what + ": expected " + std::to_string(size) + " entries");
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = finite_number(j[i], what);
  return v;
}

json iqc_to_json(const IqcSpec& iqc) {
  json j;
  j["kind"] = to_string(iqc.kind);
  j["parameter"] = iqc.parameter;
  j["Q"] = matrix_to_json(iqc.Q);
  j["S"] = matrix_to_json(iqc.S);
  j["R"] = matrix_to_json(iqc.R);
  return j;
}

IqcSpec iqc_from_json(const json& j, int p, int m) {
  const json& kind = field(j, "kind", "iqc");
  if (!kind.is_string()) throw IoError("iqc.kind: expected a string");
  const IqcKind k = iqc_kind_from_string(kind.get<std::string>());
  IqcSpec s;
  if (k != IqcKind::kGeneral && !j.contains("Q")) {
    const double par = finite_number(field(j, "parameter", "iqc"), "iqc.parameter");
    switch (k) {
      case IqcKind::kLipschitz: s = IqcSpec::lipschitz(par, p, m); break;
      case IqcKind::kInputPassive: s = IqcSpec::input_passive(par, p); break;
      case IqcKind::kOutputPassive: s = IqcSpec::output_passive(par, p); break;
      default: break;
    }
  } else {
    s.kind = k;
    s.parameter = j.contains("parameter") ? finite_number(j["parameter"], "iqc.parameter") : 0.0;
    s.Q = matrix_from_json(field(j, "Q", "iqc"), p, p, "iqc.Q");
    s.S = matrix_from_json(field(j, "S", "iqc"), m, p, "iqc.S");
    s.R = matrix_from_json(field(j, "R", "iqc"), m, m, "iqc.R");
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw IoError(std::string("iqc: ") + e.what());
  }
  return s;
}

json params_to_json(const DirectParams& t) {
  json j;
  j["kind"] = to_string(t.kind);
  j["dims"] = {{"n", t.dims.n}, {"m", t.dims.m}, {"p", t.dims.p}, {"q", t.dims.q}};
  j["activation"] = to_string(t.activation);
  j["epsilon"] = t.epsilon;
  j["alpha_bar"] = t.alpha_bar;
  j["theta"] = vector_to_json(t.flatten());
  return j;
}

DirectParams params_from_json(const json& j) {
  try {
    const json& kind = field(j, "kind", "params");
    if (!kind.is_string()) throw IoError("params.kind: expected a string");
    const json& dj = field(j, "dims", "params");
    const Dims d{dim_field(dj, "n"), dim_field(dj, "m"), dim_field(dj, "p"), dim_field(dj, "q")};
    DirectParams t = DirectParams::zeros(model_kind_from_string(kind.get<std::string>()), d);
    const json& act = field(j, "activation", "params");
    if (!act.is_string()) throw IoError("params.activation: expected a string");
    t.activation = activation_from_string(act.get<std::string>());
    t.epsilon = finite_number(field(j, "epsilon", "params"), "params.epsilon");
    t.alpha_bar = finite_number(field(j, "alpha_bar", "params"), "params.alpha_bar");
    t.unflatten(vector_from_json(field(j, "theta", "params"), t.size(), "params.theta"));
    t.validate();
    return t;
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(std::string("params: ") + e.what());
  }
}

json model_to_json(const ExplicitModel& m) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = to_string(m.kind);
  j["dims"] = {{"n", m.dims.n}, {"m", m.dims.m}, {"p", m.dims.p}, {"q", m.dims.q}};
  j["activation"] = to_string(m.activation);
  j["epsilon"] = m.epsilon;
  j["alpha_bar"] = m.alpha_bar;
  j["iqc"] = m.iqc ? iqc_to_json(*m.iqc) : json(nullptr);
  j["matrices"] = {{"A", matrix_to_json(m.A)},     {"B1", matrix_to_json(m.B1)},
                   {"B2", matrix_to_json(m.B2)},   {"C1", matrix_to_json(m.C1)},
                   {"D11", matrix_to_json(m.D11)}, {"D12", matrix_to_json(m.D12)},
                   {"C2", matrix_to_json(m.C2)},   {"D21", matrix_to_json(m.D21)},
                   {"D22", matrix_to_json(m.D22)}};
  j["biases"] = {{"bx", vector_to_json(m.bx)},
                 {"bv", vector_to_json(m.bv)},
                 {"by", vector_to_json(m.by)}};
  if (m.certificate) {
    const auto& c = *m.certificate;
    j["certificate"] = {{"P", matrix_to_json(c.P)},
                        {"Lambda", vector_to_json(c.Lambda)},
                        {"alpha", c.alpha},
                        {"lmi_min_eig", c.lmi_min_eig},
                        {"wellposed_min_eig", c.wellposed_min_eig}};
  } else {
    j["certificate"] = nullptr;
  }
  if (m.params) j["params"] = params_to_json(*m.params);
  return j;
}

ExplicitModel model_from_json(const json& j) {
  try {
    if (!j.is_object()) throw IoError("model: expected a JSON object");
    const json& ver = field(j, "format_version", "model");
    if (!ver.is_number_integer() || ver.get<int>() != kFormatVersion)
      throw IoError("model: unsupported format_version");
    const json& kind = field(j, "kind", "model");
    if (!kind.is_string()) throw IoError("model.kind: expected a string");
    const json& dj = field(j, "dims", "model");
    const Dims d{dim_field(dj, "n"), dim_field(dj, "m"), dim_field(dj, "p"), dim_field(dj, "q")};
    const json& act = field(j, "activation", "model");
    if (!act.is_string()) throw IoError("model.activation: expected a string");
    ExplicitModel m = ExplicitModel::zeros(model_kind_from_string(kind.get<std::string>()), d,
                                           activation_from_string(act.get<std::string>()));
    m.epsilon = finite_number(field(j, "epsilon", "model"), "model.epsilon");
    m.alpha_bar = finite_number(field(j, "alpha_bar", "model"), "model.alpha_bar");
    if (j.contains("iqc") && !j["iqc"].is_null()) m.iqc = iqc_from_json(j["iqc"], d.p, d.m);

    const json& mats = field(j, "matrices", "model");
    auto mat = [&](const char* name, int r, int c) {
      return matrix_from_json(field(mats, name, "matrices"), r, c, std::string("matrices.") + name);
    };
    m.A = mat("A", d.n, d.n);
    m.B1 = mat("B1", d.n, d.q);
    m.B2 = mat("B2", d.n, d.m);
    m.C1 = mat("C1", d.q, d.n);
    m.D11 = mat("D11", d.q, d.q);
    m.D12 = mat("D12", d.q, d.m);
    m.C2 = mat("C2", d.p, d.n);
    m.D21 = mat("D21", d.p, d.q);
    m.D22 = mat("D22", d.p, d.m);
    const json& bj = field(j, "biases", "model");
    m.bx = vector_from_json(field(bj, "bx", "biases"), d.n, "biases.bx");
    m.bv = vector_from_json(field(bj, "bv", "biases"), d.q, "biases.bv");
    m.by = vector_from_json(field(bj, "by", "biases"), d.p, "biases.by");

    if (j.contains("certificate") && !j["certificate"].is_null()) {
      const json& cj = j["certificate"];
      Certificate c;
      c.P = matrix_from_json(field(cj, "P", "certificate"), d.n, d.n, "certificate.P");
      c.Lambda = vector_from_json(field(cj, "Lambda", "certificate"), d.q, "certificate.Lambda");
      c.alpha = finite_number(field(cj, "alpha", "certificate"), "certificate.alpha");
      c.lmi_min_eig = finite_number(field(cj, "lmi_min_eig", "certificate"), "certificate.lmi_min_eig");
      c.wellposed_min_eig =
          finite_number(field(cj, "wellposed_min_eig", "certificate"), "certificate.wellposed_min_eig");
      m.certificate = std::move(c);
    }
    if (j.contains("params") && !j["params"].is_null()) {
      m.params = params_from_json(j["params"]);
      if (m.params->dims != d || m.params->kind != m.kind)
        throw IoError("model.params: kind or dims disagree with the model");
    }
    m.validate();
    return m;
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(std::string("model: ") + e.what());
  } catch (const json::exception& e) {
    throw IoError(std::string("model: ") + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

void save_model(const std::string& path, const ExplicitModel& m) {
  write_json_file(path, model_to_json(m));
}

ExplicitModel load_model(const std::string& path) {
  const json j = read_json_file(path);
  try {
    return model_from_json(j);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace ren
