#pragma once

// JSON problem files, reports and CSV output.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddsynth/kernelbasis.hpp"
#include "ddsynth/lmi/problem.hpp"
#include "ddsynth/model.hpp"
#include "ddsynth/verify/simulate.hpp"

namespace ddsynth {

using Json = nlohmann::ordered_json;

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json parse_json(const std::string& text, const std::string& origin = "input") {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(origin + ": malformed JSON: " + e.what());
  }
}

// ---- matrices -------------------------------------------------------------

inline Json to_json(const Mat& a) {
  Json rows = Json::array();
  for (Index i = 0; i < a.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Json vec_to_json(const Vec& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline double number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw InputError(what + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw InputError(what + ": non-finite value");
  return v;
}

/// Matrix of unknown shape from a nested array (a scalar is 1x1).
inline Mat parse_matrix(const Json& j, const std::string& what) {
  if (j.is_number()) return Mat::Constant(1, 1, number(j, what));
  if (!j.is_array()) throw InputError(what + ": expected a row-major array of rows");
  if (j.empty()) return Mat(0, 0);
  if (!j.front().is_array()) throw InputError(what + ": expected a row-major array of rows");
  const std::size_t rows = j.size(), cols = j.front().size();
  Mat a(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw InputError(what + ": ragged rows");
    for (std::size_t k = 0; k < cols; ++k)
      a(static_cast<Index>(i), static_cast<Index>(k)) = number(j[i][k], what);
  }
  return a;
}

/// Matrix with an expected shape. A flat array fills a row or column
/// vector; a missing entry is allowed only for zero-size shapes or when
/// `zero_if_missing` is set.
inline Mat parse_matrix(const Json& obj, const char* key, Index rows, Index cols, bool zero_if_missing = false) {
  const std::string what = key;
  if (!obj.contains(key) || obj[key].is_null()) {
    if (rows == 0 || cols == 0 || zero_if_missing) return Mat::Zero(rows, cols);
    throw InputError("missing matrix '" + what + "' (" + std::to_string(rows) + "x" + std::to_string(cols) + ")");
  }
  const Json& j = obj[key];
  Mat a;
  if (j.is_array() && !j.empty() && !j.front().is_array()) {
    Vec v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i], what);
    if (rows == 1) a = v.transpose();
    else a = v;
  } else if (j.is_array() && j.empty()) {
    a = Mat::Zero(rows, cols);
    if (rows != 0 && cols != 0) throw InputError(what + ": empty array for a " + std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
  } else {
    a = parse_matrix(j, what);
  }
  if (a.rows() != rows || a.cols() != cols) {
    throw InputError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " + shape_str(a));
  }
  return a;
}

inline Vec parse_vector(const Json& j, const std::string& what) {
  if (j.is_number()) return Vec::Constant(1, number(j, what));
  if (!j.is_array()) throw InputError(what + ": expected an array");
  Vec v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = number(j[i], what);
  return v;
}

inline Index count_field(const Json& obj, const char* key, bool required = true) {
  if (!obj.contains(key)) {
    if (required) throw InputError(std::string("missing dimension '") + key + "'");
    return 0;
  }
  if (!obj[key].is_number_integer() || obj[key].get<long long>() < 0) {
    throw InputError(std::string("dimension '") + key + "' must be a non-negative integer");
  }
  return static_cast<Index>(obj[key].get<long long>());
}

// ---- kernel ----------------------------------------------------------------

/// {"rho", "M", "m0", "labels"} or {"type": "legendre", "degree": d}.
/// Legendre kernels need the delay, passed as r.
inline KernelBasis parse_kernel(const Json& j, double r) {
  if (!j.is_object()) throw InputError("kernel: expected an object");
  if (j.value("type", std::string()) == "legendre") {
    if (!j.contains("degree") || !j["degree"].is_number_integer()) throw InputError("kernel: legendre needs 'degree'");
    return legendre_basis(j["degree"].get<int>(), r);
  }
  if (!j.contains("M") || !j.contains("m0")) throw InputError("kernel: 'M' and 'm0' are required");
  const Mat M = parse_matrix(j["M"], "kernel.M");
  const Vec m0 = parse_vector(j["m0"], "kernel.m0");
  if (j.contains("rho") && count_field(j, "rho") != m0.size()) throw InputError("kernel: rho does not match m0");
  std::vector<std::string> labels;
  if (j.contains("labels")) {
    for (const auto& l : j["labels"]) {
      if (!l.is_string()) throw InputError("kernel.labels: expected strings");
      labels.push_back(l.get<std::string>());
    }
  }
  try {
    return make_basis(M, m0, labels);
  } catch (const DimensionError& e) {
    throw InputError(std::string("kernel: ") + e.what());
  }
}

inline Json to_json(const KernelBasis& b) {
  Json j;
  j["rho"] = b.rho();
  j["M"] = to_json(b.generator());
  j["m0"] = vec_to_json(b.m0());
  if (!b.labels().empty()) j["labels"] = b.labels();
  return j;
}

// ---- system ----------------------------------------------------------------

inline DDSystem parse_system(const Json& j) {
  if (!j.is_object()) throw InputError("system: expected a JSON object");
  DDSystem s;
  s.n = count_field(j, "n");
  if (s.n < 1) throw InputError("system: n must be >= 1");
  s.m = count_field(j, "m", false);
  s.p = count_field(j, "p", false);
  s.q = count_field(j, "q", false);
  if (!j.contains("r")) throw InputError("system: missing delay 'r'");
  s.r = number(j["r"], "r");
  if (!(s.r > 0.0)) throw InputError("system: delay r must be positive");
  if (j.contains("kernel") && !j["kernel"].is_null()) s.basis = parse_kernel(j["kernel"], s.r);
  else s.basis = make_basis(Mat::Zero(1, 1), Vec::Ones(1), {"constant"});
  const Index rn = s.rho() * s.n;
  s.A1 = parse_matrix(j, "A1", s.n, s.n);
  s.A2 = parse_matrix(j, "A2", s.n, s.n, true);
  s.A3 = parse_matrix(j, "A3", s.n, rn, true);
  s.B1 = parse_matrix(j, "B1", s.n, s.p);
  s.B2 = parse_matrix(j, "B2", s.n, s.q);
  s.C1 = parse_matrix(j, "C1", s.m, s.n, true);
  s.C2 = parse_matrix(j, "C2", s.m, s.n, true);
  s.C3 = parse_matrix(j, "C3", s.m, rn, true);
  s.D1 = parse_matrix(j, "D1", s.m, s.p, true);
  s.D2 = parse_matrix(j, "D2", s.m, s.q, true);
  return s;
}

inline Json to_json(const DDSystem& s) {
  Json j;
  j["n"] = s.n, j["m"] = s.m, j["p"] = s.p, j["q"] = s.q, j["r"] = s.r;
  j["A1"] = to_json(s.A1), j["A2"] = to_json(s.A2), j["A3"] = to_json(s.A3);
  j["B1"] = to_json(s.B1), j["B2"] = to_json(s.B2);
  j["C1"] = to_json(s.C1), j["C2"] = to_json(s.C2), j["C3"] = to_json(s.C3);
  j["D1"] = to_json(s.D1), j["D2"] = to_json(s.D2);
  j["kernel"] = to_json(s.basis);
  return j;
}

// ---- supply ----------------------------------------------------------------

/// {"kind": "l2gain", "gamma": g | null}, {"kind": "sector", "alpha", "gamma"},
/// {"kind": "passivity"}, {"kind": "custom", "J1", "J2", "J3"}.
inline std::optional<SupplyRate> parse_supply(const Json& j, const DDSystem& sys) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) throw InputError("supply: expected {\"kind\": ...}");
  const std::string kind = j["kind"].get<std::string>();
  SupplyRate s;
  if (kind == "l2gain") {
    if (!j.contains("gamma") || j["gamma"].is_null()) s = l2_supply_variable(sys.m, sys.q);
    else {
      const double g = number(j["gamma"], "supply.gamma");
      if (!(g > 0.0)) throw InputError("supply: gamma must be positive");
      s = l2_supply(g, sys.m, sys.q);
    }
  } else if (kind == "sector") {
    if (sys.m != sys.q) throw InputError("supply: sector supply requires m = q");
    if (!j.contains("alpha") || !j.contains("gamma")) throw InputError("supply: sector needs 'alpha' and 'gamma'");
    s = sector_supply(number(j["alpha"], "supply.alpha"), number(j["gamma"], "supply.gamma"), sys.m);
  } else if (kind == "passivity") {
    if (sys.m != sys.q) throw InputError("supply: passivity supply requires m = q");
    s = passivity_supply(sys.m);
  } else if (kind == "custom") {
    const Mat J1 = parse_matrix(j, "J1", sys.m, sys.m);
    const Mat J2 = parse_matrix(j, "J2", sys.m, sys.q, true);
    const Mat J3 = parse_matrix(j, "J3", sys.q, sys.q, true);
    try {
      s = custom_supply(SymMat(J1), J2, SymMat(J3));
    } catch (const Error& e) {
      throw InputError(std::string("supply: ") + e.what());
    }
  } else {
    throw InputError("supply: unknown kind '" + kind + "'");
  }
  const auto d = validate(s, sys);
  if (!d.empty()) throw InputError("supply: " + d.front());
  return s;
}

inline Json to_json(const SupplyRate& s) {
  Json j;
  j["kind"] = to_string(s.kind);
  switch (s.kind) {
    case SupplyKind::l2gain:
      j["gamma"] = s.gamma ? Json(*s.gamma) : Json(nullptr);
      break;
    case SupplyKind::sector:
      j["alpha"] = s.alpha, j["gamma"] = s.beta;
      break;
    case SupplyKind::passivity: break;
    case SupplyKind::custom:
      j["J1"] = to_json(s.J1->mat()), j["J2"] = to_json(s.J2), j["J3"] = to_json(s.J3.mat());
      break;
  }
  return j;
}

// ---- uncertainty -----------------------------------------------------------

/// Ten entries in channel order A1, B1, A2, A3, B2, C1, D1, C2, C3, D2. An
/// entry is null (no uncertainty) or {"G", "H", "F", "Xi", "Lambda", "Gamma"},
/// with F and Lambda defaulting to zero. Delta is G.cols x H.rows.
inline UncertaintySet parse_uncertainty(const Json& j, const DDSystem& sys) {
  if (!j.is_array() || j.size() != 10) throw InputError("uncertainty: expected an array of ten channels");
  UncertaintySet u = zero_uncertainty(sys);
  for (int i = 0; i < 10; ++i) {
    const Json& c = j[static_cast<std::size_t>(i)];
    if (c.is_null()) continue;
    const std::string tag = std::string("uncertainty channel ") + std::to_string(i + 1) + " (" + kChannelNames[i] + ")";
    if (!c.is_object()) throw InputError(tag + ": expected an object or null");
    if (c.contains("channel") && c["channel"] != kChannelNames[i]) {
      throw InputError(tag + ": entry is labelled '" + c["channel"].dump() + "'");
    }
    const auto [rows, cols] = channel_target(sys, i);
    try {
      if (!c.contains("G") || !c.contains("H")) throw InputError("'G' and 'H' are required");
      const Mat G = parse_matrix(c["G"], "G");
      const Mat H = parse_matrix(c["H"], "H");
      const Index a = G.cols(), b = H.rows();
      if (G.rows() != rows) throw InputError("G must have " + std::to_string(rows) + " rows");
      if (H.cols() != cols) throw InputError("H must have " + std::to_string(cols) + " columns");
      UncertaintyChannel ch;
      ch.G = G, ch.H = H;
      ch.F = parse_matrix(c, "F", b, a, true);
      ch.Lambda = parse_matrix(c, "Lambda", b, a, true);
      ch.Xi = SymMat(parse_matrix(c, "Xi", b, b));
      ch.Gamma = SymMat(parse_matrix(c, "Gamma", a, a));
      u[i] = ch;
    } catch (const Error& e) {
      throw InputError(tag + ": " + e.what());
    }
  }
  const auto d = validate(u, sys);
  if (!d.empty()) throw InputError(d.front());
  return u;
}

inline Json to_json(const UncertaintySet& u) {
  Json out = Json::array();
  for (int i = 0; i < 10; ++i) {
    const auto& c = u[i];
    Json j;
    j["channel"] = kChannelNames[i];
    j["G"] = to_json(c.G), j["H"] = to_json(c.H), j["F"] = to_json(c.F);
    j["Xi"] = to_json(c.Xi.mat()), j["Lambda"] = to_json(c.Lambda), j["Gamma"] = to_json(c.Gamma.mat());
    out.push_back(j);
  }
  return out;
}

// ---- tuning ------------------------------------------------------------------

inline TuningParams parse_tuning(const Json& j, Index rho) {
  TuningParams t;
  if (j.is_null()) return t;
  if (!j.is_object()) throw InputError("tuning: expected an object");
  if (j.contains("eta1")) t.eta1 = number(j["eta1"], "tuning.eta1");
  if (j.contains("eta2")) t.eta2 = number(j["eta2"], "tuning.eta2");
  if (j.contains("eps")) {
    t.eps = parse_vector(j["eps"], "tuning.eps");
    if (t.eps.size() != rho) throw InputError("tuning.eps must have rho = " + std::to_string(rho) + " entries");
  }
  return t;
}

inline Json to_json(const TuningParams& t) {
  Json j;
  j["eta1"] = t.eta1, j["eta2"] = t.eta2;
  j["eps"] = vec_to_json(t.eps);
  return j;
}

// ---- complete problem file ----------------------------------------------------

struct ProblemFile {
  DDSystem sys;
  std::optional<SupplyRate> supply;
  std::optional<UncertaintySet> uncertainty;
  TuningParams tuning;
  std::optional<Mat> K;  // gain to verify
  Json raw;
};

inline ProblemFile parse_problem(const Json& j) {
  ProblemFile f;
  f.raw = j;
  f.sys = parse_system(j);
  const auto diag = validate(f.sys);
  if (!diag.empty()) throw InputError("system: " + diag.front());
  if (j.contains("supply")) f.supply = parse_supply(j["supply"], f.sys);
  if (j.contains("uncertainty") && !j["uncertainty"].is_null()) f.uncertainty = parse_uncertainty(j["uncertainty"], f.sys);
  if (j.contains("tuning")) f.tuning = parse_tuning(j["tuning"], f.sys.rho());
  if (j.contains("K") && !j["K"].is_null()) f.K = parse_matrix(j, "K", f.sys.p, f.sys.n);
  return f;
}

// ---- LMI debug dump -------------------------------------------------------------

inline const char* to_string(VarKind k) {
  switch (k) {
    case VarKind::symmetric: return "symmetric";
    case VarKind::rectangular: return "rectangular";
    case VarKind::scalar: return "scalar";
  }
  return "?";
}

/// Every constraint with its constant term and the dense coefficient matrix
/// of each scalar degree of freedom it depends on.
inline Json dump_problem(const LMIProblem& p) {
  Json j;
  Json vars = Json::array();
  for (const auto& v : p.variables()) {
    Json e;
    e["name"] = v.name, e["kind"] = to_string(v.kind), e["rows"] = v.rows, e["cols"] = v.cols;
    e["dof_offset"] = v.offset, e["dof"] = v.dof;
    vars.push_back(e);
  }
  j["variables"] = vars;
  j["ndv"] = p.num_dofs();
  Json cons = Json::array();
  for (const auto& c : p.constraints()) {
    Json e;
    e["label"] = c.label;
    e["sense"] = c.sense == Sense::pos ? "pos" : "neg";
    e["dim"] = c.expr.rows();
    e["constant"] = to_json(c.expr.constant());
    Json terms = Json::array();
    for (const auto& [dof, a] : c.expr.terms()) {
      Json t;
      t["dof"] = dof;
      t["coefficient"] = to_json(a);
      terms.push_back(t);
    }
    e["terms"] = terms;
    cons.push_back(e);
  }
  j["constraints"] = cons;
  if (p.objective()) {
    Json o = Json::object();
    for (const auto& [dof, a] : p.objective()->terms()) o[std::to_string(dof)] = a(0, 0);
    j["objective"] = o;
  }
  return j;
}

// ---- CSV ---------------------------------------------------------------------------

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream os;
  const Index n = tr.x.empty() ? 0 : tr.x.front().size();
  const Index m = tr.z.empty() ? 0 : tr.z.front().size();
  const Index q = tr.w.empty() ? 0 : tr.w.front().size();
  os << "t";
  for (Index i = 0; i < n; ++i) os << ",x" << i + 1;
  for (Index i = 0; i < m; ++i) os << ",z" << i + 1;
  for (Index i = 0; i < q; ++i) os << ",w" << i + 1;
  os << "\n";
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    os << fmt_num(tr.t[k]);
    for (Index i = 0; i < n; ++i) os << "," << fmt_num(tr.x[k](i));
    for (Index i = 0; i < m; ++i) os << "," << fmt_num(tr.z[k](i));
    for (Index i = 0; i < q; ++i) os << "," << fmt_num(tr.w[k](i));
    os << "\n";
  }
  return os.str();
}

inline void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << data;
}

}  // namespace ddsynth
