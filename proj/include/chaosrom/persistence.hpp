#pragma once

// Line-oriented model files:
//
//   CHAOSROM v1 <kind>                 kind in dmd|quad|ae|syco
//   dim <name> <rows> <cols> [<depth>]
//   <values, row-major, one matrix row per line, 17 significant digits>
//   ...
//
// Complex entries are written `re:im`.

#include <complex>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "chaosrom/errors.hpp"
#include "chaosrom/io.hpp"
#include "chaosrom/rom_model.hpp"
#include "chaosrom/tensor.hpp"

namespace chaosrom {

inline constexpr const char* kModelMagic = "CHAOSROM";
inline constexpr const char* kModelVersion = "v1";

namespace detail {

class ModelWriter {
 public:
  explicit ModelWriter(std::ostream& os) : os_(os) {}

  void scalar(const std::string& name, double v) {
    os_ << "dim " << name << " 1 1\n" << format_real(v) << '\n';
  }

  template <typename Derived>
  void matrix(const std::string& name, const Eigen::MatrixBase<Derived>& m) {
    os_ << "dim " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (j > 0) os_ << ' ';
        write_value(m(i, j));
      }
      os_ << '\n';
    }
  }

  void tensor(const std::string& name, const Tensor3& t) {
    os_ << "dim " << name << ' ' << t.dim0() << ' ' << t.dim1() << ' ' << t.dim2() << '\n';
    for (Eigen::Index i = 0; i < t.dim0(); ++i) {
      for (Eigen::Index j = 0; j < t.dim1(); ++j) {
        for (Eigen::Index k = 0; k < t.dim2(); ++k) {
          if (k > 0) os_ << ' ';
          os_ << format_real(t(i, j, k));
        }
        os_ << '\n';
      }
    }
  }

  void mlp(const std::string& prefix, const MlpParams& p) {
    matrix(prefix + ".A1", p.A1);
    matrix(prefix + ".b1", p.b1);
    matrix(prefix + ".A2", p.A2);
    matrix(prefix + ".b2", p.b2);
  }

 private:
  void write_value(double v) { os_ << format_real(v); }
  void write_value(const std::complex<double>& v) {
    os_ << format_real(v.real()) << ':' << format_real(v.imag());
  }

  std::ostream& os_;
};

struct Entry {
  Eigen::Index rows = 0, cols = 0, depth = 0;  // depth 0: matrix
  std::vector<std::complex<double>> values;
  bool complex = false;
  std::size_t line = 0;
};

class ModelReader {
 public:
  std::string kind;
  std::map<std::string, Entry> entries;

  void parse(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("empty model file", 1);
    line_no_ = 1;
    strip_cr(line);
    std::istringstream head(line);
    std::string magic, version, extra;
    head >> magic >> version >> kind;
    if (magic != kModelMagic) throw ParseError("not a model file (bad magic)", 1);
    if (version != kModelVersion) throw ParseError("unsupported model version `" + version + "`", 1);
    if (kind != "dmd" && kind != "quad" && kind != "ae" && kind != "syco") {
      throw ParseError("unknown model kind `" + kind + "`", 1);
    }
    if (head >> extra) throw ParseError("trailing text after model kind", 1);

    while (next_line(is, line)) {
      std::istringstream header(line);
      std::string tag, name;
      header >> tag >> name;
      if (tag != "dim" || name.empty()) throw ParseError("expected `dim <name> <rows> <cols>`", line_no_);
      Entry e;
      e.line = line_no_;
      if (!(header >> e.rows >> e.cols) || e.rows < 0 || e.cols < 0) {
        throw ParseError("bad dimensions for `" + name + "`", line_no_);
      }
      if (!(header >> e.depth)) {
        e.depth = 0;
      } else if (e.depth < 0) {
        throw ParseError("bad depth for `" + name + "`", line_no_);
      }
      if (header >> extra) throw ParseError("trailing text in dim header", line_no_);
      if (entries.count(name)) throw ParseError("duplicate entry `" + name + "`", line_no_);
      const auto total = static_cast<std::size_t>(e.rows * e.cols * (e.depth == 0 ? 1 : e.depth));
      while (e.values.size() < total) {
        if (!next_line(is, line)) {
          throw ParseError("unexpected end of file inside `" + name + "`", line_no_ + 1);
        }
        std::istringstream row(line);
        std::string token;
        while (row >> token) {
          if (e.values.size() == total) throw ParseError("too many values for `" + name + "`", line_no_);
          e.values.push_back(parse_value(token, e.complex));
        }
      }
      entries.emplace(name, std::move(e));
    }
  }

  const Entry& get(const std::string& name) const {
    const auto it = entries.find(name);
    if (it == entries.end()) throw ParseError("missing entry `" + name + "`", line_no_);
    return it->second;
  }

  double scalar(const std::string& name) const {
    const Entry& e = get(name);
    if (e.rows != 1 || e.cols != 1 || e.depth != 0 || e.complex) {
      throw ParseError("`" + name + "` must be a real 1x1 entry", e.line);
    }
    return e.values[0].real();
  }

  Eigen::MatrixXd real_matrix(const std::string& name, Eigen::Index rows = -1,
                              Eigen::Index cols = -1) const {
    const Entry& e = shaped(name, rows, cols);
    if (e.complex) throw ParseError("`" + name + "` must be real", e.line);
    Eigen::MatrixXd m(e.rows, e.cols);
    for (Eigen::Index i = 0; i < e.rows; ++i) {
      for (Eigen::Index j = 0; j < e.cols; ++j) m(i, j) = e.values[static_cast<std::size_t>(i * e.cols + j)].real();
    }
    return m;
  }

  Eigen::MatrixXcd complex_matrix(const std::string& name, Eigen::Index rows = -1,
                                  Eigen::Index cols = -1) const {
    const Entry& e = shaped(name, rows, cols);
    Eigen::MatrixXcd m(e.rows, e.cols);
    for (Eigen::Index i = 0; i < e.rows; ++i) {
      for (Eigen::Index j = 0; j < e.cols; ++j) m(i, j) = e.values[static_cast<std::size_t>(i * e.cols + j)];
    }
    return m;
  }

  Tensor3 tensor(const std::string& name, Eigen::Index d0, Eigen::Index d1, Eigen::Index d2) const {
    const Entry& e = get(name);
    if (e.complex || e.rows != d0 || e.cols != d1 || e.depth != d2) {
      throw ParseError("`" + name + "` must be a real " + std::to_string(d0) + "x" +
                           std::to_string(d1) + "x" + std::to_string(d2) + " tensor",
                       e.line);
    }
    Tensor3 t(d0, d1, d2);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = e.values[i].real();
    return t;
  }

  MlpParams mlp(const std::string& prefix) const {
    MlpParams p;
    p.A1 = real_matrix(prefix + ".A1");
    p.b1 = real_matrix(prefix + ".b1", p.A1.rows(), 1).col(0);
    p.A2 = real_matrix(prefix + ".A2", -1, p.A1.rows());
    p.b2 = real_matrix(prefix + ".b2", p.A2.rows(), 1).col(0);
    return p;
  }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }

  bool next_line(std::istream& is, std::string& line) {
    while (std::getline(is, line)) {
      ++line_no_;
      strip_cr(line);
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }

  std::complex<double> parse_value(const std::string& token, bool& complex) const {
    const auto colon = token.find(':');
    double re = 0, im = 0;
    if (colon == std::string::npos) {
      if (!parse_real(token, re)) throw ParseError("bad number `" + token + "`", line_no_);
    } else {
      complex = true;
      if (!parse_real(std::string_view(token).substr(0, colon), re) ||
          !parse_real(std::string_view(token).substr(colon + 1), im)) {
        throw ParseError("bad complex number `" + token + "`", line_no_);
      }
    }
    return {re, im};
  }

  const Entry& shaped(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
    const Entry& e = get(name);
    if (e.depth != 0 || (rows >= 0 && e.rows != rows) || (cols >= 0 && e.cols != cols)) {
      throw ParseError("`" + name + "` has inconsistent dimensions", e.line);
    }
    return e;
  }

  std::size_t line_no_ = 0;
};

}  // namespace detail

inline void save_model(std::ostream& os, const RomModel& model) {
  if (std::holds_alternative<Lorenz96Truth>(model)) {
    throw ConfigError("the full-order model has no parameters to save");
  }
  os << kModelMagic << ' ' << kModelVersion << ' ' << kind_name(model) << '\n';
  detail::ModelWriter w(os);
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DmdModel>) {
          w.scalar("dt", m.dt);
          w.matrix("Omega", m.Omega);
          w.matrix("Phi", m.Phi);
          w.matrix("Phi_pinv", m.Phi_pinv);
        } else if constexpr (std::is_same_v<T, QuadraticModel>) {
          w.matrix("x_bar", m.x_bar);
          w.matrix("Phi", m.Phi);
          w.tensor("Phi_bar", m.Phi_bar);
          w.matrix("a", m.a);
          w.matrix("B", m.B);
          w.tensor("C", m.C);
        } else if constexpr (std::is_same_v<T, NeuralRom>) {
          w.scalar("constrained", m.constrained ? 1.0 : 0.0);
          w.scalar("lambda", m.lambda);
          w.scalar("omega", m.omega);
          w.scalar("upsilon", m.upsilon);
          w.mlp("encoder", m.encoder);
          w.mlp("decoder", m.decoder);
          w.mlp("dynamics", m.dynamics);
        }
      },
      model);
}

inline RomModel load_model(std::istream& is) {
  detail::ModelReader rd;
  rd.parse(is);
  try {
    if (rd.kind == "dmd") {
      DmdModel m;
      m.dt = rd.scalar("dt");
      m.Omega = rd.complex_matrix("Omega", -1, 1).col(0);
      const Eigen::Index r = m.Omega.size();
      m.Phi = rd.complex_matrix("Phi", -1, r);
      m.Phi_pinv = rd.complex_matrix("Phi_pinv", r, m.Phi.rows());
      m.validate();
      return m;
    }
    if (rd.kind == "quad") {
      QuadraticModel m;
      m.x_bar = rd.real_matrix("x_bar", -1, 1).col(0);
      const Eigen::Index n = m.x_bar.size();
      m.Phi = rd.real_matrix("Phi", n);
      const Eigen::Index r = m.Phi.cols();
      m.Phi_bar = rd.tensor("Phi_bar", n, r, r);
      m.a = rd.real_matrix("a", r, 1).col(0);
      m.B = rd.real_matrix("B", r, r);
      m.C = rd.tensor("C", r, r, r);
      m.validate();
      return m;
    }
    NeuralRom m;
    const double flag = rd.scalar("constrained");
    if (flag != 0.0 && flag != 1.0) throw ParseError("`constrained` must be 0 or 1", rd.get("constrained").line);
    m.constrained = flag == 1.0;
    if (m.constrained != (rd.kind == "syco")) {
      throw ParseError("`constrained` disagrees with the model kind", rd.get("constrained").line);
    }
    m.lambda = rd.scalar("lambda");
    m.omega = rd.scalar("omega");
    m.upsilon = rd.scalar("upsilon");
    m.encoder = rd.mlp("encoder");
    m.decoder = rd.mlp("decoder");
    m.dynamics = rd.mlp("dynamics");
    m.validate();
    return m;
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("invalid model: ") + e.what(), 1);
  }
}

inline void save_model(const std::filesystem::path& path, const RomModel& model) {
  write_file_atomically(path, [&](std::ostream& os) { save_model(os, model); });
}

inline RomModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return load_model(in);
}

inline RomModel load_model(const std::filesystem::path& path, const std::string& expected_kind) {
  RomModel model = load_model(path);
  if (kind_name(model) != expected_kind) {
    throw KindMismatchError("expected a `" + expected_kind + "` model, " + path.string() +
                            " holds `" + kind_name(model) + "`");
  }
  return model;
}

}  // namespace chaosrom
