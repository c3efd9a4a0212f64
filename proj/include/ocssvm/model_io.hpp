#pragma once

// Line-oriented model files:
//
//   OCSSVM-MODEL v1
//   kernel rbf gamma 0.5
//   params nu1 0.1 nu2 0.01 epsilon 0.6666666666666666
//   offsets rho1 <r1> rho2 <r2>
//   m <rows> dim <d>
//   sv <alpha> <alpha_bar> <x_1> ... <x_d>      (one line per training row)
//   end <fnv1a-64 of every preceding byte, hex>
//
// The one-class SVM file uses `OCSVM-MODEL v1`, `params nu <nu>`,
// `offsets rho <rho>` and `sv <alpha> <x_1> ... <x_d>`. Floats are written in
// their shortest round-trip form, so a loaded model scores bit-for-bit like
// the saved one.

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ocssvm/errors.hpp"
#include "ocssvm/slab_svm.hpp"
#include "ocssvm/text.hpp"

namespace ocssvm {

inline constexpr std::string_view kSlabMagic = "OCSSVM-MODEL";
inline constexpr std::string_view kOcsvmMagic = "OCSVM-MODEL";
inline constexpr std::string_view kModelVersion = "v1";

using AnyModel = std::variant<SlabModel, OcsvmModel>;

namespace detail {

inline void write_kernel_line(std::string& out, const KernelSpec& kernel) {
  out += "kernel ";
  out += to_string(kernel.family());
  if (kernel.gamma()) out += " gamma " + text::format_double(*kernel.gamma());
  out += '\n';
}

inline void write_row(std::string& out, const FeatureMatrix& rows, Eigen::Index i) {
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    out += ' ';
    out += text::format_double(rows(i, j));
  }
  out += '\n';
}

inline std::string seal(std::string body) {
  const auto sum = text::fnv1a(body);
  body += "end " + text::to_hex(sum) + '\n';
  return body;
}

// Reads the fields of one line, checking the leading keyword.
class LineReader {
 public:
  explicit LineReader(std::vector<std::string_view> lines) : lines_(std::move(lines)) {}

  std::vector<std::string_view> next(std::string_view keyword) {
    if (pos_ >= lines_.size()) throw FormatError("model file ends before '" + std::string(keyword) + "'");
    auto fields = text::split_whitespace(lines_[pos_]);
    ++pos_;
    if (fields.empty() || fields[0] != keyword) {
      throw FormatError("model file: expected a '" + std::string(keyword) + "' line, got '" +
                        std::string(lines_[pos_ - 1]) + "'");
    }
    return fields;
  }

  bool done() const { return pos_ >= lines_.size(); }

 private:
  std::vector<std::string_view> lines_;
  std::size_t pos_ = 0;
};

inline double number(std::string_view field, std::string_view what) {
  const auto v = text::parse_double(field);
  if (!v) throw FormatError("model file: malformed " + std::string(what) + " '" + std::string(field) + "'");
  return *v;
}

// Expects `fields` = keyword, then (name, value) pairs in the given order.
inline std::vector<double> named_values(const std::vector<std::string_view>& fields,
                                        std::initializer_list<std::string_view> names) {
  if (fields.size() != 1 + 2 * names.size()) {
    throw FormatError("model file: '" + std::string(fields[0]) + "' line has the wrong number of fields");
  }
  std::vector<double> out;
  std::size_t k = 1;
  for (const auto name : names) {
    if (fields[k] != name) throw FormatError("model file: expected '" + std::string(name) + "'");
    out.push_back(number(fields[k + 1], name));
    k += 2;
  }
  return out;
}

inline KernelSpec parse_kernel_line(const std::vector<std::string_view>& fields) {
  if (fields.size() == 2) return KernelSpec::make(parse_kernel_family(fields[1]));
  if (fields.size() == 4 && fields[2] == "gamma") {
    return KernelSpec::make(parse_kernel_family(fields[1]), number(fields[3], "gamma"));
  }
  throw FormatError("model file: malformed kernel line");
}

struct SealedBody {
  std::string_view magic;
  std::vector<std::string_view> lines;  // between the header and `end`
};

// Splits the file, checks the header, version and checksum.
inline SealedBody unseal(std::string_view content) {
  const auto header_end = content.find('\n');
  if (header_end == std::string_view::npos) throw FormatError("model file is truncated (no header line)");
  const auto header = text::split_whitespace(content.substr(0, header_end));
  if (header.size() != 2 || (header[0] != kSlabMagic && header[0] != kOcsvmMagic)) {
    throw FormatError("not a model file (bad header)");
  }
  if (header[1] != kModelVersion) {
    throw VersionError("unsupported model file version '" + std::string(header[1]) + "' (expected " +
                       std::string(kModelVersion) + ")");
  }

  std::string_view trimmed = content;
  while (!trimmed.empty() && (trimmed.back() == '\n' || trimmed.back() == '\r')) trimmed.remove_suffix(1);
  const auto last_break = trimmed.rfind('\n');
  const std::string_view last_line = trimmed.substr(last_break + 1);
  if (last_break == std::string_view::npos || !last_line.starts_with("end ")) {
    throw FormatError("model file is truncated (missing end line)");
  }
  const std::string_view body = content.substr(0, last_break + 1);
  const std::string_view expected = text::trim(last_line.substr(4));
  if (text::to_hex(text::fnv1a(body)) != expected) throw ChecksumError("model file checksum mismatch");

  SealedBody out;
  out.magic = header[0];
  const auto inner = body.substr(header_end + 1);
  for (auto line : text::split(inner, '\n')) {
    line = text::trim(line);
    if (!line.empty()) out.lines.push_back(line);
  }
  return out;
}

}  // namespace detail

inline std::string serialize(const SlabModel& model) {
  const auto& cfg = model.train_config();
  std::string out = std::string(kSlabMagic) + ' ' + std::string(kModelVersion) + '\n';
  detail::write_kernel_line(out, model.kernel());
  out += "params nu1 " + text::format_double(cfg.nu1) + " nu2 " + text::format_double(cfg.nu2) + " epsilon " +
         text::format_double(cfg.epsilon) + '\n';
  out += "offsets rho1 " + text::format_double(model.rho1()) + " rho2 " + text::format_double(model.rho2()) + '\n';
  out += "m " + std::to_string(model.m()) + " dim " + std::to_string(model.dim()) + '\n';
  for (Eigen::Index i = 0; i < model.m(); ++i) {
    out += "sv " + text::format_double(model.alpha()(i)) + ' ' + text::format_double(model.alpha_bar()(i));
    detail::write_row(out, model.training_rows(), i);
  }
  return detail::seal(std::move(out));
}

inline std::string serialize(const OcsvmModel& model) {
  std::string out = std::string(kOcsvmMagic) + ' ' + std::string(kModelVersion) + '\n';
  detail::write_kernel_line(out, model.kernel());
  out += "params nu " + text::format_double(model.nu()) + '\n';
  out += "offsets rho " + text::format_double(model.rho()) + '\n';
  out += "m " + std::to_string(model.m()) + " dim " + std::to_string(model.dim()) + '\n';
  for (Eigen::Index i = 0; i < model.m(); ++i) {
    out += "sv " + text::format_double(model.alpha()(i));
    detail::write_row(out, model.training_rows(), i);
  }
  return detail::seal(std::move(out));
}

inline AnyModel parse_model(std::string_view content) {
  const auto sealed = detail::unseal(content);
  const bool slab = sealed.magic == kSlabMagic;
  detail::LineReader reader(sealed.lines);
  const KernelSpec kernel = detail::parse_kernel_line(reader.next("kernel"));
  const auto params = slab ? detail::named_values(reader.next("params"), {"nu1", "nu2", "epsilon"})
                           : detail::named_values(reader.next("params"), {"nu"});
  const auto offsets = slab ? detail::named_values(reader.next("offsets"), {"rho1", "rho2"})
                            : detail::named_values(reader.next("offsets"), {"rho"});
  const auto shape = reader.next("m");
  if (shape.size() != 4 || shape[2] != "dim") throw FormatError("model file: malformed 'm ... dim ...' line");
  const auto m = text::parse_int<Eigen::Index>(shape[1]);
  const auto dim = text::parse_int<Eigen::Index>(shape[3]);
  if (!m || !dim || *m < 1 || *dim < 1) throw FormatError("model file: invalid m/dim");

  const Eigen::Index duals = slab ? 2 : 1;
  FeatureMatrix rows(*m, *dim);
  Vector alpha(*m), alpha_bar(*m);
  for (Eigen::Index i = 0; i < *m; ++i) {
    const auto fields = reader.next("sv");
    if (static_cast<Eigen::Index>(fields.size()) != 1 + duals + *dim) {
      throw FormatError("model file: sv line " + std::to_string(i + 1) + " has the wrong number of fields");
    }
    alpha(i) = detail::number(fields[1], "dual coefficient");
    if (slab) alpha_bar(i) = detail::number(fields[2], "dual coefficient");
    for (Eigen::Index j = 0; j < *dim; ++j) {
      rows(i, j) = detail::number(fields[static_cast<std::size_t>(1 + duals + j)], "feature");
    }
  }
  if (!reader.done()) throw FormatError("model file: unexpected content after the sv lines");

  if (!slab) return OcsvmModel(std::move(rows), std::move(alpha), offsets[0], params[0], kernel);

  SlabTrainConfig cfg;
  cfg.nu1 = params[0];
  cfg.nu2 = params[1];
  cfg.epsilon = params[2];
  cfg.kernel = kernel;
  cfg.validate(*m);
  // The on-plane counts and flags follow from the stored duals and offsets.
  SlabOffsets off;
  off.rho1 = offsets[0];
  off.rho2 = offsets[1];
  const double cap1 = cfg.lower_cap(*m), cap2 = cfg.upper_cap(*m);
  const double tol1 = cfg.sv_bound_tolerance * cap1, tol2 = cfg.sv_bound_tolerance * cap2;
  for (Eigen::Index i = 0; i < *m; ++i) {
    off.n_sv1 += alpha(i) > tol1 && alpha(i) < cap1 - tol1;
    off.n_sv2 += alpha_bar(i) > tol2 && alpha_bar(i) < cap2 - tol2;
  }
  off.lower_fallback = off.n_sv1 == 0;
  off.upper_fallback = off.n_sv2 == 0;
  off.degenerate = off.rho2 - off.rho1 <= 1e-8;
  return SlabModel(std::move(rows), std::move(alpha), std::move(alpha_bar), off, cfg);
}

inline std::string read_all(std::istream& in) {
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void save_model(const SlabModel& model, std::ostream& out) { out << serialize(model); }
inline void save_model(const OcsvmModel& model, std::ostream& out) { out << serialize(model); }

template <typename Model>
void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  save_model(model, out);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline AnyModel load_model(std::istream& in) { return parse_model(read_all(in)); }

inline AnyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path.string() + "'");
  return load_model(in);
}

template <typename Model, typename Source>
Model load_model_as(Source&& source) {
  AnyModel any = load_model(std::forward<Source>(source));
  if (auto* model = std::get_if<Model>(&any)) return std::move(*model);
  throw FormatError("model file holds a different model type");
}

}  // namespace ocssvm
