#include "weakkam/model_io.hpp"

#include "weakkam/error.hpp"

#include <fstream>

namespace weakkam {

namespace {

Mat metric_from_json(int dim, const nlohmann::json& params) {
  if (!params.contains("metric")) return Mat::Identity(dim, dim);
  const auto rows = params.at("metric").get<std::vector<std::vector<double>>>();
  if (static_cast<int>(rows.size()) != dim) throw Error(ErrorKind::BadInput, "metric has wrong size");
  Mat m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != dim)
      throw Error(ErrorKind::BadInput, "metric has wrong size");
    for (int j = 0; j < dim; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

}  // namespace

Model model_from_json(const nlohmann::json& j) {
  try {
    const auto family = model_family_from_string(j.at("family").get<std::string>());
    const int dim = j.value("dim", 1);
    if (dim < 1 || dim > kMaxDim) throw Error(ErrorKind::BadInput, "dimension out of range");
    const nlohmann::json params = j.value("params", nlohmann::json::object());
    Model m;
    switch (family) {
      case ModelFamily::RiemannianFlat: m = make_riemannian_flat(metric_from_json(dim, params)); break;
      case ModelFamily::MechanicalPendulum:
        m = make_pendulum(dim, params.value("amplitude", 1.0), params.value("frequency", 1));
        break;
      case ModelFamily::MechanicalCustom:
        m = make_mechanical(metric_from_json(dim, params),
                            FourierSeries::from_json(dim, params.value("potential", nlohmann::json::object())));
        break;
      case ModelFamily::ManeVectorField: {
        std::vector<FourierSeries> field;
        for (const auto& comp : params.at("field")) field.push_back(FourierSeries::from_json(dim, comp));
        if (static_cast<int>(field.size()) != dim) throw Error(ErrorKind::BadInput, "field needs dim components");
        m = make_mane(std::move(field));
        break;
      }
      case ModelFamily::Custom:
        throw Error(ErrorKind::BadInput, "custom models must be constructed in code (make_custom)");
    }
    if (j.contains("shift")) m = shift_by_one_form(m, OneForm::from_json(j.at("shift")));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadInput, std::string("malformed model description: ") + e.what());
  }
}

AuditOptions audit_options_from_json(const nlohmann::json& j) {
  AuditOptions o;
  if (!j.contains("audit")) return o;
  const auto& a = j.at("audit");
  o.velocity_radius = a.value("velocity_radius", o.velocity_radius);
  o.samples = a.value("samples", o.samples);
  if (a.contains("superlinearity")) {
    o.superlinearity.clear();
    for (const auto& p : a.at("superlinearity")) o.superlinearity.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  }
  return o;
}

Model load_model_json(const nlohmann::json& j) {
  Model m = model_from_json(j);
  const AuditReport rep = audit_model(*m, audit_options_from_json(j));
  if (!rep.passed) {
    std::string msg = "model failed the convexity audit:";
    for (const auto& f : rep.failures) msg += " " + f + ";";
    throw Error(ErrorKind::ModelRejected, msg);
  }
  return m;
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open model file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadInput, "model file is not valid JSON: " + std::string(e.what()));
  }
  return load_model_json(j);
}

}  // namespace weakkam
