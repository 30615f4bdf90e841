#include "driftfit/model_io.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "driftfit/basis.hpp"
#include "driftfit/errors.hpp"
#include "driftfit/estimator.hpp"
#include "driftfit/mlp.hpp"

namespace driftfit::harness {

namespace {

using json = nlohmann::ordered_json;

constexpr int kFormatVersion = 1;

const char* family_name(basis::BasisFamily family) {
    switch (family) {
    case basis::BasisFamily::ClampedBSpline:
        return "bspline";
    case basis::BasisFamily::PiecewisePolynomial:
        return "piecewise";
    case basis::BasisFamily::Fourier:
    default:
        return "fourier";
    }
}

json describe_basis(const basis::TensorBasis& tensor) {
    json dims = json::array();
    for (int k = 0; k < tensor.dim(); ++k) {
        const auto& b = tensor.dimension(k);
        json entry;
        entry["family"] = family_name(b.family());
        if (b.family() == basis::BasisFamily::Fourier) {
            entry["lo"] = b.lo();
            entry["hi"] = b.hi();
            entry["harmonics"] = (b.size() - 1) / 2;
        } else {
            entry["degree"] = b.degree();
            entry["breakpoints"] = b.breakpoints();
        }
        dims.push_back(std::move(entry));
    }
    json out;
    out["dims"] = std::move(dims);
    out["policy"] = tensor.policy() == basis::OutOfDomainPolicy::Clamp ? "clamp" : "zero";
    return out;
}

const json& require(const json& obj, const char* key, const std::string& context) {
    auto it = obj.find(key);
    if (it == obj.end())
        throw FormatError("model file is missing field '" + context + key + "'");
    return *it;
}

basis::BasisSet1D parse_basis_dim(const json& entry, const std::string& context) {
    if (!entry.is_object())
        throw FormatError("model field '" + context + "' must be an object");
    const std::string family = require(entry, "family", context).get<std::string>();
    try {
        if (family == "fourier") {
            return basis::BasisSet1D::fourier(require(entry, "lo", context).get<double>(),
                                              require(entry, "hi", context).get<double>(),
                                              require(entry, "harmonics", context).get<int>());
        }
        const int degree = require(entry, "degree", context).get<int>();
        const auto breakpoints =
            require(entry, "breakpoints", context).get<std::vector<double>>();
        if (family == "bspline")
            return basis::BasisSet1D::clamped_bspline(breakpoints, degree);
        if (family == "piecewise")
            return basis::BasisSet1D::piecewise_polynomial(breakpoints, degree);
    } catch (const json::exception& e) {
        throw FormatError("model field '" + context + "' is malformed: " + e.what());
    }
    throw FormatError("model field '" + context + "family' names unknown family '" + family + "'");
}

dynamics::DriftPtr load_basis_model(const json& doc) {
    const json& basis_desc = require(doc, "basis", "");
    const json& dims = require(basis_desc, "dims", "basis.");
    if (!dims.is_array() || dims.empty())
        throw FormatError("model field 'basis.dims' must be a nonempty array");
    std::vector<basis::BasisSet1D> sets;
    for (std::size_t k = 0; k < dims.size(); ++k)
        sets.push_back(parse_basis_dim(dims[k], "basis.dims[" + std::to_string(k) + "]."));
    const std::string policy_name = require(basis_desc, "policy", "basis.").get<std::string>();
    basis::OutOfDomainPolicy policy;
    if (policy_name == "clamp")
        policy = basis::OutOfDomainPolicy::Clamp;
    else if (policy_name == "zero")
        policy = basis::OutOfDomainPolicy::Zero;
    else
        throw FormatError("model field 'basis.policy' must be 'clamp' or 'zero'");
    basis::TensorBasis tensor(std::move(sets), policy);

    const json& coeffs = require(doc, "coefficients", "");
    const int d = static_cast<int>(dims.size());
    const int n = tensor.size();
    if (!coeffs.is_array() || static_cast<int>(coeffs.size()) != n * d)
        throw FormatError("model field 'coefficients' must hold " + std::to_string(n * d) +
                          " values");
    Matrix c(n, d);
    try {
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < d; ++k)
                c(i, k) = coeffs[static_cast<std::size_t>(i * d + k)].get<double>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("model field 'coefficients' is malformed: ") + e.what());
    }
    return std::make_shared<estimator::BasisDrift>(std::move(tensor), std::move(c));
}

dynamics::DriftPtr load_mlp_model(const json& doc) {
    const json& desc = require(doc, "mlp", "");
    std::vector<int> widths;
    std::string activation;
    try {
        widths = require(desc, "widths", "mlp.").get<std::vector<int>>();
        activation = require(desc, "activation", "mlp.").get<std::string>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("model field 'mlp' is malformed: ") + e.what());
    }
    auto net = std::make_shared<estimator::MlpDrift>(widths, activation);
    const json& weights = require(doc, "weights", "");
    if (!weights.is_array() || weights.size() != net->weight_count())
        throw FormatError("model field 'weights' must hold " +
                          std::to_string(net->weight_count()) + " values");
    Vector w(static_cast<Eigen::Index>(weights.size()));
    try {
        for (std::size_t i = 0; i < weights.size(); ++i)
            w(static_cast<Eigen::Index>(i)) = weights[i].get<double>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("model field 'weights' is malformed: ") + e.what());
    }
    net->set_weights(std::move(w));
    return net;
}

} // namespace

void save_model(const dynamics::Drift& model, const std::string& path) {
    json doc;
    doc["format_version"] = kFormatVersion;
    if (const auto* basis_drift = dynamic_cast<const estimator::BasisDrift*>(&model)) {
        doc["kind"] = "basis";
        doc["basis"] = describe_basis(basis_drift->tensor());
        const Matrix& c = basis_drift->coefficients();
        json coeffs = json::array();
        for (Eigen::Index i = 0; i < c.rows(); ++i)
            for (Eigen::Index k = 0; k < c.cols(); ++k)
                coeffs.push_back(c(i, k));
        doc["coefficients"] = std::move(coeffs);
    } else if (const auto* mlp = dynamic_cast<const estimator::MlpDrift*>(&model)) {
        doc["kind"] = "mlp";
        json desc;
        desc["widths"] = mlp->widths();
        desc["activation"] = mlp->activation();
        doc["mlp"] = std::move(desc);
        json weights = json::array();
        for (Eigen::Index i = 0; i < mlp->weights().size(); ++i)
            weights.push_back(mlp->weights()(i));
        doc["weights"] = std::move(weights);
    } else {
        throw Error("only basis and mlp drifts can be saved");
    }

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");
    out << doc.dump(2) << "\n";
    if (!out)
        throw IoError("failed writing '" + path + "'");
}

dynamics::DriftPtr load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream buffer;
    buffer << in.rdbuf();

    json doc;
    try {
        doc = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("model file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw FormatError("model file must be a JSON object");

    const json& version = require(doc, "format_version", "");
    if (!version.is_number_integer())
        throw FormatError("model field 'format_version' must be an integer");
    if (version.get<int>() != kFormatVersion)
        throw VersionMismatchError("model format_version " + version.dump() +
                                   " is not supported (expected " +
                                   std::to_string(kFormatVersion) + ")");

    const json& kind_field = require(doc, "kind", "");
    if (!kind_field.is_string())
        throw FormatError("model field 'kind' must be a string");
    const std::string kind = kind_field.get<std::string>();
    if (kind == "basis")
        return load_basis_model(doc);
    if (kind == "mlp")
        return load_mlp_model(doc);
    throw FormatError("model field 'kind' names unknown kind '" + kind + "'");
}

} // namespace driftfit::harness
