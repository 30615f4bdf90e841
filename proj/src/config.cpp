#include "driftfit/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "driftfit/errors.hpp"
#include "driftfit/presets.hpp"

namespace driftfit::harness {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError("config field '" + path + "': " + message);
}

void check_keys(const json& obj, const std::string& path, std::set<std::string> allowed) {
    for (const auto& item : obj.items())
        if (allowed.find(item.key()) == allowed.end())
            throw ConfigError("unknown config key '" +
                              (path.empty() ? item.key() : path + "." + item.key()) + "'");
}

const json* find(const json& obj, const std::string& key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double as_double(const json& v, const std::string& path) {
    if (!v.is_number())
        fail(path, "expected a number");
    return v.get<double>();
}

long long as_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer())
        fail(path, "expected an integer");
    return v.get<long long>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string())
        fail(path, "expected a string");
    return v.get<std::string>();
}

/// A number broadcasts to dim entries; an array must have exactly dim.
Vector as_vector(const json& v, int dim, const std::string& path) {
    Vector out(dim);
    if (v.is_number()) {
        out.setConstant(v.get<double>());
        return out;
    }
    if (!v.is_array() || static_cast<int>(v.size()) != dim)
        fail(path, "expected a number or an array of " + std::to_string(dim) + " numbers");
    for (int k = 0; k < dim; ++k)
        out(k) = as_double(v[static_cast<std::size_t>(k)], path);
    return out;
}

void parse_initial(const json& v, ExperimentConfig& cfg) {
    if (!v.is_object())
        fail("initial", "expected an object");
    check_keys(v, "initial", {"kind", "lo", "hi", "points"});
    const json* kind = find(v, "kind");
    if (!kind)
        fail("initial.kind", "missing");
    const std::string k = as_string(*kind, "initial.kind");
    if (k == "uniform") {
        cfg.initial_is_uniform = true;
        const json* lo = find(v, "lo");
        const json* hi = find(v, "hi");
        if (!lo || !hi)
            fail("initial", "uniform needs 'lo' and 'hi'");
        cfg.initial_lo = as_vector(*lo, cfg.dim, "initial.lo");
        cfg.initial_hi = as_vector(*hi, cfg.dim, "initial.hi");
    } else if (k == "points") {
        cfg.initial_is_uniform = false;
        const json* pts = find(v, "points");
        if (!pts || !pts->is_array() || pts->empty())
            fail("initial.points", "expected a nonempty array of points");
        cfg.initial_points.clear();
        for (std::size_t i = 0; i < pts->size(); ++i)
            cfg.initial_points.push_back(
                as_vector((*pts)[i], cfg.dim, "initial.points[" + std::to_string(i) + "]"));
    } else {
        fail("initial.kind", "expected 'uniform' or 'points'");
    }
}

void parse_covariance(const json& v, ExperimentConfig& cfg) {
    if (!v.is_object())
        fail("covariance", "expected an object");
    check_keys(v, "covariance", {"kind", "sigma2", "matrix"});
    const json* kind = find(v, "kind");
    if (!kind)
        fail("covariance.kind", "missing");
    const std::string k = as_string(*kind, "covariance.kind");
    if (k == "scalar") {
        cfg.cov_kind = ExperimentConfig::CovKind::Scalar;
        const json* s = find(v, "sigma2");
        if (!s)
            fail("covariance.sigma2", "missing");
        cfg.sigma2 = as_double(*s, "covariance.sigma2");
    } else if (k == "diagonal") {
        cfg.cov_kind = ExperimentConfig::CovKind::Diagonal;
        const json* s = find(v, "sigma2");
        if (!s)
            fail("covariance.sigma2", "missing");
        cfg.cov_diagonal = as_vector(*s, cfg.dim, "covariance.sigma2");
    } else if (k == "full") {
        cfg.cov_kind = ExperimentConfig::CovKind::Full;
        const json* m = find(v, "matrix");
        if (!m || !m->is_array() || static_cast<int>(m->size()) != cfg.dim)
            fail("covariance.matrix", "expected an array of " + std::to_string(cfg.dim) + " rows");
        cfg.cov_matrix.resize(cfg.dim, cfg.dim);
        for (int r = 0; r < cfg.dim; ++r) {
            const json& row = (*m)[static_cast<std::size_t>(r)];
            cfg.cov_matrix.row(r) =
                as_vector(row, cfg.dim, "covariance.matrix[" + std::to_string(r) + "]")
                    .transpose();
        }
    } else {
        fail("covariance.kind", "expected 'scalar', 'diagonal' or 'full'");
    }
}

void parse_fit(const json& v, ExperimentConfig& cfg) {
    if (!v.is_object())
        fail("fit", "expected an object");
    const json* type = find(v, "type");
    if (!type)
        fail("fit.type", "missing");
    const std::string t = as_string(*type, "fit.type");
    if (t == "basis") {
        cfg.fit.type = FitSpec::Type::Basis;
        check_keys(v, "fit", {"type", "family", "size", "degree"});
        if (const json* f = find(v, "family")) {
            const std::string name = as_string(*f, "fit.family");
            if (name == "bspline")
                cfg.fit.family = basis::BasisFamily::ClampedBSpline;
            else if (name == "piecewise")
                cfg.fit.family = basis::BasisFamily::PiecewisePolynomial;
            else if (name == "fourier")
                cfg.fit.family = basis::BasisFamily::Fourier;
            else
                fail("fit.family", "expected 'bspline', 'piecewise' or 'fourier'");
        }
        if (const json* s = find(v, "size"))
            cfg.fit.size = static_cast<int>(as_integer(*s, "fit.size"));
        if (const json* d = find(v, "degree"))
            cfg.fit.degree = static_cast<int>(as_integer(*d, "fit.degree"));
    } else if (t == "mlp") {
        cfg.fit.type = FitSpec::Type::Mlp;
        check_keys(v, "fit",
                   {"type", "hidden", "activation", "epochs", "batch", "step", "tolerance",
                    "method", "seed"});
        if (const json* h = find(v, "hidden")) {
            if (!h->is_array() || h->empty())
                fail("fit.hidden", "expected a nonempty array of layer widths");
            cfg.fit.hidden.clear();
            for (std::size_t i = 0; i < h->size(); ++i)
                cfg.fit.hidden.push_back(static_cast<int>(
                    as_integer((*h)[i], "fit.hidden[" + std::to_string(i) + "]")));
        }
        if (const json* a = find(v, "activation"))
            cfg.fit.activation = as_string(*a, "fit.activation");
        if (const json* e = find(v, "epochs"))
            cfg.fit.optimizer.max_iterations =
                static_cast<std::size_t>(as_integer(*e, "fit.epochs"));
        if (const json* b = find(v, "batch"))
            cfg.fit.optimizer.batch_size = static_cast<std::size_t>(as_integer(*b, "fit.batch"));
        if (const json* s = find(v, "step"))
            cfg.fit.optimizer.step = as_double(*s, "fit.step");
        if (const json* tol = find(v, "tolerance"))
            cfg.fit.optimizer.tolerance = as_double(*tol, "fit.tolerance");
        if (const json* m = find(v, "method")) {
            const std::string name = as_string(*m, "fit.method");
            if (name == "adam")
                cfg.fit.optimizer.method = estimator::OptimMethod::Adam;
            else if (name == "gd")
                cfg.fit.optimizer.method = estimator::OptimMethod::GradientDescent;
            else
                fail("fit.method", "expected 'adam' or 'gd'");
        }
        if (const json* s = find(v, "seed"))
            cfg.fit.optimizer.seed = static_cast<std::uint64_t>(as_integer(*s, "fit.seed"));
    } else {
        fail("fit.type", "expected 'basis' or 'mlp'");
    }
}

void parse_output(const json& v, ExperimentConfig& cfg) {
    if (!v.is_object())
        fail("output", "expected an object");
    check_keys(v, "output", {"trajectories", "model", "report", "plots"});
    if (const json* t = find(v, "trajectories"))
        cfg.output.trajectories = as_string(*t, "output.trajectories");
    if (const json* m = find(v, "model"))
        cfg.output.model = as_string(*m, "output.model");
    if (const json* r = find(v, "report"))
        cfg.output.report = as_string(*r, "output.report");
    if (const json* p = find(v, "plots"))
        cfg.output.plots = as_string(*p, "output.plots");
}

} // namespace

void ExperimentConfig::validate() const {
    if (dim < 1)
        throw ConfigError("dim must be at least 1");
    if (!(horizon > 0.0))
        throw ConfigError("horizon must be positive");
    if (!(dt > 0.0))
        throw ConfigError("dt must be positive");
    try {
        (void)grid();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (trajectories < 1)
        throw ConfigError("trajectories must be at least 1");
    if (static_cast<int>(drift.size()) != dim)
        throw ConfigError("drift needs exactly one expression per dimension");
    if (initial_is_uniform) {
        if (initial_lo.size() != dim || initial_hi.size() != dim)
            throw ConfigError("initial bounds must match the dimension");
        for (int k = 0; k < dim; ++k)
            if (!(initial_lo(k) <= initial_hi(k)))
                throw ConfigError("initial lower bound exceeds the upper bound");
    } else {
        if (initial_points.empty())
            throw ConfigError("initial points list is empty");
        if (initial_points.size() != 1 &&
            initial_points.size() != static_cast<std::size_t>(trajectories))
            throw ConfigError("initial points must list one point or one per trajectory");
        for (const auto& p : initial_points)
            if (p.size() != dim)
                throw ConfigError("initial point dimension mismatch");
    }
    try {
        (void)covariance();
    } catch (const Error& e) {
        throw ConfigError(std::string("covariance: ") + e.what());
    }
    if (fit.type == FitSpec::Type::Basis) {
        if (fit.size < 1)
            throw ConfigError("fit.size must be at least 1");
        if (fit.degree < 0)
            throw ConfigError("fit.degree must be nonnegative");
    } else {
        for (int h : fit.hidden)
            if (h < 1)
                throw ConfigError("fit.hidden widths must be positive");
        if (fit.activation != "tanh" && fit.activation != "relu")
            throw ConfigError("fit.activation must be 'tanh' or 'relu'");
        if (!(fit.optimizer.step > 0.0))
            throw ConfigError("fit.step must be positive");
        if (fit.optimizer.batch_size < 1)
            throw ConfigError("fit.batch must be positive");
        if (fit.optimizer.tolerance < 0.0)
            throw ConfigError("fit.tolerance must be nonnegative");
    }
    for (double t : snapshots)
        if (t < 0.0 || t > horizon)
            throw ConfigError("snapshot times must lie in [0, horizon]");
    if (ridge < 0.0)
        throw ConfigError("ridge must be nonnegative");
    if (central_fraction < 0.0 || central_fraction > 1.0)
        throw ConfigError("central_fraction must lie in [0, 1]");
    if (threads < 1)
        throw ConfigError("threads must be at least 1");
}

dynamics::TimeGrid ExperimentConfig::grid() const {
    return dynamics::TimeGrid::uniform(horizon, dt);
}

dynamics::CovarianceModel ExperimentConfig::covariance() const {
    switch (cov_kind) {
    case CovKind::Scalar:
        return dynamics::CovarianceModel::scalar_constant(dim, sigma2);
    case CovKind::Diagonal:
        return dynamics::CovarianceModel::diagonal_constant(cov_diagonal);
    case CovKind::Full:
    default:
        return dynamics::CovarianceModel::full_constant(cov_matrix);
    }
}

dynamics::InitialDistribution ExperimentConfig::initial() const {
    if (initial_is_uniform)
        return dynamics::InitialDistribution::uniform(initial_lo, initial_hi);
    return dynamics::InitialDistribution::points_list(initial_points);
}

ExperimentConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw ConfigError("config must be a JSON object");
    check_keys(doc, "",
               {"seed", "dim", "horizon", "dt", "trajectories", "initial", "drift", "covariance",
                "fit", "snapshots", "ridge", "central_fraction", "threads", "output"});

    ExperimentConfig cfg;
    const json* dim = find(doc, "dim");
    if (!dim)
        throw ConfigError("config field 'dim' is required");
    cfg.dim = static_cast<int>(as_integer(*dim, "dim"));
    if (cfg.dim < 1)
        throw ConfigError("dim must be at least 1");

    if (const json* s = find(doc, "seed"))
        cfg.seed = static_cast<std::uint64_t>(as_integer(*s, "seed"));
    const json* horizon = find(doc, "horizon");
    if (!horizon)
        throw ConfigError("config field 'horizon' is required");
    cfg.horizon = as_double(*horizon, "horizon");
    const json* dt = find(doc, "dt");
    if (!dt)
        throw ConfigError("config field 'dt' is required");
    cfg.dt = as_double(*dt, "dt");
    const json* m = find(doc, "trajectories");
    if (!m)
        throw ConfigError("config field 'trajectories' is required");
    cfg.trajectories = static_cast<int>(as_integer(*m, "trajectories"));

    // Default initial condition: Uniform(0, 10) in every component.
    cfg.initial_lo = Vector::Zero(cfg.dim);
    cfg.initial_hi = Vector::Constant(cfg.dim, 10.0);
    if (const json* init = find(doc, "initial"))
        parse_initial(*init, cfg);

    const json* drift = find(doc, "drift");
    if (!drift)
        throw ConfigError("config field 'drift' is required");
    if (drift->is_string()) {
        // A bare string names a preset whose drift expressions are adopted.
        const std::string name = drift->get<std::string>();
        const Preset& preset = get_preset(name);
        if (preset.config.dim != cfg.dim)
            throw ConfigError("preset drift '" + name + "' has dimension " +
                              std::to_string(preset.config.dim) + ", config says " +
                              std::to_string(cfg.dim));
        cfg.drift = preset.config.drift;
        cfg.drift_preset = name;
    } else if (drift->is_array()) {
        for (std::size_t i = 0; i < drift->size(); ++i)
            cfg.drift.push_back(
                as_string((*drift)[i], "drift[" + std::to_string(i) + "]"));
    } else {
        throw ConfigError("config field 'drift': expected a preset name or an array of expressions");
    }

    const json* cov = find(doc, "covariance");
    if (!cov)
        throw ConfigError("config field 'covariance' is required");
    parse_covariance(*cov, cfg);

    const json* fit = find(doc, "fit");
    if (!fit)
        throw ConfigError("config field 'fit' is required");
    parse_fit(*fit, cfg);

    if (const json* snaps = find(doc, "snapshots")) {
        if (!snaps->is_array())
            fail("snapshots", "expected an array of times");
        cfg.snapshots.clear();
        for (std::size_t i = 0; i < snaps->size(); ++i)
            cfg.snapshots.push_back(
                as_double((*snaps)[i], "snapshots[" + std::to_string(i) + "]"));
    }
    if (const json* r = find(doc, "ridge"))
        cfg.ridge = as_double(*r, "ridge");
    if (const json* c = find(doc, "central_fraction"))
        cfg.central_fraction = as_double(*c, "central_fraction");
    if (const json* t = find(doc, "threads"))
        cfg.threads = static_cast<int>(as_integer(*t, "threads"));
    if (const json* out = find(doc, "output"))
        parse_output(*out, cfg);

    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

} // namespace driftfit::harness
