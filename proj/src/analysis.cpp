#include "semm/analysis.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/LU>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace semm {

double sinc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - (kPi * x) * (kPi * x) / 6.0;
  return std::sin(kPi * x) / (kPi * x);
}

double model_cos(double area, double k) { return std::abs(std::cos(kTwoPi * k * area)); }

double model_ceramic(double area, double k) {
  const double x = kTwoPi * k * area;
  auto integrand = [x](double theta) {
    const double s = std::sin(theta);
    return std::cos(x * std::cos(theta)) * s * s * s * s;
  };
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      integrand, 0.0, kPi / 2.0, 20, 1e-13, &error);
  return value / (3.0 * kPi / 16.0);
}

double model_ceramic_bessel(double area, double k) {
  const double x = kTwoPi * k * area;
  if (std::abs(x) < 1e-4) return 1.0 - x * x / 12.0 + x * x * x * x / 384.0;
  return 8.0 * std::cyl_bessel_j(2.0, std::abs(x)) / (x * x);
}

double model_nano(double area, double k, double b) {
  return std::abs(sinc(2.0 * k * area)) * std::exp(-b * area);
}

double FitResult::param(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("no fit parameter named " + name);
  return params[it - names.begin()];
}

double FitResult::stderr_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end() || stderrs.size() == 0)
    throw std::out_of_range("no standard error for " + name);
  return stderrs[it - names.begin()];
}

Model stark_model(StarkModel which) {
  switch (which) {
    case StarkModel::cos:
      return {"cos", {"A0", "k"},
              [](double a, const Eigen::VectorXd& p) { return p[0] * model_cos(a, p[1]); }};
    case StarkModel::ceramic:
      return {"ceramic", {"A0", "k"},
              [](double a, const Eigen::VectorXd& p) {
                return p[0] * std::abs(model_ceramic(a, p[1]));
              }};
    case StarkModel::nano:
      return {"nano", {"A0", "k", "b"}, [](double a, const Eigen::VectorXd& p) {
                return p[0] * model_nano(a, p[1], p[2]);
              }};
  }
  throw ValidationError("unknown Stark model");
}

StarkModel parse_stark_model(const std::string& name) {
  if (name == "cos") return StarkModel::cos;
  if (name == "ceramic") return StarkModel::ceramic;
  if (name == "nano" || name == "powder") return StarkModel::nano;
  throw ValidationError("unknown model '" + name + "' (expected cos, ceramic or nano)");
}

namespace {

struct Residuals : Eigen::DenseFunctor<double> {
  Residuals(const Model& model, std::span<const double> x, std::span<const double> y,
            std::span<const double> w)
      : DenseFunctor<double>(static_cast<int>(model.names.size()), static_cast<int>(x.size())),
        model_(model),
        x_(x),
        y_(y),
        w_(w) {}

  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    for (std::size_t i = 0; i < x_.size(); ++i) {
      const double sw = w_.empty() ? 1.0 : std::sqrt(w_[i]);
      r[static_cast<Eigen::Index>(i)] = sw * (model_.eval(x_[i], p) - y_[i]);
    }
    return 0;
  }

  int df(const Eigen::VectorXd& p, Eigen::MatrixXd& jac) const {
    Eigen::VectorXd lo(values()), hi(values());
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      const double h = 1e-6 * std::max(std::abs(p[j]), 1e-6);
      Eigen::VectorXd q = p;
      q[j] = p[j] + h;
      (*this)(q, hi);
      q[j] = p[j] - h;
      (*this)(q, lo);
      jac.col(j) = (hi - lo) / (2.0 * h);
    }
    return 0;
  }

  const Model& model_;
  std::span<const double> x_, y_, w_;
};

bool is_converged(Eigen::LevenbergMarquardtSpace::Status s) {
  using namespace Eigen::LevenbergMarquardtSpace;
  switch (s) {
    case RelativeReductionTooSmall:
    case RelativeErrorTooSmall:
    case RelativeErrorAndReductionTooSmall:
    case CosinusTooSmall:
    case FtolTooSmall:
    case XtolTooSmall:
    case GtolTooSmall:
      return true;
    default:
      return false;
  }
}

constexpr int kMaxIterations = 200;

}  // namespace

FitResult fit(const Model& model, std::span<const double> x, std::span<const double> y,
              const Eigen::VectorXd& init, std::span<const double> weights) {
  const auto n_params = model.names.size();
  if (static_cast<std::size_t>(init.size()) != n_params)
    throw ValidationError("initial parameter count does not match the model");
  if (x.size() != y.size()) throw ValidationError("x and y differ in length");
  if (!weights.empty() && weights.size() != x.size())
    throw ValidationError("weights differ in length from the data");
  if (x.size() < 3 * n_params)
    throw ValidationError("fit needs at least 3 points per parameter");

  Residuals functor(model, x, y, weights);
  Eigen::LevenbergMarquardt<Residuals> lm(functor);
  lm.setXtol(1e-8);
  lm.setFtol(1e-14);
  lm.setGtol(0.0);
  lm.setMaxfev(100000);

  Eigen::VectorXd p = init;
  auto status = lm.minimizeInit(p);
  int iterations = 0;
  if (status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters) {
    while (iterations < kMaxIterations) {
      status = lm.minimizeOneStep(p);
      ++iterations;
      if (status != Eigen::LevenbergMarquardtSpace::Running) break;
    }
  }

  FitResult result;
  result.names = model.names;
  result.params = p;
  result.iterations = iterations;
  Eigen::VectorXd r(static_cast<Eigen::Index>(x.size()));
  functor(p, r);
  result.residual_rms = std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
  result.converged = is_converged(status) && p.allFinite();

  Eigen::MatrixXd jac(r.size(), p.size());
  functor.df(p, jac);
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
  if (!jtj.allFinite() || lu.rank() < p.size())
    throw FitError("singular Jacobian at the fitted parameters");

  if (result.converged) {
    const double dof = std::max<double>(1.0, static_cast<double>(r.size() - p.size()));
    const double sigma2 = r.squaredNorm() / dof;
    result.stderrs = (sigma2 * lu.inverse().diagonal()).cwiseSqrt();
  }
  return result;
}

FitResult fit_exp_decay(std::span<const double> t, std::span<const double> amplitude) {
  if (t.size() != amplitude.size()) throw ValidationError("t and amplitude differ in length");
  if (t.size() < 4) throw ValidationError("exponential fit needs at least 4 points");
  for (double a : amplitude)
    if (!(a > 0.0)) throw ValidationError("exponential fit needs positive amplitudes");

  std::vector<double> log_a(amplitude.size());
  std::transform(amplitude.begin(), amplitude.end(), log_a.begin(),
                 [](double a) { return std::log(a); });
  const LinearFit start = linear_fit(t, log_a);

  FitResult out;
  out.names = {"A0", "T2"};
  if (!(start.slope < 0.0)) {
    // Flat or growing data: the lifetime diverges.
    out.params = Eigen::Vector2d(std::exp(start.intercept), kInfinity);
    out.converged = false;
    return out;
  }

  const Model decay{"exp_decay", {"A0", "rate"}, [](double x, const Eigen::VectorXd& p) {
                      return p[0] * std::exp(-p[1] * x);
                    }};
  const FitResult inner =
      fit(decay, t, amplitude, Eigen::Vector2d(std::exp(start.intercept), -start.slope));

  const double rate = inner.params[1];
  out.iterations = inner.iterations;
  out.residual_rms = inner.residual_rms;
  out.converged = inner.converged && rate > 0.0;
  out.params = Eigen::Vector2d(inner.params[0], rate > 0.0 ? 1.0 / rate : kInfinity);
  if (out.converged)
    out.stderrs = Eigen::Vector2d(inner.stderrs[0], inner.stderrs[1] / (rate * rate));
  return out;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("x and y differ in length");
  if (x.size() < 3) throw ValidationError("linear fit needs at least 3 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw ValidationError("linear fit needs at least two distinct x values");
  LinearFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.r = syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
  return out;
}

std::vector<double> unwrap_to_reference(std::span<const double> y,
                                        std::span<const double> reference) {
  if (y.size() != reference.size()) throw ValidationError("unwrap inputs differ in length");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    out[i] = y[i] + kTwoPi * std::round((reference[i] - y[i]) / kTwoPi);
  return out;
}

}  // namespace semm
