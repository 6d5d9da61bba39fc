#include "edgeheat/cahn_hilliard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "edgeheat/io.hpp"
#include "edgeheat/kernel.hpp"

namespace edgeheat {

void SolverConfig::validate() const {
  if (!(T > 0.0)) throw std::invalid_argument("solver: T must be positive");
  if (n_time < 1) throw std::invalid_argument("solver: n_time must be >= 1");
  if (!(picard_tol > 0.0)) throw std::invalid_argument("solver: picard_tol must be positive");
  if (picard_max < 1) throw std::invalid_argument("solver: picard_max must be >= 1");
  if (!(contraction_threshold > 0.0 && contraction_threshold < 1.0)) {
    throw std::invalid_argument("solver: contraction_threshold must lie in (0, 1)");
  }
  if (halving_max < 0) throw std::invalid_argument("solver: halving_max must be >= 0");
}

double Trajectory::max_contraction() const {
  double m = 0.0;
  for (double c : contraction) m = std::max(m, c);
  return m;
}

namespace {

using Spectrum = std::vector<Eigen::MatrixXd>;

double cube_part(double w, double c, Nonlinearity kind) {
  // (c + w) - (c + w)^3 minus its constant part c - c^3.
  if (kind == Nonlinearity::Linear) return w;
  return w * (1.0 - 3.0 * c * c) - 3.0 * c * w * w - w * w * w;
}

bool is_zero(const Eigen::MatrixXd& m) { return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0; }

// Nonlinear part N(u) - N(far field) as a rescaled field.
EdgeField nonlinear_part(const EdgeField& u, Nonlinearity kind) {
  const Discretization& d = *u.disc;
  EdgeField out = zero_field(u.disc, Convention::Rescaled);
  if (kind == Nonlinearity::None) return out;
  const EdgeField r = to_rescaled(u);
  if (kind == Nonlinearity::Linear) {
    out.components = r.components;
    return out;
  }
  if (!d.has_fiber_grid()) throw std::invalid_argument("nonlinearity needs fiber eigenfunction evaluators");
  if (d.fiber_resolution() < d.geometry().fiber.required_resolution()) {
    std::ostringstream msg;
    msg << "fiber quadrature resolution " << d.fiber_resolution() << " is below the de-aliasing requirement "
        << d.geometry().fiber.required_resolution() << " (4 x max mode + 1) for the cubic term";
    throw AliasingError(msg.str());
  }
  const auto& quad = d.fiber_quadrature();
  const Eigen::MatrixXd& phi = d.fiber_values();
  const double half_f = 0.5 * d.fiber_dim();
  const double c = u.far_field;

  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < r.components.size(); ++k) {
    if (!is_zero(r.components[k])) active.push_back(k);
  }
  for (std::size_t e = 0; e < d.entry_count(); ++e) {
    const Eigen::VectorXd& s = d.plan(e).s_nodes;
    const Eigen::VectorXd to_geo = s.array().pow(-half_f).matrix();
    std::vector<Eigen::MatrixXd> g;
    for (std::size_t k : active) {
      g.push_back(to_geo.asDiagonal() * (d.transfer(d.component(k).entry, e) * r.components[k]));
    }
    std::vector<std::size_t> targets;
    for (std::size_t k = 0; k < d.component_count(); ++k) {
      if (std::size_t(d.component(k).entry) == e) targets.push_back(k);
    }
    std::vector<Eigen::MatrixXd> proj(targets.size(), Eigen::MatrixXd::Zero(s.size(), d.n_edge()));
    for (Eigen::Index q = 0; q < quad.size(); ++q) {
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(s.size(), d.n_edge());
      for (std::size_t a = 0; a < active.size(); ++a) w += phi(Eigen::Index(active[a]), q) * g[a];
      const Eigen::MatrixXd nq = w.unaryExpr([&](double x) { return cube_part(x, c, kind); });
      for (std::size_t t = 0; t < targets.size(); ++t) {
        proj[t] += (quad.weights[q] * phi(Eigen::Index(targets[t]), q)) * nq;
      }
    }
    const Eigen::VectorXd to_res = s.array().pow(half_f).matrix();
    for (std::size_t t = 0; t < targets.size(); ++t) out.components[targets[t]] = to_res.asDiagonal() * proj[t];
  }
  return out;
}

Spectrum q_spectrum(const EdgeField& u, Nonlinearity kind) {
  const Discretization& d = *u.disc;
  Spectrum spec = to_spectral(nonlinear_part(u, kind));
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k].array() *= d.symbol(d.component(k).entry).array();
  return spec;
}

// phi1(z) = (1 - e^{-z})/z and psi(z) = (1 - (1+z)e^{-z})/z^2, series near 0.
void etd_weights(double z, double& phi1, double& psi) {
  if (z < 0.5) {
    // phi1 = sum (-z)^n/(n+1)!, psi = sum (-z)^n (n+1)/(n+2)!
    double term = 1.0;  // (-z)^n
    phi1 = 0.0;
    psi = 0.0;
    double fact = 1.0;  // (n+1)!
    for (int n = 0; n < 25; ++n) {
      fact *= (n + 1);
      term = (n == 0 ? 1.0 : term * -z);
      phi1 += term / fact;
      psi += term * (n + 1) / (fact * (n + 2));
    }
    return;
  }
  const double e = std::exp(-z);
  phi1 = -std::expm1(-z) / z;
  psi = (1.0 - (1.0 + z) * e) / (z * z);
}

double sup_difference(const EdgeField& a, const EdgeField& b) {
  return std::max(nodal_sup(a - b), std::abs(a.far_field - b.far_field));
}

}  // namespace

EdgeField apply_Q(const EdgeField& u, Nonlinearity kind) {
  if (u.convention != Convention::Geometric) throw ConventionError("apply_Q: expected a geometric field");
  return to_geometric(apply_laplacian(nonlinear_part(u, kind)));
}

Trajectory free_trajectory(const EdgeField& u0, double T, int n_time) {
  Trajectory traj;
  traj.T = T;
  const EdgeField r = to_rescaled(u0);
  for (int k = 0; k <= n_time; ++k) {
    const double t = T * k / n_time;
    traj.times.push_back(t);
    traj.fields.push_back(k == 0 ? r : apply_biharmonic_heat(r, t));
  }
  return traj;
}

Trajectory duhamel_map(const Trajectory& u, const EdgeField& u0, Nonlinearity kind) {
  const std::size_t nodes = u.times.size();
  if (nodes < 2 || u.fields.size() != nodes) throw std::invalid_argument("duhamel_map: malformed trajectory");
  const Discretization& d = *u0.disc;
  const EdgeField r0 = to_rescaled(u0);
  const Spectrum s0 = to_spectral(r0);
  const double h = u.times[1] - u.times[0];

  std::vector<Spectrum> q(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    q[k] = kind == Nonlinearity::None ? Spectrum{} : q_spectrum(to_geometric(u.fields[k]), kind);
  }

  // Per-entry step factors.
  std::vector<Eigen::ArrayXXd> decay(d.entry_count()), w_left(d.entry_count()), w_right(d.entry_count()),
      lambda(d.entry_count());
  for (std::size_t e = 0; e < d.entry_count(); ++e) {
    lambda[e] = d.symbol(e).array().square();
    decay[e] = (-h * lambda[e]).exp();
    w_left[e].resizeLike(lambda[e]);
    w_right[e].resizeLike(lambda[e]);
    for (Eigen::Index i = 0; i < lambda[e].size(); ++i) {
      double phi1, psi;
      etd_weights(h * lambda[e](i), phi1, psi);
      w_left[e](i) = h * psi;
      w_right[e](i) = h * (phi1 - psi);
    }
  }

  Trajectory out;
  out.times = u.times;
  out.T = u.T;
  out.fields.reserve(nodes);
  out.fields.push_back(r0);
  Spectrum duhamel(s0.size());
  for (std::size_t c = 0; c < s0.size(); ++c) duhamel[c] = Eigen::MatrixXd::Zero(s0[c].rows(), s0[c].cols());
  for (std::size_t k = 1; k < nodes; ++k) {
    const double t = u.times[k];
    Spectrum value(s0.size());
    for (std::size_t c = 0; c < s0.size(); ++c) {
      const int e = d.component(c).entry;
      if (kind != Nonlinearity::None) {
        duhamel[c] = (decay[e] * duhamel[c].array() + w_left[e] * q[k - 1][c].array() +
                      w_right[e] * q[k][c].array())
                         .matrix();
      }
      value[c] = ((-t * lambda[e]).exp() * s0[c].array()).matrix() + duhamel[c];
    }
    out.fields.push_back(from_spectral(u0.disc, value, u0.far_field));
  }
  return out;
}

double trajectory_distance(const Trajectory& a, const Trajectory& b) {
  if (a.fields.size() != b.fields.size()) throw std::invalid_argument("trajectories have different node counts");
  double m = 0.0;
  for (std::size_t k = 0; k < a.fields.size(); ++k) m = std::max(m, sup_difference(a.fields[k], b.fields[k]));
  return m;
}

Trajectory picard_solve(const EdgeField& u0, const SolverConfig& cfg) {
  cfg.validate();
  double T = cfg.T;
  std::ostringstream history;
  for (int halving = 0; halving <= cfg.halving_max; ++halving, T *= 0.5) {
    Trajectory current = free_trajectory(u0, T, cfg.n_time);
    std::vector<double> updates, ratios;
    bool converged = false;
    bool diverging = false;
    int it = 0;
    while (it < cfg.picard_max) {
      Trajectory next = duhamel_map(current, u0, cfg.nonlinearity);
      ++it;
      const double delta = trajectory_distance(next, current);
      updates.push_back(delta);
      current = std::move(next);
      if (updates.size() >= 2 && updates[updates.size() - 2] > 0.0) {
        const double theta = delta / updates[updates.size() - 2];
        ratios.push_back(theta);
        // Ratios at the round-off floor carry no information.
        if (theta > cfg.contraction_threshold && delta > cfg.picard_tol) {
          diverging = true;
          break;
        }
      }
      if (!std::isfinite(delta)) {
        diverging = true;
        break;
      }
      if (delta <= cfg.picard_tol) {
        converged = true;
        break;
      }
    }
    current.update_norms = updates;
    current.contraction = ratios;
    current.iterations = it;
    current.halvings = halving;
    current.T = T;
    if (converged) {
      current.converged = true;
      current.message = "converged";
      return current;
    }
    history << "T=" << T << ": " << (diverging ? "contraction factor " : "no convergence in budget, last ratio ")
            << (ratios.empty() ? 0.0 : ratios.back()) << "; ";
    if (halving == cfg.halving_max) {
      current.converged = false;
      current.message = "no short-time solution at this resolution after " + std::to_string(cfg.halving_max) +
                        " halvings (" + history.str() + ")";
      return current;
    }
  }
  return {};  // unreachable
}

Trajectory march(const EdgeField& u0, double T_total, const SolverConfig& cfg) {
  if (!(T_total > 0.0)) throw std::invalid_argument("march: T_total must be positive");
  Trajectory all;
  all.converged = true;
  EdgeField start = to_rescaled(u0);
  double t0 = 0.0;
  all.times.push_back(0.0);
  all.fields.push_back(start);
  const double eps = 1e-12 * T_total;
  while (t0 < T_total - eps) {
    SolverConfig step = cfg;
    step.T = std::min(cfg.T, T_total - t0);
    Trajectory part = picard_solve(start, step);
    all.iterations += part.iterations;
    all.halvings += part.halvings;
    all.update_norms.insert(all.update_norms.end(), part.update_norms.begin(), part.update_norms.end());
    all.contraction.insert(all.contraction.end(), part.contraction.begin(), part.contraction.end());
    if (!part.converged) {
      all.converged = false;
      std::ostringstream msg;
      msg << "subinterval starting at t=" << t0 << " failed: " << part.message;
      all.message = msg.str();
      all.T = t0;
      return all;
    }
    for (std::size_t k = 1; k < part.times.size(); ++k) {
      all.times.push_back(t0 + part.times[k]);
      all.fields.push_back(part.fields[k]);
    }
    t0 += part.T;
    start = part.fields.back();
  }
  all.T = t0;
  all.message = "converged";
  return all;
}

// --- diagnostics ---------------------------------------------------------

double energy(const EdgeField& u) {
  const Discretization& d = *u.disc;
  if (!d.has_fiber_grid()) throw std::invalid_argument("energy needs fiber eigenfunction evaluators");
  const EdgeField r = to_rescaled(u);
  // Dirichlet part from the spectral form <w, Delta w> (Parseval in s and y).
  const auto spec = to_spectral(r);
  double dirichlet = 0.0;
  for (std::size_t c = 0; c < spec.size(); ++c) {
    const HankelPlan& plan = d.component_plan(c);
    dirichlet +=
        (plan.rho_weights.asDiagonal() * (d.symbol(d.component(c).entry).array() * spec[c].array().square()).matrix())
            .sum();
  }
  dirichlet *= d.edge_weight();

  const auto& quad = d.fiber_quadrature();
  const HankelPlan& p0 = d.plan(0);
  const double f = d.fiber_dim();
  const Eigen::VectorXd to_geo = p0.s_nodes.array().pow(-0.5 * f).matrix();
  std::vector<Eigen::MatrixXd> g(r.components.size());
  for (std::size_t c = 0; c < g.size(); ++c) {
    g[c] = to_geo.asDiagonal() * (d.transfer(d.component(c).entry, 0) * r.components[c]);
  }
  auto W = [](double x) { return 0.25 * (1.0 - x * x) * (1.0 - x * x); };
  const double c0 = u.far_field;
  const Eigen::VectorXd radial = p0.s_weights.cwiseProduct(p0.s_nodes.array().pow(f).matrix());
  double potential = 0.0;
  for (Eigen::Index q = 0; q < quad.size(); ++q) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p0.n, d.n_edge());
    for (std::size_t c = 0; c < g.size(); ++c) w += d.fiber_values()(Eigen::Index(c), q) * g[c];
    const Eigen::MatrixXd pot = w.unaryExpr([&](double x) { return W(c0 + x) - W(c0); });
    potential += quad.weights[q] * (radial.transpose() * pot).sum();
  }
  potential *= d.edge_weight();
  return 0.5 * dirichlet + potential;
}

std::vector<TipFit> tip_exponents(const EdgeField& u) {
  const Discretization& d = *u.disc;
  const auto& geom = d.geometry();
  const int f = d.fiber_dim();
  const IndexSet set = index_set(geom, 40.0);
  const int samples = 12;
  Eigen::VectorXd s(samples);
  for (int i = 0; i < samples; ++i) s[i] = 1e-3 * std::pow(50.0, double(i) / (samples - 1));

  double scale = 0.0;
  for (const auto& m : u.components) scale = std::max(scale, m.cwiseAbs().maxCoeff());
  std::vector<TipFit> fits;
  for (std::size_t c = 0; c < d.component_count(); ++c) {
    // Components at round-off level relative to the field carry no profile.
    if (u.components[c].cwiseAbs().maxCoeff() <= 1e-10 * scale) continue;
    const Component& comp = d.component(c);
    TipFit fit;
    fit.component = c;
    fit.entry = comp.entry;
    fit.copy = comp.copy;
    const double sigma_sq = geom.fiber.entries[comp.entry].sigma_sq;
    const double base = -(f - 1) / 2.0 + nu_of_sigma(sigma_sq, f);
    Eigen::VectorXd v = component_profile(u, c, s);
    double floor = base;
    if (comp.entry == 0) {
      v.array() -= tip_value(u, c);
      floor = base + 1e-9;  // the constant term has been removed
    }
    try {
      const ExponentFit e = fit_leading_exponent(s, v);
      fit.fitted = true;
      fit.gamma = e.gamma;
      fit.log_flag = e.log_flag;
      // Nearest exponent of the index set generated by this eigenvalue.
      double best = std::numeric_limits<double>::infinity();
      for (const IndexEntry& entry : set.entries) {
        for (const IndexSource& src : entry.sources) {
          if (std::abs(src.sigma_sq - sigma_sq) > 1e-9 || entry.gamma < floor) continue;
          if (std::abs(entry.gamma - e.gamma) < std::abs(best - e.gamma)) best = entry.gamma;
        }
      }
      fit.expected = best;
      fit.matches = std::abs(fit.gamma - fit.expected) <= 0.05 && !fit.log_flag;
    } catch (const ExponentFitError& err) {
      fit.message = err.what();
    }
    fits.push_back(fit);
  }
  return fits;
}

Diagnostics diagnostics(const Trajectory& traj) {
  if (traj.fields.empty()) throw std::invalid_argument("diagnostics: empty trajectory");
  Diagnostics diag;
  for (const EdgeField& u : traj.fields) {
    diag.mass.push_back(mass(u));
    diag.energy.push_back(energy(u));
  }
  const double m0 = diag.mass.front();
  for (double m : diag.mass) {
    const double drift = m0 != 0.0 ? std::abs(m - m0) / std::abs(m0) : std::abs(m - m0);
    diag.mass_drift = std::max(diag.mass_drift, drift);
  }
  for (std::size_t k = 1; k < diag.energy.size(); ++k) {
    diag.max_energy_increase = std::max(diag.max_energy_increase, diag.energy[k] - diag.energy[k - 1]);
  }
  diag.energy_monotone = diag.max_energy_increase <= 1e-8;
  diag.tip_fits = tip_exponents(traj.fields.back());
  return diag;
}

std::filesystem::path write_trajectory(const Trajectory& traj, const Diagnostics& diag,
                                       const std::filesystem::path& dir, const std::string& stem) {
  nlohmann::json manifest;
  manifest["converged"] = traj.converged;
  manifest["message"] = traj.message;
  manifest["T"] = traj.T;
  manifest["iterations"] = traj.iterations;
  manifest["halvings"] = traj.halvings;
  manifest["update_norms"] = traj.update_norms;
  manifest["contraction"] = traj.contraction;
  manifest["times"] = traj.times;
  manifest["mass"] = diag.mass;
  manifest["mass_drift"] = diag.mass_drift;
  manifest["energy"] = diag.energy;
  manifest["max_energy_increase"] = diag.max_energy_increase;
  manifest["tip_fits"] = nlohmann::json::array();
  for (const TipFit& t : diag.tip_fits) {
    manifest["tip_fits"].push_back({{"component", t.component},
                                    {"entry", t.entry},
                                    {"copy", t.copy},
                                    {"fitted", t.fitted},
                                    {"gamma", t.gamma},
                                    {"expected", t.expected},
                                    {"log_flag", t.log_flag},
                                    {"matches", t.matches},
                                    {"message", t.message}});
  }
  manifest["fields"] = nlohmann::json::array();
  for (std::size_t k = 0; k < traj.fields.size(); ++k) {
    const std::string name = stem + "_node" + std::to_string(k);
    write_field(traj.fields[k], dir, name);
    manifest["fields"].push_back(name + ".csv");
  }
  const auto path = dir / (stem + ".json");
  write_text(path, manifest.dump(2) + "\n");
  return path;
}

}  // namespace edgeheat
