#include "edgeheat/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "edgeheat/io.hpp"
#include "edgeheat/specfun.hpp"

namespace edgeheat {

namespace {

constexpr double kPi = std::numbers::pi;

// Second-order d/ds on a non-uniform grid: centred in the interior,
// one-sided three-point stencils at both ends. Exact for quadratics.
Eigen::MatrixXd difference_matrix(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  auto stencil = [&](Eigen::Index row, Eigen::Index a) {
    // Lagrange derivative at x[row] through x[a], x[a+1], x[a+2].
    for (int p = 0; p < 3; ++p) {
      double num = 0.0, den = 1.0;
      for (int q = 0; q < 3; ++q) {
        if (q == p) continue;
        den *= x[a + p] - x[a + q];
        double prod = 1.0;
        for (int r = 0; r < 3; ++r) {
          if (r == p || r == q) continue;
          prod *= x[row] - x[a + r];
        }
        num += prod;
      }
      d(row, a + p) = num / den;
    }
  };
  for (Eigen::Index i = 0; i < n; ++i) stencil(i, std::clamp<Eigen::Index>(i - 1, 0, n - 3));
  return d;
}

double far_field_check(const EdgeField& a, const EdgeField& b) {
  if (a.disc != b.disc) throw std::invalid_argument("fields live on different discretizations");
  if (a.convention != b.convention) throw ConventionError("fields carry different conventions");
  return 0.0;
}

Eigen::VectorXd rescale_factor(const Discretization& d, std::size_t entry, double power) {
  const double half_f = 0.5 * d.fiber_dim();
  return d.plan(entry).s_nodes.array().pow(power * half_f).matrix();
}

void require_rescaled(const EdgeField& u, const char* what) {
  if (u.convention != Convention::Rescaled) {
    throw ConventionError(std::string(what) + ": expected a phi-rescaled field");
  }
}

}  // namespace

// --- discretization ------------------------------------------------------

Discretization::Discretization(EdgeGeometry geom, int n, double edge_length, int n_edge, int fiber_resolution)
    : geom_(std::move(geom)), n_(n), n_edge_(n_edge), edge_length_(edge_length) {
  if (geom_.b > 1) throw std::invalid_argument("field discretization supports b = 0 or b = 1");
  if (n < 16) throw std::invalid_argument("field discretization needs n >= 16 radial nodes");
  if (geom_.b == 0) {
    n_edge_ = 1;
    edge_length_ = 0.0;
  } else {
    if (!(edge_length > 0.0)) throw std::invalid_argument("b = 1 requires a positive edge length L");
    if (n_edge < 2) throw std::invalid_argument("b = 1 requires n_edge >= 2");
  }

  const int f = geom_.fiber_dim();
  const auto& entries = geom_.fiber.entries;
  plans_.reserve(entries.size());
  for (std::size_t e = 0; e < entries.size(); ++e) {
    plans_.push_back(build_plan(nu_of_sigma(entries[e].sigma_sq, f), n, geom_.s_max));
    for (int c = 0; c < entries[e].multiplicity; ++c) components_.push_back({static_cast<int>(e), c});
  }

  // Real orthonormal Fourier basis on the edge samples.
  const int N = n_edge_;
  edge_nodes_ = Eigen::VectorXd::Zero(N);
  edge_basis_ = Eigen::MatrixXd::Zero(N, N);
  edge_xi_ = Eigen::VectorXd::Zero(N);
  if (geom_.b == 0) {
    edge_basis_(0, 0) = 1.0;
  } else {
    for (int j = 0; j < N; ++j) edge_nodes_[j] = edge_length_ * j / N;
    edge_basis_.col(0).setConstant(1.0 / std::sqrt(double(N)));
    int col = 1;
    for (int m = 1; 2 * m < N; ++m) {
      const double xi = 2.0 * kPi * m / edge_length_;
      for (int j = 0; j < N; ++j) {
        edge_basis_(j, col) = std::sqrt(2.0 / N) * std::cos(xi * edge_nodes_[j]);
        edge_basis_(j, col + 1) = std::sqrt(2.0 / N) * std::sin(xi * edge_nodes_[j]);
      }
      edge_xi_[col] = edge_xi_[col + 1] = xi;
      col += 2;
    }
    if (N % 2 == 0) {
      for (int j = 0; j < N; ++j) edge_basis_(j, col) = (j % 2 == 0 ? 1.0 : -1.0) / std::sqrt(double(N));
      edge_xi_[col] = kPi * N / edge_length_;
    }
  }
  // Spectral y-derivative as a right multiplier: coefficients of cos pick up
  // -xi on the sin column and vice versa; the Nyquist column is dropped.
  Eigen::MatrixXd dxi = Eigen::MatrixXd::Zero(N, N);
  for (int col = 1; col + 1 < N; col += 2) {
    dxi(col, col + 1) = -edge_xi_[col];
    dxi(col + 1, col) = edge_xi_[col];
  }
  edge_diff_ = edge_basis_ * dxi * edge_basis_.transpose();

  if (geom_.fiber.has_eigenfunctions()) {
    fiber_resolution_ = fiber_resolution > 0 ? fiber_resolution : geom_.fiber.required_resolution();
    fiber_quad_ = geom_.fiber.quadrature(fiber_resolution_);
    fiber_values_.resize(static_cast<Eigen::Index>(components_.size()), fiber_quad_.size());
    for (std::size_t c = 0; c < components_.size(); ++c) {
      const auto& mode = entries[components_[c].entry];
      for (Eigen::Index q = 0; q < fiber_quad_.size(); ++q) {
        const Eigen::VectorXd z = fiber_quad_.points.col(q);
        fiber_values_(static_cast<Eigen::Index>(c), q) = mode.eigenfunction({z.data(), std::size_t(z.size())},
                                                                             components_[c].copy);
      }
    }
  }

  const std::size_t ne = plans_.size();
  transfer_.resize(ne * ne);
  for (std::size_t from = 0; from < ne; ++from) {
    for (std::size_t to = 0; to < ne; ++to) {
      transfer_[from * ne + to] = from == to ? Eigen::MatrixXd::Identity(n, n)
                                             : interpolation_matrix(plans_[from], plans_[to].s_nodes);
    }
  }

  const Eigen::VectorXd& s0 = plans_.front().s_nodes;
  norm_count_ = (s0.array() <= 0.75 * geom_.s_max).count();
  radial_diff_ = difference_matrix(s0);
}

const Eigen::MatrixXd& Discretization::transfer(std::size_t from, std::size_t to) const {
  return transfer_.at(from * plans_.size() + to);
}

Eigen::MatrixXd Discretization::symbol(std::size_t entry) const {
  const Eigen::ArrayXd rho2 = plan(entry).rho_nodes.array().square();
  const Eigen::ArrayXd xi2 = edge_xi_.array().square();
  return (rho2.replicate(1, n_edge_).rowwise() + xi2.transpose()).matrix();
}

Eigen::RowVectorXd Discretization::edge_basis_at(double y) const {
  const int N = n_edge_;
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(N);
  if (geom_.b == 0) {
    row[0] = 1.0;
    return row;
  }
  row[0] = 1.0 / std::sqrt(double(N));
  int col = 1;
  for (; col + 1 < N; col += 2) {
    row[col] = std::sqrt(2.0 / N) * std::cos(edge_xi_[col] * y);
    row[col + 1] = std::sqrt(2.0 / N) * std::sin(edge_xi_[col] * y);
  }
  if (N % 2 == 0) row[N - 1] = std::cos(edge_xi_[N - 1] * y) / std::sqrt(double(N));
  return row;
}

DiscretizationPtr make_discretization(EdgeGeometry geom, int n, double edge_length, int n_edge, int fiber_resolution) {
  return std::make_shared<const Discretization>(std::move(geom), n, edge_length, n_edge, fiber_resolution);
}

// --- construction --------------------------------------------------------

EdgeField zero_field(const DiscretizationPtr& disc, Convention convention) {
  if (!disc) throw std::invalid_argument("zero_field: null discretization");
  EdgeField u;
  u.disc = disc;
  u.convention = convention;
  u.components.assign(disc->component_count(), Eigen::MatrixXd::Zero(disc->n(), disc->n_edge()));
  return u;
}

EdgeField constant_field(const DiscretizationPtr& disc, double c, Convention convention) {
  EdgeField u = zero_field(disc, convention);
  u.far_field = c;
  return u;
}

EdgeField project_function(const DiscretizationPtr& disc, const PointFunction& fn, double far_field,
                           Convention convention) {
  if (!disc->has_fiber_grid()) {
    throw std::invalid_argument("project_function: fiber has no eigenfunction evaluators");
  }
  EdgeField u = zero_field(disc, Convention::Geometric);
  u.far_field = far_field;
  const auto& quad = disc->fiber_quadrature();
  const Eigen::MatrixXd& phi = disc->fiber_values();
  std::vector<Eigen::VectorXd> z(quad.size());
  for (Eigen::Index q = 0; q < quad.size(); ++q) z[q] = quad.points.col(q);
  for (std::size_t e = 0; e < disc->entry_count(); ++e) {
    const Eigen::VectorXd& s = disc->plan(e).s_nodes;
    Eigen::MatrixXd samples(quad.size(), disc->n_edge());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      for (int j = 0; j < disc->n_edge(); ++j) {
        for (Eigen::Index q = 0; q < quad.size(); ++q) {
          samples(q, j) = fn(s[i], {z[q].data(), std::size_t(z[q].size())}, disc->edge_nodes()[j]) - far_field;
        }
      }
      for (std::size_t c = 0; c < disc->component_count(); ++c) {
        if (std::size_t(disc->component(c).entry) != e) continue;
        const Eigen::RowVectorXd wphi = phi.row(Eigen::Index(c)).cwiseProduct(quad.weights.transpose());
        u.components[c].row(i) = wphi * samples;
      }
    }
  }
  return with_convention(u, convention);
}

EdgeField mode_field(const DiscretizationPtr& disc, std::size_t component, const ProfileFunction& profile,
                     Convention convention) {
  EdgeField u = zero_field(disc, Convention::Geometric);
  const Eigen::VectorXd& s = disc->component_plan(component).s_nodes;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    for (int j = 0; j < disc->n_edge(); ++j) u.components.at(component)(i, j) = profile(s[i], disc->edge_nodes()[j]);
  }
  return with_convention(u, convention);
}

EdgeField radial_field(const DiscretizationPtr& disc, const ProfileFunction& profile, Convention convention) {
  const double root_vol = std::sqrt(disc->geometry().fiber.volume());
  return mode_field(disc, 0, [&](double s, double y) { return root_vol * profile(s, y); }, convention);
}

EdgeField with_convention(const EdgeField& u, Convention convention) {
  if (u.convention == convention) return u;
  EdgeField out = u;
  out.convention = convention;
  const double power = convention == Convention::Rescaled ? 1.0 : -1.0;
  for (std::size_t c = 0; c < u.components.size(); ++c) {
    const Eigen::VectorXd factor = rescale_factor(*u.disc, u.disc->component(c).entry, power);
    out.components[c] = factor.asDiagonal() * u.components[c];
  }
  return out;
}

EdgeField to_rescaled(const EdgeField& u) { return with_convention(u, Convention::Rescaled); }
EdgeField to_geometric(const EdgeField& u) { return with_convention(u, Convention::Geometric); }

EdgeField operator+(const EdgeField& a, const EdgeField& b) {
  far_field_check(a, b);
  EdgeField out = a;
  out.far_field += b.far_field;
  for (std::size_t c = 0; c < out.components.size(); ++c) out.components[c] += b.components[c];
  return out;
}

EdgeField operator-(const EdgeField& a, const EdgeField& b) {
  far_field_check(a, b);
  EdgeField out = a;
  out.far_field -= b.far_field;
  for (std::size_t c = 0; c < out.components.size(); ++c) out.components[c] -= b.components[c];
  return out;
}

EdgeField operator*(double alpha, const EdgeField& a) {
  EdgeField out = a;
  out.far_field *= alpha;
  for (auto& m : out.components) m *= alpha;
  return out;
}

// --- spectral calculus ---------------------------------------------------

std::vector<Eigen::MatrixXd> to_spectral(const EdgeField& u) {
  require_rescaled(u, "to_spectral");
  const Discretization& d = *u.disc;
  std::vector<Eigen::MatrixXd> spec(u.components.size());
  for (std::size_t c = 0; c < u.components.size(); ++c) {
    spec[c] = forward(d.component_plan(c), u.components[c] * d.edge_basis());
  }
  return spec;
}

EdgeField from_spectral(const DiscretizationPtr& disc, const std::vector<Eigen::MatrixXd>& spec, double far_field) {
  EdgeField u = zero_field(disc, Convention::Rescaled);
  u.far_field = far_field;
  for (std::size_t c = 0; c < spec.size(); ++c) {
    u.components[c] = inverse(disc->component_plan(c), spec[c]) * disc->edge_basis().transpose();
  }
  return u;
}

EdgeField apply_symbol(const EdgeField& u, const std::function<double(double)>& m, bool keep_far_field) {
  const Convention original = u.convention;
  const EdgeField r = to_rescaled(u);
  std::vector<Eigen::MatrixXd> spec = to_spectral(r);
  const Discretization& d = *u.disc;
  std::vector<Eigen::MatrixXd> mult(d.entry_count());
  for (std::size_t e = 0; e < d.entry_count(); ++e) mult[e] = d.symbol(e).unaryExpr(m);
  for (std::size_t c = 0; c < spec.size(); ++c) spec[c].array() *= mult[d.component(c).entry].array();
  return with_convention(from_spectral(u.disc, spec, keep_far_field ? u.far_field : 0.0), original);
}

EdgeField apply_biharmonic_heat(const EdgeField& u, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("apply_biharmonic_heat: t must be >= 0");
  if (t == 0.0) return u;
  // e^{-tDelta^2} 1 = 1: the far-field constant is carried through unchanged.
  return apply_symbol(u, [t](double mu) { return std::exp(-t * mu * mu); }, true);
}

EdgeField apply_laplacian(const EdgeField& u) {
  require_rescaled(u, "apply_laplacian");
  return apply_symbol(u, [](double mu) { return mu; }, false);
}

// --- functionals ---------------------------------------------------------

double mass(const EdgeField& u) {
  const Discretization& d = *u.disc;
  const EdgeField r = to_rescaled(u);
  const HankelPlan& p0 = d.plan(0);
  const Eigen::VectorXd w = p0.s_weights.cwiseProduct(rescale_factor(d, 0, 1.0));
  // Only the constant fiber mode phi_0 = vol^{-1/2} has nonzero fiber integral.
  return std::sqrt(d.geometry().fiber.volume()) * d.edge_weight() * (w.transpose() * r.components[0]).sum();
}

double l2_norm(const EdgeField& u) {
  const Discretization& d = *u.disc;
  const EdgeField r = to_rescaled(u);
  double sum = 0.0;
  for (std::size_t c = 0; c < r.components.size(); ++c) {
    sum += (d.component_plan(c).s_weights.asDiagonal() * r.components[c].cwiseAbs2()).sum();
  }
  return std::sqrt(sum * d.edge_weight());
}

double nodal_sup(const EdgeField& u) {
  const EdgeField g = to_geometric(u);
  double m = 0.0;
  for (const auto& comp : g.components) m = std::max(m, comp.cwiseAbs().maxCoeff());
  return m;
}

Eigen::VectorXd component_profile(const EdgeField& u, std::size_t component, const Eigen::VectorXd& s,
                                  int edge_index) {
  const Discretization& d = *u.disc;
  const EdgeField r = to_rescaled(u);
  const Eigen::VectorXd v = interpolation_matrix(d.component_plan(component), s) * r.components.at(component).col(edge_index);
  return v.cwiseQuotient(s.array().pow(0.5 * d.fiber_dim()).matrix());
}

double tip_value(const EdgeField& u, std::size_t component, int edge_index) {
  const Discretization& d = *u.disc;
  const HankelPlan& plan = d.component_plan(component);
  const double f = d.fiber_dim();
  // Only the mode with nu = (f-1)/2 has a finite nonzero limit:
  // s^{-f/2} sqrt(s rho) J_nu(s rho) -> rho^{f/2} / (2^nu Gamma(nu+1)).
  if (std::abs(plan.nu - 0.5 * (f - 1.0)) > 1e-12) return 0.0;
  const EdgeField r = to_rescaled(u);
  const Eigen::VectorXd spec = forward(plan, r.components.at(component).col(edge_index));
  const Eigen::ArrayXd lead =
      plan.rho_weights.array() * plan.rho_nodes.array().pow(0.5 * f) / (std::pow(2.0, plan.nu) * std::tgamma(plan.nu + 1.0));
  return (lead * spec.array()).sum();
}

double evaluate(const EdgeField& u, double s, std::span<const double> z, double y) {
  const Discretization& d = *u.disc;
  const EdgeField r = to_rescaled(u);
  const Eigen::RowVectorXd by = d.edge_basis_at(y);
  const auto& entries = d.geometry().fiber.entries;
  Eigen::VectorXd sv(1);
  sv[0] = s;
  double value = u.far_field;
  for (std::size_t c = 0; c < r.components.size(); ++c) {
    const Component& comp = d.component(c);
    const double phi = entries[comp.entry].eigenfunction(z, comp.copy);
    const Eigen::RowVectorXd at_s = interpolation_matrix(d.plan(comp.entry), sv) * r.components[c];
    value += phi * at_s.dot(by * d.edge_basis().transpose()) / std::pow(s, 0.5 * d.fiber_dim());
  }
  return value;
}

double tip_defect(const EdgeField& u, double s_probe) {
  const Discretization& d = *u.disc;
  const EdgeField r = to_rescaled(u);
  Eigen::VectorXd sv(1);
  sv[0] = s_probe;
  double defect = 0.0;
  for (std::size_t c = 0; c < r.components.size(); ++c) {
    if (d.component(c).entry == 0) continue;
    const Eigen::RowVectorXd at_s = interpolation_matrix(d.component_plan(c), sv) * r.components[c];
    defect = std::max(defect, at_s.cwiseAbs().maxCoeff() / std::pow(s_probe, 0.5 * d.fiber_dim()));
  }
  return defect;
}

bool is_continuous_ie(const EdgeField& u, double tol) { return tip_defect(u) <= tol; }

// --- field I/O -----------------------------------------------------------

std::filesystem::path write_field(const EdgeField& u, const std::filesystem::path& dir, const std::string& stem) {
  const Discretization& d = *u.disc;
  std::string csv = "component,entry,copy,s,y,value\n";
  for (std::size_t c = 0; c < u.components.size(); ++c) {
    const Component& comp = d.component(c);
    const Eigen::VectorXd& s = d.component_plan(c).s_nodes;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      for (int j = 0; j < d.n_edge(); ++j) {
        csv += std::to_string(c) + "," + std::to_string(comp.entry) + "," + std::to_string(comp.copy) + "," +
               format_number(s[i]) + "," + format_number(d.edge_nodes()[j]) + "," +
               format_number(u.components[c](i, j)) + "\n";
      }
    }
  }
  const auto csv_path = dir / (stem + ".csv");
  write_text(csv_path, csv);
  nlohmann::json meta;
  meta["geometry"] = geometry_to_json(d.geometry());
  meta["grid"] = {{"n", d.n()}, {"L", d.edge_length()}, {"n_edge", d.n_edge()}};
  meta["convention"] = u.convention == Convention::Rescaled ? "phi-rescaled" : "geometric";
  meta["far_field"] = u.far_field;
  meta["components"] = u.components.size();
  meta["tags"] = nlohmann::json::array();
  if (d.has_fiber_grid() && is_continuous_ie(u)) meta["tags"].push_back("continuous-ie");
  write_text(dir / (stem + ".json"), meta.dump(2) + "\n");
  return csv_path;
}

EdgeField read_field(const DiscretizationPtr& disc, const std::filesystem::path& csv_path) {
  std::filesystem::path meta_path = csv_path;
  meta_path.replace_extension(".json");
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw std::runtime_error("read_field: missing metadata " + meta_path.string());
  const nlohmann::json meta = nlohmann::json::parse(meta_in);
  EdgeField u = zero_field(disc, meta.at("convention") == "geometric" ? Convention::Geometric : Convention::Rescaled);
  u.far_field = meta.at("far_field").get<double>();
  if (meta.at("components").get<std::size_t>() != disc->component_count() || meta.at("grid").at("n") != disc->n() ||
      meta.at("grid").at("n_edge") != disc->n_edge()) {
    throw std::invalid_argument("read_field: grid of " + csv_path.string() + " does not match the discretization");
  }
  std::ifstream in(csv_path);
  std::string line;
  std::getline(in, line);
  std::vector<Eigen::Index> filled(disc->component_count(), 0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw std::invalid_argument("read_field: malformed row '" + line + "'");
    const std::size_t c = std::stoul(cells[0]);
    if (c >= disc->component_count()) throw std::invalid_argument("read_field: component out of range");
    const Eigen::Index k = filled[c]++;
    if (k >= disc->n() * disc->n_edge()) throw std::invalid_argument("read_field: too many rows");
    u.components[c](k / disc->n_edge(), k % disc->n_edge()) = std::stod(cells[5]);
  }
  for (Eigen::Index k : filled) {
    if (k != disc->n() * disc->n_edge()) throw std::invalid_argument("read_field: incomplete component data");
  }
  return u;
}

// --- norms ---------------------------------------------------------------

namespace {

// An edge-derivative operator acting on u = sum_c g_c(s, y) phi_c(z) as
// left * g_c * right, times the fiber derivative named by `fiber`.
struct FieldOp {
  std::string name;
  Eigen::MatrixXd left;   // on the constant-mode radial nodes
  Eigen::MatrixXd right;  // on edge samples
  std::vector<int> fiber; // coordinate indices, at most two
};

FieldOp compose(const FieldOp& a, const FieldOp& b) {
  FieldOp out;
  out.name = "(" + a.name + ")(" + b.name + ")";
  out.left = a.left * b.left;
  out.right = b.right * a.right;
  out.fiber = b.fiber;
  out.fiber.insert(out.fiber.end(), a.fiber.begin(), a.fiber.end());
  return out;
}

struct NormContext {
  const Discretization& d;
  Eigen::VectorXd s;
  Eigen::MatrixXd I_s, I_y, S, S_inv, Ds, Ey;

  explicit NormContext(const Discretization& disc) : d(disc) {
    s = d.plan(0).s_nodes;
    const Eigen::Index n = s.size();
    I_s = Eigen::MatrixXd::Identity(n, n);
    I_y = Eigen::MatrixXd::Identity(d.n_edge(), d.n_edge());
    S = s.asDiagonal();
    S_inv = s.cwiseInverse().asDiagonal();
    Ds = d.radial_difference();
    Ey = d.edge_difference();
  }

  FieldOp identity() const { return {"id", I_s, I_y, {}}; }
  FieldOp radial() const { return {"s d_s", S * Ds, I_y, {}}; }
  FieldOp edge() const { return {"s d_y", S, Ey, {}}; }
  FieldOp fiber(int i) const { return {"d_z" + std::to_string(i + 1), I_s, I_y, {i}}; }

  std::vector<FieldOp> edge_fields() const {
    std::vector<FieldOp> v{radial()};
    if (d.b() == 1) v.push_back(edge());
    if (d.geometry().fiber.max_mode > 0) {
      for (int i = 0; i < d.fiber_dim(); ++i) v.push_back(fiber(i));
    }
    return v;
  }

  // s^{-1} V for each edge vector field V.
  std::vector<FieldOp> weighted_fields() const {
    std::vector<FieldOp> v;
    for (FieldOp op : edge_fields()) {
      op.name = "s^-1 " + op.name;
      op.left = S_inv * op.left;
      v.push_back(op);
    }
    return v;
  }

  // Geometric profiles of every component on the constant-mode nodes.
  std::vector<Eigen::MatrixXd> profiles(const EdgeField& u) const {
    const EdgeField r = to_rescaled(u);
    const Eigen::VectorXd inv = s.array().pow(-0.5 * d.fiber_dim()).matrix();
    std::vector<Eigen::MatrixXd> g(r.components.size());
    for (std::size_t c = 0; c < g.size(); ++c) {
      g[c] = inv.asDiagonal() * (d.transfer(d.component(c).entry, 0) * r.components[c]);
    }
    return g;
  }

  // Fiber derivative of phi_c at every quadrature point.
  Eigen::MatrixXd fiber_factor(const std::vector<int>& idx) const {
    if (idx.empty()) return d.fiber_values();
    const auto& quad = d.fiber_quadrature();
    const int f = d.fiber_dim();
    const auto& entries = d.geometry().fiber.entries;
    Eigen::MatrixXd out(Eigen::Index(d.component_count()), quad.size());
    std::vector<double> buf(std::size_t(f * f));
    for (std::size_t c = 0; c < d.component_count(); ++c) {
      const Component& comp = d.component(c);
      const FiberMode& mode = entries[comp.entry];
      for (Eigen::Index q = 0; q < quad.size(); ++q) {
        const Eigen::VectorXd z = quad.points.col(q);
        std::span<const double> zs{z.data(), std::size_t(z.size())};
        if (idx.size() == 1) {
          mode.gradient(zs, comp.copy, {buf.data(), std::size_t(f)});
          out(Eigen::Index(c), q) = buf[idx[0]];
        } else {
          mode.hessian(zs, comp.copy, {buf.data(), buf.size()});
          out(Eigen::Index(c), q) = buf[idx[0] * f + idx[1]];
        }
      }
    }
    return out;
  }

  double sup(const std::vector<Eigen::MatrixXd>& g, const FieldOp& op, double constant) const {
    const Eigen::Index ns = d.norm_count();
    const Eigen::MatrixXd phi = fiber_factor(op.fiber);
    std::vector<Eigen::MatrixXd> a(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) a[c] = (op.left * g[c] * op.right).topRows(ns);
    double m = 0.0;
    for (Eigen::Index q = 0; q < phi.cols(); ++q) {
      Eigen::MatrixXd sum = Eigen::MatrixXd::Constant(ns, d.n_edge(), constant);
      for (std::size_t c = 0; c < g.size(); ++c) sum += phi(Eigen::Index(c), q) * a[c];
      m = std::max(m, sum.cwiseAbs().maxCoeff());
    }
    return m;
  }
};

void require_fiber_grid(const Discretization& d) {
  if (!d.has_fiber_grid()) throw std::invalid_argument("sup norms need fiber eigenfunction evaluators");
}

}  // namespace

NormReport norm_2k(const EdgeField& u, int k, DerivativeSet set) {
  if (k < 0) throw std::invalid_argument("norm_2k: k must be >= 0");
  const Discretization& d = *u.disc;
  require_fiber_grid(d);
  const NormContext ctx(d);
  NormReport report;
  report.k = k;
  report.set = set;
  report.sup_norm = ctx.sup(ctx.profiles(u), ctx.identity(), u.far_field);

  std::vector<FieldOp> ops;
  if (set == DerivativeSet::D) {
    ops = ctx.weighted_fields();
  } else if (set == DerivativeSet::Dprime) {
    const auto v = ctx.edge_fields();
    for (const auto& a : v) {
      for (const auto& b : v) ops.push_back(compose(a, b));
    }
    ops.insert(ops.end(), v.begin(), v.end());
  }

  EdgeField w = to_rescaled(u);
  for (int j = 0; j < k; ++j) {
    const std::string suffix = j == 0 ? "" : " Delta^" + std::to_string(j);
    const EdgeField lap = apply_laplacian(w);
    report.terms.push_back({"Delta" + (j == 0 ? std::string() : "^" + std::to_string(j + 1)),
                            ctx.sup(ctx.profiles(lap), ctx.identity(), 0.0)});
    const auto g = ctx.profiles(w);
    for (const FieldOp& op : ops) report.terms.push_back({op.name + suffix, ctx.sup(g, op, 0.0)});
    w = lap;
  }
  report.total = report.sup_norm;
  for (const auto& t : report.terms) report.total += t.value;
  return report;
}

double sup_derivative(const EdgeField& u, Derivative which) {
  const Discretization& d = *u.disc;
  require_fiber_grid(d);
  const NormContext ctx(d);
  switch (which) {
    case Derivative::Identity:
      return ctx.sup(ctx.profiles(u), ctx.identity(), u.far_field);
    case Derivative::Laplacian:
      return ctx.sup(ctx.profiles(apply_laplacian(to_rescaled(u))), ctx.identity(), 0.0);
    default:
      break;
  }
  const auto g = ctx.profiles(u);
  auto fiber_max = [&](bool weighted) {
    double m = 0.0;
    for (int i = 0; i < d.fiber_dim(); ++i) {
      FieldOp op = ctx.fiber(i);
      if (weighted) op.left = ctx.S_inv;
      m = std::max(m, ctx.sup(g, op, 0.0));
    }
    return m;
  };
  switch (which) {
    case Derivative::RadialVector:
      return ctx.sup(g, ctx.radial(), 0.0);
    case Derivative::EdgeVector:
      return ctx.sup(g, ctx.edge(), 0.0);
    case Derivative::FiberVector:
      return fiber_max(false);
    case Derivative::WeightedRadial:
      return ctx.sup(g, {"d_s", ctx.Ds, ctx.I_y, {}}, 0.0);
    case Derivative::WeightedEdge:
      return ctx.sup(g, {"d_y", ctx.I_s, ctx.Ey, {}}, 0.0);
    case Derivative::WeightedFiber:
      return fiber_max(true);
    default:
      return 0.0;
  }
}

DecayFit decay_exponent(const EdgeField& u0, Derivative which, const std::vector<double>& times) {
  if (times.size() < 3) throw std::invalid_argument("decay_exponent: need at least 3 times");
  const auto [lo, hi] = std::minmax_element(times.begin(), times.end());
  if (!(*lo > 0.0) || std::log10(*hi / *lo) < 2.0 - 1e-9) {
    throw std::invalid_argument("decay_exponent: times must be positive and span at least two decades");
  }
  if (!is_continuous_ie(u0)) throw std::invalid_argument("decay_exponent: initial datum is not continuous-ie");
  DecayFit fit;
  fit.times = times;
  for (double t : times) fit.values.push_back(sup_derivative(apply_biharmonic_heat(u0, t), which));

  const Eigen::Index m = Eigen::Index(times.size());
  Eigen::MatrixXd a(m, 2);
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(fit.values[i] > 0.0)) throw std::runtime_error("decay_exponent: vanishing derivative norm");
    a(i, 0) = std::log(times[i]);
    a(i, 1) = 1.0;
    y[i] = std::log(fit.values[i]);
  }
  const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(y);
  fit.slope = coef[0];
  fit.intercept = coef[1];

  std::vector<std::size_t> order(times.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return times[i] < times[j]; });
  bool up = true, down = true;
  for (std::size_t i = 1; i < order.size(); ++i) {
    const double prev = fit.values[order[i - 1]], cur = fit.values[order[i]];
    up = up && cur >= prev * (1.0 - 1e-12);
    down = down && cur <= prev * (1.0 + 1e-12);
  }
  fit.monotone = up || down;
  if (!fit.monotone) fit.warning = "non-monotone norms; slope is a least-squares fit";
  return fit;
}

std::vector<ContinuityRow> strong_continuity_check(const EdgeField& u0, int k, const std::vector<double>& times,
                                                   DerivativeSet set) {
  std::vector<ContinuityRow> rows;
  for (double t : times) rows.push_back({t, norm_2k(apply_biharmonic_heat(u0, t) - u0, k, set).total});
  return rows;
}

}  // namespace edgeheat
