#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/embedded.hpp"
#include "pdmp/model.hpp"

namespace pdmp::certificates
{

//---------------------------------------------------------------------------//
// Audit ledger
//---------------------------------------------------------------------------//

struct LedgerEntry
{
    std::string quantity;
    double value = 0.0;
    std::string provenance;  // the claim or computation the value comes from
};

class Ledger
{
  public:
    void add(std::string quantity, double value, std::string provenance);
    // Throws DomainError when absent.
    double value(const std::string& quantity) const;
    bool contains(const std::string& quantity) const;
    const std::vector<LedgerEntry>& entries() const { return entries_; }

    // Aligned `quantity = value  [provenance]` lines.
    void write_text(std::ostream& os) const;
    // Header `quantity,value,provenance`; values with 17 significant digits.
    void write_csv(std::ostream& os) const;

  private:
    std::vector<LedgerEntry> entries_;
};

//---------------------------------------------------------------------------//
// Balance condition
//---------------------------------------------------------------------------//

/*!
 * Ingredients of the pointwise balance between drift, rate and jumps.
 *
 * Every function is scalar (one-dimensional state). weight and
 * weight_derivative default to 1 and 0.
 */
struct BalanceSpec
{
    ScalarFn drift_jacobian;
    ScalarFn rate;
    ScalarFn rate_derivative;
    ScalarFn jump_gradient_bound;
    ScalarFn weight;
    ScalarFn weight_derivative;
    ScalarFn drift;
    std::vector<double> grid;
    // Points always evaluated in addition to the grid (known minimizers).
    std::vector<double> anchors;
};

// n log-spaced points on [lo, hi], lo > 0.
std::vector<double> log_grid(double lo, double hi, std::size_t n = 512);

/*!
 * eta = inf over the grid of -[2 J_b + a lambda'^2 / (beta lambda) + lambda (M - 1) - b a' / a].
 *
 * Without beta the rate must be constant on the grid and the lambda' term is
 * dropped. The grid minimum is refined by a bracketed scalar minimization
 * between its neighbours. The result may be negative (no decay certified).
 */
double balance_eta(const BalanceSpec& spec, std::optional<double> beta);

// (phi - 1)^{-1} + ln(phi) with phi = (3 + sqrt 5) / 2: the minimum of 1 / (e^x - 1) + x.
double theta_constant();

//---------------------------------------------------------------------------//
// Confining profiles
//---------------------------------------------------------------------------//

/*!
 * (c, gamma, p): a kernel H with |(Hf)'| <= gamma H|f'| in the p-sense and a
 * local Beckner inequality of constant c for every H(x, .).
 */
struct ConfiningProfile
{
    double c = 0.0;
    double gamma = 1.0;
    double p = 2.0;
};

void validate(const ConfiningProfile& profile);

// Profile of first * second: (c2 + gamma2 c1, gamma1 gamma2, p). Throws on p mismatch.
ConfiningProfile compose(const ConfiningProfile& first, const ConfiningProfile& second);

// c / (1 - gamma): Beckner constant of the invariant law. Throws DomainError if gamma >= 1.
double fixed_point(const ConfiningProfile& profile);

// c + gamma * input_c: Beckner constant of nu H when nu has constant input_c.
double push_through(const ConfiningProfile& profile, double input_c);

//---------------------------------------------------------------------------//
// Muckenhoupt criterion and perturbations
//---------------------------------------------------------------------------//

struct MuckenhouptBound
{
    double B = 0.0;
    double lower = 0.0;  // B / 2
    double upper = 0.0;  // 4 B
    double right_sup = 0.0;
    double left_sup = 0.0;
};

/*!
 * Muckenhoupt quantity B_m for a positive density on [0, inf) split at m.
 *
 * Right branch sup_{x > m} int_x^inf rho * int_m^x 1/rho, left branch
 * sup_{0 < x < m} int_0^x rho * int_x^m 1/rho. The right range is doubled
 * until the supremum is stable to 1e-12; if it keeps growing a
 * DivergenceError is raised. The density need not be normalized.
 */
MuckenhouptBound muckenhoupt_bound(const ScalarFn& density, double median,
                                   double quad_tol = 1e-12);

// 8 g_ratio c1, for a nonincreasing perturbation with g(0)/g(m) = g_ratio >= 1.
double perturb_poincare(double c1, double g_ratio);

/*!
 * Log-Sobolev constant of a perturbed law:
 * (2/(1-eps) + 8 g_ratio (2 + (c1 kappa^2 / 2 + eps ln nu_g_power_mean) / (1-eps))) c1.
 *
 * nu_g_power_mean = nu(g^{1 - 1/eps}) with nu(g) = 1; it is at least 1 by
 * Jensen and is validated as such.
 */
double perturb_logsob(double c1, double kappa, double epsilon, double g_ratio,
                      double nu_g_power_mean);

struct PerturbedLogSob
{
    double c2 = 0.0;
    double epsilon = 0.0;
};

// Minimum of perturb_logsob over eps in {0.1, ..., 0.9}.
PerturbedLogSob perturb_logsob(double c1, double kappa, double g_ratio,
                               const std::function<double(double)>& nu_g_power_mean);

//---------------------------------------------------------------------------//
// Model certificates
//---------------------------------------------------------------------------//

struct RateCertificate
{
    double eta = 0.0;
    double beta = 0.0;
    double poincare_c = 0.0;
    double decay_rate = 0.0;  // eta / (1 + beta c)
    double prefactor = 0.0;   // 1 + beta c
    std::optional<double> entropy_c;
    std::optional<double> entropy_prefactor;
};

RateCertificate make_rate_certificate(double eta, double beta, double poincare_c);

struct TcpConstantCertificate
{
    ConfiningProfile jump_time_kernel;  // K
    ConfiningProfile jump_kernel;       // Q
    ConfiningProfile chain_kernel;      // K then Q
    double chain_c = 0.0;               // Poincare constant of the chain law
    double poincare_c = 0.0;            // Poincare constant of the invariant law
    double gradient_rate = 0.0;
    double l2_rate = 0.0;
    double l2_prefactor = 0.0;          // variance(P_t f) <= prefactor e^{-l2_rate t} mu(f'^2)
    Ledger ledger;
};

TcpConstantCertificate certify_tcp_constant(double lambda, double delta);

/*!
 * Rate certificate for a nondecreasing, log-Lipschitz rate.
 *
 * h_at evaluates h(x) = integral of exp(-cum_rate(x, t)) dt of the model. The
 * Poincare constant is pushed through the size-biased kernel profile
 * (4 / lambda_star^2, 1, 2), giving 4 / lambda_star^2 + c'.
 */
RateCertificate certify_tcp_increasing(double lambda_star, double delta, double kappa,
                                       const ScalarFn& h_at, Ledger* ledger = nullptr);

struct TcpLinearCertificate
{
    double theta = 0.0;
    double chain_logsob_c = 0.0;     // twisted chain law
    double perturbed_logsob_c = 0.0; // its h-perturbation
    double weighted_logsob_c = 0.0;  // invariant law, weight 1 - e^{-x}
    double weighted_poincare_c = 0.0;
    double beta_opt = 0.0;
    double rate_r = 0.0;
    double entropy_c = 0.0;          // Ent(P_t f) <= entropy_c e^{-rate_r t} mu(f'^2)
    RateCertificate rate;
    Ledger ledger;
};

struct TcpLinearOptions
{
    // When set, empirical cross-checks of the analytic bounds are added to the ledger.
    const embedded::EmpiricalMeasure* chain_sample = nullptr;
};

TcpLinearCertificate certify_tcp_linear(double delta, const TcpLinearOptions& options = {});

// 2q / (q + 1), q in [0, 1].
double generalized_poincare_alpha(double q);

}  // namespace pdmp::certificates
