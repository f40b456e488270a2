//! One-dimensional analysis of the dilated basic connection.
//!
//! With τ = log λ, β = α − 1 and σ = βτ the pullback energy factors as
//! YM_α(λ*∇̃) = 6^α(4/3)π²·G(σ). Everything here is a one-dimensional integral
//! evaluated with composite Gauss–Legendre in log space, so λ up to the 1e6
//! guard never overflows.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{check_alpha_lambda, integrate_curvatures, lower_bound, lp_curvature_norm, lp_difference_norm, Quadrature};
use crate::error::{GaugeError, Result};
use crate::gauge::ConnectionModel;
use crate::quadrature::{gauss_legendre, pairwise_sum};
use crate::sphere::{chi_lambda, mu, ChartPoint};

/// Largest dilation factor accepted by the profile routines.
pub const LAMBDA_MAX: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileRoute {
    /// ∫ over r = |ζ| of the pulled-back density, in t = log r.
    Radial,
    /// The w = λ(1+r²)/(1+λ²r²) form, symmetric under λ ↔ 1/λ.
    WSubstitution,
    /// 6^α(4/3)π²·G(σ) with G as a cosh integral.
    Hyperbolic,
}

impl ProfileRoute {
    pub const ALL: [ProfileRoute; 3] = [ProfileRoute::Radial, ProfileRoute::WSubstitution, ProfileRoute::Hyperbolic];
}

impl fmt::Display for ProfileRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileRoute::Radial => "radial",
            ProfileRoute::WSubstitution => "w-substitution",
            ProfileRoute::Hyperbolic => "hyperbolic",
        })
    }
}

impl FromStr for ProfileRoute {
    type Err = GaugeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "radial" => Ok(ProfileRoute::Radial),
            "w-substitution" | "w" => Ok(ProfileRoute::WSubstitution),
            "hyperbolic" => Ok(ProfileRoute::Hyperbolic),
            _ => Err(GaugeError::InvalidParameter(format!("unknown profile route {s}"))),
        }
    }
}

/// Composite Gauss–Legendre settings for the profile integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileQuadrature {
    /// Maximum panel width in the log variable.
    pub panel_width: f64,
    /// Nodes per panel; the residual compares against a rule with 2/3 as many.
    pub nodes: usize,
    /// Relative residual above which an integral is reported as not converged.
    pub tol: f64,
}

impl Default for ProfileQuadrature {
    fn default() -> Self {
        ProfileQuadrature { panel_width: 0.5, nodes: 20, tol: 1e-10 }
    }
}

impl ProfileQuadrature {
    pub fn with_tol(tol: f64) -> Self {
        ProfileQuadrature { tol, ..ProfileQuadrature::default() }
    }

    /// ∫_a^b exp(logf(t)) dt with a residual from a coarser rule.
    fn integrate_log<F: Fn(f64) -> f64 + Sync>(&self, a: f64, b: f64, logf: F) -> Result<Estimate> {
        if b <= a {
            return Ok(Estimate { value: 0.0, residual: 0.0 });
        }
        let panels = ((b - a) / self.panel_width).ceil().max(1.0) as usize;
        let fine = log_space_rule(&logf, a, b, panels, self.nodes);
        let coarse = log_space_rule(&logf, a, b, panels, (2 * self.nodes / 3).max(4));
        let residual = (fine - coarse).abs().max(4.0 * f64::EPSILON * fine.abs());
        if !(residual <= self.tol * fine.abs()) && fine != 0.0 {
            return Err(GaugeError::QuadratureNotConverged { residual: residual / fine.abs(), requested: self.tol });
        }
        Ok(Estimate { value: fine, residual })
    }
}

/// A quadrature value with its absolute residual estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub residual: f64,
}

impl Estimate {
    fn scaled(self, c: f64) -> Estimate {
        Estimate { value: c * self.value, residual: c.abs() * self.residual }
    }
}

/// Composite rule applied to exp(logf), shifted by the largest log value.
fn log_space_rule<F: Fn(f64) -> f64 + Sync>(logf: &F, a: f64, b: f64, panels: usize, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let terms: Vec<(f64, f64)> = (0..panels)
        .into_par_iter()
        .flat_map_iter(|p| {
            let c = a + (p as f64 + 0.5) * h;
            x.iter().zip(&w).map(move |(t, wt)| (0.5 * h * wt, c + 0.5 * h * t)).collect::<Vec<_>>()
        })
        .map(|(wt, t)| (wt, logf(t)))
        .collect();
    let m = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    let parts: Vec<f64> = terms.iter().map(|(wt, l)| wt * (l - m).exp()).collect();
    pairwise_sum(&parts) * m.exp()
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    if a < 20.0 {
        // cosh x = 1 + 2 sinh²(x/2) keeps small arguments exact
        (2.0 * (0.5 * a).sinh().powi(2)).ln_1p()
    } else {
        a + (-2.0 * a).exp().ln_1p() - LN_2
    }
}

/// log sinh x for x > 0.
fn ln_sinh(x: f64) -> f64 {
    x + (-(-2.0 * x).exp_m1()).ln() - LN_2
}

/// log(1 + e^y).
fn softplus(y: f64) -> f64 {
    y.max(0.0) + (-y.abs()).exp().ln_1p()
}

/// log(e^y − 1) for y > 0.
fn ln_expm1(y: f64) -> f64 {
    if y < 30.0 {
        y.exp_m1().ln()
    } else {
        y + (-(-y).exp()).ln_1p()
    }
}

/// log(cosh T − cosh t) for |t| < T, via 2 sinh((T+t)/2) sinh((T−t)/2).
fn ln_cosh_gap(big: f64, t: f64) -> f64 {
    let t = t.abs();
    LN_2 + ln_sinh(0.5 * (big + t)) + ln_sinh(0.5 * (big - t))
}

fn check_profile_args(alpha: f64, lambda: f64) -> Result<()> {
    if !(1.0..=2.0).contains(&alpha) {
        return Err(GaugeError::InvalidParameter(format!("alpha = {alpha} outside [1, 2]")));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(GaugeError::InvalidParameter(format!("lambda = {lambda} must be > 0")));
    }
    if lambda > LAMBDA_MAX || lambda < 1.0 / LAMBDA_MAX {
        return Err(GaugeError::LambdaOverflow(lambda));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(GaugeError::InvalidParameter(format!("beta = {beta} outside (0, 1]")));
    }
    Ok(())
}

/// YM_α(λ*∇̃) by the named route; λ < 1 is accepted and equals the value at 1/λ.
pub fn pullback_energy(alpha: f64, lambda: f64, route: ProfileRoute, pq: &ProfileQuadrature) -> Result<Estimate> {
    check_profile_args(alpha, lambda)?;
    if lambda == 1.0 {
        return Ok(Estimate { value: lower_bound(alpha), residual: 0.0 });
    }
    let tau = lambda.ln();
    let big = tau.abs();
    match route {
        ProfileRoute::Radial => {
            // ½∫(3+3/χ)^α dV_ḡ with dV_ḡ = 32π² r³(1+r²)⁻⁴ dr, dr = r dt
            let pre = (16.0 * PI * PI).ln() + alpha * 3f64.ln();
            pq.integrate_log(-big - 12.0, big + 12.0, |t| {
                let ln_inv_chi = 4.0 * (tau + softplus(2.0 * t) - softplus(2.0 * (tau + t)));
                pre + alpha * softplus(ln_inv_chi) + 4.0 * t - 4.0 * softplus(2.0 * t)
            })
        }
        ProfileRoute::WSubstitution => {
            // w = e^x; (λ − w)(w − 1/λ)/w⁴ dw = 2(cosh τ − cosh x)e^{−2x} dx
            let pre = (24.0 * PI * PI).ln() + (alpha - 1.0) * 3f64.ln() - 3.0 * (LN_2 + ln_sinh(big));
            pq.integrate_log(-big, big, |x| pre + alpha * softplus(4.0 * x) + LN_2 + ln_cosh_gap(big, x) - 2.0 * x)
        }
        ProfileRoute::Hyperbolic => Ok(g_of_tau(big, alpha - 1.0, pq)?.scaled(lower_bound(alpha))),
    }
}

/// G as a function of τ; β = 0 is allowed and gives 1.
fn g_of_tau(big: f64, beta: f64, pq: &ProfileQuadrature) -> Result<Estimate> {
    let gm1 = g_minus_one_of_tau(big, beta, pq)?;
    Ok(Estimate { value: 1.0 + gm1.value, residual: gm1.residual.max(4.0 * f64::EPSILON) })
}

/// G − 1 = 3/sinh³τ ∫₀^τ cosh 2t·((cosh 2t)^β cosh 2βt − 1)(cosh τ − cosh t) dt, which
/// uses ∫₀^τ cosh 2t (cosh τ − cosh t) dt = sinh³τ/3 and never cancels.
fn g_minus_one_of_tau(big: f64, beta: f64, pq: &ProfileQuadrature) -> Result<Estimate> {
    if big == 0.0 || beta == 0.0 {
        return Ok(Estimate::default());
    }
    let pre = 3f64.ln() - 3.0 * ln_sinh(big);
    pq.integrate_log(0.0, big, |t| {
        let y = beta * ln_cosh(2.0 * t) + ln_cosh(2.0 * beta * t);
        pre + ln_cosh(2.0 * t) + ln_expm1(y) + ln_cosh_gap(big, t)
    })
}

/// G(σ) for β ∈ (0, 1]; G(0) = 1.
pub fn g_of_sigma(sigma: f64, beta: f64, pq: &ProfileQuadrature) -> Result<Estimate> {
    check_beta(beta)?;
    if !(sigma >= 0.0) {
        return Err(GaugeError::InvalidParameter(format!("sigma = {sigma} must be ≥ 0")));
    }
    g_of_tau(sigma / beta, beta, pq)
}

/// G(σ) − 1 without cancellation.
pub fn g_minus_one(sigma: f64, beta: f64, pq: &ProfileQuadrature) -> Result<Estimate> {
    check_beta(beta)?;
    if !(sigma >= 0.0) {
        return Err(GaugeError::InvalidParameter(format!("sigma = {sigma} must be ≥ 0")));
    }
    g_minus_one_of_tau(sigma / beta, beta, pq)
}

/// G′(σ) in the integrated-by-parts form
/// 6/sinh⁴τ ∫₀^τ (cosh 2t)^{β−1} sinh 2αt sinh t (cosh τ − cosh t)(2 cosh τ cosh t − 1) dt.
pub fn g_prime(sigma: f64, beta: f64, pq: &ProfileQuadrature) -> Result<Estimate> {
    check_beta(beta)?;
    if !(sigma >= 0.0) {
        return Err(GaugeError::InvalidParameter(format!("sigma = {sigma} must be ≥ 0")));
    }
    if sigma == 0.0 {
        return Ok(Estimate::default());
    }
    let big = sigma / beta;
    let alpha = 1.0 + beta;
    let pre = 6f64.ln() - 4.0 * ln_sinh(big);
    let ln_c = ln_cosh(big);
    pq.integrate_log(0.0, big, |t| {
        let ln_2cc = LN_2 + ln_c + ln_cosh(t);
        let ln_2cc_m1 = ln_2cc + (-(-ln_2cc).exp()).ln_1p();
        pre + (beta - 1.0) * ln_cosh(2.0 * t) + ln_sinh(2.0 * alpha * t) + ln_sinh(t) + ln_cosh_gap(big, t) + ln_2cc_m1
    })
}

/// 𝖴(α, λ) = YM_α(λ*∇̃) − 6^α(4/3)π² = 6^α(4/3)π²(G − 1).
pub fn gap(alpha: f64, lambda: f64, pq: &ProfileQuadrature) -> Result<Estimate> {
    check_profile_args(alpha, lambda)?;
    Ok(g_minus_one_of_tau(lambda.ln().abs(), alpha - 1.0, pq)?.scaled(lower_bound(alpha)))
}

/// ∂/∂log λ of YM_α(λ*∇̃) through the chain rule: 6^α(4/3)π²·β·G′(βτ).
pub fn de_dloglambda_profile(alpha: f64, lambda: f64, pq: &ProfileQuadrature) -> Result<Estimate> {
    check_profile_args(alpha, lambda)?;
    let beta = alpha - 1.0;
    if beta == 0.0 || lambda == 1.0 {
        return Ok(Estimate::default());
    }
    let tau = lambda.ln();
    let g = g_prime(beta * tau.abs(), beta, pq)?.scaled(lower_bound(alpha) * beta);
    Ok(if tau < 0.0 { g.scaled(-1.0) } else { g })
}

/// ∂/∂log λ YM_{α,λ}(c) = 2∫(3+χ_λ|F|²)^{α−1}((α−1)|F|² − 3/χ_λ)μ(λζ) dV_ḡ.
pub fn de_dloglambda_general(c: &ConnectionModel, alpha: f64, lambda: f64, quad: &Quadrature) -> Result<Estimate> {
    check_alpha_lambda(alpha, lambda)?;
    let i = integrate_curvatures(&[c], quad, |p, f| {
        let chi = chi_lambda(p, lambda);
        let f2 = f[0].norm2_round(p.zeta);
        let m = mu(ChartPoint::new(p.zeta.scale(lambda)));
        2.0 * (3.0 + chi * f2).powf(alpha - 1.0) * ((alpha - 1.0) * f2 - 3.0 / chi) * m
    })?;
    Ok(Estimate { value: i.value, residual: i.residual })
}

/// The μ(λζ)-weighted derivative for the basic connection.
pub fn de_dloglambda_basic(alpha: f64, lambda: f64, quad: &Quadrature) -> Result<Estimate> {
    de_dloglambda_general(&ConnectionModel::basic(), alpha, lambda, quad)
}

/// Both sides of the derivative-difference inequality between ∇̃ and c.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeGapReport {
    pub alpha: f64,
    pub lambda: f64,
    /// ∂YM_{α,λ}(∇̃) − ∂YM_{α,λ}(c), derivatives in log λ.
    pub lhs: f64,
    /// The right-hand side with unit constant.
    pub rhs: f64,
    /// Smallest constant making the inequality hold; 0 when lhs ≤ 0.
    pub fitted_constant: f64,
}

pub fn derivative_gap_bound(c: &ConnectionModel, alpha: f64, lambda: f64, quad: &Quadrature) -> Result<DerivativeGapReport> {
    let basic = ConnectionModel::basic();
    let lhs = de_dloglambda_basic(alpha, lambda, quad)?.value - de_dloglambda_general(c, alpha, lambda, quad)?.value;
    let beta = alpha - 1.0;
    let growth = 1.0 + lambda.powf(4.0 * beta);
    let p = 2.0 * alpha + 2.0;
    let d2 = lp_difference_norm(&basic, c, 2.0, quad)?;
    let dp = lp_difference_norm(&basic, c, p, quad)?;
    let (b2, c2) = (lp_curvature_norm(&basic, 2.0, quad)?, lp_curvature_norm(c, 2.0, quad)?);
    let (bp, cp) = (lp_curvature_norm(&basic, p, quad)?, lp_curvature_norm(c, p, quad)?);
    let rhs = beta * growth * d2 * (b2 + c2) + beta * beta * growth * (bp + cp) * dp * cp.powf(2.0 * alpha);
    let fitted_constant = if lhs <= 0.0 { 0.0 } else { lhs / rhs };
    Ok(DerivativeGapReport { alpha, lambda, lhs, rhs, fitted_constant })
}

/// The three cases of the lower bound for 𝖴.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapRegime {
    /// σ ≥ 5: 𝖴 ≥ Cλ^{4α−4}.
    Large,
    /// β ≤ σ ≤ 5: 𝖴 ≥ Cβ log λ.
    Intermediate,
    /// 0 ≤ log λ ≤ 1: 𝖴 ≥ Cβ(log λ)².
    Small,
}

pub fn classify_regime(alpha: f64, lambda: f64) -> Result<GapRegime> {
    let beta = alpha - 1.0;
    let tau = lambda.ln();
    if !(beta > 0.0 && beta <= 1.0) || !(tau >= 0.0) || !tau.is_finite() {
        return Err(GaugeError::RegimeMisclassified { alpha, lambda });
    }
    let sigma = beta * tau;
    Ok(if sigma >= 5.0 {
        GapRegime::Large
    } else if tau <= 1.0 {
        GapRegime::Small
    } else {
        GapRegime::Intermediate
    })
}

impl GapRegime {
    /// The comparison function of the regime at (α, λ).
    pub fn bound(self, alpha: f64, lambda: f64) -> f64 {
        let (beta, tau) = (alpha - 1.0, lambda.ln());
        match self {
            GapRegime::Large => lambda.powf(4.0 * beta),
            GapRegime::Intermediate => beta * tau,
            GapRegime::Small => beta * tau * tau,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeFit {
    pub regime: GapRegime,
    pub samples: usize,
    /// min over samples of 𝖴/bound; None when no sample constrains it.
    pub constant: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapBoundReport {
    pub regimes: Vec<RegimeFit>,
    /// min over samples with 0 < σ ≤ 2 of (∂E/∂log λ)/(β log λ/(1+log λ)).
    pub derivative_constant: Option<f64>,
    pub derivative_samples: usize,
    pub passes: bool,
}

/// Fits the largest constants for which the regime lower bounds on 𝖴 and the
/// derivative lower bound hold over `samples`.
pub fn verify_gap_bounds(samples: &[(f64, f64)], pq: &ProfileQuadrature) -> Result<GapBoundReport> {
    let regimes = samples.iter().map(|&(a, l)| classify_regime(a, l)).collect::<Result<Vec<_>>>()?;
    let rows: Vec<(f64, Option<f64>)> = samples
        .par_iter()
        .zip(&regimes)
        .map(|(&(a, l), r)| {
            let g = gap(a, l, pq)?.value;
            let bound = r.bound(a, l);
            let ratio = if bound > 0.0 { Some(g / bound) } else { None };
            let sigma = (a - 1.0) * l.ln();
            let d = if sigma > 0.0 && sigma <= 2.0 {
                let tau = l.ln();
                Some(de_dloglambda_profile(a, l, pq)?.value / ((a - 1.0) * tau / (1.0 + tau)))
            } else {
                None
            };
            Ok((ratio.unwrap_or(f64::NAN), d))
        })
        .collect::<Result<Vec<_>>>()?;
    let fits: Vec<RegimeFit> = [GapRegime::Large, GapRegime::Intermediate, GapRegime::Small]
        .into_iter()
        .map(|regime| {
            let ratios: Vec<f64> =
                rows.iter().zip(&regimes).filter(|(_, r)| **r == regime).map(|(x, _)| x.0).filter(|x| !x.is_nan()).collect();
            RegimeFit {
                regime,
                samples: regimes.iter().filter(|r| **r == regime).count(),
                constant: ratios.iter().copied().reduce(f64::min),
            }
        })
        .collect();
    let dvals: Vec<f64> = rows.iter().filter_map(|x| x.1).collect();
    let derivative_constant = dvals.iter().copied().reduce(f64::min);
    let passes = !samples.is_empty()
        && fits.iter().all(|f| f.constant.map_or(true, |c| c > 0.0))
        && derivative_constant.map_or(true, |c| c > 0.0);
    Ok(GapBoundReport { regimes: fits, derivative_constant, derivative_samples: dvals.len(), passes })
}

/// A sample grid covering all three regimes, λ ≤ 1e6.
pub fn default_regime_samples() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for alpha in [1.05, 1.1, 1.25, 1.5, 1.75, 2.0] {
        for tau in [0.05, 0.2, 0.5, 0.8, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 13.5] {
            out.push((alpha, f64::exp(tau)));
        }
    }
    out
}

/// One sample of the dilation profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub alpha: f64,
    pub lambda: f64,
    pub tau: f64,
    pub beta: f64,
    pub sigma: f64,
    pub g: f64,
    pub g_prime: f64,
    pub gap: f64,
    pub de_dloglambda: f64,
    /// Residuals of the radial, w-substitution and hyperbolic routes.
    pub route_residuals: [f64; 3],
    /// Largest residual among the routes, the gap and G′, plus the spread between routes.
    pub residual: f64,
}

pub const PROFILE_CSV_HEADER: &str = "alpha,lambda,tau,sigma,G,Gprime,gap,dE_dloglog,residual";

impl ProfilePoint {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.3e}",
            self.alpha, self.lambda, self.tau, self.sigma, self.g, self.g_prime, self.gap, self.de_dloglambda, self.residual
        )
    }
}

/// Evaluates every profile quantity at (α, λ) with α ∈ (1, 2], λ ≥ 1.
pub fn profile_point(alpha: f64, lambda: f64, pq: &ProfileQuadrature) -> Result<ProfilePoint> {
    check_profile_args(alpha, lambda)?;
    let beta = alpha - 1.0;
    check_beta(beta)?;
    if lambda < 1.0 {
        return Err(GaugeError::InvalidParameter(format!("lambda = {lambda} must be ≥ 1")));
    }
    let tau = lambda.ln();
    let sigma = beta * tau;
    let lb = lower_bound(alpha);
    let routes = ProfileRoute::ALL.map(|r| pullback_energy(alpha, lambda, r, pq));
    let mut values = [0.0; 3];
    let mut route_residuals = [0.0; 3];
    for (k, r) in routes.into_iter().enumerate() {
        let e = r?;
        values[k] = e.value;
        route_residuals[k] = e.residual;
    }
    let gm1 = gap(alpha, lambda, pq)?;
    let gp = g_prime(sigma, beta, pq)?;
    let spread = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) - values.iter().copied().fold(f64::INFINITY, f64::min);
    let residual = route_residuals.iter().copied().fold(spread, f64::max).max(gm1.residual).max(gp.residual * lb * beta);
    Ok(ProfilePoint {
        alpha,
        lambda,
        tau,
        beta,
        sigma,
        g: 1.0 + gm1.value / lb,
        g_prime: gp.value,
        gap: gm1.value,
        de_dloglambda: lb * beta * gp.value,
        route_residuals,
        residual,
    })
}

/// Profile rows for each λ in order.
pub fn profile_sweep(alpha: f64, lambdas: &[f64], pq: &ProfileQuadrature) -> Result<Vec<ProfilePoint>> {
    lambdas.par_iter().map(|&l| profile_point(alpha, l, pq)).collect()
}

pub fn write_profile_csv<W: Write>(mut w: W, points: &[ProfilePoint]) -> std::io::Result<()> {
    writeln!(w, "{PROFILE_CSV_HEADER}")?;
    for p in points {
        writeln!(w, "{}", p.csv_row())?;
    }
    Ok(())
}

/// ∫ over the box [0,2π]×[0,π]² of (1 + sin²ϑ₁ + sin²ϑ₁ sin²ϑ₂)², i.e. 2π³·217/64.
const CHRISTOFFEL_ANGULAR: f64 = 2.0 * PI * PI * PI * 217.0 / 64.0;

/// L² norms of derivatives of log χ_λ with the spherical-coordinate weights of
/// the polar chart (angular box volume 2π³).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiNormReport {
    pub lambda: f64,
    /// ‖∂_r log χ_λ‖ with radial weight r³(1+r²)⁻².
    pub grad_norm: f64,
    /// √((2⁷/3)π³((λ−1)/λ)²((λ+1)/λ)²).
    pub grad_closed_form: f64,
    /// ‖∇ log χ_λ‖_{L²(S⁴, ḡ)} for comparison.
    pub grad_norm_round: f64,
    /// ‖∂²_r log χ_λ‖ with radial weight r³(1+r²)⁻⁴.
    pub second_radial_norm: f64,
    /// ‖Γ^r ∂_r log χ_λ‖ with the same radial weight.
    pub second_christoffel_norm: f64,
    /// √(radial² + Christoffel²), an upper bound for the Hessian part.
    pub hessian_norm: f64,
    /// (grad + Hessian)/log λ for λ ≤ e, /(log λ)^{1/2} above.
    pub regime_ratio: f64,
}

/// (2⁷/3)π³((λ−1)/λ)²((λ+1)/λ)².
pub fn chi_grad_closed_form(lambda: f64) -> f64 {
    128.0 / 3.0 * PI.powi(3) * ((lambda - 1.0) / lambda).powi(2) * ((lambda + 1.0) / lambda).powi(2)
}

pub fn chi_sobolev_norms(lambda: f64, pq: &ProfileQuadrature) -> Result<ChiNormReport> {
    if !(lambda >= 1.0) || !lambda.is_finite() {
        return Err(GaugeError::InvalidParameter(format!("lambda = {lambda} must be ≥ 1")));
    }
    if lambda > LAMBDA_MAX {
        return Err(GaugeError::LambdaOverflow(lambda));
    }
    let closed = chi_grad_closed_form(lambda).sqrt();
    if lambda == 1.0 {
        return Ok(ChiNormReport {
            lambda,
            grad_norm: 0.0,
            grad_closed_form: closed,
            grad_norm_round: 0.0,
            second_radial_norm: 0.0,
            second_christoffel_norm: 0.0,
            hessian_norm: 0.0,
            regime_ratio: 0.0,
        });
    }
    let l2 = lambda * lambda;
    let d1 = move |r: f64| 8.0 * r * (l2 - 1.0) / ((1.0 + l2 * r * r) * (1.0 + r * r));
    let d2 = move |r: f64| {
        let s = r * r;
        -8.0 * (l2 - 1.0) * (3.0 * l2 * s * s + (l2 + 1.0) * s - 1.0) / ((s + 1.0).powi(2) * (l2 * s + 1.0).powi(2))
    };
    let (a, b) = (-lambda.ln() - 20.0, 20.0);
    // integrals in t = log r with dr = r dt; every integrand is a square
    let radial = |weight: &(dyn Fn(f64) -> f64 + Sync), g: &(dyn Fn(f64) -> f64 + Sync)| {
        pq.integrate_log(a, b, |t| {
            let r = t.exp();
            (weight(r) * g(r).powi(2) * r).ln()
        })
    };
    let w2 = |r: f64| r.powi(3) / (1.0 + r * r).powi(2);
    let w4 = |r: f64| r.powi(3) / (1.0 + r * r).powi(4);
    let box_volume = 2.0 * PI.powi(3);
    let grad = radial(&w2, &d1)?.value * box_volume;
    // |∇f|²_ḡ = (1+r²)²/4·(∂_r f)², dV_ḡ = 16r³(1+r²)⁻⁴ dr dΩ₃, |S³| = 2π²
    let round = radial(&w2, &d1)?.value * 8.0 * PI * PI;
    let rr = radial(&w4, &d2)?.value * box_volume;
    let gamma = radial(&|r: f64| w4(r) * r * r, &d1)?.value * CHRISTOFFEL_ANGULAR;
    let hessian = (rr + gamma).sqrt();
    let tau = lambda.ln();
    let scale = if lambda <= std::f64::consts::E { tau } else { tau.sqrt() };
    Ok(ChiNormReport {
        lambda,
        grad_norm: grad.sqrt(),
        grad_closed_form: closed,
        grad_norm_round: round.sqrt(),
        second_radial_norm: rr.sqrt(),
        second_christoffel_norm: gamma.sqrt(),
        hessian_norm: hessian,
        regime_ratio: (grad.sqrt() + hessian) / scale,
    })
}

/// Fitted constants for ‖∇log χ‖ + ‖∇²log χ‖ ≤ C log λ on [1, e] and ≤ C(log λ)^{1/2} above.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiBoundFit {
    pub near_one: Option<f64>,
    pub large: Option<f64>,
    pub samples: usize,
}

pub fn fit_chi_bounds(lambdas: &[f64], pq: &ProfileQuadrature) -> Result<ChiBoundFit> {
    let reports = lambdas.par_iter().map(|&l| chi_sobolev_norms(l, pq)).collect::<Result<Vec<_>>>()?;
    let pick = |near: bool| {
        reports
            .iter()
            .filter(|r| r.lambda > 1.0 && (r.lambda <= std::f64::consts::E) == near)
            .map(|r| r.regime_ratio)
            .reduce(f64::max)
    };
    Ok(ChiBoundFit { near_one: pick(true), large: pick(false), samples: reports.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::pullback;
    use crate::sphere::ConformalMap;

    fn pq() -> ProfileQuadrature {
        ProfileQuadrature::default()
    }

    #[test]
    fn identity_pullback_is_the_minimum() {
        for r in ProfileRoute::ALL {
            let e = pullback_energy(1.4, 1.0, r, &pq()).unwrap();
            assert_eq!(e.value, lower_bound(1.4));
        }
    }

    #[test]
    fn routes_agree_and_are_symmetric() {
        for &(a, l) in &[(1.5, 3.0), (1.0, 7.0), (2.0, 1.0e5), (1.1, 1.0001), (1.75, 40.0)] {
            let v: Vec<f64> = ProfileRoute::ALL.iter().map(|&r| pullback_energy(a, l, r, &pq()).unwrap().value).collect();
            for x in &v {
                assert!((x / v[0] - 1.0).abs() < 1e-12, "{a} {l} {v:?}");
            }
            let inv = pullback_energy(a, 1.0 / l, ProfileRoute::Radial, &pq()).unwrap().value;
            assert!((inv / v[1] - 1.0).abs() < 1e-12);
        }
        let d = pullback_energy(1.5, 3.0, ProfileRoute::Radial, &pq()).unwrap().value
            - pullback_energy(1.5, 3.0, ProfileRoute::WSubstitution, &pq()).unwrap().value;
        assert!(d.abs() <= 1e-9);
    }

    #[test]
    fn yang_mills_energy_is_dilation_invariant() {
        for l in [1.5, 10.0, 1e4] {
            let e = pullback_energy(1.0, l, ProfileRoute::Radial, &pq()).unwrap().value;
            assert!((e / lower_bound(1.0) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn radial_route_matches_four_dimensional_quadrature() {
        let c = pullback(ConformalMap::dilation(2.5), ConnectionModel::basic());
        let e = crate::energy::ym_alpha(&c, 1.5, &Quadrature::default()).unwrap().value;
        let p = pullback_energy(1.5, 2.5, ProfileRoute::Radial, &pq()).unwrap().value;
        assert!((e / p - 1.0).abs() < 1e-10, "{e} {p}");
    }

    #[test]
    fn g_limits_and_gap_definition() {
        assert!((g_of_sigma(1e-9, 0.5, &pq()).unwrap().value - 1.0).abs() < 1e-8);
        assert_eq!(gap(1.7, 1.0, &pq()).unwrap().value, 0.0);
        let g = gap(1.5, 2.0, &pq()).unwrap().value;
        let direct = pullback_energy(1.5, 2.0, ProfileRoute::Radial, &pq()).unwrap().value - lower_bound(1.5);
        assert!(g > 0.0 && (g - direct).abs() < 1e-9);
    }

    #[test]
    fn g_prime_reference_values() {
        // independent high-precision evaluations of the same integral
        for &(s, b, want) in &[(0.5, 0.2, 7.10855775082149), (2.0, 0.5, 1264.70213071715), (0.1, 1.0, 0.163377465095912)] {
            let v = g_prime(s, b, &pq()).unwrap().value;
            assert!((v / want - 1.0).abs() < 1e-12, "{s} {b}: {v}");
        }
    }

    #[test]
    fn g_prime_matches_finite_differences() {
        for &(s, b) in &[(0.5f64, 0.2), (0.01, 0.05), (3.0, 1.0), (7.0, 0.5)] {
            let h = 1e-5 * s.max(0.1);
            let fd = (g_minus_one(s + h, b, &pq()).unwrap().value - g_minus_one(s - h, b, &pq()).unwrap().value) / (2.0 * h);
            let gp = g_prime(s, b, &pq()).unwrap().value;
            assert!((fd / gp - 1.0).abs() < 1e-6, "{s} {b}: {fd} {gp}");
        }
    }

    #[test]
    fn g_prime_vanishes_linearly_at_zero() {
        let a = g_prime(1e-4, 0.5, &pq()).unwrap().value;
        let b = g_prime(2e-4, 0.5, &pq()).unwrap().value;
        assert!(a > 0.0 && (b / a - 2.0).abs() < 1e-3);
    }

    #[test]
    fn basic_derivative_matches_chain_rule() {
        let quad = Quadrature::default();
        let d = de_dloglambda_basic(1.3, 2.0, &quad).unwrap().value;
        let c = de_dloglambda_profile(1.3, 2.0, &pq()).unwrap().value;
        assert!((d - c).abs() < 1e-7 * c.abs().max(1.0), "{d} {c}");
    }

    #[test]
    fn dilated_basic_is_critical_in_lambda() {
        let quad = Quadrature::default();
        for l in [0.5, 2.0] {
            let c = pullback(ConformalMap::dilation(l), ConnectionModel::basic());
            let d = de_dloglambda_general(&c, 1.4, l, &quad).unwrap().value;
            assert!(d.abs() < 1e-8, "{l}: {d}");
        }
    }

    #[test]
    fn regime_examples() {
        assert_eq!(classify_regime(1.5, 0.5f64.exp()).unwrap(), GapRegime::Small);
        assert_eq!(classify_regime(2.0, 5f64.exp()).unwrap(), GapRegime::Large);
        assert_eq!(classify_regime(1.2, 3f64.exp()).unwrap(), GapRegime::Intermediate);
        assert!(matches!(classify_regime(1.5, 0.5), Err(GaugeError::RegimeMisclassified { .. })));
        let r = verify_gap_bounds(&default_regime_samples(), &pq()).unwrap();
        assert!(r.passes, "{r:?}");
        assert!(r.regimes.iter().all(|f| f.samples > 0));
    }

    #[test]
    fn chi_norms_vanish_at_one_and_shrink_towards_it() {
        let r = chi_sobolev_norms(1.0, &pq()).unwrap();
        assert_eq!(r.grad_norm + r.hessian_norm, 0.0);
        let a = chi_sobolev_norms(1.01, &pq()).unwrap();
        let b = chi_sobolev_norms(1.1, &pq()).unwrap();
        assert!(a.grad_norm < b.grad_norm && a.hessian_norm < b.hessian_norm);
    }

    #[test]
    fn chi_gradient_quadrature_against_exact_integral() {
        // 2π³·64(λ²−1)²∫ r⁵(1+r²)⁻⁴(1+λ²r²)⁻² dr at λ = 2, evaluated independently
        let r = chi_sobolev_norms(2.0, &pq()).unwrap();
        assert!((r.grad_norm.powi(2) / 113.789 - 1.0).abs() < 1e-5, "{}", r.grad_norm.powi(2));
        assert!(r.grad_norm <= r.grad_closed_form);
    }

    #[test]
    fn oversized_lambda_is_rejected() {
        assert_eq!(pullback_energy(1.5, 2e6, ProfileRoute::Radial, &pq()), Err(GaugeError::LambdaOverflow(2e6)));
    }

    #[test]
    fn csv_schema() {
        let pts = profile_sweep(1.3, &[1.0, 2.0, 10.0], &pq()).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &pts).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], PROFILE_CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 9));
    }
}
