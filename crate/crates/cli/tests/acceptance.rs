//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Targets and tolerances are frozen below, independent of the suite's own
//! constants. The suite's checks must carry exactly these ids, comparisons,
//! targets and tolerances, and each verdict is recomputed here from the
//! computed value. `ACCEPTANCE_CRITERIA=3,7` restricts the run.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use s4gauge_cli::config::SuiteConfig;
use s4gauge_cli::report::{Check, Comparison};
use s4gauge_cli::suite::{anchor, run_criterion};

struct Frozen {
    id: String,
    comparison: Comparison,
    target: f64,
    tol: f64,
}

fn pin(id: impl Into<String>, comparison: Comparison, target: f64, tol: f64) -> Frozen {
    Frozen { id: id.into(), comparison, target, tol }
}

fn minimum_energy(alpha: f64) -> f64 {
    6f64.powf(alpha) * 4.0 / 3.0 * PI * PI
}

fn frozen(criterion: u32) -> Vec<Frozen> {
    use Comparison::*;
    let alphas = [1.0, 1.1, 1.5, 2.0];
    match criterion {
        1 => alphas.iter().map(|a| pin(format!("basic_energy[alpha={a}]"), Relative, minimum_energy(*a), 1e-8)).collect(),
        2 => {
            let mut v: Vec<Frozen> = (0..5).map(|k| pin(format!("adhm_curvature_l2_squared[{k}]"), Relative, 8.0 * PI * PI, 1e-8)).collect();
            v.push(pin("basic_pointwise_density", Absolute, 3.0, 1e-12));
            v
        }
        3 => alphas.iter().map(|a| pin(format!("lower_bound_margin[alpha={a}]"), AtLeast, 0.0, 1e-6)).collect(),
        4 => {
            let mut v: Vec<Frozen> = (0..4).map(|k| pin(format!("adhm_charge[{k}]"), Absolute, 1.0, 1e-8)).collect();
            v.push(pin("basic_charge_from_hodge_split", Absolute, 1.0, 1e-8));
            v.push(pin("basic_self_dual_norm", AtMost, 0.0, 1e-8));
            v
        }
        5 => vec![pin("dilation_isometry", AtMost, 0.0, 1e-8), pin("inverse_dilation_symmetry", AtMost, 0.0, 1e-8)],
        6 => vec![
            pin("profile_route_spread", AtMost, 0.0, 1e-8),
            pin("g_prime_vs_differences", AtMost, 0.0, 1e-6),
            pin("g_prime_min", Above, 0.0, 0.0),
            pin("gap_min", AtLeast, 0.0, 0.0),
            pin("gap_regime_constant[large]", Above, 0.0, 0.0),
            pin("gap_regime_constant[intermediate]", Above, 0.0, 0.0),
            pin("gap_regime_constant[small]", Above, 0.0, 0.0),
            pin("gap_derivative_constant", Above, 0.0, 0.0),
        ],
        7 => {
            let closed = |l: f64| 128.0 / 3.0 * PI.powi(3) * ((l - 1.0) / l).powi(2) * ((l + 1.0) / l).powi(2);
            let mut v: Vec<Frozen> = [1.5, 2.0, 10.0].iter().map(|l| pin(format!("chi_grad_closed_form[lambda={l}]"), Relative, closed(*l), 1e-6)).collect();
            v.push(pin("chi_regime_constant[near_one]", Above, 0.0, 0.0));
            v.push(pin("chi_regime_constant[large]", Above, 0.0, 0.0));
            v
        }
        8 => vec![
            pin("gradient_fd_relative_error", AtMost, 0.0, 1e-3),
            pin("dstar_f_order", AtLeast, 1.9, 0.0),
            pin("polarization_curvature_residual", AtMost, 0.0, 1e-10),
            pin("polarization_dstar_f_order", AtLeast, 1.8, 0.0),
            pin("commutator_margin[one_form]", AtMost, 0.0, 0.0),
            pin("commutator_margin[two_tensor]", AtMost, 0.0, 0.0),
        ],
        9 => vec![pin("jacobi_moduli_residual", AtMost, 0.0, 1e-2), pin("jacobi_refinement_ratio", Below, 1.0, 0.0)],
        10 => vec![
            pin("flow_start_energy_excess", AtMost, 0.1, 0.0),
            pin("flow_final_distance", AtMost, 0.0, 1e-3),
            pin("flow_final_energy_gap", AtMost, 0.0, 1e-4),
            // monotone up to rounding of the discrete energy sum
            pin("flow_largest_relative_energy_increase", AtMost, 0.0, 1e-13),
        ],
        11 => vec![
            pin("coulomb_round_trip_residual", AtMost, 0.0, 1e-8),
            pin("coulomb_largest_contraction_factor", Below, 1.0, 0.0),
            // 10× the solver tolerance of 1e-9
            pin("coulomb_rotation_commutation", AtMost, 0.0, 1e-8),
            pin("coulomb_dilation_commutation", AtMost, 0.0, 1e-8),
            pin("bootstrap_family_smallest_curvature_gap", AtLeast, 1e-3, 0.0),
            pin("bootstrap_family_largest_curvature_gap", AtMost, 1e-1, 0.0),
            pin("bootstrap_constant", Above, 0.0, 0.0),
        ],
        12 => vec![pin("z_recovered_lambda_error", AtMost, 0.0, 1e-3), pin("z_recovered_xi_error", AtMost, 0.0, 1e-3)],
        _ => unreachable!(),
    }
}

fn verdict(f: &Frozen, computed: f64) -> bool {
    use Comparison::*;
    computed.is_finite()
        && match f.comparison {
            Relative => (computed - f.target).abs() <= f.tol * f.target.abs(),
            Absolute => (computed - f.target).abs() <= f.tol,
            AtMost => computed <= f.target + f.tol,
            AtLeast => computed >= f.target - f.tol,
            Below => computed < f.target,
            Above => computed > f.target,
        }
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-14 * a.abs().max(b.abs())
}

/// Problems with the suite's checks for one criterion; empty when every check passes.
fn judge(criterion: u32, checks: &[Check]) -> Vec<String> {
    let pins = frozen(criterion);
    let mut problems = Vec::new();
    for c in checks {
        if !pins.iter().any(|f| f.id == c.id) {
            problems.push(format!("unexpected check {}", c.id));
        }
    }
    for f in &pins {
        let Some(c) = checks.iter().find(|c| c.id == f.id) else {
            problems.push(format!("missing check {}", f.id));
            continue;
        };
        if c.comparison != f.comparison || !same(c.target, f.target) || !same(c.tol, f.tol) {
            problems.push(format!(
                "{} judged as {:?} {:e} ± {:e}, pinned {:?} {:e} ± {:e}",
                f.id, c.comparison, c.target, c.tol, f.comparison, f.target, f.tol
            ));
        } else if !verdict(f, c.computed) {
            problems.push(format!("{} = {:e}, needs {:?} {:e} ± {:e}", f.id, c.computed, f.comparison, f.target, f.tol));
        }
    }
    problems
}

fn main() -> ExitCode {
    let wanted: Vec<u32> = match std::env::var("ACCEPTANCE_CRITERIA") {
        Ok(s) => s.split(',').filter_map(|x| x.trim().parse().ok()).collect(),
        Err(_) => (1..=12).collect(),
    };
    let cfg = SuiteConfig::default();
    let mut failed = Vec::new();
    for n in wanted {
        let start = Instant::now();
        let problems = match run_criterion(n, &cfg) {
            Ok(checks) => judge(n, &checks),
            Err(e) => vec![format!("computation failed: {e}")],
        };
        let secs = start.elapsed().as_secs_f64();
        let status = if problems.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {n:>2}: {status}  {} ({secs:.1} s)", anchor(n));
        for p in &problems {
            println!("    {p}");
        }
        if !problems.is_empty() {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
