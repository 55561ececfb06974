//! Nonlinearities, potentials and the hypothesis gate run before any solve.
//!
//! Nonlinearities are finite power sums `f(s) = Σ a_j |s|^(p_j-2) s` with
//! primitive `F(s) = Σ (a_j/p_j) |s|^p_j`. For this family the structural
//! hypotheses reduce to parameter constraints (`a_j > 0`, `q < p_j < 2*`);
//! the derived pointwise inequalities are additionally checked on a
//! log-spaced sample so that a report always carries concrete margins.

use std::fmt;
use std::sync::Arc;

use crate::accum;
use crate::error::{Error, Result};
use crate::grid::spectral::ShiftedLaplaceSolver;
use crate::grid::{DomainSpec, GridFunction};

/// Sample points per sign used by the numerical hypothesis checks.
pub const HYPOTHESIS_SAMPLES: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm {
    pub coefficient: f64,
    pub exponent: f64,
}

/// `f(s) = Σ a_j |s|^(p_j-2) s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    terms: Vec<PowerTerm>,
}

impl Nonlinearity {
    pub fn new(terms: &[(f64, f64)]) -> Self {
        Self {
            terms: terms
                .iter()
                .map(|&(coefficient, exponent)| PowerTerm {
                    coefficient,
                    exponent,
                })
                .collect(),
        }
    }

    pub fn single(coefficient: f64, exponent: f64) -> Self {
        Self::new(&[(coefficient, exponent)])
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }

    /// The exponent `p` of the growth bound: the largest `p_j`.
    pub fn max_exponent(&self) -> f64 {
        self.terms.iter().map(|t| t.exponent).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_exponent(&self) -> f64 {
        self.terms.iter().map(|t| t.exponent).fold(f64::INFINITY, f64::min)
    }

    /// `f(s)`.
    pub fn value(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * accum::signed_pow(s, t.exponent))
            .sum()
    }

    /// `F(s)`, the primitive vanishing at zero.
    pub fn primitive(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient / t.exponent * accum::abs_pow(s, t.exponent))
            .sum()
    }

    /// `f'(s)`.
    pub fn derivative(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * (t.exponent - 1.0) * accum::abs_pow(s, t.exponent - 2.0))
            .sum()
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| format!("{}*|u|^{}", t.coefficient, t.exponent - 2.0) + "*u")
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Raw problem data; becomes a [`Problem`] once every hypothesis passes.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub q: f64,
    pub f1: Nonlinearity,
    pub f2: Nonlinearity,
    pub v1: GridFunction,
    pub v2: GridFunction,
    pub lambda: GridFunction,
    pub delta: f64,
    pub domain: Arc<DomainSpec>,
}

impl ProblemSpec {
    /// `V1 = V2 ≡ 1`, `λ ≡ 0.3`, `f1 = f2 = s|s|²`, `q = 3`, `δ = 0.5` on `domain`.
    pub fn default_on(domain: Arc<DomainSpec>) -> Result<Self> {
        Ok(Self {
            q: 3.0,
            f1: Nonlinearity::single(1.0, 4.0),
            f2: Nonlinearity::single(1.0, 4.0),
            v1: GridFunction::constant(domain.clone(), 1.0)?,
            v2: GridFunction::constant(domain.clone(), 1.0)?,
            lambda: GridFunction::constant(domain.clone(), 0.3)?,
            delta: 0.5,
            domain,
        })
    }

    /// Default data on `(0,1)` with 256 interior nodes.
    pub fn bounded_default() -> Result<Self> {
        Self::default_on(Arc::new(DomainSpec::dirichlet(&[1.0], &[256])?))
    }

    /// Default data on the 2D torus of period 16, 16 nodes per unit cell.
    pub fn periodic_default() -> Result<Self> {
        Self::default_on(Arc::new(DomainSpec::periodic(&[16, 16], 16)?))
    }
}

/// Outcome of one hypothesis check.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: String,
    pub subject: String,
    pub passed: bool,
    pub worst_margin: f64,
    pub witness: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
    /// `max_x λ / sqrt(V1 V2)` when potentials were checked.
    pub delta_min: Option<f64>,
    /// Coupling constant used in bounds: `max(delta_min, requested δ)`.
    pub delta: Option<f64>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: &str, subject: &str, passed: bool, worst_margin: f64, witness: String) {
        self.checks.push(HypothesisCheck {
            name: name.to_string(),
            subject: subject.to_string(),
            passed,
            worst_margin,
            witness,
        });
    }

    fn extend(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
        if other.delta.is_some() {
            self.delta = other.delta;
            self.delta_min = other.delta_min;
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} [{}] {} worst_margin={:.6e} witness={}",
                c.name,
                c.subject,
                if c.passed { "PASS" } else { "FAIL" },
                c.worst_margin,
                c.witness
            )?;
        }
        if let (Some(dmin), Some(d)) = (self.delta_min, self.delta) {
            writeln!(f, "delta_min={dmin:.6e} delta={d:.6e}")?;
        }
        Ok(())
    }
}

fn log_samples() -> impl Iterator<Item = f64> {
    let n = HYPOTHESIS_SAMPLES;
    (0..n).map(move |k| 10f64.powf(-6.0 + 12.0 * k as f64 / (n - 1) as f64))
}

/// Check the nonlinearity hypotheses for one equation.
///
/// Structural checks: `a_j > 0` (F3), `p_j > q` (F4), `p_j > 2` (F2), finite
/// exponents (F1, with `2* = ∞`; the dimension-dependent bound is added by
/// [`validate_problem`]). Numerical checks on 400 log-spaced points per sign
/// in `[1e-6, 1e6]`: oddness (F5), `f'(s)s² - f(s)s > (q-2) f(s)s` and
/// `0 ≤ q F(s) ≤ f(s) s`.
pub fn validate_nonlinearity(nl: &Nonlinearity, q: f64) -> ValidationReport {
    validate_nonlinearity_for(nl, q, "f")
}

fn validate_nonlinearity_for(nl: &Nonlinearity, q: f64, subject: &str) -> ValidationReport {
    let mut r = ValidationReport::default();
    let q_ok = q.is_finite() && q > 2.0;
    r.push("q-range", subject, q_ok, q - 2.0, format!("q={q}"));

    let exps_ok = !nl.terms.is_empty() && nl.terms.iter().all(|t| t.exponent.is_finite());
    r.push(
        "(F1)",
        subject,
        exps_ok,
        if exps_ok { f64::INFINITY } else { f64::NEG_INFINITY },
        format!("p={}", nl.max_exponent()),
    );

    let f2 = nl.terms.iter().map(|t| t.exponent - 2.0).fold(f64::INFINITY, f64::min);
    r.push("(F2)", subject, exps_ok && f2 > 0.0, f2, format!("min p={}", nl.min_exponent()));

    let (a_min, a_wit) = nl
        .terms
        .iter()
        .map(|t| (t.coefficient, t.coefficient))
        .fold((f64::INFINITY, f64::NAN), |acc, x| if x.0 < acc.0 { x } else { acc });
    let f3 = !nl.terms.is_empty() && a_min > 0.0 && a_min.is_finite();
    r.push("(F3)", subject, f3, if nl.terms.is_empty() { f64::NEG_INFINITY } else { a_min }, format!("a={a_wit}"));

    let f4_margin = nl.min_exponent() - q;
    r.push(
        "(F4)",
        subject,
        !nl.terms.is_empty() && f4_margin > 0.0,
        f4_margin,
        format!("min p={} vs q={q}", nl.min_exponent()),
    );

    // (F5): exact oddness at samples. Like (F1) this is a predicate, so a
    // pass has unbounded margin; a failure reports the relative deviation.
    let mut odd_margin = f64::INFINITY;
    let mut odd_wit = String::from("-");
    for s in log_samples() {
        let dev = (nl.value(-s) + nl.value(s)).abs() / nl.value(s).abs().max(f64::MIN_POSITIVE);
        let dev_f = (nl.primitive(-s) - nl.primitive(s)).abs() / nl.primitive(s).abs().max(f64::MIN_POSITIVE);
        if dev != 0.0 || dev_f != 0.0 {
            odd_margin = -dev.max(dev_f);
            odd_wit = format!("s={s:e}");
            break;
        }
    }
    r.push("(F5)", subject, odd_margin > 0.0, odd_margin, odd_wit);

    let mut worst = (f64::INFINITY, 0.0);
    let mut all = true;
    let mut worst_ar = (f64::INFINITY, 0.0);
    let mut all_ar = true;
    for s in log_samples().flat_map(|s| [s, -s]) {
        let fs = nl.value(s) * s;
        let lhs = nl.derivative(s) * s * s - fs;
        let rhs = (q - 2.0) * fs;
        if !(lhs - rhs > 0.0) {
            all = false;
        }
        let rel = (lhs - rhs) / (lhs.abs() + rhs.abs()).max(f64::MIN_POSITIVE);
        if rel < worst.0 || rel.is_nan() {
            worst = (rel, s);
        }

        let qf = q * nl.primitive(s);
        if !(qf >= 0.0 && qf <= fs) {
            all_ar = false;
        }
        let rel_ar = ((fs - qf) / fs.abs().max(f64::MIN_POSITIVE)).min(if qf >= 0.0 { f64::INFINITY } else { -1.0 });
        if rel_ar < worst_ar.0 || rel_ar.is_nan() {
            worst_ar = (rel_ar, s);
        }
    }
    r.push("derivative-inequality", subject, all, worst.0, format!("s={:e}", worst.1));
    r.push("AR-inequality", subject, all_ar, worst_ar.0, format!("s={:e}", worst_ar.1));
    r
}

/// Relative deviation tolerated between a sampled field and its translate
/// by one cell.
pub const PERIODICITY_TOL: f64 = 1e-10;

/// Potential hypotheses (V1)–(V3). Fails with [`Error::DomainMismatch`] if
/// the sampled fields do not share the problem's domain.
pub fn validate_potentials(spec: &ProblemSpec) -> Result<ValidationReport> {
    for g in [&spec.v1, &spec.v2, &spec.lambda] {
        if **g.domain() != *spec.domain {
            return Err(Error::DomainMismatch);
        }
    }
    let mut r = ValidationReport::default();
    for (name, v) in [("V1", &spec.v1), ("V2", &spec.v2)] {
        let (i, m) = argmin(v.values());
        let ok = m > 0.0;
        r.push("(V1)", name, ok, m, format!("node={i}"));
    }

    let (li, lmin) = argmin(spec.lambda.values());
    let mut delta_min: f64 = 0.0;
    let mut dwit = 0usize;
    for (i, ((&l, &a), &b)) in spec
        .lambda
        .values()
        .iter()
        .zip(spec.v1.values())
        .zip(spec.v2.values())
        .enumerate()
    {
        let ratio = l / (a * b).sqrt();
        if ratio > delta_min || ratio.is_nan() {
            delta_min = ratio;
            dwit = i;
        }
    }
    let requested_ok = spec.delta > 0.0 && spec.delta < 1.0;
    let delta = delta_min.max(if requested_ok { spec.delta } else { 0.0 });
    let v2_ok = lmin >= 0.0 && delta_min < 1.0 && requested_ok;
    let witness = if lmin < 0.0 {
        format!("lambda<0 at node={li}")
    } else if !requested_ok {
        format!("requested delta={} outside (0,1)", spec.delta)
    } else {
        format!("node={dwit}")
    };
    r.push("(V2)", "lambda", v2_ok, (1.0 - delta_min).min(lmin.max(0.0) + 1.0 - delta_min), witness);
    r.delta_min = Some(delta_min);
    r.delta = Some(delta);

    if spec.domain.is_periodic() {
        // sampled closed-form fields repeat only up to rounding
        let mut worst = 0.0f64;
        let mut wit = String::from("-");
        for (name, g) in [("V1", &spec.v1), ("V2", &spec.v2), ("lambda", &spec.lambda)] {
            let scale = g.max_abs().max(1.0);
            for a in 0..spec.domain.dim() {
                let mut z = vec![0i64; spec.domain.dim()];
                z[a] = 1;
                let shifted = crate::grid::shift(g, &z)?;
                for (i, (x, y)) in shifted.values().iter().zip(g.values()).enumerate() {
                    let d = (x - y).abs() / scale;
                    if x != y && !(d < worst) {
                        worst = d;
                        wit = format!("{name} axis={a} node={i}");
                    }
                }
            }
        }
        let margin = PERIODICITY_TOL - worst;
        r.push("(V3)", "potentials", margin >= 0.0, margin, wit);
    }
    Ok(r)
}

fn argmin(xs: &[f64]) -> (usize, f64) {
    xs.iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, x)| if x < acc.1 || x.is_nan() { (i, x) } else { acc })
}

/// Full hypothesis gate: both nonlinearities, the subcritical bound
/// `p < 2N/(N-2)` for `N = 3`, and the potentials.
pub fn validate_problem(spec: &ProblemSpec) -> Result<ValidationReport> {
    let mut r = ValidationReport::default();
    r.extend(validate_nonlinearity_for(&spec.f1, spec.q, "f1"));
    r.extend(validate_nonlinearity_for(&spec.f2, spec.q, "f2"));
    let n = spec.domain.dim();
    let critical = if n <= 2 {
        f64::INFINITY
    } else {
        2.0 * n as f64 / (n as f64 - 2.0)
    };
    let p = spec.f1.max_exponent().max(spec.f2.max_exponent());
    r.push(
        "(F1)",
        "subcritical",
        p < critical,
        critical - p,
        format!("p={p} 2*={critical}"),
    );
    r.extend(validate_potentials(spec)?);
    Ok(r)
}

/// Smallest `R` with `F(s) > |s|^q / q` for all `|s| ≥ R`.
///
/// For the power family `(F(s) - s^q/q) / s^q` is increasing, so the crossing
/// is unique and found by bisection to full precision.
pub fn radius_r(nl: &Nonlinearity, q: f64) -> f64 {
    let psi = |s: f64| -> f64 {
        nl.terms
            .iter()
            .map(|t| t.coefficient / t.exponent * s.powf(t.exponent - q))
            .sum::<f64>()
            - 1.0 / q
    };
    let (mut lo, mut hi) = (1.0, 1.0);
    while psi(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while psi(lo) > 0.0 {
        hi = lo;
        lo /= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if psi(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// A problem whose data passed every hypothesis check.
#[derive(Debug, Clone)]
pub struct Problem {
    spec: ProblemSpec,
    delta: f64,
    report: ValidationReport,
    pub(crate) precond: [Arc<ShiftedLaplaceSolver>; 2],
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        let report = validate_problem(&spec)?;
        if !report.passed() {
            return Err(Error::Validation(report));
        }
        let delta = report.delta.expect("potentials were checked");
        let shift = |v: &GridFunction| (v.min() * v.max()).sqrt();
        let precond = [
            Arc::new(ShiftedLaplaceSolver::new(spec.domain.clone(), shift(&spec.v1))),
            Arc::new(ShiftedLaplaceSolver::new(spec.domain.clone(), shift(&spec.v2))),
        ];
        Ok(Self {
            spec,
            delta,
            report,
            precond,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn domain(&self) -> &Arc<DomainSpec> {
        &self.spec.domain
    }

    pub fn q(&self) -> f64 {
        self.spec.q
    }

    /// Effective coupling bound `δ` used by every inequality.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    /// Whether `(u, v) -> (v, u)` is a symmetry of the functional.
    pub fn is_swap_symmetric(&self) -> bool {
        self.spec.v1 == self.spec.v2 && self.spec.f1 == self.spec.f2
    }
}
