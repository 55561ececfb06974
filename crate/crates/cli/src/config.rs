//! Run configuration: a TOML file with `[problem]`, `[solve]`, `[output]`
//! and optional per-command sections. Every key has a default, so an empty
//! file describes the bounded default problem.

use std::path::PathBuf;
use std::sync::Arc;

use nehari_core::multiplicity::DeflationConfig;
use nehari_core::solver::SolveConfig;
use nehari_core::{DomainSpec, GridFunction, Nonlinearity, ProblemSpec};
use serde::{Deserialize, Serialize};

use crate::expr::{parse_expr, Expr};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainChoice {
    Dirichlet,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub domain: DomainChoice,
    /// Box side lengths (Dirichlet).
    pub lengths: Vec<f64>,
    /// Interior nodes per axis (Dirichlet).
    pub nodes: Vec<usize>,
    /// Torus periods in unit cells (periodic).
    pub periods: Vec<usize>,
    pub points_per_cell: usize,
    pub q: f64,
    /// `(a_j, p_j)` pairs of `f1(s) = Σ a_j |s|^(p_j-2) s`.
    pub f1: Vec<[f64; 2]>,
    pub f2: Vec<[f64; 2]>,
    pub v1: String,
    pub v2: String,
    pub lambda: String,
    pub delta: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            domain: DomainChoice::Dirichlet,
            lengths: vec![1.0],
            nodes: vec![256],
            periods: vec![16, 16],
            points_per_cell: 16,
            q: 3.0,
            f1: vec![[1.0, 4.0]],
            f2: vec![[1.0, 4.0]],
            v1: "1".into(),
            v2: "1".into(),
            lambda: "0.3".into(),
            delta: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub starts: usize,
    pub seed: u64,
    pub recenter_every: usize,
}

impl Default for SolveSection {
    fn default() -> Self {
        let c = SolveConfig::default();
        Self {
            max_iters: c.max_iters,
            grad_tol: c.grad_tol,
            armijo_c1: c.armijo_c1,
            backtrack: c.backtrack,
            max_backtracks: c.max_backtracks,
            starts: c.starts,
            seed: c.seed,
            recenter_every: c.recenter_every,
        }
    }
}

impl SolveSection {
    pub fn to_config(&self) -> SolveConfig {
        SolveConfig {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            armijo_c1: self.armijo_c1,
            backtrack: self.backtrack,
            max_backtracks: self.max_backtracks,
            starts: self.starts,
            seed: self.seed,
            recenter_every: self.recenter_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub label: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), label: "run".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiplicitySection {
    pub target_count: usize,
    /// Deflated attempts allowed after the ground state.
    pub budget: usize,
    pub sigma: f64,
    pub stage_iters: usize,
    pub stage_tol: f64,
    pub newton_iters: usize,
}

impl Default for MultiplicitySection {
    fn default() -> Self {
        let d = DeflationConfig::default();
        Self {
            target_count: 3,
            budget: 12,
            sigma: d.sigma,
            stage_iters: d.stage_iters,
            stage_tol: d.stage_tol,
            newton_iters: d.newton_iters,
        }
    }
}

impl MultiplicitySection {
    pub fn to_config(&self) -> DeflationConfig {
        DeflationConfig {
            sigma: self.sigma,
            stage_iters: self.stage_iters,
            stage_tol: self.stage_tol,
            newton_iters: self.newton_iters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FountainSection {
    pub k_max: usize,
}

impl Default for FountainSection {
    fn default() -> Self {
        Self { k_max: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberingSection {
    /// Direction of the ray, as expressions for both components.
    pub u: String,
    pub v: String,
    pub samples: usize,
    /// Right end of the sampled interval as a multiple of `t*`.
    pub t_max_factor: f64,
}

impl Default for FiberingSection {
    fn default() -> Self {
        Self { u: "sin(pi*x1)".into(), v: "0".into(), samples: 1000, t_max_factor: 4.0 }
    }
}

/// The whole file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: ProblemSection,
    pub solve: SolveSection,
    pub output: OutputSection,
    pub multiplicity: MultiplicitySection,
    pub fountain: FountainSection,
    pub fibering: FiberingSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// The periodic default: 2D torus of period 16 with 16 nodes per cell.
    pub fn periodic_default() -> Self {
        let mut c = Self::default();
        c.problem.domain = DomainChoice::Periodic;
        c
    }
}

impl ProblemSection {
    pub fn domain_spec(&self) -> Result<Arc<DomainSpec>, CliError> {
        let d = match self.domain {
            DomainChoice::Dirichlet => DomainSpec::dirichlet(&self.lengths, &self.nodes)?,
            DomainChoice::Periodic => DomainSpec::periodic(&self.periods, self.points_per_cell)?,
        };
        Ok(Arc::new(d))
    }

    pub fn build(&self) -> Result<ProblemSpec, CliError> {
        let domain = self.domain_spec()?;
        let nl = |terms: &[[f64; 2]]| Nonlinearity::new(&terms.iter().map(|t| (t[0], t[1])).collect::<Vec<_>>());
        Ok(ProblemSpec {
            q: self.q,
            f1: nl(&self.f1),
            f2: nl(&self.f2),
            v1: sample("v1", &self.v1, &domain)?,
            v2: sample("v2", &self.v2, &domain)?,
            lambda: sample("lambda", &self.lambda, &domain)?,
            delta: self.delta,
            domain,
        })
    }
}

/// Parse `text` and sample it at every node of `domain`.
pub fn sample(key: &str, text: &str, domain: &Arc<DomainSpec>) -> Result<GridFunction, CliError> {
    let e: Expr = parse_expr(text).map_err(|e| CliError::Expr(key.to_string(), e.to_string()))?;
    if e.arity() > domain.dim() {
        return Err(CliError::Expr(
            key.to_string(),
            format!("uses x{} on a {}-dimensional domain", e.arity(), domain.dim()),
        ));
    }
    let values = (0..domain.len())
        .map(|i| e.eval(&domain.point(i)))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|err| CliError::Expr(key.to_string(), err.to_string()))?;
    Ok(GridFunction::new(domain.clone(), values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_bounded_default() {
        let c = ConfigFile::parse("").unwrap();
        assert_eq!(c, ConfigFile::default());
        let built = c.problem.build().unwrap();
        let reference = ProblemSpec::bounded_default().unwrap();
        assert_eq!(built.v1, reference.v1);
        assert_eq!(built.lambda, reference.lambda);
        assert_eq!(built.f1, reference.f1);
        assert_eq!(*built.domain, *reference.domain);
    }

    #[test]
    fn periodic_default_matches_the_core_default() {
        let built = ConfigFile::periodic_default().problem.build().unwrap();
        assert_eq!(*built.domain, *ProblemSpec::periodic_default().unwrap().domain);
    }

    #[test]
    fn round_trip_is_stable() {
        let text = r#"
[problem]
domain = "periodic"
periods = [4, 4]
points_per_cell = 8
f1 = [[1.0, 4.0], [0.5, 5.0]]
v1 = "1 + 0.5*sin(2*pi*x1)"
lambda = "0.2"

[solve]
seed = 42
starts = 3

[output]
label = "torus"
"#;
        let c = ConfigFile::parse(text).unwrap();
        let again = ConfigFile::parse(&c.emit()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.emit(), c.emit());
        assert_eq!(again.solve.seed, 42);
        assert_eq!(again.problem.f1, vec![[1.0, 4.0], [0.5, 5.0]]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ConfigFile::parse("[solve]\nstart = 3\n"), Err(CliError::Config(_))));
        assert!(matches!(ConfigFile::parse("[bogus]\n"), Err(CliError::Config(_))));
    }

    #[test]
    fn expression_errors_name_the_key() {
        let mut c = ConfigFile::default();
        c.problem.v2 = "1 + x2".into();
        match c.problem.build() {
            Err(CliError::Expr(key, msg)) => {
                assert_eq!(key, "v2");
                assert!(msg.contains("x2"));
            }
            other => panic!("{other:?}"),
        }
        c.problem.v2 = "1 + (".into();
        assert!(matches!(c.problem.build(), Err(CliError::Expr(..))));
    }
}
