//! Command orchestration and artifact emission.
//!
//! Every artifact is named `<label>_<what>.<ext>` inside the output
//! directory; solution components carry the start (or solution) index:
//! `<label>_s<start>_u.grid`, `<label>_m<index>_v.grid`. CSV files have a
//! header row, LF endings and floats with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nehari_core::energy::{self, State};
use nehari_core::grid::write_grid_function;
use nehari_core::multiplicity::{fountain_diagnostics, multiplicity_search};
use nehari_core::solver::{self, SolveReport};
use nehari_core::{model, Error, Problem};

use crate::config::{sample, ConfigFile};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Validate,
    Ground,
    Multiplicity,
    Fountain,
    Fibering,
    Decay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub file: ConfigFile,
}

impl RunConfig {
    fn path(&self, name: &str) -> PathBuf {
        self.file.output.dir.join(format!("{}_{name}", self.file.output.label))
    }
}

/// 0 success, 2 hypothesis failure, 3 solver stall, 1 anything else.
pub fn exit_code<T>(r: &Result<T, CliError>) -> i32 {
    match r {
        Ok(_) => 0,
        Err(CliError::ValidationFailed(_)) | Err(CliError::Core(Error::Validation(_))) => 2,
        Err(CliError::Core(Error::Stalled(_))) | Err(CliError::Core(Error::AllStartsFailed(_))) => 3,
        Err(_) => 1,
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes)?;
    Ok(())
}

fn write_state(cfg: &RunConfig, tag: &str, s: &State) -> Result<(PathBuf, PathBuf), CliError> {
    let (pu, pv) = (cfg.path(&format!("{tag}_u.grid")), cfg.path(&format!("{tag}_v.grid")));
    for (p, f) in [(&pu, s.u()), (&pv, s.v())] {
        let mut buf = Vec::new();
        write_grid_function(&mut buf, f)?;
        write_file(p, &buf)?;
    }
    Ok((pu, pv))
}

/// Plot table `i1..,x1..,u,v`.
fn state_csv(s: &State) -> String {
    let d = s.domain();
    let mut head: Vec<String> = (1..=d.dim()).map(|a| format!("i{a}")).collect();
    head.extend((1..=d.dim()).map(|a| format!("x{a}")));
    let mut out = format!("{},u,v\n", head.join(","));
    for i in 0..d.len() {
        let idx = d.multi_index(i);
        let x = d.point(i);
        let mut row: Vec<String> = idx.iter().map(|k| k.to_string()).collect();
        row.extend(x.iter().map(|&c| num(c)));
        row.push(num(s.u().values()[i]));
        row.push(num(s.v().values()[i]));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn problem(cfg: &RunConfig) -> Result<Problem, CliError> {
    Ok(Problem::new(cfg.file.problem.build()?)?)
}

fn solve_report_text(problem: &Problem, report: &SolveReport, s: &State) -> Result<String, CliError> {
    let mut t = String::from("[report]\n");
    t.push_str(&report.to_string());
    t.push_str("\n[energy]\n");
    t.push_str(&energy::energy(problem, s)?.to_string());
    Ok(t)
}

fn history_csv(report: &SolveReport) -> String {
    let mut out = String::from("iteration,energy,decrement\n");
    for (k, e) in report.energy_history.iter().enumerate() {
        let dec = if k == 0 { 0.0 } else { report.decrements[k - 1] };
        let _ = writeln!(out, "{k},{},{}", num(*e), num(dec));
    }
    out
}

/// Run one command; progress lines go to `log`.
pub fn run(cfg: &RunConfig, log: &mut dyn Write) -> Result<(), CliError> {
    cfg.file.solve.to_config().validate()?;
    fs::create_dir_all(&cfg.file.output.dir)?;
    match cfg.command {
        Command::Validate => validate(cfg, log),
        Command::Ground => ground(cfg, log),
        Command::Multiplicity => multiplicity(cfg, log),
        Command::Fountain => fountain(cfg, log),
        Command::Fibering => fibering(cfg, log),
        Command::Decay => decay(cfg, log),
    }
}

fn validate(cfg: &RunConfig, log: &mut dyn Write) -> Result<(), CliError> {
    let spec = cfg.file.problem.build()?;
    let report = model::validate_problem(&spec)?;
    let text = report.to_string();
    let path = cfg.path("validation.txt");
    write_file(&path, text.as_bytes())?;
    write!(log, "{text}")?;
    writeln!(log, "wrote {}", path.display())?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::ValidationFailed(text))
    }
}

fn ground(cfg: &RunConfig, log: &mut dyn Write) -> Result<(), CliError> {
    let p = problem(cfg)?;
    let (report, s) = solver::find_ground_state(&p, &cfg.file.solve.to_config())?;
    let tag = format!("s{}", report.start_index);
    let (pu, pv) = write_state(cfg, &tag, &s)?;
    write_file(&cfg.path(&format!("{tag}.csv")), state_csv(&s).as_bytes())?;
    write_file(&cfg.path("report.txt"), solve_report_text(&p, &report, &s)?.as_bytes())?;
    write_file(&cfg.path("history.csv"), history_csv(&report).as_bytes())?;
    writeln!(
        log,
        "ground state: energy {:.12e}, residual {:.3e}, start {}",
        report.energy, report.grad_residual, report.start_index
    )?;
    writeln!(log, "wrote {} and {}", pu.display(), pv.display())?;
    Ok(())
}

fn multiplicity(cfg: &RunConfig, log: &mut dyn Write) -> Result<(), CliError> {
    let p = problem(cfg)?;
    let m = &cfg.file.multiplicity;
    let (set, attempts) =
        multiplicity_search(&p, &cfg.file.solve.to_config(), &m.to_config(), m.target_count, m.budget)?;
    let mut files = Vec::new();
    let mut table = String::from("index,energy,grad_residual,xi_residual,norm,attempt\n");
    for (i, (s, r)) in set.entries.iter().enumerate() {
        let (pu, pv) = write_state(cfg, &format!("m{i}"), s)?;
        let name = |p: &Path| p.file_name().expect("file").to_string_lossy().into_owned();
        files.push((name(&pu), name(&pv)));
        let _ = writeln!(
            table,
            "{i},{},{},{},{},{}",
            num(r.energy),
            num(r.grad_residual),
            num(r.xi_residual),
            num(r.norm),
            r.start_index
        );
    }
    let mut manifest = set.manifest(&files);
    manifest.push_str("\n[attempts]\n");
    for a in &attempts {
        let _ = writeln!(manifest, "# {a}");
    }
    write_file(&cfg.path("manifest.txt"), manifest.as_bytes())?;
    write_file(&cfg.path("solutions.csv"), table.as_bytes())?;
    for a in &attempts {
        writeln!(log, "{a}")?;
    }
    writeln!(log, "found {} of {} requested solutions", set.len(), m.target_count)?;
    Ok(())
}

fn fountain(cfg: &RunConfig, log: &mut dyn Write) -> Result<(), CliError> {
    let p = problem(cfg)?;
    let f = fountain_diagnostics(&p, cfg.file.fountain.k_max, cfg.file.solve.seed)?;
    write_file(&cfg.path("fountain.csv"), f.to_csv().as_bytes())?;
    write_file(&cfg.path("fountain.txt"), f.to_string().as_bytes())?;
    write!(log, "{f}")?;
    Ok(())
}

fn fibering(cfg: &RunConfig, log: &mut dyn Write) -> Result<(), CliError> {
    let p = problem(cfg)?;
    let fc = &cfg.file.fibering;
    if fc.samples < 2 || !(fc.t_max_factor > 1.0) {
        return Err(CliError::Config("fibering needs samples >= 2 and t_max_factor > 1".into()));
    }
    let s = State::new(sample("fibering.u", &fc.u, p.domain())?, sample("fibering.v", &fc.v, p.domain())?)?;
    let (rep, _) = energy::fibering_project(&p, &s)?;
    let t_max = fc.t_max_factor * rep.t_star;
    let mut csv = String::from("t,phi,dphi\n");
    let mut changes = 0;
    let mut prev: Option<f64> = None;
    for k in 1..=fc.samples {
        let t = t_max * k as f64 / fc.samples as f64;
        let phi = energy::fibering_value(&p, &s, t)?;
        let dphi = energy::fibering_slope(&p, &s, t)?;
        if let Some(q) = prev {
            if (q > 0.0) != (dphi > 0.0) {
                changes += 1;
            }
        }
        prev = Some(dphi);
        let _ = writeln!(csv, "{},{},{}", num(t), num(phi), num(dphi));
    }
    let text = format!(
        "t_star = {:.17e}\nphi_at_t = {:.17e}\nbracket = {:.17e},{:.17e}\niterations = {}\nslope_residual = {:.17e}\nsign_changes = {changes}\n",
        rep.t_star, rep.phi_at_t, rep.bracket.0, rep.bracket.1, rep.iterations, rep.slope_residual
    );
    write_file(&cfg.path("fibering.csv"), csv.as_bytes())?;
    write_file(&cfg.path("fibering.txt"), text.as_bytes())?;
    write!(log, "{text}")?;
    Ok(())
}

fn decay(cfg: &RunConfig, log: &mut dyn Write) -> Result<(), CliError> {
    let p = problem(cfg)?;
    if !p.domain().is_periodic() {
        return Err(Error::NotPeriodic.into());
    }
    let (report, s) = solver::find_ground_state(&p, &cfg.file.solve.to_config())?;
    let (c, z) = solver::recenter(&s)?;
    let fit = solver::decay_fit(&c)?;
    write_state(cfg, &format!("s{}", report.start_index), &c)?;

    let d = c.domain();
    let amp: Vec<f64> = c.u().values().iter().zip(c.v().values()).map(|(a, b)| a.abs() + b.abs()).collect();
    let peak = (0..amp.len()).fold(0, |m, i| if amp[i] > amp[m] { i } else { m });
    let pk = d.multi_index(peak);
    let mut csv = String::from("r,amplitude\n");
    for (i, a) in amp.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", num(d.node_distance(&d.multi_index(i), &pk)), num(*a));
    }
    let shift: Vec<String> = z.iter().map(|k| k.to_string()).collect();
    let text = format!(
        "energy = {:.17e}\nshift = {}\n{}{fit}",
        report.energy,
        shift.join(","),
        solve_report_text(&p, &report, &c)?
    );
    write_file(&cfg.path("decay.csv"), csv.as_bytes())?;
    write_file(&cfg.path("decay.txt"), text.as_bytes())?;
    writeln!(log, "decay: alpha {:.6e}, r^2 {:.6}, samples {}", fit.alpha, fit.r_squared, fit.samples)?;
    Ok(())
}
