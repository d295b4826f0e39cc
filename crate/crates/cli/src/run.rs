//! Command execution: builds the addressed model, runs the requested
//! computation, and writes the CSV artifact plus a JSON summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, Vector3};
use rand::SeedableRng;
use serde::Serialize;
use serde_json::{json, Value};

use krein_core::finite::{
    direct_perturbed, hermitian_deviation, hilbert_residual, krein_rank_n, spectral_norm,
};
use krein_core::kernels::{cubic_lattice, gram_neg_energy, lattice_tail_bound};
use krein_core::points::{
    apply_resolvent, bound_states, boundary_condition_residual, eigenfunction_value,
    make_diagonal_model, PointModel,
};
use krein_core::segment::{
    apply_r_l, build_segment_q, build_sturm_liouville, gstar_g_matrix, log_boundary_trace,
    negative_spectrum, SegmentModel, SturmLiouvilleOp,
};
use krein_core::{
    C64, Energy, FiniteModel, GaussianSource, GridFunction, KreinError, SourceSpec,
    CONVENTION_NOTE,
};

use crate::config::{ModelSpec, RunConfig, SourceCfg, Tolerances};

#[derive(Debug)]
pub enum CliError {
    /// Malformed or incomplete configuration (exit 2).
    Config(String),
    /// Model precondition failure (exit 3).
    Model(KreinError),
    /// A verify suite recorded violations (exit 1).
    Violations(usize),
}

impl From<KreinError> for CliError {
    fn from(e: KreinError) -> Self {
        CliError::Model(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Model(e) => write!(f, "model error: {e}"),
            CliError::Violations(n) => write!(f, "verify recorded {n} violation(s)"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Violations(_) => 1,
            CliError::Config(_) => 2,
            CliError::Model(_) => 3,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn io_err(e: std::io::Error) -> CliError {
    CliError::Config(format!("io: {e}"))
}

/// 17 significant digits; fixed-width exponent form keeps reruns byte-identical.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    fs::write(path, contents).map_err(io_err)
}

fn emit_grid(values: &GridFunction, path: &Path) -> CliResult<()> {
    assert!(!values.is_empty(), "grid must be nonempty");
    let mut out = String::from("x,y,z,re,im\n");
    for (p, v) in values.points.iter().zip(values.values.iter()) {
        writeln!(
            out,
            "{},{},{},{},{}",
            num(p.x),
            num(p.y),
            num(p.z),
            num(v.re),
            num(v.im)
        )
        .expect("string write");
    }
    write_file(path, &out)
}

fn parse_source(cfg: &SourceCfg) -> CliResult<SourceSpec> {
    let g = GaussianSource::new(Vector3::from(cfg.center), cfg.sigma, cfg.amplitude);
    match cfg.shape.as_str() {
        "gaussian" => Ok(SourceSpec::Gaussian(g)),
        "helmholtz-image" => Ok(SourceSpec::HelmholtzImage(g)),
        other => Err(CliError::Config(format!("unknown source shape {other:?}"))),
    }
}

fn build_points(centers: &[[f64; 3]], alphas: &[f64]) -> CliResult<PointModel> {
    let centers: Vec<Vector3<f64>> = centers.iter().map(|&c| Vector3::from(c)).collect();
    Ok(make_diagonal_model(centers, alphas)?)
}

fn build_segment(l: f64, n_nodes: usize, cfg: &RunConfig) -> CliResult<(SegmentModel, SturmLiouvilleOp)> {
    let ModelSpec::Segment { potential, .. } = &cfg.model else {
        unreachable!()
    };
    let model = SegmentModel::uniform(l, n_nodes, |x| potential.eval(x));
    let sl = build_sturm_liouville(&model)?;
    Ok((model, sl))
}

fn first_energy(cfg: &RunConfig) -> CliResult<Energy> {
    let [re, im] = *cfg
        .energies
        .first()
        .ok_or_else(|| CliError::Config("command needs at least one energy".into()))?;
    Ok(Energy::new(C64::new(re, im)))
}

#[derive(Serialize)]
struct Summary {
    command: String,
    model: String,
    seed: u64,
    convention_note: &'static str,
    tolerances: Tolerances,
    /// File names relative to the output directory, so reruns into different
    /// directories still produce byte-identical summaries.
    artifacts: Vec<String>,
    results: Value,
    violations: Vec<String>,
}

pub struct Runner {
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Runner {
    pub fn run(&self, command: &str, cfg: &RunConfig) -> CliResult<()> {
        cfg.validate().map_err(CliError::Config)?;
        let tol = cfg.tolerances.clone().unwrap_or_default();
        let mut artifacts = Vec::new();
        let mut violations = Vec::new();
        let results = match command {
            "bound-states" => self.bound_states(cfg, &mut artifacts)?,
            "green" => self.green(cfg, &mut artifacts)?,
            "trace" => self.trace(cfg, &mut artifacts)?,
            "verify" => self.verify(cfg, &tol, &mut violations)?,
            other => return Err(CliError::Config(format!("unknown command {other:?}"))),
        };
        let summary = Summary {
            command: command.into(),
            model: cfg.model.kind().into(),
            seed: self.seed,
            convention_note: CONVENTION_NOTE,
            tolerances: tol,
            artifacts: artifacts.clone(),
            results,
            violations: violations.clone(),
        };
        let path = self.out_dir.join("summary.json");
        write_file(
            &path,
            &format!("{}\n", serde_json::to_string_pretty(&summary).expect("serialize")),
        )?;
        if violations.is_empty() {
            Ok(())
        } else {
            Err(CliError::Violations(violations.len()))
        }
    }

    fn bound_states(&self, cfg: &RunConfig, artifacts: &mut Vec<String>) -> CliResult<Value> {
        let range = cfg
            .kappa_range
            .ok_or_else(|| CliError::Config("bound-states needs kappa_range".into()))?;
        let states: Vec<(f64, f64)> = match &cfg.model {
            ModelSpec::Points { centers, alphas } => {
                let model = build_points(centers, alphas)?;
                bound_states(&model, range)
                    .iter()
                    .map(|s| (s.kappa, s.energy))
                    .collect()
            }
            ModelSpec::Segment { l, n_nodes, .. } => {
                let (model, sl) = build_segment(*l, *n_nodes, cfg)?;
                negative_spectrum(&model, &sl, range)
            }
            _ => {
                return Err(CliError::Config(
                    "bound-states supports points and segment models".into(),
                ))
            }
        };
        let mut csv = String::from("kappa,E\n");
        for (kappa, energy) in &states {
            writeln!(csv, "{},{}", num(*kappa), num(*energy)).expect("string write");
        }
        let path = self.out_dir.join("bound_states.csv");
        write_file(&path, &csv)?;
        artifacts.push("bound_states.csv".into());
        Ok(json!({
            "count": states.len(),
            "kappa": states.iter().map(|s| s.0).collect::<Vec<_>>(),
            "energy": states.iter().map(|s| s.1).collect::<Vec<_>>(),
        }))
    }

    fn green(&self, cfg: &RunConfig, artifacts: &mut Vec<String>) -> CliResult<Value> {
        let e = first_energy(cfg)?;
        let grid = cfg
            .grid
            .as_ref()
            .ok_or_else(|| CliError::Config("green needs a grid".into()))?
            .points();
        let src = parse_source(
            cfg.source
                .as_ref()
                .ok_or_else(|| CliError::Config("green needs a source".into()))?,
        )?;
        let out = match &cfg.model {
            ModelSpec::Points { centers, alphas } => {
                let model = build_points(centers, alphas)?;
                apply_resolvent(&model, &e, &src, &grid)?
            }
            ModelSpec::Segment { l, n_nodes, .. } => {
                let (model, sl) = build_segment(*l, *n_nodes, cfg)?;
                apply_r_l(&model, &sl, &e, &src, &grid)?
            }
            _ => {
                return Err(CliError::Config(
                    "green supports points and segment models".into(),
                ))
            }
        };
        let path = self.out_dir.join("green.csv");
        emit_grid(&out, &path)?;
        artifacts.push("green.csv".into());
        Ok(json!({
            "points": out.len(),
            "max_abs": out.max_abs(),
            "role": out.role,
        }))
    }

    fn trace(&self, cfg: &RunConfig, artifacts: &mut Vec<String>) -> CliResult<Value> {
        let ModelSpec::Segment { l, n_nodes, .. } = &cfg.model else {
            return Err(CliError::Config("trace needs a segment model".into()));
        };
        let spec = cfg
            .trace
            .as_ref()
            .ok_or_else(|| CliError::Config("trace needs a trace section".into()))?;
        let e = first_energy(cfg)?;
        let src = parse_source(
            cfg.source
                .as_ref()
                .ok_or_else(|| CliError::Config("trace needs a source".into()))?,
        )?;
        let (model, sl) = build_segment(*l, *n_nodes, cfg)?;
        let report = log_boundary_trace(&model, &sl, &e, &src, spec.x, &spec.rhos)?;
        let points: Vec<Vector3<f64>> = spec
            .rhos
            .iter()
            .map(|&rho| Vector3::new(spec.x, rho / 2f64.sqrt(), rho / 2f64.sqrt()))
            .collect();
        let values: Vec<C64> = report.raw.iter().map(|r| r.1).collect();
        let path = self.out_dir.join("trace.csv");
        emit_grid(
            &GridFunction::new(points, values, "approach samples of the perturbed resolvent"),
            &path,
        )?;
        artifacts.push("trace.csv".into());
        let rel_dev = (report.u_f_estimate - report.u_f_from_solve).norm()
            / report.u_f_from_solve.norm().max(f64::MIN_POSITIVE);
        Ok(json!({
            "u_f_estimate": [report.u_f_estimate.re, report.u_f_estimate.im],
            "u_f_from_solve": [report.u_f_from_solve.re, report.u_f_from_solve.im],
            "relative_deviation": rel_dev,
            "bracket": report
                .bracket
                .iter()
                .map(|b| vec![b.re, b.im])
                .collect::<Vec<_>>(),
            "bracket_target": [report.bracket_target.re, report.bracket_target.im],
        }))
    }

    fn verify(
        &self,
        cfg: &RunConfig,
        tol: &Tolerances,
        violations: &mut Vec<String>,
    ) -> CliResult<Value> {
        let mut check = |name: &str, value: f64, limit: f64| -> Value {
            if !(value <= limit) {
                violations.push(format!("{name}: {value:e} > {limit:e}"));
            }
            json!({ "name": name, "value": value, "limit": limit })
        };
        let checks: Vec<Value> = match &cfg.model {
            ModelSpec::Finite { n, channels } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
                let model = FiniteModel::random(*n, *channels, &mut rng);
                let zs = [C64::new(0.3, 1.1), C64::new(-2.0, 0.7), C64::new(1.5, -0.4)];
                let mut max_oracle = 0.0f64;
                let mut max_sym = 0.0f64;
                let mut max_hilbert = 0.0f64;
                for &z in &zs {
                    let r1 = krein_rank_n(&model, z)?;
                    let direct = direct_perturbed(&model, z)?;
                    let rel = spectral_norm(&(&r1 - &direct)) / spectral_norm(&direct);
                    max_oracle = max_oracle.max(rel);
                    let r1c = krein_rank_n(&model, z.conj())?;
                    max_sym = max_sym.max(spectral_norm(&(&r1c - r1.adjoint())));
                }
                max_hilbert = max_hilbert.max(hilbert_residual(
                    |z| krein_rank_n(&model, z),
                    zs[0],
                    zs[1],
                )?);
                vec![
                    check("krein_vs_direct", max_oracle, tol.oracle),
                    check("conjugate_symmetry", max_sym, tol.oracle),
                    check("hilbert_identity", max_hilbert, tol.oracle),
                ]
            }
            ModelSpec::Points { centers, alphas } => {
                let model = build_points(centers, alphas)?;
                let range = cfg.kappa_range.unwrap_or([1e-2, 20.0]);
                let states = bound_states(&model, range);
                let mut worst = 0.0f64;
                for state in &states {
                    for m in 0..centers.len() {
                        let res = boundary_condition_residual(
                            &model,
                            |x| eigenfunction_value(&model, state, x).expect("off-center"),
                            m,
                        )?;
                        worst = worst.max(res);
                    }
                }
                let dev = hermitian_deviation(&model.w);
                vec![
                    check("boundary_condition_residual", worst, tol.boundary_residual),
                    check("coupling_hermitian", dev, tol.hermitian),
                ]
            }
            ModelSpec::Lattice { dims, spacing, kappa } => {
                let cfg_l = cubic_lattice(*dims, *spacing, Vector3::zeros())?;
                let n = cfg_l.len();
                let gamma = gram_neg_energy(&cfg_l, *kappa);
                let eigs = gamma.symmetric_eigenvalues();
                let scaled = &gamma * (8.0 * std::f64::consts::PI * *kappa);
                let delta = scaled - DMatrix::<f64>::identity(n, n);
                let max_row: f64 = (0..n)
                    .map(|i| (0..n).map(|j| delta[(i, j)].abs()).sum())
                    .fold(0.0, f64::max);
                let mut worst_excess = f64::NEG_INFINITY;
                for m in 0..n {
                    let (rowsum, bound) = lattice_tail_bound(&cfg_l, m, *kappa);
                    worst_excess = worst_excess.max(rowsum - bound);
                }
                vec![
                    check("gamma_min_eigenvalue_positive", -eigs.min(), 0.0),
                    check("delta_row_sum_below_one", max_row, 1.0),
                    check("tail_bound_excess", worst_excess, 0.0),
                ]
            }
            ModelSpec::Segment { l, n_nodes, .. } => {
                let (model, _sl) = build_segment(*l, *n_nodes, cfg)?;
                let z = C64::new(0.0, 1.0);
                let e = Energy::new(z);
                let q = build_segment_q(&model, &e);
                let gg = gstar_g_matrix(&model, &e)?;
                let herglotz = (&q - q.adjoint()) / (z - z.conj());
                let nev = (herglotz - &gg)
                    .iter()
                    .map(|v| v.norm())
                    .fold(0.0, f64::max);
                let norm = spectral_norm(&gg);
                let bound = 1.0 / (8.0 * std::f64::consts::PI * e.sqrt_z.im);
                vec![
                    check("nevanlinna_consistency", nev, tol.quadrature),
                    check("gstar_g_norm_excess", norm - bound, tol.norm_slack),
                ]
            }
        };
        Ok(json!({ "checks": checks }))
    }
}
