//! Run configuration: one JSON file describing a model, a command's inputs,
//! and optional tolerance overrides for `verify`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    /// Complex energies as [re, im] pairs.
    #[serde(default)]
    pub energies: Vec<[f64; 2]>,
    #[serde(default)]
    pub kappa_range: Option<[f64; 2]>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub source: Option<SourceCfg>,
    #[serde(default)]
    pub trace: Option<TraceSpec>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Finite {
        n: usize,
        channels: usize,
    },
    Points {
        centers: Vec<[f64; 3]>,
        alphas: Vec<f64>,
    },
    Lattice {
        dims: [usize; 3],
        spacing: f64,
        kappa: f64,
    },
    Segment {
        l: f64,
        n_nodes: usize,
        potential: PotentialSpec,
    },
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Finite { .. } => "finite",
            ModelSpec::Points { .. } => "points",
            ModelSpec::Lattice { .. } => "lattice",
            ModelSpec::Segment { .. } => "segment",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant(f64),
    /// Coefficients c_0 + c_1 x + c_2 x^2 + ...
    Polynomial(Vec<f64>),
    /// Sorted (x, v) samples, linearly interpolated and clamped at the ends.
    Table(Vec<[f64; 2]>),
}

impl PotentialSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Constant(c) => *c,
            PotentialSpec::Polynomial(cs) => cs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            PotentialSpec::Table(samples) => {
                match samples.windows(2).find(|w| x <= w[1][0]) {
                    _ if samples.is_empty() => 0.0,
                    _ if x <= samples[0][0] => samples[0][1],
                    Some(w) => {
                        let t = (x - w[0][0]) / (w[1][0] - w[0][0]);
                        w[0][1] * (1.0 - t) + w[1][1] * t
                    }
                    None => samples[samples.len() - 1][1],
                }
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn points(&self) -> Vec<Vector3<f64>> {
        krein_core::box_grid(
            Vector3::from(self.lo),
            Vector3::from(self.hi),
            self.dims,
        )
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceCfg {
    pub center: [f64; 3],
    pub sigma: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// "gaussian" or "helmholtz-image"
    #[serde(default = "gaussian")]
    pub shape: String,
}

fn one() -> f64 {
    1.0
}

fn gaussian() -> String {
    "gaussian".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub x: f64,
    pub rhos: Vec<f64>,
}

/// Thresholds used by `verify`; the table is embedded in every JSON summary
/// so reports are auditable without the config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub oracle: f64,
    pub hermitian: f64,
    pub compression: f64,
    pub kappa: f64,
    pub quadrature: f64,
    pub boundary_residual: f64,
    pub trace: f64,
    pub locality: f64,
    pub norm_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            oracle: 1e-10,
            hermitian: 1e-10,
            compression: 1e-12,
            kappa: 1e-8,
            quadrature: 1e-8,
            boundary_residual: 1e-6,
            trace: 1e-3,
            locality: 1e-4,
            norm_slack: 1e-6,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        match &self.model {
            ModelSpec::Finite { n, channels } => {
                if *n == 0 || *channels == 0 || channels > n {
                    return Err("finite model needs 0 < channels <= n".into());
                }
            }
            ModelSpec::Points { centers, alphas } => {
                if centers.is_empty() || centers.len() != alphas.len() {
                    return Err("points model needs matching nonempty centers/alphas".into());
                }
            }
            ModelSpec::Lattice { dims, spacing, kappa } => {
                if dims.iter().any(|&d| d == 0) || *spacing <= 0.0 || *kappa <= 0.0 {
                    return Err("lattice model needs positive dims, spacing, kappa".into());
                }
            }
            ModelSpec::Segment { l, n_nodes, .. } => {
                if !(*l > 0.0) {
                    return Err("segment model: missing or nonpositive l".into());
                }
                if *n_nodes < 16 {
                    return Err("segment model needs n_nodes >= 16".into());
                }
            }
        }
        let all_numeric = self
            .energies
            .iter()
            .flatten()
            .chain(self.kappa_range.iter().flatten())
            .all(|v| v.is_finite());
        if !all_numeric {
            return Err("energies and kappa_range must be finite".into());
        }
        if let Some(g) = &self.grid {
            if g.dims.iter().any(|&d| d == 0) {
                return Err("grid dims must be nonzero".into());
            }
        }
        if let Some(t) = &self.trace {
            if t.rhos.is_empty() || !t.rhos.windows(2).all(|w| w[0] > w[1]) {
                return Err("trace rhos must be nonempty and decreasing".into());
            }
        }
        Ok(())
    }
}
