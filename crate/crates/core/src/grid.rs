use nalgebra::Vector3;

use crate::energy::C64;

/// A sampled complex-valued function on a declared evaluation grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub points: Vec<Vector3<f64>>,
    pub values: Vec<C64>,
    /// What the samples are (resolvent output, Green kernel, trace, ...).
    pub role: String,
}

impl GridFunction {
    pub fn new(points: Vec<Vector3<f64>>, values: Vec<C64>, role: impl Into<String>) -> Self {
        assert_eq!(points.len(), values.len());
        GridFunction {
            points,
            values,
            role: role.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Regular box grid: `dims` points per axis spanning [lo, hi] per axis.
pub fn box_grid(lo: Vector3<f64>, hi: Vector3<f64>, dims: [usize; 3]) -> Vec<Vector3<f64>> {
    let step = |a: f64, b: f64, n: usize, i: usize| {
        if n <= 1 {
            0.5 * (a + b)
        } else {
            a + (b - a) * i as f64 / (n - 1) as f64
        }
    };
    let mut pts = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                pts.push(Vector3::new(
                    step(lo.x, hi.x, dims[0], i),
                    step(lo.y, hi.y, dims[1], j),
                    step(lo.z, hi.z, dims[2], k),
                ));
            }
        }
    }
    pts
}
