//! Perturbation of the 3D Laplacian supported on the segment [0, l] x {0} x {0},
//! with a Dirichlet Sturm-Liouville operator L = -d^2/dx^2 + v(x) as the
//! operator parameter: R_L(z) = R(z) - G(z) [Q(z) + L]^{-1} G(conj z)^*.

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;

use crate::energy::{C64, Energy};
use crate::error::{KreinError, Result};
use crate::grid::GridFunction;
use crate::kernels::FOUR_PI;
use crate::quad;
use crate::source::{free_resolvent_at, SourceSpec};

// 4-point Gauss-Legendre rule on [-1, 1]
const GL4_X: [f64; 2] = [0.3399810435848563, 0.8611363115940526];
const GL4_W: [f64; 2] = [0.6521451548625461, 0.3478548451374538];

/// Segment of length l with a real potential sampled on a quadrature grid.
#[derive(Debug, Clone)]
pub struct SegmentModel {
    pub l: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub v: Vec<f64>,
    /// Set when the grid is the uniform midpoint rule (spacing h = l/n).
    uniform_h: Option<f64>,
}

impl SegmentModel {
    /// Uniform midpoint grid: nodes (j - 1/2) l/n, weights l/n (sum is exactly l).
    pub fn uniform<V: Fn(f64) -> f64>(l: f64, n: usize, potential: V) -> Self {
        assert!(l > 0.0 && n > 0);
        let h = l / n as f64;
        let nodes: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * h).collect();
        let v = nodes.iter().map(|&x| potential(x)).collect();
        SegmentModel {
            l,
            nodes,
            weights: vec![h; n],
            v,
            uniform_h: Some(h),
        }
    }

    /// Composite 4-point Gauss-Legendre panels; only the integral-operator
    /// assemblies support this grid (the Sturm-Liouville builder needs the
    /// uniform grid).
    pub fn gauss_legendre<V: Fn(f64) -> f64>(l: f64, panels: usize, potential: V) -> Self {
        assert!(l > 0.0 && panels > 0);
        let width = l / panels as f64;
        let mut nodes = Vec::with_capacity(4 * panels);
        let mut weights = Vec::with_capacity(4 * panels);
        for p in 0..panels {
            let c = (p as f64 + 0.5) * width;
            let mut local = vec![
                (c - 0.5 * width * GL4_X[1], 0.5 * width * GL4_W[1]),
                (c - 0.5 * width * GL4_X[0], 0.5 * width * GL4_W[0]),
                (c + 0.5 * width * GL4_X[0], 0.5 * width * GL4_W[0]),
                (c + 0.5 * width * GL4_X[1], 0.5 * width * GL4_W[1]),
            ];
            for (x, w) in local.drain(..) {
                nodes.push(x);
                weights.push(w);
            }
        }
        let v = nodes.iter().map(|&x| potential(x)).collect();
        SegmentModel {
            l,
            nodes,
            weights,
            v,
            uniform_h: None,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform_h.is_some()
    }

    fn point_on_segment(&self, s: f64) -> Vector3<f64> {
        Vector3::new(s, 0.0, 0.0)
    }

    /// Linear interpolant through (0,0), (nodes, values), (l,0).
    fn interpolate(&self, values: &DVector<C64>, s: f64) -> C64 {
        let n = self.n_nodes();
        let at = |k: isize| -> (f64, C64) {
            if k < 0 {
                (0.0, C64::new(0.0, 0.0))
            } else if k as usize >= n {
                (self.l, C64::new(0.0, 0.0))
            } else {
                (self.nodes[k as usize], values[k as usize])
            }
        };
        // largest k with node k at or left of s (k = -1 keeps the left endpoint)
        let mut k: isize = -1;
        while k < n as isize && at(k + 1).0 < s {
            k += 1;
        }
        let (x0, y0) = at(k);
        let (x1, y1) = at(k + 1);
        if x1 == x0 {
            return y0;
        }
        let t = (s - x0) / (x1 - x0);
        y0 * (1.0 - t) + y1 * t
    }
}

/// Dirichlet Sturm-Liouville discretization and its spectrum.
#[derive(Debug, Clone)]
pub struct SturmLiouvilleOp {
    pub matrix: DMatrix<f64>,
    /// Sorted ascending.
    pub eigenvalues: Vec<f64>,
}

/// Second-order central differences on the uniform midpoint grid, with the
/// Dirichlet conditions u(0) = u(l) = 0 folded into the boundary rows.
pub fn build_sturm_liouville(model: &SegmentModel) -> Result<SturmLiouvilleOp> {
    let h = model.uniform_h.ok_or(KreinError::NonUniformGrid)?;
    let n = model.n_nodes();
    assert!(n >= 16, "grid resolution must be at least 16");
    let inv_h2 = 1.0 / (h * h);
    let mut matrix = DMatrix::zeros(n, n);
    for j in 0..n {
        matrix[(j, j)] = 2.0 * inv_h2 + model.v[j];
        if j > 0 {
            matrix[(j, j - 1)] = -inv_h2;
        }
        if j + 1 < n {
            matrix[(j, j + 1)] = -inv_h2;
        }
    }
    // odd reflection across the endpoints enforces u(0) = u(l) = 0
    matrix[(0, 0)] += inv_h2;
    matrix[(n - 1, n - 1)] += inv_h2;
    let mut eigenvalues: Vec<f64> = matrix.symmetric_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if let Some(&lambda) = eigenvalues
        .iter()
        .find(|lam| lam.abs() < 1e-8)
    {
        return Err(KreinError::ZeroEigenvalue { lambda });
    }
    Ok(SturmLiouvilleOp {
        matrix,
        eigenvalues,
    })
}

/// Nystrom matrix of Q(z): kernel (e^{i sqrt(z) r} - 1)/(4 pi r), removable
/// diagonal i sqrt(z)/(4 pi), columns scaled by the quadrature weights.
pub fn build_segment_q(model: &SegmentModel, e: &Energy) -> DMatrix<C64> {
    let n = model.n_nodes();
    let w = e.sqrt_z;
    let i = C64::new(0.0, 1.0);
    let diag = i * w / FOUR_PI;
    DMatrix::from_fn(n, n, |a, b| {
        let r = (model.nodes[a] - model.nodes[b]).abs();
        let kernel = if r == 0.0 {
            diag
        } else {
            ((i * w * r).exp() - 1.0) / (FOUR_PI * r)
        };
        kernel * model.weights[b]
    })
}

/// Nystrom matrix of G(z)^* G(z) with the closed-form kernel
/// [g(z|r) - g(conj z|r)] / (z - conj z); requires Im z != 0.
pub fn gstar_g_matrix(model: &SegmentModel, e: &Energy) -> Result<DMatrix<C64>> {
    if e.is_real() {
        return Err(KreinError::RealEnergy);
    }
    let n = model.n_nodes();
    let w = e.sqrt_z;
    let i = C64::new(0.0, 1.0);
    let dz = e.z - e.z.conj();
    // diagonal limit: i (sqrt z - sqrt conj z)/(4 pi (z - conj z)), with
    // sqrt(conj z) = -conj(sqrt z) on this branch
    let diag = i * (w + w.conj()) / (FOUR_PI * dz);
    Ok(DMatrix::from_fn(n, n, |a, b| {
        let r = (model.nodes[a] - model.nodes[b]).abs();
        let kernel = if r == 0.0 {
            diag
        } else {
            ((i * w * r).exp() - (-i * w.conj() * r).exp()) / (FOUR_PI * r * dz)
        };
        kernel * model.weights[b]
    }))
}

/// (G(z)^* f)(x) = (R(conj z) f)(x, 0, 0) for a radial source.
pub fn free_resolvent_on_segment(e: &Energy, source: &SourceSpec, x: f64) -> Result<C64> {
    free_resolvent_at(&e.conj(), source, &Vector3::new(x, 0.0, 0.0))
}

/// The boundary data of one solve: samples of u* = G(conj z)^* h on the grid
/// and of u_hat = [L + Q(z)]^{-1} u*.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub u_star: DVector<C64>,
    pub u_hat: DVector<C64>,
}

/// The logarithmic boundary trace u_f = -u_hat/(4 pi) next to u_hat itself.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub u_f: DVector<C64>,
    pub u_hat_h: DVector<C64>,
}

/// Assemble L + Q(z) and solve for u_hat given a radial source.
pub fn solve_boundary(
    model: &SegmentModel,
    sl: &SturmLiouvilleOp,
    e: &Energy,
    source: &SourceSpec,
) -> Result<BoundaryData> {
    let n = model.n_nodes();
    let u_star = DVector::from_fn(n, |j, _| {
        free_resolvent_at(e, source, &model.point_on_segment(model.nodes[j]))
            .expect("radial quadrature on segment")
    });
    let q = build_segment_q(model, e);
    let l_c = sl.matrix.map(|x| C64::new(x, 0.0));
    let m = l_c + q;
    let lu = m.lu();
    let u_hat = lu.solve(&u_star).ok_or(KreinError::SingularLPlusQ)?;
    Ok(BoundaryData { u_star, u_hat })
}

pub fn boundary_trace(
    model: &SegmentModel,
    sl: &SturmLiouvilleOp,
    e: &Energy,
    source: &SourceSpec,
) -> Result<BoundaryTrace> {
    let data = solve_boundary(model, sl, e, source)?;
    Ok(BoundaryTrace {
        u_f: data.u_hat.map(|v| -v / FOUR_PI),
        u_hat_h: data.u_hat,
    })
}

/// (G(z) u)(p) = int_0^l g(z| |p - (s,0,0)|) u_lin(s) ds via adaptive
/// quadrature of the linear interpolant, graded toward the near point of the
/// segment (the discrete Nystrom sum breaks down once the evaluation point is
/// closer to the segment than the grid spacing).
pub fn single_layer_potential(
    model: &SegmentModel,
    e: &Energy,
    density: &DVector<C64>,
    p: &Vector3<f64>,
) -> Result<C64> {
    let w = e.sqrt_z;
    let i = C64::new(0.0, 1.0);
    let s_star = p.x.clamp(0.0, model.l);
    let rho = (p - Vector3::new(s_star, 0.0, 0.0)).norm();
    let scale = 1.0 + density.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tol = 1e-12 * scale * model.l;
    let integrand = |s: f64| {
        let dist = ((p.x - s) * (p.x - s) + p.y * p.y + p.z * p.z).sqrt();
        (i * w * dist).exp() / (FOUR_PI * dist) * model.interpolate(density, s)
    };
    let floor = (rho / 8.0).max(1e-13);
    let breaks = quad::graded_breaks(0.0, model.l, s_star, floor);
    quad::integrate_split(integrand, 0.0, model.l, &breaks, tol)
}

/// R_L(z)h on a grid of 3D points: R(z)h - G(z) [L + Q(z)]^{-1} G(conj z)^* h.
pub fn apply_r_l(
    model: &SegmentModel,
    sl: &SturmLiouvilleOp,
    e: &Energy,
    source: &SourceSpec,
    eval_points: &[Vector3<f64>],
) -> Result<GridFunction> {
    let data = solve_boundary(model, sl, e, source)?;
    let values: Vec<C64> = eval_points
        .par_iter()
        .map(|p| {
            let free = free_resolvent_at(e, source, p)?;
            let corr = single_layer_potential(model, e, &data.u_hat, p)?;
            Ok(free - corr)
        })
        .collect::<Result<Vec<C64>>>()?;
    Ok(GridFunction::new(
        eval_points.to_vec(),
        values,
        "segment-perturbed resolvent applied to radial source",
    ))
}

fn negative_count(model: &SegmentModel, sl: &SturmLiouvilleOp, kappa: f64) -> usize {
    let q = build_segment_q(model, &Energy::from_kappa(kappa)).map(|v| v.re);
    (sl.matrix.clone() + q)
        .symmetric_eigenvalues()
        .iter()
        .filter(|lam| **lam < 0.0)
        .count()
}

/// Negative spectrum of A_L: z = -kappa^2 is an eigenvalue when an eigenvalue
/// of L + Q(-kappa^2) crosses zero. Q(-kappa^2) decreases monotonically in
/// kappa, so each crossing raises the negative-eigenvalue count by one;
/// bisecting on the count locates all crossings in the range, including ones
/// above the lowest eigenvalue. Returns (kappa, E = -kappa^2) sorted by kappa.
pub fn negative_spectrum(
    model: &SegmentModel,
    sl: &SturmLiouvilleOp,
    kappa_range: [f64; 2],
) -> Vec<(f64, f64)> {
    let [lo, hi] = kappa_range;
    if !(lo < hi) || hi <= 0.0 {
        return Vec::new();
    }
    let lo = lo.max(1e-6);
    let scan_points = 400;
    let step = (hi - lo) / scan_points as f64;
    let mut out = Vec::new();
    let mut prev_k = lo;
    let mut prev_c = negative_count(model, sl, prev_k);
    for idx in 1..=scan_points {
        let k = lo + step * idx as f64;
        let c = negative_count(model, sl, k);
        for target in prev_c..c {
            let (mut a, mut b) = (prev_k, k);
            while b - a > 1e-10 {
                let mid = 0.5 * (a + b);
                if negative_count(model, sl, mid) <= target {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let kappa = 0.5 * (a + b);
            out.push((kappa, -kappa * kappa));
        }
        prev_k = k;
        prev_c = c;
    }
    out
}

/// One evaluation of R_L(z)h off the segment, reusing an existing solve.
pub fn r_l_value(
    model: &SegmentModel,
    e: &Energy,
    data: &BoundaryData,
    source: &SourceSpec,
    p: &Vector3<f64>,
) -> Result<C64> {
    let free = free_resolvent_at(e, source, p)?;
    let corr = single_layer_potential(model, e, &data.u_hat, p)?;
    Ok(free - corr)
}

/// Result of the logarithmic-trace extraction along (x, rho/sqrt2, rho/sqrt2).
#[derive(Debug, Clone)]
pub struct TraceReport {
    /// Extrapolated coefficient of ln(1/rho^2): the trace u_f(x).
    pub u_f_estimate: C64,
    /// (rho, f(rho), raw -f/ln(rho^2)) per requested rho.
    pub raw: Vec<(f64, C64, C64)>,
    /// The Lu_f bracket combination at each rho.
    pub bracket: Vec<C64>,
    /// -u_hat(x)/(4 pi) from the boundary solve (the identity target).
    pub u_f_from_solve: C64,
    /// -4 pi (L u_f)(x): the limit the bracket sequence approaches.
    pub bracket_target: C64,
}

/// Least squares fit of f(rho) to u_f ln(1/rho^2) + b (+ c rho + d rho ln(1/rho^2)),
/// returning the ln coefficient.
fn fit_log_coefficient(rhos: &[f64], fs: &[C64]) -> C64 {
    let n = rhos.len();
    let ncols = 4.min(n);
    let mut a = DMatrix::<C64>::zeros(n, ncols);
    for (r, &rho) in rhos.iter().enumerate() {
        let lg = (1.0 / (rho * rho)).ln();
        a[(r, 0)] = C64::new(lg, 0.0);
        if ncols > 1 {
            a[(r, 1)] = C64::new(1.0, 0.0);
        }
        if ncols > 2 {
            a[(r, 2)] = C64::new(rho, 0.0);
        }
        if ncols > 3 {
            a[(r, 3)] = C64::new(rho * lg, 0.0);
        }
    }
    let y = DVector::from_column_slice(fs);
    let ata = a.adjoint() * &a;
    let aty = a.adjoint() * y;
    let sol = ata.lu().solve(&aty).expect("normal equations solvable");
    sol[0]
}

/// Extracts the boundary trace u_f(x) from samples of f = R_L(z)h approaching
/// the segment along (x, rho/sqrt2, rho/sqrt2), and evaluates the Lu_f bracket
/// at each rho.
pub fn log_boundary_trace(
    model: &SegmentModel,
    sl: &SturmLiouvilleOp,
    e: &Energy,
    source: &SourceSpec,
    x: f64,
    rho_seq: &[f64],
) -> Result<TraceReport> {
    assert!(x > 0.0 && x < model.l, "x must be interior to the segment");
    assert!(
        rho_seq.windows(2).all(|w| w[0] > w[1]) && !rho_seq.is_empty(),
        "rho_seq must be decreasing and nonempty"
    );
    let data = solve_boundary(model, sl, e, source)?;
    let fs: Vec<C64> = rho_seq
        .iter()
        .map(|&rho| {
            let p = Vector3::new(x, rho / 2f64.sqrt(), rho / 2f64.sqrt());
            r_l_value(model, e, &data, source, &p)
        })
        .collect::<Result<Vec<C64>>>()?;

    let u_f_estimate = fit_log_coefficient(rho_seq, &fs);
    if rho_seq.len() >= 3 {
        let alt = fit_log_coefficient(&rho_seq[1..], &fs[1..]);
        let dev = (u_f_estimate - alt).norm();
        if dev > 0.05 * u_f_estimate.norm().max(1e-12) {
            return Err(KreinError::NonConvergentExtrapolation { dev });
        }
    }

    let u_f_grid = data.u_hat.map(|v| -v / FOUR_PI);
    let u_f_at_x = model.interpolate(&u_f_grid, x);
    // derivative of the trace, needed by the bracket integral
    let n = model.n_nodes();
    let du = DVector::from_fn(n, |j, _| {
        let (x0, y0) = if j == 0 {
            (0.0, C64::new(0.0, 0.0))
        } else {
            (model.nodes[j - 1], u_f_grid[j - 1])
        };
        let (x1, y1) = if j + 1 == n {
            (model.l, C64::new(0.0, 0.0))
        } else {
            (model.nodes[j + 1], u_f_grid[j + 1])
        };
        (y1 - y0) / (x1 - x0)
    });
    let log_integral = {
        let integrand = |s: f64| {
            let sign = if s >= x { 1.0 } else { -1.0 };
            model.interpolate(&du, s) * sign * (s - x).abs().ln()
        };
        let breaks = quad::graded_breaks(0.0, model.l, x, 1e-13);
        quad::integrate_split(integrand, 0.0, model.l, &breaks, 1e-10)?
    };
    // f = u_f ln(1/rho^2) + 2 ln2 u_f - int sign(s-x) ln|s-x| u_f'(s) ds
    //     + (L u_hat)(x)/(-4 pi) * (-4 pi) + o(1), so subtracting the
    // logarithmic expansion leaves (L u_hat)(x) = -4 pi (L u_f)(x)
    let two_ln2 = 2.0 * 2f64.ln();
    let bracket: Vec<C64> = rho_seq
        .iter()
        .zip(fs.iter())
        .map(|(&rho, &f)| {
            f - u_f_at_x * (1.0 / (rho * rho)).ln() - u_f_at_x * two_ln2 + log_integral
        })
        .collect();
    // -4 pi (L u_f)(x) at the node nearest x
    let j_near = model
        .nodes
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - x).abs().partial_cmp(&(b.1 - x).abs()).unwrap()
        })
        .map(|(j, _)| j)
        .expect("nonempty grid");
    let l_c = sl.matrix.map(|v| C64::new(v, 0.0));
    let lu_f = (&l_c * &u_f_grid)[j_near];
    let bracket_target = -FOUR_PI * lu_f;
    let raw = rho_seq
        .iter()
        .zip(fs.iter())
        .map(|(&rho, &f)| (rho, f, -f / (rho * rho).ln()))
        .collect();
    Ok(TraceReport {
        u_f_estimate,
        raw,
        bracket,
        u_f_from_solve: u_f_at_x,
        bracket_target,
    })
}

/// Residual of the log-singularity expansion (Lemma on the segment trace):
/// | int_0^l u(s)/sqrt((x-s)^2 + rho^2) ds
///   - [u(x) ln(1/rho^2) + 2 ln2 u(x) - int_0^l sign(s-x) ln|s-x| u'(s) ds] |.
pub fn simp1_residual<U, DU>(u: U, du: DU, l: f64, x: f64, rho: f64) -> Result<f64>
where
    U: Fn(f64) -> f64,
    DU: Fn(f64) -> f64,
{
    assert!(0.0 < x && x < l, "x must be interior");
    assert!(rho > 0.0 && rho < x.min(l - x), "rho must be < min(x, l-x)");
    let near = quad::graded_breaks(0.0, l, x, (rho / 8.0).max(1e-13));
    let lhs = quad::integrate_split(
        |s| C64::new(u(s) / ((x - s) * (x - s) + rho * rho).sqrt(), 0.0),
        0.0,
        l,
        &near,
        1e-11,
    )?
    .re;
    let log_breaks = quad::graded_breaks(0.0, l, x, 1e-13);
    let log_int = quad::integrate_split(
        |s| {
            let sign = if s >= x { 1.0 } else { -1.0 };
            C64::new(sign * (s - x).abs().ln() * du(s), 0.0)
        },
        0.0,
        l,
        &log_breaks,
        1e-11,
    )?
    .re;
    let rhs = u(x) * (1.0 / (rho * rho)).ln() + 2.0 * 2f64.ln() * u(x) - log_int;
    Ok((lhs - rhs).abs())
}
