//! Node vector fields, the inner coupling matrix, the decreasing-condition
//! estimate and a fixed-step fourth-order Runge-Kutta integrator.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::symmetric_eigenvalues;

/// Parameters of the three-dimensional Lorenz-type field
/// `(10(u2 - u1), (8/3) u1 - u2 - u1 u3, u1 u2 - b u3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams {
    pub b: f64,
}

impl LorenzParams {
    pub fn new(b: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Lorenz b must be positive, got {b}"
            )));
        }
        Ok(Self { b })
    }
}

/// A node vector field. New families are added as variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NodeField {
    Lorenz(LorenzParams),
    /// `f(u) = rate * u` in `dim` dimensions.
    Linear {
        rate: f64,
        dim: usize,
    },
}

impl NodeField {
    pub fn dim(&self) -> usize {
        match self {
            NodeField::Lorenz(_) => 3,
            NodeField::Linear { dim, .. } => *dim,
        }
    }

    /// Writes `f(u)` into `out`.
    #[inline]
    pub fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        match *self {
            NodeField::Lorenz(LorenzParams { b }) => {
                out[0] = 10.0 * (u[1] - u[0]);
                out[1] = (8.0 / 3.0) * u[0] - u[1] - u[0] * u[2];
                out[2] = u[0] * u[1] - b * u[2];
            }
            NodeField::Linear { rate, .. } => {
                for (o, &x) in out.iter_mut().zip(u) {
                    *o = rate * x;
                }
            }
        }
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(u, &mut out);
        out
    }
}

/// Symmetric nonnegative-definite inner coupling matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamma {
    matrix: DMatrix<f64>,
    diagonal: Option<Vec<f64>>,
    /// Orthogonal projector onto the null space, if it is nontrivial.
    null_projector: Option<DMatrix<f64>>,
}

impl Gamma {
    pub fn diag(entries: &[f64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_row_slice(entries)))
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n]).expect("identity is valid")
    }

    /// Builds the matrix from its rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(
                "gamma must be a non-empty square matrix".into(),
            ));
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("gamma must be square".into()));
        }
        let n = matrix.nrows();
        for i in 0..n {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("gamma must be symmetric".into()));
                }
            }
        }
        if n > 0 && symmetric_eigenvalues(matrix.clone())?.min() < -1e-12 {
            return Err(Error::InvalidParameter(
                "gamma must be nonnegative definite".into(),
            ));
        }
        let is_diag = (0..n).all(|i| (0..n).all(|j| i == j || matrix[(i, j)] == 0.0));
        let diagonal = is_diag.then(|| (0..n).map(|i| matrix[(i, i)]).collect());
        let null_projector = if n == 0 {
            None
        } else {
            let eig = SymmetricEigen::new(matrix.clone());
            let scale = eig.eigenvalues.amax().max(1.0);
            let mut p = DMatrix::zeros(n, n);
            let mut rank = 0;
            for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
                if lambda.abs() <= 1e-12 * scale {
                    let v = eig.eigenvectors.column(k);
                    p += v * v.transpose();
                    rank += 1;
                }
            }
            (rank > 0).then_some(p)
        };
        Ok(Self {
            matrix,
            diagonal,
            null_projector,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Projection of `v` onto the null space of the matrix, or `None` when
    /// the matrix is nonsingular.
    pub fn null_component(&self, v: &[f64]) -> Option<Vec<f64>> {
        self.null_projector.as_ref().map(|p| {
            let n = self.dim();
            (0..n)
                .map(|r| (0..n).map(|c| p[(r, c)] * v[c]).sum())
                .collect()
        })
    }

    /// `out = Gamma v`.
    #[inline]
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        match &self.diagonal {
            Some(diag) => {
                for ((o, &g), &x) in out.iter_mut().zip(diag).zip(v) {
                    *o = g * x;
                }
            }
            None => {
                let n = self.dim();
                for (r, o) in out.iter_mut().enumerate().take(n) {
                    *o = (0..n).map(|c| self.matrix[(r, c)] * v[c]).sum();
                }
            }
        }
    }

    /// `a^T Gamma b`.
    #[inline]
    pub fn form(&self, a: &[f64], b: &[f64]) -> f64 {
        match &self.diagonal {
            Some(diag) => diag.iter().zip(a).zip(b).map(|((g, x), y)| g * x * y).sum(),
            None => {
                let n = self.dim();
                (0..n)
                    .map(|r| a[r] * (0..n).map(|c| self.matrix[(r, c)] * b[c]).sum::<f64>())
                    .sum()
            }
        }
    }
}

/// One field per cluster and a shared inner coupling matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDynamics {
    pub fields: Vec<NodeField>,
    pub gamma: Gamma,
}

impl NodeDynamics {
    pub fn new(fields: Vec<NodeField>, gamma: Gamma) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one field is required".into(),
            ));
        }
        let n = gamma.dim();
        if let Some(f) = fields.iter().find(|f| f.dim() != n) {
            return Err(Error::Dimension(format!(
                "field of dimension {} with gamma of dimension {n}",
                f.dim()
            )));
        }
        Ok(Self { fields, gamma })
    }

    /// Lorenz-type fields with the given `b` per cluster and the given
    /// diagonal inner coupling.
    pub fn lorenz(b: &[f64], gamma_diag: &[f64]) -> Result<Self> {
        let fields = b
            .iter()
            .map(|&b| LorenzParams::new(b).map(NodeField::Lorenz))
            .collect::<Result<Vec<_>>>()?;
        Self::new(fields, Gamma::diag(gamma_diag)?)
    }

    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }

    pub fn n_clusters(&self) -> usize {
        self.fields.len()
    }
}

/// Axis-aligned box `lo <= u <= hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn cube(n: usize, half_width: f64) -> Self {
        Self {
            lo: vec![-half_width; n],
            hi: vec![half_width; n],
        }
    }

    /// Box around observed extents, widened by `fraction` of the half-width
    /// on each side (minimum half-width `1e-3`).
    pub fn expanded(lo: &[f64], hi: &[f64], fraction: f64) -> Self {
        let (mut out_lo, mut out_hi) = (Vec::new(), Vec::new());
        for (&a, &b) in lo.iter().zip(hi) {
            let center = 0.5 * (a + b);
            let half = (0.5 * (b - a)).max(1e-3) * (1.0 + fraction);
            out_lo.push(center - half);
            out_hi.push(center + half);
        }
        Self {
            lo: out_lo,
            hi: out_hi,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.iter()
            .zip(&self.lo)
            .zip(&self.hi)
            .all(|((&x, &a), &b)| a <= x && x <= b)
    }

    fn validate(&self) -> Result<()> {
        if self.lo.len() != self.hi.len()
            || self
                .lo
                .iter()
                .zip(&self.hi)
                .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
        {
            return Err(Error::InvalidParameter(
                "region must be a bounded, non-degenerate box".into(),
            ));
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        for ((o, &a), &b) in out.iter_mut().zip(&self.lo).zip(&self.hi) {
            *o = rng.random_range(a..=b);
        }
    }
}

/// Default margin `delta` in the decreasing condition.
pub const DEFAULT_DELTA: f64 = 0.1;
/// Relative safety margin added to the sampled supremum.
pub const ALPHA_MARGIN: f64 = 0.1;
/// Default number of sampled pairs.
pub const DEFAULT_ALPHA_SAMPLES: usize = 200_000;
/// Independent random streams used by the sampler; fixed so results do not
/// depend on the number of worker threads.
const SAMPLER_CHUNKS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecreasingEstimate {
    /// Reported value: supremum plus the safety margin.
    pub alpha: f64,
    /// Largest sampled requirement before the margin.
    pub alpha_raw: f64,
    pub delta: f64,
    pub region: Region,
    pub samples: usize,
}

/// Draws a pair in `region`: even-indexed draws are two independent uniform
/// points, odd-indexed draws are a uniform point and a neighbour at a
/// log-uniform distance in `[1e-3, 1]`.
fn sample_pair<R: Rng>(
    region: &Region,
    index: usize,
    rng: &mut R,
    xi: &mut [f64],
    zeta: &mut [f64],
) {
    let n = region.dim();
    region.sample(rng, xi);
    if index.is_multiple_of(2) {
        region.sample(rng, zeta);
        return;
    }
    loop {
        let mut norm = 0.0;
        for z in zeta.iter_mut() {
            *z = rng.random_range(-1.0..=1.0);
            norm += *z * *z;
        }
        if !(1e-12..=1.0).contains(&norm) {
            continue;
        }
        let radius = 10f64.powf(rng.random_range(-3.0..=0.0)) / norm.sqrt();
        for k in 0..n {
            zeta[k] = xi[k] + radius * zeta[k];
        }
        if region.contains(zeta) {
            return;
        }
        region.sample(rng, xi);
    }
}

#[derive(Default, Clone, Copy)]
struct Extremum {
    required: f64,
    unbounded: Option<(f64, f64)>,
}

/// Smallest `alpha` with
/// `(xi - zeta)^T [f_k(xi) - f_k(zeta) - alpha Gamma (xi - zeta)] <= -delta |xi - zeta|^2`
/// over sampled pairs in `region` and all clusters, plus a 10% margin.
/// The sampler is split into fixed ChaCha8 streams, one per chunk, so the
/// result depends only on `seed`.
pub fn estimate_alpha(
    dynamics: &NodeDynamics,
    region: &Region,
    samples: usize,
    seed: u64,
    delta: f64,
) -> Result<DecreasingEstimate> {
    region.validate()?;
    if region.dim() != dynamics.dim() {
        return Err(Error::Dimension(
            "region and dynamics dimensions differ".into(),
        ));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter(
            "at least one sample is required".into(),
        ));
    }
    let n = dynamics.dim();
    let per_chunk = samples.div_ceil(SAMPLER_CHUNKS as usize);
    let result = (0..SAMPLER_CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let start = chunk as usize * per_chunk;
            let end = (start + per_chunk).min(samples);
            let (mut xi, mut zeta) = (vec![0.0; n], vec![0.0; n]);
            let (mut fx, mut fz, mut e) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            let mut ext = Extremum {
                required: f64::NEG_INFINITY,
                unbounded: None,
            };
            for index in start..end {
                sample_pair(region, index, &mut rng, &mut xi, &mut zeta);
                for k in 0..n {
                    e[k] = xi[k] - zeta[k];
                }
                let e2: f64 = e.iter().map(|v| v * v).sum();
                if e2 == 0.0 {
                    continue;
                }
                // displacement along uncoupled directions only: any positive
                // requirement there cannot be compensated by alpha
                if ext.unbounded.is_none() {
                    if let Some(e0) = dynamics.gamma.null_component(&e) {
                        let n0: f64 = e0.iter().map(|v| v * v).sum();
                        let moved: Vec<f64> = xi.iter().zip(&e0).map(|(a, b)| a - b).collect();
                        if n0 > 0.0 && region.contains(&moved) {
                            for field in &dynamics.fields {
                                field.eval_into(&xi, &mut fx);
                                field.eval_into(&moved, &mut fz);
                                let num: f64 = e0
                                    .iter()
                                    .zip(fx.iter().zip(&fz))
                                    .map(|(ek, (a, b))| ek * (a - b))
                                    .sum::<f64>()
                                    + delta * n0;
                                if num > 0.0 {
                                    ext.unbounded = Some((num, n0));
                                    break;
                                }
                            }
                        }
                    }
                }
                let coupled = dynamics.gamma.form(&e, &e);
                for field in &dynamics.fields {
                    field.eval_into(&xi, &mut fx);
                    field.eval_into(&zeta, &mut fz);
                    let num: f64 = e
                        .iter()
                        .zip(fx.iter().zip(&fz))
                        .map(|(ek, (a, b))| ek * (a - b))
                        .sum::<f64>()
                        + delta * e2;
                    if coupled > 1e-12 * e2 {
                        ext.required = ext.required.max(num / coupled);
                    } else if num > 0.0 && ext.unbounded.is_none() {
                        ext.unbounded = Some((num, e2));
                    }
                }
            }
            ext
        })
        .reduce(
            || Extremum {
                required: f64::NEG_INFINITY,
                unbounded: None,
            },
            |a, b| Extremum {
                required: a.required.max(b.required),
                unbounded: a.unbounded.or(b.unbounded),
            },
        );
    if let Some((num, e2)) = result.unbounded {
        return Err(Error::DecreasingConditionUnbounded(format!(
            "a pair with separation^2 {e2:e} orthogonal to the coupled directions has a positive \
             requirement {num:e}; no finite alpha satisfies the condition"
        )));
    }
    let raw = result.required;
    Ok(DecreasingEstimate {
        alpha: raw + ALPHA_MARGIN * raw.abs(),
        alpha_raw: raw,
        delta,
        region: region.clone(),
        samples,
    })
}

/// Classical four-stage Runge-Kutta step for an autonomous system, with
/// reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            stage: vec![0.0; dim],
        }
    }

    /// Advances `x` by `h`; `t` is only used for error reporting.
    pub fn step<F>(&mut self, f: &mut F, x: &mut [f64], h: f64, t: f64) -> Result<()>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let n = x.len();
        f(x, &mut self.k1);
        check_finite(&self.k1, t)?;
        for i in 0..n {
            self.stage[i] = x[i] + 0.5 * h * self.k1[i];
        }
        f(&self.stage, &mut self.k2);
        check_finite(&self.k2, t)?;
        for i in 0..n {
            self.stage[i] = x[i] + 0.5 * h * self.k2[i];
        }
        f(&self.stage, &mut self.k3);
        check_finite(&self.k3, t)?;
        for i in 0..n {
            self.stage[i] = x[i] + h * self.k3[i];
        }
        f(&self.stage, &mut self.k4);
        check_finite(&self.k4, t)?;
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

fn check_finite(v: &[f64], t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(t))
    }
}

/// One RK4 step of size `h` from `x`, returning the new state.
pub fn rk4_step<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step must be positive, got {h}"
        )));
    }
    let mut out = x.to_vec();
    Rk4::new(x.len()).step(&mut f, &mut out, h, 0.0)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lorenz(b: f64) -> NodeField {
        NodeField::Lorenz(LorenzParams::new(b).unwrap())
    }

    #[test]
    fn field_examples() {
        assert_eq!(lorenz(28.0).eval(&[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        let v = lorenz(28.0).eval(&[1.0, 1.0, 1.0]);
        assert_eq!(v[0], 0.0);
        assert_relative_eq!(v[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(v[2], -27.0);
        let v = lorenz(38.0).eval(&[1.0, 0.0, 0.0]);
        assert_eq!(v[0], -10.0);
        assert_relative_eq!(v[1], 8.0 / 3.0, epsilon = 1e-15);
        assert_eq!(v[2], 0.0);
        assert!(LorenzParams::new(0.0).is_err());
    }

    #[test]
    fn gamma_validation() {
        assert!(Gamma::diag(&[1.0, 1.0, 0.0]).is_ok());
        assert!(Gamma::diag(&[1.0, -1.0]).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(Gamma::from_matrix(asym).is_err());
        let full =
            Gamma::from_matrix(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let mut out = [0.0; 2];
        full.apply(&[1.0, -1.0], &mut out);
        assert_eq!(out, [1.0, -1.0]);
        assert_eq!(full.form(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
    }

    #[test]
    fn alpha_linear_examples() {
        let region = Region::cube(3, 5.0);
        let contracting = NodeDynamics::new(
            vec![NodeField::Linear { rate: -1.0, dim: 3 }],
            Gamma::identity(3),
        )
        .unwrap();
        let est = estimate_alpha(&contracting, &region, 2000, 1, 0.1).unwrap();
        assert!(est.alpha <= 0.0);

        let expanding = NodeDynamics::new(
            vec![NodeField::Linear { rate: 2.0, dim: 3 }],
            Gamma::identity(3),
        )
        .unwrap();
        let est = estimate_alpha(&expanding, &region, 2000, 1, 0.1).unwrap();
        assert_relative_eq!(est.alpha_raw, 2.1, epsilon = 1e-12);
        assert_relative_eq!(est.alpha, 2.31, epsilon = 1e-12);
    }

    #[test]
    fn alpha_unbounded_is_reported() {
        let d = NodeDynamics::new(
            vec![NodeField::Linear { rate: 1.0, dim: 2 }],
            Gamma::diag(&[1.0, 0.0]).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            estimate_alpha(&d, &Region::cube(2, 1.0), 1000, 3, 0.1),
            Err(Error::DecreasingConditionUnbounded(_))
        ));
    }

    #[test]
    fn alpha_is_deterministic() {
        let d = NodeDynamics::lorenz(&[28.0, 38.0, 58.0], &[1.0, 1.0, 0.0]).unwrap();
        let r = Region::cube(3, 20.0);
        let a = estimate_alpha(&d, &r, 5000, 9, 0.1).unwrap();
        let b = estimate_alpha(&d, &r, 5000, 9, 0.1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rk4_examples() {
        let x = rk4_step(|_, out| out.fill(0.0), &[1.5, -2.0], 0.1).unwrap();
        assert_eq!(x, vec![1.5, -2.0]);
        let x = rk4_step(|u, out| out[0] = -u[0], &[1.0], 0.01).unwrap();
        assert!((x[0] - (-0.01f64).exp()).abs() <= 1e-10);
        assert!(rk4_step(|_, out| out[0] = f64::NAN, &[1.0], 0.01).is_err());
        assert!(rk4_step(|_, out| out[0] = 0.0, &[1.0], 0.0).is_err());
    }
}
