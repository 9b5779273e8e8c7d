//! Convex local losses, exact centralized oracles, and the primal update
//! primitives shared by every solver.
//!
//! A [`ProblemInstance`] splits a regression dataset across `N` workers.
//! Worker `n` owns a design matrix `A_n` (`m_n x d`) and targets `y_n`, and
//! its local loss is
//!
//! ```text
//! least-squares:  f_n(t) = 1/2 ||A_n t - y_n||^2
//! ridge:          f_n(t) = 1/2 ||A_n t - y_n||^2 + mu/2 ||t||^2
//! logistic:       f_n(t) = sum_i [ln(1 + exp(z_i)) - y_i z_i] + mu/2 ||t||^2,  z = A_n t
//! ```
//!
//! Losses use the 1/2 ||.||^2 convention without 1/m averaging, so ADMM
//! penalty values transfer across shard sizes. The regularizer is applied
//! per shard: the pooled single-worker equivalent of an N-shard instance
//! carries N*mu.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Dense model iterate; all solvers operate on length-`d` real vectors.
pub type ModelVector = DVector<f64>;

/// Real-valued dual variable attached to a consensus constraint.
pub type DualVector = DVector<f64>;

/// Loss family of the local objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    LeastSquares,
    Ridge,
    Logistic,
}

impl LossKind {
    fn is_quadratic(self) -> bool {
        matches!(self, LossKind::LeastSquares | LossKind::Ridge)
    }
}

/// One worker's data shard with cached Gram products for quadratic losses.
#[derive(Debug, Clone)]
pub struct Shard {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    gram: DMatrix<f64>, // A^T A
    aty: DVector<f64>,  // A^T y
    yty: f64,
}

impl Shard {
    fn new(a: DMatrix<f64>, y: DVector<f64>) -> Self {
        let gram = a.transpose() * &a;
        let aty = a.transpose() * &y;
        let yty = y.dot(&y);
        Shard { a, y, gram, aty, yty }
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }
}

/// A convex regression problem sharded across `N` workers.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    shards: Vec<Shard>,
    dim: usize,
    loss: LossKind,
    mu: f64,
}

impl ProblemInstance {
    /// Builds an instance from per-worker `(A_n, y_n)` shards.
    ///
    /// Every shard must have at least one row, exactly `dim` columns, finite
    /// entries, and `mu >= 0` (`mu == 0` is required for plain least squares).
    pub fn new(
        shards: Vec<(DMatrix<f64>, DVector<f64>)>,
        loss: LossKind,
        mu: f64,
    ) -> Result<Self> {
        if shards.is_empty() {
            return Err(Error::invalid("problem needs at least one worker shard"));
        }
        if !(mu >= 0.0) {
            return Err(Error::invalid(format!("regularizer mu must be >= 0, got {mu}")));
        }
        if loss == LossKind::LeastSquares && mu != 0.0 {
            return Err(Error::invalid("least-squares loss requires mu = 0; use ridge"));
        }
        let dim = shards[0].0.ncols();
        if dim == 0 {
            return Err(Error::invalid("model dimension must be positive"));
        }
        let mut built = Vec::with_capacity(shards.len());
        for (n, (a, y)) in shards.into_iter().enumerate() {
            if a.nrows() == 0 {
                return Err(Error::invalid(format!("shard {n} has no rows")));
            }
            if a.ncols() != dim {
                return Err(Error::invalid(format!(
                    "shard {n} has {} columns, expected {dim}",
                    a.ncols()
                )));
            }
            if a.nrows() != y.len() {
                return Err(Error::invalid(format!(
                    "shard {n}: {} rows vs {} targets",
                    a.nrows(),
                    y.len()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("shard {n} contains non-finite entries")));
            }
            built.push(Shard::new(a, y));
        }
        Ok(ProblemInstance { shards: built, dim, loss, mu })
    }

    pub fn num_workers(&self) -> usize {
        self.shards.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn shard(&self, worker: usize) -> &Shard {
        &self.shards[worker]
    }

    /// Trace of the shard's Gram matrix `A_n' A_n`; an upper bound on its
    /// spectral norm used to derive safe gradient-descent step sizes.
    pub fn gram_trace(&self, worker: usize) -> f64 {
        self.shards[worker].gram.trace()
    }

    fn check_args(&self, worker: usize, theta: &ModelVector) -> Result<()> {
        if worker >= self.shards.len() {
            return Err(Error::invalid(format!(
                "worker id {worker} out of range (N = {})",
                self.shards.len()
            )));
        }
        if theta.len() != self.dim {
            return Err(Error::invalid(format!(
                "model has dimension {}, expected {}",
                theta.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Local loss `f_n(theta)`.
    pub fn local_loss(&self, worker: usize, theta: &ModelVector) -> Result<f64> {
        self.check_args(worker, theta)?;
        let s = &self.shards[worker];
        let reg = 0.5 * self.mu * theta.dot(theta);
        let v = match self.loss {
            LossKind::LeastSquares | LossKind::Ridge => {
                // 1/2 t'Gt - t'A'y + 1/2 y'y via the cached Gram products
                0.5 * theta.dot(&(&s.gram * theta)) - theta.dot(&s.aty) + 0.5 * s.yty + reg
            }
            LossKind::Logistic => {
                let z = &s.a * theta;
                let mut acc = reg;
                for (zi, yi) in z.iter().zip(s.y.iter()) {
                    // ln(1 + e^z) - y z, evaluated stably
                    acc += zi.max(0.0) + (-zi.abs()).exp().ln_1p() - yi * zi;
                }
                acc
            }
        };
        Ok(v)
    }

    /// Local gradient `grad f_n(theta)`.
    pub fn local_gradient(&self, worker: usize, theta: &ModelVector) -> Result<ModelVector> {
        self.check_args(worker, theta)?;
        let s = &self.shards[worker];
        let g = match self.loss {
            LossKind::LeastSquares | LossKind::Ridge => &s.gram * theta - &s.aty + self.mu * theta,
            LossKind::Logistic => {
                let z = &s.a * theta;
                let resid = DVector::from_iterator(
                    z.len(),
                    z.iter().zip(s.y.iter()).map(|(zi, yi)| sigmoid(*zi) - yi),
                );
                s.a.transpose() * resid + self.mu * theta
            }
        };
        Ok(g)
    }

    /// Global objective `F(theta) = sum_n f_n(theta)`.
    pub fn global_loss(&self, theta: &ModelVector) -> Result<f64> {
        let mut acc = 0.0;
        for n in 0..self.shards.len() {
            acc += self.local_loss(n, theta)?;
        }
        Ok(acc)
    }

    /// Global gradient `sum_n grad f_n(theta)`.
    pub fn global_gradient(&self, theta: &ModelVector) -> Result<ModelVector> {
        let mut acc = DVector::zeros(self.dim);
        for n in 0..self.shards.len() {
            acc += self.local_gradient(n, theta)?;
        }
        Ok(acc)
    }

    /// Exact minimizer of the global objective.
    ///
    /// Quadratic losses solve the stacked normal equations
    /// `(sum A' A + N mu I) t = sum A' y`; a rank-deficient system with
    /// `mu = 0` is reported as [`Error::SingularSystem`]. The logistic loss
    /// runs damped Newton to gradient infinity-norm `1e-10`.
    pub fn centralized_solution(&self) -> Result<ModelVector> {
        match self.loss {
            LossKind::LeastSquares | LossKind::Ridge => {
                let n = self.shards.len() as f64;
                let mut h = DMatrix::<f64>::zeros(self.dim, self.dim);
                let mut rhs = DVector::<f64>::zeros(self.dim);
                for s in &self.shards {
                    h += &s.gram;
                    rhs += &s.aty;
                }
                for i in 0..self.dim {
                    h[(i, i)] += n * self.mu;
                }
                let chol = h.cholesky().ok_or(Error::SingularSystem)?;
                Ok(chol.solve(&rhs))
            }
            LossKind::Logistic => {
                let theta0 = DVector::zeros(self.dim);
                newton_minimize(
                    self.dim,
                    |t| self.global_loss(t).expect("dimension checked"),
                    |t| self.global_gradient(t).expect("dimension checked"),
                    |t| {
                        let mut h = DMatrix::<f64>::zeros(self.dim, self.dim);
                        for s in &self.shards {
                            accumulate_logistic_hessian(s, t, &mut h);
                        }
                        let n = self.shards.len() as f64;
                        for i in 0..self.dim {
                            h[(i, i)] += n * self.mu;
                        }
                        h
                    },
                    theta0,
                    NEWTON_GRAD_TOL,
                )
            }
        }
    }

    /// Exact minimizer of a local augmented-Lagrangian subproblem:
    ///
    /// ```text
    /// argmin_t  f_n(t) + sum_j <c_j, t> + rho/2 sum_j w_j ||t - v_j||^2
    /// ```
    ///
    /// Each [`ProxTerm`] carries the (already signed) linear coefficient
    /// `c_j`, the proximity anchor `v_j`, and a nonnegative weight `w_j`
    /// multiplying `rho` (1 for plain consensus edges; `|h|^2` for
    /// fading-weighted constraints). Quadratic losses reduce to one `d x d`
    /// solve; the logistic loss runs Newton to gradient norm `1e-10`.
    pub fn prox_update(
        &self,
        worker: usize,
        terms: &[ProxTerm],
        rho: f64,
    ) -> Result<ModelVector> {
        if !(rho > 0.0) {
            return Err(Error::invalid(format!("rho must be positive, got {rho}")));
        }
        if worker >= self.shards.len() {
            return Err(Error::invalid(format!("worker id {worker} out of range")));
        }
        for t in terms {
            if t.linear.len() != self.dim || t.anchor.len() != self.dim {
                return Err(Error::invalid("prox term dimension mismatch"));
            }
            if !(t.weight >= 0.0) {
                return Err(Error::invalid("prox term weight must be >= 0"));
            }
        }
        let s = &self.shards[worker];
        let total_weight: f64 = terms.iter().map(|t| t.weight).sum();
        // rhs pieces shared by both loss families
        let mut linear = DVector::<f64>::zeros(self.dim);
        let mut anchor_sum = DVector::<f64>::zeros(self.dim);
        for t in terms {
            linear += &t.linear;
            anchor_sum += t.weight * &t.anchor;
        }

        if self.loss.is_quadratic() {
            let mut h = s.gram.clone();
            let shift = self.mu + rho * total_weight;
            for i in 0..self.dim {
                h[(i, i)] += shift;
            }
            let rhs = &s.aty - &linear + rho * &anchor_sum;
            if let Some(chol) = h.clone().cholesky() {
                return Ok(chol.solve(&rhs));
            }
            // PSD + zero shift can defeat Cholesky; fall back to LU
            h.lu().solve(&rhs).ok_or(Error::SingularSystem)
        } else {
            let mu = self.mu;
            let dim = self.dim;
            let obj = |t: &ModelVector| {
                let base = self.local_loss(worker, t).expect("dimension checked");
                let mut acc = base + linear.dot(t);
                for term in terms {
                    let diff = t - &term.anchor;
                    acc += 0.5 * rho * term.weight * diff.dot(&diff);
                }
                acc
            };
            let grad = |t: &ModelVector| {
                let mut g = self.local_gradient(worker, t).expect("dimension checked");
                g += &linear;
                g += rho * total_weight * t - rho * &anchor_sum;
                g
            };
            let hess = |t: &ModelVector| {
                let mut h = DMatrix::<f64>::zeros(dim, dim);
                accumulate_logistic_hessian(s, t, &mut h);
                let shift = mu + rho * total_weight;
                for i in 0..dim {
                    h[(i, i)] += shift;
                }
                h
            };
            newton_minimize(dim, obj, grad, hess, DVector::zeros(dim), NEWTON_GRAD_TOL)
        }
    }
}

/// One linear-plus-proximity term of an augmented-Lagrangian subproblem.
#[derive(Debug, Clone)]
pub struct ProxTerm {
    /// Coefficient of the `<c, t>` term (dual variable with edge sign applied).
    pub linear: DVector<f64>,
    /// Proximity anchor `v` of the `rho w/2 ||t - v||^2` term.
    pub anchor: DVector<f64>,
    /// Nonnegative multiplier of `rho` (1 for plain edges).
    pub weight: f64,
}

impl ProxTerm {
    pub fn consensus(linear: DVector<f64>, anchor: DVector<f64>) -> Self {
        ProxTerm { linear, anchor, weight: 1.0 }
    }
}

const NEWTON_GRAD_TOL: f64 = 1e-10;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn accumulate_logistic_hessian(s: &Shard, theta: &ModelVector, h: &mut DMatrix<f64>) {
    let z = &s.a * theta;
    for (i, zi) in z.iter().enumerate() {
        let p = sigmoid(*zi);
        let w = p * (1.0 - p);
        let row = s.a.row(i);
        for r in 0..h.nrows() {
            for c in 0..h.ncols() {
                h[(r, c)] += w * row[r] * row[c];
            }
        }
    }
}

/// Damped Newton with Armijo backtracking; returns once the gradient
/// infinity-norm drops to `tol`.
fn newton_minimize(
    dim: usize,
    obj: impl Fn(&ModelVector) -> f64,
    grad: impl Fn(&ModelVector) -> ModelVector,
    hess: impl Fn(&ModelVector) -> DMatrix<f64>,
    mut theta: ModelVector,
    tol: f64,
) -> Result<ModelVector> {
    for _ in 0..200 {
        let g = grad(&theta);
        if g.amax() <= tol {
            return Ok(theta);
        }
        let h = hess(&theta);
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => h.lu().solve(&g).ok_or(Error::SingularSystem)?,
        };
        let f0 = obj(&theta);
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta - t * &step;
            if obj(&cand) <= f0 - 0.25 * t * slope {
                theta = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // gradient is tiny in the step direction; we are at numerical optimum
            return Ok(theta);
        }
        let _ = dim;
    }
    Ok(theta)
}

// ── Synthetic generation and CSV ingestion ──────────────────────────────

/// Parameters of the synthetic data generator: Gaussian features scaled per
/// column, a planted model, and additive Gaussian target noise.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub workers: usize,
    pub dim: usize,
    pub rows_per_worker: usize,
    pub noise_sigma: f64,
    /// Column scales span `10^feature_decades` from first to last feature,
    /// controlling the condition number of the stacked Gram matrix.
    pub feature_decades: f64,
    pub loss: LossKind,
    pub mu: f64,
}

/// Draws a synthetic sharded problem. Deterministic given the RNG stream.
pub fn generate_synthetic(spec: &SyntheticSpec, rng: &mut impl Rng) -> Result<ProblemInstance> {
    if spec.workers == 0 || spec.dim == 0 || spec.rows_per_worker == 0 {
        return Err(Error::invalid("synthetic spec requires positive workers/dim/rows"));
    }
    let d = spec.dim;
    let scales: Vec<f64> = (0..d)
        .map(|j| {
            if d == 1 {
                1.0
            } else {
                10f64.powf(spec.feature_decades * j as f64 / (d - 1) as f64)
            }
        })
        .collect();
    let planted = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut shards = Vec::with_capacity(spec.workers);
    for _ in 0..spec.workers {
        let a = DMatrix::from_fn(spec.rows_per_worker, d, |_, j| {
            scales[j] * rng.sample::<f64, _>(StandardNormal)
        });
        let clean = &a * &planted;
        let y = match spec.loss {
            LossKind::LeastSquares | LossKind::Ridge => DVector::from_fn(spec.rows_per_worker, |i, _| {
                clean[i] + spec.noise_sigma * rng.sample::<f64, _>(StandardNormal)
            }),
            LossKind::Logistic => DVector::from_fn(spec.rows_per_worker, |i, _| {
                let p = sigmoid(clean[i]);
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }),
        };
        shards.push((a, y));
    }
    ProblemInstance::new(shards, spec.loss, spec.mu)
}

/// Loads one shard per CSV file (header-less rows of `d` features followed by
/// the target in the last column).
pub fn load_shards_per_file<P: AsRef<Path>>(
    paths: &[P],
    loss: LossKind,
    mu: f64,
) -> Result<ProblemInstance> {
    let mut shards = Vec::with_capacity(paths.len());
    for p in paths {
        let text = std::fs::read_to_string(p)?;
        let rows = parse_rows(&text, p.as_ref())?;
        shards.push(rows_to_shard(rows, p.as_ref())?);
    }
    ProblemInstance::new(shards, loss, mu)
}

/// Loads all shards from a single CSV whose first column is the worker id.
pub fn load_shards_single_file<P: AsRef<Path>>(
    path: P,
    loss: LossKind,
    mu: f64,
) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(&path)?;
    let rows = parse_rows(&text, path.as_ref())?;
    let mut per_worker: Vec<Vec<Vec<f64>>> = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() < 3 {
            return Err(Error::invalid(format!(
                "{}: row {i} needs worker id, at least one feature, and a target",
                path.as_ref().display()
            )));
        }
        let wid = row[0];
        if wid < 0.0 || wid.fract() != 0.0 {
            return Err(Error::invalid(format!(
                "{}: row {i} worker id {wid} is not a nonnegative integer",
                path.as_ref().display()
            )));
        }
        let wid = wid as usize;
        if per_worker.len() <= wid {
            per_worker.resize_with(wid + 1, Vec::new);
        }
        per_worker[wid].push(row[1..].to_vec());
    }
    let mut shards = Vec::with_capacity(per_worker.len());
    for (wid, rows) in per_worker.into_iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::invalid(format!("worker {wid} has no rows")));
        }
        shards.push(rows_to_shard(rows, path.as_ref())?);
    }
    ProblemInstance::new(shards, loss, mu)
}

fn parse_rows(text: &str, path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match row {
            Ok(r) => rows.push(r),
            Err(e) => {
                return Err(Error::invalid(format!(
                    "{}:{}: {e}",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::invalid(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

fn rows_to_shard(rows: Vec<Vec<f64>>, path: &Path) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let width = rows[0].len();
    if width < 2 {
        return Err(Error::invalid(format!(
            "{}: rows need at least one feature and a target",
            path.display()
        )));
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::invalid(format!("{}: ragged rows", path.display())));
    }
    let d = width - 1;
    let m = rows.len();
    let a = DMatrix::from_fn(m, d, |i, j| rows[i][j]);
    let y = DVector::from_fn(m, |i, _| rows[i][d]);
    Ok((a, y))
}

/// FNV-1a hash of the full problem data; recorded in every trace so
/// cross-variant comparisons can refuse mismatched problems.
pub fn problem_hash(p: &ProblemInstance) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(&[match p.loss {
        LossKind::LeastSquares => 0u8,
        LossKind::Ridge => 1,
        LossKind::Logistic => 2,
    }]);
    eat(&p.mu.to_le_bytes());
    eat(&(p.num_workers() as u64).to_le_bytes());
    eat(&(p.dim() as u64).to_le_bytes());
    for n in 0..p.num_workers() {
        let s = p.shard(n);
        eat(&(s.rows() as u64).to_le_bytes());
        for v in s.a.iter() {
            eat(&v.to_le_bytes());
        }
        for v in s.y.iter() {
            eat(&v.to_le_bytes());
        }
    }
    let mut out = String::with_capacity(16);
    write!(out, "{h:016x}").expect("infallible");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(a: DMatrix<f64>, y: DVector<f64>, loss: LossKind, mu: f64) -> ProblemInstance {
        ProblemInstance::new(vec![(a, y)], loss, mu).unwrap()
    }

    fn random_problem(
        rng: &mut ChaCha8Rng,
        workers: usize,
        dim: usize,
        rows: usize,
        loss: LossKind,
        mu: f64,
    ) -> ProblemInstance {
        generate_synthetic(
            &SyntheticSpec {
                workers,
                dim,
                rows_per_worker: rows,
                noise_sigma: 0.3,
                feature_decades: 0.0,
                loss,
                mu,
            },
            rng,
        )
        .unwrap()
    }

    #[test]
    fn loss_exact_fit_is_zero() {
        let p = single(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, 2.0]),
            LossKind::LeastSquares,
            0.0,
        );
        let v = p.local_loss(0, &DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn loss_half_norm_squared() {
        let p = single(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            LossKind::LeastSquares,
            0.0,
        );
        let v = p.local_loss(0, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn loss_matches_scalar_loop_oracle() {
        // random 4x3 shard evaluated at zero: 1/2 ||y||^2, and at random
        // points against an index-by-index re-evaluation
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = DMatrix::from_fn(4, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let p = single(a.clone(), y.clone(), LossKind::LeastSquares, 0.0);

        let at_zero = p.local_loss(0, &DVector::zeros(3)).unwrap();
        let half_ysq: f64 = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
        assert!((at_zero - half_ysq).abs() < 1e-12);

        for _ in 0..50 {
            let theta = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut oracle = 0.0;
            for i in 0..4 {
                let mut r = -y[i];
                for j in 0..3 {
                    r += a[(i, j)] * theta[j];
                }
                oracle += 0.5 * r * r;
            }
            let got = p.local_loss(0, &theta).unwrap();
            assert!((got - oracle).abs() < 1e-10, "got {got}, oracle {oracle}");
        }
    }

    #[test]
    fn loss_dimension_mismatch_rejected() {
        let p = single(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            LossKind::LeastSquares,
            0.0,
        );
        assert!(matches!(
            p.local_loss(0, &DVector::zeros(3)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            p.local_loss(5, &DVector::zeros(2)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn gradient_zero_at_exact_fit() {
        let p = single(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![1.0, 2.0]),
            LossKind::LeastSquares,
            0.0,
        );
        let g = p.local_gradient(0, &DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_eq!(g.amax(), 0.0);
    }

    #[test]
    fn gradient_of_half_norm_is_identity() {
        let p = single(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            LossKind::LeastSquares,
            0.0,
        );
        let g = p.local_gradient(0, &DVector::from_vec(vec![3.0, -1.0])).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-15 && (g[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        // finite-difference oracle, h = 1e-6, across losses and 100 points
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for loss in [LossKind::LeastSquares, LossKind::Ridge, LossKind::Logistic] {
            let mu = if loss == LossKind::LeastSquares { 0.0 } else { 0.2 };
            let p = random_problem(&mut rng, 2, 4, 6, loss, mu);
            for _ in 0..50 {
                let theta = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
                let g = p.local_gradient(0, &theta).unwrap();
                let h = 1e-6;
                for j in 0..4 {
                    let mut up = theta.clone();
                    let mut dn = theta.clone();
                    up[j] += h;
                    dn[j] -= h;
                    let fd = (p.local_loss(0, &up).unwrap() - p.local_loss(0, &dn).unwrap())
                        / (2.0 * h);
                    let scale = 1.0f64.max(g[j].abs());
                    assert!(
                        (g[j] - fd).abs() / scale < 1e-5,
                        "{loss:?} coord {j}: analytic {} vs fd {fd}",
                        g[j]
                    );
                }
            }
        }
    }

    #[test]
    fn centralized_single_identity_worker() {
        let p = single(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![5.0, -3.0]),
            LossKind::LeastSquares,
            0.0,
        );
        let t = p.centralized_solution().unwrap();
        assert!((t[0] - 5.0).abs() < 1e-12 && (t[1] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn ridge_shrinks_solution_monotonically() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(8, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut last = f64::INFINITY;
        for mu in [0.0, 0.1, 1.0, 10.0, 100.0, 1e4, 1e6] {
            let kind = if mu == 0.0 { LossKind::LeastSquares } else { LossKind::Ridge };
            let p = single(a.clone(), y.clone(), kind, mu);
            let norm = p.centralized_solution().unwrap().norm();
            assert!(norm <= last + 1e-12, "norm grew at mu={mu}");
            last = norm;
        }
        assert!(last < 1e-3, "norm should approach zero, got {last}");
    }

    #[test]
    fn centralized_gradient_vanishes_at_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_problem(&mut rng, 3, 5, 9, LossKind::LeastSquares, 0.0);
        let t = p.centralized_solution().unwrap();
        assert!(p.global_gradient(&t).unwrap().amax() < 1e-8);

        let p = random_problem(&mut rng, 3, 5, 9, LossKind::Logistic, 0.05);
        let t = p.centralized_solution().unwrap();
        assert!(p.global_gradient(&t).unwrap().amax() < 1e-8);
    }

    #[test]
    fn centralized_rank_deficient_errors() {
        // 1 row, 2 columns: A'A singular with mu = 0
        let p = single(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0]),
            LossKind::LeastSquares,
            0.0,
        );
        assert!(matches!(p.centralized_solution(), Err(Error::SingularSystem)));
    }

    #[test]
    fn centralized_invariant_to_shard_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut shards = Vec::new();
        for _ in 0..4 {
            let a = DMatrix::from_fn(5, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
            shards.push((a, y));
        }
        let p1 = ProblemInstance::new(shards.clone(), LossKind::LeastSquares, 0.0).unwrap();
        shards.reverse();
        let p2 = ProblemInstance::new(shards, LossKind::LeastSquares, 0.0).unwrap();
        let d = p1.centralized_solution().unwrap() - p2.centralized_solution().unwrap();
        assert!(d.amax() < 1e-9);
    }

    #[test]
    fn partition_consistency() {
        // sum_n f_n(t) equals the pooled loss for any split of the rows;
        // the pooled instance carries N*mu because mu applies per shard
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = DMatrix::from_fn(12, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(12, |_, _| rng.sample::<f64, _>(StandardNormal));
        for mu in [0.0, 0.7] {
            let kind = if mu == 0.0 { LossKind::LeastSquares } else { LossKind::Ridge };
            let shards = vec![
                (a.rows(0, 3).into_owned(), y.rows(0, 3).into_owned()),
                (a.rows(3, 4).into_owned(), y.rows(3, 4).into_owned()),
                (a.rows(7, 5).into_owned(), y.rows(7, 5).into_owned()),
            ];
            let sharded = ProblemInstance::new(shards, kind, mu).unwrap();
            let pooled = single(a.clone(), y.clone(), kind, 3.0 * mu);
            for _ in 0..20 {
                let theta = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
                let lhs = sharded.global_loss(&theta).unwrap();
                let rhs = pooled.global_loss(&theta).unwrap();
                assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
            }
        }
    }

    #[test]
    fn prox_pure_proximity_returns_anchor() {
        // f == 0 via a single zero row
        let p = single(
            DMatrix::zeros(1, 2),
            DVector::zeros(1),
            LossKind::LeastSquares,
            0.0,
        );
        let anchor = DVector::from_vec(vec![1.0, 1.0]);
        let t = p
            .prox_update(
                0,
                &[ProxTerm::consensus(DVector::zeros(2), anchor.clone())],
                2.5,
            )
            .unwrap();
        assert!((t - anchor).amax() < 1e-12);
    }

    #[test]
    fn prox_two_anchors_returns_midpoint() {
        let p = single(
            DMatrix::zeros(1, 2),
            DVector::zeros(1),
            LossKind::LeastSquares,
            0.0,
        );
        for rho in [0.1, 1.0, 10.0] {
            let t = p
                .prox_update(
                    0,
                    &[
                        ProxTerm::consensus(DVector::zeros(2), DVector::from_vec(vec![0.0, 0.0])),
                        ProxTerm::consensus(DVector::zeros(2), DVector::from_vec(vec![2.0, 2.0])),
                    ],
                    rho,
                )
                .unwrap();
            assert!((t[0] - 1.0).abs() < 1e-12 && (t[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn prox_satisfies_stationarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_problem(&mut rng, 1, 4, 7, LossKind::LeastSquares, 0.0);
        for _ in 0..30 {
            let terms: Vec<ProxTerm> = (0..2)
                .map(|_| ProxTerm {
                    linear: DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal)),
                    anchor: DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal)),
                    weight: rng.random::<f64>() + 0.5,
                })
                .collect();
            let rho = 1.3;
            let t = p.prox_update(0, &terms, rho).unwrap();
            // plug back into the first-order condition
            let mut resid = p.local_gradient(0, &t).unwrap();
            for term in &terms {
                resid += &term.linear;
                resid += rho * term.weight * (&t - &term.anchor);
            }
            assert!(resid.amax() < 1e-9, "stationarity residual {}", resid.amax());
        }
    }

    #[test]
    fn prox_rejects_nonpositive_rho() {
        let p = single(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            LossKind::LeastSquares,
            0.0,
        );
        assert!(matches!(
            p.prox_update(0, &[], 0.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn logistic_prox_satisfies_stationarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let p = random_problem(&mut rng, 1, 3, 12, LossKind::Logistic, 0.1);
        for _ in 0..10 {
            let term = ProxTerm::consensus(
                DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal)),
                DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal)),
            );
            let t = p.prox_update(0, std::slice::from_ref(&term), 1.0).unwrap();
            let mut resid = p.local_gradient(0, &t).unwrap();
            resid += &term.linear;
            resid += &t - &term.anchor;
            assert!(resid.amax() < 1e-9);
        }
    }

    #[test]
    fn csv_single_file_with_worker_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "0,1.0,0.0,3.0\n1,0.0,1.0,-2.0\n0,1.0,1.0,1.0\n").unwrap();
        let p = load_shards_single_file(&path, LossKind::LeastSquares, 0.0).unwrap();
        assert_eq!(p.num_workers(), 2);
        assert_eq!(p.dim(), 2);
        assert_eq!(p.shard(0).rows(), 2);
        assert_eq!(p.shard(1).rows(), 1);
        assert_eq!(p.shard(1).y[0], -2.0);
    }

    #[test]
    fn csv_per_worker_files() {
        let dir = tempfile::tempdir().unwrap();
        let p0 = dir.path().join("w0.csv");
        let p1 = dir.path().join("w1.csv");
        std::fs::write(&p0, "1.0,0.0,3.0\n0.5,0.5,1.0\n").unwrap();
        std::fs::write(&p1, "0.0,1.0,-2.0\n").unwrap();
        let p = load_shards_per_file(&[p0, p1], LossKind::LeastSquares, 0.0).unwrap();
        assert_eq!(p.num_workers(), 2);
        assert_eq!(p.dim(), 2);
    }

    #[test]
    fn csv_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1.0,abc\n").unwrap();
        assert!(load_shards_per_file(&[path], LossKind::LeastSquares, 0.0).is_err());
    }

    #[test]
    fn problem_hash_distinguishes_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p1 = random_problem(&mut rng, 2, 3, 4, LossKind::LeastSquares, 0.0);
        let p2 = random_problem(&mut rng, 2, 3, 4, LossKind::LeastSquares, 0.0);
        assert_eq!(problem_hash(&p1), problem_hash(&p1));
        assert_ne!(problem_hash(&p1), problem_hash(&p2));
    }
}
