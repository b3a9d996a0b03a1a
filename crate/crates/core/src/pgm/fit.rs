//! ℓ1-penalised node-wise regressions solved by proximal gradient.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::CountMatrix;
use crate::error::{invalid, Error, Result};
use crate::parallel::map_indexed;

use super::model::{LengthDist, PairwiseGM, Variant};
use super::node::NodeConditional;

pub const MAX_PROX_ITERS: usize = 500;
pub const RELATIVE_OBJECTIVE_TOL: f64 = 1e-7;
pub const SUFFICIENT_DECREASE: f64 = 1e-4;
/// Upper bound on the quadratic coefficient of a fitted quadratic node.
pub const QPGM_DIAGONAL_CAP: f64 = -1e-4;
pub const PATH_LENGTH: usize = 10;
pub const PATH_RATIO: f64 = 1e-4;

/// Sign constraint on the off-diagonal interaction weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignConstraint {
    Free,
    NonPositive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NodeKind {
    Poisson,
    Truncated(u64),
    SubLinear(u64, u64),
    Quadratic,
    SquareRoot,
}

/// Smooth part of one node-wise regression:
/// `(1/n) Σ_rows [A(η_r) − η_r · T(x_ri)]` with `η_r = θ + Σ_j w_j f_rj`,
/// plus a free diagonal coefficient for the two-parameter families.
///
/// Weight layout: `[θ, (diagonal), off-diagonals…]`.
#[derive(Debug, Clone)]
pub struct NodeProblem {
    kind: NodeKind,
    n: usize,
    p: usize,
    primary: Vec<f64>,
    secondary: Vec<f64>,
    /// Centred and scaled features, row-major `n × p`.
    features: Vec<f64>,
    centers: Vec<f64>,
    scales: Vec<f64>,
}

impl NodeProblem {
    /// Regression of node `node` on the others under `variant`.
    ///
    /// Features are `2 T(x_j)`. For the fixed-length variant they are scaled by
    /// `ω` of the row length without the response coordinate.
    pub fn new(x: &CountMatrix, variant: &Variant, node: usize) -> Result<Self> {
        let (n, d) = (x.n(), x.d());
        if node >= d {
            return invalid(format!("node {node} out of range for d={d}"));
        }
        if n == 0 {
            return Err(Error::EmptyData("node regression needs rows".into()));
        }
        let kind = match *variant {
            Variant::Pgm | Variant::Flpgm { .. } => NodeKind::Poisson,
            Variant::Tpgm { r } => NodeKind::Truncated(r),
            Variant::Spgm { r0, r } => NodeKind::SubLinear(r0, r),
            Variant::Qpgm => NodeKind::Quadratic,
            Variant::Sqr => NodeKind::SquareRoot,
        };
        let p = d - 1;
        let mut primary = Vec::with_capacity(n);
        let mut secondary = Vec::with_capacity(n);
        let mut features = Vec::with_capacity(n * p);
        for row in x.rows() {
            let xi = row[node];
            if let Variant::Tpgm { r } = *variant {
                if row.iter().any(|&v| v > r) {
                    return invalid(format!("data exceed truncation R={r}; truncate before fitting"));
                }
            }
            primary.push(variant.stat(xi));
            secondary.push(match kind {
                NodeKind::Quadratic => (xi * xi) as f64,
                NodeKind::SquareRoot => xi as f64,
                _ => 0.0,
            });
            let scale = match *variant {
                Variant::Flpgm { omega, .. } => omega.weight(row.iter().sum::<u64>() - xi),
                _ => 1.0,
            };
            for (j, &xj) in row.iter().enumerate() {
                if j != node {
                    features.push(2.0 * scale * variant.stat(xj));
                }
            }
        }
        let mut centers = vec![0.0; p];
        let mut scales = vec![1.0; p];
        for j in 0..p {
            let col = features.iter().skip(j).step_by(p.max(1));
            let m = col.clone().sum::<f64>() / n as f64;
            let v = col.map(|f| (f - m).powi(2)).sum::<f64>() / n as f64;
            centers[j] = m;
            if v > 0.0 {
                scales[j] = v.sqrt();
            }
        }
        for r in 0..n {
            for j in 0..p {
                let f = &mut features[r * p + j];
                *f = (*f - centers[j]) / scales[j];
            }
        }
        Ok(Self {
            kind,
            n,
            p,
            primary,
            secondary,
            features,
            centers,
            scales,
        })
    }

    /// Original weights to the internal centred/scaled coordinates.
    fn to_internal(&self, w: &[f64]) -> Vec<f64> {
        let start = self.off_start();
        let mut v = w.to_vec();
        for j in 0..self.p {
            v[0] += w[start + j] * self.centers[j];
            v[start + j] = w[start + j] * self.scales[j];
        }
        v
    }

    fn from_internal(&self, v: &[f64]) -> Vec<f64> {
        let start = self.off_start();
        let mut w = v.to_vec();
        for j in 0..self.p {
            w[start + j] = v[start + j] / self.scales[j];
            w[0] -= w[start + j] * self.centers[j];
        }
        w
    }

    pub fn two_param(&self) -> bool {
        matches!(self.kind, NodeKind::Quadratic | NodeKind::SquareRoot)
    }

    /// Index of the first off-diagonal weight.
    pub fn off_start(&self) -> usize {
        if self.two_param() {
            2
        } else {
            1
        }
    }

    pub fn dim(&self) -> usize {
        self.off_start() + self.p
    }

    fn conditional(&self, eta: f64, diag: f64) -> NodeConditional {
        match self.kind {
            NodeKind::Poisson => NodeConditional::Poisson { eta },
            NodeKind::Truncated(r) => NodeConditional::Truncated { eta, r },
            NodeKind::SubLinear(r0, r) => NodeConditional::SubLinear { eta, r0, r },
            NodeKind::Quadratic => NodeConditional::Quadratic {
                linear: eta,
                quadratic: diag,
            },
            NodeKind::SquareRoot => NodeConditional::SquareRoot { eta1: diag, eta2: eta },
        }
    }

    fn eta(&self, w: &[f64], row: usize) -> f64 {
        let off = &w[self.off_start()..];
        let f = &self.features[row * self.p..(row + 1) * self.p];
        w[0] + off.iter().zip(f).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Smooth loss and its gradient in the original weights; the loss is `+∞`
    /// where a node series diverges.
    pub fn loss_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let (f, gv) = self.internal_loss_and_gradient(&self.to_internal(w));
        let start = self.off_start();
        let mut g = gv.clone();
        for j in 0..self.p {
            g[start + j] = self.scales[j] * gv[start + j] + self.centers[j] * gv[0];
        }
        (f, g)
    }

    fn internal_loss_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let diag = if self.two_param() { w[1] } else { 0.0 };
        let start = self.off_start();
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.dim()];
        for r in 0..self.n {
            let eta = self.eta(w, r);
            let s = match self.conditional(eta, diag).summary() {
                Ok(s) => s,
                Err(_) => return (f64::INFINITY, grad),
            };
            loss += s.log_partition - eta * self.primary[r] - diag * self.secondary[r];
            let g1 = s.mean_primary - self.primary[r];
            grad[0] += g1;
            if self.two_param() {
                grad[1] += s.mean_secondary - self.secondary[r];
            }
            let f = &self.features[r * self.p..(r + 1) * self.p];
            for (g, &fv) in grad[start..].iter_mut().zip(f) {
                *g += g1 * fv;
            }
        }
        let inv = 1.0 / self.n as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        let loss = loss * inv;
        (if loss.is_finite() { loss } else { f64::INFINITY }, grad)
    }

    pub fn loss(&self, w: &[f64]) -> f64 {
        self.loss_and_gradient(w).0
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        self.loss_and_gradient(w).1
    }

    /// Independent-node starting point matched to the mean statistic.
    pub fn initial_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.dim()];
        let mean_x = match self.kind {
            NodeKind::SquareRoot => self.secondary.iter().sum::<f64>() / self.n as f64,
            _ => self.primary.iter().sum::<f64>() / self.n as f64,
        };
        let level = mean_x.max(1e-3);
        match self.kind {
            NodeKind::SquareRoot => w[1] = level.ln(),
            NodeKind::Quadratic => {
                let q = -0.5 / level.max(1.0);
                w[1] = q;
                w[0] = -2.0 * q * level;
            }
            _ => w[0] = level.ln(),
        }
        w
    }

    /// `λ‖w_off‖₁` evaluated on internal coordinates.
    fn penalty(&self, v: &[f64], lambda: f64) -> f64 {
        lambda
            * v[self.off_start()..]
                .iter()
                .zip(&self.scales)
                .map(|(a, s)| a.abs() / s)
                .sum::<f64>()
    }

    fn prox(&self, v: &mut [f64], t: f64, lambda: f64, sign: SignConstraint) {
        let start = self.off_start();
        for (x, s) in v[start..].iter_mut().zip(&self.scales) {
            let tl = t * lambda / s;
            *x = match sign {
                SignConstraint::Free => x.signum() * (x.abs() - tl).max(0.0),
                SignConstraint::NonPositive => (*x + tl).min(0.0),
            };
        }
        if matches!(self.kind, NodeKind::Quadratic) {
            v[1] = v[1].min(QPGM_DIAGONAL_CAP);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSolution {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Penalised objective after every accepted step, starting point first.
    pub trace: Vec<f64>,
}

/// Proximal gradient with halving backtracking and monotone momentum: an
/// extrapolated step is kept only when it does not raise the objective,
/// otherwise a plain step with sufficient decrease is taken.
pub fn solve_node(
    prob: &NodeProblem,
    lambda: f64,
    start: Option<&[f64]>,
    sign: SignConstraint,
) -> Result<NodeSolution> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return invalid(format!("penalty must be non-negative, got {lambda}"));
    }
    let w = match start {
        Some(s) if s.len() == prob.dim() => s.to_vec(),
        _ => prob.initial_weights(),
    };
    let mut w = prob.to_internal(&w);
    prob.prox(&mut w, 0.0, 0.0, sign);
    let (mut f, mut g) = prob.internal_loss_and_gradient(&w);
    if !f.is_finite() {
        w = prob.to_internal(&prob.initial_weights());
        prob.prox(&mut w, 0.0, 0.0, sign);
        (f, g) = prob.internal_loss_and_gradient(&w);
        if !f.is_finite() {
            return Err(Error::Divergent("node loss is infinite at the starting point".into()));
        }
    }
    let mut obj = f + prob.penalty(&w, lambda);
    let mut trace = vec![obj];
    let mut t: f64 = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut prev = w.clone();
    let mut momentum = 1usize;
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    while iterations < MAX_PROX_ITERS {
        iterations += 1;
        t = (t * 1.5).min(1e6);
        let mut accepted = None;
        // accelerated step from the extrapolated point
        if momentum > 1 {
            let beta = (momentum as f64 - 1.0) / (momentum as f64 + 2.0);
            let y: Vec<f64> = w.iter().zip(&prev).map(|(a, b)| a + beta * (a - b)).collect();
            let (fy, gy) = prob.internal_loss_and_gradient(&y);
            if fy.is_finite() {
                let mut ty = t;
                while ty > 1e-16 {
                    let mut z: Vec<f64> = y.iter().zip(&gy).map(|(a, b)| a - ty * b).collect();
                    prob.prox(&mut z, ty, lambda, sign);
                    let (fz, gz) = prob.internal_loss_and_gradient(&z);
                    let lin: f64 = gy.iter().zip(z.iter().zip(&y)).map(|(g, (a, b))| g * (a - b)).sum();
                    if fz.is_finite() && fz <= fy + lin + sq(&z, &y) / (2.0 * ty) {
                        let oz = fz + prob.penalty(&z, lambda);
                        if oz <= obj {
                            accepted = Some((z, gz, oz));
                            t = ty;
                        }
                        break;
                    }
                    ty *= 0.5;
                }
            }
        }
        if accepted.is_none() {
            // plain step with sufficient decrease; resets the momentum
            momentum = 1;
            while t > 1e-16 {
                let mut cand: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - t * b).collect();
                prob.prox(&mut cand, t, lambda, sign);
                let step2 = sq(&cand, &w);
                if step2 == 0.0 {
                    accepted = Some((cand, g.clone(), obj));
                    break;
                }
                let (fc, gc) = prob.internal_loss_and_gradient(&cand);
                let oc = fc + prob.penalty(&cand, lambda);
                if oc.is_finite() && oc <= obj - SUFFICIENT_DECREASE * step2 / t {
                    accepted = Some((cand, gc, oc));
                    break;
                }
                t *= 0.5;
            }
        }
        let Some((wn, gn, on)) = accepted else {
            // no decrease possible at machine precision
            converged = true;
            break;
        };
        let change = (obj - on).abs();
        let scale = obj.abs().max(1.0);
        prev = std::mem::replace(&mut w, wn);
        momentum += 1;
        g = gn;
        obj = on;
        trace.push(obj);
        if change <= RELATIVE_OBJECTIVE_TOL * scale {
            converged = true;
            break;
        }
    }
    Ok(NodeSolution {
        weights: prob.from_internal(&w),
        objective: obj,
        iterations,
        converged,
        trace,
    })
}

/// Node-wise fit: per-node solutions plus the symmetrised model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodewiseFit {
    pub model: PairwiseGM,
    pub lambda: f64,
    pub nodes: Vec<NodeSolution>,
    pub converged: bool,
}

impl NodewiseFit {
    /// Raw per-node weight vectors, usable as warm starts.
    pub fn node_weights(&self) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|s| s.weights.clone()).collect()
    }
}

pub(crate) fn solve_all(
    x: &CountMatrix,
    variant: &Variant,
    lambda: f64,
    sign: SignConstraint,
    warm: Option<&[Vec<f64>]>,
) -> Result<Vec<NodeSolution>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return invalid(format!("penalty must be non-negative, got {lambda}"));
    }
    let d = x.d();
    let solved = map_indexed(d, |i| {
        let prob = NodeProblem::new(x, variant, i)?;
        solve_node(&prob, lambda, warm.and_then(|w| w.get(i)).map(|v| v.as_slice()), sign)
    });
    solved.into_iter().collect()
}

/// Assemble `θ` and a symmetric `Φ` (averaging `φ_ij` and `φ_ji`).
pub(crate) fn assemble(d: usize, nodes: &[NodeSolution], two_param: bool) -> (Vec<f64>, DMatrix<f64>) {
    let start = if two_param { 2 } else { 1 };
    let theta = nodes.iter().map(|s| s.weights[0]).collect();
    let mut raw = DMatrix::zeros(d, d);
    for (i, s) in nodes.iter().enumerate() {
        let mut k = start;
        for j in 0..d {
            if j == i {
                continue;
            }
            raw[(i, j)] = s.weights[k];
            k += 1;
        }
        if two_param {
            raw[(i, i)] = s.weights[1];
        }
    }
    let phi = DMatrix::from_fn(d, d, |i, j| if i == j { raw[(i, i)] } else { 0.5 * (raw[(i, j)] + raw[(j, i)]) });
    (theta, phi)
}

pub fn fit_nodewise(x: &CountMatrix, variant: &Variant, lambda: f64) -> Result<NodewiseFit> {
    fit_nodewise_warm(x, variant, lambda, None)
}

pub fn fit_nodewise_warm(
    x: &CountMatrix,
    variant: &Variant,
    lambda: f64,
    warm: Option<&[Vec<f64>]>,
) -> Result<NodewiseFit> {
    if x.d() < 1 {
        return invalid("need at least one column");
    }
    let sign = match variant {
        Variant::Pgm => SignConstraint::NonPositive,
        _ => SignConstraint::Free,
    };
    let nodes = solve_all(x, variant, lambda, sign, warm)?;
    let (theta, phi) = assemble(x.d(), &nodes, variant.has_diagonal());
    let variant = match *variant {
        Variant::Flpgm { omega, .. } => {
            let mean_len = x.rows().map(|r| r.iter().sum::<u64>() as f64).sum::<f64>() / x.n() as f64;
            if !(mean_len > 0.0) {
                return Err(Error::Degenerate("all rows have zero length".into()));
            }
            Variant::Flpgm {
                length: LengthDist::Poisson { rate: mean_len },
                omega,
            }
        }
        v => v,
    };
    let converged = nodes.iter().all(|s| s.converged);
    Ok(NodewiseFit {
        model: PairwiseGM::new(variant, theta, phi)?,
        lambda,
        nodes,
        converged,
    })
}

/// Largest off-diagonal entry of `XᵀX / n` (square-rooted for the square-root
/// variant); `1` when that is zero.
pub fn lambda_max(x: &CountMatrix, variant: &Variant) -> f64 {
    let (n, d) = (x.n(), x.d());
    let mut best = 0.0f64;
    for i in 0..d {
        for j in (i + 1)..d {
            let s: f64 = x.rows().map(|r| (r[i] * r[j]) as f64).sum::<f64>() / n as f64;
            best = best.max(s);
        }
    }
    if !(best > 0.0) {
        best = 1.0;
    }
    if matches!(variant, Variant::Sqr) {
        best.sqrt()
    } else {
        best
    }
}

/// Ten log-spaced penalties from `λmax` down to `1e-4 λmax`.
pub fn reg_path(x: &CountMatrix, variant: &Variant) -> Result<Vec<f64>> {
    if x.d() < 2 {
        return invalid("regularisation path needs at least two columns");
    }
    let top = lambda_max(x, variant);
    let lo = (top * PATH_RATIO).ln();
    let hi = top.ln();
    Ok((0..PATH_LENGTH)
        .map(|k| (hi + (lo - hi) * k as f64 / (PATH_LENGTH - 1) as f64).exp())
        .collect())
}

/// 99th percentile (nearest rank) of the pooled non-zero entries; 1 if none.
pub fn tpgm_truncation(x: &CountMatrix) -> u64 {
    let mut nz: Vec<u64> = x.values().iter().copied().filter(|&v| v > 0).collect();
    if nz.is_empty() {
        return 1;
    }
    nz.sort_unstable();
    let rank = ((0.99 * nz.len() as f64).ceil() as usize).clamp(1, nz.len());
    nz[rank - 1].max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::univariate::poisson_draw;

    fn poisson_data(n: usize, rates: &[f64], seed: u64) -> CountMatrix {
        let mut rng = seeded(seed);
        let d = rates.len();
        let v: Vec<u64> = (0..n * d).map(|k| poisson_draw(rates[k % d], &mut rng)).collect();
        CountMatrix::new(v, n, d, crate::data::default_names(d)).unwrap()
    }

    fn finite_difference_check(prob: &NodeProblem, w: &[f64]) {
        let g = prob.gradient(w);
        let h = 1e-5;
        for k in 0..w.len() {
            let mut a = w.to_vec();
            let mut b = w.to_vec();
            a[k] += h;
            b[k] -= h;
            let fd = (prob.loss(&a) - prob.loss(&b)) / (2.0 * h);
            let rel = (fd - g[k]).abs() / g[k].abs().max(1e-3);
            assert!(rel < 1e-5, "coordinate {k}: analytic {} vs fd {fd}", g[k]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let x = poisson_data(40, &[2.0, 1.0, 3.0], 1);
        let xt = x.map_values(|v| v.min(4));
        let cases: Vec<(CountMatrix, Variant)> = vec![
            (x.clone(), Variant::Pgm),
            (xt, Variant::Tpgm { r: 4 }),
            (x.clone(), Variant::Sqr),
            (x.clone(), Variant::Spgm { r0: 2, r: 5 }),
            (x.clone(), Variant::Qpgm),
        ];
        for (data, v) in cases {
            let prob = NodeProblem::new(&data, &v, 1).unwrap();
            let mut w = prob.initial_weights();
            for (k, wk) in w.iter_mut().enumerate().skip(prob.off_start()) {
                *wk = if k % 2 == 0 { -0.05 } else { 0.03 };
            }
            finite_difference_check(&prob, &w);
        }
    }

    #[test]
    fn full_penalty_kills_interactions() {
        let x = poisson_data(2_000, &[3.0, 1.0, 6.0], 2);
        let v = Variant::Pgm;
        let lmax = lambda_max(&x, &v);
        let fit = fit_nodewise(&x, &v, lmax).unwrap();
        let means = x.column_means();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(fit.model.phi()[(i, j)], 0.0);
                }
            }
            assert!((fit.model.theta()[i] - means[i].ln()).abs() < 1e-3);
        }
    }

    #[test]
    fn pgm_projection_blocks_positive_pairs() {
        // strong positive dependence through a shared component
        let mut rng = seeded(3);
        let rows: Vec<Vec<u64>> = (0..1_000)
            .map(|_| {
                let z = poisson_draw(4.0, &mut rng);
                vec![z + poisson_draw(0.5, &mut rng), z + poisson_draw(0.5, &mut rng)]
            })
            .collect();
        let x = CountMatrix::from_rows(&rows).unwrap();
        let fit = fit_nodewise(&x, &Variant::Pgm, 1e-4).unwrap();
        assert_eq!(fit.model.phi()[(0, 1)], 0.0);
        let free = fit_nodewise(&x, &Variant::Tpgm { r: 30 }, 1e-4).unwrap();
        assert!(free.model.phi()[(0, 1)] > 0.0);
    }

    #[test]
    fn objective_is_monotone_and_start_independent() {
        let x = poisson_data(300, &[2.0, 4.0, 1.0], 5).map_values(|v| v.min(8));
        for v in [Variant::Pgm, Variant::Tpgm { r: 8 }, Variant::Sqr] {
            let prob = NodeProblem::new(&x, &v, 0).unwrap();
            let a = solve_node(&prob, 0.01, None, SignConstraint::Free).unwrap();
            for w in a.trace.windows(2) {
                assert!(w[1] <= w[0]);
            }
            let mut other = vec![0.0; prob.dim()];
            for (k, o) in other.iter_mut().enumerate() {
                *o = -0.3 + 0.1 * k as f64;
            }
            let b = solve_node(&prob, 0.01, Some(&other), SignConstraint::Free).unwrap();
            assert!((a.objective - b.objective).abs() < 1e-6, "{v:?}: {} vs {}", a.objective, b.objective);
        }
    }

    #[test]
    fn path_layout() {
        let x = poisson_data(100, &[2.0, 3.0], 7);
        let p = reg_path(&x, &Variant::Pgm).unwrap();
        assert_eq!(p.len(), 10);
        let lmax = lambda_max(&x, &Variant::Pgm);
        assert!((p[0] - lmax).abs() < 1e-12 * lmax);
        assert!((p[9] - 1e-4 * lmax).abs() < 1e-12 * lmax);
        for w in p.windows(2) {
            assert!((w[1] / w[0] - p[1] / p[0]).abs() < 1e-12);
        }
        let s = reg_path(&x, &Variant::Sqr).unwrap();
        assert!((s[0] - lmax.sqrt()).abs() < 1e-12);
        // zero cross moments fall back to 1
        let diag = CountMatrix::from_rows(&[vec![1, 0], vec![0, 2], vec![0, 0]]).unwrap();
        assert_eq!(reg_path(&diag, &Variant::Pgm).unwrap()[0], 1.0);
    }

    #[test]
    fn truncation_percentile() {
        let rows: Vec<Vec<u64>> = (0..200).map(|i| vec![if i % 2 == 0 { 0 } else { i as u64 }]).collect();
        let x = CountMatrix::from_rows(&rows).unwrap();
        // 100 non-zeros 1,3,…,199; rank 99 -> 197
        assert_eq!(tpgm_truncation(&x), 197);
        assert_eq!(tpgm_truncation(&CountMatrix::from_rows(&[vec![0]]).unwrap()), 1);
    }

    #[test]
    fn negative_penalty_rejected() {
        let x = poisson_data(20, &[1.0, 1.0], 1);
        assert!(fit_nodewise(&x, &Variant::Pgm, -1.0).is_err());
    }
}
