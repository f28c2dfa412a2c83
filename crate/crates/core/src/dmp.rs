//! Dynamic movement primitives: learning from one demonstration and
//! rolling out to new start and goal positions.
//!
//! Classic discrete formulation, integrated with explicit Euler steps:
//!
//! ```text
//! tau * dx = -alpha_x * x
//! tau * dz = alpha_z * (beta_z * (g - y) - z) + f(x)
//! tau * dy = z
//! f(x)     = x * (g - y0) * sum(psi_i * w_i) / sum(psi_i)
//! psi_i(x) = exp(-h_i * (x - c_i)^2)
//! ```
//!
//! Basis centers sit at equal time intervals along the canonical decay,
//! `c_i = exp(-alpha_x * i / (n - 1))`, with widths
//! `h_i = 1 / (2 * (c_{i+1} - c_i)^2)` (the last width repeats).

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ALPHA_Z: f64 = 25.0;
pub const DEFAULT_DT: f64 = 1e-3;

/// Below this amplitude the forcing scale is taken as 1 during learning.
const AMPLITUDE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DmpError {
    #[error("DegenerateDemo: {0}")]
    DegenerateDemo(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Positions sampled over time. Each position has the same dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Builds a demonstration, checking sample count, lengths, dimensions
    /// and strictly increasing times.
    pub fn new(times: Vec<f64>, positions: Vec<Vec<f64>>) -> Result<Self, DmpError> {
        if times.len() != positions.len() {
            return Err(DmpError::DegenerateDemo(format!("{} times but {} positions", times.len(), positions.len())));
        }
        if times.len() < 3 {
            return Err(DmpError::DegenerateDemo(format!("need at least 3 samples, got {}", times.len())));
        }
        let dim = positions[0].len();
        if dim == 0 {
            return Err(DmpError::DegenerateDemo("zero-dimensional positions".into()));
        }
        if let Some(p) = positions.iter().find(|p| p.len() != dim) {
            return Err(DmpError::DimensionMismatch { expected: dim, found: p.len() });
        }
        if times.iter().chain(positions.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(DmpError::DegenerateDemo("non-finite sample".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DmpError::DegenerateDemo("times must be strictly increasing".into()));
        }
        Ok(Trajectory { times, positions })
    }

    pub fn dim(&self) -> usize {
        self.positions.first().map_or(0, |p| p.len())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// One coordinate over time.
    pub fn column(&self, d: usize) -> Vec<f64> {
        self.positions.iter().map(|p| p[d]).collect()
    }

    /// Linear interpolation at time `t`, clamped to the sampled range.
    pub fn sample_at(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.positions[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.positions[n - 1].clone();
        }
        let hi = self.times.partition_point(|&x| x < t);
        let lo = hi - 1;
        let a = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        self.positions[lo]
            .iter()
            .zip(&self.positions[hi])
            .map(|(p, q)| p + a * (q - p))
            .collect()
    }

    /// `t,x1,..,xD` header, then one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for d in 0..self.dim() {
            out.push_str(&format!(",x{}", d + 1));
        }
        out.push('\n');
        for (t, p) in self.times.iter().zip(&self.positions) {
            out.push_str(&t.to_string());
            for v in p {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, DmpError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let Some((_, header)) = lines.next() else {
            return Err(DmpError::Csv { line: 1, message: "empty file".into() });
        };
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "t" {
            return Err(DmpError::Csv { line: 1, message: format!("header must be `t,x1..xD`, got {header:?}") });
        }
        let mut times = Vec::new();
        let mut positions = Vec::new();
        for (i, line) in lines {
            let values = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| DmpError::Csv { line: i + 1, message: e.to_string() })?;
            if values.len() != cols.len() {
                return Err(DmpError::Csv {
                    line: i + 1,
                    message: format!("expected {} columns, found {}", cols.len(), values.len()),
                });
            }
            times.push(values[0]);
            positions.push(values[1..].to_vec());
        }
        Trajectory::new(times, positions)
    }
}

/// A learned primitive. `weights[d]` holds the basis weights of dimension `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpParams {
    pub n_basis: usize,
    pub weights: Vec<Vec<f64>>,
    pub alpha_z: f64,
    pub beta_z: f64,
    pub alpha_x: f64,
    pub tau: f64,
    pub y0: Vec<f64>,
    pub g: Vec<f64>,
}

impl DmpParams {
    /// Zero forcing term with the default gains.
    pub fn zero(dim: usize, n_basis: usize, tau: f64, y0: Vec<f64>, g: Vec<f64>) -> Self {
        let (alpha_z, beta_z, alpha_x) = default_gains();
        DmpParams {
            n_basis,
            weights: vec![vec![0.0; n_basis]; dim],
            alpha_z,
            beta_z,
            alpha_x,
            tau,
            y0,
            g,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn check(&self) -> Result<(), DmpError> {
        if self.n_basis == 0 {
            return Err(DmpError::InvalidArgument("n_basis must be at least 1".into()));
        }
        if !(self.tau > 0.0) {
            return Err(DmpError::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        for gain in [self.alpha_z, self.beta_z, self.alpha_x] {
            if !(gain > 0.0) {
                return Err(DmpError::InvalidArgument(format!("gains must be positive, got {gain}")));
            }
        }
        let dim = self.dim();
        if let Some(w) = self.weights.iter().find(|w| w.len() != self.n_basis) {
            return Err(DmpError::DimensionMismatch { expected: self.n_basis, found: w.len() });
        }
        for v in [&self.y0, &self.g] {
            if v.len() != dim {
                return Err(DmpError::DimensionMismatch { expected: dim, found: v.len() });
            }
        }
        Ok(())
    }

    /// Copy with new start and goal.
    pub fn retargeted(&self, y0: Vec<f64>, g: Vec<f64>) -> Self {
        DmpParams { y0, g, ..self.clone() }
    }
}

/// `alpha_z = 25`, `beta_z = alpha_z / 4`, `alpha_x = alpha_z / 3`.
pub fn default_gains() -> (f64, f64, f64) {
    (DEFAULT_ALPHA_Z, DEFAULT_ALPHA_Z / 4.0, DEFAULT_ALPHA_Z / 3.0)
}

struct Basis {
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl Basis {
    fn new(n: usize, alpha_x: f64) -> Self {
        let centers: Vec<f64> = if n == 1 {
            vec![1.0]
        } else {
            (0..n).map(|i| (-alpha_x * i as f64 / (n - 1) as f64).exp()).collect()
        };
        let widths = if n == 1 {
            vec![1.0 / (2.0 * (1.0 - (-alpha_x).exp()).powi(2))]
        } else {
            let mut w: Vec<f64> = centers.windows(2).map(|c| 1.0 / (2.0 * (c[1] - c[0]).powi(2))).collect();
            w.push(*w.last().unwrap());
            w
        };
        Basis { centers, widths }
    }

    fn activations(&self, x: f64) -> impl Iterator<Item = f64> + '_ {
        self.centers
            .iter()
            .zip(&self.widths)
            .map(move |(c, h)| (-h * (x - c).powi(2)).exp())
    }

    /// psi-weighted average of the weights.
    fn blend(&self, x: f64, weights: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (psi, w) in self.activations(x).zip(weights) {
            num += psi * w;
            den += psi;
        }
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }
}

/// First derivative by central differences; one-sided at the ends.
fn derivative(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (y[b] - y[a]) / (t[b] - t[a])
        })
        .collect()
}

/// Fits one forcing term per dimension by per-basis weighted least squares.
pub fn learn_dmp(demo: &Trajectory, n_basis: usize) -> Result<DmpParams, DmpError> {
    if n_basis == 0 {
        return Err(DmpError::InvalidArgument("n_basis must be at least 1".into()));
    }
    let demo = Trajectory::new(demo.times.clone(), demo.positions.clone())?;
    let tau = demo.duration();
    if !(tau > 0.0) {
        return Err(DmpError::DegenerateDemo("duration must be positive".into()));
    }
    let (alpha_z, beta_z, alpha_x) = default_gains();
    let basis = Basis::new(n_basis, alpha_x);
    let t0 = demo.times[0];
    let t: Vec<f64> = demo.times.iter().map(|ti| ti - t0).collect();
    let phase: Vec<f64> = t.iter().map(|ti| (-alpha_x * ti / tau).exp()).collect();
    let psi: Vec<Vec<f64>> = phase.iter().map(|&x| basis.activations(x).collect()).collect();

    let dim = demo.dim();
    let mut weights = Vec::with_capacity(dim);
    let y0 = demo.positions[0].clone();
    let g = demo.positions[demo.len() - 1].clone();
    for d in 0..dim {
        let y = demo.column(d);
        let yd = derivative(&t, &y);
        let ydd = derivative(&t, &yd);
        let amplitude = g[d] - y0[d];
        let scale = if amplitude.abs() < AMPLITUDE_EPS { 1.0 } else { amplitude };
        let target: Vec<f64> = (0..y.len())
            .map(|i| tau * tau * ydd[i] - alpha_z * (beta_z * (g[d] - y[i]) - tau * yd[i]))
            .collect();
        let w: Vec<f64> = (0..n_basis)
            .map(|j| {
                let mut num = 0.0;
                let mut den = 0.0;
                for i in 0..y.len() {
                    let s = phase[i] * scale;
                    num += s * psi[i][j] * target[i];
                    den += s * s * psi[i][j];
                }
                if den > 1e-300 {
                    num / den
                } else {
                    0.0
                }
            })
            .collect();
        weights.push(w);
    }
    Ok(DmpParams {
        n_basis,
        weights,
        alpha_z,
        beta_z,
        alpha_x,
        tau,
        y0,
        g,
    })
}

/// Integrates the primitive from `y0` towards `g`, sampling every `dt`.
pub fn rollout(p: &DmpParams, y0: &[f64], g: &[f64], dt: f64, duration: f64) -> Result<Trajectory, DmpError> {
    p.check()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DmpError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(DmpError::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    let dim = p.dim();
    for v in [y0, g] {
        if v.len() != dim {
            return Err(DmpError::DimensionMismatch { expected: dim, found: v.len() });
        }
    }
    let basis = Basis::new(p.n_basis, p.alpha_x);
    let steps = (duration / dt).round().max(1.0) as usize;
    let mut y = y0.to_vec();
    let mut z = vec![0.0; dim];
    let mut x = 1.0;
    let mut times = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        times.push(k as f64 * dt);
        positions.push(y.clone());
        if k == steps {
            break;
        }
        for d in 0..dim {
            let f = x * (g[d] - y0[d]) * basis.blend(x, &p.weights[d]);
            let dz = (p.alpha_z * (p.beta_z * (g[d] - y[d]) - z[d]) + f) / p.tau;
            let dy = z[d] / p.tau;
            y[d] += dy * dt;
            z[d] += dz * dt;
        }
        x += -p.alpha_x * x / p.tau * dt;
    }
    Ok(Trajectory { times, positions })
}

/// Root-mean-square distance between two trajectories, comparing `b`
/// (interpolated) at the sample times of `a` shifted to start at zero.
pub fn rmse(a: &Trajectory, b: &Trajectory) -> f64 {
    let t0 = a.times[0];
    let mut sum = 0.0;
    let mut count = 0usize;
    for (t, p) in a.times.iter().zip(&a.positions) {
        let q = b.sample_at(t - t0);
        for (u, v) in p.iter().zip(&q) {
            sum += (u - v).powi(2);
            count += 1;
        }
    }
    (sum / count as f64).sqrt()
}
