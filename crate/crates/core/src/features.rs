//! Fixed feature maps used by both the dynamics models and the Q-functions.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseRow;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TileDim {
    /// Uniform bins over `[low, high]` of one input; outside values land in the edge bins.
    Linear { index: usize, low: f64, high: f64, bins: usize },
    /// Uniform bins over the angle `atan2(sin, cos)` of two inputs.
    Angle { cos_index: usize, sin_index: usize, bins: usize },
}

impl TileDim {
    fn bins(&self) -> usize {
        match self {
            TileDim::Linear { bins, .. } | TileDim::Angle { bins, .. } => *bins,
        }
    }

    fn max_index(&self) -> usize {
        match self {
            TileDim::Linear { index, .. } => *index,
            TileDim::Angle { cos_index, sin_index, .. } => *cos_index.max(sin_index),
        }
    }

    fn bin(&self, x: &[f64]) -> usize {
        let frac = match self {
            TileDim::Linear { index, low, high, .. } => (x[*index] - low) / (high - low),
            TileDim::Angle { cos_index, sin_index, .. } => (x[*sin_index].atan2(x[*cos_index]) + PI) / (2.0 * PI),
        };
        let n = self.bins();
        if frac.is_nan() {
            return 0;
        }
        ((frac * n as f64).floor().max(0.0) as usize).min(n - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    /// All monomials up to `degree`, constant term included.
    Polynomial { degree: usize },
    /// `sqrt(2/count) cos(w.x + b)` with `w ~ N(0, 1/bandwidth^2)`, plus a bias.
    RandomFourier { count: usize, bandwidth: f64, seed: u64 },
    /// One-hot over the product of the listed bins.
    Tile { dims: Vec<TileDim> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub kind: FeatureKind,
    pub input_dim: usize,
    /// Inputs are mapped to `(x - offset) / scale` before polynomial or Fourier features.
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
    exponents: Vec<Vec<u32>>,
    omega: Vec<Vec<f64>>,
    phase: Vec<f64>,
}

impl FeatureMap {
    pub fn new(kind: FeatureKind, input_dim: usize) -> Result<Self> {
        let mut map = FeatureMap {
            kind: kind.clone(),
            input_dim,
            offset: vec![0.0; input_dim],
            scale: vec![1.0; input_dim],
            exponents: Vec::new(),
            omega: Vec::new(),
            phase: Vec::new(),
        };
        match kind {
            FeatureKind::Polynomial { degree } => {
                map.exponents = monomials(input_dim, degree);
            }
            FeatureKind::RandomFourier { count, bandwidth, seed } => {
                if count == 0 || !(bandwidth > 0.0) {
                    return Err(Error::InvalidParam("random Fourier features need count >= 1 and bandwidth > 0".into()));
                }
                let mut rng = rng_for(seed, 0x5eed_f00d);
                for _ in 0..count {
                    let w: Vec<f64> = (0..input_dim)
                        .map(|_| {
                            let z: f64 = rng.sample(StandardNormal);
                            z / bandwidth
                        })
                        .collect();
                    map.omega.push(w);
                    map.phase.push(rng.random_range(0.0..2.0 * PI));
                }
            }
            FeatureKind::Tile { ref dims } => {
                if dims.is_empty() || dims.iter().any(|d| d.bins() == 0) {
                    return Err(Error::InvalidParam("tile features need at least one non-empty dimension".into()));
                }
                if let Some(d) = dims.iter().find(|d| d.max_index() >= input_dim) {
                    return Err(Error::IndexOutOfRange { index: d.max_index(), dim: input_dim });
                }
            }
        }
        Ok(map)
    }

    /// Fit the input standardization on training inputs. No-op for tiles.
    pub fn standardize(mut self, inputs: &[Vec<f64>]) -> Self {
        if matches!(self.kind, FeatureKind::Tile { .. }) || inputs.is_empty() {
            return self;
        }
        let n = inputs.len() as f64;
        for d in 0..self.input_dim {
            let mean = inputs.iter().map(|x| x[d]).sum::<f64>() / n;
            let var = inputs.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / n;
            self.offset[d] = mean;
            self.scale[d] = if var > 1e-12 { var.sqrt() } else { 1.0 };
        }
        self
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            FeatureKind::Polynomial { .. } => self.exponents.len(),
            FeatureKind::RandomFourier { count, .. } => count + 1,
            FeatureKind::Tile { dims } => dims.iter().map(|d| d.bins()).product(),
        }
    }

    pub fn is_one_hot(&self) -> bool {
        matches!(self.kind, FeatureKind::Tile { .. })
    }

    /// Cell index for tile features.
    pub fn active(&self, x: &[f64]) -> Option<usize> {
        match &self.kind {
            FeatureKind::Tile { dims } => {
                let mut idx = 0;
                for d in dims {
                    idx = idx * d.bins() + d.bin(x);
                }
                Some(idx)
            }
            _ => None,
        }
    }

    pub fn eval_sparse(&self, x: &[f64]) -> SparseRow {
        debug_assert_eq!(x.len(), self.input_dim);
        if let Some(i) = self.active(x) {
            return vec![(i, 1.0)];
        }
        let z: Vec<f64> = x.iter().zip(self.offset.iter().zip(&self.scale)).map(|(v, (o, s))| (v - o) / s).collect();
        match &self.kind {
            FeatureKind::Polynomial { .. } => self
                .exponents
                .iter()
                .enumerate()
                .map(|(j, e)| (j, e.iter().zip(&z).map(|(&p, v)| v.powi(p as i32)).product()))
                .collect(),
            FeatureKind::RandomFourier { count, .. } => {
                let amp = (2.0 / *count as f64).sqrt();
                let mut row: SparseRow = self
                    .omega
                    .iter()
                    .zip(&self.phase)
                    .enumerate()
                    .map(|(j, (w, b))| (j, amp * (w.iter().zip(&z).map(|(a, c)| a * c).sum::<f64>() + b).cos()))
                    .collect();
                row.push((*count, 1.0));
                row
            }
            FeatureKind::Tile { .. } => unreachable!(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (j, v) in self.eval_sparse(x) {
            out[j] = v;
        }
        out
    }
}

/// Exponent vectors of every monomial in `n` variables with total degree <= `degree`.
fn monomials(n: usize, degree: usize) -> Vec<Vec<u32>> {
    fn rec(n: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for p in 0..=left {
            cur.push(p);
            rec(n, left - p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, degree as u32, &mut Vec::new(), &mut out);
    out.sort_by_key(|e| e.iter().sum::<u32>());
    out
}
