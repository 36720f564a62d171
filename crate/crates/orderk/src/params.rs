//! Process parameters and weighted integer compositions.
//!
//! Every exact formula in this crate is a sum over count vectors
//! `x = (x_1, ..., x_i)` in `N^i` constrained by a weighted total
//! `sum_j w_j * x_j = n`. This module owns parameter validation and the
//! enumeration/counting of those solution vectors.

use serde::Serialize;

use crate::error::{Error, Result};

/// Order `i`, per-component rate `lambda`, and time horizon `t` of a
/// multi-jump counting process built from `i` independent Poisson components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderParams {
    i: u32,
    lambda: f64,
    t: f64,
}

impl OrderParams {
    /// Requires `i >= 1`, `lambda > 0` finite, and `t >= 0` finite.
    pub fn new(i: u32, lambda: f64, t: f64) -> Result<Self> {
        if i == 0 {
            return Err(Error::Domain {
                name: "i",
                value: 0.0,
                reason: "order must be at least 1",
            });
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Domain {
                name: "lambda",
                value: lambda,
                reason: "rate must be positive and finite",
            });
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Domain {
                name: "t",
                value: t,
                reason: "horizon must be nonnegative and finite",
            });
        }
        Ok(Self { i, lambda, t })
    }

    pub fn order(&self) -> u32 {
        self.i
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Same order and rate, evaluated at a different horizon.
    pub fn with_t(&self, t: f64) -> Result<Self> {
        Self::new(self.i, self.lambda, t)
    }

    /// `lambda * t`, the mean event count of each component over `[0, t]`.
    pub fn rate_time(&self) -> f64 {
        self.lambda * self.t
    }
}

/// Positive integer jump sizes `g(1) <= g(2) <= ... <= g(i)`; ties allowed.
///
/// Component `j` of the superposition contributes jumps of size `g(j)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WeightTable {
    weights: Vec<u64>,
}

impl WeightTable {
    /// Requires a nonempty, nondecreasing table of entries `>= 1`.
    pub fn new(weights: Vec<u64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain {
                name: "weights",
                value: 0.0,
                reason: "weight table must be nonempty",
            });
        }
        for (j, &w) in weights.iter().enumerate() {
            if w == 0 {
                return Err(Error::Domain {
                    name: "weights",
                    value: 0.0,
                    reason: "weights must be positive integers",
                });
            }
            if j > 0 && w < weights[j - 1] {
                return Err(Error::Domain {
                    name: "weights",
                    value: w as f64,
                    reason: "weights must be nondecreasing",
                });
            }
        }
        Ok(Self { weights })
    }

    /// The table `(1, 2, ..., i)`: component `j` jumps by `j`.
    pub fn consecutive(i: u32) -> Self {
        Self {
            weights: (1..=u64::from(i)).collect(),
        }
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    /// Number of components `i`.
    pub fn order(&self) -> u32 {
        self.weights.len() as u32
    }

    /// Largest jump size `g(i)`.
    pub fn max_weight(&self) -> u64 {
        *self.weights.last().expect("table is nonempty")
    }
}

/// One solution of `sum_j w_j * x_j = n` over nonnegative integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composition {
    /// `counts[j]` is `x_{j+1}`, the event count of component `j+1`.
    pub counts: Vec<u64>,
    /// The constrained total `n`.
    pub weighted_sum: u64,
}

/// Calls `visit` once per solution of `sum_j w_j * x_j = n`, in ascending
/// lexicographic order of `(x_1, ..., x_i)`. The slice passed to `visit` is a
/// scratch buffer; copy it if it must outlive the call.
pub fn for_each_composition<F: FnMut(&[u64])>(n: u64, w: &WeightTable, mut visit: F) {
    let ws = w.weights();
    let mut counts = vec![0u64; ws.len()];
    descend(&mut counts, 0, n, ws, &mut visit);
}

fn descend<F: FnMut(&[u64])>(counts: &mut [u64], j: usize, remaining: u64, ws: &[u64], visit: &mut F) {
    if j == ws.len() - 1 {
        if remaining.is_multiple_of(ws[j]) {
            counts[j] = remaining / ws[j];
            visit(counts);
        }
        return;
    }
    for x in 0..=remaining / ws[j] {
        counts[j] = x;
        descend(counts, j + 1, remaining - x * ws[j], ws, visit);
    }
}

/// All solutions of `sum_j w_j * x_j = n`, in ascending lexicographic order.
pub fn enumerate_compositions(n: u64, w: &WeightTable) -> Vec<Composition> {
    let mut out = Vec::new();
    for_each_composition(n, w, |counts| {
        out.push(Composition {
            counts: counts.to_vec(),
            weighted_sum: n,
        });
    });
    out
}

/// Number of solutions of `sum_j w_j * x_j = n`, without materializing them.
///
/// Computed by a coin-style dynamic program over the table entries, so it
/// serves as an independent cross-check of the recursive enumeration.
/// Saturates at `u64::MAX`.
pub fn count_compositions(n: u64, w: &WeightTable) -> u64 {
    let n = n as usize;
    let mut ways = vec![0u64; n + 1];
    ways[0] = 1;
    for &wj in w.weights() {
        let wj = wj as usize;
        for m in wj..=n {
            ways[m] = ways[m].saturating_add(ways[m - wj]);
        }
    }
    ways[n]
}
