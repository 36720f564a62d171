//! Exact distributions of the processes and of their embedded jump chains.
//!
//! The multi-jump process of order `i` is `Y(t) = sum_{j=1}^i j * N_j(t)`
//! with independent rate-`lambda` Poisson components `N_j`; the weighted
//! variant `Z` replaces the jump size `j` by `g(j)`. Its pmf at level `n` is
//! a sum over the weighted compositions of `n`:
//!
//! ```text
//! P[Z(t) = n] = sum_{x : sum_j g(j) x_j = n} exp(-i*lambda*t)
//!               * (lambda*t)^(x_1+...+x_i) / (x_1! ... x_i!)
//! ```
//!
//! Each composition term is evaluated in log space. Tables carry a certified
//! bound on the probability mass beyond their truncated support, and the jump
//! laws of the embedded chains are stored as raw (possibly sub-probability)
//! weights; truncated mass is recorded, never silently renormalized.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{for_each_composition, OrderParams, WeightTable};
use crate::subordinators::BernsteinFn;

/// Hard cap on table support searches, to fail loudly instead of spinning.
const SUPPORT_CAP: u64 = 1_000_000;
/// Hard cap on series terms in the doubly stochastic pmf.
const SERIES_CAP: u64 = 10_000_000;

/// A pmf on `{0, 1, ..., n_max}` with a certified bound on the mass above
/// `n_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pmf {
    probs: Vec<f64>,
    tail_bound: f64,
}

impl Pmf {
    /// Validates entries in `[0, 1]` and total mass + tail within `1e-9` of 1.
    pub fn from_parts(probs: Vec<f64>, tail_bound: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain {
                name: "probs",
                value: 0.0,
                reason: "support must be nonempty",
            });
        }
        for &p in &probs {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(Error::Domain {
                    name: "probs",
                    value: p,
                    reason: "probabilities must lie in [0, 1]",
                });
            }
        }
        if !(tail_bound.is_finite() && (0.0..=1.0).contains(&tail_bound)) {
            return Err(Error::Domain {
                name: "tail_bound",
                value: tail_bound,
                reason: "tail bound must lie in [0, 1]",
            });
        }
        let total: f64 = probs.iter().sum::<f64>() + tail_bound;
        if !((1.0 - 1e-9)..=(1.0 + 1e-9)).contains(&total) {
            return Err(Error::Domain {
                name: "mass",
                value: total,
                reason: "mass plus tail bound must be within 1e-9 of 1",
            });
        }
        Ok(Self { probs, tail_bound })
    }

    pub fn n_max(&self) -> u64 {
        (self.probs.len() - 1) as u64
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P[X = n]`; zero beyond the stored support.
    pub fn prob(&self, n: u64) -> f64 {
        self.probs.get(n as usize).copied().unwrap_or(0.0)
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Total retained mass `sum_n P[X = n]`.
    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Mean of the retained mass.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// Variance of the retained mass around [`Pmf::mean`].
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - mean).powi(2) * p)
            .sum()
    }
}

/// Jump-size law of an embedded chain: strictly positive sizes with raw
/// weights. For truncated laws the missing mass is recorded in
/// `truncation_eps`; the stored weights are never renormalized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpLaw {
    sizes: Vec<u64>,
    probs: Vec<f64>,
    truncation_eps: f64,
}

impl JumpLaw {
    /// Validates ascending distinct sizes `>= 1`, weights in `[0, 1]`, and
    /// total mass + truncation within `1e-9` of 1.
    pub fn from_parts(sizes: Vec<u64>, probs: Vec<f64>, truncation_eps: f64) -> Result<Self> {
        if sizes.is_empty() || sizes.len() != probs.len() {
            return Err(Error::Domain {
                name: "sizes",
                value: sizes.len() as f64,
                reason: "need matching nonempty sizes and weights",
            });
        }
        for (k, &s) in sizes.iter().enumerate() {
            if s == 0 || (k > 0 && s <= sizes[k - 1]) {
                return Err(Error::Domain {
                    name: "sizes",
                    value: s as f64,
                    reason: "sizes must be ascending and at least 1",
                });
            }
        }
        for &p in &probs {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(Error::Domain {
                    name: "probs",
                    value: p,
                    reason: "weights must lie in [0, 1]",
                });
            }
        }
        let total: f64 = probs.iter().sum::<f64>() + truncation_eps;
        if !(truncation_eps >= 0.0 && ((1.0 - 1e-9)..=(1.0 + 1e-9)).contains(&total)) {
            return Err(Error::Domain {
                name: "truncation_eps",
                value: truncation_eps,
                reason: "weights plus truncation must be within 1e-9 of 1",
            });
        }
        Ok(Self {
            sizes,
            probs,
            truncation_eps,
        })
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Certified bound on the true law's mass beyond the stored sizes.
    pub fn truncation_eps(&self) -> f64 {
        self.truncation_eps
    }

    /// `P[jump = size]` for a stored size, zero otherwise.
    pub fn prob_of(&self, size: u64) -> f64 {
        match self.sizes.binary_search(&size) {
            Ok(k) => self.probs[k],
            Err(_) => 0.0,
        }
    }

    /// Sum of the stored weights (1 minus the truncated mass).
    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Mean jump size of the retained mass, normalized by the retained mass.
    pub fn mean_jump(&self) -> f64 {
        let total = self.total_mass();
        self.sizes
            .iter()
            .zip(&self.probs)
            .map(|(&s, &p)| s as f64 * p)
            .sum::<f64>()
            / total
    }

    /// Inversion sampler over the stored weights; residual mass draws `None`.
    pub fn sampler(&self) -> JumpSampler {
        let mut cum = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for &p in &self.probs {
            acc += p;
            cum.push(acc);
        }
        JumpSampler {
            sizes: self.sizes.clone(),
            cum,
            total: acc,
        }
    }
}

/// Cumulative-table sampler for a [`JumpLaw`].
#[derive(Debug, Clone)]
pub struct JumpSampler {
    sizes: Vec<u64>,
    cum: Vec<f64>,
    total: f64,
}

impl JumpSampler {
    /// Draws a jump size; `None` means the draw fell in the truncated residual
    /// mass (a jump beyond the stored sizes).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u64> {
        let u: f64 = rng.random();
        if u >= self.total {
            return None;
        }
        let k = self.cum.partition_point(|&c| c <= u);
        Some(self.sizes[k.min(self.sizes.len() - 1)])
    }
}

/// Log-factorial lookup, built once per evaluation.
struct LnFactTable(Vec<f64>);

impl LnFactTable {
    fn new(max: u64) -> Self {
        let mut table = Vec::with_capacity(max as usize + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for m in 1..=max {
            acc += (m as f64).ln();
            table.push(acc);
        }
        Self(table)
    }

    fn get(&self, n: u64) -> f64 {
        self.0[n as usize]
    }
}

/// Shared evaluator for the composition sums: with `r = lambda*t` returns
/// `sum_x exp(-base) * r^(sum x_j) / prod x_j!` over the weighted
/// compositions of `n`.
fn composition_sum(g: &WeightTable, n: u64, rate_time: f64, base: f64) -> f64 {
    if rate_time == 0.0 {
        // Only the empty composition survives r^0 = 1; it exists iff n = 0.
        return if n == 0 { (-base).exp() } else { 0.0 };
    }
    let log_r = rate_time.ln();
    let min_w = g.weights()[0];
    let lf = LnFactTable::new(n / min_w);
    let mut acc = 0.0;
    for_each_composition(n, g, |counts| {
        let mut events = 0u64;
        let mut log_fact = 0.0;
        for &x in counts {
            events += x;
            log_fact += lf.get(x);
        }
        acc += (-base + events as f64 * log_r - log_fact).exp();
    });
    acc
}

/// `P[Y(t) = n]` for the order-`i` process.
pub fn pmf_order_i(p: &OrderParams, n: u64) -> f64 {
    pmf_weighted(p, &WeightTable::consecutive(p.order()), n)
}

/// `P[Z(t) = n]` for the weighted process with jump table `g`.
///
/// The table's length fixes the number of components; `p.order()` is not
/// consulted so the two cannot disagree.
pub fn pmf_weighted(p: &OrderParams, g: &WeightTable, n: u64) -> f64 {
    let lt = p.rate_time();
    composition_sum(g, n, lt, f64::from(g.order()) * lt)
}

/// Probability generating function `E[u^{Y(t)}]` for `u` in `[0, 1]`:
/// `exp(-i*lambda*t + lambda*t * (u + u^2 + ... + u^i))`.
pub fn pgf_y(p: &OrderParams, u: f64) -> Result<f64> {
    if !(u.is_finite() && (0.0..=1.0).contains(&u)) {
        return Err(Error::Domain {
            name: "u",
            value: u,
            reason: "pgf argument must lie in [0, 1]",
        });
    }
    let lt = p.rate_time();
    let mut power_sum = 0.0;
    let mut power = 1.0;
    for _ in 0..p.order() {
        power *= u;
        power_sum += power;
    }
    Ok((lt * (power_sum - f64::from(p.order()))).exp())
}

/// A truncated series value together with a certified bound on the dropped
/// terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
}

/// `P[U(t) = m]` for the doubly stochastic process `U(t) = Y(N_beta(t))`:
/// the order-`i` process evaluated at an independent Poisson(`beta*t`) time.
///
/// The mixing series over the integer time `r` starts at `r = 0` (where
/// `Y(0) = 0`) and is truncated once the remaining Poisson weight drops below
/// `series_eps`; that remainder bounds the dropped mass and is returned.
pub fn pmf_iterated_u(p: &OrderParams, beta: f64, m: u64, series_eps: f64) -> Result<SeriesValue> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Domain {
            name: "beta",
            value: beta,
            reason: "clock rate must be positive and finite",
        });
    }
    if !(series_eps.is_finite() && series_eps > 0.0 && series_eps < 1.0) {
        return Err(Error::Domain {
            name: "series_eps",
            value: series_eps,
            reason: "series tolerance must lie in (0, 1)",
        });
    }
    let bt = beta * p.t();
    if bt == 0.0 {
        return Ok(SeriesValue {
            value: if m == 0 { 1.0 } else { 0.0 },
            tail_bound: 0.0,
        });
    }

    // Precompute the composition structure of m once; per integer time r we
    // only re-evaluate exp(-i*lambda*r + events*ln(lambda*r) - log_facts).
    let g = WeightTable::consecutive(p.order());
    let lf = LnFactTable::new(m);
    let mut comps: Vec<(u64, f64)> = Vec::new();
    for_each_composition(m, &g, |counts| {
        let events: u64 = counts.iter().sum();
        let log_fact: f64 = counts.iter().map(|&x| lf.get(x)).sum();
        comps.push((events, log_fact));
    });

    let i = f64::from(p.order());
    let lambda = p.lambda();
    let mut pois = (-bt).exp();
    let mut cum_pois = 0.0;
    let mut value = 0.0;
    for r in 0..SERIES_CAP {
        let py = if r == 0 {
            if m == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            let lr = lambda * r as f64;
            let log_lr = lr.ln();
            comps
                .iter()
                .map(|&(events, log_fact)| (-i * lr + events as f64 * log_lr - log_fact).exp())
                .sum()
        };
        value += pois * py;
        cum_pois += pois;
        let tail = (1.0 - cum_pois).max(0.0);
        if tail < series_eps {
            return Ok(SeriesValue {
                value,
                tail_bound: tail,
            });
        }
        pois *= bt / (r + 1) as f64;
    }
    Err(Error::Unsupported(format!(
        "series for the doubly stochastic pmf did not converge within {SERIES_CAP} terms (beta*t = {bt})"
    )))
}

fn build_table(tail_eps: f64, mut prob_at: impl FnMut(u64) -> Result<f64>) -> Result<Pmf> {
    if !(tail_eps.is_finite() && tail_eps > 0.0 && tail_eps < 1.0) {
        return Err(Error::Domain {
            name: "tail_eps",
            value: tail_eps,
            reason: "tail tolerance must lie in (0, 1)",
        });
    }
    let mut probs = Vec::new();
    let mut cum = 0.0;
    for n in 0..=SUPPORT_CAP {
        let p = prob_at(n)?;
        probs.push(p.clamp(0.0, 1.0));
        cum += p;
        if 1.0 - cum < tail_eps {
            return Pmf::from_parts(probs, (1.0 - cum).max(0.0));
        }
    }
    Err(Error::Unsupported(format!(
        "table support exceeded {SUPPORT_CAP} before reaching the requested tail bound"
    )))
}

/// Pmf table of the order-`i` process with tail mass below `tail_eps`.
pub fn pmf_table_y(p: &OrderParams, tail_eps: f64) -> Result<Pmf> {
    pmf_table_weighted(p, &WeightTable::consecutive(p.order()), tail_eps)
}

/// Pmf table of the weighted process with tail mass below `tail_eps`.
pub fn pmf_table_weighted(p: &OrderParams, g: &WeightTable, tail_eps: f64) -> Result<Pmf> {
    build_table(tail_eps, |n| Ok(pmf_weighted(p, g, n)))
}

/// Pmf table of the doubly stochastic process with tail mass below
/// `tail_eps`; each entry's own series truncation is folded into the table's
/// tail bound (entries underestimate, so `1 - sum` remains certified).
pub fn pmf_table_u(p: &OrderParams, beta: f64, tail_eps: f64, series_eps: f64) -> Result<Pmf> {
    build_table(tail_eps, |m| Ok(pmf_iterated_u(p, beta, m, series_eps)?.value))
}

/// Jump law of the order-`i` chain: uniform on `{1, ..., i}`.
pub fn jump_law_y(i: u32) -> Result<JumpLaw> {
    if i == 0 {
        return Err(Error::Domain {
            name: "i",
            value: 0.0,
            reason: "order must be at least 1",
        });
    }
    let q = 1.0 / f64::from(i);
    JumpLaw::from_parts((1..=u64::from(i)).collect(), vec![q; i as usize], 0.0)
}

/// Jump law of the weighted chain: mass `1/i` at each `g(j)`, with tied
/// weights aggregated onto one size.
pub fn jump_law_z(g: &WeightTable) -> JumpLaw {
    let q = 1.0 / f64::from(g.order());
    let mut sizes: Vec<u64> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    for &w in g.weights() {
        if sizes.last() == Some(&w) {
            *probs.last_mut().expect("nonempty") += q;
        } else {
            sizes.push(w);
            probs.push(q);
        }
    }
    JumpLaw::from_parts(sizes, probs, 0.0).expect("weight table yields a proper law")
}

/// Jump law of the subordinated chain `W = Y(H^f)`.
///
/// The rate of jumps of size `h` is
/// `-sum_{x : sum_j j x_j = h} (-lambda)^(sum x) / prod x_j! * f^(sum x)(i*lambda)`
/// (derivatives of `f` in its own argument), and the law divides by the total
/// jump rate `f(i*lambda)`. Complete monotonicity of `f'` makes every
/// composition term carry the same sign, so the sum loses nothing to
/// cancellation; terms are accumulated in log space.
///
/// The support is extended until the residual drops below `eps` or `h_max` is
/// reached; the residual `1 - sum_h q(h)` is recorded as the truncation. For
/// the stable kind the tail decays like `h^(-1-alpha)`, so tight residuals are
/// genuinely unreachable and callers should expect `truncation_eps` well above
/// `eps` at practical `h_max`.
pub fn jump_law_w(f: &BernsteinFn, p: &OrderParams, h_max: u64, eps: f64) -> Result<JumpLaw> {
    if h_max == 0 {
        return Err(Error::Domain {
            name: "h_max",
            value: 0.0,
            reason: "need at least one jump size",
        });
    }
    if !(eps.is_finite() && eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain {
            name: "eps",
            value: eps,
            reason: "truncation tolerance must lie in (0, 1)",
        });
    }
    let x = f64::from(p.order()) * p.lambda();
    let total_rate = f.value(x)?;
    let log_lambda = p.lambda().ln();
    let g = WeightTable::consecutive(p.order());

    // log |f^(s)(x)| for s = 1..=h_max; sign is uniform so only magnitudes
    // matter. Sign 0 (identically zero derivative) drops the term.
    let mut log_derivs = Vec::with_capacity(h_max as usize + 1);
    log_derivs.push(f64::NEG_INFINITY);
    for s in 1..=h_max {
        let (log_mag, sign) = f.log_abs_nth_deriv(x, s as u32)?;
        log_derivs.push(if sign == 0 { f64::NEG_INFINITY } else { log_mag });
    }
    let lf = LnFactTable::new(h_max);
    let abs_first_deriv = f.nth_deriv(x, 1)?.abs();

    let mut sizes = Vec::new();
    let mut probs = Vec::new();
    let mut cum = 0.0;
    for h in 1..=h_max {
        let mut acc = 0.0;
        for_each_composition(h, &g, |counts| {
            let mut events = 0u64;
            let mut log_fact = 0.0;
            for &c in counts {
                events += c;
                log_fact += lf.get(c);
            }
            if events == 1 {
                // Single-event compositions cannot overflow; evaluating them
                // directly keeps exact reductions (the unit-order stable
                // change has q(1) = alpha on the nose) free of the log/exp
                // round trip.
                acc += p.lambda() * abs_first_deriv;
            } else {
                let log_term =
                    events as f64 * log_lambda - log_fact + log_derivs[events as usize];
                acc += log_term.exp();
            }
        });
        let q = acc / total_rate;
        sizes.push(h);
        probs.push(q.clamp(0.0, 1.0));
        cum += q;
        if 1.0 - cum < eps {
            break;
        }
    }
    JumpLaw::from_parts(sizes, probs, (1.0 - cum).max(0.0))
}

/// Jump law of the doubly stochastic chain: the order-`i` process at unit
/// time conditioned on being positive, `q(h) = P[Y(1) = h] / (1 - e^{-i*lambda})`,
/// truncated once the residual drops below `eps`.
pub fn jump_law_u(p: &OrderParams, eps: f64) -> Result<JumpLaw> {
    if !(eps.is_finite() && eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain {
            name: "eps",
            value: eps,
            reason: "truncation tolerance must lie in (0, 1)",
        });
    }
    let unit = p.with_t(1.0)?;
    let denom = 1.0 - (-f64::from(p.order()) * p.lambda()).exp();
    let mut sizes = Vec::new();
    let mut probs = Vec::new();
    let mut cum = 0.0;
    for h in 1..=SUPPORT_CAP {
        let q = pmf_order_i(&unit, h) / denom;
        sizes.push(h);
        probs.push(q.clamp(0.0, 1.0));
        cum += q;
        if 1.0 - cum < eps {
            return JumpLaw::from_parts(sizes, probs, (1.0 - cum).max(0.0));
        }
    }
    Err(Error::Unsupported(format!(
        "jump-law support exceeded {SUPPORT_CAP} before reaching the requested residual"
    )))
}
