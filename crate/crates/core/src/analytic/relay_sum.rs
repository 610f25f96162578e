//! Distribution of the MRC relay sum over non-empty decode sets.
//!
//! For a decode set `C` the relay sum is a sum of independent exponentials
//! with distinct rates, whose CDF is
//! `sum_{j in C} prod_{k in C, k != j} theta(j, k) * (1 - exp(-rate_j x))`
//! with `theta(j, k) = rate_k / (rate_k - rate_j)`. Weighting each set by its
//! probability and summing over all non-empty sets gives a defective CDF whose
//! total mass is `1 - prod A_k`.

use serde::{Deserialize, Serialize};

use super::GatedExponential;
use crate::error::{Error, Result};
use crate::numeric::{one_minus_exp_neg, sum_by_magnitude, CompensatedSum};

/// Relative tolerance below which two rates count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// Relative step used to split tied rates.
pub const TIE_PERTURBATION: f64 = 1e-7;
/// Largest relay count for which the `2^m - 1` subsets are enumerated.
pub const MAX_CLOSED_FORM_RELAYS: usize = 20;

/// Partial-fraction coefficient `rate_y / (rate_y - rate_x)`, written in
/// terms of powered relay-to-destination distances `d_x^alpha`, `d_y^alpha`
/// (the common SNR factor cancels).
pub fn theta(d_x: f64, d_y: f64, alpha: f64) -> Result<f64> {
    let px = d_x.powf(alpha);
    let py = d_y.powf(alpha);
    theta_from_rates(px, py).ok_or(Error::RateTie { first: 0, second: 1 })
}

fn theta_from_rates(rate_x: f64, rate_y: f64) -> Option<f64> {
    let diff = rate_y - rate_x;
    if diff == 0.0 || is_tie(rate_x, rate_y) {
        None
    } else {
        Some(rate_y / diff)
    }
}

fn is_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Anything that behaves like the defective relay-sum CDF.
pub trait RelaySumCdf {
    /// `Pr{relay sum <= x, decode set non-empty}`.
    fn cdf(&self, x: f64) -> f64;

    /// Total mass, `1 - prod A_k`.
    fn mass(&self) -> f64;

    /// `cdf(hi) - cdf(lo)`, clamped at zero.
    fn interval_mass(&self, lo: f64, hi: f64) -> f64 {
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }
}

/// One decode set's contribution to the expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetTerm {
    /// Bit `i` set when relay `i` belongs to the decode set.
    pub members: u32,
    /// `Pr{C}`.
    pub weight: f64,
    /// `(coefficient, rate)` pairs; the set's conditional CDF is
    /// `sum coefficient * (1 - exp(-rate x))`.
    pub terms: Vec<(f64, f64)>,
}

/// Closed-form defective CDF of the relay sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectiveCdf {
    gates: Vec<f64>,
    rates: Vec<f64>,
    /// Aggregated coefficient of `(1 - exp(-rate_j x))` over all decode sets.
    weights: Vec<f64>,
    empty_prob: f64,
    perturbed: bool,
}

impl DefectiveCdf {
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn gates(&self) -> &[f64] {
        &self.gates
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `prod A_k`.
    pub fn empty_prob(&self) -> f64 {
        self.empty_prob
    }

    /// Whether tied rates were split before expansion.
    pub fn is_perturbed(&self) -> bool {
        self.perturbed
    }

    /// Per-decode-set expansion, regenerated on demand.
    pub fn subset_terms(&self) -> impl Iterator<Item = SubsetTerm> + '_ {
        let m = self.rates.len();
        (1u32..(1u32 << m)).map(move |mask| {
            let weight = subset_weight(&self.gates, mask);
            let terms = members(mask, m)
                .map(|j| (subset_coefficient(&self.rates, mask, j), self.rates[j]))
                .collect();
            SubsetTerm {
                members: mask,
                weight,
                terms,
            }
        })
    }
}

impl RelaySumCdf for DefectiveCdf {
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let mut terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.rates)
            .map(|(w, r)| w * one_minus_exp_neg(r * x))
            .collect();
        sum_by_magnitude(&mut terms)
    }

    fn mass(&self) -> f64 {
        let mut w = self.weights.clone();
        sum_by_magnitude(&mut w)
    }

    fn interval_mass(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(0.0);
        if hi <= lo {
            return 0.0;
        }
        // exp(-r lo) - exp(-r hi) = exp(-r lo) * (1 - exp(-r (hi - lo)))
        let mut terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.rates)
            .map(|(w, r)| w * (-r * lo).exp() * one_minus_exp_neg(r * (hi - lo)))
            .collect();
        sum_by_magnitude(&mut terms).max(0.0)
    }
}

fn members(mask: u32, m: usize) -> impl Iterator<Item = usize> {
    (0..m).filter(move |i| mask & (1 << i) != 0)
}

fn subset_weight(gates: &[f64], mask: u32) -> f64 {
    gates
        .iter()
        .enumerate()
        .map(|(i, a)| if mask & (1 << i) != 0 { 1.0 - a } else { *a })
        .product()
}

fn subset_coefficient(rates: &[f64], mask: u32, j: usize) -> f64 {
    members(mask, rates.len())
        .filter(|&k| k != j)
        .map(|k| rates[k] / (rates[k] - rates[j]))
        .product()
}

fn check_ties(rates: &[f64]) -> Result<()> {
    for i in 0..rates.len() {
        for k in (i + 1)..rates.len() {
            if theta_from_rates(rates[i], rates[k]).is_none() {
                return Err(Error::RateTie {
                    first: i,
                    second: k,
                });
            }
        }
    }
    Ok(())
}

/// Expands the relay-sum CDF by enumerating every non-empty decode set.
///
/// Fails on tied rates and on more than [`MAX_CLOSED_FORM_RELAYS`] relays.
pub fn relay_sum_cdf(gates: &[GatedExponential]) -> Result<DefectiveCdf> {
    let m = gates.len();
    if m == 0 {
        return Err(Error::Domain("relay sum needs at least one relay".into()));
    }
    if m > MAX_CLOSED_FORM_RELAYS {
        return Err(Error::TooManyRelays {
            relays: m,
            limit: MAX_CLOSED_FORM_RELAYS,
        });
    }
    let rates: Vec<f64> = gates.iter().map(|g| g.rate()).collect();
    let gate_probs: Vec<f64> = gates.iter().map(|g| g.gate_prob()).collect();
    check_ties(&rates)?;

    // theta[j][k] = rate_k / (rate_k - rate_j)
    let theta: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            (0..m)
                .map(|k| if j == k { 1.0 } else { rates[k] / (rates[k] - rates[j]) })
                .collect()
        })
        .collect();

    let mut per_rate: Vec<Vec<f64>> = vec![Vec::with_capacity(1 << (m - 1)); m];
    for mask in 1u32..(1u32 << m) {
        let weight = subset_weight(&gate_probs, mask);
        if weight == 0.0 {
            continue;
        }
        for j in members(mask, m) {
            let coef: f64 = members(mask, m)
                .filter(|&k| k != j)
                .map(|k| theta[j][k])
                .product();
            per_rate[j].push(weight * coef);
        }
    }
    let weights = per_rate
        .iter_mut()
        .map(|terms| sum_by_magnitude(terms))
        .collect();

    Ok(DefectiveCdf {
        empty_prob: gate_probs.iter().product(),
        gates: gate_probs,
        rates,
        weights,
        perturbed: false,
    })
}

/// Aggregated coefficients via the residue of the product MGF at each pole:
/// `(1 - A_j) * prod_{k != j} (A_k + (1 - A_k) theta(j, k))`.
///
/// Algebraically identical to the subset-enumeration weights, so it serves
/// as an independent cross-check and costs only `O(m^2)`.
pub fn residue_weights(gates: &[GatedExponential]) -> Result<Vec<f64>> {
    let rates: Vec<f64> = gates.iter().map(|g| g.rate()).collect();
    check_ties(&rates)?;
    Ok((0..gates.len())
        .map(|j| {
            let mut w = 1.0 - gates[j].gate_prob();
            for (k, g) in gates.iter().enumerate() {
                if k != j {
                    let th = rates[k] / (rates[k] - rates[j]);
                    w *= g.gate_prob() + (1.0 - g.gate_prob()) * th;
                }
            }
            w
        })
        .collect())
}

/// Splits every group of (relatively) tied rates by factors
/// `1, 1 + 1e-7, 1 - 1e-7, 1 + 2e-7, ...`. Returns the adjusted gates and
/// whether anything changed.
pub fn perturb_ties(gates: &[GatedExponential]) -> Result<(Vec<GatedExponential>, bool)> {
    let mut order: Vec<usize> = (0..gates.len()).collect();
    order.sort_by(|&a, &b| gates[a].rate().total_cmp(&gates[b].rate()));

    let mut out = gates.to_vec();
    let mut changed = false;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && is_tie(gates[order[start]].rate(), gates[order[end]].rate()) {
            end += 1;
        }
        for (t, &idx) in order[start..end].iter().enumerate().skip(1) {
            let step = t.div_ceil(2) as f64 * TIE_PERTURBATION;
            let factor = if t % 2 == 1 { 1.0 + step } else { 1.0 - step };
            let g = gates[idx];
            out[idx] = GatedExponential::new(g.gate_prob(), g.rate() * factor)?;
            changed = true;
        }
        start = end;
    }
    Ok((out, changed))
}

/// Closed form after splitting tied rates. Accurate to roughly `1e-7`
/// relative for pairwise ties; larger tie groups lose precision quickly
/// and should use [`numerical_relay_sum`].
pub fn relay_sum_cdf_perturbed(gates: &[GatedExponential]) -> Result<DefectiveCdf> {
    let (adjusted, changed) = perturb_ties(gates)?;
    let mut cdf = relay_sum_cdf(&adjusted)?;
    cdf.perturbed = changed;
    Ok(cdf)
}

/// Relay-sum CDF from convolving the per-path distributions on a uniform grid.
///
/// Each path is rounded to the nearest grid point, so the lattice CDF at
/// `k` approximates the continuous CDF at `(k + 1/2) h` with `O(h^2)` error.
/// Convolution with the geometric tail of a rounded exponential is a
/// first-order recursion, so the whole construction is `O(m * cells)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericalRelaySum {
    cell: f64,
    /// `cumulative[k]` approximates `F((k + 1/2) * cell)`.
    cumulative: Vec<f64>,
    mass: f64,
}

impl NumericalRelaySum {
    pub fn cell(&self) -> f64 {
        self.cell
    }

    /// Largest argument the grid covers.
    pub fn upper(&self) -> f64 {
        (self.cumulative.len() as f64 - 0.5) * self.cell
    }
}

impl RelaySumCdf for NumericalRelaySum {
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let pos = x / self.cell - 0.5;
        if pos < 0.0 {
            // between the origin (value 0) and the first half-grid point
            return self.cumulative[0] * (x / (0.5 * self.cell));
        }
        let k = pos.floor() as usize;
        if k + 1 >= self.cumulative.len() {
            return *self.cumulative.last().unwrap();
        }
        let frac = pos - k as f64;
        self.cumulative[k] + frac * (self.cumulative[k + 1] - self.cumulative[k])
    }

    fn mass(&self) -> f64 {
        self.mass
    }
}

/// Builds a [`NumericalRelaySum`] covering `[0, upper]` with `cells` cells.
/// Works with ties and any relay count.
pub fn numerical_relay_sum(
    gates: &[GatedExponential],
    upper: f64,
    cells: usize,
) -> Result<NumericalRelaySum> {
    if gates.is_empty() {
        return Err(Error::Domain("relay sum needs at least one relay".into()));
    }
    if !(upper > 0.0 && upper.is_finite()) || cells < 2 {
        return Err(Error::Domain(format!(
            "numerical grid needs upper > 0 and at least 2 cells (got {upper}, {cells})"
        )));
    }
    let h = upper / cells as f64;
    let n = cells + 1;
    let mut x = vec![0.0; n];
    x[0] = 1.0;
    let mut y = vec![0.0; n];
    for g in gates {
        let a = g.gate_prob();
        let lh = g.rate() * h;
        let r = (-lh).exp();
        let p0 = a + (1.0 - a) * one_minus_exp_neg(0.5 * lh);
        // mass rounded onto grid point 1
        let q1 = (1.0 - a) * (-0.5 * lh).exp() * one_minus_exp_neg(lh);
        let mut s = 0.0;
        for k in 0..n {
            if k > 0 {
                s = q1 * x[k - 1] + r * s;
            }
            y[k] = p0 * x[k] + s;
        }
        std::mem::swap(&mut x, &mut y);
    }
    let empty: f64 = gates.iter().map(|g| g.gate_prob()).product();
    let mut acc = CompensatedSum::new();
    acc.add(-empty);
    let cumulative = x
        .iter()
        .map(|&p| {
            acc.add(p);
            acc.value().max(0.0)
        })
        .collect();
    Ok(NumericalRelaySum {
        cell: h,
        cumulative,
        mass: 1.0 - empty,
    })
}

/// How the relay-sum distribution is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelaySumMethod {
    /// Closed form; errors on ties or too many relays.
    ClosedForm,
    /// Closed form with tied rates split.
    Perturbed,
    /// Grid convolution.
    Numerical,
    /// Closed form when possible, perturbed for pairwise ties, otherwise numerical.
    #[default]
    Auto,
}
