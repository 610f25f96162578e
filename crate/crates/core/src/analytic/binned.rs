use serde::Serialize;

use super::{empty_set_prob, GatedExponential, RelaySumCdf};
use crate::error::{Error, Result};
use crate::numeric::{one_minus_exp_neg, CompensatedSum};
use crate::topology::LinkParam;

/// Probabilities of an SNR falling in consecutive bins of equal width;
/// bin `j` (zero-based) covers `(j * width, (j + 1) * width]`.
///
/// Masses need not sum to one: the relay-sum PMF is defective.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedPmf {
    pub width: f64,
    pub bins: Vec<f64>,
}

impl BinnedPmf {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn total(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        self.bins.iter().for_each(|&b| acc.add(b));
        acc.value()
    }
}

/// Increments of the relay-sum CDF over `granularity` bins spanning `[0, gamma_th]`.
pub fn bin_relay_sum(cdf: &dyn RelaySumCdf, gamma_th: f64, granularity: usize) -> BinnedPmf {
    let width = gamma_th / granularity as f64;
    let bins = (0..granularity)
        .map(|j| cdf.interval_mass(j as f64 * width, (j + 1) as f64 * width))
        .collect();
    BinnedPmf { width, bins }
}

/// PMF of the direct SNR conditioned on being below `gamma_th`.
pub fn bin_conditional_direct(
    link: LinkParam,
    gamma_th: f64,
    granularity: usize,
) -> Result<BinnedPmf> {
    let rate = link.rate();
    let outage = one_minus_exp_neg(rate * gamma_th);
    if !(gamma_th > 0.0) || outage == 0.0 {
        return Err(Error::ImpossibleConditioning(
            "direct SNR below a zero threshold".into(),
        ));
    }
    let width = gamma_th / granularity as f64;
    let step = one_minus_exp_neg(rate * width);
    let bins = (0..granularity)
        .map(|j| (-rate * j as f64 * width).exp() * step / outage)
        .collect();
    Ok(BinnedPmf { width, bins })
}

/// Full discrete convolution `c[k] = sum_i a[i] b[k - i]` of length
/// `len(a) + len(b) - 1`.
///
/// Index `k` collects bin pairs `(i, k - i)`; the sum of two SNRs drawn from
/// those bins lies in `(k w, (k + 2) w]`, centred on the right edge of bin `k`.
pub fn convolve_raw(a: &BinnedPmf, b: &BinnedPmf) -> BinnedPmf {
    if a.is_empty() || b.is_empty() {
        return BinnedPmf {
            width: a.width,
            bins: Vec::new(),
        };
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.bins.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (k, &y) in b.bins.iter().enumerate() {
            out[i + k] += x * y;
        }
    }
    BinnedPmf {
        width: a.width,
        bins: out,
    }
}

/// Step-2 outage: convolve the binned relay sum with the binned conditional
/// direct SNR, keep the first `granularity` output entries and condition on a
/// non-empty decode set.
pub fn step2_outage(
    relay_pmf: &BinnedPmf,
    direct_pmf: &BinnedPmf,
    gates: &[GatedExponential],
) -> Result<f64> {
    if relay_pmf.len() != direct_pmf.len()
        || (relay_pmf.width - direct_pmf.width).abs() > 1e-12 * relay_pmf.width.abs()
    {
        return Err(Error::Domain(
            "relay and direct PMFs must share threshold and granularity".into(),
        ));
    }
    let nonempty = 1.0 - empty_set_prob(gates);
    if nonempty <= 0.0 {
        return Err(Error::ImpossibleConditioning(
            "no relay can ever decode".into(),
        ));
    }
    let combined = convolve_raw(relay_pmf, direct_pmf);
    let mut acc = CompensatedSum::new();
    combined.bins[..relay_pmf.len()]
        .iter()
        .for_each(|&p| acc.add(p));
    Ok((acc.value() / nonempty).clamp(0.0, 1.0))
}
