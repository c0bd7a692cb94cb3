//! Discrete probability distributions over non-negative travel durations.
//!
//! Every random travel cost in the engine is a [`DiscreteDistribution`]: a
//! pmf on a uniform grid of time bins. The representative point of bin `i`
//! is `(offset_bins + i) * bin_width` seconds. All operations are pure and
//! the type is immutable after construction, so values can be shared freely
//! across threads.


use crate::error::{Error, Result};

/// Tolerance for pmf normalization checks.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Tolerance band for CDF comparisons; differences within it count as equal.
pub const CDF_TOL: f64 = 1e-12;
/// Per-bin mass below this (at the edges of the support) is trimmed after
/// a convolution/extension and the result renormalized. Keeps supports from
/// growing with negligible tails over long paths.
pub const TAIL_TRIM: f64 = 1e-12;

/// Outcome of a first-order stochastic dominance comparison.
///
/// "Dominates" follows the cost convention: the dominating distribution is
/// stochastically *larger* (its CDF is pointwise lower), i.e. the worse one
/// for a traveller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsdOrdering {
    Equal,
    FirstDominates,
    SecondDominates,
    Incomparable,
}

impl FsdOrdering {
    pub fn flipped(self) -> Self {
        match self {
            FsdOrdering::FirstDominates => FsdOrdering::SecondDominates,
            FsdOrdering::SecondDominates => FsdOrdering::FirstDominates,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    bin_width: f64,
    offset_bins: u64,
    pmf: Vec<f64>,
}

impl DiscreteDistribution {
    /// Build from an already-normalized pmf. `pmf[i]` is the mass at
    /// duration `(offset_bins + i) * bin_width`.
    pub fn from_pmf(bin_width: f64, offset_bins: u64, pmf: Vec<f64>) -> Result<Self> {
        if !(bin_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bin_width must be positive, got {bin_width}"
            )));
        }
        if pmf.is_empty() {
            return Err(Error::InvalidParameter("empty pmf".into()));
        }
        if let Some(p) = pmf.iter().find(|p| **p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad pmf entry {p}")));
        }
        let sum: f64 = pmf.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidParameter(format!(
                "pmf sums to {sum}, expected 1"
            )));
        }
        let mut d = DiscreteDistribution {
            bin_width,
            offset_bins,
            pmf,
        };
        d.trim_zeros();
        Ok(d)
    }

    /// Build from non-negative counts or weights; normalizes to a pmf.
    pub fn from_counts(bin_width: f64, offset_bins: u64, counts: Vec<f64>) -> Result<Self> {
        let sum: f64 = counts.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidParameter("all-zero counts".into()));
        }
        let pmf = counts.into_iter().map(|c| c / sum).collect();
        Self::from_pmf(bin_width, offset_bins, pmf)
    }

    /// All mass at a single duration, rounded *down* to the grid.
    pub fn point_mass(bin_width: f64, duration: f64) -> Result<Self> {
        if duration < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "negative duration {duration}"
            )));
        }
        Self::from_pmf(bin_width, duration_to_bins(duration, bin_width)?, vec![1.0])
    }

    /// Convenience for tests and fixtures: `(duration, mass)` pairs whose
    /// durations must all sit on the grid.
    pub fn from_support(bin_width: f64, support: &[(f64, f64)]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidParameter("empty support".into()));
        }
        let bins: Vec<u64> = support
            .iter()
            .map(|(x, _)| duration_to_bins(*x, bin_width))
            .collect::<Result<_>>()?;
        let lo = *bins.iter().min().unwrap();
        let hi = *bins.iter().max().unwrap();
        let mut pmf = vec![0.0; (hi - lo + 1) as usize];
        for (b, (_, p)) in bins.iter().zip(support) {
            pmf[(b - lo) as usize] += p;
        }
        Self::from_pmf(bin_width, lo, pmf)
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn offset(&self) -> f64 {
        self.offset_bins as f64 * self.bin_width
    }

    pub fn offset_bins(&self) -> u64 {
        self.offset_bins
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn num_bins(&self) -> usize {
        self.pmf.len()
    }

    /// Smallest duration carrying mass.
    pub fn support_min(&self) -> f64 {
        self.offset()
    }

    /// Largest duration carrying mass.
    pub fn support_max(&self) -> f64 {
        (self.offset_bins + self.pmf.len() as u64 - 1) as f64 * self.bin_width
    }

    pub fn is_point_mass(&self) -> bool {
        self.pmf.len() == 1
    }

    /// Iterate `(duration, mass)` over bins with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.pmf.iter().enumerate().filter_map(move |(i, &p)| {
            (p > 0.0).then(|| ((self.offset_bins + i as u64) as f64 * self.bin_width, p))
        })
    }

    /// P(X <= x).
    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (i, p) in self.pmf.iter().enumerate() {
            let v = (self.offset_bins + i as u64) as f64 * self.bin_width;
            if v <= x + CDF_TOL.max(1e-9 * self.bin_width) {
                acc += p;
            } else {
                break;
            }
        }
        acc
    }

    /// Pseudo-inverse of the CDF: the smallest support duration `x` with
    /// `cdf(x) >= alpha`.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "quantile level {alpha} outside (0, 1]"
            )));
        }
        let mut acc = 0.0;
        for (i, p) in self.pmf.iter().enumerate() {
            acc += p;
            if acc >= alpha - CDF_TOL {
                return Ok((self.offset_bins + i as u64) as f64 * self.bin_width);
            }
        }
        Ok(self.support_max())
    }

    pub fn mean(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, p)| p * (self.offset_bins + i as u64) as f64 * self.bin_width)
            .sum()
    }

    /// Add a deterministic non-negative duration, rounded down to the grid.
    pub fn shift(&self, c: f64) -> Result<Self> {
        if c < 0.0 {
            return Err(Error::InvalidParameter(format!("negative shift {c}")));
        }
        Ok(self.shift_bins(duration_to_bins(c, self.bin_width)?))
    }

    pub fn shift_bins(&self, bins: u64) -> Self {
        DiscreteDistribution {
            bin_width: self.bin_width,
            offset_bins: self.offset_bins + bins,
            pmf: self.pmf.clone(),
        }
    }

    /// Total mass strictly above `horizon`.
    pub fn mass_above(&self, horizon: f64) -> f64 {
        1.0 - self.cdf(horizon)
    }

    /// Aggregate all mass above `horizon` (a grid multiple) into the horizon
    /// bin. Total mass is unchanged.
    pub fn cap(&self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon {horizon}")));
        }
        let hbin = (horizon / self.bin_width).round();
        if (hbin * self.bin_width - horizon).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "horizon {horizon} is not a multiple of bin width {}",
                self.bin_width
            )));
        }
        let hbin = hbin as u64;
        if self.offset_bins + self.pmf.len() as u64 - 1 <= hbin {
            return Ok(self.clone());
        }
        if self.offset_bins >= hbin {
            return Ok(DiscreteDistribution {
                bin_width: self.bin_width,
                offset_bins: hbin,
                pmf: vec![1.0],
            });
        }
        let keep = (hbin - self.offset_bins) as usize;
        let mut pmf: Vec<f64> = self.pmf[..keep].to_vec();
        pmf.push(self.pmf[keep..].iter().sum());
        let mut d = DiscreteDistribution {
            bin_width: self.bin_width,
            offset_bins: self.offset_bins,
            pmf,
        };
        d.trim_zeros();
        Ok(d)
    }

    /// Sum of two independent costs (standard discrete convolution).
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let mut pmf = vec![0.0; self.pmf.len() + other.pmf.len() - 1];
        for (i, p) in self.pmf.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            for (j, q) in other.pmf.iter().enumerate() {
                pmf[i + j] += p * q;
            }
        }
        let mut d = DiscreteDistribution {
            bin_width: self.bin_width,
            offset_bins: self.offset_bins + other.offset_bins,
            pmf,
        };
        d.renormalize()?;
        Ok(d)
    }

    /// Weighted mixture of distributions on the same grid.
    pub fn mixture(parts: &[(f64, &DiscreteDistribution)]) -> Result<Self> {
        let Some(((_, first), rest)) = parts.split_first() else {
            return Err(Error::InvalidParameter("empty mixture".into()));
        };
        for (_, d) in rest {
            first.check_grid(d)?;
        }
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("mixture weights sum to 0".into()));
        }
        let lo = parts
            .iter()
            .map(|(_, d)| d.offset_bins)
            .min()
            .unwrap();
        let hi = parts
            .iter()
            .map(|(_, d)| d.offset_bins + d.pmf.len() as u64 - 1)
            .max()
            .unwrap();
        let mut pmf = vec![0.0; (hi - lo + 1) as usize];
        for (w, d) in parts {
            for (i, p) in d.pmf.iter().enumerate() {
                pmf[(d.offset_bins - lo) as usize + i] += w / total * p;
            }
        }
        Self::from_counts(first.bin_width, lo, pmf)
    }

    /// Pointwise CDF comparison over the union of supports.
    pub fn fsd_compare(&self, other: &Self) -> Result<FsdOrdering> {
        self.check_grid(other)?;
        let lo = self.offset_bins.min(other.offset_bins);
        let hi = (self.offset_bins + self.pmf.len() as u64)
            .max(other.offset_bins + other.pmf.len() as u64);
        let mut c1 = 0.0;
        let mut c2 = 0.0;
        let mut first_above = false; // F1 > F2 somewhere
        let mut first_below = false; // F1 < F2 somewhere
        for b in lo..hi {
            if b >= self.offset_bins {
                if let Some(p) = self.pmf.get((b - self.offset_bins) as usize) {
                    c1 += p;
                }
            }
            if b >= other.offset_bins {
                if let Some(p) = other.pmf.get((b - other.offset_bins) as usize) {
                    c2 += p;
                }
            }
            if c1 > c2 + CDF_TOL {
                first_above = true;
            } else if c1 < c2 - CDF_TOL {
                first_below = true;
            }
            if first_above && first_below {
                return Ok(FsdOrdering::Incomparable);
            }
        }
        Ok(match (first_above, first_below) {
            (false, false) => FsdOrdering::Equal,
            // lower CDF = stochastically larger = dominates (worse cost)
            (false, true) => FsdOrdering::FirstDominates,
            (true, false) => FsdOrdering::SecondDominates,
            (true, true) => unreachable!(),
        })
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.bin_width != other.bin_width {
            return Err(Error::BinWidthMismatch(self.bin_width, other.bin_width));
        }
        Ok(())
    }

    fn renormalize(&mut self) -> Result<()> {
        let sum: f64 = self.pmf.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "mass drifted to {sum} during an operation"
            )));
        }
        for p in &mut self.pmf {
            *p /= sum;
        }
        self.trim_zeros();
        Ok(())
    }

    fn trim_zeros(&mut self) {
        let first = self.pmf.iter().position(|p| *p > 0.0).unwrap_or(0);
        let last = self.pmf.iter().rposition(|p| *p > 0.0).unwrap_or(0);
        if first > 0 || last + 1 < self.pmf.len() {
            self.pmf.drain(last + 1..);
            self.pmf.drain(..first);
            self.offset_bins += first as u64;
        }
        if self.pmf.is_empty() {
            self.pmf.push(1.0);
        }
    }

    /// Drop negligible mass at the edges of the support and renormalize.
    fn trim_tails(&mut self) {
        let first = self
            .pmf
            .iter()
            .position(|p| *p > TAIL_TRIM)
            .unwrap_or(0);
        let last = self
            .pmf
            .iter()
            .rposition(|p| *p > TAIL_TRIM)
            .unwrap_or(self.pmf.len() - 1);
        self.pmf.drain(last + 1..);
        self.pmf.drain(..first);
        self.offset_bins += first as u64;
    }
}

fn duration_to_bins(duration: f64, bin_width: f64) -> Result<u64> {
    if duration < 0.0 || !duration.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "duration {duration} not representable"
        )));
    }
    // Round down, with a small slack so exact multiples stay put.
    Ok((duration / bin_width + 1e-9).floor() as u64)
}

/// Time-dependent extension: the cost of one more edge appended to a
/// subpath whose cumulated cost is `d`.
///
/// `lookup(x)` must return the edge's distribution for an arrival `x`
/// seconds after the subpath's departure. The result is the discretized
/// sum over the support of `d` of `p_d(x) * p_edge@x(y - x)`, renormalized.
pub fn extend_time_dependent<'a, F>(
    d: &DiscreteDistribution,
    mut lookup: F,
) -> Result<DiscreteDistribution>
where
    F: FnMut(f64) -> Result<&'a DiscreteDistribution>,
{
    let w = d.bin_width;
    // first pass: output bin range, so the accumulator can be dense
    let mut lo = u64::MAX;
    let mut hi = 0u64;
    for (i, p) in d.pmf.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        let x_bins = d.offset_bins + i as u64;
        let edge = lookup(x_bins as f64 * w)?;
        if edge.bin_width != w {
            return Err(Error::BinWidthMismatch(w, edge.bin_width));
        }
        lo = lo.min(x_bins + edge.offset_bins);
        hi = hi.max(x_bins + edge.offset_bins + edge.pmf.len() as u64 - 1);
    }
    if lo > hi {
        return Err(Error::InvalidParameter("extension of an empty pmf".into()));
    }
    let mut pmf = vec![0.0; (hi - lo + 1) as usize];
    for (i, p) in d.pmf.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        let x_bins = d.offset_bins + i as u64;
        let edge = lookup(x_bins as f64 * w)?;
        for (j, q) in edge.pmf.iter().enumerate() {
            if *q == 0.0 {
                continue;
            }
            pmf[(x_bins + edge.offset_bins + j as u64 - lo) as usize] += p * q;
        }
    }
    let mut out = DiscreteDistribution {
        bin_width: w,
        offset_bins: lo,
        pmf,
    };
    out.trim_tails();
    out.renormalize()?;
    Ok(out)
}
