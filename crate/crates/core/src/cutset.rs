//! Per-cut mutual information, min-cut analysis, the noise-level quantizer
//! model, QMF achievable rates and the constant-gap certificate.

use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{capacity_waterfilled, capacity_waterfilled_with_power, mi_gaussian_iid, GainMatrix};
use crate::network::{Cut, RelayNetwork, DEFAULT_MAX_CUT_RELAYS};
use crate::scalar::Real;

/// Rates across one cut, in bits per channel use.
#[derive(Debug, Clone, PartialEq)]
pub struct CutReport<T: Real> {
    pub cut: Cut,
    /// `I(Y_Ωᶜ; X_Ω | X_Ωᶜ)` with i.i.d. unit-power Gaussian inputs.
    pub mi_iid: T,
    /// Same with each receiver's noise variance raised from 1 to 2.
    pub mi_quantized: T,
    /// Waterfilled capacity of the crossing matrix with total power
    /// `min(r, t)`.
    pub cap_wf: T,
    /// Waterfilled capacity with total power equal to the number of
    /// transmitters in Ω with an edge into Ωᶜ, the sum of their per-node
    /// budgets. Never below the cut's capacity under any input distribution.
    pub cap_sum_power: T,
    /// Receivers in Ωᶜ with an incoming edge from Ω.
    pub rows: usize,
    /// Transmitters in Ω.
    pub cols: usize,
}

pub fn cut_report<T: Real>(net: &RelayNetwork<T>, cut: &Cut) -> CutReport<T> {
    let u = net.field_factor();
    let h = net.cut_crossing_matrix(cut).matrix;
    CutReport {
        cut: *cut,
        mi_iid: mi_gaussian_iid(&h, T::one(), u),
        mi_quantized: mi_gaussian_iid(&h, T::lit(2.0), u),
        cap_wf: capacity_waterfilled(&h, u),
        cap_sum_power: sum_power_capacity(&h, u),
        rows: h.rows(),
        cols: h.cols(),
    }
}

fn sum_power_capacity<T: Real>(h: &GainMatrix<T>, u: T) -> T {
    let active = (0..h.cols()).filter(|&j| (0..h.rows()).any(|i| !h.get(i, j).is_zero())).count();
    if active == 0 {
        return T::zero();
    }
    capacity_waterfilled_with_power(h, u, T::lit(active as f64))
}

/// Exhaustive evaluation of every cut, with the minimizing cut per metric.
/// Ties go to the cut enumerated first.
#[derive(Debug, Clone, PartialEq)]
pub struct MinCutAnalysis<T: Real> {
    pub per_cut: Vec<CutReport<T>>,
    pub argmin_iid: usize,
    pub argmin_quantized: usize,
    pub argmin_wf: usize,
    pub argmin_sum_power: usize,
}

impl<T: Real> MinCutAnalysis<T> {
    pub fn min_iid(&self) -> T {
        self.per_cut[self.argmin_iid].mi_iid
    }

    pub fn min_quantized(&self) -> T {
        self.per_cut[self.argmin_quantized].mi_quantized
    }

    pub fn min_wf(&self) -> T {
        self.per_cut[self.argmin_wf].cap_wf
    }

    pub fn min_sum_power(&self) -> T {
        self.per_cut[self.argmin_sum_power].cap_sum_power
    }
}

fn argmin<T: Real>(reports: &[CutReport<T>], key: impl Fn(&CutReport<T>) -> T) -> usize {
    let mut best = 0;
    for (i, r) in reports.iter().enumerate().skip(1) {
        if key(r) < key(&reports[best]) {
            best = i;
        }
    }
    best
}

pub fn min_cut_analysis<T: Real>(net: &RelayNetwork<T>) -> Result<MinCutAnalysis<T>> {
    min_cut_analysis_with_limit(net, DEFAULT_MAX_CUT_RELAYS)
}

pub fn min_cut_analysis_with_limit<T: Real>(net: &RelayNetwork<T>, max_relays: usize) -> Result<MinCutAnalysis<T>> {
    let cuts = net.enumerate_cuts_with_limit(max_relays)?;
    let per_cut: Vec<CutReport<T>> = cuts.par_iter().map(|c| cut_report(net, c)).collect();
    Ok(MinCutAnalysis {
        argmin_iid: argmin(&per_cut, |r| r.mi_iid),
        argmin_quantized: argmin(&per_cut, |r| r.mi_quantized),
        argmin_wf: argmin(&per_cut, |r| r.cap_wf),
        argmin_sum_power: argmin(&per_cut, |r| r.cap_sum_power),
        per_cut,
    })
}

/// Test channel `Ŷ = αY + N` that quantizes a received signal of power
/// `σ²_Y` at the noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerParams<T: Real> {
    pub sigma2_y: T,
    pub alpha: T,
    pub sigma2_n: T,
}

impl<T: Real> QuantizerParams<T> {
    /// Description rate `u·log₂(1 + α)`.
    pub fn rate(&self, u: T) -> T {
        u * self.alpha.log2_1p()
    }

    /// `u·log₂(1 + α²/σ²_N)`; `None` when the quantizer noise vanishes.
    pub fn rate_from_noise(&self, u: T) -> Option<T> {
        (self.sigma2_n > T::zero()).then(|| u * (self.alpha * self.alpha / self.sigma2_n).log2_1p())
    }
}

pub fn quantizer_params<T: Real>(sigma2_y: T) -> Result<QuantizerParams<T>> {
    if !(sigma2_y >= T::one()) || !sigma2_y.is_finite() {
        return Err(Error::Domain(format!("received power must be finite and at least 1, got {sigma2_y}")));
    }
    let alpha = (sigma2_y - T::one()) / sigma2_y;
    // 1 - α² = (1 - α)(1 + α) with 1 - α = 1/σ²_Y, avoiding cancellation
    let one_minus_alpha2 = sigma2_y.recip() * (T::one() + alpha);
    let sigma2_n = (one_minus_alpha2 * sigma2_y - T::one()).max(T::zero());
    Ok(QuantizerParams { sigma2_y, alpha, sigma2_n })
}

/// QMF rates on a layered network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayeredRates<T: Real> {
    /// `max(0, min_Ω mi_quantized − u|V|)`.
    pub rate: T,
    /// Conservative form `max(0, min_Ω cap_wf − 3u|V|)`.
    pub conservative: T,
}

pub fn qmf_achievable_layered<T: Real>(net: &RelayNetwork<T>) -> Result<LayeredRates<T>> {
    net.layering()?;
    let analysis = min_cut_analysis(net)?;
    Ok(layered_rates(net, &analysis))
}

fn layered_rates<T: Real>(net: &RelayNetwork<T>, analysis: &MinCutAnalysis<T>) -> LayeredRates<T> {
    let uv = net.field_factor() * T::lit(net.len() as f64);
    LayeredRates {
        rate: (analysis.min_quantized() - uv).max(T::zero()),
        conservative: (analysis.min_wf() - T::lit(3.0) * uv).max(T::zero()),
    }
}

/// `max(0, min_Ω mi_iid − 3u|V|)`, valid for any network.
pub fn qmf_achievable_general<T: Real>(net: &RelayNetwork<T>) -> Result<T> {
    Ok(general_rate(net, &min_cut_analysis(net)?))
}

fn general_rate<T: Real>(net: &RelayNetwork<T>, analysis: &MinCutAnalysis<T>) -> T {
    let uv = net.field_factor() * T::lit(net.len() as f64);
    (analysis.min_iid() - T::lit(3.0) * uv).max(T::zero())
}

/// Which achievable rate backs the certificate's lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerBoundKind {
    /// Layered network: quantized min-cut less `u|V|`.
    Layered,
    /// Arbitrary network: i.i.d. min-cut less `3u|V|`.
    General,
}

/// Computable upper bound, achievable lower bound and the gap between them.
#[derive(Debug, Clone, PartialEq)]
pub struct GapCertificate<T: Real> {
    /// Minimum over cuts of the sum-power waterfilled capacity.
    pub upper: T,
    pub lower: T,
    pub lower_kind: LowerBoundKind,
    /// Constant subtracted from the min-cut to obtain `lower`.
    pub kappa_used: T,
    /// `5u|V|`
    pub theorem_bound: T,
    /// `6u|V|`: the theorem constant plus `u|V|` for bounding the
    /// cut-set value by a computable quantity.
    pub asserted_bound: T,
    pub gap: T,
    pub analysis: MinCutAnalysis<T>,
}

impl<T: Real> GapCertificate<T> {
    pub fn holds(&self) -> bool {
        self.gap <= self.asserted_bound * (T::one() + T::tol(1e-12)) && self.lower >= T::zero()
    }

    pub fn min_cut_iid(&self) -> &CutReport<T> {
        &self.analysis.per_cut[self.analysis.argmin_iid]
    }
}

pub fn gap_certificate<T: Real>(net: &RelayNetwork<T>) -> Result<GapCertificate<T>> {
    let analysis = min_cut_analysis(net)?;
    let uv = net.field_factor() * T::lit(net.len() as f64);
    let (lower, lower_kind, kappa_used) = if net.layering().is_ok() {
        (layered_rates(net, &analysis).rate, LowerBoundKind::Layered, uv)
    } else {
        (general_rate(net, &analysis), LowerBoundKind::General, T::lit(3.0) * uv)
    };
    let upper = analysis.min_sum_power();
    Ok(GapCertificate {
        upper,
        lower,
        lower_kind,
        kappa_used,
        theorem_bound: T::lit(5.0) * uv,
        asserted_bound: T::lit(6.0) * uv,
        gap: upper - lower,
        analysis,
    })
}
