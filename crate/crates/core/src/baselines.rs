//! Amplify-forward, decode-forward and Gaussian compress-forward rates, and
//! parameter sweeps comparing them with the cut-set bound and QMF.

use std::collections::BTreeMap;

use num_traits::Zero;
use rayon::prelude::*;

use crate::cutset::{gap_certificate, min_cut_analysis};
use crate::error::{Error, Result};
use crate::linalg::{mi_gaussian_iid, GainMatrix};
use crate::network::{NodeId, NodeSet, RelayNetwork};
use crate::scalar::{Cplx, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Af,
    Df,
    Cf,
    Qmf,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Af => "af",
            Scheme::Df => "df",
            Scheme::Cf => "cf",
            Scheme::Qmf => "qmf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "af" => Ok(Scheme::Af),
            "df" => Ok(Scheme::Df),
            "cf" => Ok(Scheme::Cf),
            "qmf" => Ok(Scheme::Qmf),
            other => Err(Error::validation("schemes", format!("unknown scheme `{other}`"))),
        }
    }

    pub const ALL: [Scheme; 4] = [Scheme::Af, Scheme::Df, Scheme::Cf, Scheme::Qmf];
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineParams<T: Real> {
    /// Amplification per relay (ascending relay order), and the rate of the
    /// non-coherent form at the same amplifications.
    Af { alphas: Vec<T>, literal_rate: T },
    /// Relays that decode and forward.
    Df { subset: NodeSet },
    /// Quantization distortion per relay.
    Cf { distortions: Vec<(NodeId, T)> },
    Qmf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport<T: Real> {
    pub scheme: Scheme,
    pub rate: T,
    pub params: BaselineParams<T>,
}

// ---- amplify-forward ---------------------------------------------------

/// How relay contributions combine at the destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfVariant {
    /// Signal powers add and the rate is `u·log₂(S/N)`, as in the classic
    /// two-relay closed form.
    Literal,
    /// Relays phase-align so amplitudes add; rate `u·log₂(1 + S/N)`.
    Coherent,
}

struct TwoHop<T: Real> {
    relays: Vec<NodeId>,
    /// source → relay
    f: Vec<T>,
    /// relay → destination
    g: Vec<T>,
}

fn two_hop<T: Real>(net: &RelayNetwork<T>) -> Result<TwoHop<T>> {
    let layers = net.layering()?;
    if layers.num_layers != 2 {
        return Err(Error::Unsupported(format!(
            "amplify-forward needs a two-hop network, destination is {} hops away",
            layers.num_layers
        )));
    }
    let relays = net.relays();
    let abs = |e: Option<Cplx<T>>| e.map_or(T::zero(), |z| z.norm());
    let f = relays.iter().map(|&r| abs(net.gain(net.source(), r))).collect();
    let g = relays.iter().map(|&r| abs(net.gain(r, net.destination()))).collect();
    Ok(TwoHop { relays, f, g })
}

fn af_value<T: Real>(th: &TwoHop<T>, alphas: &[T], u: T, variant: AfVariant) -> T {
    let mut noise = T::one();
    let mut power = T::zero();
    let mut amplitude = T::zero();
    for i in 0..th.relays.len() {
        let a = th.g[i] * alphas[i];
        noise += a * a;
        power += (a * th.f[i]) * (a * th.f[i]);
        amplitude += a * th.f[i];
    }
    let r = match variant {
        AfVariant::Literal => u * (power / noise).log2(),
        AfVariant::Coherent => u * (amplitude * amplitude / noise).log2_1p(),
    };
    r.max(T::zero())
}

/// AF rate with amplification `alphas[k]` at the `k`-th relay. Each relay
/// must satisfy `αᵣ·|h_{S,r}| ≤ 1`: its forwarded signal component has at
/// most unit power.
pub fn af_rate<T: Real>(net: &RelayNetwork<T>, alphas: &[T], variant: AfVariant) -> Result<T> {
    let th = two_hop(net)?;
    if alphas.len() != th.relays.len() {
        return Err(Error::validation(
            "alphas",
            format!("expected {} amplification factors, got {}", th.relays.len(), alphas.len()),
        ));
    }
    for (i, &a) in alphas.iter().enumerate() {
        if !(a >= T::zero()) || !a.is_finite() {
            return Err(Error::Domain(format!("amplification must be finite and nonnegative, got {a}")));
        }
        let limit = if th.f[i].is_zero() { T::infinity() } else { th.f[i].recip() };
        if a > limit * (T::one() + T::tol(1e-12)) {
            return Err(Error::PowerViolation {
                relay: net.name(th.relays[i]).to_string(),
                alpha: a.to_f64_lossy(),
                limit: limit.to_f64_lossy(),
            });
        }
    }
    Ok(af_value(&th, alphas, net.field_factor(), variant))
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn golden_max<T: Real>(mut lo: T, mut hi: T, mut f: impl FnMut(T) -> T) -> (T, T) {
    let r = T::lit(GOLDEN);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Best coherent AF rate over the feasible amplification box: a grid of
/// power fractions (linear and geometric), then coordinate-wise
/// golden-section refinement.
pub fn af_optimize<T: Real>(net: &RelayNetwork<T>) -> Result<BaselineReport<T>> {
    let th = two_hop(net)?;
    let u = net.field_factor();
    let k = th.relays.len();
    let limits: Vec<T> = th.f.iter().map(|&f| if f.is_zero() { T::zero() } else { f.recip() }).collect();
    let mut fractions: Vec<T> = (0..=20).map(|i| T::lit(i as f64 / 20.0)).collect();
    fractions.extend((1..=20).map(|i| T::lit(10f64.powf(-0.6 * i as f64))));
    fractions.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    fractions.dedup();

    let value = |alphas: &[T]| af_value(&th, alphas, u, AfVariant::Coherent);
    let mut best: Vec<T> = limits.clone();
    let mut best_val = value(&best);
    if k <= 2 {
        let combos = (0..k).fold(vec![Vec::new()], |acc, _| {
            acc.into_iter()
                .flat_map(|p| fractions.iter().map(move |&f| [p.clone(), vec![f]].concat()))
                .collect::<Vec<_>>()
        });
        for c in combos {
            let alphas: Vec<T> = c.iter().zip(&limits).map(|(&f, &l)| f * l).collect();
            let v = value(&alphas);
            if v > best_val {
                best_val = v;
                best = alphas;
            }
        }
    }
    for _pass in 0..4 {
        for i in 0..k {
            if limits[i].is_zero() {
                continue;
            }
            let mut trial = best.clone();
            let (x, v) = golden_max(T::zero(), limits[i], |x| {
                trial[i] = x;
                value(&trial)
            });
            if v > best_val {
                best_val = v;
                best[i] = x;
            }
        }
    }
    let literal_rate = af_value(&th, &best, u, AfVariant::Literal);
    Ok(BaselineReport { scheme: Scheme::Af, rate: best_val, params: BaselineParams::Af { alphas: best, literal_rate } })
}

// ---- decode-forward ----------------------------------------------------

/// Rate when exactly the relays in `subset` decode and re-encode, and every
/// other relay stays silent: each decoder combines the coherent signals of
/// the decoded nodes (and the source) that reach it.
pub fn df_subset_rate<T: Real>(net: &RelayNetwork<T>, subset: NodeSet) -> Result<T> {
    net.layering()?;
    let u = net.field_factor();
    let senders = subset.with(net.source());
    let mut rate = T::infinity();
    for j in subset.with(net.destination()).iter() {
        let amp: T = net.in_neighbors(j).filter(|(i, _)| senders.contains(*i)).map(|(_, h)| h.norm()).sum();
        rate = rate.min(u * (amp * amp).log2_1p());
    }
    Ok(rate)
}

/// Best-subset decode-forward, exhaustive over relay subsets.
pub fn df_rate<T: Real>(net: &RelayNetwork<T>) -> Result<BaselineReport<T>> {
    net.layering()?;
    let relays = net.relays();
    if relays.len() > 20 {
        return Err(Error::Capacity {
            what: "decode-forward relay subsets".into(),
            required: 1u128 << relays.len(),
            limit: 1 << 20,
        });
    }
    let rates: Vec<(NodeSet, T)> = (0..1u64 << relays.len())
        .into_par_iter()
        .map(|mask| {
            let s: NodeSet = relays.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &r)| r).collect();
            (s, df_subset_rate(net, s).expect("layered"))
        })
        .collect();
    let (subset, rate) = rates.into_iter().fold((NodeSet::EMPTY, T::neg_infinity()), |best, cand| {
        if cand.1 > best.1 {
            cand
        } else {
            best
        }
    });
    Ok(BaselineReport { scheme: Scheme::Df, rate: rate.max(T::zero()), params: BaselineParams::Df { subset } })
}

// ---- compress-forward --------------------------------------------------

/// Gaussian compress-forward on a layered network: relay `r` describes
/// `Ŷᵣ = Yᵣ + Qᵣ` with `Qᵣ ~ N(0, Dᵣ)`, and the destination is treated the
/// same way with `D = 1`. The rate is the min-cut of the effective network
/// whose receiver noise is `1 + Dⱼ`. Each relay layer's joint description
/// rate must fit through the next hop.
pub fn cf_rate_layered<T: Real>(net: &RelayNetwork<T>, distortions: &BTreeMap<NodeId, T>) -> Result<BaselineReport<T>> {
    let d = distortion_vector(net, distortions)?;
    check_cf_feasible(net, &d)?;
    let rate = cf_effective_min_cut(net, &d)?;
    Ok(BaselineReport {
        scheme: Scheme::Cf,
        rate,
        params: BaselineParams::Cf { distortions: net.relays().into_iter().map(|r| (r, d[r.0])).collect() },
    })
}

fn distortion_vector<T: Real>(net: &RelayNetwork<T>, distortions: &BTreeMap<NodeId, T>) -> Result<Vec<T>> {
    let mut d = vec![T::one(); net.len()];
    for (&node, &v) in distortions {
        if node == net.source() || node == net.destination() || node.0 >= net.len() {
            return Err(Error::validation("distortions", format!("node {node} is not a relay")));
        }
        if !(v >= T::one()) {
            return Err(Error::Domain(format!("distortion must be at least 1, got {v} at {}", net.name(node))));
        }
        d[node.0] = v;
    }
    Ok(d)
}

fn cf_effective_min_cut<T: Real>(net: &RelayNetwork<T>, d: &[T]) -> Result<T> {
    let u = net.field_factor();
    let cuts = net.enumerate_cuts()?;
    Ok(cuts
        .iter()
        .map(|c| {
            let cm = net.cut_crossing_matrix(c);
            let h = cm.matrix.scale_rows(|i| {
                let dj = d[cm.rows[i].0];
                if dj.is_finite() {
                    (T::one() + dj).sqrt().recip()
                } else {
                    T::zero()
                }
            });
            mi_gaussian_iid(&h, T::one(), u)
        })
        .fold(T::infinity(), T::min))
}

/// Description rate and next-hop capacity for each relay layer.
fn cf_layer_budgets<T: Real>(net: &RelayNetwork<T>, d: &[T]) -> Result<Vec<(usize, T, T)>> {
    let layers = net.layering()?;
    let u = net.field_factor();
    let mut out = Vec::new();
    for l in 1..layers.num_layers {
        let here = layers.layers[l];
        let prev = layers.layers[l - 1];
        let next = layers.layers[l + 1];
        let g = net.crossing_matrix(prev, here);
        let rows: Vec<NodeId> = here.iter().collect();
        let full = GainMatrix::from_fn(rows.len(), g.cols.len(), |i, j| {
            net.gain(g.cols[j], rows[i]).unwrap_or_else(Cplx::zero)
        });
        // log det(I + D⁻¹Σ_Y), Σ_Y = I + GGᴴ, factored as
        // Σ log(1 + 1/Dᵢ) + log det(I + diag(1/(1 + Dᵢ)) GGᴴ)
        let own: T = rows.iter().map(|r| d[r.0].recip().log2_1p()).sum();
        let scaled = full.scale_rows(|i| (T::one() + d[rows[i].0]).sqrt().recip());
        let description = u * own + mi_gaussian_iid(&scaled, T::one(), u);
        let hop = net.crossing_matrix(here, next).matrix;
        let capacity = mi_gaussian_iid(&hop, T::one(), u);
        out.push((l, description, capacity));
    }
    Ok(out)
}

fn check_cf_feasible<T: Real>(net: &RelayNetwork<T>, d: &[T]) -> Result<()> {
    for (layer, description, capacity) in cf_layer_budgets(net, d)? {
        if description > capacity * (T::one() + T::tol(1e-12)) {
            return Err(Error::InfeasibleDistortion {
                layer,
                description: description.to_f64_lossy(),
                capacity: capacity.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// Coarse search over per-relay distortions on a logarithmic grid from 1 to
/// `4σ²_Y`, layer by layer, keeping the best feasible effective min-cut.
/// Returns rate 0 with empty distortions when nothing on the grid is
/// feasible.
pub fn cf_optimize<T: Real>(net: &RelayNetwork<T>) -> Result<BaselineReport<T>> {
    let layers = net.layering()?;
    let relays = net.relays();
    let steps = 24usize;
    let grid_for = |r: NodeId| -> Vec<T> {
        let sigma2_y: T = T::one() + net.in_neighbors(r).map(|(_, h)| h.norm_sqr()).sum::<T>();
        let top = (T::lit(4.0) * sigma2_y).ln();
        (0..=steps).map(|i| (top * T::lit(i as f64 / steps as f64)).exp()).collect()
    };
    let grids: BTreeMap<NodeId, Vec<T>> = relays.iter().map(|&r| (r, grid_for(r))).collect();
    let mut d = vec![T::one(); net.len()];
    let mut best: Option<T> = None;
    for _pass in 0..2 {
        for l in 1..layers.num_layers {
            let members: Vec<NodeId> = layers.layers[l].iter().collect();
            // joint grid for small layers, common grid index otherwise
            let candidates: Vec<Vec<usize>> = if members.len() <= 2 {
                (0..members.len()).fold(vec![Vec::new()], |acc, _| {
                    acc.into_iter().flat_map(|p| (0..=steps).map(move |i| [p.clone(), vec![i]].concat())).collect()
                })
            } else {
                (0..=steps).map(|i| vec![i; members.len()]).collect()
            };
            let evaluated: Vec<(Vec<usize>, Option<T>)> = candidates
                .into_par_iter()
                .map(|idx| {
                    let mut trial = d.clone();
                    for (m, &i) in members.iter().zip(&idx) {
                        trial[m.0] = grids[m][i];
                    }
                    let ok = check_cf_feasible(net, &trial).is_ok();
                    (idx, if ok { cf_effective_min_cut(net, &trial).ok() } else { None })
                })
                .collect();
            let mut layer_best: Option<(Vec<usize>, T)> = None;
            for (idx, v) in evaluated {
                if let Some(v) = v {
                    if layer_best.as_ref().map_or(true, |(_, b)| v > *b) {
                        layer_best = Some((idx, v));
                    }
                }
            }
            if let Some((idx, v)) = layer_best {
                for (m, &i) in members.iter().zip(&idx) {
                    d[m.0] = grids[m][i];
                }
                best = Some(v);
            }
        }
    }
    if layers.num_layers == 1 {
        best = Some(cf_effective_min_cut(net, &d)?);
    }
    match best {
        Some(rate) if check_cf_feasible(net, &d).is_ok() => Ok(BaselineReport {
            scheme: Scheme::Cf,
            rate,
            params: BaselineParams::Cf { distortions: relays.iter().map(|&r| (r, d[r.0])).collect() },
        }),
        _ => Ok(BaselineReport { scheme: Scheme::Cf, rate: T::zero(), params: BaselineParams::Cf { distortions: Vec::new() } }),
    }
}

// ---- sweeps ------------------------------------------------------------

/// One row of a parameter sweep. Rates of schemes that were not requested
/// are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T: Real> {
    pub a: T,
    pub upper: T,
    pub qmf_lower: Option<T>,
    pub af: Option<T>,
    pub df: Option<T>,
    pub cf: Option<T>,
}

impl<T: Real> SweepRow<T> {
    pub fn gap_qmf(&self) -> Option<T> {
        self.qmf_lower.map(|r| self.upper - r)
    }

    pub fn gap_af(&self) -> Option<T> {
        self.af.map(|r| self.upper - r)
    }

    pub fn gap_df(&self) -> Option<T> {
        self.df.map(|r| self.upper - r)
    }
}

pub fn sweep_row<T: Real>(net: &RelayNetwork<T>, a: T, schemes: &[Scheme]) -> Result<SweepRow<T>> {
    let wants = |s: Scheme| schemes.contains(&s);
    let cert = gap_certificate(net)?;
    Ok(SweepRow {
        a,
        upper: cert.upper,
        qmf_lower: wants(Scheme::Qmf).then_some(cert.lower),
        af: if wants(Scheme::Af) { Some(af_optimize(net)?.rate) } else { None },
        df: if wants(Scheme::Df) { Some(df_rate(net)?.rate) } else { None },
        cf: if wants(Scheme::Cf) { Some(cf_optimize(net)?.rate) } else { None },
    })
}

/// Evaluates `template(a)` for every value; rows keep the input order.
pub fn sweep<T: Real>(
    template: impl Fn(T) -> Result<RelayNetwork<T>> + Sync,
    values: &[T],
    schemes: &[Scheme],
) -> Result<Vec<SweepRow<T>>> {
    values.par_iter().map(|&a| sweep_row(&template(a)?, a, schemes)).collect()
}

/// Smallest upper bound over cuts; re-exported for callers that only need
/// the bound.
pub fn upper_bound<T: Real>(net: &RelayNetwork<T>) -> Result<T> {
    Ok(min_cut_analysis(net)?.min_sum_power())
}
