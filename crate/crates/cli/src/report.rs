//! Serializable report records and their json/csv/text renderings.

use std::fmt::Write as _;

use serde::{Serialize, Serializer};

use relaycap::cutset::{CutReport, GapCertificate, LowerBoundKind, MinCutAnalysis};
use relaycap::{Cut, Network};

/// A number printed with 12 significant digits; non-finite values become
/// `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Num {
    pub fn rounded(self) -> Option<f64> {
        self.0.is_finite().then(|| format!("{:.11e}", self.0).parse().expect("formatted float parses"))
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.rounded() {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_none(),
        }
    }
}

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.rounded() {
            Some(v) => write!(f, "{v}"),
            None if self.0.is_nan() => f.write_str("nan"),
            None => f.write_str(if self.0 > 0.0 { "inf" } else { "-inf" }),
        }
    }
}

fn opt(x: Option<f64>) -> Option<Num> {
    x.map(Num)
}

fn csv_num(x: Option<Num>) -> String {
    x.and_then(Num::rounded).map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

pub trait Render: Serialize {
    fn csv(&self) -> String;
    fn text(&self) -> String;

    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
                s.push('\n');
                s
            }
            Format::Csv => self.csv(),
            Format::Text => self.text(),
        }
    }
}

fn omega_names(net: &Network, cut: &Cut) -> Vec<String> {
    cut.names(net).into_iter().map(String::from).collect()
}

// ---- cuts ----------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct CutRecord {
    pub omega: Vec<String>,
    pub mi_iid_bits: Num,
    pub mi_quantized_bits: Num,
    pub cap_wf_bits: Num,
    pub cap_sum_power_bits: Num,
    pub receivers: usize,
    pub transmitters: usize,
}

impl CutRecord {
    pub fn new(net: &Network, r: &CutReport<f64>) -> Self {
        CutRecord {
            omega: omega_names(net, &r.cut),
            mi_iid_bits: Num(r.mi_iid),
            mi_quantized_bits: Num(r.mi_quantized),
            cap_wf_bits: Num(r.cap_wf),
            cap_sum_power_bits: Num(r.cap_sum_power),
            receivers: r.rows,
            transmitters: r.cols,
        }
    }
}

const CUT_HEADER: &str = "omega,mi_iid_bits,mi_quantized_bits,cap_wf_bits,cap_sum_power_bits,receivers,transmitters";

fn cuts_csv(cuts: &[CutRecord]) -> String {
    let mut out = format!("{CUT_HEADER}\n");
    for c in cuts {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.omega.join(" "),
            csv_num(Some(c.mi_iid_bits)),
            csv_num(Some(c.mi_quantized_bits)),
            csv_num(Some(c.cap_wf_bits)),
            csv_num(Some(c.cap_sum_power_bits)),
            c.receivers,
            c.transmitters
        );
    }
    out
}

fn cuts_text(cuts: &[CutRecord]) -> String {
    let width = cuts.iter().map(|c| c.omega.join(",").len() + 2).max().unwrap_or(5).max(5);
    let mut out = format!(
        "{:<width$}  {:>16}  {:>16}  {:>16}  {:>16}  rx  tx\n",
        "omega", "mi_iid", "mi_quantized", "cap_wf", "cap_sum_power"
    );
    for c in cuts {
        let _ = writeln!(
            out,
            "{:<width$}  {:>16}  {:>16}  {:>16}  {:>16}  {:>2}  {:>2}",
            format!("{{{}}}", c.omega.join(",")),
            c.mi_iid_bits.to_string(),
            c.mi_quantized_bits.to_string(),
            c.cap_wf_bits.to_string(),
            c.cap_sum_power_bits.to_string(),
            c.receivers,
            c.transmitters
        );
    }
    out
}

#[derive(Debug, Serialize)]
pub struct MinCut {
    pub omega: Vec<String>,
    pub value: Num,
}

#[derive(Debug, Serialize)]
pub struct BoundReport {
    pub upper_bits: Num,
    pub min_cut_iid: MinCut,
    pub min_cut_quantized: MinCut,
    pub min_cut_wf: MinCut,
    pub min_cut_sum_power: MinCut,
    pub per_cut: Vec<CutRecord>,
}

fn min_cut(net: &Network, a: &MinCutAnalysis<f64>, idx: usize, value: f64) -> MinCut {
    MinCut { omega: omega_names(net, &a.per_cut[idx].cut), value: Num(value) }
}

impl BoundReport {
    pub fn new(net: &Network, a: &MinCutAnalysis<f64>) -> Self {
        BoundReport {
            upper_bits: Num(a.min_sum_power()),
            min_cut_iid: min_cut(net, a, a.argmin_iid, a.min_iid()),
            min_cut_quantized: min_cut(net, a, a.argmin_quantized, a.min_quantized()),
            min_cut_wf: min_cut(net, a, a.argmin_wf, a.min_wf()),
            min_cut_sum_power: min_cut(net, a, a.argmin_sum_power, a.min_sum_power()),
            per_cut: a.per_cut.iter().map(|r| CutRecord::new(net, r)).collect(),
        }
    }
}

impl Render for BoundReport {
    fn csv(&self) -> String {
        cuts_csv(&self.per_cut)
    }

    fn text(&self) -> String {
        let mut out = cuts_text(&self.per_cut);
        let _ = writeln!(out, "upper bound: {} bits", self.upper_bits);
        let _ = writeln!(out, "min cut (iid): {} bits at {{{}}}", self.min_cut_iid.value, self.min_cut_iid.omega.join(","));
        out
    }
}

// ---- certificate -----------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct CertificateReport {
    pub upper_bits: Num,
    pub lower_bits: Num,
    pub gap_bits: Num,
    pub bound_bits: Num,
    pub min_cut_iid: MinCut,
    pub per_cut: Vec<CutRecord>,
    pub theorem_bound_bits: Num,
    pub kappa_bits: Num,
    pub lower_kind: &'static str,
    pub holds: bool,
}

impl CertificateReport {
    pub fn new(net: &Network, c: &GapCertificate<f64>) -> Self {
        let a = &c.analysis;
        CertificateReport {
            upper_bits: Num(c.upper),
            lower_bits: Num(c.lower),
            gap_bits: Num(c.gap),
            bound_bits: Num(c.asserted_bound),
            min_cut_iid: min_cut(net, a, a.argmin_iid, a.min_iid()),
            per_cut: a.per_cut.iter().map(|r| CutRecord::new(net, r)).collect(),
            theorem_bound_bits: Num(c.theorem_bound),
            kappa_bits: Num(c.kappa_used),
            lower_kind: match c.lower_kind {
                LowerBoundKind::Layered => "layered",
                LowerBoundKind::General => "general",
            },
            holds: c.holds(),
        }
    }
}

impl Render for CertificateReport {
    fn csv(&self) -> String {
        cuts_csv(&self.per_cut)
    }

    fn text(&self) -> String {
        let mut out = cuts_text(&self.per_cut);
        let _ = writeln!(out, "upper bound:  {} bits", self.upper_bits);
        let _ = writeln!(out, "lower bound:  {} bits ({}, kappa {} bits)", self.lower_bits, self.lower_kind, self.kappa_bits);
        let _ = writeln!(out, "gap:          {} bits", self.gap_bits);
        let _ = writeln!(out, "bound:        {} bits ({})", self.bound_bits, if self.holds { "holds" } else { "VIOLATED" });
        out
    }
}

// ---- achievable --------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct AchievableReport {
    pub layered: bool,
    pub layered_bits: Option<Num>,
    pub conservative_bits: Option<Num>,
    pub general_bits: Num,
    pub stages: Option<usize>,
    pub unfolded_bits: Option<Num>,
}

impl AchievableReport {
    pub fn new(layered: Option<(f64, f64)>, general: f64, unfolded: Option<(usize, f64)>) -> Self {
        AchievableReport {
            layered: layered.is_some(),
            layered_bits: opt(layered.map(|l| l.0)),
            conservative_bits: opt(layered.map(|l| l.1)),
            general_bits: Num(general),
            stages: unfolded.map(|u| u.0),
            unfolded_bits: opt(unfolded.map(|u| u.1)),
        }
    }
}

impl Render for AchievableReport {
    fn csv(&self) -> String {
        format!(
            "layered_bits,conservative_bits,general_bits,stages,unfolded_bits\n{},{},{},{},{}\n",
            csv_num(self.layered_bits),
            csv_num(self.conservative_bits),
            csv_num(Some(self.general_bits)),
            self.stages.map(|k| k.to_string()).unwrap_or_default(),
            csv_num(self.unfolded_bits)
        )
    }

    fn text(&self) -> String {
        let mut out = String::new();
        match (self.layered_bits, self.conservative_bits) {
            (Some(l), Some(c)) => {
                let _ = writeln!(out, "layered QMF rate:      {l} bits");
                let _ = writeln!(out, "conservative form:     {c} bits");
            }
            _ => out.push_str("network is not layered\n"),
        }
        let _ = writeln!(out, "general QMF rate:      {} bits", self.general_bits);
        if let (Some(k), Some(u)) = (self.stages, self.unfolded_bits) {
            let _ = writeln!(out, "unfolded ({k} stages):  {u} bits per block");
        }
        out
    }
}

// ---- unfold ------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    /// `[re, im]`, or `null` for a memory link.
    pub gain: Option<[Num; 2]>,
}

#[derive(Debug, Serialize)]
pub struct UnfoldReport {
    pub stages: usize,
    pub nodes: usize,
    pub crossing_edges: usize,
    pub memory_edges: usize,
    pub min_cut_bits: Num,
    pub steady_bits: Num,
    pub min_cut_unfolded_bits: Num,
    pub qmf_unfolded_bits: Num,
    pub edges: Vec<EdgeRecord>,
}

impl Render for UnfoldReport {
    fn csv(&self) -> String {
        let mut out = String::from("from,to,gain_re,gain_im\n");
        for e in &self.edges {
            let (re, im) = match e.gain {
                Some([re, im]) => (csv_num(Some(re)), csv_num(Some(im))),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(out, "{},{},{re},{im}", e.from, e.to);
        }
        out
    }

    fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} stages, {} nodes, {} crossing edges, {} memory edges",
            self.stages, self.nodes, self.crossing_edges, self.memory_edges
        );
        let _ = writeln!(out, "original min cut:  {} bits", self.min_cut_bits);
        let _ = writeln!(out, "steady cut value:  {} bits", self.steady_bits);
        let _ = writeln!(out, "unfolded min cut:  {} bits", self.min_cut_unfolded_bits);
        let _ = writeln!(out, "unfolded QMF rate: {} bits per block", self.qmf_unfolded_bits);
        out
    }
}

// ---- verifiers -----------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct TrellisWitness {
    pub sequence: Vec<Vec<String>>,
    pub value_bits: Num,
    pub bound_bits: Num,
}

#[derive(Debug, Serialize)]
pub struct TrellisRecord {
    pub stages: usize,
    pub checked: u64,
    pub violations: u64,
    pub factor: i64,
    pub min_cut_bits: Num,
    pub min_unfolded_bits: Num,
    pub margin_bits: Num,
    pub vacuous: bool,
    pub witnesses: Vec<TrellisWitness>,
}

impl Render for TrellisRecord {
    fn csv(&self) -> String {
        format!(
            "stages,checked,violations,factor,min_cut_bits,min_unfolded_bits,margin_bits,vacuous\n{},{},{},{},{},{},{},{}\n",
            self.stages,
            self.checked,
            self.violations,
            self.factor,
            csv_num(Some(self.min_cut_bits)),
            csv_num(Some(self.min_unfolded_bits)),
            csv_num(Some(self.margin_bits)),
            self.vacuous
        )
    }

    fn text(&self) -> String {
        let mut out = format!("{} violations / {} cuts\n", self.violations, self.checked);
        let _ = writeln!(out, "factor K-L+1 = {}{}", self.factor, if self.vacuous { " (bound is vacuous)" } else { "" });
        let _ = writeln!(out, "original min cut: {} bits", self.min_cut_bits);
        let _ = writeln!(out, "unfolded min cut: {} bits", self.min_unfolded_bits);
        let _ = writeln!(out, "smallest margin:  {} bits", self.margin_bits);
        for w in &self.witnesses {
            let seq: Vec<String> = w.sequence.iter().map(|s| format!("{{{}}}", s.join(","))).collect();
            let _ = writeln!(out, "  {} value {} < bound {}", seq.join(" "), w.value_bits, w.bound_bits);
        }
        out
    }
}

#[derive(Debug, Serialize)]
pub struct LoopRecord {
    pub sets: Vec<Vec<String>>,
    pub tilde_sets: Vec<Vec<String>>,
    pub lhs_bits: Num,
    pub rhs_bits: Num,
    pub margin_bits: Num,
    pub holds: bool,
}

impl Render for LoopRecord {
    fn csv(&self) -> String {
        format!(
            "lhs_bits,rhs_bits,margin_bits,holds\n{},{},{},{}\n",
            csv_num(Some(self.lhs_bits)),
            csv_num(Some(self.rhs_bits)),
            csv_num(Some(self.margin_bits)),
            self.holds
        )
    }

    fn text(&self) -> String {
        let show = |sets: &[Vec<String>]| sets.iter().map(|s| format!("{{{}}}", s.join(","))).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        let _ = writeln!(out, "sets:   {}", show(&self.sets));
        let _ = writeln!(out, "tilde:  {}", show(&self.tilde_sets));
        let _ = writeln!(out, "lhs {} >= rhs {}: {}", self.lhs_bits, self.rhs_bits, if self.holds { "holds" } else { "VIOLATED" });
        out
    }
}

// ---- sweep ---------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct SweepRecord {
    pub a: Num,
    pub upper_bits: Num,
    pub qmf_lower_bits: Option<Num>,
    pub af_bits: Option<Num>,
    pub df_bits: Option<Num>,
    pub cf_bits: Option<Num>,
    pub gap_qmf_bits: Option<Num>,
    pub gap_af_bits: Option<Num>,
    pub gap_df_bits: Option<Num>,
}

#[derive(Debug, Serialize)]
#[serde(transparent)]
pub struct SweepReport(pub Vec<SweepRecord>);

pub const SWEEP_HEADER: &str = "a,upper_bits,qmf_lower_bits,af_bits,df_bits,cf_bits,gap_qmf_bits,gap_af_bits,gap_df_bits";

impl Render for SweepReport {
    fn csv(&self) -> String {
        let mut out = format!("{SWEEP_HEADER}\n");
        for r in &self.0 {
            let cells = [
                Some(r.a),
                Some(r.upper_bits),
                r.qmf_lower_bits,
                r.af_bits,
                r.df_bits,
                r.cf_bits,
                r.gap_qmf_bits,
                r.gap_af_bits,
                r.gap_df_bits,
            ];
            let line: Vec<String> = cells.into_iter().map(csv_num).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    fn text(&self) -> String {
        let cell = |x: Option<Num>| x.map(|n| n.to_string()).unwrap_or_else(|| "-".into());
        let mut out = format!(
            "{:>10}  {:>14}  {:>14}  {:>14}  {:>14}  {:>14}  {:>10}  {:>10}  {:>10}\n",
            "a", "upper", "qmf", "af", "df", "cf", "gap_qmf", "gap_af", "gap_df"
        );
        for r in &self.0 {
            let _ = writeln!(
                out,
                "{:>10}  {:>14}  {:>14}  {:>14}  {:>14}  {:>14}  {:>10}  {:>10}  {:>10}",
                r.a.to_string(),
                r.upper_bits.to_string(),
                cell(r.qmf_lower_bits),
                cell(r.af_bits),
                cell(r.df_bits),
                cell(r.cf_bits),
                cell(r.gap_qmf_bits.map(|g| Num((g.0 * 1e3).round() / 1e3))),
                cell(r.gap_af_bits.map(|g| Num((g.0 * 1e3).round() / 1e3))),
                cell(r.gap_df_bits.map(|g| Num((g.0 * 1e3).round() / 1e3))),
            );
        }
        out
    }
}

// ---- simulation ------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct SimRecord {
    pub trials: u64,
    pub errors: u64,
    pub error_rate: Num,
    #[serde(rename = "T")]
    pub block_len: usize,
    pub rate_bits: Num,
    pub seed: u64,
    pub erasures: u64,
    pub message_bits: u32,
    pub chains: usize,
}

impl Render for SimRecord {
    fn csv(&self) -> String {
        format!(
            "trials,errors,error_rate,T,rate_bits,seed,erasures,message_bits,chains\n{},{},{},{},{},{},{},{},{}\n",
            self.trials,
            self.errors,
            csv_num(Some(self.error_rate)),
            self.block_len,
            csv_num(Some(self.rate_bits)),
            self.seed,
            self.erasures,
            self.message_bits,
            self.chains
        )
    }

    fn text(&self) -> String {
        format!(
            "{} errors / {} trials (error rate {}), T = {}, R = {} bits/use, seed {}\n{} erasures, {} message bits, {} chains searched\n",
            self.errors,
            self.trials,
            self.error_rate,
            self.block_len,
            self.rate_bits,
            self.seed,
            self.erasures,
            self.message_bits,
            self.chains
        )
    }
}

#[derive(Debug, Serialize)]
pub struct CensusRecord {
    pub node: String,
    pub sigma2_y: Num,
    pub draws: u64,
    pub distinct: u64,
    pub empirical_exponent: Num,
    pub entropy_exponent: Num,
    pub reference_exponent: Num,
    pub bound_exponent: Num,
    pub bound_ok: bool,
}

#[derive(Debug, Serialize)]
pub struct CensusOutput {
    #[serde(rename = "T")]
    pub block_len: usize,
    pub seed: u64,
    pub message: u64,
    pub nodes: Vec<CensusRecord>,
}

impl Render for CensusOutput {
    fn csv(&self) -> String {
        let mut out = String::from(
            "node,sigma2_y,draws,distinct,empirical_exponent,entropy_exponent,reference_exponent,bound_exponent,bound_ok\n",
        );
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                n.node,
                csv_num(Some(n.sigma2_y)),
                n.draws,
                n.distinct,
                csv_num(Some(n.empirical_exponent)),
                csv_num(Some(n.entropy_exponent)),
                csv_num(Some(n.reference_exponent)),
                csv_num(Some(n.bound_exponent)),
                n.bound_ok
            );
        }
        out
    }

    fn text(&self) -> String {
        let mut out = format!("T = {}, message {}, seed {}\n", self.block_len, self.message, self.seed);
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "{}: {} distinct / {} draws, exponent {} (entropy {}, reference {}), bound {}: {}",
                n.node,
                n.distinct,
                n.draws,
                n.empirical_exponent,
                n.entropy_exponent,
                n.reference_exponent,
                n.bound_exponent,
                if n.bound_ok { "ok" } else { "VIOLATED" }
            );
        }
        out
    }
}
