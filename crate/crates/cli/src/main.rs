//! `relaycap`: cut-set bounds, relaying rates and verifiers for Gaussian
//! relay networks.

mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use relaycap::baselines::{sweep, Scheme};
use relaycap::cutset::{gap_certificate, min_cut_analysis, qmf_achievable_general, qmf_achievable_layered};
use relaycap::generate::diamond;
use relaycap::sim::{estimate_error_rate, list_size_census, SimConfig};
use relaycap::unfold::{
    qmf_achievable_unfolded, tilde_sets, unfold, unfolded_min_cut, verify_loop_lemma, verify_trellis_lemma, SubsetSequence,
};
use relaycap::{parse_network, Error, Field, Network, NodeSet};

use report::*;

const LOOP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "relaycap", version, about = "Capacity bounds and relaying schemes for Gaussian relay networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-cut mutual information and the cut-set upper bound.
    Bound(Common),
    /// Quantize-map-forward achievable rates.
    Achievable(AchievableArgs),
    /// Upper bound, lower bound and the constant-gap check.
    Certificate(Common),
    /// Time-expand the network over K stages.
    Unfold(StagesArgs),
    /// Exhaustively check the unfolded min-cut bound over all cut sequences.
    VerifyTrellis(StagesArgs),
    /// Check the cyclic entropy inequality for a subset sequence.
    VerifyLoop(LoopArgs),
    /// Sweep the diamond template over its parameter.
    Sweep(SweepArgs),
    /// Monte Carlo block error rate of the quantize-map-forward relay chain.
    Simulate(SimArgs),
    /// Count distinct relay quantizer outputs for a fixed message.
    Census(SimArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Network description (JSON), or `diamond` for the built-in template.
    network: String,
    /// Parameter of the diamond template.
    #[arg(long, default_value_t = 2.0)]
    a: f64,
    /// Override the field declared by the network.
    #[arg(long, value_enum)]
    field: Option<FieldArg>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, env = "RELAYCAP_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct AchievableArgs {
    #[command(flatten)]
    common: Common,
    /// Also report the rate of the K-stage unfolding.
    #[arg(long)]
    stages: Option<usize>,
}

#[derive(Debug, Args)]
struct StagesArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 4)]
    stages: usize,
}

#[derive(Debug, Args)]
struct LoopArgs {
    #[command(flatten)]
    common: Common,
    /// Subsets separated by `;`, node names by `,`, e.g. `D,A1;D,A2`.
    #[arg(long)]
    sets: String,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Swept parameter; only the diamond's `a` exists.
    #[arg(long, default_value = "a")]
    param: String,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64,128,256,512,1024")]
    values: Vec<f64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme, default_value = "af,df,cf,qmf")]
    schemes: Vec<Scheme>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    /// Block length T.
    #[arg(long, default_value_t = 8)]
    block: usize,
    /// Rate in bits per channel use.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FieldArg {
    Real,
    Complex,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    Scheme::parse(s).map_err(|e| e.to_string())
}

/// Failure of a subcommand, mapped onto the process exit code.
enum Failure {
    Domain(Error),
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(Error::Capacity { .. }) => 3,
            _ => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Domain(e) => write!(f, "{e}"),
            Failure::Input(msg) => f.write_str(msg),
        }
    }
}

/// Rendered report plus whether the property it checks holds.
struct Outcome {
    text: String,
    holds: bool,
}

fn ok(text: String) -> Outcome {
    Outcome { text, holds: true }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(outcome) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(outcome.text.as_bytes()).and_then(|_| out.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::from(if outcome.holds { 0 } else { 4 })
        }
        Err(e) => {
            eprintln!("relaycap: error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Bound(c) | Command::Certificate(c) => c,
        Command::Achievable(a) => &a.common,
        Command::Unfold(s) | Command::VerifyTrellis(s) => &s.common,
        Command::VerifyLoop(l) => &l.common,
        Command::Sweep(s) => &s.common,
        Command::Simulate(s) | Command::Census(s) => &s.common,
    }
}

fn run(cmd: Command) -> Result<Outcome, Failure> {
    configure_threads(common(&cmd).threads)?;
    if let Command::Sweep(args) = &cmd {
        return run_sweep(args);
    }
    let c = common(&cmd);
    let net = load(c)?;
    let format = c.format;
    match &cmd {
        Command::Bound(_) => Ok(ok(BoundReport::new(&net, &min_cut_analysis(&net)?).render(format))),
        Command::Certificate(_) => {
            let report = CertificateReport::new(&net, &gap_certificate(&net)?);
            Ok(Outcome { holds: report.holds, text: report.render(format) })
        }
        Command::Achievable(args) => {
            let layered = match qmf_achievable_layered(&net) {
                Ok(r) => Some((r.rate, r.conservative)),
                Err(Error::NotLayered(_)) => None,
                Err(e) => return Err(e.into()),
            };
            let general = qmf_achievable_general(&net)?;
            let unfolded = match args.stages {
                Some(k) => Some((k, qmf_achievable_unfolded(&net, k)?)),
                None => None,
            };
            Ok(ok(AchievableReport::new(layered, general, unfolded).render(format)))
        }
        Command::Unfold(args) => Ok(ok(unfold_report(&net, args.stages)?.render(format))),
        Command::VerifyTrellis(args) => {
            let r = verify_trellis_lemma(&net, args.stages)?;
            let record = TrellisRecord {
                stages: r.stages,
                checked: r.checked,
                violations: r.violation_count,
                factor: r.factor,
                min_cut_bits: Num(r.min_original),
                min_unfolded_bits: Num(r.min_unfolded),
                margin_bits: Num(r.margin),
                vacuous: r.vacuous,
                witnesses: r
                    .violations
                    .iter()
                    .map(|v| TrellisWitness {
                        sequence: v.sequence.iter().map(|&mask| mask_names(&net, mask)).collect(),
                        value_bits: Num(v.value),
                        bound_bits: Num(v.bound),
                    })
                    .collect(),
            };
            Ok(Outcome { holds: r.violation_count == 0, text: record.render(format) })
        }
        Command::VerifyLoop(args) => {
            let sets = parse_sets(&net, &args.sets)?;
            let seq = SubsetSequence::new(&net, sets)?;
            let r = verify_loop_lemma(&net, &seq);
            let tilde = (1..=seq.len()).map(|k| tilde_sets(&seq, k)).collect::<Result<Vec<_>, _>>()?;
            let names = |s: &NodeSet| s.iter().map(|v| net.name(v).to_string()).collect::<Vec<_>>();
            let holds = r.margin >= -LOOP_TOLERANCE;
            let record = LoopRecord {
                sets: seq.sets().iter().map(names).collect(),
                tilde_sets: tilde.iter().map(names).collect(),
                lhs_bits: Num(r.lhs),
                rhs_bits: Num(r.rhs),
                margin_bits: Num(r.margin),
                holds,
            };
            Ok(Outcome { holds, text: record.render(format) })
        }
        Command::Simulate(args) => {
            let res = estimate_error_rate(&net, &sim_config(args))?;
            let record = SimRecord {
                trials: res.trials,
                errors: res.errors,
                error_rate: Num(res.error_rate),
                block_len: res.block_len,
                rate_bits: Num(res.rate_bits),
                seed: res.seed,
                erasures: res.erasures,
                message_bits: res.message_bits,
                chains: res.chains,
            };
            Ok(ok(record.render(format)))
        }
        Command::Census(args) => {
            let r = list_size_census(&net, &sim_config(args))?;
            let output = CensusOutput {
                block_len: r.block_len,
                seed: r.seed,
                message: r.message,
                nodes: r
                    .nodes
                    .iter()
                    .map(|n| CensusRecord {
                        node: n.node.clone(),
                        sigma2_y: Num(n.sigma2_y),
                        draws: n.draws,
                        distinct: n.distinct,
                        empirical_exponent: Num(n.empirical_exponent),
                        entropy_exponent: Num(n.entropy_exponent),
                        reference_exponent: Num(n.reference_exponent),
                        bound_exponent: Num(n.bound_exponent),
                        bound_ok: n.bound_ok,
                    })
                    .collect(),
            };
            Ok(Outcome { holds: r.holds(), text: output.render(format) })
        }
        Command::Sweep(_) => unreachable!("handled above"),
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), Failure> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Failure::Input("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Input(format!("cannot start thread pool: {e}")))
}

fn load(c: &Common) -> Result<Network, Failure> {
    let net = if c.network == "diamond" {
        diamond(c.a)?
    } else {
        let path = PathBuf::from(&c.network);
        let text = std::fs::read_to_string(&path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
        parse_network(&text)?
    };
    match c.field {
        None => Ok(net),
        Some(arg) => {
            let field = match arg {
                FieldArg::Real => Field::Real,
                FieldArg::Complex => Field::Complex,
            };
            if field != net.field() {
                eprintln!("relaycap: warning: treating the {} network as {}", net.field().name(), field.name());
            }
            Ok(net.with_field(field)?)
        }
    }
}

fn run_sweep(args: &SweepArgs) -> Result<Outcome, Failure> {
    let c = &args.common;
    if c.network != "diamond" {
        return Err(Failure::Input(format!("sweep needs the `diamond` template, got `{}`", c.network)));
    }
    if args.param != "a" {
        return Err(Failure::Input(format!("unknown sweep parameter `{}`; the diamond has only `a`", args.param)));
    }
    if args.values.is_empty() {
        return Err(Failure::Input("--values is empty".into()));
    }
    let field = c.field.map(|f| match f {
        FieldArg::Real => Field::Real,
        FieldArg::Complex => Field::Complex,
    });
    if field == Some(Field::Complex) {
        eprintln!("relaycap: warning: treating the real network as complex");
    }
    let template = |a: f64| -> relaycap::Result<Network> {
        let net = diamond(a)?;
        match field {
            Some(f) => net.with_field(f),
            None => Ok(net),
        }
    };
    let rows = sweep(template, &args.values, &args.schemes)?;
    let report = SweepReport(
        rows.iter()
            .map(|r| SweepRecord {
                a: Num(r.a),
                upper_bits: Num(r.upper),
                qmf_lower_bits: r.qmf_lower.map(Num),
                af_bits: r.af.map(Num),
                df_bits: r.df.map(Num),
                cf_bits: r.cf.map(Num),
                gap_qmf_bits: r.gap_qmf().map(Num),
                gap_af_bits: r.gap_af().map(Num),
                gap_df_bits: r.gap_df().map(Num),
            })
            .collect(),
    );
    Ok(ok(report.render(c.format)))
}

fn unfold_report(net: &Network, stages: usize) -> Result<UnfoldReport, Failure> {
    let unet = unfold(net, stages)?;
    let min_cut = min_cut_analysis(net)?.min_iid();
    let gain = |g: Option<relaycap::Cplx<f64>>| g.map(|g| [Num(g.re), Num(g.im)]);
    Ok(UnfoldReport {
        stages,
        nodes: unet.node_count(),
        crossing_edges: unet.crossing_edges().count(),
        memory_edges: unet.memory_edges().count(),
        min_cut_bits: Num(min_cut),
        steady_bits: Num((stages - 1) as f64 * min_cut),
        min_cut_unfolded_bits: Num(unfolded_min_cut(net, stages)?),
        qmf_unfolded_bits: Num(qmf_achievable_unfolded(net, stages)?),
        edges: unet
            .edges()
            .iter()
            .map(|e| EdgeRecord { from: unet.name(e.from), to: unet.name(e.to), gain: gain(e.gain) })
            .collect(),
    })
}

/// Names of `Ω` for a cut given by its relay bitmask.
fn mask_names(net: &Network, mask: u64) -> Vec<String> {
    let mut omega = NodeSet::singleton(net.source());
    for (k, r) in net.relays().into_iter().enumerate() {
        if mask >> k & 1 == 1 {
            omega.insert(r);
        }
    }
    omega.iter().map(|v| net.name(v).to_string()).collect()
}

fn parse_sets(net: &Network, text: &str) -> Result<Vec<NodeSet>, Failure> {
    text.split(';')
        .map(|group| {
            group
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .try_fold(NodeSet::default(), |set, name| {
                    net.node_by_name(name)
                        .map(|v| set.with(v))
                        .ok_or_else(|| Failure::Input(format!("unknown node `{name}` in --sets")))
                })
        })
        .collect()
}

fn sim_config(args: &SimArgs) -> SimConfig {
    SimConfig { trials: args.trials, seed: args.seed, ..SimConfig::new(args.block, args.rate) }
}
