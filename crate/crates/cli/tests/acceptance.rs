//! Acceptance checks, run in sequence so the timing limits see an idle
//! machine. Prints one PASS/FAIL line per criterion and exits nonzero if any
//! fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relaycap::baselines::{sweep, upper_bound, Scheme, SweepRow};
use relaycap::cutset::{cut_report, gap_certificate, quantizer_params};
use relaycap::generate::{diamond, line, random_network, random_subset, RandomNetworkSpec};
use relaycap::linalg::{capacity_equal_power, capacity_waterfilled, GainMatrix};
use relaycap::sim::{estimate_error_rate, SimConfig};
use relaycap::unfold::{
    tilde_sets, unfold, unfolded_cut_value, verify_loop_lemma, verify_trellis_lemma, SubsetSequence, UnfoldedCut,
};
use relaycap::{parse_network, Cplx, Field, Network, NodeSet};

const SWEEP: [f64; 10] = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn diamond_sweep() -> Vec<SweepRow<f64>> {
    sweep(diamond, &SWEEP, &Scheme::ALL).expect("diamond sweep")
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let gaps: Vec<f64> = SWEEP
        .iter()
        .map(|&a| {
            let cert = gap_certificate(&diamond(a).unwrap()).unwrap();
            assert_eq!(cert.asserted_bound, 12.0);
            cert.gap
        })
        .collect();
    let elapsed = start.elapsed();
    let worst = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    verdict(
        worst <= 12.0 && elapsed < Duration::from_secs(1),
        format!("max gap {worst:.6} bits <= 12 over a = 2..2^10, {}", secs(elapsed)),
    )
}

fn criterion_2(rows: &[SweepRow<f64>]) -> Verdict {
    let growth = rows[9].gap_af().unwrap() - rows[0].gap_af().unwrap();
    let dominated = rows
        .iter()
        .filter(|r| r.a >= 16.0)
        .all(|r| r.gap_af().unwrap() > r.gap_qmf().unwrap());
    verdict(
        growth >= 14.0 && dominated,
        format!("gap_af growth {growth:.4} bits (>= 14), gap_af > gap_qmf for a >= 16: {dominated}"),
    )
}

fn criterion_3(rows: &[SweepRow<f64>]) -> Verdict {
    let ratio = rows[9].df.unwrap() / 1024f64.log2();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap_df().unwrap()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] > w[0]);
    verdict(
        (2.8..=3.1).contains(&ratio) && monotone,
        format!("df/log2(a) = {ratio:.6} at a = 1024, gap_df increasing: {monotone}"),
    )
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations = 0;
    let mut widest = 0.0f64;
    for _ in 0..1000 {
        let (rows, cols) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let scale = 10f64.powf(rng.gen_range(-2.0..3.0));
        let h = GainMatrix::from_fn(rows, cols, |_, _| {
            Cplx::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
        });
        let gap = capacity_waterfilled(&h, 1.0) - capacity_equal_power(&h, 1.0);
        let n = rows.min(cols) as f64;
        widest = widest.max(gap);
        if gap < -1e-9 || gap > n + 1e-9 {
            violations += 1;
        }
    }
    verdict(violations == 0, format!("{violations} violations / 1000 matrices, largest gap {widest:.6} bits"))
}

fn random_networks(seed: u64, count: usize) -> Vec<Network> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let field = if rng.gen_bool(0.5) { Field::Complex } else { Field::Real };
            random_network(&mut rng, &RandomNetworkSpec { field, ..Default::default() })
        })
        .collect()
}

fn criterion_5() -> Verdict {
    let mut cuts = 0;
    let mut violations = 0;
    for net in random_networks(5, 1000) {
        let u = net.field_factor();
        for cut in net.enumerate_cuts().unwrap() {
            let r = cut_report(&net, &cut);
            let tol = 1e-9 * (1.0 + r.mi_iid);
            cuts += 1;
            if r.mi_quantized > r.mi_iid + tol || r.mi_iid > r.mi_quantized + u * r.rows as f64 + tol {
                violations += 1;
            }
        }
    }
    verdict(violations == 0, format!("{violations} violations / {cuts} cuts on 1000 networks"))
}

fn criterion_6() -> Verdict {
    let mut worst = 0.0f64;
    let mut pass = true;
    for s in [1.0f64, 1.5, 2.0, 10.0, 1e3, 1e6] {
        let q = quantizer_params(s).unwrap();
        for u in [0.5f64, 1.0] {
            let rate = q.rate(u);
            let direct = u * (1.0 + (s - 1.0) / s).log2();
            pass &= rate <= u && (rate - direct).abs() <= 1e-12;
            if let Some(r) = q.rate_from_noise(u) {
                worst = worst.max((r - rate).abs());
                pass &= (r - rate).abs() <= 1e-9;
            }
        }
    }
    verdict(pass, format!("rate <= u at all six powers, max |rate - noise form| {worst:.3e}"))
}

fn criterion_7() -> Verdict {
    let net = diamond(2.0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut k7_time = Duration::ZERO;
    for k in 4..=7usize {
        let start = Instant::now();
        let r = verify_trellis_lemma(&net, k).unwrap();
        let elapsed = start.elapsed();
        if k == 7 {
            k7_time = elapsed;
        }
        pass &= r.violation_count == 0 && r.checked == 4u64.pow(k as u32) && r.factor == k as i64 - 3;
        parts.push(format!("K={k}: {}/{}", r.violation_count, r.checked));
    }
    pass &= k7_time < Duration::from_secs(30);

    // every transition of a steady cut reproduces the original crossing
    // matrix, so the value is a sum of K-1 bit-identical terms; the product
    // (K-1)*x may round differently from that sum by an ulp
    let mut steady_mismatch = 0;
    let mut product_dev = 0.0f64;
    for k in 2..=7usize {
        let unet = unfold(&net, k).unwrap();
        for cut in net.enumerate_cuts().unwrap() {
            let original = cut_report(&net, &cut).mi_iid;
            let value = unfolded_cut_value(&unet, &UnfoldedCut::steady(&cut, k)).unwrap();
            let summed: f64 = std::iter::repeat(original).take(k - 1).sum();
            if value.to_bits() != summed.to_bits() {
                steady_mismatch += 1;
            }
            let product = (k - 1) as f64 * original;
            product_dev = product_dev.max((value - product).abs() / product.abs().max(f64::MIN_POSITIVE));
        }
    }
    pass &= steady_mismatch == 0 && product_dev <= 4.0 * f64::EPSILON;
    verdict(
        pass,
        format!(
            "violations {}, K=7 in {}, steady cuts not bit-equal to K-1 copies {steady_mismatch}, rel. dev. from (K-1)x {product_dev:.1e}",
            parts.join(", "),
            secs(k7_time)
        ),
    )
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    let mut count_mismatch = 0;
    let mut worst_equality = 0.0f64;
    let mut smallest_margin = f64::INFINITY;
    for net in random_networks(88, 1000) {
        let d = NodeSet::singleton(net.destination());
        let relays: NodeSet = net.relays().into_iter().collect();
        let l = rng.gen_range(2..=4);
        let sets: Vec<NodeSet> = (0..l).map(|_| random_subset(&mut rng, relays, 0.5).union(d)).collect();
        let seq = SubsetSequence::new(&net, sets.clone()).unwrap();
        let r = verify_loop_lemma(&net, &seq);
        smallest_margin = smallest_margin.min(r.margin);
        if r.margin < -1e-9 {
            violations += 1;
        }
        let tilde: Vec<NodeSet> = (1..=l).map(|k| tilde_sets(&seq, k).unwrap()).collect();
        for v in net.nodes() {
            let in_sets = sets.iter().filter(|s| s.contains(v)).count();
            let in_tilde = tilde.iter().filter(|s| s.contains(v)).count();
            if in_sets != in_tilde {
                count_mismatch += 1;
            }
        }

        let v = random_subset(&mut rng, relays, 0.5).union(d);
        let eq = verify_loop_lemma(&net, &SubsetSequence::new(&net, vec![v, v]).unwrap());
        worst_equality = worst_equality.max((eq.lhs - eq.rhs).abs() / eq.lhs.abs().max(1.0));
    }
    verdict(
        violations == 0 && count_mismatch == 0 && worst_equality <= 1e-12,
        format!(
            "{violations} violations / 1000 (min margin {smallest_margin:.3e}), equality case {worst_equality:.1e}, membership mismatches {count_mismatch}"
        ),
    )
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn criterion_9() -> Verdict {
    let start = Instant::now();
    let net = line(&[100.0, 100.0]).unwrap();
    let low = estimate_error_rate(&net, &SimConfig { trials: 200, seed: 0, ..SimConfig::new(8, 1.0) }).unwrap();

    let above = upper_bound(&net).unwrap() + 2.0;
    let high = estimate_error_rate(&net, &SimConfig { trials: 200, seed: 0, ..SimConfig::new(2, above) }).unwrap();

    let medians: Vec<f64> = [4, 8, 12]
        .into_iter()
        .map(|t| {
            let rates = (0..5)
                .map(|seed| {
                    let cfg = SimConfig { trials: 10_000, seed, ..SimConfig::new(t, 0.5) };
                    estimate_error_rate(&net, &cfg).unwrap().error_rate
                })
                .collect();
            median(rates)
        })
        .collect();
    let trend = medians.windows(2).all(|w| w[1] <= w[0]);
    let elapsed = start.elapsed();
    verdict(
        low.error_rate < 0.10 && high.error_rate > 0.5 && trend && elapsed < Duration::from_secs(120),
        format!(
            "R=1 T=8: {}, R={above:.3} T=2: {}, median over T=4,8,12 at R=0.5: {:?}, {}",
            low.error_rate,
            high.error_rate,
            medians,
            secs(elapsed)
        ),
    )
}

fn relaycap(args: &[&str], threads: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_relaycap"))
        .args(args)
        .args(["--threads", threads])
        .output()
        .expect("relaycap runs");
    assert!(out.status.success(), "relaycap {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn criterion_10(dir: &Path) -> Verdict {
    let mut nets = random_networks(10, 1000);
    nets.push(diamond(2.0).unwrap());
    nets.push(line(&[100.0, 100.0]).unwrap());
    nets.push(line(&[1.0]).unwrap());
    let mut bad_count = 0;
    let mut bad_round_trip = 0;
    for net in &nets {
        if net.enumerate_cuts().unwrap().len() != 1 << (net.len() - 2) {
            bad_count += 1;
        }
        let back: Network = parse_network(&net.to_json()).unwrap();
        if &back != net || back.to_json() != net.to_json() {
            bad_round_trip += 1;
        }
    }

    let line_path = dir.join("line.json");
    std::fs::write(&line_path, line(&[100.0, 100.0]).unwrap().to_json()).unwrap();
    let random_path = dir.join("random.json");
    std::fs::write(&random_path, nets[3].to_json()).unwrap();
    let line_arg = line_path.to_str().unwrap();
    let random_arg = random_path.to_str().unwrap();
    let invocations: Vec<Vec<&str>> = vec![
        vec!["certificate", "diamond", "--format", "json"],
        vec!["bound", random_arg, "--format", "csv"],
        vec!["sweep", "diamond", "--format", "csv"],
        vec!["verify-trellis", "diamond", "--stages", "6", "--format", "json"],
        vec!["simulate", line_arg, "--format", "json", "--trials", "300", "--seed", "3"],
        vec!["census", line_arg, "--format", "json", "--trials", "300"],
    ];
    let mut differing = Vec::new();
    for args in &invocations {
        let one = relaycap(args, "1");
        if one != relaycap(args, "4") || one != relaycap(args, "1") {
            differing.push(args[0]);
        }
    }
    verdict(
        bad_count == 0 && bad_round_trip == 0 && differing.is_empty(),
        format!(
            "cut count wrong on {bad_count}/{} networks, round-trip failures {bad_round_trip}, {} commands byte-identical across 1 and 4 threads{}",
            nets.len(),
            invocations.len() - differing.len(),
            if differing.is_empty() { String::new() } else { format!(", differing: {differing:?}") }
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let rows = diamond_sweep();
    let checks: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("constant-gap certificate", Box::new(criterion_1)),
        ("amplify-forward divergence", Box::new(|| criterion_2(&rows))),
        ("decode-forward divergence", Box::new(|| criterion_3(&rows))),
        ("waterfilling gap", Box::new(criterion_4)),
        ("quantization sandwich", Box::new(criterion_5)),
        ("quantizer rate", Box::new(criterion_6)),
        ("trellis min-cut", Box::new(criterion_7)),
        ("loop inequality", Box::new(criterion_8)),
        ("Monte Carlo smoke", Box::new(criterion_9)),
        ("structural", Box::new(|| criterion_10(dir.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let v = check();
        println!("criterion {:>2} {name}: {}  {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
