//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trajattack::attack::{run_attack, run_attack_observed, t2p_predict, AttackConfig};
use trajattack::baseline::baseline_corpus;
use trajattack::experiment::{cmd_sweep, Dataset, ExperimentConfig, SWEEP};
use trajattack::hmm::{
    baum_welch_pass, forward_backward, log_likelihood, viterbi, BandPolicy, Direction, HiddenSpace, HmmParams, Matrix,
    ObservationAlphabet,
};
use trajattack::ingest::{parse_porto, read_plt_dir, synth_generate, SynthConfig};
use trajattack::io::write_jsonl_to;
use trajattack::metrics::a2ed;
use trajattack::publisher::{min_region_size, publish_corpus, theoretical_max_error, PublishConfig};
use trajattack::{GridSpace, PublishedTrajectory, TrajectoryTrue};

const PRIVACY_STEPS: usize = 10_000;
const PRIVACY_TIME_LIMIT: Duration = Duration::from_secs(5);
const FORMULA_TOL_M: f64 = 1e-3;
const VITERBI_INSTANCES: u64 = 100;
const VITERBI_TIME_LIMIT: Duration = Duration::from_secs(10);
const FB_INSTANCES: u64 = 50;
const FB_TOL: f64 = 1e-10;
const EM_CORPORA: u64 = 20;
const EM_ITERATIONS: usize = 10;
const EM_TOL: f64 = 1e-8;
const STOCHASTIC_TOL: f64 = 1e-9;
const STOCHASTIC_PASSES: usize = 50;
const EFFECTIVENESS_SEEDS: u64 = 5;
const EFFECTIVENESS_RATIO: f64 = 0.85;
const EFFECTIVENESS_TIME_LIMIT: Duration = Duration::from_secs(600);
const EPRL_MIN_WINS: usize = 4;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// random HMMs

fn normalized(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.05..1.0)).collect()
}

/// Random model. With `twin`, state 1 duplicates state 0 exactly so that
/// optimal paths tie; with `sparse`, emission rows get random zeros.
fn random_hmm(rng: &mut ChaCha8Rng, n: usize, m: usize, twin: bool, sparse: bool) -> HmmParams {
    let mut pi = weights(rng, n);
    let mut a: Vec<Vec<f64>> = (0..n).map(|_| weights(rng, n)).collect();
    let mut b: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut row = weights(rng, m);
            if sparse {
                let keep = rng.gen_range(0..m);
                for (o, v) in row.iter_mut().enumerate() {
                    if o != keep && rng.gen_bool(0.3) {
                        *v = 0.0;
                    }
                }
            }
            row
        })
        .collect();
    if twin && n > 1 {
        pi[1] = pi[0];
        a[1] = a[0].clone();
        for row in a.iter_mut() {
            row[1] = row[0];
        }
        b[1] = b[0].clone();
    }
    let a = Matrix::from_rows(a.iter().map(|r| normalized(r)).collect()).unwrap();
    let b = Matrix::from_rows(b.iter().map(|r| normalized(r)).collect()).unwrap();
    HmmParams::new(normalized(&pi), a.clone(), a, b).unwrap()
}

fn draw(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|v| *v > 0.0).unwrap()
}

/// Observation sequence sampled from the model, so it has positive probability.
fn sample_obs(rng: &mut ChaCha8Rng, p: &HmmParams, t_len: usize) -> Vec<usize> {
    let mut h = draw(rng, &p.pi);
    let mut obs = Vec::with_capacity(t_len);
    for t in 0..t_len {
        if t > 0 {
            h = draw(rng, p.a_fwd.row(h));
        }
        obs.push(draw(rng, p.b.row(h)));
    }
    obs
}

/// Visits every state path of length `t_len` over `n` states.
fn for_each_path(n: usize, t_len: usize, mut f: impl FnMut(&[usize])) {
    let mut path = vec![0; t_len];
    loop {
        f(&path);
        let mut i = t_len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            path[i] += 1;
            if path[i] < n {
                break;
            }
            path[i] = 0;
        }
    }
}

/// Exhaustive argmax with the same summation order as the decoder. Among
/// equal scores the path that is smallest read from the last step backwards
/// wins, which is what lowest-index tie-breaking yields on backtracking.
fn brute_force_viterbi(p: &HmmParams, obs: &[usize]) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_path(p.n_states(), obs.len(), |path| {
        let mut s = p.pi[path[0]].ln() + p.b.get(path[0], obs[0]).ln();
        for t in 1..obs.len() {
            s = (s + p.a_fwd.get(path[t - 1], path[t]).ln()) + p.b.get(path[t], obs[t]).ln();
        }
        if s == f64::NEG_INFINITY {
            return;
        }
        let better = match &best {
            None => true,
            Some((bs, bp)) => s > *bs || (s == *bs && path.iter().rev().lt(bp.iter().rev())),
        };
        if better {
            best = Some((s, path.to_vec()));
        }
    });
    best.expect("sampled sequence has a positive-probability path").1
}

fn path_sum_likelihood(p: &HmmParams, obs: &[usize]) -> f64 {
    let mut total = 0.0;
    for_each_path(p.n_states(), obs.len(), |path| {
        let mut prob = p.pi[path[0]] * p.b.get(path[0], obs[0]);
        for t in 1..obs.len() {
            prob *= p.a_fwd.get(path[t - 1], path[t]) * p.b.get(path[t], obs[t]);
        }
        total += prob;
    });
    total
}

// ---------------------------------------------------------------------------
// criteria

fn c1_privacy() -> Verdict {
    let start = Instant::now();
    let mut total = 0usize;
    let mut bad = 0usize;
    let mut min_steps = usize::MAX;
    for (li, &lambda) in [0.05, 0.1, 0.2].iter().enumerate() {
        for d in 0..3usize {
            let sc = SynthConfig {
                n_traj: 700,
                seed: 100 + li as u64,
                ..Default::default()
            };
            let gs = sc.grid().unwrap();
            let truths = synth_generate(&sc).unwrap();
            let pubs = publish_corpus(
                &truths,
                &PublishConfig {
                    lambda,
                    deviation: d,
                    seed: d as u64,
                },
                &gs,
            )
            .unwrap();
            let mut steps = 0;
            for (t, p) in truths.iter().zip(&pubs) {
                for (pt, r) in t.points().iter().zip(p.regions()) {
                    let reg = r.region;
                    let area = reg.height * reg.width;
                    let inside = (reg.row0..reg.row0 + reg.height).contains(&pt.cell.row)
                        && (reg.col0..reg.col0 + reg.width).contains(&pt.cell.col);
                    if !(1.0 / area as f64 <= lambda
                        && inside
                        && reg.row0 + reg.height <= 20
                        && reg.col0 + reg.width <= 20)
                    {
                        bad += 1;
                    }
                    steps += 1;
                }
            }
            min_steps = min_steps.min(steps);
            total += steps;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        bad == 0 && min_steps >= PRIVACY_STEPS && elapsed < PRIVACY_TIME_LIMIT,
        format!(
            "{total} steps over 9 (lambda, d) settings, >= {min_steps} each, {bad} violations, {:.2?}",
            elapsed
        ),
    )
}

fn c2_formula() -> Verdict {
    let expected = [
        (99.383, [596.298, 695.681, 795.064]),
        (148.957, [893.742, 1042.699, 1191.656]),
    ];
    let ell = min_region_size(0.1);
    let mut worst: f64 = 0.0;
    for (g, values) in expected {
        for (d, v) in values.iter().enumerate() {
            worst = worst.max((theoretical_max_error(ell, d, g) - v).abs());
        }
    }
    verdict(
        ell == 10 && worst <= FORMULA_TOL_M,
        format!("max |error| {worst:.2e} m over 6 table entries"),
    )
}

fn c3_viterbi() -> Verdict {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut ties = 0;
    for i in 0..VITERBI_INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + i);
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=4);
        let t_len = rng.gen_range(1..=8);
        let twin = i % 2 == 1 && n > 1;
        ties += usize::from(twin);
        let p = random_hmm(&mut rng, n, m, twin, i % 3 == 0);
        let obs = sample_obs(&mut rng, &p, t_len);
        if viterbi(&p, &obs, Direction::Forward).unwrap() != brute_force_viterbi(&p, &obs) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        mismatches == 0 && elapsed < VITERBI_TIME_LIMIT,
        format!("{VITERBI_INSTANCES} instances ({ties} with tied twin states), {mismatches} mismatches, {elapsed:.2?}"),
    )
}

fn c4_forward_backward() -> Verdict {
    let mut worst: f64 = 0.0;
    for i in 0..FB_INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + i);
        let n = rng.gen_range(2..=3);
        let m = rng.gen_range(2..=4);
        let t_len = rng.gen_range(1..=8);
        let p = random_hmm(&mut rng, n, m, false, i % 2 == 0);
        let obs = sample_obs(&mut rng, &p, t_len);
        let oracle = path_sum_likelihood(&p, &obs).ln();
        let ll = log_likelihood(&p, &obs, Direction::Forward).unwrap();
        let post = forward_backward(&p, &obs, Direction::Forward).unwrap();
        worst = worst.max((ll - oracle).abs()).max((post.log_likelihood - oracle).abs());
    }
    verdict(
        worst <= FB_TOL,
        format!("{FB_INSTANCES} instances, max |log-likelihood error| {worst:.2e}"),
    )
}

fn c5_em() -> Verdict {
    let mut worst_drop: f64 = 0.0;
    for c in 0..EM_CORPORA {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + c);
        let n = rng.gen_range(2..=4);
        let m = rng.gen_range(2..=4);
        let truth = random_hmm(&mut rng, n, m, false, false);
        let seqs: Vec<Vec<usize>> = (0..rng.gen_range(3..=8))
            .map(|_| {
                let len = rng.gen_range(3..=12);
                sample_obs(&mut rng, &truth, len)
            })
            .collect();
        let dir = if c % 2 == 0 {
            Direction::Forward
        } else {
            Direction::Backward
        };
        let mut params = random_hmm(&mut rng, n, m, false, false);
        let mut lls = Vec::with_capacity(EM_ITERATIONS + 1);
        for _ in 0..EM_ITERATIONS {
            let (next, ll) = baum_welch_pass(&params, &seqs, dir, None).unwrap();
            lls.push(ll);
            params = next;
        }
        lls.push(seqs.iter().map(|s| log_likelihood(&params, s, dir).unwrap()).sum());
        for w in lls.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    verdict(
        worst_drop <= EM_TOL,
        format!("{EM_CORPORA} corpora x {EM_ITERATIONS} iterations, largest decrease {worst_drop:.2e}"),
    )
}

fn synth_pubs(
    n_traj: usize,
    side: usize,
    lambda: f64,
    d: usize,
    seed: u64,
) -> (GridSpace, Vec<TrajectoryTrue>, Vec<PublishedTrajectory>) {
    let sc = SynthConfig {
        n_traj,
        n_rows: side,
        n_cols: side,
        seed,
        ..Default::default()
    };
    let gs = sc.grid().unwrap();
    let truths = synth_generate(&sc).unwrap();
    let pubs = publish_corpus(
        &truths,
        &PublishConfig {
            lambda,
            deviation: d,
            seed,
        },
        &gs,
    )
    .unwrap();
    (gs, truths, pubs)
}

fn c6_stochastic() -> Verdict {
    let (gs, _, pubs) = synth_pubs(80, 15, 0.1, 2, 6);
    let cfg = AttackConfig {
        passes: STOCHASTIC_PASSES,
        seed: 6,
        ..Default::default()
    };
    let ell = min_region_size(cfg.lambda);
    let hidden = HiddenSpace::build(&pubs).unwrap();
    let alphabet = ObservationAlphabet::build(
        &pubs,
        &hidden,
        |c| t2p_predict(c, ell, &gs),
        ell,
        cfg.gamma,
        BandPolicy::AdmitObserved,
    )
    .unwrap();
    let mut worst_sum: f64 = 0.0;
    let mut masked_nonzero = 0usize;
    let mut passes = 0;
    run_attack_observed(&pubs, &gs, &cfg, |r| {
        passes += 1;
        worst_sum = worst_sum.max(r.params.max_stochastic_error());
        for h in 0..hidden.len() {
            let cell = hidden.cell(h);
            for o in 0..alphabet.len() {
                if !alphabet.region(o).contains(cell) && r.params.b.get(h, o) != 0.0 {
                    masked_nonzero += 1;
                }
            }
        }
    })
    .unwrap();
    verdict(
        passes == STOCHASTIC_PASSES && worst_sum <= STOCHASTIC_TOL && masked_nonzero == 0,
        format!(
            "{passes} passes, {} states x {} symbols, max row-sum error {worst_sum:.2e}, {masked_nonzero} non-zero masked entries",
            hidden.len(),
            alphabet.len()
        ),
    )
}

/// Everything criteria 7-10 need, per seed.
struct SeedRun {
    baseline_by_lambda: [f64; 3],
    hmm_by_d: [f64; 3],
    hmm_no_eprl: f64,
    outside: usize,
    checked: usize,
    hmm_time: Duration,
}

fn count_outside(pubs: &[PublishedTrajectory], preds: &[TrajectoryTrue]) -> (usize, usize) {
    let mut outside = 0;
    let mut checked = 0;
    for (p, pred) in pubs.iter().zip(preds) {
        assert_eq!(p.id(), pred.id());
        for (r, c) in p.regions().iter().zip(pred.points()) {
            checked += 1;
            if r.t != c.t || !r.region.contains(c.cell) {
                outside += 1;
            }
        }
    }
    (outside, checked)
}

fn effectiveness_seed(seed: u64) -> SeedRun {
    let mut run = SeedRun {
        baseline_by_lambda: [0.0; 3],
        hmm_by_d: [0.0; 3],
        hmm_no_eprl: 0.0,
        outside: 0,
        checked: 0,
        hmm_time: Duration::ZERO,
    };
    let g = 100.0;
    let mut tally = |pubs: &[PublishedTrajectory], preds: &[TrajectoryTrue]| {
        let (o, c) = count_outside(pubs, preds);
        run.outside += o;
        run.checked += c;
    };
    let mut baseline_by_lambda = [0.0; 3];
    let mut hmm_by_d = [0.0; 3];
    let mut hmm_no_eprl = 0.0;
    let mut hmm_time = Duration::ZERO;
    for (i, lambda) in [0.05, 0.1, 0.2].into_iter().enumerate() {
        let (_, truths, pubs) = synth_pubs(200, 20, lambda, 0, seed);
        let preds = baseline_corpus(&pubs, seed).unwrap();
        tally(&pubs, &preds);
        baseline_by_lambda[i] = a2ed(&truths, &preds, g).unwrap();
    }
    for (d, slot) in hmm_by_d.iter_mut().enumerate() {
        let (gs, truths, pubs) = synth_pubs(200, 20, 0.1, d, seed);
        let cfg = AttackConfig {
            seed,
            ..Default::default()
        };
        let start = Instant::now();
        let out = run_attack(&pubs, &gs, &cfg).unwrap();
        if d == 0 {
            hmm_time = start.elapsed();
        }
        tally(&pubs, &out.predictions);
        *slot = a2ed(&truths, &out.predictions, g).unwrap();
        if d == 0 {
            let off = run_attack(&pubs, &gs, &AttackConfig { eprl: false, ..cfg }).unwrap();
            tally(&pubs, &off.predictions);
            hmm_no_eprl = a2ed(&truths, &off.predictions, g).unwrap();
        }
    }
    run.baseline_by_lambda = baseline_by_lambda;
    run.hmm_by_d = hmm_by_d;
    run.hmm_no_eprl = hmm_no_eprl;
    run.hmm_time = hmm_time;
    run
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn c7_containment(runs: &[SeedRun]) -> Verdict {
    let outside: usize = runs.iter().map(|r| r.outside).sum();
    let checked: usize = runs.iter().map(|r| r.checked).sum();
    verdict(
        outside == 0,
        format!("{checked} predicted cells (HMM-RL and baseline), {outside} outside their region"),
    )
}

fn c8_effectiveness(runs: &[SeedRun]) -> Verdict {
    let hmm = mean(runs.iter().map(|r| r.hmm_by_d[0]));
    let base = mean(runs.iter().map(|r| r.baseline_by_lambda[1]));
    let time: Duration = runs.iter().map(|r| r.hmm_time).sum();
    let ratio = hmm / base;
    verdict(
        ratio <= EFFECTIVENESS_RATIO && time < EFFECTIVENESS_TIME_LIMIT,
        format!("mean A2ED HMM-RL {hmm:.2} m vs baseline {base:.2} m, ratio {ratio:.3} (limit {EFFECTIVENESS_RATIO}), HMM-RL time {time:.2?}"),
    )
}

fn c9_eprl(runs: &[SeedRun]) -> Verdict {
    let wins = runs.iter().filter(|r| r.hmm_by_d[0] < r.hmm_no_eprl).count();
    let pairs: Vec<String> = runs
        .iter()
        .map(|r| format!("{:.1}/{:.1}", r.hmm_by_d[0], r.hmm_no_eprl))
        .collect();
    verdict(
        wins >= EPRL_MIN_WINS,
        format!(
            "EPRL better in {wins}/{} seeds (with/without, m: {})",
            runs.len(),
            pairs.join(" ")
        ),
    )
}

fn c10_trends(runs: &[SeedRun]) -> Verdict {
    let base: Vec<f64> = (0..3)
        .map(|i| mean(runs.iter().map(|r| r.baseline_by_lambda[i])))
        .collect();
    let hmm: Vec<f64> = (0..3).map(|i| mean(runs.iter().map(|r| r.hmm_by_d[i]))).collect();
    let base_ok = base[0] > base[1] && base[1] > base[2];
    let hmm_ok = hmm[0] <= hmm[1] && hmm[1] <= hmm[2];
    verdict(
        base_ok && hmm_ok,
        format!(
            "baseline A2ED over lambda 0.05/0.1/0.2: {:.2}/{:.2}/{:.2} m; HMM-RL A2ED over d 0/1/2: {:.2}/{:.2}/{:.2} m",
            base[0], base[1], base[2], hmm[0], hmm[1], hmm[2]
        ),
    )
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    let mut buf = Vec::new();
    write_jsonl_to(&mut buf, items).unwrap();
    String::from_utf8(buf).unwrap()
}

fn c11_golden() -> Verdict {
    let golden = |name: &str| std::fs::read_to_string(fixtures().join(name)).unwrap();
    let (plt, plt_skipped) = read_plt_dir(&fixtures().join("geolife")).unwrap();
    let porto = parse_porto(std::fs::File::open(fixtures().join("porto_sample.csv")).unwrap()).unwrap();
    let plt_ok = jsonl(&plt) == golden("geolife_raw.golden.jsonl");
    let porto_ok = jsonl(&porto.trajectories) == golden("porto_raw.golden.jsonl");
    let counts_ok = plt_skipped == 2 && porto.skipped_malformed == 2 && porto.dropped_missing == 1;
    verdict(
        plt_ok && porto_ok && counts_ok,
        format!(
            "PLT golden {}, Porto golden {}, skips PLT {plt_skipped}/2, Porto malformed {}/2, missing {}/1",
            if plt_ok { "match" } else { "DIFFER" },
            if porto_ok { "match" } else { "DIFFER" },
            porto.skipped_malformed,
            porto.dropped_missing
        ),
    )
}

fn c12_sweep() -> Verdict {
    let mut cfg = ExperimentConfig::new(Dataset::Synth(SynthConfig {
        n_traj: 60,
        n_rows: 12,
        n_cols: 12,
        seed: 12,
        ..Default::default()
    }));
    cfg.seed = 12;
    cfg.attack.passes = 6;
    cfg.sweep.lambda = vec![0.1, 0.2];
    cfg.sweep.deviation = vec![0, 1];
    cfg.sweep.k = vec![1, 3];
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cmd_sweep(&cfg, &[], &a).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    single.install(|| cmd_sweep(&cfg, &[], &b)).unwrap();
    let first = std::fs::read(a.join(SWEEP)).unwrap();
    let second = std::fs::read(b.join(SWEEP)).unwrap();
    let rows = first.iter().filter(|&&c| c == b'\n').count();
    verdict(
        first == second && rows == 1 + 8 * 2 * 2,
        format!(
            "{} bytes, {rows} lines, parallel vs single-thread run {}",
            first.len(),
            if first == second { "identical" } else { "DIFFER" }
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut record = |n: u32, name: &'static str, v: Verdict| {
        println!("[{}] {n:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, name, v));
    };
    record(1, "privacy constraint", c1_privacy());
    record(2, "theoretical error formula", c2_formula());
    record(3, "Viterbi vs exhaustive search", c3_viterbi());
    record(4, "forward-backward vs path sum", c4_forward_backward());
    record(5, "Baum-Welch monotonicity", c5_em());
    record(6, "stochasticity and mask", c6_stochastic());
    let runs: Vec<SeedRun> = (0..EFFECTIVENESS_SEEDS).map(effectiveness_seed).collect();
    record(7, "prediction containment", c7_containment(&runs));
    record(8, "desk-scale effectiveness", c8_effectiveness(&runs));
    record(9, "EPRL ablation", c9_eprl(&runs));
    record(10, "sensitivity trends", c10_trends(&runs));
    record(11, "parser golden files", c11_golden());
    record(12, "sweep determinism", c12_sweep());
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
