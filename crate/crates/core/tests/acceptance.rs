//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use common::{rel_err, synth_subjects, tone, train_pairs};
use prt_core::dataset::{load_bidmc, reference_rr, LoadOptions};
use prt_core::dsp::spectrum::SpectralConfig;
use prt_core::evaluation::{
    evaluate_fold, run_cross_validation, split_subject_folds, CvConfig, ReferencePassthrough,
};
use prt_core::parallel::ExecMode;
use prt_core::preprocess::{prepare_all, WindowConfig};
use prt_core::respmetrics::{estimate_rr_count, estimate_rr_spectral, mae, RespConfig};
use prt_core::translator::loss::{
    cycle_loss, cycle_loss_grad, gan_value, rr_loss, total_objective,
};
use prt_core::translator::{train, RrLossMode, TranslatorBundle, TranslatorConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const NOISE_FLOOR_BRPM: f64 = 1.5;

type Criterion = (&'static str, fn() -> Outcome);

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn loss_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_vec(&mut rng, 900);
    let y = random_vec(&mut rng, 900);
    let cyc = cycle_loss(&x, &x, &y, &y).unwrap();
    let resp = RespConfig::default();
    let spectral = SpectralConfig::default();
    let r = tone(0.25, 30.0, 900, 0.0);
    let rr_soft = rr_loss(&r, &r, 30.0, RrLossMode::SoftSpectral, &spectral, &resp)
        .unwrap()
        .value;
    let rr_hard = rr_loss(&r, &r, 30.0, RrLossMode::HardNoGradient, &spectral, &resp)
        .unwrap()
        .value;
    let total = total_objective(1.0, 1.0, 0.5, 0.2, &TranslatorConfig::default())
        .unwrap()
        .total;
    // Zero raw scores put D at exactly 0.5.
    let v = gan_value(&[0.0; 8], &[0.0; 8]);
    let ce_err = (v + 2.0 * 2f64.ln()).abs();
    check(
        cyc == 0.0
            && rr_soft == 0.0
            && rr_hard == 0.0
            && (total - 9.0).abs() < 1e-12
            && ce_err < 1e-6,
        format!("cyc={cyc} rr={rr_soft}/{rr_hard} total={total} |V(0.5)+2ln2|={ce_err:.1e}"),
    )
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-6;
    let (x, y) = (random_vec(&mut rng, 16), random_vec(&mut rng, 16));
    let (xr, yr) = (random_vec(&mut rng, 16), random_vec(&mut rng, 16));
    let (_, gx, gy) = cycle_loss_grad(&x, &xr, &y, &yr).unwrap();
    let mut worst_cyc: f64 = 0.0;
    for i in 0..16 {
        let (mut p, mut m) = (xr.clone(), xr.clone());
        p[i] += h;
        m[i] -= h;
        let fd = (cycle_loss(&x, &p, &y, &yr).unwrap() - cycle_loss(&x, &m, &y, &yr).unwrap())
            / (2.0 * h);
        worst_cyc = worst_cyc.max(rel_err(gx[i], fd));
        let (mut p, mut m) = (yr.clone(), yr.clone());
        p[i] += h;
        m[i] -= h;
        let fd = (cycle_loss(&x, &xr, &y, &p).unwrap() - cycle_loss(&x, &xr, &y, &m).unwrap())
            / (2.0 * h);
        worst_cyc = worst_cyc.max(rel_err(gy[i], fd));
    }

    let fs = 4.0;
    let spectral = SpectralConfig {
        segment_s: 4.0,
        ..SpectralConfig::default()
    };
    let resp = RespConfig::default();
    let mut worst_rr: f64 = 0.0;
    for _ in 0..5 {
        let y = random_vec(&mut rng, 16);
        let yr = random_vec(&mut rng, 16);
        let l = |v: &[f64]| rr_loss(&y, v, fs, RrLossMode::SoftSpectral, &spectral, &resp).unwrap();
        let g = l(&yr).grad.unwrap();
        for i in 0..16 {
            let (mut p, mut m) = (yr.clone(), yr.clone());
            p[i] += h;
            m[i] -= h;
            let fd = (l(&p).value - l(&m).value) / (2.0 * h);
            worst_rr = worst_rr.max(rel_err(g[i], fd));
        }
    }
    check(
        worst_cyc < 1e-4 && worst_rr < 1e-4,
        format!("max rel err cycle={worst_cyc:.2e} soft_rr={worst_rr:.2e}"),
    )
}

fn rr_oracle() -> Outcome {
    let fs = 30.0;
    let cfg = RespConfig::default();
    let sine = |f: f64, phase: f64| -> Vec<f64> {
        (0..(fs * 60.0) as usize)
            .map(|i| (2.0 * PI * f * i as f64 / fs + phase).sin())
            .collect()
    };
    let (mut clean_c, mut clean_s): (f64, f64) = (0.0, 0.0);
    for brpm in 6..=42 {
        let f = brpm as f64 / 60.0;
        for phase in [0.0, 1.0, 2.5] {
            let x = sine(f, phase);
            let c = estimate_rr_count(&x, fs, &cfg).unwrap().rate_brpm;
            let s = estimate_rr_spectral(&x, fs, 20.0, &cfg).unwrap().rate_brpm;
            clean_c = clean_c.max((c - brpm as f64).abs());
            clean_s = clean_s.max((s - brpm as f64).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut noisy_c, mut noisy_s): (f64, f64) = (0.0, 0.0);
    for brpm in (6..=42).step_by(3) {
        let f = brpm as f64 / 60.0;
        for _ in 0..5 {
            let clean = sine(f, 0.3);
            let p = clean.iter().map(|v| v * v).sum::<f64>() / clean.len() as f64;
            let noise = Normal::new(0.0, (p / 10.0).sqrt()).unwrap();
            let x: Vec<f64> = clean.iter().map(|v| v + noise.sample(&mut rng)).collect();
            let c = estimate_rr_count(&x, fs, &cfg).unwrap().rate_brpm;
            let s = estimate_rr_spectral(&x, fs, 20.0, &cfg).unwrap().rate_brpm;
            noisy_c = noisy_c.max((c - brpm as f64).abs());
            noisy_s = noisy_s.max((s - brpm as f64).abs());
        }
    }
    let a = random_vec(&mut rng, 257)
        .iter()
        .map(|v| 40.0 * v)
        .collect::<Vec<_>>();
    let b = random_vec(&mut rng, 257)
        .iter()
        .map(|v| 40.0 * v)
        .collect::<Vec<_>>();
    let mut brute = 0.0;
    for i in 0..a.len() {
        brute += (a[i] - b[i]).abs();
    }
    brute /= a.len() as f64;
    let mae_err = (mae(&a, &b).unwrap() - brute).abs();
    check(
        clean_c <= 1.0 && clean_s <= 1.0 && noisy_c <= 2.0 && noisy_s <= 2.0 && mae_err < 1e-12,
        format!(
            "clean max err count={clean_c:.3} spectral={clean_s:.3}; 10 dB max err count={noisy_c:.3} spectral={noisy_s:.3}; mae diff={mae_err:.1e}"
        ),
    )
}

fn shape_and_determinism() -> Outcome {
    let b = TranslatorBundle::init(&TranslatorConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_vec(&mut rng, 900);
    let mut shape_ok = true;
    for g in [&b.g, &b.f] {
        let y = g.infer(&x);
        shape_ok &= y.len() == 900 && y.iter().all(|v| (0.0..=1.0).contains(v));
    }

    let subjects = synth_subjects(2, 240.0);
    let pairs = train_pairs(&subjects);
    let cfg = TranslatorConfig {
        epochs: 1,
        ..TranslatorConfig::toy()
    };
    let a = train(&pairs, &[], &cfg).unwrap();
    let b2 = train(&pairs, &[], &cfg).unwrap();
    let seq = train(
        &pairs,
        &[],
        &TranslatorConfig {
            exec: ExecMode::Sequential,
            ..cfg.clone()
        },
    )
    .unwrap();
    let same =
        a.log == b2.log && a.log == seq.log && a.bundle.g.net.params == seq.bundle.g.net.params;

    let ids: Vec<String> = (1..=53).map(|i| format!("bidmc{i:02}")).collect();
    let sizes = split_subject_folds(&ids, 5, 0).unwrap().sizes();
    check(
        shape_ok && same && sizes == vec![11, 11, 11, 10, 10],
        format!("G/F 900 -> 900 in [0,1]: {shape_ok}; first epoch bitwise equal (repeat, sequential): {same}; fold sizes {sizes:?}"),
    )
}

fn smoke_training() -> Outcome {
    let subjects = synth_subjects(2, 480.0);
    let pairs = train_pairs(&subjects);
    let cfg = TranslatorConfig {
        epochs: 1000,
        max_iterations: Some(200),
        ..TranslatorConfig::toy()
    };
    let out = train(&pairs, &[], &cfg).unwrap();
    let it = &out.log.iterations;
    let n = it.len();
    let tail = &it[n - 10..];
    let tail_total = tail.iter().map(|b| b.total).sum::<f64>() / 10.0;
    let tail_cyc = tail.iter().map(|b| b.cyc).sum::<f64>() / 10.0;
    let (first_total, first_cyc) = (it[0].total, it[0].cyc);
    let cyc_drop = 1.0 - tail_cyc / first_cyc;

    let resp = RespConfig::default();
    let mut worst: f64 = 0.0;
    for p in &pairs {
        let subject = subjects
            .iter()
            .find(|s| s.bundle.subject_id == p.ppg.subject_id)
            .unwrap();
        let synth = out.bundle.translate(&p.ppg).unwrap();
        let est = estimate_rr_count(&synth.samples, synth.sampling_rate_hz, &resp)
            .unwrap()
            .rate_brpm;
        let len = p.ppg.samples.len() as f64 / p.ppg.sampling_rate_hz;
        let reference = reference_rr(&subject.bundle, p.ppg.start_time_s, len, &resp)
            .unwrap()
            .brpm;
        worst = worst.max((est - reference).abs());
    }
    check(
        n == 200 && tail_total < first_total && cyc_drop >= 0.5 && worst <= 3.0,
        format!(
            "{n} iterations; total {first_total:.3} -> {tail_total:.3} (last-10 mean); cyc {first_cyc:.3} -> {tail_cyc:.3} ({:.0}% drop); max |RR err| over {} training windows {worst:.2} brpm",
            100.0 * cyc_drop,
            pairs.len()
        ),
    )
}

fn identity_evaluation() -> Outcome {
    let subjects = synth_subjects(5, 480.0);
    let refs: Vec<_> = subjects.iter().collect();
    let eval = evaluate_fold(
        &ReferencePassthrough,
        &refs,
        0,
        &RespConfig::default(),
        ExecMode::Parallel,
    );
    match eval.mae() {
        Some(m) => check(
            m < NOISE_FLOOR_BRPM && eval.excluded.is_empty(),
            format!(
                "identity MAE {m:.3} brpm over {} minutes (floor {NOISE_FLOOR_BRPM})",
                eval.records.len()
            ),
        ),
        None => Outcome::Fail("no segments evaluated".into()),
    }
}

fn bidmc_benchmark() -> Outcome {
    let Some(root) = std::env::var_os("PRT_BIDMC_ROOT").map(PathBuf::from) else {
        return Outcome::Skip("PRT_BIDMC_ROOT not set".into());
    };
    let bundles = load_bidmc(&root, &LoadOptions::default()).unwrap();
    let subjects = prepare_all(&bundles, &WindowConfig::default(), ExecMode::Parallel).unwrap();
    let report = run_cross_validation(&subjects, &CvConfig::default()).unwrap();
    match report.mean_mae {
        Some(m) => check(
            m <= 2.6 && !report.partial,
            format!(
                "{} subjects, MAE {m:.2} ± {:.2} brpm, partial={}",
                subjects.len(),
                report.std_mae.unwrap_or(f64::NAN),
                report.partial
            ),
        ),
        None => Outcome::Fail("no fold completed".into()),
    }
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("loss fidelity", loss_fidelity),
        ("gradient checks", gradient_checks),
        ("rr estimator oracle", rr_oracle),
        ("shape and determinism", shape_and_determinism),
        ("smoke training", smoke_training),
        ("identity evaluation", identity_evaluation),
        ("bidmc 5-fold mae", bidmc_benchmark),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {}: {tag} {name} ({secs:.1} s): {detail}", i + 1);
    }
    if failed > 0 {
        eprintln!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
