mod common;

use common::{rel_err, synth_subjects, tone, train_pairs, window};
use prt_core::dsp::spectrum::SpectralConfig;
use prt_core::parallel::ExecMode;
use prt_core::preprocess::WindowPair;
use prt_core::respmetrics::RespConfig;
use prt_core::translator::loss::{cycle_loss, cycle_loss_grad, rr_loss};
use prt_core::translator::networks::{discriminator_depth, discriminator_geometry};
use prt_core::translator::nn::{receptive_field, Act, Layer, Network};
use prt_core::translator::{
    checkpoint, train, GanLossForm, RrLossMode, StopReason, Trainer, TranslatorBundle,
    TranslatorConfig,
};
use prt_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

#[test]
fn cycle_loss_matches_hand_sum_and_gradient() {
    let x = [0.1, 0.7, 0.3, 0.9, 0.5];
    let xr = [0.2, 0.6, 0.35, 0.5, 0.5];
    let y = [0.0, 1.0, 0.25, 0.75, 0.4];
    let yr = [0.1, 0.8, 0.25, 0.95, 0.3];
    let hand = (0.1 + 0.1 + 0.05 + 0.4 + 0.0) / 5.0 + (0.1 + 0.2 + 0.0 + 0.2 + 0.1) / 5.0;
    assert!((cycle_loss(&x, &xr, &y, &yr).unwrap() - hand).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (x, y) = (random_vec(&mut rng, 16), random_vec(&mut rng, 16));
    let (xr, yr) = (random_vec(&mut rng, 16), random_vec(&mut rng, 16));
    let (_, gx, gy) = cycle_loss_grad(&x, &xr, &y, &yr).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..16 {
        let (mut p, mut m) = (xr.clone(), xr.clone());
        p[i] += h;
        m[i] -= h;
        let fd = (cycle_loss(&x, &p, &y, &yr).unwrap() - cycle_loss(&x, &m, &y, &yr).unwrap())
            / (2.0 * h);
        worst = worst.max(rel_err(gx[i], fd));
        let (mut p, mut m) = (yr.clone(), yr.clone());
        p[i] += h;
        m[i] -= h;
        let fd = (cycle_loss(&x, &xr, &y, &p).unwrap() - cycle_loss(&x, &xr, &y, &m).unwrap())
            / (2.0 * h);
        worst = worst.max(rel_err(gy[i], fd));
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn soft_rr_loss_gradient_matches_finite_differences() {
    let fs = 4.0;
    let spectral = SpectralConfig {
        segment_s: 4.0,
        ..SpectralConfig::default()
    };
    let resp = RespConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let y = random_vec(&mut rng, 16);
        let yr = random_vec(&mut rng, 16);
        let l = |v: &[f64]| rr_loss(&y, v, fs, RrLossMode::SoftSpectral, &spectral, &resp).unwrap();
        let base = l(&yr);
        assert!(!base.degenerate);
        let g = base.grad.unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..16 {
            let (mut p, mut m) = (yr.clone(), yr.clone());
            p[i] += h;
            m[i] -= h;
            let fd = (l(&p).value - l(&m).value) / (2.0 * h);
            worst = worst.max(rel_err(g[i], fd));
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }
}

#[test]
fn rr_loss_oracles() {
    let fs = 30.0;
    let spectral = SpectralConfig {
        beta: 200.0,
        ..SpectralConfig::default()
    };
    let resp = RespConfig::default();
    let y = tone(0.25, fs, 900, 0.0);
    let y2 = tone(0.30, fs, 900, 0.3);
    for mode in [RrLossMode::SoftSpectral, RrLossMode::HardNoGradient] {
        assert_eq!(
            rr_loss(&y, &y, fs, mode, &spectral, &resp).unwrap().value,
            0.0
        );
    }
    let l = rr_loss(&y, &y2, fs, RrLossMode::SoftSpectral, &spectral, &resp).unwrap();
    assert!((l.value - 3.0).abs() < 0.3, "soft rr loss {}", l.value);
    let hard = rr_loss(&y, &y2, fs, RrLossMode::HardNoGradient, &spectral, &resp).unwrap();
    assert!(hard.grad.is_none());
    assert!(
        (hard.value - 3.0).abs() <= 2.0 + 1e-9,
        "hard rr loss {}",
        hard.value
    );
    let flat = vec![0.5; 900];
    let d = rr_loss(&flat, &y, fs, RrLossMode::SoftSpectral, &spectral, &resp).unwrap();
    assert!(d.degenerate && d.value == 0.0);
    assert!(rr_loss(
        &y,
        &y[..899],
        fs,
        RrLossMode::SoftSpectral,
        &spectral,
        &resp
    )
    .is_err());
}

fn generator_params(c: usize, r: usize) -> usize {
    // c7 + two downsampling convs + r residual blocks (two c3 convs each)
    // + two transposed convs + c7 output, all with biases.
    let conv = |cin: usize, cout: usize, k: usize| cin * cout * k + cout;
    conv(1, c, 7)
        + conv(c, 2 * c, 3)
        + conv(2 * c, 4 * c, 3)
        + r * 2 * conv(4 * c, 4 * c, 3)
        + conv(4 * c, 2 * c, 3)
        + conv(2 * c, c, 3)
        + conv(c, 1, 7)
}

#[test]
fn parameter_counts_are_pinned() {
    let cfg = TranslatorConfig::default();
    let b = TranslatorBundle::init(&cfg).unwrap();
    assert_eq!(b.g.net.n_params(), generator_params(64, 6));
    assert_eq!(b.g.net.n_params(), 2_609_665);
    assert_eq!(b.f.net.n_params(), 2_609_665);
    // Three stride-2 and one stride-1 width-4 convs, then the score conv.
    let conv = |cin: usize, cout: usize| cin * cout * 4 + cout;
    let c = 64;
    let disc =
        conv(1, c) + conv(c, 2 * c) + conv(2 * c, 4 * c) + conv(4 * c, 8 * c) + conv(8 * c, 1);
    assert_eq!(b.dx.net.n_params(), disc);
    assert_eq!(b.dx.net.n_params(), 691_393);
    assert_eq!(
        TranslatorBundle::init(&cfg).unwrap().n_params(),
        b.n_params()
    );
}

/// Support of `d score[j] / d input` through the conv stack alone (instance
/// norm couples every position, so it is left out).
fn empirical_receptive_field(net: &Network) -> usize {
    let convs: Vec<Layer> = net
        .layers
        .iter()
        .filter(|l| matches!(l, Layer::Conv(_)))
        .cloned()
        .collect();
    let mut params = net.params.clone();
    for p in params.iter_mut() {
        *p = p.abs() + 0.1;
    }
    let stack = Network {
        layers: convs,
        params,
        exec: ExecMode::Sequential,
    };
    let x = Act::from_signal(&vec![1.0; 900]);
    let (y, tape) = stack.forward(&x);
    let mut g = Act::zeros(1, y.len);
    g.data[y.len / 2] = 1.0;
    let mut pg = vec![0.0; stack.params.len()];
    let dx = stack.backward(&tape, g, &mut pg);
    let nz: Vec<usize> = (0..dx.len).filter(|&i| dx.data[i] != 0.0).collect();
    nz.last().unwrap() - nz.first().unwrap() + 1
}

#[test]
fn discriminator_receptive_field() {
    let cfg = TranslatorConfig {
        disc_base_channels: 2,
        ..TranslatorConfig::default()
    };
    let b = TranslatorBundle::init(&cfg).unwrap();
    assert_eq!(discriminator_depth(70), 3);
    assert_eq!(receptive_field(&discriminator_geometry(3)), 70);
    assert_eq!(b.dy.receptive_field, 70);
    assert_eq!(empirical_receptive_field(&b.dy.net), 70);

    let scores = b.dy.infer(&vec![0.5; 900]);
    assert!(scores.len() > 1);
    assert!(scores.iter().all(|v| v.is_finite()));
}

#[test]
fn generators_preserve_shape_and_range() {
    let cfg = TranslatorConfig::default();
    let b = TranslatorBundle::init(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for len in [900, 901, 902, 903] {
        let x = random_vec(&mut rng, len);
        for g in [&b.g, &b.f] {
            let y = g.infer(&x);
            assert_eq!(y.len(), len);
            assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
    let x = random_vec(&mut rng, 900);
    assert_eq!(b.g.infer(&x), b.g.infer(&x));
    let w = window("s", 0, 30.0, x.clone());
    let out = b.translate(&w).unwrap();
    assert_eq!(out.samples.len(), 900);
    assert_eq!(out.subject_id, "s");
    assert!(matches!(
        b.translate(&window("s", 0, 30.0, x[..899].to_vec())),
        Err(Error::Argument(_))
    ));
}

fn tiny_config() -> TranslatorConfig {
    TranslatorConfig {
        gen_base_channels: 2,
        disc_base_channels: 2,
        residual_blocks: 1,
        init_std: 0.3,
        window_len: 32,
        sample_rate_hz: 8.0,
        lambda_rr: 1.0,
        exec: ExecMode::Sequential,
        ..TranslatorConfig::default()
    }
}

fn tiny_batch(seed: u64) -> Vec<WindowPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..2)
        .map(|i| WindowPair {
            ppg: window("t", i, 8.0, random_vec(&mut rng, 32)),
            resp: window("t", i, 8.0, random_vec(&mut rng, 32)),
        })
        .collect()
}

#[test]
fn generator_objective_gradient_matches_finite_differences() {
    for form in [GanLossForm::LeastSquares, GanLossForm::CrossEntropy] {
        let cfg = TranslatorConfig {
            gan_loss_form: form,
            ..tiny_config()
        };
        let pairs = tiny_batch(21);
        let batch: Vec<&WindowPair> = pairs.iter().collect();
        let mut trainer = Trainer::new(TranslatorBundle::init(&cfg).unwrap());
        let (_, gg, gf) = trainer.generator_objective(&batch).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for which in 0..2 {
            let n = if which == 0 { gg.len() } else { gf.len() };
            for _ in 0..12 {
                let i = rng.random_range(0..n);
                fn params(t: &mut Trainer, which: usize) -> &mut Vec<f64> {
                    if which == 0 {
                        &mut t.bundle.g.net.params
                    } else {
                        &mut t.bundle.f.net.params
                    }
                }
                let orig = params(&mut trainer, which)[i];
                params(&mut trainer, which)[i] = orig + h;
                let lp = trainer.generator_objective(&batch).unwrap().0.total;
                params(&mut trainer, which)[i] = orig - h;
                let lm = trainer.generator_objective(&batch).unwrap().0.total;
                params(&mut trainer, which)[i] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let a = if which == 0 { gg[i] } else { gf[i] };
                if a.abs().max(fd.abs()) > 1e-7 {
                    worst = worst.max(rel_err(a, fd));
                }
            }
        }
        assert!(worst < 1e-4, "{form:?}: worst relative error {worst}");
    }
}

fn smoke_config() -> TranslatorConfig {
    TranslatorConfig {
        epochs: 1,
        ..TranslatorConfig::toy()
    }
}

#[test]
fn first_epoch_is_reproducible_across_runs_and_exec_modes() {
    let subjects = synth_subjects(2, 240.0);
    let pairs = train_pairs(&subjects);
    let a = train(&pairs, &[], &smoke_config()).unwrap();
    let b = train(&pairs, &[], &smoke_config()).unwrap();
    let seq = train(
        &pairs,
        &[],
        &TranslatorConfig {
            exec: ExecMode::Sequential,
            ..smoke_config()
        },
    )
    .unwrap();
    let first = |o: &prt_core::translator::TrainOutcome| o.log.epochs[0].loss;
    assert_eq!(first(&a), first(&b));
    assert_eq!(first(&a), first(&seq));
    assert_eq!(a.bundle.g.net.params, seq.bundle.g.net.params);
    let bd = first(&a);
    let recombined = bd.adv_g + bd.adv_f + 10.0 * bd.cyc + 0.1 * bd.rr;
    assert!((bd.total - recombined).abs() <= 1e-6 * recombined.abs());
    assert_eq!(a.stop, StopReason::Completed);
    assert_eq!(a.bundle.epoch, 1);
}

#[test]
fn train_boundaries_and_errors() {
    let subjects = synth_subjects(3, 120.0);
    let tr = train_pairs(&subjects[..2]);
    let val: Vec<WindowPair> = subjects[2].eval_pairs.clone();
    let cfg = TranslatorConfig {
        early_stop_patience: 0,
        ..smoke_config()
    };
    let out = train(&tr, &val, &cfg).unwrap();
    assert_eq!(out.bundle.epoch, 1);
    assert_eq!(out.log.epochs.len(), 1);
    assert!(out.log.epochs[0].val_mae.is_some());

    assert!(matches!(train(&[], &[], &cfg), Err(Error::Argument(_))));
    assert!(matches!(
        train(&tr, &tr[..1], &cfg),
        Err(Error::Argument(_))
    ));
    let mut short = tr.clone();
    short[0].ppg.samples.pop();
    assert!(matches!(train(&short, &[], &cfg), Err(Error::Argument(_))));
    let bad = TranslatorConfig {
        lambda_cyc: 0.0,
        ..cfg.clone()
    };
    assert!(matches!(train(&tr, &[], &bad), Err(Error::Argument(_))));
}

#[test]
fn early_stopping_keeps_best_checkpoint() {
    let subjects = synth_subjects(3, 120.0);
    let tr = train_pairs(&subjects[..2]);
    let val = subjects[2].eval_pairs.clone();
    let cfg = TranslatorConfig {
        epochs: 6,
        early_stop_patience: 1,
        ..TranslatorConfig::toy()
    };
    let out = train(&tr, &val, &cfg).unwrap();
    let maes: Vec<f64> = out
        .log
        .epochs
        .iter()
        .map(|e| e.val_mae.unwrap_or(f64::INFINITY))
        .collect();
    let best = maes.iter().cloned().fold(f64::INFINITY, f64::min);
    let best_epoch = out
        .log
        .epochs
        .iter()
        .find(|e| e.val_mae.unwrap_or(f64::INFINITY) == best)
        .unwrap()
        .epoch;
    assert_eq!(out.bundle.epoch, best_epoch);
    if let StopReason::EarlyStopped { best_epoch: b } = out.stop {
        assert_eq!(b, best_epoch);
        assert!(out.log.epochs.len() < 6);
    }
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TranslatorConfig {
        seed: 42,
        ..tiny_config()
    };
    let pairs = tiny_batch(1);
    let batch: Vec<&WindowPair> = pairs.iter().collect();
    let mut t = Trainer::new(TranslatorBundle::init(&cfg).unwrap());
    t.step(&batch, 1e-3).unwrap();
    t.bundle.epoch = 3;
    let path = dir.path().join("m.ckpt");
    checkpoint::save(&path, &t.bundle).unwrap();
    let mut loaded = checkpoint::load(&path).unwrap();
    loaded.config.exec = ExecMode::Sequential;
    for net in [
        &mut loaded.g.net,
        &mut loaded.f.net,
        &mut loaded.dx.net,
        &mut loaded.dy.net,
    ] {
        net.exec = ExecMode::Sequential;
    }
    assert_eq!(loaded, t.bundle);
    assert_eq!(loaded.optimizer_state.g.step, 1);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'X';
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(checkpoint::load(&path), Err(Error::Format { .. })));
    bytes[0] = b'P';
    bytes.truncate(bytes.len() - 8);
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(checkpoint::load(&path), Err(Error::Format { .. })));
    assert!(matches!(
        checkpoint::load(&dir.path().join("missing")),
        Err(Error::Io { .. })
    ));
}
