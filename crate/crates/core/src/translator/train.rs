//! Alternating adversarial training of the two generators and discriminators.

use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::spectrum::SpectralConfig;
use crate::error::{Error, Result};
use crate::parallel;
use crate::preprocess::{Window, WindowPair};
use crate::respmetrics::{estimate_rr_count, RespConfig};

use super::config::TranslatorConfig;
use super::loss::{
    cycle_loss_grad, discriminator_loss, generator_loss, rr_loss, total_objective, LossBreakdown,
};
use super::networks::{Discriminator, Generator, GeneratorTape};
use super::optim::{scheduled_lr, Adam};
use super::replay::ReplayBuffer;

/// Adam state of the four networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub g: Adam,
    pub f: Adam,
    pub dx: Adam,
    pub dy: Adam,
}

/// Generators `g` (PPG to respiration) and `f` (respiration to PPG) with
/// discriminators `dx` (PPG domain) and `dy` (respiration domain).
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatorBundle {
    pub g: Generator,
    pub f: Generator,
    pub dx: Discriminator,
    pub dy: Discriminator,
    pub epoch: usize,
    pub config: TranslatorConfig,
    pub optimizer_state: OptimizerState,
}

impl TranslatorBundle {
    /// Freshly initialized networks, seeded by `config.seed`.
    pub fn init(config: &TranslatorConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let g = Generator::build(config, &mut rng);
        let f = Generator::build(config, &mut rng);
        let dx = Discriminator::build(config, &mut rng);
        let dy = Discriminator::build(config, &mut rng);
        let adam = |n| Adam::new(n, config.adam_beta1, config.adam_beta2);
        let optimizer_state = OptimizerState {
            g: adam(g.net.n_params()),
            f: adam(f.net.n_params()),
            dx: adam(dx.net.n_params()),
            dy: adam(dy.net.n_params()),
        };
        Ok(Self {
            g,
            f,
            dx,
            dy,
            epoch: 0,
            config: config.clone(),
            optimizer_state,
        })
    }

    pub fn n_params(&self) -> usize {
        self.g.net.n_params()
            + self.f.net.n_params()
            + self.dx.net.n_params()
            + self.dy.net.n_params()
    }

    /// Synthetic respiration for a normalized PPG window.
    pub fn translate_samples(&self, ppg: &[f64]) -> Result<Vec<f64>> {
        if ppg.len() != self.config.window_len {
            return Err(Error::arg(format!(
                "translate: expected {} samples, got {}",
                self.config.window_len,
                ppg.len()
            )));
        }
        Ok(self.g.infer(ppg))
    }

    pub fn translate(&self, ppg: &Window) -> Result<Window> {
        Ok(Window {
            samples: self.translate_samples(&ppg.samples)?,
            ..ppg.clone()
        })
    }

    fn set_exec(&mut self, exec: parallel::ExecMode) {
        self.config.exec = exec;
        for net in [
            &mut self.g.net,
            &mut self.f.net,
            &mut self.dx.net,
            &mut self.dy.net,
        ] {
            net.exec = exec;
        }
    }
}

pub fn translate(ppg: &Window, bundle: &TranslatorBundle) -> Result<Window> {
    bundle.translate(ppg)
}

struct Forward {
    fake_y: Vec<f64>,
    rec_x: Vec<f64>,
    fake_x: Vec<f64>,
    rec_y: Vec<f64>,
    t_gx: GeneratorTape,
    t_f_fake_y: GeneratorTape,
    t_fy: GeneratorTape,
    t_g_fake_x: GeneratorTape,
}

struct GenSample {
    g: Vec<f64>,
    f: Vec<f64>,
    parts: [f64; 4],
}

fn add_scaled(acc: &mut [f64], g: &[f64], s: f64) {
    for (a, v) in acc.iter_mut().zip(g) {
        *a += s * v;
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn disc_step(
    d: &Discriminator,
    real: &[f64],
    fake: &[f64],
    cfg: &TranslatorConfig,
    pgrad: &mut [f64],
) -> f64 {
    let (sr, tr) = d.forward(real);
    let (sf, tf) = d.forward(fake);
    let (l, gr, gf) = discriminator_loss(&sr, &sf, cfg.gan_loss_form);
    d.backward(&tr, &gr, pgrad);
    d.backward(&tf, &gf, pgrad);
    l
}

/// Step-level driver: one call is one discriminator update followed by one
/// joint generator update.
pub struct Trainer {
    pub bundle: TranslatorBundle,
    pool_x: ReplayBuffer,
    pool_y: ReplayBuffer,
    spectral: SpectralConfig,
    resp: RespConfig,
}

impl Trainer {
    pub fn new(bundle: TranslatorBundle) -> Self {
        let cfg = &bundle.config;
        Self {
            pool_x: ReplayBuffer::new(cfg.replay_buffer_size, cfg.seed.wrapping_add(2)),
            pool_y: ReplayBuffer::new(cfg.replay_buffer_size, cfg.seed.wrapping_add(3)),
            spectral: cfg.spectral(),
            resp: RespConfig::default(),
            bundle,
        }
    }

    fn forward_batch(&self, batch: &[&WindowPair]) -> Vec<Forward> {
        let b = &self.bundle;
        parallel::map(b.config.exec, batch, |p| {
            let (fake_y, t_gx) = b.g.forward(&p.ppg.samples);
            let (rec_x, t_f_fake_y) = b.f.forward(&fake_y);
            let (fake_x, t_fy) = b.f.forward(&p.resp.samples);
            let (rec_y, t_g_fake_x) = b.g.forward(&fake_x);
            Forward {
                fake_y,
                rec_x,
                fake_x,
                rec_y,
                t_gx,
                t_f_fake_y,
                t_fy,
                t_g_fake_x,
            }
        })
    }

    /// Batch-mean `[adv_g, adv_f, cyc, rr]` and the gradients of the weighted
    /// generator objective w.r.t. the parameters of G and F.
    fn generator_grads(
        &self,
        batch: &[&WindowPair],
        fwd: &[Forward],
    ) -> Result<([f64; 4], Vec<f64>, Vec<f64>)> {
        let b = &self.bundle;
        let cfg = &b.config;
        let (spectral, resp) = (&self.spectral, &self.resp);
        let n = batch.len();
        let samples = parallel::try_map(
            cfg.exec,
            &(0..n).collect::<Vec<_>>(),
            |&i| -> Result<GenSample> {
                let s = &fwd[i];
                let x = &batch[i].ppg.samples;
                let y = &batch[i].resp.samples;
                let mut g = vec![0.0; b.g.net.n_params()];
                let mut f = vec![0.0; b.f.net.n_params()];

                let (sy, ty) = b.dy.forward(&s.fake_y);
                let (adv_g, dsy) = generator_loss(&sy, cfg.gan_loss_form, cfg.generator_objective);
                let mut scratch = vec![0.0; b.dy.net.n_params()];
                let mut d_fake_y = b.dy.backward(&ty, &dsy, &mut scratch);

                let (sx, tx) = b.dx.forward(&s.fake_x);
                let (adv_f, dsx) = generator_loss(&sx, cfg.gan_loss_form, cfg.generator_objective);
                let mut scratch = vec![0.0; b.dx.net.n_params()];
                let mut d_fake_x = b.dx.backward(&tx, &dsx, &mut scratch);

                let (cyc, g_rec_x, g_rec_y) = cycle_loss_grad(x, &s.rec_x, y, &s.rec_y)?;
                let rr = rr_loss(
                    y,
                    &s.rec_y,
                    cfg.sample_rate_hz,
                    cfg.rr_loss_mode,
                    spectral,
                    resp,
                )?;

                // x -> G -> F
                let d_rec_x: Vec<f64> = g_rec_x.iter().map(|v| cfg.lambda_cyc * v).collect();
                let back = b.f.backward(&s.t_f_fake_y, &d_rec_x, &mut f);
                add_scaled(&mut d_fake_y, &back, 1.0);
                b.g.backward(&s.t_gx, &d_fake_y, &mut g);

                // y -> F -> G
                let mut d_rec_y: Vec<f64> = g_rec_y.iter().map(|v| cfg.lambda_cyc * v).collect();
                if let Some(gr) = &rr.grad {
                    add_scaled(&mut d_rec_y, gr, cfg.lambda_rr);
                }
                let back = b.g.backward(&s.t_g_fake_x, &d_rec_y, &mut g);
                add_scaled(&mut d_fake_x, &back, 1.0);
                b.f.backward(&s.t_fy, &d_fake_x, &mut f);

                Ok(GenSample {
                    g,
                    f,
                    parts: [adv_g, adv_f, cyc, rr.value],
                })
            },
        )?;

        let inv = 1.0 / n as f64;
        let mut gg = vec![0.0; b.g.net.n_params()];
        let mut gf = vec![0.0; b.f.net.n_params()];
        let mut parts = [0.0; 4];
        for s in &samples {
            add_scaled(&mut gg, &s.g, inv);
            add_scaled(&mut gf, &s.f, inv);
            for (p, v) in parts.iter_mut().zip(s.parts) {
                *p += v * inv;
            }
        }
        Ok((parts, gg, gf))
    }

    /// Generator-side objective on `batch` with its gradients w.r.t. the
    /// parameters of G and F, without updating anything.
    pub fn generator_objective(
        &self,
        batch: &[&WindowPair],
    ) -> Result<(LossBreakdown, Vec<f64>, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::arg("generator_objective: empty batch"));
        }
        let fwd = self.forward_batch(batch);
        let (p, gg, gf) = self.generator_grads(batch, &fwd)?;
        Ok((
            total_objective(p[0], p[1], p[2], p[3], &self.bundle.config)?,
            gg,
            gf,
        ))
    }

    /// Run one iteration on `batch` at learning rate `lr` and return the
    /// batch-mean generator-side breakdown.
    pub fn step(&mut self, batch: &[&WindowPair], lr: f64) -> Result<LossBreakdown> {
        if batch.is_empty() {
            return Err(Error::arg("train step: empty batch"));
        }
        let n = batch.len();
        let inv = 1.0 / n as f64;
        let cfg = self.bundle.config.clone();
        let exec = cfg.exec;

        let fwd = self.forward_batch(batch);
        let b = &self.bundle;

        // Discriminators.
        let hist_y: Vec<Vec<f64>> = fwd
            .iter()
            .map(|s| self.pool_y.query(s.fake_y.clone()))
            .collect();
        let hist_x: Vec<Vec<f64>> = fwd
            .iter()
            .map(|s| self.pool_x.query(s.fake_x.clone()))
            .collect();
        let d_grads = parallel::map_range(exec, n, |i| {
            let mut gx = vec![0.0; b.dx.net.n_params()];
            let mut gy = vec![0.0; b.dy.net.n_params()];
            let lx = disc_step(&b.dx, &batch[i].ppg.samples, &hist_x[i], &cfg, &mut gx);
            let ly = disc_step(&b.dy, &batch[i].resp.samples, &hist_y[i], &cfg, &mut gy);
            (gx, gy, lx + ly)
        });
        let mut gx = vec![0.0; b.dx.net.n_params()];
        let mut gy = vec![0.0; b.dy.net.n_params()];
        let mut d_loss = 0.0;
        for (x, y, l) in &d_grads {
            add_scaled(&mut gx, x, inv);
            add_scaled(&mut gy, y, inv);
            d_loss += l * inv;
        }
        if !d_loss.is_finite() || !all_finite(&gx) || !all_finite(&gy) {
            return Err(Error::Divergence {
                epoch: self.bundle.epoch,
                breakdown: LossBreakdown {
                    total: d_loss,
                    ..LossBreakdown::default()
                },
            });
        }
        log::trace!("discriminator loss {d_loss:.6}");
        let saved = (
            self.bundle.dx.net.params.clone(),
            self.bundle.dy.net.params.clone(),
        );
        let st = &mut self.bundle.optimizer_state;
        let saved_opt = (st.dx.clone(), st.dy.clone());
        st.dx.update(&mut self.bundle.dx.net.params, &gx, lr);
        st.dy.update(&mut self.bundle.dy.net.params, &gy, lr);

        // Generators, against the updated discriminators.
        let (parts, gg, gf) = self.generator_grads(batch, &fwd)?;
        let cfg = &self.bundle.config;
        let breakdown = match total_objective(parts[0], parts[1], parts[2], parts[3], cfg) {
            Ok(bd) if all_finite(&gg) && all_finite(&gf) => bd,
            Ok(bd) | Err(Error::Divergence { breakdown: bd, .. }) => {
                self.bundle.dx.net.params = saved.0;
                self.bundle.dy.net.params = saved.1;
                self.bundle.optimizer_state.dx = saved_opt.0;
                self.bundle.optimizer_state.dy = saved_opt.1;
                return Err(Error::Divergence {
                    epoch: self.bundle.epoch,
                    breakdown: bd,
                });
            }
            Err(e) => return Err(e),
        };
        let st = &mut self.bundle.optimizer_state;
        st.g.update(&mut self.bundle.g.net.params, &gg, lr);
        st.f.update(&mut self.bundle.f.net.params, &gf, lr);
        Ok(breakdown)
    }
}

/// Mean absolute difference between the breath-count rate of `G(ppg)` and
/// of the paired respiration window. `None` when no pair yields a rate.
pub fn validation_mae(
    bundle: &TranslatorBundle,
    pairs: &[WindowPair],
    resp: &RespConfig,
) -> Option<f64> {
    let fs = bundle.config.sample_rate_hz;
    let errs: Vec<Option<f64>> = parallel::map(bundle.config.exec, pairs, |p| {
        let synth = bundle.g.infer(&p.ppg.samples);
        let e = estimate_rr_count(&synth, fs, resp).ok()?;
        let r = estimate_rr_count(&p.resp.samples, fs, resp).ok()?;
        Some((e.rate_brpm - r.rate_brpm).abs())
    });
    let ok: Vec<f64> = errs.into_iter().flatten().collect();
    if ok.is_empty() {
        None
    } else {
        Some(ok.iter().sum::<f64>() / ok.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean of the iteration breakdowns of this epoch.
    pub loss: LossBreakdown,
    pub val_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub iterations: Vec<LossBreakdown>,
    pub epochs: Vec<EpochLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StopReason {
    Completed,
    EarlyStopped {
        best_epoch: usize,
    },
    MaxIterations,
    Diverged {
        epoch: usize,
        breakdown: LossBreakdown,
    },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation checkpoint, or the final state when validation is
    /// unavailable; after divergence, the last good state.
    pub bundle: TranslatorBundle,
    pub log: TrainLog,
    pub stop: StopReason,
}

impl TrainOutcome {
    pub fn diverged(&self) -> bool {
        matches!(self.stop, StopReason::Diverged { .. })
    }
}

pub fn train(
    pairs: &[WindowPair],
    val_pairs: &[WindowPair],
    config: &TranslatorConfig,
) -> Result<TrainOutcome> {
    train_observed(pairs, val_pairs, config, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_observed(
    pairs: &[WindowPair],
    val_pairs: &[WindowPair],
    config: &TranslatorConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    if pairs.is_empty() {
        return Err(Error::arg("train: no training pairs"));
    }
    let len = config.window_len;
    if let Some(p) = pairs
        .iter()
        .chain(val_pairs)
        .find(|p| p.ppg.samples.len() != len || p.resp.samples.len() != len)
    {
        return Err(Error::arg(format!(
            "train: window {}#{} does not have {len} samples",
            p.ppg.subject_id, p.ppg.window_index
        )));
    }
    let train_ids: std::collections::BTreeSet<&str> =
        pairs.iter().map(|p| p.ppg.subject_id.as_str()).collect();
    if let Some(p) = val_pairs
        .iter()
        .find(|p| train_ids.contains(p.ppg.subject_id.as_str()))
    {
        return Err(Error::arg(format!(
            "train: validation subject {} also in training set",
            p.ppg.subject_id
        )));
    }
    let early_stopping = !val_pairs.is_empty();
    if !early_stopping {
        log::warn!("train: no validation pairs, early stopping disabled");
    }

    let mut bundle = TranslatorBundle::init(config)?;
    bundle.set_exec(config.exec);
    let mut trainer = Trainer::new(bundle);
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let resp = RespConfig::default();

    let per_epoch = pairs.len().div_ceil(config.batch_size);
    let mut total_iters = config.epochs * per_epoch;
    if let Some(m) = config.max_iterations {
        total_iters = total_iters.min(m);
    }

    let mut log = TrainLog::default();
    let mut best: Option<(f64, TranslatorBundle)> = None;
    let mut stale = 0;
    let mut iter = 0;
    let mut stop = StopReason::Completed;
    let mut order: Vec<usize> = (0..pairs.len()).collect();

    'epochs: for epoch in 1..=config.epochs {
        trainer.bundle.epoch = epoch;
        order.shuffle(&mut order_rng);
        let mut sum = LossBreakdown::default();
        let mut steps = 0;
        for chunk in order.chunks(config.batch_size) {
            if iter >= total_iters {
                stop = StopReason::MaxIterations;
                break;
            }
            let batch: Vec<&WindowPair> = chunk.iter().map(|&i| &pairs[i]).collect();
            let lr = scheduled_lr(
                config.learning_rate,
                config.decay_start_frac,
                iter as f64 / total_iters as f64,
            );
            match trainer.step(&batch, lr) {
                Ok(bd) => {
                    for (s, v) in [
                        (&mut sum.adv_g, bd.adv_g),
                        (&mut sum.adv_f, bd.adv_f),
                        (&mut sum.cyc, bd.cyc),
                        (&mut sum.rr, bd.rr),
                        (&mut sum.total, bd.total),
                    ] {
                        *s += v;
                    }
                    log.iterations.push(bd);
                    steps += 1;
                    iter += 1;
                }
                Err(Error::Divergence { breakdown, .. }) => {
                    log::error!("training diverged at epoch {epoch}, iteration {}", iter + 1);
                    stop = StopReason::Diverged { epoch, breakdown };
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        if steps == 0 {
            break;
        }
        let k = steps as f64;
        let loss = LossBreakdown {
            adv_g: sum.adv_g / k,
            adv_f: sum.adv_f / k,
            cyc: sum.cyc / k,
            rr: sum.rr / k,
            total: sum.total / k,
        };
        let val_mae = if early_stopping {
            validation_mae(&trainer.bundle, val_pairs, &resp)
        } else {
            None
        };
        let entry = EpochLog {
            epoch,
            loss,
            val_mae,
        };
        log::info!(
            "epoch {epoch}: total {:.5} cyc {:.5} rr {:.4} val_mae {}",
            loss.total,
            loss.cyc,
            loss.rr,
            val_mae.map_or("-".to_string(), |v| format!("{v:.3}"))
        );
        on_epoch(&entry);
        log.epochs.push(entry);

        if early_stopping {
            let score = val_mae.unwrap_or(f64::INFINITY);
            if best.as_ref().is_none_or(|(b, _)| score < *b) {
                best = Some((score, trainer.bundle.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.early_stop_patience {
                    stop = StopReason::EarlyStopped {
                        best_epoch: best.as_ref().map_or(epoch, |(_, b)| b.epoch),
                    };
                    break;
                }
            }
        }
        if matches!(stop, StopReason::MaxIterations) {
            break;
        }
    }

    let bundle = match best {
        Some((_, b)) => b,
        None => trainer.bundle,
    };
    Ok(TrainOutcome { bundle, log, stop })
}

pub const LOG_HEADER: &str = "epoch,adv_G,adv_F,cyc,rr,total,val_mae";

/// Append one epoch to a CSV training log, writing the header for a new file.
pub fn append_log_csv(path: &Path, entry: &EpochLog) -> Result<()> {
    let fresh = !path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    if fresh {
        line.push_str(LOG_HEADER);
        line.push('\n');
    }
    let l = &entry.loss;
    line.push_str(&format!(
        "{},{},{},{},{},{},{}\n",
        entry.epoch,
        l.adv_g,
        l.adv_f,
        l.cyc,
        l.rr,
        l.total,
        entry.val_mae.map_or(String::new(), |v| v.to_string())
    ));
    f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))
}
