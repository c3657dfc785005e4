//! Composite translator objective: adversarial, cycle-consistency and
//! respiratory-rate terms, each returning its value and the gradient needed
//! for backpropagation.

use serde::{Deserialize, Serialize};

use crate::dsp::spectrum::{self, SpectralConfig};
use crate::error::{Error, Result};
use crate::respmetrics::{estimate_rr_count, RespConfig};

use super::config::{GanLossForm, GeneratorObjective, RrLossMode, TranslatorConfig};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub adv_g: f64,
    pub adv_f: f64,
    pub cyc: f64,
    pub rr: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.adv_g, self.adv_f, self.cyc, self.rr, self.total]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Weighted recombination of the parts.
    pub fn recombined(&self, lambda_cyc: f64, lambda_rr: f64) -> f64 {
        self.adv_g + self.adv_f + lambda_cyc * self.cyc + lambda_rr * self.rr
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Value of the two-player objective `E[log D(real)] + E[log(1 - D(fake))]`
/// on raw (pre-sigmoid) scores. The discriminator maximizes it.
pub fn gan_value(real_scores: &[f64], fake_scores: &[f64]) -> f64 {
    let log_d = |s: f64| sigmoid(s).clamp(EPS, 1.0 - EPS).ln();
    let log_1md = |s: f64| (1.0 - sigmoid(s).clamp(EPS, 1.0 - EPS)).ln();
    mean(&real_scores.iter().map(|&s| log_d(s)).collect::<Vec<_>>())
        + mean(&fake_scores.iter().map(|&s| log_1md(s)).collect::<Vec<_>>())
}

/// Per-element value and derivative w.r.t. the raw score.
fn elementwise(scores: &[f64], f: impl Fn(f64) -> (f64, f64)) -> (f64, Vec<f64>) {
    let n = scores.len() as f64;
    let mut total = 0.0;
    let grad = scores
        .iter()
        .map(|&s| {
            let (v, d) = f(s);
            total += v;
            d / n
        })
        .collect();
    (total / n, grad)
}

/// `-log(clamp(sigmoid(s)))` and its derivative (zero where clamped).
fn neg_log_d(s: f64) -> (f64, f64) {
    let p = sigmoid(s);
    if p < EPS {
        (-EPS.ln(), 0.0)
    } else if p > 1.0 - EPS {
        (-(1.0 - EPS).ln(), 0.0)
    } else {
        (-p.ln(), -(1.0 - p))
    }
}

/// `-log(1 - clamp(sigmoid(s)))` and its derivative.
fn neg_log_1md(s: f64) -> (f64, f64) {
    let p = sigmoid(s);
    if p < EPS {
        (-(1.0 - EPS).ln(), 0.0)
    } else if p > 1.0 - EPS {
        (-EPS.ln(), 0.0)
    } else {
        (-(1.0 - p).ln(), p)
    }
}

/// Discriminator loss on raw scores, with gradients for real and fake.
///
/// Cross-entropy: `-(E[log D(real)] + E[log(1 - D(fake))])` with `D = sigmoid`.
/// Least squares: `E[(D(real) - 1)^2] + E[D(fake)^2]` on raw scores.
pub fn discriminator_loss(
    real_scores: &[f64],
    fake_scores: &[f64],
    form: GanLossForm,
) -> (f64, Vec<f64>, Vec<f64>) {
    let (lr, gr, lf, gf) = match form {
        GanLossForm::CrossEntropy => {
            let (lr, gr) = elementwise(real_scores, neg_log_d);
            let (lf, gf) = elementwise(fake_scores, neg_log_1md);
            (lr, gr, lf, gf)
        }
        GanLossForm::LeastSquares => {
            let (lr, gr) = elementwise(real_scores, |s| ((s - 1.0).powi(2), 2.0 * (s - 1.0)));
            let (lf, gf) = elementwise(fake_scores, |s| (s * s, 2.0 * s));
            (lr, gr, lf, gf)
        }
    };
    (lr + lf, gr, gf)
}

/// Generator adversarial loss on the discriminator's raw scores for fakes.
///
/// Cross-entropy saturating: `E[log(1 - D(fake))]` (negative, minimized).
/// Cross-entropy non-saturating: `-E[log D(fake)]`.
/// Least squares: `E[(D(fake) - 1)^2]`.
pub fn generator_loss(
    fake_scores: &[f64],
    form: GanLossForm,
    objective: GeneratorObjective,
) -> (f64, Vec<f64>) {
    match (form, objective) {
        (GanLossForm::CrossEntropy, GeneratorObjective::Saturating) => {
            elementwise(fake_scores, |s| {
                let (v, d) = neg_log_1md(s);
                (-v, -d)
            })
        }
        (GanLossForm::CrossEntropy, GeneratorObjective::NonSaturating) => {
            elementwise(fake_scores, neg_log_d)
        }
        (GanLossForm::LeastSquares, _) => {
            elementwise(fake_scores, |s| ((s - 1.0).powi(2), 2.0 * (s - 1.0)))
        }
    }
}

/// Both sides of the adversarial loss for one set of scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialLoss {
    pub discriminator: f64,
    pub generator: f64,
}

pub fn adversarial_loss(
    real_scores: &[f64],
    fake_scores: &[f64],
    form: GanLossForm,
    objective: GeneratorObjective,
) -> Result<AdversarialLoss> {
    if real_scores.is_empty() || fake_scores.is_empty() {
        return Err(Error::arg("adversarial_loss: empty scores"));
    }
    if real_scores
        .iter()
        .chain(fake_scores)
        .any(|v| !v.is_finite())
    {
        return Err(Error::arg("adversarial_loss: non-finite score"));
    }
    Ok(AdversarialLoss {
        discriminator: discriminator_loss(real_scores, fake_scores, form).0,
        generator: generator_loss(fake_scores, form, objective).0,
    })
}

fn check_len(a: &[f64], b: &[f64], what: &str) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::arg(format!(
            "{what}: length mismatch ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn mean_l1_grad(rec: &[f64], orig: &[f64]) -> (f64, Vec<f64>) {
    let n = rec.len() as f64;
    let mut total = 0.0;
    let grad = rec
        .iter()
        .zip(orig)
        .map(|(r, o)| {
            let d = r - o;
            total += d.abs();
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    (total / n, grad)
}

/// `mean|x_rec - x| + mean|y_rec - y|` with gradients w.r.t. `x_rec`, `y_rec`.
pub fn cycle_loss_grad(
    x: &[f64],
    x_rec: &[f64],
    y: &[f64],
    y_rec: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_len(x, x_rec, "cycle_loss")?;
    check_len(y, y_rec, "cycle_loss")?;
    let (lx, gx) = mean_l1_grad(x_rec, x);
    let (ly, gy) = mean_l1_grad(y_rec, y);
    Ok((lx + ly, gx, gy))
}

pub fn cycle_loss(x: &[f64], x_rec: &[f64], y: &[f64], y_rec: &[f64]) -> Result<f64> {
    cycle_loss_grad(x, x_rec, y, y_rec).map(|r| r.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrLoss {
    /// `|RR(y_rec) - RR(y)|` in breaths/min.
    pub value: f64,
    /// Gradient w.r.t. `y_rec`; `None` in hard mode.
    pub grad: Option<Vec<f64>>,
    /// Either signal had no band energy (or no breaths); value forced to 0.
    pub degenerate: bool,
}

/// Respiratory-rate loss between a respiration window and its cycle
/// reconstruction.
pub fn rr_loss(
    y: &[f64],
    y_rec: &[f64],
    fs: f64,
    mode: RrLossMode,
    spectral: &SpectralConfig,
    resp: &RespConfig,
) -> Result<RrLoss> {
    check_len(y, y_rec, "rr_loss")?;
    match mode {
        RrLossMode::SoftSpectral => {
            let target = spectrum::soft_rate(y, fs, spectral);
            let (rec, g) = spectrum::soft_rate_with_grad(y_rec, fs, spectral);
            if target.degenerate || rec.degenerate {
                log::debug!("rr_loss: empty band energy, contribution set to 0");
                return Ok(RrLoss {
                    value: 0.0,
                    grad: Some(vec![0.0; y.len()]),
                    degenerate: true,
                });
            }
            let d = rec.rate_brpm - target.rate_brpm;
            let sign = if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            };
            Ok(RrLoss {
                value: d.abs(),
                grad: Some(g.into_iter().map(|v| sign * v).collect()),
                degenerate: false,
            })
        }
        RrLossMode::HardNoGradient => {
            let a = estimate_rr_count(y, fs, resp)?;
            let b = estimate_rr_count(y_rec, fs, resp)?;
            let degenerate = a.breath_count == 0 || b.breath_count == 0;
            Ok(RrLoss {
                value: if degenerate {
                    0.0
                } else {
                    (a.rate_brpm - b.rate_brpm).abs()
                },
                grad: None,
                degenerate,
            })
        }
    }
}

/// Weighted composite `adv_g + adv_f + lambda_cyc*cyc + lambda_rr*rr`.
pub fn total_objective(
    adv_g: f64,
    adv_f: f64,
    cyc: f64,
    rr: f64,
    cfg: &TranslatorConfig,
) -> Result<LossBreakdown> {
    let mut b = LossBreakdown {
        adv_g,
        adv_f,
        cyc,
        rr,
        total: 0.0,
    };
    b.total = b.recombined(cfg.lambda_cyc, cfg.lambda_rr);
    if !b.is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            breakdown: b,
        });
    }
    Ok(b)
}
