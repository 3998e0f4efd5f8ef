//! Gradient providers: exact, forward two-point, and sampled Moreau-envelope.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{HyperIsingModel, SpinState};
use crate::par::{self, Exec};

pub const DEFAULT_TWO_POINT_DELTA: f64 = 1e-3;

/// Parameters of the Moreau-envelope gradient estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoreauParams {
    /// Envelope smoothing time.
    pub t: f64,
    pub alpha: f64,
    /// Softmax temperature.
    pub delta: f64,
    pub samples: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for MoreauParams {
    fn default() -> Self {
        MoreauParams {
            t: 1.0,
            alpha: 1.0,
            delta: 1.0,
            samples: 1000,
            exec: Exec::default(),
        }
    }
}

impl MoreauParams {
    /// Per-coordinate variance of the sampling distribution, `delta t / alpha`.
    pub fn variance(&self) -> f64 {
        self.delta * self.t / self.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum GradientProvider {
    #[default]
    Exact,
    TwoPoint { delta: f64 },
    Moreau(MoreauParams),
}

impl GradientProvider {
    pub fn two_point() -> Self {
        GradientProvider::TwoPoint {
            delta: DEFAULT_TWO_POINT_DELTA,
        }
    }

    pub fn moreau() -> Self {
        GradientProvider::Moreau(MoreauParams::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            GradientProvider::Exact => "exact",
            GradientProvider::TwoPoint { .. } => "two-point",
            GradientProvider::Moreau(_) => "moreau",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        match self {
            GradientProvider::Exact => Ok(()),
            GradientProvider::TwoPoint { delta } => positive("two-point delta", *delta),
            GradientProvider::Moreau(p) => {
                positive("moreau t", p.t)?;
                positive("moreau alpha", p.alpha)?;
                positive("moreau delta", p.delta)?;
                if p.samples < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "moreau needs at least 2 samples, got {}",
                        p.samples
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Gradient of the relaxed objective of `s` under `gp`.
pub fn gradient<R: Rng + ?Sized>(
    gp: &GradientProvider,
    m: &HyperIsingModel,
    s: &SpinState,
    rng: &mut R,
) -> Result<Vec<f64>> {
    gp.validate()?;
    s.check_domain()?;
    let objective = |b: &[f64]| {
        s.relaxation
            .objective(m, b, s.p)
            .expect("probe has the model dimension")
    };
    let g = match gp {
        GradientProvider::Exact => s.relaxation.gradient(m, &s.a, s.p)?,
        GradientProvider::TwoPoint { delta } => two_point_gradient(objective, &s.a, *delta)?,
        GradientProvider::Moreau(params) => moreau_gradient(objective, &s.a, params, rng)?,
    };
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("computing the {} gradient", gp.name())));
    }
    Ok(g)
}

/// Forward differences `(f(a + delta e_i) - f(a)) / delta`; `n + 1` calls.
pub fn two_point_gradient<F>(f: F, a: &[f64], delta: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let base = f(a);
    if !base.is_finite() {
        return Err(Error::NonFinite("evaluating the two-point base point".into()));
    }
    let mut probe = a.to_vec();
    let mut g = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        probe[i] = a[i] + delta;
        let v = f(&probe);
        probe[i] = a[i];
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("probing coordinate {i}")));
        }
        g.push((v - base) / delta);
    }
    Ok(g)
}

/// Self-normalised Monte Carlo estimate of the Moreau-envelope gradient.
///
/// Draws `b ~ N(a, (delta t / alpha) I)`, weights each sample by
/// `softmax(-f(b) / delta)`, and returns `(a - prox) / t` where `prox` is the
/// weighted sample mean. Samples are drawn sequentially from `rng`; only the
/// objective evaluations run on `params.exec`.
pub fn moreau_gradient<F, R>(f: F, a: &[f64], params: &MoreauParams, rng: &mut R) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    R: Rng + ?Sized,
{
    let n = a.len();
    let count = params.samples;
    let sd = params.variance().sqrt();
    let mut samples = Vec::with_capacity(count * n);
    for _ in 0..count {
        for &ai in a {
            let z: f64 = rng.sample(StandardNormal);
            samples.push(ai + sd * z);
        }
    }
    let values = par::map_range(params.exec, count, |i| f(&samples[i * n..(i + 1) * n]));
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("evaluating Moreau sample {i}")));
    }
    let lowest = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut norm = 0.0;
    let mut prox = vec![0.0; n];
    for (i, v) in values.iter().enumerate() {
        let w = (-(v - lowest) / params.delta).exp();
        norm += w;
        for (p, b) in prox.iter_mut().zip(&samples[i * n..(i + 1) * n]) {
            *p += w * b;
        }
    }
    Ok(a
        .iter()
        .zip(prox)
        .map(|(ai, p)| (ai - p / norm) / params.t)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{Constraint, Literal};
    use crate::hamiltonian::Relaxation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn xor2() -> HyperIsingModel {
        let c = Constraint::xor(vec![Literal::pos(1), Literal::pos(2)]).unwrap();
        HyperIsingModel::from_constraints(2, [(c, 1.0)]).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn exact_example() {
        let s = SpinState::new(vec![0.3, -0.7], Relaxation::TypeI, 1.0);
        let g = gradient(&GradientProvider::Exact, &xor2(), &s, &mut rng()).unwrap();
        assert_eq!(g, vec![-0.7, 0.3]);
    }

    #[test]
    fn two_point_is_exact_on_bilinear() {
        let s = SpinState::new(vec![0.3, -0.7], Relaxation::TypeI, 1.0);
        let g = gradient(&GradientProvider::two_point(), &xor2(), &s, &mut rng()).unwrap();
        // ((0.3 + d)(-0.7) - 0.3(-0.7)) / d = -0.7 up to rounding
        assert!((g[0] + 0.7).abs() < 1e-12);
        assert!((g[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn two_point_error_decays_linearly() {
        let s = SpinState::new(vec![0.4, -0.3], Relaxation::TypeII, 1.0);
        let m = xor2();
        let exact = s.relaxation.gradient(&m, &s.a, s.p).unwrap();
        let err = |delta: f64| {
            let g = gradient(&GradientProvider::TwoPoint { delta }, &m, &s, &mut rng()).unwrap();
            g.iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let mut prev = err(1e-2);
        for k in 1..5 {
            let cur = err(1e-2 / 2f64.powi(k));
            let ratio = prev / cur;
            assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
            prev = cur;
        }
    }

    #[test]
    fn moreau_constant_objective_is_near_zero() {
        let params = MoreauParams {
            samples: 10_000,
            ..Default::default()
        };
        let a = [0.2, -0.5, 0.9];
        let g = moreau_gradient(|_| 3.0, &a, &params, &mut rng()).unwrap();
        let se = (params.variance() / params.samples as f64).sqrt() / params.t;
        for gi in g {
            assert!(gi.abs() < 4.0 * se, "{gi} vs se {se}");
        }
    }

    #[test]
    fn moreau_quadratic_matches_closed_form() {
        // envelope of |b|^2/2 has gradient a/(1+t)
        for t in [0.5, 1.0, 2.0] {
            let params = MoreauParams {
                t,
                alpha: 1.0,
                delta: 1.0,
                samples: 10_000,
                exec: Exec::Sequential,
            };
            let a = [0.8, -1.5];
            let f = |b: &[f64]| b.iter().map(|x| 0.5 * x * x).sum::<f64>();
            let mut r = ChaCha8Rng::seed_from_u64(11);
            let g = moreau_gradient(f, &a, &params, &mut r).unwrap();

            // standard error of the self-normalised mean, from the same draw
            let mut r = ChaCha8Rng::seed_from_u64(11);
            let sd = params.variance().sqrt();
            let mut pts = Vec::new();
            for _ in 0..params.samples {
                let b: Vec<f64> = a.iter().map(|&ai| ai + sd * r.sample::<f64, _>(StandardNormal)).collect();
                pts.push(b);
            }
            let vals: Vec<f64> = pts.iter().map(|b| f(b)).collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let w: Vec<f64> = vals.iter().map(|v| (-(v - lo) / params.delta).exp()).collect();
            let sum: f64 = w.iter().sum();
            for i in 0..2 {
                let mean: f64 = pts.iter().zip(&w).map(|(b, wi)| wi * b[i]).sum::<f64>() / sum;
                let var: f64 = pts
                    .iter()
                    .zip(&w)
                    .map(|(b, wi)| (wi / sum).powi(2) * (b[i] - mean).powi(2))
                    .sum();
                let se = var.sqrt() / t;
                let expect = a[i] / (1.0 + t);
                assert!((g[i] - expect).abs() < 3.0 * se, "t={t} i={i} g={} expect={expect} se={se}", g[i]);
            }
        }
    }

    #[test]
    fn moreau_is_shift_invariant_and_reproducible() {
        let params = MoreauParams {
            samples: 500,
            ..Default::default()
        };
        let a = [0.4, 0.4];
        let m = xor2();
        let f = |b: &[f64]| Relaxation::TypeI.objective(&m, b, 1.0).unwrap();
        let g1 = moreau_gradient(f, &a, &params, &mut rng()).unwrap();
        let g2 = moreau_gradient(f, &a, &params, &mut rng()).unwrap();
        assert_eq!(g1, g2);
        let shifted = moreau_gradient(|b: &[f64]| f(b) + 17.0, &a, &params, &mut rng()).unwrap();
        for (x, y) in g1.iter().zip(&shifted) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn moreau_sequential_and_parallel_agree_bitwise() {
        let m = xor2();
        let f = |b: &[f64]| Relaxation::TypeIII.objective(&m, b, 1.0).unwrap();
        let seq = MoreauParams {
            exec: Exec::Sequential,
            ..Default::default()
        };
        let par = MoreauParams {
            exec: Exec::Parallel,
            ..Default::default()
        };
        let a = [0.1, 2.0];
        assert_eq!(
            moreau_gradient(f, &a, &seq, &mut rng()).unwrap(),
            moreau_gradient(f, &a, &par, &mut rng()).unwrap()
        );
    }

    #[test]
    fn non_finite_objective_is_reported() {
        let params = MoreauParams::default();
        assert!(matches!(
            moreau_gradient(|_| f64::NAN, &[0.0], &params, &mut rng()),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            two_point_gradient(|b: &[f64]| if b[0] > 0.0 { f64::INFINITY } else { 0.0 }, &[0.0], 0.1),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn provider_validation() {
        assert!(GradientProvider::TwoPoint { delta: 0.0 }.validate().is_err());
        let mut p = MoreauParams {
            samples: 1,
            ..Default::default()
        };
        assert!(GradientProvider::Moreau(p).validate().is_err());
        p.samples = 2;
        p.alpha = -1.0;
        assert!(GradientProvider::Moreau(p).validate().is_err());
        assert!(GradientProvider::moreau().validate().is_ok());
    }

    #[test]
    fn every_provider_returns_finite_length_n() {
        let m = xor2();
        for rel in Relaxation::ALL {
            let s = SpinState::new(vec![0.5, -0.25], rel, 1.0);
            for gp in [
                GradientProvider::Exact,
                GradientProvider::two_point(),
                GradientProvider::moreau(),
            ] {
                let g = gradient(&gp, &m, &s, &mut rng()).unwrap();
                assert_eq!(g.len(), 2);
                assert!(g.iter().all(|x| x.is_finite()));
            }
        }
    }
}
