//! Linear delay equations `c'(t) = lambda c(t) + mu theta(t - tau) c(t - tau)`.
//!
//! Integration proceeds segment by segment over `[n tau, (n + 1) tau]` with
//! classical RK4 on a grid aligned with the delay. The delayed term at RK4
//! half steps is read from the previous segment by cubic Hermite
//! interpolation of the stored values and derivatives.

use crate::cascade::FeedbackSystem;
use crate::error::{Error, Result};
use crate::operator::{max_abs, sigma_minus};
use crate::C64;

pub const DEFAULT_STEPS_PER_DELAY: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearDde {
    pub lambda: C64,
    pub mu: C64,
    pub tau: f64,
    pub steps_per_delay: usize,
}

/// Samples `(c, c')` of one segment on its own grid.
struct Segment {
    c: Vec<C64>,
    dc: Vec<C64>,
}

#[inline]
fn hermite(c0: C64, d0: C64, c1: C64, d1: C64, h: f64, x: f64) -> C64 {
    let x2 = x * x;
    let x3 = x2 * x;
    c0 * (2.0 * x3 - 3.0 * x2 + 1.0) + d0 * (h * (x3 - 2.0 * x2 + x)) + c1 * (3.0 * x2 - 2.0 * x3)
        + d1 * (h * (x3 - x2))
}

impl LinearDde {
    pub fn new(lambda: C64, mu: C64, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("delay must be positive, got {tau}")));
        }
        Ok(Self {
            lambda,
            mu,
            tau,
            steps_per_delay: DEFAULT_STEPS_PER_DELAY,
        })
    }

    pub fn with_steps_per_delay(mut self, n: usize) -> Self {
        self.steps_per_delay = n.max(2);
        self
    }

    fn segment(&self, start: C64, prev: Option<&Segment>) -> Segment {
        let n = self.steps_per_delay;
        let h = self.tau / n as f64;
        let (lambda, mu) = (self.lambda, self.mu);
        let delayed = |i: usize, half: bool| -> C64 {
            match prev {
                None => C64::new(0.0, 0.0),
                Some(p) if !half => p.c[i],
                Some(p) => hermite(p.c[i], p.dc[i], p.c[i + 1], p.dc[i + 1], h, 0.5),
            }
        };
        let mut c = Vec::with_capacity(n + 1);
        let mut dc = Vec::with_capacity(n + 1);
        let mut y = start;
        c.push(y);
        dc.push(lambda * y + mu * delayed(0, false));
        for i in 0..n {
            let (g0, gm, g1) = (delayed(i, false), delayed(i, true), delayed(i + 1, false));
            let k1 = lambda * y + mu * g0;
            let k2 = lambda * (y + k1 * (h / 2.0)) + mu * gm;
            let k3 = lambda * (y + k2 * (h / 2.0)) + mu * gm;
            let k4 = lambda * (y + k3 * h) + mu * g1;
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            c.push(y);
            dc.push(lambda * y + mu * g1);
        }
        Segment { c, dc }
    }

    /// `c(t)` at each requested time, starting from `c(0) = c0`.
    pub fn solve(&self, c0: C64, times: &[f64]) -> Result<Vec<C64>> {
        if let Some(&t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter(format!("sample time {t} must be finite and >= 0")));
        }
        let t_max = times.iter().copied().fold(0.0, f64::max);
        let segments_needed = (t_max / self.tau).floor() as usize + 1;
        let mut segments: Vec<Segment> = Vec::with_capacity(segments_needed);
        for s in 0..segments_needed {
            let start = segments.last().map_or(c0, |p| *p.c.last().unwrap());
            let seg = self.segment(start, if s == 0 { None } else { segments.last() });
            segments.push(seg);
        }
        let n = self.steps_per_delay;
        let h = self.tau / n as f64;
        let out = times
            .iter()
            .map(|&t| {
                let s = ((t / self.tau).floor() as usize).min(segments.len() - 1);
                let local = ((t - s as f64 * self.tau) / h).clamp(0.0, n as f64);
                let i = (local.floor() as usize).min(n - 1);
                let x = local - i as f64;
                let seg = &segments[s];
                hermite(seg.c[i], seg.dc[i], seg.c[i + 1], seg.dc[i + 1], h, x)
            })
            .collect::<Vec<_>>();
        if out.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("delay equation"));
        }
        Ok(out)
    }
}

/// Excited population of an undriven atom in the single-excitation sector:
/// `c' = -((kappa1 + kappa2) / 2) c - sqrt(kappa1 kappa2) e^{i phi} c(t - tau)`.
pub fn dde_single_excitation(kappa1: f64, kappa2: f64, phi: f64, tau: f64, times: &[f64]) -> Result<Vec<f64>> {
    if !(kappa1 >= 0.0 && kappa2 >= 0.0) {
        return Err(Error::InvalidParameter("rates must be non-negative".into()));
    }
    let dde = LinearDde::new(
        C64::new(-(kappa1 + kappa2) / 2.0, 0.0),
        -(kappa1 * kappa2).sqrt() * C64::from_polar(1.0, phi),
        tau,
    )?;
    Ok(dde.solve(C64::new(1.0, 0.0), times)?.iter().map(|c| c.norm_sqr()).collect())
}

/// [`dde_single_excitation`] for a feedback system, which must be an undriven
/// two-level atom with `a1 = a2 = sigma_-`, started in the excited state.
pub fn single_excitation_for(sys: &FeedbackSystem, times: &[f64]) -> Result<Vec<f64>> {
    if !sys.is_undriven() {
        return Err(Error::DrivenSystem);
    }
    let sm = sigma_minus();
    if sys.local_dim() != 2
        || max_abs((sys.a1() - &sm).matrix()) > 0.0
        || max_abs((sys.a2() - &sm).matrix()) > 0.0
    {
        return Err(Error::InvalidParameter(
            "the single-excitation equation needs a two-level atom with a1 = a2 = sigma_-".into(),
        ));
    }
    dde_single_excitation(sys.kappa1(), sys.kappa2(), sys.phi(), sys.tau(), times)
}

/// Mean field `<a>(t)` of the linear cavity `H_S = delta a^dagger a` with
/// vacuum input:
/// `<a>' = -i delta <a> - ((kappa1 + kappa2) / 2) <a> - sqrt(kappa1 kappa2) e^{i phi} <a>(t - tau)`.
///
/// The cascade generator feeds the delayed amplitude back with `e^{-i phi}`,
/// so its `<a>` at phase `phi` matches this equation at `-phi`. The two agree
/// directly for `phi` in `{0, pi}`.
pub fn mean_field_cavity_dde(
    delta: f64,
    kappa1: f64,
    kappa2: f64,
    phi: f64,
    tau: f64,
    alpha0: C64,
    times: &[f64],
) -> Result<Vec<C64>> {
    let dde = LinearDde::new(
        C64::new(-(kappa1 + kappa2) / 2.0, -delta),
        -(kappa1 * kappa2).sqrt() * C64::from_polar(1.0, phi),
        tau,
    )?;
    dde.solve(alpha0, times)
}
