//! Diagonal memory-kernel matrix functions and their moment integrals.
//!
//! A kernel channel is either a positive exponential sum
//! `gamma(t) = sum_k c_k * beta_k * exp(-beta_k t)` or a uniformly sampled
//! tabulation. Exponential sums keep every moment closed-form and enable
//! the exact state-space lift in the solver; tabulations exist so measured
//! kernels can be ingested.

use crate::matops::RealMatrix;
use crate::{Error, Result};

/// One `c * beta * exp(-beta t)` term of an exponential-sum channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm {
    /// Weight `c` (equals the term's integral over `[0, inf)`).
    pub weight: f64,
    /// Decay rate `beta`.
    pub rate: f64,
}

/// A single diagonal entry of the memory kernel, as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelChannel {
    ExpSum(Vec<ExpTerm>),
    Tabulated {
        /// Uniform grid step in seconds; samples start at t = 0.
        dt: f64,
        values: Vec<f64>,
    },
}

/// Relative decay required of a tabulated channel's last sample before its
/// moments are trusted.
const TAB_TAIL_REL: f64 = 1e-8;

impl KernelChannel {
    pub fn exp_sum(terms: Vec<ExpTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Parameter("exponential channel needs >= 1 term".into()));
        }
        for t in &terms {
            if !(t.weight > 0.0 && t.weight.is_finite()) || !(t.rate > 0.0 && t.rate.is_finite()) {
                return Err(Error::Parameter(format!(
                    "exponential term requires c > 0 and beta > 0, got c={}, beta={}",
                    t.weight, t.rate
                )));
            }
        }
        Ok(KernelChannel::ExpSum(terms))
    }

    /// Single-term convenience constructor.
    pub fn single_exp(weight: f64, rate: f64) -> Result<Self> {
        Self::exp_sum(vec![ExpTerm { weight, rate }])
    }

    pub fn tabulated(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parameter("tabulated channel requires dt > 0".into()));
        }
        if values.len() < 2 {
            return Err(Error::Parameter("tabulated channel needs >= 2 samples".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parameter("tabulated samples must be finite and >= 0".into()));
        }
        Ok(KernelChannel::Tabulated { dt, values })
    }

    /// Evaluate the channel at `t >= 0`. Tabulated channels interpolate
    /// linearly and reject times beyond their grid.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Parameter(format!("kernel evaluated at t = {t} < 0")));
        }
        match self {
            KernelChannel::ExpSum(terms) => Ok(terms
                .iter()
                .map(|e| e.weight * e.rate * (-e.rate * t).exp())
                .sum()),
            KernelChannel::Tabulated { dt, values } => {
                let t_end = dt * (values.len() - 1) as f64;
                if t > t_end {
                    return Err(Error::OutOfRange(t, t_end));
                }
                let pos = t / dt;
                let i = (pos.floor() as usize).min(values.len() - 2);
                let frac = pos - i as f64;
                Ok(values[i] * (1.0 - frac) + values[i + 1] * frac)
            }
        }
    }

    /// As `eval`, but tabulated channels return 0 beyond their grid.
    /// Used only for moment quadrature where the tail is verified decayed.
    fn eval_extended(&self, t: f64) -> f64 {
        match self {
            KernelChannel::ExpSum(_) => self.eval(t).unwrap(),
            KernelChannel::Tabulated { dt, values } => {
                if t > *dt * (values.len() - 1) as f64 {
                    0.0
                } else {
                    self.eval(t).unwrap()
                }
            }
        }
    }

    /// `integral_0^inf gamma(t) dt`.
    pub fn total(&self) -> f64 {
        match self {
            KernelChannel::ExpSum(terms) => terms.iter().map(|e| e.weight).sum(),
            KernelChannel::Tabulated { dt, values } => trapezoid(*dt, values),
        }
    }

    /// `integral_0^inf t * gamma(t) dt`.
    pub fn time_moment(&self) -> f64 {
        match self {
            KernelChannel::ExpSum(terms) => terms.iter().map(|e| e.weight / e.rate).sum(),
            KernelChannel::Tabulated { dt, values } => {
                let weighted: Vec<f64> = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| i as f64 * dt * v)
                    .collect();
                trapezoid(*dt, &weighted)
            }
        }
    }

    fn check_tail(&self) -> Result<()> {
        if let KernelChannel::Tabulated { values, .. } = self {
            let peak = values.iter().cloned().fold(0.0_f64, f64::max);
            let last = *values.last().unwrap();
            let limit = TAB_TAIL_REL * peak;
            if last > limit {
                return Err(Error::TailNotDecayed { last, limit });
            }
        }
        Ok(())
    }

    fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        match (self, other) {
            (KernelChannel::ExpSum(a), KernelChannel::ExpSum(b)) => {
                a.len() == b.len()
                    && a.iter().zip(b).all(|(x, y)| {
                        (x.weight - y.weight).abs() <= tol && (x.rate - y.rate).abs() <= tol
                    })
            }
            (
                KernelChannel::Tabulated { dt: da, values: va },
                KernelChannel::Tabulated { dt: db, values: vb },
            ) => {
                (da - db).abs() <= tol
                    && va.len() == vb.len()
                    && va.iter().zip(vb).all(|(x, y)| (x - y).abs() <= tol)
            }
            _ => false,
        }
    }
}

fn trapezoid(dt: f64, values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    dt * (0.5 * values[0] + interior + 0.5 * values[values.len() - 1])
}

/// Diagonal matrix-valued memory kernel `Gamma(t) = diag(gamma_1, ..., gamma_M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryKernel {
    channels: Vec<KernelChannel>,
}

/// Moment integrals of a kernel restricted to its top-left block.
///
/// `norm_mass` is the integral of the max diagonal entry (the 2-norm of a
/// diagonal positive matrix) and `mean_delay` the first moment of that
/// norm after normalization.
#[derive(Debug, Clone)]
pub struct KernelMoments {
    pub total: RealMatrix,
    pub norm_mass: f64,
    pub mean_delay: f64,
}

impl MemoryKernel {
    pub fn new(channels: Vec<KernelChannel>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Parameter("memory kernel needs >= 1 channel".into()));
        }
        Ok(MemoryKernel { channels })
    }

    /// Single-channel `c * beta * exp(-beta t)` kernel.
    pub fn single_exp(weight: f64, rate: f64) -> Result<Self> {
        Ok(MemoryKernel {
            channels: vec![KernelChannel::single_exp(weight, rate)?],
        })
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[KernelChannel] {
        &self.channels
    }

    /// Append channels (used by dummy-field padding).
    pub fn extended(&self, extra: Vec<KernelChannel>) -> Self {
        let mut channels = self.channels.clone();
        channels.extend(extra);
        MemoryKernel { channels }
    }

    /// Diagonal entries at time `t`.
    pub fn eval_diag(&self, t: f64) -> Result<Vec<f64>> {
        self.channels.iter().map(|c| c.eval(t)).collect()
    }

    /// `Gamma(t)` as a diagonal matrix.
    pub fn eval(&self, t: f64) -> Result<RealMatrix> {
        let d = self.eval_diag(t)?;
        Ok(RealMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)))
    }

    /// True when every channel is an exponential sum.
    pub fn is_exponential(&self) -> bool {
        self.channels
            .iter()
            .all(|c| matches!(c, KernelChannel::ExpSum(_)))
    }

    /// Moment integrals of the top-left `top_n x top_n` block.
    pub fn moments(&self, top_n: usize) -> Result<KernelMoments> {
        if top_n == 0 || top_n > self.channels.len() {
            return Err(Error::Dimension(format!(
                "top_n = {top_n} out of range for {} channels",
                self.channels.len()
            )));
        }
        let top = &self.channels[..top_n];
        for c in top {
            c.check_tail()?;
        }
        let totals: Vec<f64> = top.iter().map(|c| c.total()).collect();
        let total = RealMatrix::from_diagonal(&nalgebra::DVector::from_vec(totals));

        let (norm_mass, norm_tmom) = if top.iter().all(|c| matches!(c, KernelChannel::ExpSum(_))) {
            let sums: Vec<&[ExpTerm]> = top
                .iter()
                .map(|c| match c {
                    KernelChannel::ExpSum(terms) => terms.as_slice(),
                    KernelChannel::Tabulated { .. } => unreachable!(),
                })
                .collect();
            exp_max_moments(&sums)
        } else {
            tabulated_max_moments(top)
        };

        if norm_mass <= 0.0 {
            return Err(Error::Parameter("kernel norm mass must be positive".into()));
        }
        Ok(KernelMoments {
            total,
            norm_mass,
            mean_delay: norm_tmom / norm_mass,
        })
    }

    /// `diag(gamma_j^{-1/2})` of the total integrals, rejected when any
    /// total is below 1e-12 (the coupling construction is undefined there).
    pub fn inverse_sqrt_total(&self) -> Result<RealMatrix> {
        let mut diag = Vec::with_capacity(self.channels.len());
        for c in &self.channels {
            let total = c.total();
            if total < 1e-12 {
                return Err(Error::Parameter(format!(
                    "kernel channel total {total:.3e} too close to zero for inverse square root"
                )));
            }
            diag.push(total.powf(-0.5));
        }
        Ok(RealMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
    }

    /// Kernel-dominance test: equal totals entrywise (1e-10) and a mean
    /// delay no larger than the reference's.
    pub fn dominates(&self, reference: &MemoryKernel, top_n: usize) -> Result<bool> {
        let m = self.moments(top_n)?;
        let m_ref = reference.moments(top_n)?;
        let totals_match = m
            .total
            .diagonal()
            .iter()
            .zip(m_ref.total.diagonal().iter())
            .all(|(a, b)| (a - b).abs() <= 1e-10);
        Ok(totals_match && m.mean_delay <= m_ref.mean_delay)
    }

    /// Tail-decay validation of every tabulated channel.
    pub(crate) fn check_tails(&self) -> Result<()> {
        for c in &self.channels {
            c.check_tail()?;
        }
        Ok(())
    }

    /// Diagonal entries with tabulated channels extended by zero beyond
    /// their grids; for moment quadrature only.
    pub(crate) fn eval_diag_extended(&self, t: f64) -> Vec<f64> {
        self.channels.iter().map(|c| c.eval_extended(t)).collect()
    }

    /// Largest time needed to capture the kernel mass: the tabulation end
    /// for sampled channels, `40 / beta_min` for exponential ones.
    pub(crate) fn max_range(&self) -> f64 {
        let mut t_end = 0.0_f64;
        for c in &self.channels {
            match c {
                KernelChannel::Tabulated { dt, values } => {
                    t_end = t_end.max(*dt * (values.len() - 1) as f64);
                }
                KernelChannel::ExpSum(terms) => {
                    let beta_min = terms.iter().map(|e| e.rate).fold(f64::INFINITY, f64::min);
                    t_end = t_end.max(40.0 / beta_min);
                }
            }
        }
        t_end
    }

    /// Structural comparison with entrywise tolerance on parameters.
    pub fn approx_eq(&self, other: &MemoryKernel, tol: f64) -> bool {
        self.channels.len() == other.channels.len()
            && self
                .channels
                .iter()
                .zip(&other.channels)
                .all(|(a, b)| a.approx_eq(b, tol))
    }
}

/// Closed-form `(integral max_i gamma_i, integral t * max_i gamma_i)` for
/// positive exponential-sum channels.
///
/// The max is piecewise a single channel; crossovers are located by
/// bisection on pairwise differences and each segment integrated in
/// closed form, with an exact tail from the last crossover to infinity.
pub(crate) fn exp_max_moments(channels: &[&[ExpTerm]]) -> (f64, f64) {
    assert!(!channels.is_empty());
    let eval = |i: usize, t: f64| -> f64 {
        channels[i]
            .iter()
            .map(|e| e.weight * e.rate * (-e.rate * t).exp())
            .sum()
    };
    if channels.len() == 1 {
        let (m, tm) = exp_segment_integrals(channels[0], 0.0, f64::INFINITY);
        return (m, tm);
    }

    let beta_min = channels
        .iter()
        .flat_map(|c| c.iter())
        .map(|e| e.rate)
        .fold(f64::INFINITY, f64::min);
    let t_end = 40.0 / beta_min;
    let samples = 4096;
    let step = t_end / samples as f64;

    let argmax = |t: f64| -> usize {
        let mut best = 0;
        let mut best_v = eval(0, t);
        for i in 1..channels.len() {
            let v = eval(i, t);
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        best
    };

    let mut mass = 0.0;
    let mut tmom = 0.0;
    let mut seg_start = 0.0;
    let mut winner = argmax(0.0);
    for k in 1..=samples {
        let t = k as f64 * step;
        let w = argmax(t);
        if w != winner {
            // Refine the crossover between the outgoing and incoming winner.
            let mut lo = t - step;
            let mut hi = t;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if eval(winner, mid) >= eval(w, mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let cross = 0.5 * (lo + hi);
            let (m, tm) = exp_segment_integrals(channels[winner], seg_start, cross);
            mass += m;
            tmom += tm;
            seg_start = cross;
            winner = w;
        }
    }
    let (m, tm) = exp_segment_integrals(channels[winner], seg_start, f64::INFINITY);
    mass += m;
    tmom += tm;
    (mass, tmom)
}

/// `(integral_a^b gamma, integral_a^b t*gamma)` for one exponential sum.
fn exp_segment_integrals(terms: &[ExpTerm], a: f64, b: f64) -> (f64, f64) {
    let mut mass = 0.0;
    let mut tmom = 0.0;
    for e in terms {
        let ea = (-e.rate * a).exp();
        if b.is_infinite() {
            mass += e.weight * ea;
            tmom += e.weight * (a + 1.0 / e.rate) * ea;
        } else {
            let eb = (-e.rate * b).exp();
            mass += e.weight * (ea - eb);
            tmom += e.weight * ((a + 1.0 / e.rate) * ea - (b + 1.0 / e.rate) * eb);
        }
    }
    (mass, tmom)
}

/// Trapezoidal `(integral max, integral t*max)` when tabulated channels are
/// involved. Tabulations contribute 0 beyond their (verified decayed) grid.
fn tabulated_max_moments(channels: &[KernelChannel]) -> (f64, f64) {
    let mut t_end = 0.0_f64;
    let mut step = f64::INFINITY;
    for c in channels {
        match c {
            KernelChannel::Tabulated { dt, values } => {
                t_end = t_end.max(*dt * (values.len() - 1) as f64);
                step = step.min(*dt);
            }
            KernelChannel::ExpSum(terms) => {
                let beta_min = terms.iter().map(|e| e.rate).fold(f64::INFINITY, f64::min);
                t_end = t_end.max(40.0 / beta_min);
            }
        }
    }
    let steps = ((t_end / step).ceil() as usize).clamp(1000, 2_000_000);
    let h = t_end / steps as f64;
    let max_at = |t: f64| -> f64 {
        channels
            .iter()
            .map(|c| c.eval_extended(t))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut mass = 0.0;
    let mut tmom = 0.0;
    let mut prev = max_at(0.0);
    for k in 1..=steps {
        let t = k as f64 * h;
        let cur = max_at(t);
        mass += 0.5 * h * (prev + cur);
        tmom += 0.5 * h * ((t - h) * prev + t * cur);
        prev = cur;
    }
    (mass, tmom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Independent quadrature oracle on [0, 40/beta_min] with a fine step.
    fn quad_moments(channels: &[KernelChannel]) -> (f64, f64) {
        let beta_min = channels
            .iter()
            .flat_map(|c| match c {
                KernelChannel::ExpSum(t) => t.iter().map(|e| e.rate).collect::<Vec<_>>(),
                _ => vec![1.0],
            })
            .fold(f64::INFINITY, f64::min);
        let t_end = 40.0 / beta_min;
        let h = beta_min / 20_000.0;
        let steps = (t_end / h).ceil() as usize;
        let max_at = |t: f64| -> f64 {
            channels
                .iter()
                .map(|c| c.eval(t).unwrap())
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let mut mass = 0.0;
        let mut tmom = 0.0;
        let mut prev = max_at(0.0);
        for k in 1..=steps {
            let t = k as f64 * h;
            let cur = max_at(t);
            mass += 0.5 * h * (prev + cur);
            tmom += 0.5 * h * ((t - h) * prev + t * cur);
            prev = cur;
        }
        (mass, tmom)
    }

    #[test]
    fn eval_example_kernel_at_zero() {
        let k = MemoryKernel::single_exp(1.0, 9.0).unwrap();
        let g = k.eval(0.0).unwrap();
        assert_abs_diff_eq!(g[(0, 0)], 9.0, epsilon = 1e-14);
        assert!(k.eval(10.0).unwrap()[(0, 0)] < 1e-30);
    }

    #[test]
    fn eval_two_term_channel() {
        let c = KernelChannel::exp_sum(vec![
            ExpTerm { weight: 0.5, rate: 1.0 },
            ExpTerm { weight: 0.5, rate: 2.0 },
        ])
        .unwrap();
        assert_abs_diff_eq!(c.eval(0.0).unwrap(), 1.5, epsilon = 1e-14);
    }

    #[test]
    fn eval_rejects_negative_time() {
        let k = MemoryKernel::single_exp(1.0, 9.0).unwrap();
        assert!(k.eval(-0.1).is_err());
    }

    #[test]
    fn tabulated_interpolates_and_rejects_out_of_range() {
        let c = KernelChannel::tabulated(0.5, vec![2.0, 1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(c.eval(0.25).unwrap(), 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(c.eval(1.0).unwrap(), 0.0, epsilon = 1e-14);
        assert!(c.eval(1.1).is_err());
    }

    #[test]
    fn example_moments() {
        let k = MemoryKernel::single_exp(1.0, 9.0).unwrap();
        let m = k.moments(1).unwrap();
        assert_abs_diff_eq!(m.total[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.norm_mass, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mean_delay, 1.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_delay_vanishes_in_dirac_limit() {
        let mut prev = f64::INFINITY;
        for rate in [10.0, 100.0, 1000.0] {
            let k = MemoryKernel::single_exp(1.0, rate).unwrap();
            let d = k.moments(1).unwrap().mean_delay;
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn closed_form_matches_quadrature_single_channel() {
        // (c=2, beta=4): total = 2, norm_mass = 2, mean_delay = 1/4.
        let k = MemoryKernel::single_exp(2.0, 4.0).unwrap();
        let m = k.moments(1).unwrap();
        assert_abs_diff_eq!(m.total[(0, 0)], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.norm_mass, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mean_delay, 0.25, epsilon = 1e-12);
        let (mass, tmom) = quad_moments(k.channels());
        assert!((m.norm_mass - mass).abs() / mass < 1e-6);
        assert!((m.mean_delay - tmom / mass).abs() / (tmom / mass) < 1e-6);
    }

    #[test]
    fn crossover_moments_match_quadrature() {
        // Channel 1 dominates early, channel 2 late: a genuine crossover.
        let k = MemoryKernel::new(vec![
            KernelChannel::single_exp(1.0, 6.0).unwrap(),
            KernelChannel::single_exp(1.5, 1.5).unwrap(),
        ])
        .unwrap();
        let m = k.moments(2).unwrap();
        let (mass, tmom) = quad_moments(k.channels());
        assert!((m.norm_mass - mass).abs() / mass < 1e-6);
        assert!((m.mean_delay - tmom / mass).abs() / (tmom / mass) < 1e-6);
    }

    #[test]
    fn inverse_sqrt_total_values() {
        let k = MemoryKernel::single_exp(1.0, 9.0).unwrap();
        assert_abs_diff_eq!(k.inverse_sqrt_total().unwrap()[(0, 0)], 1.0, epsilon = 1e-14);

        let k = MemoryKernel::single_exp(4.0, 1.0).unwrap();
        assert_abs_diff_eq!(k.inverse_sqrt_total().unwrap()[(0, 0)], 0.5, epsilon = 1e-14);

        let k = MemoryKernel::new(vec![
            KernelChannel::single_exp(1.0, 2.0).unwrap(),
            KernelChannel::single_exp(4.0, 3.0).unwrap(),
        ])
        .unwrap();
        let inv = k.inverse_sqrt_total().unwrap();
        assert_abs_diff_eq!(inv[(0, 0)], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(inv[(1, 1)], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn dominance_examples() {
        let k9 = MemoryKernel::single_exp(1.0, 9.0).unwrap();
        let k18 = MemoryKernel::single_exp(1.0, 18.0).unwrap();
        let k45 = MemoryKernel::single_exp(1.0, 4.5).unwrap();
        assert!(k9.dominates(&k9, 1).unwrap());
        assert!(k18.dominates(&k9, 1).unwrap());
        assert!(!k45.dominates(&k9, 1).unwrap());
    }

    #[test]
    fn tabulated_tail_must_be_decayed() {
        // Flat tabulation: last sample equals the peak.
        let k = MemoryKernel::new(vec![KernelChannel::tabulated(0.1, vec![1.0, 1.0, 1.0]).unwrap()])
            .unwrap();
        assert!(matches!(k.moments(1), Err(Error::TailNotDecayed { .. })));
    }

    #[test]
    fn tabulated_moments_approximate_exponential() {
        let rate = 3.0_f64;
        let dt = 1e-3;
        let steps = (40.0 / rate / dt) as usize;
        let values: Vec<f64> = (0..=steps)
            .map(|i| rate * (-rate * i as f64 * dt).exp())
            .collect();
        let k = MemoryKernel::new(vec![KernelChannel::tabulated(dt, values).unwrap()]).unwrap();
        let m = k.moments(1).unwrap();
        assert!((m.total[(0, 0)] - 1.0).abs() < 1e-4);
        assert!((m.mean_delay - 1.0 / rate).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn scaling_weights_scales_mass_not_delay(c in 0.1f64..10.0, beta in 0.2f64..20.0, s in 0.1f64..10.0) {
            let k = MemoryKernel::single_exp(c, beta).unwrap();
            let ks = MemoryKernel::single_exp(s * c, beta).unwrap();
            let m = k.moments(1).unwrap();
            let ms = ks.moments(1).unwrap();
            prop_assert!((ms.total[(0,0)] - s * m.total[(0,0)]).abs() <= 1e-12 * s.max(1.0) * m.total[(0,0)].max(1.0));
            prop_assert!((ms.norm_mass - s * m.norm_mass).abs() <= 1e-12 * s.max(1.0) * m.norm_mass.max(1.0));
            prop_assert!((ms.mean_delay - m.mean_delay).abs() <= 1e-12);
        }

        #[test]
        fn eval_nonnegative(c in 0.1f64..5.0, beta in 0.1f64..20.0, t in 0.0f64..10.0) {
            let k = MemoryKernel::single_exp(c, beta).unwrap();
            prop_assert!(k.eval_diag(t).unwrap()[0] >= 0.0);
        }
    }
}
