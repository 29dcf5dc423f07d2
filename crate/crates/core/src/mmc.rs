//! Steady-state M/M/c formulas (Erlang C).
//!
//! With offered load `a = λ/μ` and utilisation `ρ = a/c`:
//!
//! ```text
//!             a^c / (c! (1 - ρ))
//! C(c, a) = ------------------------------------
//!           Σ_{k<c} a^k / k!  +  a^c / (c! (1 - ρ))
//!
//! Lq = C(c, a) · ρ / (1 - ρ)
//! ```
//!
//! All terms are handled in log space so large pools do not overflow.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmcParams {
    /// Arrivals per second.
    pub lambda: f64,
    /// Service rate of one worker, per second.
    pub mu: f64,
    pub c: u32,
}

impl MmcParams {
    pub fn new(lambda: f64, mu: f64, c: u32) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) || !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda and mu must be positive and finite, got lambda={lambda} mu={mu}"
            )));
        }
        if c == 0 {
            return Err(Error::invalid("c must be >= 1"));
        }
        Ok(Self { lambda, mu, c })
    }

    pub fn offered_load(&self) -> f64 {
        self.lambda / self.mu
    }

    pub fn utilisation(&self) -> f64 {
        self.offered_load() / f64::from(self.c)
    }

    fn check_stable(&self) -> Result<f64> {
        let rho = self.utilisation();
        if rho >= 1.0 {
            Err(Error::Unstable { rho })
        } else {
            Ok(rho)
        }
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Probability that an arrival has to wait.
pub fn erlang_c(p: &MmcParams) -> Result<f64> {
    let rho = p.check_stable()?;
    let ln_a = p.offered_load().ln();
    let mut terms = Vec::with_capacity(p.c as usize + 1);
    let mut ln_fact = 0.0;
    for k in 0..p.c {
        if k > 0 {
            ln_fact += f64::from(k).ln();
        }
        terms.push(f64::from(k) * ln_a - ln_fact);
    }
    ln_fact += f64::from(p.c).ln();
    let ln_tail = f64::from(p.c) * ln_a - ln_fact - (1.0 - rho).ln();
    terms.push(ln_tail);
    Ok((ln_tail - log_sum_exp(&terms)).exp().clamp(0.0, 1.0))
}

/// Mean number waiting (not in service), `Lq`.
pub fn mean_queue_length(p: &MmcParams) -> Result<f64> {
    let rho = p.check_stable()?;
    Ok(erlang_c(p)? * rho / (1.0 - rho))
}

/// Mean time spent waiting, `Wq = Lq / λ`.
pub fn mean_wait(p: &MmcParams) -> Result<f64> {
    Ok(mean_queue_length(p)? / p.lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Stationary distribution of the birth-death chain truncated at `n_max`,
    /// returned as (P(wait), Lq). Independent of the closed form.
    fn birth_death(lambda: f64, mu: f64, c: u32, n_max: usize) -> (f64, f64) {
        let mut weights = vec![1.0f64];
        for n in 1..=n_max {
            let servers = (n as u32).min(c) as f64;
            let prev = weights[n - 1];
            weights.push(prev * lambda / (servers * mu));
        }
        let total: f64 = weights.iter().sum();
        let c = c as usize;
        let p_wait = weights[c..].iter().sum::<f64>() / total;
        let lq = weights
            .iter()
            .enumerate()
            .skip(c)
            .map(|(n, w)| (n - c) as f64 * w)
            .sum::<f64>()
            / total;
        (p_wait, lq)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn mm1_reduces_to_rho() {
        for rho in [0.1, 0.5, 0.9, 0.99] {
            let p = MmcParams::new(rho, 1.0, 1).unwrap();
            assert!((erlang_c(&p).unwrap() - rho).abs() < 1e-12);
        }
        let p = MmcParams::new(0.5, 1.0, 1).unwrap();
        assert!((mean_queue_length(&p).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mm6_matches_birth_death() {
        // ρ = 5/6; tail mass beyond 400 is ~ (5/6)^400 ≈ 1e-32.
        let p = MmcParams::new(1.0, 0.2, 6).unwrap();
        let (pw, lq) = birth_death(1.0, 0.2, 6, 400);
        assert!(rel(erlang_c(&p).unwrap(), pw) < 1e-9);
        assert!(rel(mean_queue_length(&p).unwrap(), lq) < 1e-9);
        // Frozen from an exact rational evaluation of the same chain.
        assert!((mean_queue_length(&p).unwrap() - 2.937_582_252_3).abs() < 1e-9);
    }

    #[test]
    fn closed_form_matches_oracle_across_grid() {
        for c in [1u32, 2, 3, 5, 8, 20, 60] {
            for rho in [0.05, 0.3, 0.7, 0.9, 0.97] {
                let mu = 0.5;
                let lambda = rho * f64::from(c) * mu;
                let p = MmcParams::new(lambda, mu, c).unwrap();
                let n_max = c as usize + ((-12.0 * 10f64.ln() - 10.0) / rho.ln()) as usize + 50;
                let (pw, lq) = birth_death(lambda, mu, c, n_max);
                assert!(rel(erlang_c(&p).unwrap(), pw) < 1e-6, "c={c} rho={rho}");
                if lq > 0.0 {
                    assert!(rel(mean_queue_length(&p).unwrap(), lq) < 1e-6, "c={c} rho={rho}");
                }
            }
        }
    }

    #[test]
    fn saturation_and_light_load() {
        let near = MmcParams::new(5.999_999, 1.0, 6).unwrap();
        assert!(erlang_c(&near).unwrap() > 0.9999);
        let light = MmcParams::new(1e-9, 1.0, 4).unwrap();
        assert!(mean_queue_length(&light).unwrap() < 1e-12);
    }

    #[test]
    fn large_pool_does_not_overflow() {
        let p = MmcParams::new(450.0, 1.0, 500).unwrap();
        let c = erlang_c(&p).unwrap();
        assert!(c.is_finite() && (0.0..=1.0).contains(&c));
    }

    #[test]
    fn lq_decreases_with_servers() {
        let mut prev = f64::INFINITY;
        for c in 6..40 {
            let lq = mean_queue_length(&MmcParams::new(1.0, 0.2, c).unwrap()).unwrap();
            assert!(lq < prev);
            prev = lq;
        }
    }

    #[test]
    fn unstable_is_an_error() {
        let p = MmcParams::new(1.0, 0.2, 4).unwrap();
        assert!(matches!(erlang_c(&p), Err(Error::Unstable { .. })));
        assert!(matches!(mean_queue_length(&p), Err(Error::Unstable { .. })));
        assert!(MmcParams::new(1.0, 0.2, 5).and_then(|p| erlang_c(&p)).is_err());
        assert!(MmcParams::new(0.0, 1.0, 1).is_err());
        assert!(MmcParams::new(1.0, 1.0, 0).is_err());
    }
}
