//! Weight sequences of the compound series.
//!
//! Every series is a probability law on `n = 1, 2, ...`. Weights come from
//! stable recursions rather than factorials or binomials, and the residual
//! `sum_{k > n} w_k` is summed forward so it stays accurate far below `1e-16`.

use std::fmt;

use crate::error::{invalid, Result};
use crate::registry::Registry;

pub trait CompoundSeries: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// `w_1`.
    fn first(&self) -> f64;

    /// `w_{n+1} / w_n`.
    fn ratio(&self, n: usize) -> f64;

    /// `w_n` for `n >= 1`.
    fn weight(&self, n: usize) -> f64 {
        (1..n).fold(self.first(), |w, k| w * self.ratio(k))
    }

    /// `sum_{k > n} w_k`.
    fn tail_weight(&self, n: usize) -> f64 {
        forward_tail(self, n)
    }
}

/// Sums `w_{n+1} + w_{n+2} + ...` until the terms are decreasing and negligible.
fn forward_tail<S: CompoundSeries + ?Sized>(series: &S, n: usize) -> f64 {
    let mut w = series.weight(n + 1);
    let mut sum = 0.0;
    let mut k = n + 1;
    loop {
        sum += w;
        let r = series.ratio(k);
        let next = w * r;
        if (r < 1.0 && next <= sum * 1e-18) || next == 0.0 || k > n + 10_000_000 {
            // geometric bound on what is left
            let rest = if r < 1.0 { next / (1.0 - r) } else { 0.0 };
            return sum + rest;
        }
        w = next;
        k += 1;
    }
}

/// Parameters understood by the series constructors. Each series reads the
/// fields it needs.
#[derive(Debug, Clone, Copy, Default)]
pub struct SeriesParams {
    pub lambda: f64,
    pub alpha: f64,
    pub t: f64,
}

pub type SeriesCtor = fn(&SeriesParams) -> Result<Box<dyn CompoundSeries>>;

pub static SERIES: Registry<SeriesCtor> = Registry::new(
    "compound series",
    &[
        ("poisson", |p| Ok(Box::new(PoissonSeries::new(p.lambda * p.t)?))),
        ("negative_binomial", |p| {
            Ok(Box::new(NegBinSeries::new(p.alpha, p.lambda)?))
        }),
        ("logarithmic", |p| Ok(Box::new(LogSeries::new(p.lambda)?))),
        ("geometric", |p| Ok(Box::new(GeometricSeries::new(p.lambda)?))),
    ],
);

/// `w_n = r^n / n! / (e^r - 1)`: Poisson(r) conditioned on `n >= 1`.
#[derive(Debug, Clone, Copy)]
pub struct PoissonSeries {
    rate: f64,
}

impl PoissonSeries {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid(format!("Poisson rate must be positive, got {rate}")));
        }
        Ok(PoissonSeries { rate })
    }
}

impl CompoundSeries for PoissonSeries {
    fn name(&self) -> &'static str {
        "poisson"
    }

    fn first(&self) -> f64 {
        let r = self.rate;
        if r < 1.0 {
            r / r.exp_m1()
        } else {
            r * (-r).exp() / -(-r).exp_m1()
        }
    }

    fn ratio(&self, n: usize) -> f64 {
        self.rate / (n + 1) as f64
    }

    fn weight(&self, n: usize) -> f64 {
        if n < 64 {
            return (1..n).fold(self.first(), |w, k| w * self.ratio(k));
        }
        // log form avoids underflow of the early terms for large rates
        let r = self.rate;
        let ln_norm = if r < 1.0 { r.exp_m1().ln() } else { r + (-(-r).exp_m1()).ln() };
        (n as f64 * r.ln() - statrs::function::gamma::ln_gamma(n as f64 + 1.0) - ln_norm).exp()
    }

    fn tail_weight(&self, n: usize) -> f64 {
        if (n + 1) as f64 >= self.rate {
            return forward_tail(self, n);
        }
        // before the mode the residual is large and the incomplete gamma is accurate
        let r = self.rate;
        statrs::function::gamma::gamma_lr(n as f64 + 1.0, r) / -(-r).exp_m1()
    }
}

/// `w_n = c0/(1-c0) * binom(alpha+n-1, n) * lambda^n` with `c0 = (1-lambda)^alpha`.
#[derive(Debug, Clone, Copy)]
pub struct NegBinSeries {
    alpha: f64,
    lambda: f64,
}

impl NegBinSeries {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive, got {alpha}")));
        }
        Ok(NegBinSeries { alpha, lambda })
    }
}

impl CompoundSeries for NegBinSeries {
    fn name(&self) -> &'static str {
        "negative_binomial"
    }

    fn first(&self) -> f64 {
        // c0/(1-c0) with c0 = exp(-alpha delta)
        let ad = self.alpha * -(-self.lambda).ln_1p();
        self.alpha * self.lambda / ad.exp_m1()
    }

    fn ratio(&self, n: usize) -> f64 {
        self.lambda * (self.alpha + n as f64) / (n + 1) as f64
    }
}

/// `w_n = lambda^n / (n delta)` with `delta = -ln(1 - lambda)`.
#[derive(Debug, Clone, Copy)]
pub struct LogSeries {
    lambda: f64,
}

impl LogSeries {
    pub fn new(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(LogSeries { lambda })
    }
}

impl CompoundSeries for LogSeries {
    fn name(&self) -> &'static str {
        "logarithmic"
    }

    fn first(&self) -> f64 {
        self.lambda / -(-self.lambda).ln_1p()
    }

    fn ratio(&self, n: usize) -> f64 {
        self.lambda * n as f64 / (n + 1) as f64
    }
}

/// `w_n = (1 - lambda) lambda^(n-1)`.
#[derive(Debug, Clone, Copy)]
pub struct GeometricSeries {
    lambda: f64,
}

impl GeometricSeries {
    pub fn new(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(GeometricSeries { lambda })
    }
}

impl CompoundSeries for GeometricSeries {
    fn name(&self) -> &'static str {
        "geometric"
    }

    fn first(&self) -> f64 {
        1.0 - self.lambda
    }

    fn ratio(&self, _n: usize) -> f64 {
        self.lambda
    }

    fn weight(&self, n: usize) -> f64 {
        (1.0 - self.lambda) * self.lambda.powi(n as i32 - 1)
    }

    fn tail_weight(&self, n: usize) -> f64 {
        self.lambda.powi(n as i32)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("lambda must lie in (0, 1), got {lambda}")))
    }
}

/// Smallest `N >= 1` with `tail_weight(N) < tol`, or `None` past `cap`.
pub fn truncation_point(series: &dyn CompoundSeries, tol: f64, cap: usize) -> Option<usize> {
    (1..=cap).find(|&n| series.tail_weight(n) < tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::ln_gamma;

    fn all() -> Vec<Box<dyn CompoundSeries>> {
        vec![
            Box::new(PoissonSeries::new(0.3).unwrap()),
            Box::new(PoissonSeries::new(7.5).unwrap()),
            Box::new(PoissonSeries::new(150.0).unwrap()),
            Box::new(PoissonSeries::new(900.0).unwrap()),
            Box::new(NegBinSeries::new(0.5, 0.3).unwrap()),
            Box::new(NegBinSeries::new(2.7, 0.9).unwrap()),
            Box::new(LogSeries::new(0.5).unwrap()),
            Box::new(LogSeries::new(0.95).unwrap()),
            Box::new(GeometricSeries::new(0.5).unwrap()),
        ]
    }

    #[test]
    fn weights_sum_to_one() {
        for s in all() {
            let head: f64 = (1..=20).map(|n| s.weight(n)).sum();
            let total = head + s.tail_weight(20);
            assert!((total - 1.0).abs() < 1e-12, "{s:?}: {total}");
        }
    }

    #[test]
    fn closed_forms() {
        // independent evaluation through log-gamma
        let (alpha, lambda) = (2.7f64, 0.6f64);
        let nb = NegBinSeries::new(alpha, lambda).unwrap();
        let c0 = (1.0 - lambda).powf(alpha);
        for n in [1usize, 2, 5, 17] {
            let ln_binom =
                ln_gamma(alpha + n as f64) - ln_gamma(alpha) - ln_gamma(n as f64 + 1.0);
            let expect = c0 / (1.0 - c0) * (ln_binom + n as f64 * lambda.ln()).exp();
            assert!((nb.weight(n) / expect - 1.0).abs() < 1e-12, "n = {n}");
        }

        let delta = -(1.0 - lambda).ln();
        let ls = LogSeries::new(lambda).unwrap();
        for n in [1usize, 3, 30] {
            let expect = lambda.powi(n as i32) / (n as f64 * delta);
            assert!((ls.weight(n) / expect - 1.0).abs() < 1e-12);
        }

        let ps = PoissonSeries::new(3.0).unwrap();
        for n in [1usize, 4, 63, 64, 80] {
            let expect = (n as f64 * 3f64.ln() - ln_gamma(n as f64 + 1.0)).exp() / 3f64.exp_m1();
            assert!((ps.weight(n) / expect - 1.0).abs() < 1e-11, "n = {n}");
        }

        // alpha = 1 is the geometric law
        let g = GeometricSeries::new(0.4).unwrap();
        let nb1 = NegBinSeries::new(1.0, 0.4).unwrap();
        for n in 1..30 {
            assert!((g.weight(n) - nb1.weight(n)).abs() < 1e-15);
        }
        assert!((g.tail_weight(12) - nb1.tail_weight(12)).abs() < 1e-16);
    }

    #[test]
    fn tail_weight_is_consistent() {
        for s in all() {
            for n in [1usize, 3, 10, 40] {
                let tail = s.tail_weight(n);
                let step = tail - s.tail_weight(n + 1);
                let w = s.weight(n + 1);
                assert!((step - w).abs() <= 1e-13 * tail + 1e-300, "{s:?} n={n}");
            }
        }
    }

    #[test]
    fn truncation() {
        let g = GeometricSeries::new(0.5).unwrap();
        // 0.5^N < 1e-6 first at N = 20
        assert_eq!(truncation_point(&g, 1e-6, 512), Some(20));
        assert_eq!(truncation_point(&g, 1e-300, 512), None);
        let p = PoissonSeries::new(1.0).unwrap();
        let n = truncation_point(&p, 1e-12, 512).unwrap();
        assert!(p.tail_weight(n) < 1e-12 && p.tail_weight(n - 1) >= 1e-12);
    }

    #[test]
    fn registry() {
        let params = SeriesParams {
            lambda: 0.5,
            alpha: 2.0,
            t: 1.0,
        };
        for name in SERIES.names() {
            let s = (SERIES.get(name).unwrap())(&params).unwrap();
            assert_eq!(s.name(), name);
        }
        assert!(SERIES.get("binomial").is_err());
        assert!((SERIES.get("geometric").unwrap())(&SeriesParams {
            lambda: 1.0,
            ..params
        })
        .is_err());
    }
}
