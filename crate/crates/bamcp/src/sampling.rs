//! Shared sampling primitives: gamma/beta draws, Dirichlet rows as
//! cumulative tables, categorical selection.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Reusable Gamma(shape, 1) sampler. Shapes below 1 go through the boost
/// identity G(a) = G(a + 1) * U^(1/a), with an integer fast path for the
/// exponent: the symmetric Dirichlet priors used here have alpha = 1/|S|,
/// so 1/alpha is a small integer and `powi` avoids a transcendental call
/// per component.
pub(crate) struct GammaSampler {
    shape: f64,
    inner: Gamma<f64>,
    /// `Some(1/shape)` when the boost identity applies.
    boost_exp: Option<f64>,
    boost_exp_int: Option<i32>,
}

impl GammaSampler {
    pub(crate) fn new(shape: f64) -> Self {
        debug_assert!(shape > 0.0 && shape.is_finite());
        if shape >= 1.0 {
            Self {
                shape,
                inner: Gamma::new(shape, 1.0).expect("valid gamma shape"),
                boost_exp: None,
                boost_exp_int: None,
            }
        } else {
            let inv = 1.0 / shape;
            let as_int = ((inv - inv.round()).abs() < 1e-12 && inv < 1e6)
                .then_some(inv.round() as i32);
            Self {
                shape,
                inner: Gamma::new(shape + 1.0, 1.0).expect("valid gamma shape"),
                boost_exp: Some(inv),
                boost_exp_int: as_int,
            }
        }
    }

    pub(crate) fn shape(&self) -> f64 {
        self.shape
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let base = self.inner.sample(rng);
        match self.boost_exp {
            None => base,
            Some(inv) => {
                let u: f64 = rng.random();
                let scale = match self.boost_exp_int {
                    Some(k) => u.powi(k),
                    None => u.powf(inv),
                };
                base * scale
            }
        }
    }
}

/// One-off Gamma(shape, 1) draw.
pub(crate) fn gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    GammaSampler::new(shape).draw(rng)
}

/// Beta(a, b) draw via the gamma-ratio construction.
pub(crate) fn beta_draw<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let x = gamma_draw(rng, a);
    let y = gamma_draw(rng, b);
    let sum = x + y;
    if sum <= 0.0 {
        // Both draws underflowed; fall back to the mean.
        return a / (a + b);
    }
    (x / sum).clamp(f64::MIN_POSITIVE, 1.0 - 1e-16)
}

/// Draw a Dirichlet vector with the given parameters and return it as a
/// cumulative table (last entry 1.0 up to rounding).
pub(crate) fn dirichlet_cdf<R, I>(rng: &mut R, params: I) -> Vec<f64>
where
    R: Rng + ?Sized,
    I: IntoIterator<Item = f64>,
{
    // Rows mostly repeat one shape (the prior pseudo-count); reuse the
    // sampler across equal-shaped components.
    let mut memo: Option<GammaSampler> = None;
    let mut cdf: Vec<f64> = params
        .into_iter()
        .map(|p| {
            if memo.as_ref().is_none_or(|g| g.shape() != p) {
                memo = Some(GammaSampler::new(p));
            }
            memo.as_ref().expect("sampler memoized").draw(rng)
        })
        .collect();
    let total: f64 = cdf.iter().sum();
    if total <= 0.0 {
        // All components underflowed (possible for tiny shapes): fall back
        // to uniform rather than emitting NaNs.
        let n = cdf.len() as f64;
        let mut acc = 0.0;
        for v in cdf.iter_mut() {
            acc += 1.0 / n;
            *v = acc;
        }
        return cdf;
    }
    let mut acc = 0.0;
    for v in cdf.iter_mut() {
        acc += *v / total;
        *v = acc.min(1.0);
    }
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

/// Index of the first cdf entry exceeding a uniform draw.
pub(crate) fn sample_cdf<R: Rng + ?Sized>(rng: &mut R, cdf: &[f64]) -> usize {
    debug_assert!(!cdf.is_empty());
    let u: f64 = rng.random();
    let idx = cdf.partition_point(|&c| c <= u);
    idx.min(cdf.len() - 1)
}

/// Sample an index proportional to (non-negative) weights.
pub(crate) fn sample_weights<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0);
    let mut u: f64 = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}
