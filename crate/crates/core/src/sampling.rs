//! Seeded sample-point generation for numeric identity checks.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffop::is_skippable;
use crate::error::{Error, Result};
use crate::expr::Assignment;

/// A sampled maximum together with how many points contributed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub max: f64,
    pub samples_used: usize,
    pub skipped: usize,
}

impl Residual {
    pub fn exact_zero() -> Self {
        Residual { max: 0.0, samples_used: 0, skipped: 0 }
    }

    pub fn merge(self, o: Residual) -> Residual {
        Residual {
            max: self.max.max(o.max),
            samples_used: self.samples_used + o.samples_used,
            skipped: self.skipped + o.skipped,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Range {
    Uniform(f64, f64),
    Choice(Vec<f64>),
}

impl Range {
    pub fn fixed(x: f64) -> Self {
        Range::Choice(vec![x])
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match self {
            Range::Uniform(lo, hi) => rng.gen_range(*lo..*hi),
            Range::Choice(xs) => *xs.choose(rng).expect("nonempty choice"),
        }
    }
}

pub type Predicate = Arc<dyn Fn(&Assignment) -> bool + Send + Sync>;

/// Which variables to sample, from where, and how many points.
#[derive(Clone)]
pub struct SampleSpec {
    pub ranges: Vec<(String, Range)>,
    pub domain: Option<Predicate>,
    pub count: usize,
    pub seed: u64,
}

impl fmt::Debug for SampleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampleSpec")
            .field("ranges", &self.ranges)
            .field("domain", &self.domain.as_ref().map(|_| "<predicate>"))
            .field("count", &self.count)
            .field("seed", &self.seed)
            .finish()
    }
}

/// Rejection attempts allowed per requested point.
const ATTEMPTS_PER_POINT: usize = 1000;

impl SampleSpec {
    pub fn new(count: usize, seed: u64) -> Self {
        SampleSpec { ranges: Vec::new(), domain: None, count, seed }
    }

    pub fn uniform(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.ranges.push((name.to_string(), Range::Uniform(lo, hi)));
        self
    }

    pub fn choice(mut self, name: &str, values: &[f64]) -> Self {
        self.ranges.push((name.to_string(), Range::Choice(values.to_vec())));
        self
    }

    pub fn fixed(mut self, name: &str, value: f64) -> Self {
        self.ranges.push((name.to_string(), Range::fixed(value)));
        self
    }

    pub fn with_domain(mut self, p: impl Fn(&Assignment) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Arc::new(p));
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    /// Up to `count` points, all satisfying the domain predicate. Fewer are returned only if
    /// rejection sampling runs out of attempts.
    pub fn points(&self) -> Vec<Assignment> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.count);
        let mut attempts = 0;
        while out.len() < self.count && attempts < ATTEMPTS_PER_POINT * self.count.max(1) {
            attempts += 1;
            let mut a = Assignment::new();
            for (name, r) in &self.ranges {
                a = a.with_real(name, r.draw(&mut rng));
            }
            if self.domain.as_ref().map_or(true, |p| p(&a)) {
                out.push(a);
            }
        }
        out
    }
}

/// Maximum of `f` over `points`. Domain, non-finite and overflow failures skip a point;
/// other errors abort. No usable point at all is inconclusive.
pub fn scan<P, F>(points: impl IntoIterator<Item = P>, mut f: F) -> Result<Residual>
where
    F: FnMut(P) -> Result<f64>,
{
    let mut r = Residual::exact_zero();
    for p in points {
        match f(p) {
            Ok(x) => {
                r.max = if x.is_nan() || r.max.is_nan() { f64::NAN } else { r.max.max(x) };
                r.samples_used += 1;
            }
            Err(e) if is_skippable(&e) => r.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if r.samples_used == 0 {
        return Err(Error::Inconclusive(format!("no usable sample points ({} skipped)", r.skipped)));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_respects_domain() {
        let spec = SampleSpec::new(50, 9)
            .uniform("x", -1.0, 1.0)
            .choice("J", &[-1.0, 1.0])
            .with_domain(|a| a.get("x").unwrap().re > 0.0);
        let p = spec.points();
        assert_eq!(p.len(), 50);
        assert_eq!(p, spec.points());
        for a in &p {
            assert!(a.get("x").unwrap().re > 0.0);
            assert_eq!(a.get("J").unwrap().re.abs(), 1.0);
        }
        assert_ne!(p, spec.clone().with_seed(10).points());
    }

    #[test]
    fn impossible_domain_yields_no_points() {
        let spec = SampleSpec::new(3, 1).uniform("x", 0.0, 1.0).with_domain(|_| false);
        assert!(spec.points().is_empty());
    }
}
