//! The malicious node's faking strategy.
//!
//! A malicious node at `x₀` that knows every genuine position picks the claim
//! `x_f` maximizing the expected number of genuine receivers whose RSS test it
//! passes. The objective is a sum of Gaussian interval probabilities, one per
//! receiver, each peaked on the circle of points whose distance to that
//! receiver equals its true distance from `x₀`. Peaks become needle-thin as
//! σ → 0, so a plain grid cannot see them; the search therefore seeds from the
//! intersections of those circles as well as from a coarse grid, then refines
//! by pattern search.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::channel::SignalParams;
use crate::error::{domain, Result};
use crate::geometry::{Point, Region};
use crate::scalar::Scalar;

/// Number of distinct seeds handed to the local refinement.
const REFINE_SEEDS: usize = 6;

/// Extra seeds placed on each receiver's consistency circle.
const CIRCLE_SEEDS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FakingSearchConfig<T> {
    /// Radius of the open disc around the true position that may not be
    /// claimed.
    pub exclusion_radius: T,
    /// Spacing of the coarse search grid.
    pub grid_step: T,
    pub refine_iters: usize,
}

impl<T: Scalar> FakingSearchConfig<T> {
    pub fn new(exclusion_radius: T, grid_step: T, refine_iters: usize) -> Result<Self> {
        let cfg = Self {
            exclusion_radius,
            grid_step,
            refine_iters,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults scaled to the region: exclusion radius 20% of the diagonal,
    /// grid step 1/60 of the diagonal.
    pub fn for_region(region: &Region<T>) -> Self {
        let diag = region.diagonal();
        Self {
            exclusion_radius: diag * T::lit(0.2),
            grid_step: diag / T::lit(60.0),
            refine_iters: 40,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exclusion_radius > T::zero()) || !self.exclusion_radius.is_finite() {
            return Err(domain(format!(
                "exclusion radius must be positive, got {}",
                self.exclusion_radius
            )));
        }
        if !(self.grid_step > T::zero()) || !self.grid_step.is_finite() {
            return Err(domain(format!(
                "grid step must be positive, got {}",
                self.grid_step
            )));
        }
        if self.refine_iters == 0 {
            return Err(domain("refine_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Best claim found for one malicious node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FakingOutcome<T> {
    pub fake_position: Point<T>,
    /// Expected number of deceived genuine nodes at `fake_position`.
    pub expected_deceived: T,
    /// Acceptance probability of each genuine node, in input order.
    pub per_node_probs: Vec<T>,
}

/// Expected number of genuine nodes deceived by claiming `fake_position`.
pub fn theta_for_fake<T: Scalar>(
    params: &SignalParams<T>,
    true_position: Point<T>,
    fake_position: Point<T>,
    genuine_positions: &[Point<T>],
) -> Result<T> {
    Ok(
        per_node_probabilities(params, true_position, fake_position, genuine_positions)?
            .into_iter()
            .fold(T::zero(), |acc, p| acc + p),
    )
}

fn per_node_probabilities<T: Scalar>(
    params: &SignalParams<T>,
    true_position: Point<T>,
    fake_position: Point<T>,
    genuine_positions: &[Point<T>],
) -> Result<Vec<T>> {
    if genuine_positions.is_empty() {
        return Err(domain("at least one genuine node is required"));
    }
    genuine_positions
        .iter()
        .map(|g| {
            let claimed = g.distance(&fake_position);
            if claimed == T::zero() {
                // the RSS estimate is always positive, so a zero claim never passes
                return Ok(T::zero());
            }
            params.deception_probability(g.distance(&true_position), claimed)
        })
        .collect()
}

/// Searches the feasible claim set (region minus the exclusion disc) for the
/// claim maximizing [`theta_for_fake`].
///
/// Deterministic: ties between equal values go to the lowest `x`, then the
/// lowest `y`.
pub fn optimize_fake_position<T: Scalar>(
    params: &SignalParams<T>,
    region: &Region<T>,
    true_position: Point<T>,
    genuine_positions: &[Point<T>],
    config: &FakingSearchConfig<T>,
) -> Result<FakingOutcome<T>> {
    config.validate()?;
    if genuine_positions.is_empty() {
        return Err(domain("at least one genuine node is required"));
    }
    if !region.contains(&true_position) {
        return Err(domain("true position lies outside the deployment region"));
    }
    let search = Search::new(params, region, true_position, genuine_positions, config)?;

    let mut scored: Vec<Scored<T>> = search
        .candidates()
        .into_iter()
        .map(|p| Scored {
            value: search.value(&p),
            point: p,
        })
        .collect();
    scored.sort_by(|a, b| b.cmp_rank(a));

    let mut seeds: Vec<Scored<T>> = Vec::with_capacity(REFINE_SEEDS);
    for s in &scored {
        if seeds.len() == REFINE_SEEDS {
            break;
        }
        let near = seeds
            .iter()
            .any(|k| k.point.distance(&s.point) < config.grid_step);
        if !near {
            seeds.push(*s);
        }
    }

    let mut best = scored[0];
    for seed in seeds {
        if seed.value <= T::zero() {
            continue;
        }
        let (refined, _) = search.refine(seed);
        if refined.cmp_rank(&best) == Ordering::Greater {
            best = refined;
        }
    }

    let per_node_probs =
        per_node_probabilities(params, true_position, best.point, genuine_positions)?;
    let expected_deceived = per_node_probs.iter().fold(T::zero(), |acc, &p| acc + p);
    Ok(FakingOutcome {
        fake_position: best.point,
        expected_deceived,
        per_node_probs,
    })
}

#[derive(Debug, Clone, Copy)]
struct Scored<T> {
    value: T,
    point: Point<T>,
}

impl<T: Scalar> Scored<T> {
    /// Higher value ranks higher; on ties the lower coordinate ranks higher.
    fn cmp_rank(&self, other: &Self) -> Ordering {
        match self
            .value
            .partial_cmp(&other.value)
            .unwrap_or(Ordering::Equal)
        {
            Ordering::Equal => {}
            o => return o,
        }
        let by_x = other
            .point
            .x
            .partial_cmp(&self.point.x)
            .unwrap_or(Ordering::Equal);
        by_x.then_with(|| {
            other
                .point
                .y
                .partial_cmp(&self.point.y)
                .unwrap_or(Ordering::Equal)
        })
    }
}

struct Search<'a, T> {
    params: &'a SignalParams<T>,
    region: &'a Region<T>,
    origin: Point<T>,
    genuine: &'a [Point<T>],
    /// Ideal power each genuine node receives from the true position.
    p_true: Vec<T>,
    exclusion_sq: T,
    config: &'a FakingSearchConfig<T>,
}

impl<'a, T: Scalar> Search<'a, T> {
    fn new(
        params: &'a SignalParams<T>,
        region: &'a Region<T>,
        origin: Point<T>,
        genuine: &'a [Point<T>],
        config: &'a FakingSearchConfig<T>,
    ) -> Result<Self> {
        let exclusion_sq = config.exclusion_radius * config.exclusion_radius;
        let reachable = region
            .corners()
            .iter()
            .any(|c| c.distance_sq(&origin) >= exclusion_sq);
        if !reachable {
            return Err(domain(
                "exclusion disc covers the whole region; no feasible fake position",
            ));
        }
        let p_true = genuine
            .iter()
            .map(|g| {
                let d_sq = g.distance_sq(&origin);
                if d_sq > T::zero() {
                    Ok(params.power_at_sq(d_sq))
                } else {
                    Err(domain("genuine node coincides with the malicious node"))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            region,
            origin,
            genuine,
            p_true,
            exclusion_sq,
            config,
        })
    }

    fn feasible(&self, p: &Point<T>) -> bool {
        self.region.contains(p) && p.distance_sq(&self.origin) >= self.exclusion_sq
    }

    #[inline]
    fn value(&self, f: &Point<T>) -> T {
        let mut acc = T::zero();
        for (g, &p_true) in self.genuine.iter().zip(&self.p_true) {
            let d_sq = g.distance_sq(f);
            if d_sq > T::zero() {
                acc = acc
                    + self
                        .params
                        .band_probability(p_true, self.params.power_at_sq(d_sq));
            }
        }
        acc
    }

    /// Coarse grid, pairwise circle intersections and points on each
    /// receiver's consistency circle; infeasible points are dropped.
    fn candidates(&self) -> Vec<Point<T>> {
        let mut out = Vec::new();
        let r = self.region;
        let nx = (r.width() / self.config.grid_step)
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1)
            + 1;
        let ny = (r.height() / self.config.grid_step)
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1)
            + 1;
        let sx = r.width() / T::lit((nx - 1) as f64);
        let sy = r.height() / T::lit((ny - 1) as f64);
        for i in 0..nx {
            let x = if i + 1 == nx {
                r.x_max
            } else {
                r.x_min + T::lit(i as f64) * sx
            };
            for j in 0..ny {
                let y = if j + 1 == ny {
                    r.y_max
                } else {
                    r.y_min + T::lit(j as f64) * sy
                };
                out.push(Point::new(x, y));
            }
        }

        // The two circles through x₀ centred on receivers a and b meet again
        // at the mirror image of x₀ across the line ab.
        for (a_idx, a) in self.genuine.iter().enumerate() {
            for b in &self.genuine[a_idx + 1..] {
                if let Some(m) = self.origin.reflect_across(a, b) {
                    out.push(m);
                }
            }
        }

        let step = T::lit(2.0) * T::PI() / T::lit((CIRCLE_SEEDS + 1) as f64);
        for g in self.genuine {
            let radius = g.distance(&self.origin);
            let base = (self.origin.y - g.y).atan2(self.origin.x - g.x);
            for k in 1..=CIRCLE_SEEDS {
                let angle = base + step * T::lit(k as f64);
                out.push(Point::new(
                    g.x + radius * angle.cos(),
                    g.y + radius * angle.sin(),
                ));
            }
        }

        out.retain(|p| self.feasible(p));
        if out.is_empty() {
            // the grid can miss a thin feasible sliver; a corner never does
            out.extend(
                self.region
                    .corners()
                    .into_iter()
                    .filter(|c| self.feasible(c)),
            );
        }
        out
    }

    /// Greedy compass search: move to the best strictly improving feasible
    /// neighbour, otherwise halve the step. Returns the end point and the
    /// value after each iteration.
    fn refine(&self, seed: Scored<T>) -> (Scored<T>, Vec<T>) {
        let mut current = seed;
        let mut step = self.config.grid_step / T::lit(2.0);
        let mut trace = Vec::with_capacity(self.config.refine_iters);
        let diag = T::lit(std::f64::consts::FRAC_1_SQRT_2);
        let dirs = [
            (T::one(), T::zero()),
            (-T::one(), T::zero()),
            (T::zero(), T::one()),
            (T::zero(), -T::one()),
            (diag, diag),
            (diag, -diag),
            (-diag, diag),
            (-diag, -diag),
        ];
        for _ in 0..self.config.refine_iters {
            let mut best: Option<Scored<T>> = None;
            for &(dx, dy) in &dirs {
                let p = self.region.clamp(Point::new(
                    current.point.x + dx * step,
                    current.point.y + dy * step,
                ));
                if !self.feasible(&p) {
                    continue;
                }
                let cand = Scored {
                    value: self.value(&p),
                    point: p,
                };
                if cand.value > current.value
                    && best.is_none_or(|b| cand.cmp_rank(&b) == Ordering::Greater)
                {
                    best = Some(cand);
                }
            }
            match best {
                Some(b) => current = b,
                None => step = step / T::lit(2.0),
            }
            trace.push(current.value);
        }
        (current, trace)
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    const P: f64 = 0.997_300_203_936_739_8;

    fn region() -> Region<f64> {
        Region::square(100.0).unwrap()
    }

    /// Signal params with σ = `factor` times the corner-to-corner noise scale.
    fn params(factor: f64) -> SignalParams<f64> {
        let base = SignalParams::new(1.0, 0.125, 0.0, 2.0).unwrap();
        let ss = base.ideal_received_power(region().diagonal()).unwrap() / 3.0;
        base.with_noise_sigma(factor * ss).unwrap()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point<f64>> {
        (0..n)
            .map(|_| Point::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
            .collect()
    }

    #[test]
    fn truthful_claim_deceives_everyone_with_band_probability() {
        let g = vec![Point::new(10.0, 10.0), Point::new(80.0, 35.0)];
        let x0 = Point::new(40.0, 60.0);
        let theta = theta_for_fake(&params(1.0), x0, x0, &g).unwrap();
        assert!((theta - 1.9946).abs() < 1e-4);
    }

    #[test]
    fn inconsistent_claims_deceive_nobody_without_noise() {
        let g = vec![
            Point::new(10.0, 10.0),
            Point::new(80.0, 35.0),
            Point::new(5.0, 90.0),
        ];
        let theta = theta_for_fake(
            &params(0.0),
            Point::new(40.0, 60.0),
            Point::new(70.0, 70.0),
            &g,
        )
        .unwrap();
        assert_eq!(theta, 0.0);
    }

    #[test]
    fn single_node_sum_is_the_pair_probability() {
        let p = params(1.0);
        let g = Point::new(12.0, 30.0);
        let x0 = Point::new(50.0, 50.0);
        let xf = Point::new(60.0, 20.0);
        let theta = theta_for_fake(&p, x0, xf, &[g]).unwrap();
        let pair = p
            .deception_probability(g.distance(&x0), g.distance(&xf))
            .unwrap();
        assert_eq!(theta, pair);
        assert!(theta_for_fake(&p, x0, xf, &[]).is_err());
    }

    #[test]
    fn single_node_optimum_sits_on_the_consistency_circle() {
        let p = params(1e-6);
        let g = Point::new(30.0, 30.0);
        let x0 = Point::new(60.0, 50.0);
        let cfg = FakingSearchConfig::for_region(&region());
        let out = optimize_fake_position(&p, &region(), x0, &[g], &cfg).unwrap();
        assert!(out.expected_deceived >= 0.99);
        assert!((g.distance(&out.fake_position) - g.distance(&x0)).abs() < 1e-6);
        assert!(out.fake_position.distance(&x0) >= cfg.exclusion_radius);
    }

    #[test]
    fn negligible_noise_optimum_deceives_two() {
        let p = params(1e-6);
        let cfg = FakingSearchConfig::for_region(&region());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let x0 = random_points(&mut rng, 1)[0];
            let g = random_points(&mut rng, 12);
            let out = optimize_fake_position(&p, &region(), x0, &g, &cfg).unwrap();
            assert!(
                out.expected_deceived >= P && out.expected_deceived <= 2.0 * P + 0.05,
                "{}",
                out.expected_deceived
            );
        }
    }

    #[test]
    fn outcome_invariants() {
        let p = params(1.0);
        let cfg = FakingSearchConfig::for_region(&region());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = random_points(&mut rng, 1)[0];
        let g = random_points(&mut rng, 20);
        let out = optimize_fake_position(&p, &region(), x0, &g, &cfg).unwrap();
        let sum: f64 = out.per_node_probs.iter().sum();
        assert!((sum - out.expected_deceived).abs() < 1e-9);
        assert!(out.per_node_probs.iter().all(|q| (0.0..=1.0).contains(q)));
        assert_eq!(out.per_node_probs.len(), g.len());
        assert!(region().contains(&out.fake_position));
        assert!(out.fake_position.distance(&x0) >= cfg.exclusion_radius);
        let again = optimize_fake_position(&p, &region(), x0, &g, &cfg).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn refinement_never_decreases() {
        let p = params(1.0);
        let cfg = FakingSearchConfig::for_region(&region());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x0 = random_points(&mut rng, 1)[0];
        let g = random_points(&mut rng, 15);
        let r = region();
        let search = Search::new(&p, &r, x0, &g, &cfg).unwrap();
        for c in search.candidates().into_iter().step_by(97) {
            let seed = Scored {
                value: search.value(&c),
                point: c,
            };
            let (end, trace) = search.refine(seed);
            let mut prev = seed.value;
            for v in trace {
                assert!(v >= prev);
                prev = v;
            }
            assert!(search.feasible(&end.point));
        }
    }

    #[test]
    fn fully_excluded_region_is_an_error() {
        let small = Region::square(1.0).unwrap();
        let cfg = FakingSearchConfig::new(5.0, 0.1, 10).unwrap();
        let err = optimize_fake_position(
            &params(1.0),
            &small,
            Point::new(0.5, 0.5),
            &[Point::new(0.1, 0.1)],
            &cfg,
        );
        assert!(err.is_err());
    }

    #[test]
    fn config_validation() {
        assert!(FakingSearchConfig::new(0.0, 1.0, 10).is_err());
        assert!(FakingSearchConfig::new(1.0, -1.0, 10).is_err());
        assert!(FakingSearchConfig::new(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn tie_break_prefers_lowest_coordinates() {
        let a = Scored {
            value: 1.0,
            point: Point::new(1.0, 5.0),
        };
        let b = Scored {
            value: 1.0,
            point: Point::new(1.0, 2.0),
        };
        let c = Scored {
            value: 1.0,
            point: Point::new(0.5, 9.0),
        };
        assert_eq!(b.cmp_rank(&a), Ordering::Greater);
        assert_eq!(c.cmp_rank(&b), Ordering::Greater);
    }
}
