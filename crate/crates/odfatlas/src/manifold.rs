//! The Riemannian manifold of square-root ODFs.
//!
//! A square-root ODF is the pointwise square root of a spherical probability
//! density, sampled on a [`SphereGrid`]. Such functions form the positive
//! orthant of the unit Hilbert sphere, where the Fisher-Rao metric reduces to
//! the L² inner product and geodesics, exponential and logarithm maps are in
//! closed form: for unit functions p, q at angle θ = acos⟨p, q⟩,
//!
//! * `exp_p(ξ) = cos‖ξ‖ p + sin‖ξ‖ ξ/‖ξ‖`,
//! * `log_p(q) = (q − ⟨p,q⟩ p) / √(1 − ⟨p,q⟩²) · θ`,
//!
//! with the exponential restricted to ‖ξ‖ ≤ π/2 for bijectivity. Arithmetic
//! on samples can push values off the manifold (tiny negatives, norm drift),
//! so every constructor routes through [`SqrtOdf::project`].

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::parallel::pairwise_sum;
use crate::sphere::SphereGrid;

/// Distances must stay strictly inside the injectivity radius π/2 for the
/// logarithm map to be single-valued.
pub const CUT_LOCUS: f64 = std::f64::consts::FRAC_PI_2;

/// Unit-norm tolerance of a valid square-root ODF.
pub const NORM_TOL: f64 = 1e-8;

/// A point on the manifold: nonnegative samples with unit quadrature norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtOdf {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
}

/// A tangent vector at a base point: samples orthogonal to the base under
/// the Fisher-Rao inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVec {
    base: SqrtOdf,
    values: Vec<f64>,
}

impl SqrtOdf {
    /// Validates an already-normalized sample vector.
    pub fn new(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::Validation(
                "square-root ODF values must be finite and nonnegative".into(),
            ));
        }
        let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
        let norm2 = grid.integrate(&sq)?;
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(Error::Validation(format!(
                "square-root ODF has squared norm {norm2}, expected 1 within {NORM_TOL:e}"
            )));
        }
        Ok(SqrtOdf { grid, values })
    }

    /// The isotropic ODF: constant 1/√(4π) in every direction.
    pub fn uniform(grid: Arc<SphereGrid>) -> Self {
        let c = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
        let values = vec![c; grid.len()];
        SqrtOdf { grid, values }
    }

    /// Clamps negatives to zero and rescales to unit quadrature norm.
    pub fn project(grid: Arc<SphereGrid>, raw: &[f64]) -> Result<Self> {
        if raw.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} values for a grid of {}",
                raw.len(),
                grid.len()
            )));
        }
        let mut values = raw.to_vec();
        project_in_place(&grid, &mut values)?;
        Ok(SqrtOdf { grid, values })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check_same_grid(&self, other: &SqrtOdf) -> Result<()> {
        if !self.grid.same_grid(&other.grid) {
            return Err(Error::invalid("points live on different sphere grids"));
        }
        Ok(())
    }

    /// Quadrature dot product ⟨p, q⟩; lies in [0, 1] for valid points.
    pub fn dot(&self, other: &SqrtOdf) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(quad_dot(&self.grid, &self.values, &other.values))
    }

    /// Geodesic (Fisher-Rao) distance acos⟨p, q⟩ ∈ [0, π].
    pub fn distance(&self, other: &SqrtOdf) -> Result<f64> {
        self.check_same_grid(other)?;
        if self.values == other.values {
            return Ok(0.0);
        }
        let c = self.dot(other)?;
        Ok(c.clamp(-1.0, 1.0).acos())
    }

    /// Logarithm map toward `target`; errors at or beyond the cut locus.
    pub fn log(&self, target: &SqrtOdf) -> Result<TangentVec> {
        self.check_same_grid(target)?;
        let mut values = vec![0.0; self.values.len()];
        log_into(&self.grid, &self.values, &target.values, &mut values)?;
        Ok(TangentVec {
            base: self.clone(),
            values,
        })
    }

    /// Exponential map along `xi`, which must be based at `self`.
    pub fn exp(&self, xi: &TangentVec) -> Result<SqrtOdf> {
        if xi.base != *self {
            return Err(Error::invalid(
                "tangent vector is based at a different point",
            ));
        }
        let mut out = vec![0.0; self.values.len()];
        exp_into(&self.grid, &self.values, &xi.values, &mut out)?;
        Ok(SqrtOdf {
            grid: self.grid.clone(),
            values: out,
        })
    }

    /// Draws a centered Gaussian tangent vector at `self` whose covariance is
    /// σ²·identity under the Fisher-Rao inner product: each sample gets an
    /// independent normal with variance σ²/w_k (w_k the effective quadrature
    /// weight), and the component along the base is projected out. The draw
    /// is a pure function of `seed`.
    pub fn sample_tangent_gaussian(&self, sigma: f64, seed: u64) -> Result<TangentVec> {
        if sigma < 0.0 {
            return Err(Error::invalid("sigma must be nonnegative"));
        }
        let k = self.values.len();
        let mut values = vec![0.0; k];
        if sigma > 0.0 {
            let factor = self.grid.eval_factor();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (v, w) in values.iter_mut().zip(self.grid.weights()) {
                let n: f64 = StandardNormal.sample(&mut rng);
                *v = sigma / (factor * w).sqrt() * n;
            }
            let along = quad_dot(&self.grid, &values, &self.values);
            for (v, b) in values.iter_mut().zip(&self.values) {
                *v -= along * b;
            }
        }
        Ok(TangentVec {
            base: self.clone(),
            values,
        })
    }
}

impl TangentVec {
    /// Wraps raw components as a tangent vector, verifying orthogonality to
    /// the base within the manifold tolerance.
    pub fn new(base: SqrtOdf, values: Vec<f64>) -> Result<Self> {
        if values.len() != base.values.len() {
            return Err(Error::invalid("component count differs from base"));
        }
        let along = quad_dot(&base.grid, &values, &base.values);
        if along.abs() > NORM_TOL {
            return Err(Error::Validation(format!(
                "tangent vector has component {along:e} along its base"
            )));
        }
        Ok(TangentVec { base, values })
    }

    pub fn base(&self) -> &SqrtOdf {
        &self.base
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fisher-Rao inner product; both vectors must share the base point.
    pub fn inner(&self, other: &TangentVec) -> Result<f64> {
        if self.base != other.base {
            return Err(Error::invalid(
                "tangent vectors are based at different points",
            ));
        }
        Ok(quad_dot(&self.base.grid, &self.values, &other.values))
    }

    pub fn norm(&self) -> f64 {
        quad_dot(&self.base.grid, &self.values, &self.values).sqrt()
    }

    /// The same components scaled by `factor` (base point unchanged).
    pub fn scaled(&self, factor: f64) -> TangentVec {
        TangentVec {
            base: self.base.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Weighted Karcher mean: the point minimizing Σ wᵢ d²(ψ, ψᵢ), found by
/// fixed-point iteration ψ ← exp_ψ(Σ (wᵢ/W) log_ψ(ψᵢ)) with step halving on
/// objective increase. Converges when the weighted log-map sum has norm ≤
/// `tol`. Requires all pairwise distances strictly inside the cut locus.
pub fn weighted_karcher_mean(
    points: &[SqrtOdf],
    weights: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SqrtOdf> {
    if points.is_empty() {
        return Err(Error::invalid("karcher mean of an empty set"));
    }
    if points.len() != weights.len() {
        return Err(Error::invalid("one weight per point required"));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("weights must not sum to zero"));
    }
    let grid = points[0].grid.clone();
    for p in &points[1..] {
        points[0].check_same_grid(p)?;
    }
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = points[i].distance(&points[j])?;
            if d >= CUT_LOCUS {
                return Err(Error::Domain(format!(
                    "points {i} and {j} are {d} apart, at or beyond the cut locus"
                )));
            }
        }
    }

    let value_refs: Vec<&[f64]> = points.iter().map(|p| p.values.as_slice()).collect();
    let mut out = vec![0.0; grid.len()];

    // Start at the heaviest input; fall back to the projected linear blend.
    let heaviest = weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let tried = karcher_into(
        &grid,
        &value_refs,
        weights,
        tol,
        max_iter,
        points[heaviest].values.clone(),
        &mut out,
    );
    match tried {
        Ok(_) => {}
        Err(_) => {
            let mut blend = vec![0.0; grid.len()];
            for (p, &w) in value_refs.iter().zip(weights) {
                for (b, &v) in blend.iter_mut().zip(*p) {
                    *b += w / total * v;
                }
            }
            project_in_place(&grid, &mut blend)?;
            karcher_into(&grid, &value_refs, weights, tol, max_iter, blend, &mut out)?;
        }
    }
    Ok(SqrtOdf { grid, values: out })
}

// ---------------------------------------------------------------------------
// Slice-level kernels shared with the per-voxel hot loops.
// ---------------------------------------------------------------------------

/// Quadrature inner product (hemisphere factor included).
pub(crate) fn quad_dot(grid: &SphereGrid, a: &[f64], b: &[f64]) -> f64 {
    let products: Vec<f64> = a
        .iter()
        .zip(b)
        .zip(grid.weights())
        .map(|((x, y), w)| x * y * w)
        .collect();
    grid.eval_factor() * pairwise_sum(&products)
}

/// Clamps negatives and normalizes in place. Returns the pre-clamp quadrature
/// norm deviation |‖raw⁺‖ − 1| for diagnostics.
pub(crate) fn project_in_place(grid: &SphereGrid, values: &mut [f64]) -> Result<f64> {
    for v in values.iter_mut() {
        if !v.is_finite() {
            return Err(Error::Degenerate("non-finite sample in projection".into()));
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let norm = quad_dot(grid, values, values).sqrt();
    if norm <= f64::EPSILON {
        return Err(Error::Degenerate(
            "all samples vanish after clamping; no projection exists".into(),
        ));
    }
    for v in values.iter_mut() {
        *v /= norm;
    }
    Ok((norm - 1.0).abs())
}

/// Closed-form logarithm map on slices; returns the geodesic distance.
pub(crate) fn log_into(
    grid: &SphereGrid,
    base: &[f64],
    target: &[f64],
    out: &mut [f64],
) -> Result<f64> {
    if base == target {
        out.fill(0.0);
        return Ok(0.0);
    }
    let c = quad_dot(grid, base, target).clamp(-1.0, 1.0);
    let theta = c.acos();
    if theta >= CUT_LOCUS - 1e-9 {
        return Err(Error::Domain(format!(
            "distance {theta} is not inside the cut locus π/2"
        )));
    }
    if theta < 1e-12 {
        out.fill(0.0);
        return Ok(theta);
    }
    let scale = theta / (1.0 - c * c).sqrt();
    for ((o, &t), &b) in out.iter_mut().zip(target).zip(base) {
        *o = scale * (t - c * b);
    }
    Ok(theta)
}

/// Closed-form exponential map on slices, projected back to the manifold.
pub(crate) fn exp_into(
    grid: &SphereGrid,
    base: &[f64],
    xi: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let norm = quad_dot(grid, xi, xi).sqrt();
    if norm > CUT_LOCUS + 1e-12 {
        return Err(Error::Domain(format!(
            "tangent norm {norm} exceeds the injectivity radius π/2"
        )));
    }
    if norm < 1e-12 {
        out.copy_from_slice(base);
        return Ok(());
    }
    let (s, c) = norm.sin_cos();
    let k = s / norm;
    for ((o, &b), &x) in out.iter_mut().zip(base).zip(xi) {
        *o = c * b + k * x;
    }
    project_in_place(grid, out)?;
    Ok(())
}

/// Weighted Karcher mean on slices from a given starting point. Writes the
/// mean into `out` and returns the final residual.
pub(crate) fn karcher_into(
    grid: &SphereGrid,
    points: &[&[f64]],
    weights: &[f64],
    tol: f64,
    max_iter: usize,
    start: Vec<f64>,
    out: &mut [f64],
) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    let k = grid.len();
    let mut mean = start;
    let mut tangent = vec![0.0; k];
    let mut log_buf = vec![0.0; k];
    let mut candidate = vec![0.0; k];

    let objective = |mean: &[f64]| -> f64 {
        let mut obj = 0.0;
        for (p, &w) in points.iter().zip(weights) {
            let c = quad_dot(grid, mean, p).clamp(-1.0, 1.0);
            let theta = c.acos();
            obj += w / total * theta * theta;
        }
        obj
    };

    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        tangent.fill(0.0);
        for (p, &w) in points.iter().zip(weights) {
            log_into(grid, &mean, p, &mut log_buf)?;
            let scale = w / total;
            for (t, &l) in tangent.iter_mut().zip(&log_buf) {
                *t += scale * l;
            }
        }
        residual = quad_dot(grid, &tangent, &tangent).sqrt();
        if residual <= tol {
            out.copy_from_slice(&mean);
            return Ok(residual);
        }
        if residual < 1e-6 {
            // Near the fixed point objective differences drop below f64
            // resolution, so line-search comparisons are noise; the plain
            // unit step is a local contraction and keeps converging.
            exp_into(grid, &mean, &tangent, &mut candidate)?;
            mean.copy_from_slice(&candidate);
            continue;
        }
        let current = objective(&mean);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let scaled: Vec<f64> = tangent.iter().map(|t| t * step).collect();
            exp_into(grid, &mean, &scaled, &mut candidate)?;
            if objective(&candidate) <= current {
                mean.copy_from_slice(&candidate);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if residual <= tol {
        out.copy_from_slice(&mean);
        return Ok(residual);
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(level: u32) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::icosphere(level).unwrap())
    }

    /// Neumaier-compensated summation, used as the extended-precision oracle
    /// for quadrature sums.
    fn compensated_sum(values: &[f64]) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for &v in values {
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }

    fn random_point(grid: &Arc<SphereGrid>, rng: &mut impl Rng, spread: f64) -> SqrtOdf {
        let raw: Vec<f64> = (0..grid.len())
            .map(|_| 1.0 + spread * rng.gen_range(-0.9..0.9))
            .collect();
        SqrtOdf::project(grid.clone(), &raw).unwrap()
    }

    fn hemisphere_indicator(grid: &Arc<SphereGrid>, upper: bool) -> SqrtOdf {
        let raw: Vec<f64> = grid
            .directions()
            .iter()
            .map(|d| {
                if (upper && d.z > 0.0) || (!upper && d.z < 0.0) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        SqrtOdf::project(grid.clone(), &raw).unwrap()
    }

    #[test]
    fn uniform_odf_is_valid() {
        let g = grid(2);
        let u = SqrtOdf::uniform(g.clone());
        let sq: Vec<f64> = u.values().iter().map(|v| v * v).collect();
        assert_relative_eq!(g.integrate(&sq).unwrap(), 1.0, epsilon = 1e-10);
        SqrtOdf::new(g, u.values().to_vec()).unwrap();
    }

    #[test]
    fn dot_of_point_with_itself_is_one() {
        let g = grid(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let p = random_point(&g, &mut rng, 0.5);
            assert_relative_eq!(p.dot(&p).unwrap(), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn disjoint_supports_are_orthogonal() {
        let g = grid(2);
        let upper = hemisphere_indicator(&g, true);
        let lower = hemisphere_indicator(&g, false);
        assert_eq!(upper.dot(&lower).unwrap(), 0.0);
        assert_relative_eq!(upper.distance(&lower).unwrap(), PI / 2.0, epsilon = 1e-8);
    }

    #[test]
    fn dot_matches_compensated_oracle() {
        let g = grid(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let p = random_point(&g, &mut rng, 0.8);
            let q = random_point(&g, &mut rng, 0.8);
            let oracle_terms: Vec<f64> = p
                .values()
                .iter()
                .zip(q.values())
                .zip(g.weights())
                .map(|((a, b), w)| a * b * w)
                .collect();
            let oracle = compensated_sum(&oracle_terms);
            assert_relative_eq!(p.dot(&q).unwrap(), oracle, epsilon = 1e-13);
        }
    }

    #[test]
    fn fr_inner_is_symmetric_and_zero_on_zero() {
        let g = grid(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = random_point(&g, &mut rng, 0.4);
        let zero = TangentVec::new(base.clone(), vec![0.0; g.len()]).unwrap();
        assert_eq!(zero.inner(&zero).unwrap(), 0.0);
        for seed in 0..10 {
            let a = base.sample_tangent_gaussian(0.3, seed).unwrap();
            let b = base.sample_tangent_gaussian(0.3, seed + 100).unwrap();
            assert_eq!(a.inner(&b).unwrap(), b.inner(&a).unwrap());
        }
    }

    #[test]
    fn fr_inner_of_projected_constant_matches_direct_sum() {
        let g = grid(2);
        let base = SqrtOdf::uniform(g.clone());
        let c = 1.0 / (4.0 * PI).sqrt();
        let mut raw = vec![c; g.len()];
        let along = quad_dot(&g, &raw, base.values());
        for (v, b) in raw.iter_mut().zip(base.values()) {
            *v -= along * b;
        }
        let xi = TangentVec::new(base, raw.clone()).unwrap();
        let oracle_terms: Vec<f64> = raw
            .iter()
            .zip(g.weights())
            .map(|(v, w)| v * v * w)
            .collect();
        let oracle = compensated_sum(&oracle_terms);
        assert_relative_eq!(xi.inner(&xi).unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn fr_inner_rejects_mismatched_bases() {
        let g = grid(1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = random_point(&g, &mut rng, 0.4);
        let q = random_point(&g, &mut rng, 0.4);
        let a = p.sample_tangent_gaussian(0.1, 0).unwrap();
        let b = q.sample_tangent_gaussian(0.1, 0).unwrap();
        assert!(a.inner(&b).is_err());
    }

    #[test]
    fn distance_of_uniform_to_hemisphere_is_quarter_turn() {
        // ⟨uniform, upper-hemisphere⟩ = 1/√2, so the angle is π/4. The
        // discrete samples are quadrature-cell averages of the continuum
        // square-root function: equatorial Voronoi cells are mirror-split by
        // the equator, so they average to half the upper value.
        let g = grid(3);
        let uniform = SqrtOdf::uniform(g.clone());
        let raw: Vec<f64> = g
            .directions()
            .iter()
            .map(|d| {
                if d.z > 0.0 {
                    1.0
                } else if d.z == 0.0 {
                    0.5
                } else {
                    0.0
                }
            })
            .collect();
        let upper = SqrtOdf::project(g.clone(), &raw).unwrap();
        let d = uniform.distance(&upper).unwrap();
        assert!((d - PI / 4.0).abs() < 2e-2, "distance {d}");
    }

    #[test]
    fn distance_is_zero_on_equal_points_and_symmetric() {
        let g = grid(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = random_point(&g, &mut rng, 0.6);
            let q = random_point(&g, &mut rng, 0.6);
            // Equal points are detected before acos can pick up noise.
            assert_eq!(p.distance(&p).unwrap(), 0.0);
            let reprojected = SqrtOdf::project(g.clone(), p.values()).unwrap();
            assert!(p.distance(&reprojected).unwrap() < 1e-7);
            assert_eq!(p.distance(&q).unwrap(), q.distance(&p).unwrap());
        }
    }

    #[test]
    fn exp_of_zero_tangent_is_the_base() {
        let g = grid(2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let base = random_point(&g, &mut rng, 0.5);
        let zero = TangentVec::new(base.clone(), vec![0.0; g.len()]).unwrap();
        assert_eq!(base.exp(&zero).unwrap().values(), base.values());
    }

    #[test]
    fn exp_at_quarter_turn_lands_on_the_tangent_direction() {
        let g = grid(2);
        let base = hemisphere_indicator(&g, true);
        let lower = hemisphere_indicator(&g, false);
        // Disjoint support makes the lower indicator a unit tangent at the
        // upper one; at ‖ξ‖ = π/2 the base contribution vanishes.
        let xi = TangentVec::new(base.clone(), {
            lower.values().iter().map(|v| v * PI / 2.0).collect()
        })
        .unwrap();
        assert_relative_eq!(xi.norm(), PI / 2.0, epsilon = 1e-10);
        let out = base.exp(&xi).unwrap();
        assert!(out.distance(&lower).unwrap() < 1e-7);
        let sq: Vec<f64> = out.values().iter().map(|v| v * v).collect();
        assert_relative_eq!(g.integrate(&sq).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn exp_rejects_tangents_past_the_injectivity_radius() {
        let g = grid(1);
        let base = hemisphere_indicator(&g, true);
        let lower = hemisphere_indicator(&g, false);
        let xi = TangentVec::new(base.clone(), {
            lower.values().iter().map(|v| v * 1.8).collect()
        })
        .unwrap();
        assert!(matches!(base.exp(&xi), Err(Error::Domain(_))));
    }

    #[test]
    fn log_of_base_is_zero_and_norm_equals_distance() {
        let g = grid(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = random_point(&g, &mut rng, 0.7);
            let q = random_point(&g, &mut rng, 0.7);
            let self_log = p.log(&p).unwrap();
            assert!(self_log.values().iter().all(|&v| v == 0.0));
            let xi = p.log(&q).unwrap();
            assert_relative_eq!(xi.norm(), p.distance(&q).unwrap(), epsilon = 1e-10);
            // Orthogonality to the base point.
            assert!(quad_dot(&g, xi.values(), p.values()).abs() < 1e-8);
        }
    }

    #[test]
    fn exp_log_round_trip_is_tight() {
        let g = grid(2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut worst = 0.0_f64;
        for _ in 0..100 {
            let p = random_point(&g, &mut rng, 0.8);
            let q = random_point(&g, &mut rng, 0.8);
            assert!(p.distance(&q).unwrap() < CUT_LOCUS);
            let back = p.exp(&p.log(&q).unwrap()).unwrap();
            for (a, b) in back.values().iter().zip(q.values()) {
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst <= 1e-10, "round-trip max error {worst}");
    }

    #[test]
    fn projection_is_idempotent_scale_invariant_and_clamps() {
        let g = grid(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_point(&g, &mut rng, 0.5);

        let again = SqrtOdf::project(g.clone(), p.values()).unwrap();
        for (a, b) in again.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-12);
        }

        let doubled: Vec<f64> = p.values().iter().map(|v| 2.0 * v).collect();
        let rescaled = SqrtOdf::project(g.clone(), &doubled).unwrap();
        for (a, b) in rescaled.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-12);
        }

        let mut with_negative = p.values().to_vec();
        with_negative[5] = -0.1;
        let clamped = SqrtOdf::project(g.clone(), &with_negative).unwrap();
        assert_eq!(clamped.values()[5], 0.0);
        let sq: Vec<f64> = clamped.values().iter().map(|v| v * v).collect();
        assert_relative_eq!(g.integrate(&sq).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_of_all_negative_is_degenerate() {
        let g = grid(1);
        let raw = vec![-0.5; g.len()];
        assert!(matches!(
            SqrtOdf::project(g, &raw),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn gaussian_tangent_is_deterministic_orthogonal_and_zero_at_sigma_zero() {
        let g = grid(1);
        let base = SqrtOdf::uniform(g.clone());
        let zero = base.sample_tangent_gaussian(0.0, 42).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        for seed in 0..50 {
            let xi = base.sample_tangent_gaussian(0.2, seed).unwrap();
            let again = base.sample_tangent_gaussian(0.2, seed).unwrap();
            assert_eq!(xi.values(), again.values());
            assert!(quad_dot(&g, xi.values(), base.values()).abs() < 1e-8);
        }
    }

    #[test]
    fn gaussian_tangent_energy_matches_covariance_trace() {
        // With covariance σ²·Id under the Fisher-Rao product and one mode
        // projected out, E‖ξ‖² = σ²(K−1).
        let g = grid(1);
        let base = SqrtOdf::uniform(g.clone());
        let sigma = 0.1;
        let draws = 10_000;
        let mut total = 0.0;
        let mut mean = vec![0.0; g.len()];
        for seed in 0..draws {
            let xi = base.sample_tangent_gaussian(sigma, seed).unwrap();
            total += quad_dot(&g, xi.values(), xi.values());
            for (m, v) in mean.iter_mut().zip(xi.values()) {
                *m += v / draws as f64;
            }
        }
        let expected = sigma * sigma * (g.len() as f64 - 1.0);
        let empirical = total / draws as f64;
        assert!(
            (empirical - expected).abs() / expected < 0.05,
            "empirical {empirical} vs expected {expected}"
        );
        // Central-limit bound on the empirical mean.
        let mean_norm = quad_dot(&g, &mean, &mean).sqrt();
        let bound = 3.0 * sigma / (draws as f64).sqrt() * (g.len() as f64).sqrt();
        assert!(mean_norm <= bound, "mean norm {mean_norm} > bound {bound}");
    }

    #[test]
    fn karcher_mean_of_a_single_point_is_that_point() {
        let g = grid(1);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = random_point(&g, &mut rng, 0.6);
        let mean = weighted_karcher_mean(&[p.clone()], &[2.5], 1e-8, 50).unwrap();
        assert_eq!(mean.values(), p.values());
    }

    #[test]
    fn karcher_mean_of_identical_points_is_that_point() {
        let g = grid(1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_point(&g, &mut rng, 0.6);
        let points = vec![p.clone(); 4];
        let mean = weighted_karcher_mean(&points, &[0.1, 0.4, 0.2, 0.3], 1e-8, 50).unwrap();
        assert_eq!(mean.values(), p.values());
    }

    #[test]
    fn karcher_midpoint_matches_projected_chord_midpoint() {
        // On the unit sphere the geodesic midpoint of p, q is the normalized
        // chord midpoint — an oracle independent of exp/log.
        let g = grid(2);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let p = random_point(&g, &mut rng, 0.8);
            let q = random_point(&g, &mut rng, 0.8);
            let mean =
                weighted_karcher_mean(&[p.clone(), q.clone()], &[1.0, 1.0], 1e-12, 100).unwrap();
            let chord: Vec<f64> = p
                .values()
                .iter()
                .zip(q.values())
                .map(|(a, b)| a + b)
                .collect();
            let oracle = SqrtOdf::project(g.clone(), &chord).unwrap();
            for (m, o) in mean.values().iter().zip(oracle.values()) {
                assert!((m - o).abs() < 1e-8, "midpoint deviates: {m} vs {o}");
            }
        }
    }

    #[test]
    fn karcher_mean_satisfies_the_fixed_point_and_is_a_local_minimum() {
        let g = grid(1);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let tol = 1e-10;
        let points: Vec<SqrtOdf> = (0..5).map(|_| random_point(&g, &mut rng, 0.7)).collect();
        let weights = [0.3, 1.2, 0.8, 0.5, 0.9];
        let mean = weighted_karcher_mean(&points, &weights, tol, 200).unwrap();

        let total: f64 = weights.iter().sum();
        let mut tangent = vec![0.0; g.len()];
        for (p, &w) in points.iter().zip(&weights) {
            let l = mean.log(p).unwrap();
            for (t, v) in tangent.iter_mut().zip(l.values()) {
                *t += w / total * v;
            }
        }
        let residual = quad_dot(&g, &tangent, &tangent).sqrt();
        assert!(residual <= tol, "fixed-point residual {residual}");

        let objective = |point: &SqrtOdf| -> f64 {
            points
                .iter()
                .zip(&weights)
                .map(|(p, &w)| {
                    let d = point.distance(p).unwrap();
                    w * d * d
                })
                .sum()
        };
        let at_mean = objective(&mean);
        for seed in 0..10 {
            let dir = mean.sample_tangent_gaussian(1.0, 1000 + seed).unwrap();
            let perturbation = dir.scaled(10.0 * tol / dir.norm());
            let moved = mean.exp(&perturbation).unwrap();
            assert!(
                objective(&moved) > at_mean,
                "perturbation {seed} did not increase the objective"
            );
        }
    }

    #[test]
    fn karcher_mean_is_permutation_invariant() {
        let g = grid(1);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let points: Vec<SqrtOdf> = (0..4).map(|_| random_point(&g, &mut rng, 0.7)).collect();
        let weights = [0.4, 1.0, 0.7, 0.2];
        let tol = 1e-10;
        let mean = weighted_karcher_mean(&points, &weights, tol, 200).unwrap();

        let perm = [2usize, 0, 3, 1];
        let shuffled: Vec<SqrtOdf> = perm.iter().map(|&i| points[i].clone()).collect();
        let shuffled_weights: Vec<f64> = perm.iter().map(|&i| weights[i]).collect();
        let mean2 = weighted_karcher_mean(&shuffled, &shuffled_weights, tol, 200).unwrap();
        assert!(mean.distance(&mean2).unwrap() <= 10.0 * tol);
    }

    #[test]
    fn triangle_inequality_holds_on_random_triples() {
        let g = grid(1);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..200 {
            let a = random_point(&g, &mut rng, 0.9);
            let b = random_point(&g, &mut rng, 0.9);
            let c = random_point(&g, &mut rng, 0.9);
            let ab = a.distance(&b).unwrap();
            let bc = b.distance(&c).unwrap();
            let ac = a.distance(&c).unwrap();
            assert!(ac <= ab + bc + 1e-9);
        }
    }
}
