//! Symmetric quadrature on the reference triangle `(0,0), (1,0), (0,1)`.
//!
//! Dunavant rules of degree 4, 6 and 8. Weights are scaled to the reference
//! area 1/2.

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Barycentric coordinates `(l0, l1, l2)`; the reference point is `(l1, l2)`.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reference coordinates `(xi, eta)` of each point.
    pub fn reference_points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.points.iter().map(|p| [p[1], p[2]])
    }

    /// Integrates `f(xi, eta)` over the reference triangle.
    pub fn integrate_reference(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[1], p[2]))
            .sum()
    }

    /// 6-point rule, exact for degree 4.
    pub fn degree4() -> Self {
        let mut b = RuleBuilder::default();
        b.orbit3(0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_70);
        b.orbit3(0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64);
        b.finish(4)
    }

    /// 12-point rule, exact for degree 6.
    pub fn degree6() -> Self {
        let mut b = RuleBuilder::default();
        b.orbit3(0.249_286_745_170_910_421_29, 0.116_786_275_726_379_366_03);
        b.orbit3(0.063_089_014_491_502_228_34, 0.050_844_906_370_206_816_92);
        b.orbit6(
            0.053_145_049_844_816_947_35,
            0.310_352_451_033_784_405_42,
            0.082_851_075_618_373_575_19,
        );
        b.finish(6)
    }

    /// 16-point rule, exact for degree 8.
    pub fn degree8() -> Self {
        let mut b = RuleBuilder::default();
        b.centroid(0.144_315_607_677_787_168_25);
        b.orbit3(0.459_292_588_292_723_156_02, 0.095_091_634_267_284_624_79);
        b.orbit3(0.170_569_307_751_760_206_62, 0.103_217_370_534_718_250_28);
        b.orbit3(0.050_547_228_317_030_975_45, 0.032_458_497_623_198_080_31);
        b.orbit6(
            0.008_394_777_409_957_605_34,
            0.263_112_829_634_638_113_42,
            0.027_230_314_174_434_994_26,
        );
        b.finish(8)
    }
}

/// Accumulates symmetry orbits; weights are given normalised to sum 1.
#[derive(Default)]
struct RuleBuilder {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl RuleBuilder {
    fn centroid(&mut self, w: f64) {
        let t = 1.0 / 3.0;
        self.points.push([t, t, t]);
        self.weights.push(w);
    }

    /// Orbit of `(1-2a, a, a)`.
    fn orbit3(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[b, a, a], [a, b, a], [a, a, b]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    /// Orbit of `(a, b, 1-a-b)`.
    fn orbit6(&mut self, a: f64, b: f64, w: f64) {
        let c = 1.0 - a - b;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    fn finish(self, degree: usize) -> QuadratureRule {
        QuadratureRule {
            points: self.points,
            weights: self.weights.into_iter().map(|w| 0.5 * w).collect(),
            exactness_degree: degree,
        }
    }
}
