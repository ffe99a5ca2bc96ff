//! Symmetric test distributions with exact moments and seeded sampling.
//!
//! A [`DistributionSpec`] is validated at construction: weights must be positive
//! and sum to one, and the component list must be closed under reflection about
//! the declared center. Internally every spec is flattened into weighted
//! [`Part`]s (Gaussians, Laplaces, triangles and point atoms) so that the
//! smoothing oracle can convolve each part on its own.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{gaussian_pdf, ln, sqrt};
use crate::rng::RngStream;

const WEIGHT_TOL: f64 = 1e-12;

/// One Gaussian component of a mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// A point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub location: f64,
}

fn default_tooth_mass() -> f64 {
    0.5
}

fn default_n_teeth() -> u32 {
    41
}

/// The user-facing description of a distribution, as it appears in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpecKind {
    Gaussian {
        mu: f64,
        sigma: f64,
    },
    Laplace {
        mu: f64,
        b: f64,
    },
    GaussianMixture {
        components: Vec<MixtureComponent>,
    },
    GaussianWithAtoms {
        base_weight: f64,
        base_mu: f64,
        base_sigma: f64,
        atoms: Vec<Atom>,
    },
    /// `(1 - tooth_mass) N(mu, sigma^2)` plus `n_teeth` triangular teeth of width
    /// `tooth_width` centered at `mu + k * tooth_width`, with tooth weights
    /// proportional to the Gaussian density at their centers.
    GaussianSawtooth {
        mu: f64,
        sigma: f64,
        tooth_width: f64,
        #[serde(default = "default_tooth_mass")]
        tooth_mass: f64,
        #[serde(default = "default_n_teeth")]
        n_teeth: u32,
    },
    /// A purely atomic distribution.
    PointMasses {
        atoms: Vec<Atom>,
    },
}

/// A weighted building block of a distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Part {
    Normal {
        weight: f64,
        mean: f64,
        sd: f64,
    },
    Laplace {
        weight: f64,
        mean: f64,
        scale: f64,
    },
    /// Symmetric triangular density supported on `[center - width/2, center + width/2]`.
    Triangle {
        weight: f64,
        center: f64,
        width: f64,
    },
    Atom {
        weight: f64,
        location: f64,
    },
}

impl Part {
    pub fn weight(&self) -> f64 {
        match *self {
            Part::Normal { weight, .. }
            | Part::Laplace { weight, .. }
            | Part::Triangle { weight, .. }
            | Part::Atom { weight, .. } => weight,
        }
    }

    fn center(&self) -> f64 {
        match *self {
            Part::Normal { mean, .. } | Part::Laplace { mean, .. } => mean,
            Part::Triangle { center, .. } => center,
            Part::Atom { location, .. } => location,
        }
    }

    /// Variance of the part about its own center.
    fn own_variance(&self) -> f64 {
        match *self {
            Part::Normal { sd, .. } => sd * sd,
            Part::Laplace { scale, .. } => 2.0 * scale * scale,
            Part::Triangle { width, .. } => width * width / 24.0,
            Part::Atom { .. } => 0.0,
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match *self {
            Part::Normal { weight, mean, sd } => weight * gaussian_pdf(x, mean, sd),
            Part::Laplace { weight, mean, scale } => {
                weight * 0.5 / scale * crate::math::exp(-(x - mean).abs() / scale)
            }
            Part::Triangle { weight, center, width } => {
                let half = 0.5 * width;
                let d = (x - center).abs();
                if d >= half {
                    0.0
                } else {
                    weight * 4.0 / (width * width) * (half - d)
                }
            }
            Part::Atom { .. } => 0.0,
        }
    }

    fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Part::Normal { mean, sd, .. } => rng.normal(mean, sd),
            Part::Laplace { mean, scale, .. } => {
                let u = rng.next_f64();
                if u < 0.5 {
                    mean + scale * ln(2.0 * u)
                } else {
                    mean - scale * ln(2.0 * (1.0 - u))
                }
            }
            Part::Triangle { center, width, .. } => {
                let u = rng.next_f64();
                let half = 0.5 * width;
                if u < 0.5 {
                    center - half + half * sqrt(2.0 * u)
                } else {
                    center + half - half * sqrt(2.0 * (1.0 - u))
                }
            }
            Part::Atom { location, .. } => location,
        }
    }
}

/// A validated symmetric distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecKind", into = "SpecKind")]
pub struct DistributionSpec {
    kind: SpecKind,
    parts: Vec<Part>,
    cumulative: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl From<DistributionSpec> for SpecKind {
    fn from(spec: DistributionSpec) -> Self {
        spec.kind
    }
}

impl TryFrom<SpecKind> for DistributionSpec {
    type Error = Error;

    fn try_from(kind: SpecKind) -> Result<Self> {
        DistributionSpec::new(kind)
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be finite, got {v}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Checks that `items` (center, weight, shape) is closed under `x -> 2c - x`
/// with matched weight and shape.
fn check_reflection_closed(center: f64, items: &[(f64, f64, f64)], what: &str) -> Result<()> {
    let scale = items.iter().map(|it| it.0.abs()).fold(center.abs(), f64::max).max(1.0);
    let tol = 1e-9 * scale;
    let mut used = alloc::vec![false; items.len()];
    for i in 0..items.len() {
        if used[i] {
            continue;
        }
        let (loc, w, shape) = items[i];
        let mirror = 2.0 * center - loc;
        let partner = (0..items.len()).find(|&j| {
            !used[j]
                && j != i
                && (items[j].0 - mirror).abs() <= tol
                && (items[j].1 - w).abs() <= WEIGHT_TOL
                && (items[j].2 - shape).abs() <= 1e-12 * shape.abs().max(1.0)
        });
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None if (loc - center).abs() <= tol => used[i] = true,
            None => {
                return Err(Error::InvalidSpec(format!(
                    "{what} at {loc} (weight {w}) has no mirror image about {center}"
                )))
            }
        }
    }
    Ok(())
}

impl DistributionSpec {
    /// Validates `kind` and precomputes its parts and moments.
    pub fn new(kind: SpecKind) -> Result<Self> {
        let (parts, mean) = match &kind {
            SpecKind::Gaussian { mu, sigma } => {
                check_finite("mu", *mu)?;
                check_positive("sigma", *sigma)?;
                (alloc::vec![Part::Normal { weight: 1.0, mean: *mu, sd: *sigma }], *mu)
            }
            SpecKind::Laplace { mu, b } => {
                check_finite("mu", *mu)?;
                check_positive("b", *b)?;
                (alloc::vec![Part::Laplace { weight: 1.0, mean: *mu, scale: *b }], *mu)
            }
            SpecKind::GaussianMixture { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidSpec("mixture needs at least one component".into()));
                }
                for c in components {
                    check_finite("component mu", c.mu)?;
                    check_positive("component sigma", c.sigma)?;
                    if !(c.weight > 0.0 && c.weight <= 1.0) {
                        return Err(Error::InvalidSpec(format!(
                            "component weight must lie in (0, 1], got {}",
                            c.weight
                        )));
                    }
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                check_total(total)?;
                let center: f64 = components.iter().map(|c| c.weight * c.mu).sum();
                let items: Vec<_> = components.iter().map(|c| (c.mu, c.weight, c.sigma)).collect();
                check_reflection_closed(center, &items, "mixture component")?;
                let parts = components
                    .iter()
                    .map(|c| Part::Normal { weight: c.weight, mean: c.mu, sd: c.sigma })
                    .collect();
                (parts, center)
            }
            SpecKind::GaussianWithAtoms { base_weight, base_mu, base_sigma, atoms } => {
                check_finite("base_mu", *base_mu)?;
                check_positive("base_sigma", *base_sigma)?;
                if !(*base_weight > 0.0 && *base_weight < 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "base_weight must lie in (0, 1), got {base_weight}"
                    )));
                }
                if atoms.is_empty() {
                    return Err(Error::InvalidSpec("at least one atom is required".into()));
                }
                check_atoms(atoms)?;
                let total = base_weight + atoms.iter().map(|a| a.weight).sum::<f64>();
                check_total(total)?;
                let items: Vec<_> = atoms.iter().map(|a| (a.location, a.weight, 0.0)).collect();
                check_reflection_closed(*base_mu, &items, "atom")?;
                let mut parts =
                    alloc::vec![Part::Normal { weight: *base_weight, mean: *base_mu, sd: *base_sigma }];
                parts.extend(atoms.iter().map(|a| Part::Atom { weight: a.weight, location: a.location }));
                (parts, *base_mu)
            }
            SpecKind::GaussianSawtooth { mu, sigma, tooth_width, tooth_mass, n_teeth } => {
                check_finite("mu", *mu)?;
                check_positive("sigma", *sigma)?;
                check_positive("tooth_width", *tooth_width)?;
                if !(0.0..1.0).contains(tooth_mass) {
                    return Err(Error::InvalidSpec(format!(
                        "tooth_mass must lie in [0, 1), got {tooth_mass}"
                    )));
                }
                if n_teeth % 2 == 0 {
                    return Err(Error::InvalidSpec(format!("n_teeth must be odd, got {n_teeth}")));
                }
                (sawtooth_parts(*mu, *sigma, *tooth_width, *tooth_mass, *n_teeth), *mu)
            }
            SpecKind::PointMasses { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidSpec("at least one atom is required".into()));
                }
                check_atoms(atoms)?;
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                check_total(total)?;
                let center: f64 = atoms.iter().map(|a| a.weight * a.location).sum();
                let items: Vec<_> = atoms.iter().map(|a| (a.location, a.weight, 0.0)).collect();
                check_reflection_closed(center, &items, "atom")?;
                let parts =
                    atoms.iter().map(|a| Part::Atom { weight: a.weight, location: a.location }).collect();
                (parts, center)
            }
        };
        let variance = parts
            .iter()
            .map(|p| {
                let d = p.center() - mean;
                p.weight() * (p.own_variance() + d * d)
            })
            .sum::<f64>();
        if !variance.is_finite() || variance < 0.0 {
            return Err(Error::InvalidSpec(format!("variance must be finite, got {variance}")));
        }
        let mut cumulative = Vec::with_capacity(parts.len());
        let mut acc = 0.0;
        for p in &parts {
            acc += p.weight();
            cumulative.push(acc);
        }
        Ok(Self { kind, parts, cumulative, mean, variance })
    }

    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(SpecKind::Gaussian { mu, sigma })
    }

    pub fn laplace(mu: f64, b: f64) -> Result<Self> {
        Self::new(SpecKind::Laplace { mu, b })
    }

    /// Mixture from `(weight, mu, sigma)` triples.
    pub fn gaussian_mixture(components: &[(f64, f64, f64)]) -> Result<Self> {
        Self::new(SpecKind::GaussianMixture {
            components: components
                .iter()
                .map(|&(weight, mu, sigma)| MixtureComponent { weight, mu, sigma })
                .collect(),
        })
    }

    /// Gaussian base plus `(weight, location)` atoms.
    pub fn gaussian_with_atoms(
        base_weight: f64,
        base_mu: f64,
        base_sigma: f64,
        atoms: &[(f64, f64)],
    ) -> Result<Self> {
        Self::new(SpecKind::GaussianWithAtoms {
            base_weight,
            base_mu,
            base_sigma,
            atoms: atoms.iter().map(|&(weight, location)| Atom { weight, location }).collect(),
        })
    }

    pub fn gaussian_sawtooth(
        mu: f64,
        sigma: f64,
        tooth_width: f64,
        tooth_mass: f64,
        n_teeth: u32,
    ) -> Result<Self> {
        Self::new(SpecKind::GaussianSawtooth { mu, sigma, tooth_width, tooth_mass, n_teeth })
    }

    pub fn point_masses(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(SpecKind::PointMasses {
            atoms: atoms.iter().map(|&(weight, location)| Atom { weight, location }).collect(),
        })
    }

    pub fn kind(&self) -> &SpecKind {
        &self.kind
    }

    /// The flattened weighted parts.
    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    /// The symmetry center.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        sqrt(self.variance)
    }

    /// Density of the absolutely continuous part. Atoms are not included.
    pub fn pdf(&self, x: f64) -> f64 {
        self.parts.iter().map(|p| p.pdf(x)).sum()
    }

    /// The point masses of the distribution as `(weight, location)`.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        self.parts
            .iter()
            .filter_map(|p| match *p {
                Part::Atom { weight, location } => Some((weight, location)),
                _ => None,
            })
            .collect()
    }

    /// One draw.
    pub fn sample_one(&self, rng: &mut RngStream) -> f64 {
        let part = if self.parts.len() == 1 {
            &self.parts[0]
        } else {
            let u = rng.next_f64() * self.cumulative[self.cumulative.len() - 1];
            let idx = self.cumulative.partition_point(|&c| c <= u).min(self.parts.len() - 1);
            &self.parts[idx]
        };
        part.sample(rng)
    }

    /// `count` i.i.d. draws.
    pub fn sample(&self, rng: &mut RngStream, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }

    /// Compact label, e.g. `gaussian:0,1`.
    pub fn label(&self) -> String {
        match &self.kind {
            SpecKind::Gaussian { mu, sigma } => format!("gaussian:{mu},{sigma}"),
            SpecKind::Laplace { mu, b } => format!("laplace:{mu},{b}"),
            SpecKind::GaussianMixture { components } => {
                let body: Vec<String> =
                    components.iter().map(|c| format!("{},{},{}", c.weight, c.mu, c.sigma)).collect();
                format!("mixture:{}", body.join(";"))
            }
            SpecKind::GaussianWithAtoms { base_weight, base_mu, base_sigma, atoms } => {
                let body: Vec<String> =
                    atoms.iter().map(|a| format!(";{},{}", a.weight, a.location)).collect();
                format!("atoms:{base_weight},{base_mu},{base_sigma}{}", body.concat())
            }
            SpecKind::GaussianSawtooth { mu, sigma, tooth_width, tooth_mass, n_teeth } => {
                format!("sawtooth:{mu},{sigma},{tooth_width},{tooth_mass},{n_teeth}")
            }
            SpecKind::PointMasses { atoms } => {
                let body: Vec<String> =
                    atoms.iter().map(|a| format!("{},{}", a.weight, a.location)).collect();
                format!("points:{}", body.join(";"))
            }
        }
    }
}

fn check_atoms(atoms: &[Atom]) -> Result<()> {
    for a in atoms {
        check_finite("atom location", a.location)?;
        if !(a.weight > 0.0 && a.weight <= 1.0) {
            return Err(Error::InvalidSpec(format!("atom weight must lie in (0, 1], got {}", a.weight)));
        }
    }
    Ok(())
}

fn check_total(total: f64) -> Result<()> {
    if (total - 1.0).abs() <= WEIGHT_TOL {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("weights must sum to 1, got {total}")))
    }
}

fn sawtooth_parts(mu: f64, sigma: f64, width: f64, mass: f64, n_teeth: u32) -> Vec<Part> {
    let half_count = i64::from(n_teeth / 2);
    let raw: Vec<f64> =
        (-half_count..=half_count).map(|k| gaussian_pdf(mu + k as f64 * width, mu, sigma)).collect();
    let total: f64 = raw.iter().sum();
    let mut parts = Vec::with_capacity(raw.len() + 1);
    if mass < 1.0 {
        parts.push(Part::Normal { weight: 1.0 - mass, mean: mu, sd: sigma });
    }
    if mass > 0.0 {
        for (k, w) in (-half_count..=half_count).zip(raw) {
            parts.push(Part::Triangle { weight: mass * w / total, center: mu + k as f64 * width, width });
        }
    }
    parts
}

/// The specs used for property sweeps across the crate.
pub fn bundled_specs() -> Vec<DistributionSpec> {
    alloc::vec![
        DistributionSpec::gaussian(0.0, 1.0).unwrap(),
        DistributionSpec::laplace(0.0, 1.0).unwrap(),
        DistributionSpec::gaussian_mixture(&[(0.5, -1.0, 1.0), (0.5, 1.0, 1.0)]).unwrap(),
        DistributionSpec::gaussian_mixture(&[(0.5, 0.0, 0.1), (0.5, 0.0, 10.0)]).unwrap(),
        DistributionSpec::gaussian_with_atoms(0.98, 0.0, 1.0, &[(0.01, -10.0), (0.01, 10.0)]).unwrap(),
        DistributionSpec::gaussian_sawtooth(0.0, 1.0, 0.05, 0.5, 41).unwrap(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use approx::assert_relative_eq;

    #[test]
    fn means_are_symmetry_centers() {
        assert_eq!(DistributionSpec::gaussian(0.0, 1.0).unwrap().mean(), 0.0);
        let mix = DistributionSpec::gaussian_mixture(&[(0.5, -1.0, 1.0), (0.5, 1.0, 1.0)]).unwrap();
        assert_eq!(mix.mean(), 0.0);
        let atoms =
            DistributionSpec::gaussian_with_atoms(0.98, 0.0, 1.0, &[(0.01, -10.0), (0.01, 10.0)]).unwrap();
        assert_eq!(atoms.mean(), 0.0);
    }

    #[test]
    fn variances_follow_moment_formula() {
        assert_eq!(DistributionSpec::gaussian(0.0, 2.0).unwrap().variance(), 4.0);
        let atoms =
            DistributionSpec::gaussian_with_atoms(0.98, 0.0, 1.0, &[(0.01, -10.0), (0.01, 10.0)]).unwrap();
        assert_relative_eq!(atoms.variance(), 2.98, max_relative = 1e-14);
        let mix = DistributionSpec::gaussian_mixture(&[(0.5, 0.0, 0.1), (0.5, 0.0, 10.0)]).unwrap();
        assert_relative_eq!(mix.variance(), 50.005, max_relative = 1e-14);
        assert_eq!(DistributionSpec::laplace(3.0, 1.5).unwrap().variance(), 4.5);
    }

    #[test]
    fn sawtooth_variance_matches_quadrature_of_density() {
        let spec = DistributionSpec::gaussian_sawtooth(0.2, 1.0, 0.05, 0.5, 41).unwrap();
        let rule = GaussLegendre::new(8);
        // piecewise-linear teeth: integrate exactly on every half-tooth, Gaussian on fine panels
        let mut knots: Vec<f64> = (0..=1200).map(|i| 0.2 - 12.0 + i as f64 * 0.02).collect();
        for k in -21..=21 {
            knots.push(0.2 + k as f64 * 0.05 + 0.025);
            knots.push(0.2 + k as f64 * 0.05);
        }
        knots.sort_by(f64::total_cmp);
        let mut mass = 0.0;
        let mut second = 0.0;
        for w in knots.windows(2) {
            mass += rule.integrate(w[0], w[1], |x| spec.pdf(x));
            second += rule.integrate(w[0], w[1], |x| (x - 0.2) * (x - 0.2) * spec.pdf(x));
        }
        assert_relative_eq!(mass, 1.0, max_relative = 1e-12);
        assert_relative_eq!(second, spec.variance(), max_relative = 1e-12);
    }

    #[test]
    fn pdf_examples() {
        let g = DistributionSpec::gaussian(0.0, 1.0).unwrap();
        assert_relative_eq!(g.pdf(0.0), 0.398_942_280_401_432_7, max_relative = 1e-15);
        let l = DistributionSpec::laplace(0.0, 1.0).unwrap();
        assert_eq!(l.pdf(0.0), 0.5);
        let atoms =
            DistributionSpec::gaussian_with_atoms(0.98, 0.0, 1.0, &[(0.01, -10.0), (0.01, 10.0)]).unwrap();
        assert_relative_eq!(atoms.pdf(10.0), 0.98 * g.pdf(10.0), max_relative = 1e-15);
    }

    #[test]
    fn rejects_asymmetric_or_unnormalized_specs() {
        assert!(DistributionSpec::gaussian_mixture(&[(0.5, 0.0, 1.0), (0.5, 1.0, 2.0)]).is_err());
        assert!(DistributionSpec::gaussian_mixture(&[(0.5, 0.0, 1.0), (0.4, 0.0, 2.0)]).is_err());
        assert!(DistributionSpec::gaussian_with_atoms(0.98, 0.0, 1.0, &[(0.01, -10.0), (0.01, 9.0)]).is_err());
        assert!(DistributionSpec::gaussian_sawtooth(0.0, 1.0, 0.05, 0.5, 40).is_err());
        assert!(DistributionSpec::gaussian(0.0, 0.0).is_err());
        assert!(DistributionSpec::laplace(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn sample_count_zero_is_empty() {
        let mut rng = RngStream::new(0, 0, 0);
        assert!(DistributionSpec::gaussian(0.0, 1.0).unwrap().sample(&mut rng, 0).is_empty());
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let spec = bundled_specs().remove(5);
        let a = spec.sample(&mut RngStream::new(3, 1, 9), 100);
        let b = spec.sample(&mut RngStream::new(3, 1, 9), 100);
        let c = spec.sample(&mut RngStream::new(3, 1, 10), 100);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let spec = DistributionSpec::gaussian_sawtooth(0.0, 1.0, 0.05, 0.5, 41).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"gaussian_sawtooth\""));
        let back: DistributionSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let defaulted: DistributionSpec =
            serde_json::from_str(r#"{"kind":"gaussian_sawtooth","mu":0,"sigma":1,"tooth_width":0.05}"#)
                .unwrap();
        assert_eq!(defaulted, spec);
        let bad = serde_json::from_str::<DistributionSpec>(r#"{"kind":"gaussian","mu":0,"sigma":-1}"#);
        assert!(bad.is_err());
    }
}
