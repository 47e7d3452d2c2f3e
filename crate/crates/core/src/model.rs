//! Problem definition: interface parameters, potentials, source terms, exact
//! solutions and initial data.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::NodalVector;
use crate::mesh::{DomainKind, Mesh, Point};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A free energy potential `W` with its analytic derivative `W'`.
#[derive(Clone)]
pub struct Potential {
    label: String,
    value: RealFn,
    derivative: RealFn,
}

impl Potential {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), value: Arc::new(value), derivative: Arc::new(derivative) }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0, |_| 0.0)
    }

    pub fn value(&self, s: f64) -> f64 {
        (self.value)(s)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        (self.derivative)(s)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential").field("label", &self.label).finish()
    }
}

/// `W(s) = scale·(s² − 1)²`, `W'(s) = 4·scale·s·(s² − 1)`.
pub fn double_well(scale: f64) -> Result<Potential> {
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument(format!("double-well scale must be positive, got {scale}")));
    }
    Ok(Potential::new(
        format!("double_well({scale})"),
        move |s| scale * (s * s - 1.0).powi(2),
        move |s| 4.0 * scale * s * (s * s - 1.0),
    ))
}

/// A scalar field of position and time.
#[derive(Clone)]
pub struct ScalarField(Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>);

impl ScalarField {
    pub fn new(f: impl Fn(Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_, _| c)
    }

    pub fn eval(&self, x: Point, t: f64) -> f64 {
        (self.0)(x, t)
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarField")
    }
}

/// A field together with its spatial gradient, as needed by the Ritz projection.
#[derive(Clone)]
pub struct SmoothField {
    pub value: ScalarField,
    pub gradient: Arc<dyn Fn(Point, f64) -> [f64; 2] + Send + Sync>,
}

impl SmoothField {
    pub fn new(
        value: impl Fn(Point, f64) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(Point, f64) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        Self { value: ScalarField::new(value), gradient: Arc::new(gradient) }
    }

    pub fn eval(&self, x: Point, t: f64) -> f64 {
        self.value.eval(x, t)
    }

    pub fn grad(&self, x: Point, t: f64) -> [f64; 2] {
        (self.gradient)(x, t)
    }
}

impl fmt::Debug for SmoothField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SmoothField")
    }
}

/// Bulk (`f_bulk`, `g_bulk`) and surface (`f_surf`, `g_surf`) inhomogeneities.
/// `f` drives the mass balance equations, `g` the chemical potential equations.
#[derive(Clone, Debug, Default)]
pub struct Sources {
    pub f_bulk: Option<ScalarField>,
    pub g_bulk: Option<ScalarField>,
    pub f_surf: Option<ScalarField>,
    pub g_surf: Option<ScalarField>,
}

impl Sources {
    pub fn is_empty(&self) -> bool {
        self.f_bulk.is_none() && self.g_bulk.is_none() && self.f_surf.is_none() && self.g_surf.is_none()
    }
}

#[derive(Clone, Debug)]
pub struct Problem {
    eps: f64,
    delta: f64,
    kappa: f64,
    pub w_bulk: Potential,
    pub w_surf: Potential,
    pub sources: Sources,
    pub exact_u: Option<SmoothField>,
    pub exact_w: Option<SmoothField>,
}

impl Problem {
    pub fn new(eps: f64, delta: f64, kappa: f64, w_bulk: Potential, w_surf: Potential) -> Result<Self> {
        for (name, v) in [("eps", eps), ("delta", delta), ("kappa", kappa)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { eps, delta, kappa, w_bulk, w_surf, sources: Sources::default(), exact_u: None, exact_w: None })
    }

    pub fn with_sources(mut self, sources: Sources) -> Self {
        self.sources = sources;
        self
    }

    pub fn with_exact(mut self, u: SmoothField, w: SmoothField) -> Self {
        self.exact_u = Some(u);
        self.exact_w = Some(w);
        self
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// `φ(t, x) = e^{−t} x₁ x₂`.
pub fn manufactured_phi(x: Point, t: f64) -> f64 {
    (-t).exp() * x[0] * x[1]
}

/// Manufactured problem on the unit disk with exact solution `u = w = e^{−t} x₁ x₂`
/// and double-well potentials of scale ¼.
///
/// On the unit circle `Δ_Γ φ = −4φ` and `∂_ν φ = 2φ`, which fixes the
/// surface source terms.
pub fn manufactured_disk_problem(eps: f64, delta: f64, kappa: f64) -> Result<Problem> {
    let w = double_well(0.25)?;
    let problem = Problem::new(eps, delta, kappa, w.clone(), w.clone())?;
    let (wb, ws) = (w.clone(), w);
    let sources = Sources {
        f_bulk: Some(ScalarField::new(|x, t| -manufactured_phi(x, t))),
        g_bulk: Some(ScalarField::new(move |x, t| {
            let p = manufactured_phi(x, t);
            p - wb.derivative(p) / eps
        })),
        f_surf: Some(ScalarField::new(|x, t| 5.0 * manufactured_phi(x, t))),
        g_surf: Some(ScalarField::new(move |x, t| {
            let p = manufactured_phi(x, t);
            (1.0 - 4.0 * delta * kappa - 2.0 * eps) * p - ws.derivative(p) / delta
        })),
    };
    let exact = || {
        SmoothField::new(manufactured_phi, |x, t| {
            let e = (-t).exp();
            [e * x[1], e * x[0]]
        })
    };
    Ok(problem.with_sources(sources).with_exact(exact(), exact()))
}

#[derive(Clone, Debug)]
pub enum InitialData {
    /// Diffuse elliptical droplet `tanh(s(x) / (√2 ε))`, with `s` an
    /// approximate signed distance to the ellipse, positive inside.
    Droplet {
        center: Point,
        semi_axes: [f64; 2],
    },
    /// Independent uniform values in `[−amplitude, amplitude]` per vertex.
    UniformRandom {
        amplitude: f64,
        seed: u64,
    },
    /// `sin(4πx₁)·cos(4πx₂)`.
    SineProduct,
    Custom(ScalarField),
}

impl InitialData {
    /// The droplet used for the unit-square simulations.
    pub fn default_droplet() -> Self {
        InitialData::Droplet { center: [0.1, 0.5], semi_axes: [0.3407, 0.1835] }
    }
}

/// Approximate signed distance to an axis-aligned ellipse: the level-set value
/// `1 − F(x)` divided by `|∇F(x)|`, with `F = Σ ((x_i − c_i)/a_i)²`.
pub fn ellipse_signed_distance(x: Point, center: Point, semi_axes: [f64; 2]) -> f64 {
    let d = [(x[0] - center[0]) / semi_axes[0], (x[1] - center[1]) / semi_axes[1]];
    let level = 1.0 - (d[0] * d[0] + d[1] * d[1]);
    let grad = [2.0 * d[0] / semi_axes[0], 2.0 * d[1] / semi_axes[1]];
    let gn = grad[0].hypot(grad[1]);
    if gn < 1e-12 {
        return f64::INFINITY;
    }
    level / gn
}

pub fn initial_field(data: &InitialData, mesh: &Mesh, problem: &Problem) -> Result<NodalVector> {
    let values: Vec<f64> = match data {
        InitialData::Droplet { center, semi_axes } => {
            if mesh.domain() != DomainKind::UnitSquare {
                return Err(Error::InvalidArgument("the droplet scenario is defined on the unit square".into()));
            }
            if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
                return Err(Error::InvalidArgument("droplet semi-axes must be positive".into()));
            }
            let width = std::f64::consts::SQRT_2 * problem.eps();
            mesh.vertices().iter().map(|&x| (ellipse_signed_distance(x, *center, *semi_axes) / width).tanh()).collect()
        }
        InitialData::UniformRandom { amplitude, seed } => {
            if !(*amplitude >= 0.0) {
                return Err(Error::InvalidArgument("random amplitude must be non-negative".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..mesh.n_vertices()).map(|_| rng.random_range(-*amplitude..=*amplitude)).collect()
        }
        InitialData::SineProduct => {
            use std::f64::consts::PI;
            mesh.vertices().iter().map(|x| (4.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos()).collect()
        }
        InitialData::Custom(f) => mesh.vertices().iter().map(|&x| f.eval(x, 0.0)).collect(),
    };
    if let Some((vertex, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Evaluation { vertex, value });
    }
    Ok(NodalVector::from(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_mesh;
    use proptest::prelude::*;

    #[test]
    fn double_well_values() {
        let w = double_well(0.25).unwrap();
        for s in [-1.0, 1.0] {
            assert_eq!(w.value(s), 0.0);
            assert_eq!(w.derivative(s), 0.0);
        }
        assert_eq!(w.derivative(2.0), 6.0);
        assert_eq!(double_well(0.125).unwrap().value(0.0), 0.125);
        assert!(double_well(0.0).is_err());
    }

    proptest! {
        #[test]
        fn double_well_derivative_matches_central_differences(s in -3.0f64..3.0, scale in 0.01f64..2.0) {
            let w = double_well(scale).unwrap();
            let h = 1e-5;
            let fd = (w.value(s + h) - w.value(s - h)) / (2.0 * h);
            let exact = w.derivative(s);
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn problem_rejects_non_positive_parameters() {
        let w = double_well(0.25).unwrap();
        assert!(Problem::new(0.0, 1.0, 1.0, w.clone(), w.clone()).is_err());
        assert!(Problem::new(1.0, -1.0, 1.0, w.clone(), w.clone()).is_err());
        assert!(Problem::new(1.0, 1.0, 1.0, w.clone(), w).is_ok());
    }

    #[test]
    fn manufactured_source_values() {
        let p = manufactured_disk_problem(1.0, 1.0, 1.0).unwrap();
        let s = &p.sources;
        let x = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
        assert!((s.f_surf.as_ref().unwrap().eval(x, 0.0) - 2.5).abs() < 1e-15);
        assert!((s.f_bulk.as_ref().unwrap().eval([0.5, 0.5], 0.0) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn sine_product_and_random_and_droplet() {
        let mesh = unit_square_mesh(8).unwrap();
        let w = double_well(0.125).unwrap();
        let problem = Problem::new(0.02, 0.02, 1.0, w.clone(), w).unwrap();

        let u = initial_field(&InitialData::SineProduct, &mesh, &problem).unwrap();
        let k = mesh.vertices().iter().position(|p| *p == [0.125, 0.0]).unwrap();
        assert!((u[k] - 1.0).abs() < 1e-15);

        let r = initial_field(&InitialData::UniformRandom { amplitude: 0.1, seed: 4 }, &mesh, &problem).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 0.1));
        let again = initial_field(&InitialData::UniformRandom { amplitude: 0.1, seed: 4 }, &mesh, &problem).unwrap();
        assert_eq!(r, again);

        let d = initial_field(&InitialData::default_droplet(), &unit_square_mesh(10).unwrap(), &problem).unwrap();
        let center = unit_square_mesh(10).unwrap().vertices().iter().position(|p| *p == [0.1, 0.5]).unwrap();
        assert!((d[center] - 1.0).abs() < 1e-12);
        assert!(d.iter().all(|v| v.abs() <= 1.0));

        let disk = crate::mesh::unit_disk_mesh(0).unwrap();
        assert!(initial_field(&InitialData::default_droplet(), &disk, &problem).is_err());
    }

    #[test]
    fn droplet_distance_sign() {
        let c = [0.1, 0.5];
        let a = [0.3407, 0.1835];
        assert!(ellipse_signed_distance([0.1, 0.5], c, a) > 0.0);
        assert!(ellipse_signed_distance([0.9, 0.9], c, a) < 0.0);
        // on the ellipse
        assert!(ellipse_signed_distance([0.1 + 0.3407, 0.5], c, a).abs() < 1e-12);
        // near the interface it approximates the true distance
        let s = ellipse_signed_distance([0.1 + 0.3407 - 0.01, 0.5], c, a);
        assert!((s - 0.01).abs() < 1e-3);
    }
}
