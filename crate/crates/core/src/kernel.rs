//! Collision kernels `B(v, w, e) = C_lambda |v - w|^lambda b(cos theta)` and the
//! elastic collision transformation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::Velocity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Maxwell,
    HardSpheres,
    Vhs,
}

impl KernelFamily {
    /// Stable identifier used by the binary cache.
    pub fn id(&self) -> u32 {
        match self {
            KernelFamily::Maxwell => 0,
            KernelFamily::HardSpheres => 1,
            KernelFamily::Vhs => 2,
        }
    }

    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            0 => Some(KernelFamily::Maxwell),
            1 => Some(KernelFamily::HardSpheres),
            2 => Some(KernelFamily::Vhs),
            _ => None,
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Maxwell => "maxwell",
            KernelFamily::HardSpheres => "hard-spheres",
            KernelFamily::Vhs => "vhs",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "maxwell" => Ok(KernelFamily::Maxwell),
            "hard-spheres" | "hardspheres" | "hs" => Ok(KernelFamily::HardSpheres),
            "vhs" => Ok(KernelFamily::Vhs),
            other => Err(Error::config("kernel", format!("unknown kernel family {other:?}"))),
        }
    }
}

/// Variable-hard-spheres kernel with isotropic scattering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    c_lambda: f64,
    lambda: f64,
}

/// Default prefactor `1/(4 pi)`.
pub const DEFAULT_C_LAMBDA: f64 = 1.0 / (4.0 * PI);

impl KernelSpec {
    pub fn maxwell() -> Self {
        Self {
            family: KernelFamily::Maxwell,
            c_lambda: DEFAULT_C_LAMBDA,
            lambda: 0.0,
        }
    }

    pub fn hard_spheres() -> Self {
        Self {
            family: KernelFamily::HardSpheres,
            c_lambda: DEFAULT_C_LAMBDA,
            lambda: 1.0,
        }
    }

    pub fn vhs(c_lambda: f64, lambda: f64) -> Result<Self> {
        Self::new(KernelFamily::Vhs, c_lambda, lambda)
    }

    pub fn new(family: KernelFamily, c_lambda: f64, lambda: f64) -> Result<Self> {
        if !(c_lambda > 0.0 && c_lambda.is_finite()) {
            return Err(Error::InvalidKernel(format!("C_lambda = {c_lambda} must be positive")));
        }
        if !(lambda > -3.0 && lambda <= 1.0) {
            return Err(Error::InvalidKernel(format!("lambda = {lambda} outside (-3, 1]")));
        }
        match family {
            KernelFamily::Maxwell if lambda != 0.0 => {
                Err(Error::InvalidKernel(format!("Maxwell kernel needs lambda = 0, got {lambda}")))
            }
            KernelFamily::HardSpheres if lambda != 1.0 => {
                Err(Error::InvalidKernel(format!("hard spheres need lambda = 1, got {lambda}")))
            }
            _ => Ok(Self {
                family,
                c_lambda,
                lambda,
            }),
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn c_lambda(&self) -> f64 {
        self.c_lambda
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Angular factor `b(cos theta)`; isotropic for every shipped family.
    #[inline]
    pub fn angular(&self, _cos_theta: f64) -> f64 {
        1.0
    }

    /// `C_lambda |u|^lambda` for relative speed `|u|`.
    #[inline]
    pub fn speed_factor(&self, speed: f64) -> f64 {
        if self.lambda == 0.0 {
            self.c_lambda
        } else if self.lambda == 1.0 {
            self.c_lambda * speed
        } else {
            self.c_lambda * speed.powf(self.lambda)
        }
    }

    /// Total cross section `int_{S^2} B de = 4 pi C_lambda |u|^lambda`.
    pub fn total_rate(&self, speed: f64) -> f64 {
        4.0 * PI * self.speed_factor(speed)
    }
}

/// `B(v, w, e)`.
pub fn kernel_eval(spec: &KernelSpec, v: &Velocity, w: &Velocity, e: &Velocity) -> Result<f64> {
    let u = v - w;
    let speed = u.norm();
    if speed == 0.0 {
        if spec.lambda < 0.0 {
            return Err(Error::SingularKernel { lambda: spec.lambda });
        }
        return Ok(spec.speed_factor(0.0) * spec.angular(0.0));
    }
    let cos_theta = u.dot(e) / speed;
    Ok(spec.speed_factor(speed) * spec.angular(cos_theta))
}

/// `v' = (v + w + |u| e)/2`, `w' = (v + w - |u| e)/2`.
pub fn post_collision(v: &Velocity, w: &Velocity, e: &Velocity) -> (Velocity, Velocity) {
    let center = (v + w) * 0.5;
    let half = e * (0.5 * (v - w).norm());
    (center + half, center - half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn kernel_examples() {
        let e = Velocity::new(0.0, 0.0, 1.0);
        let m = KernelSpec::maxwell();
        let b = kernel_eval(&m, &Velocity::new(1.0, 2.0, 3.0), &Velocity::new(-1.0, 0.5, 0.0), &e).unwrap();
        assert_relative_eq!(b, 1.0 / (4.0 * PI), max_relative = 1e-15);
        assert_relative_eq!(b, 0.079_577_5, epsilon = 1e-7);
        let hs = KernelSpec::hard_spheres();
        let b = kernel_eval(&hs, &Velocity::new(1.0, 0.0, 0.0), &Velocity::new(-1.0, 0.0, 0.0), &e).unwrap();
        assert_relative_eq!(b, 0.159_154_9, epsilon = 1e-7);
        let vhs = KernelSpec::vhs(DEFAULT_C_LAMBDA, 0.5).unwrap();
        let b = kernel_eval(&vhs, &Velocity::new(4.0, 0.0, 0.0), &Velocity::zeros(), &e).unwrap();
        assert_relative_eq!(b, 2.0 / (4.0 * PI), max_relative = 1e-15);
    }

    #[test]
    fn soft_potential_singularity() {
        let soft = KernelSpec::vhs(1.0, -1.0).unwrap();
        let v = Velocity::new(0.5, 0.5, 0.5);
        assert!(matches!(
            kernel_eval(&soft, &v, &v, &Velocity::new(1.0, 0.0, 0.0)),
            Err(Error::SingularKernel { .. })
        ));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(KernelSpec::vhs(1.0, -3.0).is_err());
        assert!(KernelSpec::vhs(1.0, 1.5).is_err());
        assert!(KernelSpec::vhs(0.0, 0.5).is_err());
        assert!(KernelSpec::new(KernelFamily::Maxwell, 1.0, 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::HardSpheres, 1.0, 0.0).is_err());
    }

    #[test]
    fn family_parsing() {
        assert_eq!("hard_spheres".parse::<KernelFamily>().unwrap(), KernelFamily::HardSpheres);
        assert_eq!("Maxwell".parse::<KernelFamily>().unwrap(), KernelFamily::Maxwell);
        assert!("coulomb".parse::<KernelFamily>().is_err());
        for f in [KernelFamily::Maxwell, KernelFamily::HardSpheres, KernelFamily::Vhs] {
            assert_eq!(KernelFamily::from_id(f.id()), Some(f));
            assert_eq!(f.to_string().parse::<KernelFamily>().unwrap(), f);
        }
    }

    #[test]
    fn collision_examples() {
        let (vp, wp) = post_collision(
            &Velocity::new(1.0, 0.0, 0.0),
            &Velocity::new(-1.0, 0.0, 0.0),
            &Velocity::new(0.0, 1.0, 0.0),
        );
        assert_eq!(vp, Velocity::new(0.0, 1.0, 0.0));
        assert_eq!(wp, Velocity::new(0.0, -1.0, 0.0));

        let v = Velocity::new(0.3, 1.2, -0.7);
        let w = Velocity::new(-1.1, 0.4, 0.2);
        let e = (v - w).normalize();
        let (vp, wp) = post_collision(&v, &w, &e);
        assert!((vp - v).norm() < 1e-15 && (wp - w).norm() < 1e-15);
    }

    fn unit(a: f64, b: f64) -> Velocity {
        let ct = 2.0 * b - 1.0;
        let st = (1.0 - ct * ct).sqrt();
        Velocity::new(st * a.cos(), st * a.sin(), ct)
    }

    proptest! {
        #[test]
        fn collisions_conserve(
            v in proptest::array::uniform3(-5.0f64..5.0),
            w in proptest::array::uniform3(-5.0f64..5.0),
            a in 0.0f64..6.283, b in 0.0f64..1.0,
        ) {
            let (v, w, e) = (Velocity::from(v), Velocity::from(w), unit(a, b));
            let (vp, wp) = post_collision(&v, &w, &e);
            prop_assert!(((vp + wp) - (v + w)).norm() < 1e-13);
            let en = v.norm_squared() + w.norm_squared();
            prop_assert!((vp.norm_squared() + wp.norm_squared() - en).abs() < 1e-13 * en.max(1.0));
            prop_assert!(((vp - wp).norm() - (v - w).norm()).abs() < 1e-13);
            // |v' - v|^2 = |w' - w|^2 = |u|^2 (1 - cos theta) / 2
            let u = v - w;
            if u.norm() > 1e-6 {
                let cos = u.dot(&e) / u.norm();
                let want = u.norm_squared() * (1.0 - cos) / 2.0;
                prop_assert!(((vp - v).norm_squared() - want).abs() < 1e-12 * want.max(1.0));
                prop_assert!(((wp - w).norm_squared() - want).abs() < 1e-12 * want.max(1.0));
            }
        }

        #[test]
        fn kernel_swap_symmetry(
            v in proptest::array::uniform3(-5.0f64..5.0),
            w in proptest::array::uniform3(-5.0f64..5.0),
            lambda in -2.9f64..1.0, a in 0.0f64..6.283, b in 0.0f64..1.0,
        ) {
            let spec = KernelSpec::vhs(0.3, lambda).unwrap();
            let (v, w, e) = (Velocity::from(v), Velocity::from(w), unit(a, b));
            prop_assume!((v - w).norm() > 1e-9);
            prop_assert_eq!(kernel_eval(&spec, &v, &w, &e).unwrap(), kernel_eval(&spec, &w, &v, &e).unwrap());
        }
    }
}
