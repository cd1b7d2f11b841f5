//! Device-to-Earth frame transformation and gait channel synthesis.
//!
//! Each gravity-free acceleration sample is multiplied, as a row vector, by
//! the rotation matrix built from the orientation sensor's (α, β, γ) angles.
//! The result is expressed in a frame whose Z axis is vertical, which makes
//! the vertical channel and the horizontal magnitude independent of how the
//! phone sits in the pocket.

use std::io::Write;

use crate::error::{GaitError, Result};
use crate::ingest::{AlignedFrame, Vec3};
use crate::num::Real;

/// A 3×3 rotation, stored row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix<T> {
    pub r: [[T; 3]; 3],
}

impl<T: Real> RotationMatrix<T> {
    pub fn identity() -> Self {
        let (o, i) = (T::zero(), T::one());
        RotationMatrix {
            r: [[i, o, o], [o, i, o], [o, o, i]],
        }
    }

    pub fn transpose(&self) -> Self {
        RotationMatrix {
            r: std::array::from_fn(|i| std::array::from_fn(|j| self.r[j][i])),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        RotationMatrix {
            r: std::array::from_fn(|i| {
                std::array::from_fn(|j| (0..3).map(|k| self.r[i][k] * other.r[k][j]).sum())
            }),
        }
    }

    pub fn det(&self) -> T {
        let m = &self.r;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Row-vector product `v·R`.
    pub fn apply_row(&self, v: &Vec3<T>) -> Vec3<T> {
        std::array::from_fn(|j| (0..3).map(|i| v[i] * self.r[i][j]).sum())
    }
}

/// Vertical, horizontal-magnitude and total-magnitude gait channels.
#[derive(Clone, Debug, PartialEq)]
pub struct GaitSignal<T> {
    pub rate_hz: T,
    pub z: Vec<T>,
    pub xy: Vec<T>,
    pub m: Vec<T>,
}

impl<T: Real> GaitSignal<T> {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Debug dump as CSV `t_ms,z,xy,m`, with t measured from the first sample.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_ms", "z", "xy", "m"])?;
        let dt = T::lit(1000.0) / self.rate_hz;
        for i in 0..self.len() {
            w.write_record([
                (T::from_usize_lossy(i) * dt).to_string(),
                self.z[i].to_string(),
                self.xy[i].to_string(),
                self.m[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| GaitError::io("<signal writer>", e))?;
        Ok(())
    }
}

/// `a ← a − g` for every frame; the gravity vector is kept.
pub fn remove_gravity<T: Real>(frames: &[AlignedFrame<T>]) -> Vec<AlignedFrame<T>> {
    frames
        .iter()
        .map(|f| AlignedFrame {
            a: std::array::from_fn(|i| f.a[i] - f.g[i]),
            ..*f
        })
        .collect()
}

/// Rotation matrix for orientation angles (α, β, γ) in degrees, α about Z,
/// β about X and γ about Y.
pub fn rotation_matrix<T: Real>(o: &Vec3<T>) -> Result<RotationMatrix<T>> {
    if o.iter().any(|v| !v.is_finite()) {
        return Err(GaitError::NonFinite("orientation angle".into()));
    }
    let [alpha, beta, gamma] = o.map(|deg| deg.to_radians());
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    Ok(RotationMatrix {
        r: [
            [ca * cg - sa * sb * sg, sa * cb, ca * sg + sa * sb * cg],
            [-sa * cg - ca * sb * sg, ca * cb, -sa * sg + ca * sb * cg],
            [-cb * sg, -sb, cb * cg],
        ],
    })
}

/// Expresses a gravity-free device-frame sample in the Earth frame (`a·R`).
pub fn to_earth<T: Real>(a: &Vec3<T>, rotation: &RotationMatrix<T>) -> Vec3<T> {
    rotation.apply_row(a)
}

/// Builds the (Z, XY, M) channels from Earth-frame samples.
pub fn project_channels<T: Real>(earth: &[Vec3<T>], rate_hz: T) -> GaitSignal<T> {
    let mut signal = GaitSignal {
        rate_hz,
        z: Vec::with_capacity(earth.len()),
        xy: Vec::with_capacity(earth.len()),
        m: Vec::with_capacity(earth.len()),
    };
    for &[x, y, z] in earth {
        signal.z.push(z);
        signal.xy.push(x.hypot(y));
        signal.m.push((x * x + y * y + z * z).sqrt());
    }
    signal
}

/// Gravity removal followed by per-frame rotation into the Earth frame.
pub fn frames_to_earth<T: Real>(frames: &[AlignedFrame<T>]) -> Result<Vec<Vec3<T>>> {
    remove_gravity(frames)
        .iter()
        .map(|f| Ok(to_earth(&f.a, &rotation_matrix(&f.o)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(a: Vec3<f64>, g: Vec3<f64>) -> AlignedFrame<f64> {
        AlignedFrame {
            t: 0.0,
            a,
            g,
            o: [0.0; 3],
        }
    }

    fn close(a: &Vec3<f64>, b: &Vec3<f64>, tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn gravity_subtracted_componentwise() {
        let out = remove_gravity(&[frame([0.5, 9.81, 0.2], [0.0, 9.81, 0.0])]);
        assert_eq!(out[0].a, [0.5, 0.0, 0.2]);
        assert_eq!(out[0].g, [0.0, 9.81, 0.0]);
        let still = remove_gravity(&[frame([1.0, -2.0, 9.0], [1.0, -2.0, 9.0])]);
        assert_eq!(still[0].a, [0.0; 3]);
    }

    #[test]
    fn zero_angles_give_identity() {
        assert_eq!(rotation_matrix(&[0.0, 0.0, 0.0]).unwrap(), RotationMatrix::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = rotation_matrix(&[90.0, 0.0, 0.0]).unwrap();
        let expect = [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            assert!(close(&r.r[i], &expect[i], 1e-15));
        }
        assert!(close(&to_earth(&[1.0, 0.0, 0.0], &r), &[0.0, 1.0, 0.0], 1e-15));
    }

    #[test]
    fn non_finite_angle_rejected() {
        assert!(rotation_matrix(&[f64::NAN, 0.0, 0.0]).is_err());
        assert!(rotation_matrix(&[0.0, f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn pythagorean_channels() {
        let s = project_channels(&[[3.0, 4.0, 12.0], [0.0, 0.0, 0.0]], 27.0);
        assert_eq!((s.z[0], s.xy[0], s.m[0]), (12.0, 5.0, 13.0));
        assert_eq!((s.z[1], s.xy[1], s.m[1]), (0.0, 0.0, 0.0));
    }

    fn angles() -> impl Strategy<Value = Vec3<f64>> {
        [-720.0f64..720.0, -720.0f64..720.0, -720.0f64..720.0]
    }

    proptest! {
        #[test]
        fn rotations_are_orthonormal(o in angles()) {
            let r = rotation_matrix(&o).unwrap();
            let rtr = r.transpose().mul(&r);
            let id = RotationMatrix::<f64>::identity();
            for i in 0..3 {
                prop_assert!(close(&rtr.r[i], &id.r[i], 1e-9));
            }
            prop_assert!((r.det() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn rotation_preserves_norm(o in angles(), a in [-20.0f64..20.0, -20.0f64..20.0, -20.0f64..20.0]) {
            let e = to_earth(&a, &rotation_matrix(&o).unwrap());
            let n = |v: &Vec3<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((n(&e) - n(&a)).abs() < 1e-9);
        }

        #[test]
        fn gravity_removal_matches_elementwise(a in [-30.0f64..30.0, -30.0f64..30.0, -30.0f64..30.0],
                                               g in [-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0]) {
            let out = remove_gravity(&[frame(a, g)]);
            for i in 0..3 {
                prop_assert_eq!(out[0].a[i], a[i] - g[i]);
            }
        }

        #[test]
        fn magnitude_splits_into_channels(v in proptest::collection::vec([-30.0f64..30.0, -30.0f64..30.0, -30.0f64..30.0], 1..50)) {
            let s = project_channels(&v, 27.0);
            for i in 0..v.len() {
                prop_assert!((s.m[i].powi(2) - s.xy[i].powi(2) - s.z[i].powi(2)).abs() < 1e-9);
                prop_assert!(s.xy[i] >= 0.0 && s.m[i] >= 0.0);
                prop_assert!(s.m[i] >= s.z[i].abs().max(s.xy[i]) - 1e-9);
            }
        }

        #[test]
        fn magnitude_is_orientation_free(o in angles(), v in proptest::collection::vec([-30.0f64..30.0, -30.0f64..30.0, -30.0f64..30.0], 1..50)) {
            let r = rotation_matrix(&o).unwrap();
            let earth: Vec<_> = v.iter().map(|a| to_earth(a, &r)).collect();
            let dev = project_channels(&v, 27.0);
            let ear = project_channels(&earth, 27.0);
            for i in 0..v.len() {
                prop_assert!((dev.m[i] - ear.m[i]).abs() < 1e-9);
            }
        }
    }
}
