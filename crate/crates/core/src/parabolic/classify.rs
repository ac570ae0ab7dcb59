use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::frame::orient;
use crate::error::{GeomError, GeomResult};
use crate::immersion::{bilinear, GeometrySample, NullityData};
use crate::linalg::{singular_values, sym2_eigen};
use crate::tolerances::Tolerances;

/// Root matches farther apart than `class_tol` but within this multiple of
/// it are treated as undecidable.
const MARGINAL_BAND: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rank2Kind {
    Elliptic,
    Parabolic,
    Hyperbolic,
    Degenerate,
}

impl Rank2Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Rank2Kind::Elliptic => "elliptic",
            Rank2Kind::Parabolic => "parabolic",
            Rank2Kind::Hyperbolic => "hyperbolic",
            Rank2Kind::Degenerate => "degenerate",
        }
    }
}

/// Classification of the second fundamental form restricted to Δ^⊥.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rank2Classification {
    pub kind: Rank2Kind,
    /// Unit tangent vectors (chart coordinates) with `α(Z, Z) = 0`.
    pub asymptotic_directions: Vec<Vec<f64>>,
    /// `|α(Z, Z)| / ‖α‖` for each direction.
    pub residuals: Vec<f64>,
    pub first_normal_dim: usize,
    pub first_normal_singular_values: Vec<f64>,
    /// Angle between the pencil's annihilator and the nearest `v ⊗ v`,
    /// i.e. the angular distance of the pencil from having a common root.
    pub root_mismatch: f64,
    /// Determinant of the unit symmetric tensor annihilating the pencil of
    /// normal components: positive, zero or negative.
    pub annihilator_det: f64,
    pub marginal: bool,
}

pub fn asymptotic_directions(
    sample: &GeometrySample,
    nullity: &NullityData,
    class_tol: f64,
) -> GeomResult<Rank2Classification> {
    let tol = Tolerances {
        class_tol,
        ..Tolerances::default()
    };
    asymptotic_directions_with(sample, nullity, &tol)
}

pub fn asymptotic_directions_with(
    sample: &GeometrySample,
    nullity: &NullityData,
    tol: &Tolerances,
) -> GeomResult<Rank2Classification> {
    if nullity.rank != 2 {
        return Err(GeomError::RankDeficient(format!("rank {} (expected 2)", nullity.rank)));
    }
    if nullity.marginal {
        return Err(GeomError::Marginal("relative nullity rank is marginal".into()));
    }
    let u = &nullity.complement_basis;
    let codim = sample.codim();
    let s2 = std::f64::consts::SQRT_2;
    // columns: (q11, √2 q12, q22) of each normal component
    let coeffs = DMatrix::from_fn(3, codim, |row, k| {
        let b = &sample.sff[k];
        match row {
            0 => bilinear(b, &u[0], &u[0]),
            1 => s2 * bilinear(b, &u[0], &u[1]),
            _ => bilinear(b, &u[1], &u[1]),
        }
    });
    let sv = singular_values(&coeffs);
    let top = sv.first().copied().unwrap_or(0.0);
    let n1 = if top <= f64::MIN_POSITIVE {
        0
    } else {
        sv.iter().filter(|&&s| s > tol.nullity_tol * top).count()
    };
    if n1 != 2 {
        return Err(GeomError::NormalSpaceDim(n1));
    }
    // The annihilator spans the kernel of M Mᵀ; the symmetric eigensolver
    // resolves it reliably even when the third singular value is at
    // round-off level.
    let eig = SymmetricEigen::new(&coeffs * coeffs.transpose());
    let kmin = (0..3)
        .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .expect("three eigenvalues");
    let k = eig.eigenvectors.column(kmin).normalize();
    let (k11, k12, k22) = (k[0], k[1] / s2, k[2]);
    let annihilator_det = k11 * k22 - k12 * k12;

    // Forms vanishing on `v` are exactly those orthogonal to `v ⊗ v`, so a
    // common root exists iff the annihilator has rank one.
    let (kl, _) = sym2_eigen(k11, k12, k22);
    let big = kl[0].abs().max(kl[1].abs());
    let small = kl[0].abs().min(kl[1].abs());
    let root_mismatch = (small / small.hypot(big)).asin();
    let common = usize::from(root_mismatch <= tol.class_tol);
    let marginal = common == 0 && root_mismatch < MARGINAL_BAND * tol.class_tol;

    let mut directions = Vec::new();
    let mut residuals = Vec::new();
    let kind = if marginal {
        Rank2Kind::Degenerate
    } else {
        match common {
            0 => Rank2Kind::Elliptic,
            1 => Rank2Kind::Parabolic,
            _ => Rank2Kind::Hyperbolic,
        }
    };
    if kind == Rank2Kind::Parabolic {
        // The annihilator is rank one, `v ⊗ v`, with `v` the common root.
        let (l, v) = sym2_eigen(k11, k12, k22);
        let dir = if l[0].abs() > l[1].abs() { v[0] } else { v[1] };
        let z: Vec<f64> = (0..sample.intrinsic_dim())
            .map(|i| dir[0] * u[0][i] + dir[1] * u[1][i])
            .collect();
        let z = orient(z);
        let alpha_zz = sample.alpha_components(&z, &z);
        let norm = alpha_zz.iter().map(|x| x * x).sum::<f64>().sqrt();
        residuals.push(norm / nullity.alpha_norm.max(f64::MIN_POSITIVE));
        directions.push(z);
    }
    Ok(Rank2Classification {
        kind,
        asymptotic_directions: directions,
        residuals,
        first_normal_dim: n1,
        first_normal_singular_values: sv,
        root_mismatch,
        annihilator_det,
        marginal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::relative_nullity;
    use std::f64::consts::PI;

/// Angle between two lines through the origin, in `[0, π/2]`.
fn line_angle(a: [f64; 2], b: [f64; 2]) -> f64 {
    let t = (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]).abs();
    if t > PI / 2.0 {
        PI - t
    } else {
        t
    }
}

    /// Surface sample with identity metric and the given forms on the two normals.
    pub(crate) fn synthetic(q1: [[f64; 2]; 2], q2: [[f64; 2]; 2]) -> GeometrySample {
        GeometrySample {
            point: vec![0.0, 0.0],
            order: 2,
            value: vec![0.0; 4],
            jacobian: vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]],
            metric: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            normal_frame: vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]],
            sff: vec![
                q1.iter().map(|r| r.to_vec()).collect(),
                q2.iter().map(|r| r.to_vec()).collect(),
            ],
            christoffels: None,
            third_partials: None,
            jacobian_singular_values: vec![1.0, 1.0],
        }
    }

    fn classify(q1: [[f64; 2]; 2], q2: [[f64; 2]; 2]) -> GeomResult<Rank2Classification> {
        let s = synthetic(q1, q2);
        let nd = relative_nullity(&s, 1e-8).unwrap();
        asymptotic_directions(&s, &nd, 1e-6)
    }

    #[test]
    fn canonical_pattern_is_parabolic() {
        let c = classify([[1.0, 1.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert_eq!(c.kind, Rank2Kind::Parabolic);
        assert_eq!(c.asymptotic_directions.len(), 1);
        let z = &c.asymptotic_directions[0];
        assert!(z[0].abs() < 1e-12 && (z[1] - 1.0).abs() < 1e-12);
        assert!(c.annihilator_det.abs() < 1e-12);
    }

    #[test]
    fn definite_form_gives_no_common_root() {
        let c = classify([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, -1.0]]).unwrap();
        assert_eq!(c.kind, Rank2Kind::Elliptic);
        assert!(c.asymptotic_directions.is_empty());
    }

    #[test]
    fn brute_force_scan_agrees() {
        let q1 = [[0.0, 1.0], [1.0, 0.0]];
        let q2 = [[1.0, 0.0], [0.0, 0.0]];
        let c = classify(q1, q2).unwrap();
        assert_eq!(c.kind, Rank2Kind::Parabolic);
        // oracle: minimize |q1(v)| + |q2(v)| over 10⁴ unit directions
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..10_000 {
            let t = PI * k as f64 / 10_000.0;
            let v = [t.cos(), t.sin()];
            let f = |q: [[f64; 2]; 2]| q[0][0] * v[0] * v[0] + 2.0 * q[0][1] * v[0] * v[1] + q[1][1] * v[1] * v[1];
            let m = f(q1).abs() + f(q2).abs();
            if m < best.0 {
                best = (m, t);
            }
        }
        let z = &c.asymptotic_directions[0];
        let oracle = [best.1.cos(), best.1.sin()];
        assert!(line_angle([z[0], z[1]], oracle) < 1e-3);
    }

    #[test]
    fn one_dimensional_normal_space_is_rejected() {
        let r = classify([[1.0, 0.0], [0.0, 1.0]], [[2.0, 0.0], [0.0, 2.0]]);
        assert!(matches!(r, Err(GeomError::NormalSpaceDim(1))));
    }

    #[test]
    fn near_parabolic_is_marginal() {
        // x(x − y) against (x − dy)(x + y): roots 1e-5 apart
        let d = 1e-5;
        let r = classify([[1.0, -0.5], [-0.5, 0.0]], [[1.0, (1.0 - d) / 2.0], [(1.0 - d) / 2.0, -d]]).unwrap();
        assert_eq!(r.kind, Rank2Kind::Degenerate);
        assert!(r.marginal);
        let far = classify([[1.0, -0.5], [-0.5, 0.0]], [[1.0, 0.45], [0.45, -0.1]]).unwrap();
        assert_eq!(far.kind, Rank2Kind::Elliptic);
    }
}
