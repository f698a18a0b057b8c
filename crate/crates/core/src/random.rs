//! Seeded random fields and Lax states for tests and verification suites.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::lattice::{Boundary, Lattice, Mat, MatrixField};

pub fn random_matrix<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Mat {
    Mat::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
    })
}

pub fn random_real_matrix<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Mat {
    Mat::from_fn(dim, dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0) * scale, 0.0))
}

/// Independent random matrix at every fine site (no derivative information).
pub fn random_field<R: Rng>(rng: &mut R, lattice: Lattice, dim: usize, scale: f64) -> MatrixField {
    let values = (0..lattice.fine_len()).map(|_| random_matrix(rng, dim, scale)).collect();
    MatrixField::from_values(lattice, values).expect("lengths agree")
}

/// Smooth random field: a sum of a few Fourier modes with random matrix
/// amplitudes, carrying its exact derivative. Periodic lattices get
/// commensurate wavenumbers so the field is smooth across the seam.
pub fn smooth_random_field(rng: &mut ChaCha8Rng, lattice: Lattice, dim: usize, scale: f64, modes: usize) -> MatrixField {
    let length = lattice.sites() as f64 * lattice.eps();
    let origin = lattice.origin();
    let terms: Vec<(f64, Mat, Mat)> = (1..=modes)
        .map(|m| {
            let k = match lattice.boundary() {
                Boundary::Periodic => 2.0 * std::f64::consts::PI * m as f64 / length,
                Boundary::Decaying => rng.gen_range(0.2..1.5),
            };
            (k, random_matrix(rng, dim, scale / m as f64), random_matrix(rng, dim, scale / m as f64))
        })
        .collect();
    let t1 = terms.clone();
    MatrixField::from_fn_with_derivative(
        lattice,
        dim,
        move |x| {
            let y = x - origin;
            t1.iter().fold(Mat::zeros(dim, dim), |acc, (k, a, b)| {
                acc + a * Complex64::new((k * y).cos(), 0.0) + b * Complex64::new((k * y).sin(), 0.0)
            })
        },
        move |x| {
            let y = x - origin;
            terms.iter().fold(Mat::zeros(dim, dim), |acc, (k, a, b)| {
                acc - a * Complex64::new(k * (k * y).sin(), 0.0) + b * Complex64::new(k * (k * y).cos(), 0.0)
            })
        },
    )
}

/// Smooth bump vanishing identically within `margin` cells of both window
/// edges, with its exact derivative.
pub fn edge_bump(lattice: Lattice, margin: f64) -> (impl Fn(f64) -> f64 + Clone, impl Fn(f64) -> f64 + Clone) {
    let a = lattice.origin() + margin * lattice.eps();
    let b = lattice.origin() + (lattice.sites() as f64 - margin) * lattice.eps();
    let f = move |x: f64| {
        if x <= a || x >= b {
            0.0
        } else {
            let s = std::f64::consts::PI * (x - a) / (b - a);
            s.sin().powi(4)
        }
    };
    let df = move |x: f64| {
        if x <= a || x >= b {
            0.0
        } else {
            let w = std::f64::consts::PI / (b - a);
            let s = w * (x - a);
            4.0 * w * s.sin().powi(3) * s.cos()
        }
    };
    (f, df)
}

/// Multiply a field by a scalar profile with known derivative.
pub fn modulate(field: &MatrixField, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> MatrixField {
    let lattice = *field.lattice();
    let dim = field.dim();
    let profile = MatrixField::from_fn_with_derivative(
        lattice,
        dim,
        |x| Mat::identity(dim, dim) * Complex64::new(f(x), 0.0),
        |x| Mat::identity(dim, dim) * Complex64::new(df(x), 0.0),
    );
    profile.mul(field).expect("same lattice")
}

/// Random Lax state `(u, v)` with `v` near the identity.
///
/// On a decaying window the perturbation is switched off near both edges so
/// the state is vacuum (`u = 0`, `v = I`) there; periodic states are smooth
/// across the seam.
pub fn random_state(rng: &mut ChaCha8Rng, lattice: Lattice, dim: usize, amplitude: f64) -> (MatrixField, MatrixField) {
    let u = smooth_random_field(rng, lattice, dim, amplitude, 3);
    let w = smooth_random_field(rng, lattice, dim, amplitude, 3);
    let (u, w) = match lattice.boundary() {
        Boundary::Periodic => (u, w),
        Boundary::Decaying => {
            let margin = (lattice.sites() as f64 / 4.0).min(6.0);
            let (f, df) = edge_bump(lattice, margin);
            (modulate(&u, f.clone(), df.clone()), modulate(&w, f, df))
        }
    };
    let v = MatrixField::identity(lattice, dim).add(&w).expect("same lattice");
    (u, v)
}

/// Decaying-window state whose nonlocal charges vanish: `u = g(x+ε) - g(x)`
/// and `v = G(x) G(x-ε)⁻¹` with `g`, `G - I` compactly supported. Then `ω₁`
/// and `ω̄₀ - I` vanish on both vacuum ends, so sums of total differences of
/// dressing data carry no boundary terms.
pub fn charge_free_state(
    rng: &mut ChaCha8Rng,
    lattice: Lattice,
    dim: usize,
    amplitude: f64,
) -> (MatrixField, MatrixField) {
    let margin = (lattice.sites() as f64 / 4.0).min(6.0);
    let (f, df) = edge_bump(lattice, margin);
    let g = modulate(&smooth_random_field(rng, lattice, dim, amplitude, 3), f.clone(), df.clone());
    let bump = modulate(&smooth_random_field(rng, lattice, dim, amplitude, 3), f, df);
    let id = MatrixField::identity(lattice, dim);
    let big = id.add(&bump).expect("same lattice");
    let u = g.shift(1).sub(&g).expect("same lattice");
    let inv = id.add(&bump.shift(-1)).expect("same lattice").try_inverse().expect("near identity");
    let v = big.mul(&inv).expect("same lattice");
    (u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn same_seed_same_state() {
        let lat = Lattice::new(8, 0.5, 2, Boundary::Decaying).unwrap();
        let a = random_state(&mut ChaCha8Rng::seed_from_u64(9), lat, 2, 0.3);
        let b = random_state(&mut ChaCha8Rng::seed_from_u64(9), lat, 2, 0.3);
        assert_eq!(a, b);
    }

    #[test]
    fn decaying_state_is_vacuum_at_edges() {
        let lat = Lattice::new(16, 0.5, 2, Boundary::Decaying).unwrap();
        let (u, v) = random_state(&mut ChaCha8Rng::seed_from_u64(1), lat, 2, 0.3);
        assert_eq!(u.at(0).norm(), 0.0);
        assert_eq!(v.at(lat.fine_len() - 1), &Mat::identity(2, 2));
    }

    #[test]
    fn smooth_field_derivative_agrees_with_differences() {
        let lat = Lattice::new(16, 0.5, 16, Boundary::Periodic).unwrap();
        let f = smooth_random_field(&mut ChaCha8Rng::seed_from_u64(2), lat, 2, 1.0, 3);
        let fd = f.clone().without_derivative().derivative_x();
        let err = f.derivative_x().sub(&fd).unwrap().max_norm();
        // Taylor bound delta^2 k^3 / 6 with k up to 2.4
        assert!(err < 5e-3, "{err}");
    }
}
