//! Periodic crystal structures: lattice, atoms, coordinate conversions.
//!
//! Coordinates are stored cartesian in Å. Fractional coordinates are
//! computed on demand through the inverse lattice matrix.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::elements::MAX_ATOMIC_NUMBER;
use crate::math::{abs, floor, round, sqrt};
use crate::{Error, Result};

pub type Vec3 = [f64; 3];

pub const MIN_LATTICE_VOLUME: f64 = 1e-8;
/// Two atoms closer than this modulo the lattice are considered duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-4;

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    sqrt(dot(a, a))
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Lattice vectors stored as matrix rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    rows: [Vec3; 3],
    inverse: [Vec3; 3],
}

impl Lattice {
    pub fn new(rows: [Vec3; 3]) -> Result<Self> {
        if !rows.iter().all(|r| all_finite(r)) {
            return Err(Error::InvalidCrystal("lattice has non-finite components".into()));
        }
        let det = dot(rows[0], cross(rows[1], rows[2]));
        if abs(det) <= MIN_LATTICE_VOLUME {
            return Err(Error::DegenerateLattice(det));
        }
        // inverse = adjugate / det; columns of L^-1 are the reciprocal vectors
        let c0 = cross(rows[1], rows[2]);
        let c1 = cross(rows[2], rows[0]);
        let c2 = cross(rows[0], rows[1]);
        let inv_det = 1.0 / det;
        let mut inverse = [[0.0; 3]; 3];
        for r in 0..3 {
            inverse[r] = [c0[r] * inv_det, c1[r] * inv_det, c2[r] * inv_det];
        }
        Ok(Self { rows, inverse })
    }

    pub fn cubic(a: f64) -> Result<Self> {
        Self::orthorhombic(a, a, a)
    }

    pub fn orthorhombic(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    pub fn rows(&self) -> &[Vec3; 3] {
        &self.rows
    }

    pub fn determinant(&self) -> f64 {
        dot(self.rows[0], cross(self.rows[1], self.rows[2]))
    }

    pub fn volume(&self) -> f64 {
        abs(self.determinant())
    }

    /// `f1·l1 + f2·l2 + f3·l3`
    pub fn frac_to_cart(&self, frac: Vec3) -> Vec3 {
        let [l1, l2, l3] = self.rows;
        [
            frac[0] * l1[0] + frac[1] * l2[0] + frac[2] * l3[0],
            frac[0] * l1[1] + frac[1] * l2[1] + frac[2] * l3[1],
            frac[0] * l1[2] + frac[1] * l2[2] + frac[2] * l3[2],
        ]
    }

    pub fn cart_to_frac(&self, cart: Vec3) -> Vec3 {
        let inv = &self.inverse;
        [
            cart[0] * inv[0][0] + cart[1] * inv[1][0] + cart[2] * inv[2][0],
            cart[0] * inv[0][1] + cart[1] * inv[1][1] + cart[2] * inv[2][1],
            cart[0] * inv[0][2] + cart[1] * inv[1][2] + cart[2] * inv[2][2],
        ]
    }

    /// Distance between opposite faces of the cell along each axis.
    ///
    /// The width along axis k is `1 / |b_k|` where `b_k` is the k-th
    /// reciprocal vector (without the 2π factor). Unlike row norms this is
    /// correct for skewed cells.
    pub fn perpendicular_widths(&self) -> Vec3 {
        let inv = &self.inverse;
        let mut widths = [0.0; 3];
        for (k, w) in widths.iter_mut().enumerate() {
            let b = [inv[0][k], inv[1][k], inv[2][k]];
            *w = 1.0 / norm(b);
        }
        widths
    }

    /// Apply a 3×3 matrix to every lattice row (`l' = R·l`).
    pub fn transformed(&self, matrix: &[Vec3; 3]) -> Result<Self> {
        Self::new(self.rows.map(|r| mat_vec(matrix, r)))
    }
}

pub fn mat_vec(m: &[Vec3; 3], v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

/// A periodic crystal: atomic numbers, cartesian positions (Å) and a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Crystal {
    atomic_numbers: Vec<u8>,
    cart_coords: Vec<Vec3>,
    lattice: Lattice,
    id: Option<String>,
}

impl Crystal {
    pub fn new(atomic_numbers: Vec<u8>, cart_coords: Vec<Vec3>, lattice: Lattice, id: Option<String>) -> Result<Self> {
        if atomic_numbers.is_empty() {
            return Err(Error::InvalidCrystal("crystal has no atoms".into()));
        }
        if atomic_numbers.len() != cart_coords.len() {
            return Err(Error::InvalidCrystal(format!(
                "{} atomic numbers but {} coordinates",
                atomic_numbers.len(),
                cart_coords.len()
            )));
        }
        if let Some(&z) = atomic_numbers.iter().find(|&&z| z == 0 || z > MAX_ATOMIC_NUMBER) {
            return Err(Error::UnknownElement(format!("atomic number {z}")));
        }
        if !cart_coords.iter().all(|c| all_finite(c)) {
            return Err(Error::InvalidCrystal("non-finite coordinate".into()));
        }
        let crystal = Self { atomic_numbers, cart_coords, lattice, id };
        crystal.check_duplicates()?;
        Ok(crystal)
    }

    fn check_duplicates(&self) -> Result<()> {
        let fracs = self.frac_coords();
        for i in 0..fracs.len() {
            for j in (i + 1)..fracs.len() {
                let mut d = sub(fracs[j], fracs[i]);
                for x in d.iter_mut() {
                    *x -= round(*x);
                }
                // the nearest image is not always the rounded one in skewed cells
                for a in -1..=1 {
                    for b in -1..=1 {
                        for c in -1..=1 {
                            let f = [d[0] + a as f64, d[1] + b as f64, d[2] + c as f64];
                            if norm(self.lattice.frac_to_cart(f)) < DUPLICATE_TOLERANCE {
                                return Err(Error::InvalidCrystal(format!(
                                    "atoms {i} and {j} coincide modulo the lattice"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_atoms(&self) -> usize {
        self.atomic_numbers.len()
    }

    pub fn atomic_numbers(&self) -> &[u8] {
        &self.atomic_numbers
    }

    pub fn cart_coords(&self) -> &[Vec3] {
        &self.cart_coords
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn frac_coords(&self) -> Vec<Vec3> {
        self.cart_coords.iter().map(|&c| self.lattice.cart_to_frac(c)).collect()
    }

    /// Build from fractional coordinates.
    pub fn from_fractional(
        atomic_numbers: Vec<u8>,
        frac_coords: &[Vec3],
        lattice: Lattice,
        id: Option<String>,
    ) -> Result<Self> {
        let cart = frac_coords.iter().map(|&f| lattice.frac_to_cart(f)).collect();
        Self::new(atomic_numbers, cart, lattice, id)
    }

    /// Move every atom into the unit cell so fractional coordinates lie in `[0, 1)`.
    pub fn wrap_to_cell(&self) -> Crystal {
        let cart_coords = self.frac_coords().into_iter().map(|f| self.lattice.frac_to_cart(f.map(wrap_unit))).collect();
        Crystal { cart_coords, ..self.clone() }
    }

    /// Rigid translation of all atoms (lattice unchanged).
    pub fn translated(&self, shift: Vec3) -> Crystal {
        Crystal { cart_coords: self.cart_coords.iter().map(|&c| add(c, shift)).collect(), ..self.clone() }
    }

    /// Apply the same 3×3 matrix to the lattice rows and to every position.
    pub fn transformed(&self, matrix: &[Vec3; 3]) -> Result<Crystal> {
        Ok(Crystal {
            lattice: self.lattice.transformed(matrix)?,
            cart_coords: self.cart_coords.iter().map(|&c| mat_vec(matrix, c)).collect(),
            ..self.clone()
        })
    }

    /// Reorder atoms so that new atom `k` is old atom `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Crystal> {
        let n = self.num_atoms();
        let mut seen = alloc::vec![false; n];
        if order.len() != n || order.iter().any(|&i| i >= n || core::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidCrystal("order is not a permutation of the atoms".into()));
        }
        Ok(Crystal {
            atomic_numbers: order.iter().map(|&i| self.atomic_numbers[i]).collect(),
            cart_coords: order.iter().map(|&i| self.cart_coords[i]).collect(),
            ..self.clone()
        })
    }

    /// Replicate the cell `reps[k]` times along lattice row k.
    pub fn supercell(&self, reps: [usize; 3]) -> Result<Crystal> {
        if reps.contains(&0) {
            return Err(Error::InvalidCrystal("supercell repetitions must be ≥ 1".into()));
        }
        let [l1, l2, l3] = *self.lattice.rows();
        let lattice = Lattice::new([scale(l1, reps[0] as f64), scale(l2, reps[1] as f64), scale(l3, reps[2] as f64)])?;
        let mut numbers = Vec::new();
        let mut coords = Vec::new();
        for a in 0..reps[0] {
            for b in 0..reps[1] {
                for c in 0..reps[2] {
                    let shift = self.lattice.frac_to_cart([a as f64, b as f64, c as f64]);
                    for (&z, &x) in self.atomic_numbers.iter().zip(&self.cart_coords) {
                        numbers.push(z);
                        coords.push(add(x, shift));
                    }
                }
            }
        }
        Crystal::new(numbers, coords, lattice, self.id.clone())
    }
}

fn wrap_unit(x: f64) -> f64 {
    let w = x - floor(x);
    // x slightly below an integer can round up to exactly 1.0
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// A crystal paired with a scalar regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyRecord {
    pub crystal: Crystal,
    pub target: f64,
}

impl PropertyRecord {
    pub fn new(crystal: Crystal, target: f64) -> Result<Self> {
        if !target.is_finite() {
            return Err(Error::Data(format!("target {target} is not finite")));
        }
        Ok(Self { crystal, target })
    }
}
