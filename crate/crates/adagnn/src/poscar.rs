//! VASP POSCAR structures.
//!
//! Reads the VASP 5 layout: comment, scale, three lattice rows, species
//! symbols, counts, an optional `Selective dynamics` line, the coordinate
//! mode and one row per atom. A negative scale is a target cell volume.
//! Species such as `Fe_pv` or `Fe/abc123` are reduced to the element symbol.

use std::fmt::Write as _;

use adagnn_core::crystal::{scale, Lattice, Vec3};
use adagnn_core::elements::{atomic_number, symbol_of};
use adagnn_core::Crystal;

use crate::error::{Error, Result};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), last: 0 }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => {
                Err(Error::Parse { line: self.last + 1, message: format!("unexpected end of file, expected {what}") })
            }
        }
    }
}

fn floats(line: usize, text: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split_whitespace()
        .take(n)
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse { line, message: format!("{what}: {e}") })?;
    if values.len() < n {
        return Err(Error::Parse { line, message: format!("{what}: expected {n} numbers, found {}", values.len()) });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse { line, message: format!("{what}: non-finite value") });
    }
    Ok(values)
}

fn element_symbol(token: &str) -> &str {
    token.split(['_', '/']).next().unwrap_or(token)
}

pub fn parse_poscar(text: &str) -> Result<Crystal> {
    let mut lines = Lines::new(text);
    let (_, comment) = lines.next("comment line")?;
    let (scale_line, scale_text) = lines.next("scale factor")?;
    let factor = floats(scale_line, scale_text, 1, "scale factor")?[0];
    if factor == 0.0 {
        return Err(Error::Parse { line: scale_line, message: "scale factor must be nonzero".into() });
    }
    let mut rows = [[0.0; 3]; 3];
    for row in &mut rows {
        let (n, l) = lines.next("lattice vector")?;
        let v = floats(n, l, 3, "lattice vector")?;
        *row = [v[0], v[1], v[2]];
    }
    let raw = Lattice::new(rows).map_err(|e| Error::Parse { line: scale_line + 3, message: e.to_string() })?;
    let multiplier = if factor > 0.0 { factor } else { (-factor / raw.volume()).cbrt() };
    let lattice = Lattice::new(rows.map(|r| scale(r, multiplier)))
        .map_err(|e| Error::Parse { line: scale_line + 3, message: e.to_string() })?;

    let (species_line, species_text) = lines.next("species line")?;
    let species: Vec<&str> = species_text.split_whitespace().collect();
    if species.is_empty() || species[0].parse::<f64>().is_ok() {
        return Err(Error::Parse { line: species_line, message: "expected element symbols (VASP 5 format)".into() });
    }
    let numbers: Vec<u8> = species
        .iter()
        .map(|s| {
            atomic_number(element_symbol(s))
                .map_err(|_| Error::UnknownElement { line: species_line, symbol: (*s).to_string() })
        })
        .collect::<Result<_>>()?;

    let (count_line, count_text) = lines.next("atom counts")?;
    let counts: Vec<usize> = count_text
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse { line: count_line, message: format!("atom counts: {e}") })?;
    if counts.len() != numbers.len() {
        return Err(Error::Parse {
            line: count_line,
            message: format!("{} counts for {} species", counts.len(), numbers.len()),
        });
    }

    let (mut mode_line, mut mode) = lines.next("coordinate mode")?;
    if mode.trim_start().starts_with(['S', 's']) {
        (mode_line, mode) = lines.next("coordinate mode")?;
    }
    let cartesian = match mode.trim_start().chars().next() {
        Some('C' | 'c' | 'K' | 'k') => true,
        Some('D' | 'd') => false,
        _ => {
            return Err(Error::Parse { line: mode_line, message: format!("unknown coordinate mode {:?}", mode.trim()) })
        }
    };

    let mut atoms = Vec::new();
    let mut coords: Vec<Vec3> = Vec::new();
    for (&z, &count) in numbers.iter().zip(&counts) {
        for _ in 0..count {
            let (n, l) = lines.next("atom coordinates")?;
            let v = floats(n, l, 3, "atom coordinates")?;
            let p = [v[0], v[1], v[2]];
            coords.push(if cartesian { scale(p, multiplier) } else { lattice.frac_to_cart(p) });
            atoms.push(z);
        }
    }
    let id = Some(comment.trim().to_string()).filter(|s| !s.is_empty());
    Ok(Crystal::new(atoms, coords, lattice, id)?)
}

/// POSCAR text in cartesian mode, species grouped in order of first appearance.
///
/// Atoms are reordered by species group; re-parsing yields the same crystal
/// up to that reordering and float formatting (values are written with
/// round-trip precision).
pub fn write_poscar(crystal: &Crystal) -> String {
    let mut species: Vec<u8> = Vec::new();
    for &z in crystal.atomic_numbers() {
        if !species.contains(&z) {
            species.push(z);
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "{}", crystal.id().unwrap_or(""));
    out.push_str("1.0\n");
    for row in crystal.lattice().rows() {
        let _ = writeln!(out, "{:?} {:?} {:?}", row[0], row[1], row[2]);
    }
    let symbols: Vec<&str> = species.iter().map(|&z| symbol_of(z as u32).unwrap_or("X")).collect();
    let _ = writeln!(out, "{}", symbols.join(" "));
    let counts: Vec<String> =
        species.iter().map(|&z| crystal.atomic_numbers().iter().filter(|&&x| x == z).count().to_string()).collect();
    let _ = writeln!(out, "{}", counts.join(" "));
    out.push_str("Cartesian\n");
    for &z in &species {
        for (p, _) in crystal.cart_coords().iter().zip(crystal.atomic_numbers()).filter(|(_, &x)| x == z) {
            let _ = writeln!(out, "{:?} {:?} {:?}", p[0], p[1], p[2]);
        }
    }
    out
}

pub fn read_poscar(path: &std::path::Path) -> Result<Crystal> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_poscar(&text)
}
