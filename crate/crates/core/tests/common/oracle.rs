//! Brute-force periodic neighbor enumeration.

use adagnn_core::crystal::Crystal;
use adagnn_core::graph::neighbor_images;

pub type Key = (usize, usize, [i32; 3]);

/// Every image within `cutoff`, found by scanning a supercell wide enough to
/// hold the cutoff sphere around any atom of the original cell.
pub fn brute_force(crystal: &Crystal, cutoff: f64) -> Vec<(Key, f64)> {
    let rows = crystal.lattice().rows();
    let min_row = rows.iter().map(|r| norm(*r)).fold(f64::INFINITY, f64::min);
    let widths = crystal.lattice().perpendicular_widths();
    let min_width = widths.iter().cloned().fold(f64::INFINITY, f64::min);
    // stored coordinates may sit up to two cells away from the origin
    let reach = (cutoff / min_width).ceil() as i32 + 3;
    assert!(min_row > 0.0);
    let xs = crystal.cart_coords();
    let mut out = Vec::new();
    for (i, xi) in xs.iter().enumerate() {
        for (j, xj) in xs.iter().enumerate() {
            for a in -reach..=reach {
                for b in -reach..=reach {
                    for c in -reach..=reach {
                        let mut p = *xj;
                        for k in 0..3 {
                            p[k] += a as f64 * rows[0][k] + b as f64 * rows[1][k] + c as f64 * rows[2][k];
                        }
                        let d = norm([p[0] - xi[0], p[1] - xi[1], p[2] - xi[2]]);
                        if d > 0.0 && d <= cutoff {
                            out.push(((i, j, [a, b, c]), d));
                        }
                    }
                }
            }
        }
    }
    out.sort_by_key(|x| x.0);
    out
}

pub fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn optimized(crystal: &Crystal, cutoff: f64) -> Vec<(Key, f64)> {
    let mut out: Vec<(Key, f64)> = neighbor_images(crystal, cutoff)
        .unwrap()
        .into_iter()
        .enumerate()
        .flat_map(|(i, l)| l.into_iter().map(move |nb| ((i, nb.atom, nb.offset), nb.distance)))
        .collect();
    out.sort_by_key(|x| x.0);
    out
}

/// Number of neighbors when both searches agree, otherwise the first difference.
pub fn compare(crystal: &Crystal, cutoff: f64) -> Result<usize, String> {
    let expected = brute_force(crystal, cutoff);
    let got = optimized(crystal, cutoff);
    let keys = |v: &[(Key, f64)]| v.iter().map(|x| x.0).collect::<Vec<_>>();
    if keys(&got) != keys(&expected) {
        return Err(format!("neighbor keys differ at cutoff {cutoff}: {} vs {}", got.len(), expected.len()));
    }
    for (g, e) in got.iter().zip(&expected) {
        if (g.1 - e.1).abs() > 1e-12 {
            return Err(format!("{:?}: {} vs {}", g.0, g.1, e.1));
        }
    }
    Ok(got.len())
}

pub fn assert_same(crystal: &Crystal, cutoff: f64) -> usize {
    compare(crystal, cutoff).unwrap()
}
