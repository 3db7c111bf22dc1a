//! Rectangle rule on the torus (-pi, pi]^d.
//!
//! Nodes sit at cell midpoints, so xi = 0 and xi = +/-pi are never sampled.
//! For smooth periodic integrands the rule converges geometrically, and it
//! integrates trigonometric polynomials of degree below `points` exactly.

use std::f64::consts::PI;

/// Default number of nodes per axis for the given dimension.
pub fn default_points(dim: usize) -> usize {
    match dim {
        1 => 4096,
        2 => 512,
        _ => 96,
    }
}

/// (2 pi)^{-d} * integral over the torus of `f`, by the `points`^d rectangle rule.
pub fn torus_mean(dim: usize, points: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    torus_mean_indexed(dim, points, |_, xi| f(xi))
}

/// Values of `f` at the nodes, in the order [`torus_mean_indexed`] visits them.
pub fn torus_nodes(dim: usize, points: usize, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.pow(dim as u32));
    torus_mean_indexed(dim, points, |_, xi| {
        out.push(f(xi));
        0.0
    });
    out
}

/// Same rule, with `f` also given the flat node index. Sums are grouped by row
/// and plane, so equal node values give bitwise equal means.
pub fn torus_mean_indexed(dim: usize, points: usize, mut f: impl FnMut(usize, &[f64]) -> f64) -> f64 {
    assert!((1..=3).contains(&dim) && points > 0);
    let h = 2.0 * PI / points as f64;
    let node = |k: usize| -PI + h * (k as f64 + 0.5);
    let mut xi = [0.0; 3];
    let mut total = 0.0;
    let mut i = 0;
    match dim {
        1 => {
            for a in 0..points {
                xi[0] = node(a);
                total += f(i, &xi[..1]);
                i += 1;
            }
        }
        2 => {
            for a in 0..points {
                xi[0] = node(a);
                let mut row = 0.0;
                for b in 0..points {
                    xi[1] = node(b);
                    row += f(i, &xi[..2]);
                    i += 1;
                }
                total += row;
            }
        }
        _ => {
            for a in 0..points {
                xi[0] = node(a);
                let mut plane = 0.0;
                for b in 0..points {
                    xi[1] = node(b);
                    let mut row = 0.0;
                    for c in 0..points {
                        xi[2] = node(c);
                        row += f(i, &xi[..3]);
                        i += 1;
                    }
                    plane += row;
                }
                total += plane;
            }
        }
    }
    total / (points as f64).powi(dim as i32)
}
